//! Sparse homogeneous polynomials with double-precision complex coefficients,
//! and the monomial-line text format shared by map and polynomial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

/// A homogeneous polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct HomPoly {
    nvars: usize,
    degree: u32,
    terms: Vec<(Vec<u32>, C64)>,
}

impl HomPoly {
    /// Builds a polynomial, merging repeated monomials and dropping zeros.
    pub fn new(nvars: usize, degree: u32, terms: Vec<(Vec<u32>, C64)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: e.len() });
            }
            let s: u32 = e.iter().sum();
            if s != degree {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("monomial {e:?} has degree {s}, expected {degree}"),
                });
            }
            *merged.entry(e).or_default() += c;
        }
        let terms = merged.into_iter().filter(|(_, c)| *c != C64::new(0.0, 0.0)).collect();
        Ok(Self { nvars, degree, terms })
    }

    /// `z_i^degree`.
    pub fn power(nvars: usize, i: usize, degree: u32) -> Self {
        let mut e = vec![0; nvars];
        e[i] = degree;
        Self { nvars, degree, terms: vec![(e, C64::new(1.0, 0.0))] }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[(Vec<u32>, C64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        let pw = power_table(z, self.degree);
        self.eval_with(&pw)
    }

    fn eval_with(&self, pw: &[Vec<C64>]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().enumerate().fold(*c, |acc, (i, &k)| acc * pw[i][k as usize]))
            .sum()
    }

    /// Partial derivative in variable `j` (degree drops by one).
    pub fn derivative(&self, j: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[j] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[j] -= 1;
                (e2, c * e[j] as f64)
            })
            .collect();
        Self { nvars: self.nvars, degree: self.degree.saturating_sub(1), terms }
    }

    /// Largest coefficient modulus.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

/// `pw[i][m] = z_i^m` for `m ≤ degree`.
pub fn power_table(z: &[C64], degree: u32) -> Vec<Vec<C64>> {
    z.iter()
        .map(|&zi| {
            let mut v = Vec::with_capacity(degree as usize + 1);
            let mut acc = C64::new(1.0, 0.0);
            for _ in 0..=degree {
                v.push(acc);
                acc *= zi;
            }
            v
        })
        .collect()
}

/// Evaluates several polynomials of a common degree sharing one power table.
pub fn eval_all(polys: &[HomPoly], z: &[C64]) -> Vec<C64> {
    let deg = polys.iter().map(|p| p.degree).max().unwrap_or(0);
    let pw = power_table(z, deg);
    polys.iter().map(|p| p.eval_with(&pw)).collect()
}

/// Parsed contents of a monomial-line file.
#[derive(Clone, Debug)]
pub struct MonomialFile {
    pub kind: String,
    pub k: usize,
    pub d: u32,
    /// `(component, exponents, coefficient)`.
    pub lines: Vec<(usize, Vec<u32>, C64)>,
}

/// Parses `<kind> k=<int> d=<int>` followed by
/// `component e_0 … e_k re im` lines. Blank lines and `#` comments are skipped.
pub fn parse_monomial_file(text: &str, expected_kind: &str) -> Result<MonomialFile> {
    let mut header: Option<(usize, u32)> = None;
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some((k, d)) = header else {
            if toks.first() != Some(&expected_kind) {
                return Err(perr(format!("expected `{expected_kind}` header")));
            }
            let mut k = None;
            let mut d = None;
            for t in &toks[1..] {
                let (key, val) = t.split_once('=').ok_or_else(|| perr(format!("bad field `{t}`")))?;
                let v: u32 = val.parse().map_err(|_| perr(format!("bad integer `{val}`")))?;
                match key {
                    "k" => k = Some(v as usize),
                    "d" => d = Some(v),
                    _ => return Err(perr(format!("unknown field `{key}`"))),
                }
            }
            let (k, d) = k.zip(d).ok_or_else(|| perr("header needs k= and d=".into()))?;
            header = Some((k, d));
            continue;
        };
        if toks.len() != k + 4 {
            return Err(perr(format!("expected {} fields, got {}", k + 4, toks.len())));
        }
        let comp: usize = toks[0].parse().map_err(|_| perr(format!("bad component `{}`", toks[0])))?;
        let exps = toks[1..=k + 1]
            .iter()
            .map(|t| t.parse::<u32>().map_err(|_| perr(format!("bad exponent `{t}`"))))
            .collect::<Result<Vec<u32>>>()?;
        if exps.iter().sum::<u32>() != d {
            return Err(perr(format!("inhomogeneous monomial {exps:?}, expected degree {d}")));
        }
        let re: f64 = toks[k + 2].parse().map_err(|_| perr(format!("bad real part `{}`", toks[k + 2])))?;
        let im: f64 = toks[k + 3].parse().map_err(|_| perr(format!("bad imaginary part `{}`", toks[k + 3])))?;
        lines.push((comp, exps, C64::new(re, im)));
    }
    let (k, d) = header.ok_or(Error::Parse { line: 0, msg: "empty file".into() })?;
    Ok(MonomialFile { kind: expected_kind.to_string(), k, d, lines })
}

/// Inverse of [`parse_monomial_file`]; `{:e}` keeps full round-trip precision.
pub fn write_monomial_file(kind: &str, k: usize, d: u32, comps: &[&HomPoly]) -> String {
    let mut s = format!("{kind} k={k} d={d}\n");
    for (ci, p) in comps.iter().enumerate() {
        for (e, c) in p.terms() {
            let _ = write!(s, "{ci}");
            for x in e {
                let _ = write!(s, " {x}");
            }
            let _ = writeln!(s, " {:e} {:e}", c.re, c.im);
        }
    }
    s
}
