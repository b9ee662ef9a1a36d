//! Exact backend at `k = 2`: homogeneous polynomials with arbitrary-precision
//! complex coefficients, implicitization of images of lines, curve pullbacks
//! and curve–curve intersections.

pub mod big;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rug::Complex;

use self::big::*;
use crate::endomorphism::ProjectiveMap;
use crate::error::{Error, Result};
use crate::poly::{parse_monomial_file, write_monomial_file, HomPoly};
use crate::projective::{HomogeneousPoint, LinearSubspace};
use crate::rng::{complex_normal, stream};

type C64 = Complex64;

pub const DEFAULT_BITS: u32 = 256;

/// Homogeneous polynomial in `z0, z1, z2`; `coeffs[a*(D+1)+b]` multiplies
/// `z0^a z1^b z2^(D-a-b)`.
#[derive(Clone, Debug)]
pub struct HomPoly2 {
    degree: u32,
    prec: u32,
    coeffs: Vec<Complex>,
}

impl HomPoly2 {
    pub fn zero(degree: u32, prec: u32) -> Self {
        let n = (degree as usize + 1).pow(2);
        Self { degree, prec, coeffs: vec![zero(prec); n] }
    }

    fn idx(&self, a: u32, b: u32) -> usize {
        (a * (self.degree + 1) + b) as usize
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn coeff(&self, a: u32, b: u32) -> &Complex {
        &self.coeffs[self.idx(a, b)]
    }

    pub fn set(&mut self, a: u32, b: u32, c: Complex) {
        let i = self.idx(a, b);
        self.coeffs[i] = c;
    }

    fn monomials(&self) -> impl Iterator<Item = (u32, u32)> {
        let d = self.degree;
        (0..=d).flat_map(move |a| (0..=d - a).map(move |b| (a, b)))
    }

    pub fn from_hompoly(p: &HomPoly, prec: u32) -> Result<Self> {
        if p.nvars() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: p.nvars() });
        }
        let mut out = Self::zero(p.degree(), prec);
        for (e, c) in p.terms() {
            let i = out.idx(e[0], e[1]);
            out.coeffs[i] += &big(prec, *c);
        }
        Ok(out)
    }

    pub fn to_hompoly(&self) -> HomPoly {
        let terms = self
            .monomials()
            .map(|(a, b)| (vec![a, b, self.degree - a - b], to_c64(self.coeff(a, b))))
            .collect();
        HomPoly::new(3, self.degree, terms).expect("homogeneous by construction")
    }

    /// `l0 z0 + l1 z1 + l2 z2`.
    pub fn linear(l: [C64; 3], prec: u32) -> Self {
        let mut p = Self::zero(1, prec);
        p.set(1, 0, big(prec, l[0]));
        p.set(0, 1, big(prec, l[1]));
        p.set(0, 0, big(prec, l[2]));
        p
    }

    pub fn constant(c: C64, prec: u32) -> Self {
        let mut p = Self::zero(0, prec);
        p.set(0, 0, big(prec, c));
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec.max(other.prec);
        let mut out = Self::zero(self.degree + other.degree, prec);
        for (a, b) in self.monomials() {
            let x = self.coeff(a, b);
            if modulus(x) == 0.0 {
                continue;
            }
            for (c, d) in other.monomials() {
                let y = other.coeff(c, d);
                let i = out.idx(a + c, b + d);
                out.coeffs[i] += &Complex::with_val(prec, x * y);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree != other.degree {
            return Err(Error::DimensionMismatch { expected: self.degree as usize, got: other.degree as usize });
        }
        let mut out = self.clone();
        for (o, c) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += c;
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Complex) -> Self {
        let mut out = self.clone();
        for o in out.coeffs.iter_mut() {
            *o *= c;
        }
        out
    }

    pub fn pow(&self, m: u32) -> Self {
        let mut out = Self::constant(C64::new(1.0, 0.0), self.prec);
        for _ in 0..m {
            out = out.mul(self);
        }
        out
    }

    pub fn eval_big(&self, z: &[Complex; 3]) -> Complex {
        let prec = self.prec;
        let d = self.degree as usize;
        let pw: Vec<Vec<Complex>> = z
            .iter()
            .map(|zi| {
                let mut v = vec![one(prec)];
                for k in 0..d {
                    let next = Complex::with_val(prec, &v[k] * zi);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = zero(prec);
        for (a, b) in self.monomials() {
            let c = self.coeff(a, b);
            if modulus(c) == 0.0 {
                continue;
            }
            let t = Complex::with_val(prec, c * &pw[0][a as usize]);
            let t = t * &pw[1][b as usize];
            acc += t * &pw[2][(self.degree - a - b) as usize];
        }
        acc
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        let zb = [big(self.prec, z[0]), big(self.prec, z[1]), big(self.prec, z[2])];
        to_c64(&self.eval_big(&zb))
    }

    /// `self(G0, G1, G2)` for polynomials `G_i` of a common degree.
    pub fn compose(&self, g: &[HomPoly2; 3]) -> Self {
        let e = g[0].degree;
        let d = self.degree;
        let pw: Vec<Vec<HomPoly2>> = g
            .iter()
            .map(|gi| {
                let mut v = vec![Self::constant(C64::new(1.0, 0.0), self.prec)];
                for k in 0..d as usize {
                    let next = v[k].mul(gi);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Self::zero(d * e, self.prec);
        for (a, b) in self.monomials() {
            let c = self.coeff(a, b);
            if modulus(c) == 0.0 {
                continue;
            }
            let term = pw[0][a as usize].mul(&pw[1][b as usize]).mul(&pw[2][(d - a - b) as usize]).scale(c);
            out = out.add(&term).expect("same degree");
        }
        out
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(modulus).fold(0.0, f64::max)
    }

    /// Scaled so the largest coefficient has modulus 1.
    pub fn normalized(&self) -> Self {
        let m = self.max_coeff();
        if m == 0.0 {
            return self.clone();
        }
        let s = Complex::with_val(self.prec, 1.0 / m);
        self.scale(&s)
    }

    /// `|P(x)| / ‖x‖_∞^D` for a normalized point (coefficients normalized first).
    pub fn relative_value(&self, x: &HomogeneousPoint) -> f64 {
        self.normalized().eval(x.coords()).norm()
    }

    pub fn to_text(&self) -> String {
        write_monomial_file("poly", 2, self.degree, &[&self.to_hompoly()])
    }

    pub fn parse(text: &str, prec: u32) -> Result<Self> {
        let f = parse_monomial_file(text, "poly")?;
        if f.k != 2 {
            return Err(Error::Parse { line: 1, msg: format!("poly files need k=2, got k={}", f.k) });
        }
        let terms = f.lines.into_iter().map(|(_, e, c)| (e, c)).collect();
        Self::from_hompoly(&HomPoly::new(3, f.d, terms)?, prec)
    }
}

/// Smallest relative pivot of the degree `3(d-1)+1` Macaulay matrix of three
/// ternary forms; zero (up to precision) exactly when they share a
/// nontrivial common zero.
pub fn macaulay_min_pivot(components: &[HomPoly], bits: u32) -> Result<f64> {
    if components.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: components.len() });
    }
    let d = components[0].degree();
    let target = 3 * (d - 1) + 1;
    let shift = target - d;
    let cols: Vec<(u32, u32)> = (0..=target).flat_map(|a| (0..=target - a).map(move |b| (a, b))).collect();
    let col_of = |a: u32, b: u32| cols.iter().position(|&c| c == (a, b)).expect("monomial in range");
    let mut rows: Vec<Vec<Complex>> = Vec::new();
    for f in components {
        for a in 0..=shift {
            for b in 0..=shift - a {
                let mut row = vec![zero(bits); cols.len()];
                for (e, c) in f.terms() {
                    row[col_of(e[0] + a, e[1] + b)] += &big(bits, *c);
                }
                rows.push(row);
            }
        }
    }
    let scale = rows.iter().flatten().map(modulus).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Full pivoting; the rank is full iff `cols.len()` nonzero pivots exist.
    let ncol = cols.len();
    let mut min_pivot = f64::INFINITY;
    let mut m = rows;
    let mut col_perm: Vec<usize> = (0..ncol).collect();
    for step in 0..ncol {
        let mut best = (step, step, -1.0f64);
        for (r, row) in m.iter().enumerate().skip(step) {
            for &c in &col_perm[step..] {
                let v = modulus(&row[c]);
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        let (pr, pc, pv) = best;
        min_pivot = min_pivot.min(pv / scale);
        if pv == 0.0 {
            break;
        }
        m.swap(step, pr);
        let cpos = col_perm.iter().position(|&c| c == pc).unwrap();
        col_perm.swap(step, cpos);
        let pivot = m[step][pc].clone();
        let (head, tail) = m.split_at_mut(step + 1);
        let prow = &head[step];
        for row in tail.iter_mut() {
            let factor = Complex::with_val(bits, &row[pc] / &pivot);
            if modulus(&factor) == 0.0 {
                continue;
            }
            for &c in &col_perm[step..] {
                let sub = Complex::with_val(bits, &factor * &prow[c]);
                row[c] -= &sub;
            }
        }
    }
    Ok(min_pivot)
}

/// Defining polynomial of an image curve with its covering multiplicity.
#[derive(Clone, Debug)]
pub struct ImplicitCurve {
    /// Square-free defining polynomial, coefficients normalized to max 1.
    pub poly: HomPoly2,
    /// Degree of the parametrization onto the curve.
    pub multiplicity: u32,
}

impl ImplicitCurve {
    pub fn degree(&self) -> u32 {
        self.poly.degree()
    }
}

/// Components of `F^n ∘ ℓ` for the line parametrization
/// `ℓ(t) = e0 + t e1`, as univariate polynomials in `t` of degree `d^n`.
pub fn parametrize_image(line: &LinearSubspace, f: &ProjectiveMap, n: usize, prec: u32) -> Result<[UPoly; 3]> {
    if line.dimension() != 1 || line.k() != 2 || f.k() != 2 {
        return Err(Error::WrongDimension(line.dimension()));
    }
    let b = line.orthonormal_basis();
    let mut g: Vec<UPoly> = (0..3).map(|i| vec![big(prec, b[0][i]), big(prec, b[1][i])]).collect();
    for _ in 0..n {
        let deg = f.degree() as usize;
        let pw: Vec<Vec<UPoly>> = g
            .iter()
            .map(|gi| {
                let mut v: Vec<UPoly> = vec![vec![one(prec)]];
                for k in 0..deg {
                    let next = upoly_mul(&v[k], gi, prec);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut next = Vec::with_capacity(3);
        for comp in f.components() {
            let len = (g[0].len() - 1) * deg + 1;
            let mut acc = vec![zero(prec); len];
            for (e, c) in comp.terms() {
                let t = upoly_mul(&upoly_mul(&pw[0][e[0] as usize], &pw[1][e[1] as usize], prec), &pw[2][e[2] as usize], prec);
                let cb = big(prec, *c);
                for (a, x) in acc.iter_mut().zip(&t) {
                    *a += &Complex::with_val(prec, x * &cb);
                }
            }
            next.push(acc);
        }
        g = next;
    }
    Ok([g[0].clone(), g[1].clone(), g[2].clone()])
}

/// A random unitary frame, deterministic in `seed`.
fn random_unitary(seed: u64) -> DMatrix<C64> {
    let mut rng = stream(seed, 0);
    let m = DMatrix::from_fn(3, 3, |_, _| complex_normal(&mut rng));
    m.qr().q()
}

/// Rows of `U` as linear forms; composing with them realizes `P ↦ P∘U`.
fn linear_forms(u: &DMatrix<C64>, prec: u32) -> [HomPoly2; 3] {
    let row = |i: usize| HomPoly2::linear([u[(i, 0)], u[(i, 1)], u[(i, 2)]], prec);
    [row(0), row(1), row(2)]
}

/// Defining polynomial of `f^n(L')`, by resultant elimination of the line
/// parameter followed by an exact `m`-th root.
pub fn implicitize_image(line: &LinearSubspace, f: &ProjectiveMap, n: usize, bits: u32) -> Result<ImplicitCurve> {
    let prec = bits;
    let g = parametrize_image(line, f, n, prec)?;
    let big_n = g[0].len() - 1;
    let u = random_unitary(0x1a7 + n as u64);
    // Rotated parametrization: G̃ = U G.
    let gt: Vec<UPoly> = (0..3)
        .map(|i| {
            (0..=big_n)
                .map(|k| {
                    let mut acc = zero(prec);
                    for j in 0..3 {
                        acc += &Complex::with_val(prec, &g[j][k] * &big(prec, u[(i, j)]));
                    }
                    acc
                })
                .collect()
        })
        .collect();

    // R(x, y) = Res_t(x g̃0 - g̃1, y g̃0 - g̃2) sampled on a roots-of-unity grid.
    let m1 = big_n + 1;
    let grid: Vec<Complex> = (0..m1).map(|i| root_of_unity(prec, i as i64, m1)).collect();
    let values: Vec<Complex> = (0..m1 * m1)
        .into_par_iter()
        .map(|ij| {
            let (x, y) = (&grid[ij / m1], &grid[ij % m1]);
            let a: UPoly = (0..=big_n).map(|k| Complex::with_val(prec, x * &gt[0][k]) - &gt[1][k]).collect();
            let b: UPoly = (0..=big_n).map(|k| Complex::with_val(prec, y * &gt[0][k]) - &gt[2][k]).collect();
            resultant(&a, &b, prec)
        })
        .collect();
    // 2D inverse DFT: first along y for each x row, then along x.
    let rows: Vec<UPoly> = (0..m1).map(|i| interpolate_roots_of_unity(&values[i * m1..(i + 1) * m1], prec)).collect();
    let mut r = vec![vec![zero(prec); m1]; m1];
    for b in 0..m1 {
        let col: Vec<Complex> = rows.iter().map(|row| row[b].clone()).collect();
        let c = interpolate_roots_of_unity(&col, prec);
        for a in 0..m1 {
            r[a][b] = c[a].clone();
        }
    }
    let rmax = r.iter().flatten().map(modulus).fold(0.0, f64::max);
    if rmax == 0.0 || !rmax.is_finite() {
        return Err(Error::ResultantOverflow(format!("resultant max coefficient {rmax:e}")));
    }
    let noise = precision_floor(prec) * 1e6;
    for a in 0..m1 {
        for b in 0..m1 {
            if a + b > big_n && modulus(&r[a][b]) > noise * rmax {
                return Err(Error::PrecisionExhausted(format!(
                    "resultant term x^{a} y^{b} above total degree {big_n}"
                )));
            }
        }
    }

    let m = image_multiplicity(&gt, prec)?;
    let e = (big_n as u32) / m;
    if e * m != big_n as u32 {
        return Err(Error::PrecisionExhausted(format!("multiplicity {m} does not divide {big_n}")));
    }
    let root = graded_root(&r, big_n, m, e, prec)?;

    // Homogenize in rotated coordinates: x = w1/w0, y = w2/w0.
    let mut pt = HomPoly2::zero(e, prec);
    for a in 0..=e {
        for b in 0..=e - a {
            // coefficient of x^a y^b -> w0^{e-a-b} w1^a w2^b
            pt.set(e - a - b, a, root[a as usize][b as usize].clone());
        }
    }
    let poly = pt.compose(&linear_forms(&u, prec)).normalized();
    Ok(ImplicitCurve { poly, multiplicity: m })
}

fn precision_floor(prec: u32) -> f64 {
    2f64.powi(-(prec as i32).min(1000)).max(f64::MIN_POSITIVE)
}

/// Number of parameter values over a generic image point, from clustering
/// the images of the roots of `h(G(t))` for a random linear form `h`.
fn image_multiplicity(g: &[UPoly], prec: u32) -> Result<u32> {
    let mut rng = stream(0x51ce, 0);
    let h: Vec<Complex> = (0..3).map(|_| big(prec, complex_normal(&mut rng))).collect();
    let len = g[0].len();
    let hp: UPoly = (0..len)
        .map(|k| {
            let mut acc = zero(prec);
            for j in 0..3 {
                acc += &Complex::with_val(prec, &g[j][k] * &h[j]);
            }
            acc
        })
        .collect();
    let roots = poly_roots(&hp, prec);
    let pts: Vec<Vec<Complex>> =
        roots.iter().map(|t| (0..3).map(|j| upoly_eval(&g[j], t, prec)).collect()).collect();
    // Coincidence test at working precision: all 2x2 minors of the two lifts
    // vanish relative to their norms.
    let tol = precision_floor(prec / 2);
    let same = |a: &[Complex], b: &[Complex]| -> bool {
        let na = a.iter().map(modulus).fold(0.0, f64::max);
        let nb = b.iter().map(modulus).fold(0.0, f64::max);
        (0..3).all(|i| {
            (i + 1..3).all(|j| {
                let m = Complex::with_val(prec, &a[i] * &b[j]) - Complex::with_val(prec, &a[j] * &b[i]);
                modulus(&m) <= tol * na * nb
            })
        })
    };
    let mut sizes: Vec<u32> = Vec::new();
    let mut reps: Vec<&[Complex]> = Vec::new();
    for p in &pts {
        match reps.iter().position(|q| same(q, p)) {
            Some(i) => sizes[i] += 1,
            None => {
                reps.push(p);
                sizes.push(1);
            }
        }
    }
    let m = sizes[0];
    if sizes.iter().any(|&s| s != m) {
        return Err(Error::PrecisionExhausted(format!("uneven image clusters {sizes:?}")));
    }
    Ok(m)
}

/// `R^{1/m}` truncated at total degree `e`, for a bivariate `R` with
/// `R(0,0) ≠ 0`, by the graded recurrence `n P_n = Σ (i/m - (n-i)) R_i P_{n-i}`.
fn graded_root(r: &[Vec<Complex>], big_n: usize, m: u32, e: u32, prec: u32) -> Result<Vec<Vec<Complex>>> {
    let r00 = r[0][0].clone();
    if modulus(&r00) == 0.0 {
        return Err(Error::PrecisionExhausted("curve passes through the chart origin".into()));
    }
    let e = e as usize;
    let size = big_n + 1;
    let rn: Vec<Vec<Complex>> = r.iter().map(|row| row.iter().map(|c| Complex::with_val(prec, c / &r00)).collect()).collect();
    let mut p = vec![vec![zero(prec); size]; size];
    p[0][0] = one(prec);
    let alpha = 1.0 / m as f64;
    let alpha_big = rug::Float::with_val(prec, 1) / m;
    for deg in 1..=e {
        // Coefficients of x^a y^{deg-a}.
        for a in 0..=deg {
            let b = deg - a;
            let mut acc = zero(prec);
            for i in 1..=deg {
                let factor = Complex::with_val(prec, &alpha_big * i as u32) - (deg - i) as u32;
                // piece R_i times piece P_{deg-i}, coefficient at (a, b)
                for ra in 0..=i.min(a) {
                    let rb = i - ra;
                    if rb > b || ra >= size || rb >= size {
                        continue;
                    }
                    let pa = a - ra;
                    let pb = b - rb;
                    let prod = Complex::with_val(prec, &rn[ra][rb] * &p[pa][pb]);
                    acc += Complex::with_val(prec, &prod * &factor);
                }
            }
            p[a][b] = acc / deg as u32;
        }
    }
    let _ = alpha;
    // Verify P^m = R up to the working precision.
    let mut pw = vec![vec![zero(prec); size]; size];
    pw[0][0] = one(prec);
    for _ in 0..m {
        let mut next = vec![vec![zero(prec); size]; size];
        for a in 0..size {
            for b in 0..size - a {
                if modulus(&pw[a][b]) == 0.0 {
                    continue;
                }
                for c in 0..=e {
                    for d in 0..=e - c {
                        if a + c + b + d < size {
                            next[a + c][b + d] += Complex::with_val(prec, &pw[a][b] * &p[c][d]);
                        }
                    }
                }
            }
        }
        pw = next;
    }
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..size {
        for b in 0..size - a {
            err = err.max(modulus(&Complex::with_val(prec, &pw[a][b] - &rn[a][b])));
            scale = scale.max(modulus(&rn[a][b]));
        }
    }
    if err > 1e-20 * scale {
        return Err(Error::PrecisionExhausted(format!("m-th root residual {:.2e} (m={m}, e={e}, r00={:.2e}, scale={scale:.2e})", err / scale, modulus(&r00))));
    }
    Ok(p)
}

/// `H ∘ F`, the defining polynomial of `f^*[H]`.
pub fn pullback_curve(f: &ProjectiveMap, h: &HomPoly2) -> Result<HomPoly2> {
    if f.k() != 2 {
        return Err(Error::WrongDimension(f.k()));
    }
    let g = [
        HomPoly2::from_hompoly(&f.components()[0], h.prec)?,
        HomPoly2::from_hompoly(&f.components()[1], h.prec)?,
        HomPoly2::from_hompoly(&f.components()[2], h.prec)?,
    ];
    let out = h.compose(&g);
    if !out.max_coeff().is_finite() {
        return Err(Error::PrecisionExhausted("pullback coefficients overflow".into()));
    }
    Ok(out)
}

/// Bézout-complete intersection of two plane curves with multiplicities.
pub fn intersect_curves(p: &HomPoly2, q: &HomPoly2) -> Result<Vec<(HomogeneousPoint, u32)>> {
    let prec = p.prec.max(q.prec);
    let (dp, dq) = (p.degree as usize, q.degree as usize);
    let total = dp * dq;
    if total == 0 {
        return Ok(Vec::new());
    }
    let u = random_unitary(0x1e5);
    // In rotated coordinates w = U z, so P̃(w) = P(U^* w).
    let ustar = u.adjoint();
    let forms = linear_forms(&ustar, prec);
    let pt = p.normalized().compose(&forms);
    let qt = q.normalized().compose(&forms);

    // In the chart w0 = 1, coefficients in y = w2 for fixed x = w1.
    let in_y = |poly: &HomPoly2, x: &Complex| -> UPoly {
        let d = poly.degree;
        (0..=d)
            .map(|c| {
                let mut acc = zero(prec);
                for b in 0..=d - c {
                    let a = d - b - c;
                    let mut xp = one(prec);
                    for _ in 0..b {
                        xp *= x;
                    }
                    acc += Complex::with_val(prec, poly.coeff(a, b) * &xp);
                }
                acc
            })
            .collect()
    };
    let m1 = total + 1;
    let vals: Vec<Complex> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let x = root_of_unity(prec, i as i64, m1);
            resultant(&in_y(&pt, &x), &in_y(&qt, &x), prec)
        })
        .collect();
    let r = interpolate_roots_of_unity(&vals, prec);
    let rmax = r.iter().map(modulus).fold(0.0, f64::max);
    if rmax < 1e-40 {
        return Err(Error::CommonComponent);
    }
    if modulus(&r[total]) < 1e-30 * rmax {
        return Err(Error::PrecisionExhausted("resultant drops degree".into()));
    }
    let xs = poly_roots(&r, prec);

    // Cluster x-roots; cluster size is the intersection multiplicity.
    let mut clusters: Vec<(Complex, u32)> = Vec::new();
    for x in xs {
        let found = clusters.iter_mut().find(|(c, _)| {
            modulus(&Complex::with_val(prec, c as &Complex - &x)) < 1e-12 * (1.0 + modulus(&x))
        });
        match found {
            Some(c) => c.1 += 1,
            None => clusters.push((x, 1)),
        }
    }
    let mut out = Vec::new();
    for (x, mult) in clusters {
        let ys = poly_roots(&in_y(&pt, &x), prec);
        let qy = in_y(&qt, &x);
        let y = ys
            .into_iter()
            .min_by(|a, b| modulus(&upoly_eval(&qy, a, prec)).total_cmp(&modulus(&upoly_eval(&qy, b, prec))))
            .ok_or_else(|| Error::PrecisionExhausted("no fiber root".into()))?;
        let w = [C64::new(1.0, 0.0), to_c64(&x), to_c64(&y)];
        let z: Vec<C64> = (0..3).map(|i| (0..3).map(|j| ustar[(i, j)] * w[j]).sum()).collect();
        out.push((HomogeneousPoint::new(z)?, mult));
    }
    let sum: u32 = out.iter().map(|(_, m)| m).sum();
    if sum as usize != total {
        return Err(Error::PrecisionExhausted(format!("found {sum} of {total} intersections")));
    }
    out.sort_by(|a, b| a.0.lex_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn power_map_invariant_line() {
        let f = ProjectiveMap::power_map(2, 2);
        let l = LinearSubspace::coordinate_hyperplane(2, 2);
        for n in 1..=3 {
            let curve = implicitize_image(&l, &f, n, DEFAULT_BITS).unwrap();
            assert_eq!(curve.degree(), 1);
            assert_eq!(curve.multiplicity, 1 << n);
            let z2 = curve.poly.coeff(0, 0);
            assert!((modulus(z2) - 1.0).abs() < 1e-20);
        }
    }

    #[test]
    fn line_conic_intersections() {
        let prec = 128;
        let l1 = HomPoly2::linear([c(1.0), c(-1.0), c(0.0)], prec);
        let l2 = HomPoly2::linear([c(0.0), c(1.0), c(-2.0)], prec);
        let pts = intersect_curves(&l1, &l2).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].0.approx_eq(&HomogeneousPoint::from_real(&[2.0, 2.0, 1.0]).unwrap(), 1e-12));

        // conic z0 z1 - z2² and tangent line z0 = z2... tangent at [1:1:1] is z0 + z1 - 2 z2.
        let conic = HomPoly2::from_hompoly(
            &HomPoly::new(3, 2, vec![(vec![1, 1, 0], c(1.0)), (vec![0, 0, 2], c(-1.0))]).unwrap(),
            prec,
        )
        .unwrap();
        let tangent = HomPoly2::linear([c(1.0), c(1.0), c(-2.0)], prec);
        let pts = intersect_curves(&conic, &tangent).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].1, 2);
        let secant = HomPoly2::linear([c(1.0), c(-4.0), c(0.0)], prec);
        assert_eq!(intersect_curves(&conic, &secant).unwrap().len(), 2);
        assert_eq!(intersect_curves(&conic, &conic.scale(&big(prec, c(2.0)))).unwrap_err(), Error::CommonComponent);
    }

    #[test]
    fn pullback_degrees() {
        let f = ProjectiveMap::power_map(2, 2);
        let h = HomPoly2::linear([c(0.0), c(0.0), c(1.0)], 128);
        let g = pullback_curve(&f, &h).unwrap();
        assert_eq!(g.degree(), 2);
        assert!((modulus(g.coeff(0, 0)) - 1.0).abs() < 1e-30);
        assert!(g.max_coeff() - 1.0 < 1e-30);
    }

    #[test]
    fn macaulay_pivots() {
        let good = ProjectiveMap::perturbed_power_map(0.05);
        assert!(macaulay_min_pivot(good.components(), 256).unwrap() > 1e-6);
        let bad = ProjectiveMap::parse("pmap k=2 d=2\n0 2 0 0 1 0\n1 1 1 0 1 0\n2 1 0 1 1 0\n").unwrap();
        assert!(macaulay_min_pivot(bad.components(), 256).unwrap() < 1e-60);
    }

    fn near_line() -> LinearSubspace {
        LinearSubspace::from_kernel(&[vec![C64::new(0.03, 0.01), C64::new(-0.02, 0.04), c(1.0)]], 2).unwrap()
    }

    #[test]
    fn generic_image_degrees_and_membership() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let l = near_line();
        for n in 1..=3 {
            let curve = implicitize_image(&l, &f, n, DEFAULT_BITS).unwrap();
            assert_eq!(curve.degree() * curve.multiplicity, 1 << n);
            let b = l.orthonormal_basis();
            for k in 0..20 {
                let t = C64::from_polar(0.3 + 0.2 * k as f64, 1.3 * k as f64);
                let x = HomogeneousPoint::new((0..3).map(|i| b[0][i] + t * b[1][i]).collect()).unwrap();
                assert!(curve.poly.relative_value(&f.iterate(&x, n)) <= 1e-6);
            }
        }
    }

    #[test]
    fn bezout_count_for_image_and_pullback() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let curve = implicitize_image(&near_line(), &f, 2, DEFAULT_BITS).unwrap();
        assert_eq!(curve.degree(), 4);
        let h = HomPoly2::linear([C64::new(0.3, -0.1), C64::new(-0.7, 0.2), c(0.5)], DEFAULT_BITS);
        let pulled = pullback_curve(&f, &h).unwrap();
        let pts = intersect_curves(&curve.poly, &pulled).unwrap();
        assert_eq!(pts.iter().map(|p| p.1).sum::<u32>(), 8);
        for (p, _) in &pts {
            assert!(curve.poly.relative_value(p) < 1e-8);
            assert!(pulled.relative_value(p) < 1e-8);
        }
    }
}
