//! Sampled positive closed currents of bidimension (1,1): FS-area quadrature
//! on curve pieces, pushforward, mass and pairing with test forms.

mod decay;
mod disc;
mod forms;
mod quadrature;

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::endomorphism::ProjectiveMap;
use crate::error::{Error, Result};
use crate::projective::{mat_vec, normalizing_factor, fs_norm_sq, HomogeneousPoint, LinearSubspace};
use crate::rng::complex_normal;

pub use decay::{decay_rates, log_slope, DecayRates};
pub use disc::{slice_mass_scan, subharmonicity_report, StructuralDisc, SubharmonicityReport};
pub use forms::{ScalarField, TestForm};
pub use quadrature::{Cell, Node, ParamCurve, Refine, Stage};

type C64 = Complex64;

/// One parametrized piece of a sampled current with its leaf cells.
#[derive(Clone, Debug)]
pub struct Piece {
    pub curve: ParamCurve,
    pub factor: f64,
    pub cells: Vec<Cell>,
}

/// A current `mass_scale · Σ weight_i [point_i, tangent_i]`.
///
/// Currents built from lines keep their parametrization, so pushforwards can
/// refine in parameter space. Currents read back from CSV have no pieces and
/// are transported node by node.
#[derive(Clone, Debug)]
pub struct SampledCurrent {
    nodes: Vec<Node>,
    generation: usize,
    mass_scale: f64,
    pieces: Vec<Piece>,
    /// `(piece, cell)` for every node when pieces are present.
    sources: Vec<(usize, usize)>,
}

/// Metadata written next to the node CSV.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurrentSidecar {
    pub generation: usize,
    pub mass_scale: f64,
    pub map_hash: Option<String>,
    pub seed: Option<u64>,
    pub nodes: usize,
}

impl SampledCurrent {
    /// Builds a current from bare nodes.
    pub fn from_nodes(nodes: Vec<Node>, generation: usize, mass_scale: f64) -> Self {
        Self { nodes, generation, mass_scale, pieces: Vec::new(), sources: Vec::new() }
    }

    fn from_pieces(pieces: Vec<Piece>, generation: usize, mass_scale: f64, policy: Refine) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut sources = Vec::new();
        let mut out_pieces = Vec::with_capacity(pieces.len());
        for (pi, piece) in pieces.into_iter().enumerate() {
            let sampled = piece.curve.sample(&piece.cells, piece.factor, policy)?;
            let mut cells = Vec::with_capacity(sampled.len());
            for (ci, (cell, node)) in sampled.into_iter().enumerate() {
                cells.push(cell);
                nodes.push(node);
                sources.push((pi, ci));
            }
            out_pieces.push(Piece { curve: piece.curve, factor: piece.factor, cells });
        }
        Ok(Self { nodes, generation, mass_scale, pieces: out_pieces, sources })
    }

    /// `[L']` for a projective line, with about `nodes` quadrature nodes.
    pub fn line_current(line: &LinearSubspace, nodes: usize) -> Result<Self> {
        if line.dimension() != 1 {
            return Err(Error::WrongDimension(line.dimension()));
        }
        let b = line.orthonormal_basis();
        let nu = ((nodes as f64 / 2.0).sqrt().round() as usize).max(1);
        let piece = Piece { curve: ParamCurve::line(b[0].clone(), b[1].clone()), factor: 1.0, cells: Cell::grid(nu) };
        Self::from_pieces(vec![piece], 0, 1.0, Refine::Off)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn mass_scale(&self) -> f64 {
        self.mass_scale
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// For each node, the base-line point its cell centre came from and the
    /// piece it belongs to; `None` for chart-less currents.
    pub fn node_sources(&self) -> Option<Vec<(usize, HomogeneousPoint)>> {
        if self.pieces.is_empty() {
            return None;
        }
        self.sources
            .iter()
            .map(|&(pi, ci)| {
                let piece = &self.pieces[pi];
                let (u, a) = piece.cells[ci].centre();
                let (x, _) = piece.curve.base(u, a);
                HomogeneousPoint::new(x).ok().map(|p| (pi, p))
            })
            .collect()
    }

    /// Σ weight, without the normalization.
    pub fn raw_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Normalized mass `mass_scale · Σ weight`.
    pub fn mass(&self) -> f64 {
        self.mass_scale * self.raw_mass()
    }

    /// `⟨S, Φ⟩ = mass_scale · Σ w_i Φ(x_i, t_i)`.
    pub fn pair(&self, form: &TestForm) -> f64 {
        // Summed in node order so the result does not depend on the thread count.
        let terms: Vec<f64> = self
            .nodes
            .par_iter()
            .map(|n| n.weight * form.density(n.point.coords(), &n.tangent))
            .collect();
        self.mass_scale * terms.iter().sum::<f64>()
    }

    /// `⟨S, χ⟩` for a scalar weight against the area, i.e. the trace measure.
    pub fn pair_scalar(&self, chi: &ScalarField) -> f64 {
        self.mass_scale * self.nodes.iter().map(|n| n.weight * chi.at(&n.point)).sum::<f64>()
    }

    /// Multiplies the current by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.mass_scale *= c;
        out
    }

    /// `d^{-steps} (f^steps)_* S`.
    pub fn pushforward(&self, f: &Arc<ProjectiveMap>, steps: usize, policy: Refine) -> Result<Self> {
        if steps == 0 {
            return Ok(self.clone());
        }
        let scale = self.mass_scale * (f.degree() as f64).powi(-(steps as i32));
        if self.pieces.is_empty() {
            let nodes = self
                .nodes
                .par_iter()
                .map(|n| {
                    let img = f.tangent_pushforward(&n.point, &n.tangent, steps);
                    let w = n.weight * (2.0 * img.log_stretch).exp();
                    Node { point: img.point, tangent: img.tangent, weight: if w.is_finite() { w } else { 0.0 } }
                })
                .collect();
            return Ok(Self::from_nodes(nodes, self.generation + steps, scale));
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece { curve: push_endo(&p.curve, f, steps), factor: p.factor, cells: p.cells.clone() })
            .collect();
        Self::from_pieces(pieces, self.generation + steps, scale, policy)
    }

    /// `(A)_* S` for an invertible projective-linear `A`, node by node; the
    /// parametrization gets the extra stage so later refinement stays exact.
    pub fn transform_linear(&self, a: &DMatrix<C64>, weight: f64) -> Result<Self> {
        let nodes = self
            .nodes
            .par_iter()
            .map(|n| map_node_linear(a, n, weight))
            .collect::<Result<Vec<_>>>()?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                curve: p.curve.with_stage(Stage::Linear(a.clone())),
                factor: p.factor * weight,
                cells: p.cells.clone(),
            })
            .collect();
        Ok(Self { nodes, generation: self.generation, mass_scale: self.mass_scale, pieces, sources: self.sources.clone() })
    }

    /// Formal sum; the result carries the mass scale of `self`.
    pub fn union(parts: Vec<Self>) -> Self {
        let Some(first) = parts.first() else {
            return Self::from_nodes(Vec::new(), 0, 1.0);
        };
        let generation = first.generation;
        let scale = first.mass_scale;
        let mut out = Self::from_nodes(Vec::new(), generation, scale);
        let keep_pieces = parts.iter().all(|p| !p.pieces.is_empty());
        for part in parts {
            let r = part.mass_scale / scale;
            let offset = out.pieces.len();
            out.nodes.extend(part.nodes.into_iter().map(|mut n| {
                n.weight *= r;
                n
            }));
            if keep_pieces {
                out.sources.extend(part.sources.iter().map(|&(p, c)| (p + offset, c)));
                out.pieces.extend(part.pieces.into_iter().map(|mut p| {
                    p.factor *= r;
                    p
                }));
            }
        }
        if !keep_pieces {
            out.pieces.clear();
            out.sources.clear();
        }
        out
    }

    pub fn sidecar(&self, map_hash: Option<String>, seed: Option<u64>) -> CurrentSidecar {
        CurrentSidecar { generation: self.generation, mass_scale: self.mass_scale, map_hash, seed, nodes: self.len() }
    }

    /// Node table: point, tangent (re/im pairs) and weight.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k1 = self.nodes.first().map_or(0, |n| n.point.dim());
        let mut header: Vec<String> = Vec::new();
        for prefix in ["x", "t"] {
            for i in 0..k1 {
                header.push(format!("{prefix}{i}_re"));
                header.push(format!("{prefix}{i}_im"));
            }
        }
        header.push("weight".into());
        writeln!(w, "{}", header.join(","))?;
        for n in &self.nodes {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            for c in n.point.coords().iter().chain(&n.tangent) {
                row.push(format!("{:.17e}", c.re));
                row.push(format!("{:.17e}", c.im));
            }
            row.push(format!("{:.17e}", n.weight));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, sidecar: &CurrentSidecar) -> Result<Self> {
        let mut nodes = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() % 4 != 1 {
                return Err(Error::Parse { line: i + 1, msg: format!("{} columns", vals.len()) });
            }
            let k1 = vals.len() / 4;
            let c: Vec<C64> = vals[..4 * k1].chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            nodes.push(Node {
                point: HomogeneousPoint::new(c[..k1].to_vec())?,
                tangent: c[k1..].to_vec(),
                weight: vals[4 * k1],
            });
        }
        Ok(Self::from_nodes(nodes, sidecar.generation, sidecar.mass_scale))
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn save(&self, stem: &Path, map_hash: Option<String>, seed: Option<u64>) -> Result<()> {
        let csv = std::fs::File::create(stem.with_extension("csv"))?;
        self.write_csv(std::io::BufWriter::new(csv))?;
        let side = serde_json::to_string_pretty(&self.sidecar(map_hash, seed)).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(stem.with_extension("json"), side)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let side: CurrentSidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)
            .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
        let csv = std::fs::File::open(stem.with_extension("csv"))?;
        Self::read_csv(std::io::BufReader::new(csv), &side)
    }
}

fn push_endo(curve: &ParamCurve, f: &Arc<ProjectiveMap>, steps: usize) -> ParamCurve {
    let mut c = curve.clone();
    if let Some(Stage::Endo { map, steps: s }) = c.stages.last_mut() {
        if Arc::ptr_eq(map, f) {
            *s += steps;
            return c;
        }
    }
    c.stages.push(Stage::Endo { map: f.clone(), steps });
    c
}

fn map_node_linear(a: &DMatrix<C64>, n: &Node, weight: f64) -> Result<Node> {
    let x = n.point.coords();
    let y = mat_vec(a, x);
    let v = mat_vec(a, &n.tangent);
    let s = normalizing_factor(&y).map_err(|_| Error::PointInCenter)?;
    let y: Vec<C64> = y.into_iter().map(|c| c / s).collect();
    let v: Vec<C64> = v.into_iter().map(|c| c / s).collect();
    let stretch_sq = fs_norm_sq(&y, &v) / fs_norm_sq(x, &n.tangent);
    let w = n.weight * weight * stretch_sq;
    Ok(Node {
        tangent: crate::endomorphism::tangent_unit(&y, &v),
        point: HomogeneousPoint::new(y)?,
        weight: if w.is_finite() { w } else { 0.0 },
    })
}

/// A random line within roughly `radius` (FS) of `line`.
pub fn random_line_near<R: Rng + ?Sized>(line: &LinearSubspace, radius: f64, rng: &mut R) -> Result<LinearSubspace> {
    let vs: Vec<Vec<C64>> = line
        .orthonormal_basis()
        .iter()
        .map(|b| b.iter().map(|c| c + complex_normal(rng) * radius).collect())
        .collect();
    LinearSubspace::span(&vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn line(rows: &[[f64; 3]; 2]) -> LinearSubspace {
        LinearSubspace::span(&rows.iter().map(|r| r.iter().map(|&x| c(x)).collect()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn line_mass_is_one() {
        let s = SampledCurrent::line_current(&line(&[[1.0, 0.2, 0.1], [0.0, 1.0, -0.3]]), 4096).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-3);
        let half = SampledCurrent::line_current(&line(&[[1.0, 0.2, 0.1], [0.0, 1.0, -0.3]]), 2048).unwrap();
        assert!((half.mass() - s.mass()).abs() < 4e-3);
    }

    #[test]
    fn point_subspace_is_rejected() {
        let p = LinearSubspace::coordinate_point(2, 2);
        assert_eq!(SampledCurrent::line_current(&p, 100).unwrap_err(), Error::WrongDimension(0));
    }

    #[test]
    fn zero_steps_is_identity() {
        let f = Arc::new(ProjectiveMap::perturbed_power_map(0.05));
        let s = SampledCurrent::line_current(&LinearSubspace::coordinate_hyperplane(2, 2), 200).unwrap();
        let t = s.pushforward(&f, 0, Refine::default()).unwrap();
        assert_eq!(s.nodes(), t.nodes());
    }

    #[test]
    fn pushforward_mass_grows_like_degree() {
        let f = Arc::new(ProjectiveMap::perturbed_power_map(0.05));
        let mut rng = stream(3, 0);
        let l = random_line_near(&LinearSubspace::coordinate_hyperplane(2, 2), 0.05, &mut rng).unwrap();
        let s = SampledCurrent::line_current(&l, 800).unwrap();
        for n in 1..=3 {
            let t = s.pushforward(&f, n, Refine::gap(0.02)).unwrap();
            let raw = t.raw_mass();
            assert!((raw / 2f64.powi(n as i32) - 1.0).abs() < 0.02, "n={n} raw={raw}");
            assert!((t.mass() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn invariant_line_stays_invariant() {
        let f = Arc::new(ProjectiveMap::power_map(2, 2));
        let s = SampledCurrent::line_current(&LinearSubspace::coordinate_hyperplane(2, 2), 200).unwrap();
        let t = s.pushforward(&f, 2, Refine::gap(0.05)).unwrap();
        assert!(t.nodes().iter().all(|n| n.point.coords()[2].norm() < 1e-12));
    }

    #[test]
    fn csv_round_trip() {
        let s = SampledCurrent::line_current(&LinearSubspace::coordinate_hyperplane(2, 0), 50).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SampledCurrent::read_csv(&buf[..], &s.sidecar(None, None)).unwrap();
        assert_eq!(back.len(), s.len());
        assert!((back.mass() - s.mass()).abs() < 1e-14);
    }
}
