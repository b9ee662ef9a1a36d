//! Area quadrature on images of projective lines.
//!
//! A line is parametrized by the round sphere: `(u, α) ↦ [√((1+u)/2) e0 :
//! √((1-u)/2) e^{iα} e1]` with `u = cos φ`, so cells that are rectangles in
//! `(u, α)` have FS area proportional to `Δu Δα`. A curve piece is the image
//! of such a line under a chain of projective-linear maps and iterates of an
//! endomorphism; node weights are cell area fractions times the squared
//! conformal stretch of the chain at the cell centre.

use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::endomorphism::{tangent_unit, ProjectiveMap};
use crate::error::{Error, Result};
use crate::projective::{fs_distance_raw, fs_norm_sq, mat_vec, normalizing_factor, HomogeneousPoint};

type C64 = Complex64;

#[derive(Clone, Debug)]
pub enum Stage {
    Linear(DMatrix<C64>),
    Endo { map: Arc<ProjectiveMap>, steps: usize },
}

/// Image of a line under a chain of stages.
#[derive(Clone, Debug)]
pub struct ParamCurve {
    pub e0: Vec<C64>,
    pub e1: Vec<C64>,
    pub stages: Vec<Stage>,
}

/// Parameter rectangle `[u0,u1] × [a0,a1]` on the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub u0: f64,
    pub u1: f64,
    pub a0: f64,
    pub a1: f64,
}

impl Cell {
    pub fn area_fraction(&self) -> f64 {
        (self.u1 - self.u0) * (self.a1 - self.a0) / (4.0 * PI)
    }

    pub fn centre(&self) -> (f64, f64) {
        (0.5 * (self.u0 + self.u1), 0.5 * (self.a0 + self.a1))
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [(self.u0, self.a0), (self.u1, self.a0), (self.u0, self.a1), (self.u1, self.a1)]
    }

    pub fn split(&self) -> [Cell; 4] {
        let (um, am) = self.centre();
        [
            Cell { u0: self.u0, u1: um, a0: self.a0, a1: am },
            Cell { u0: um, u1: self.u1, a0: self.a0, a1: am },
            Cell { u0: self.u0, u1: um, a0: am, a1: self.a1 },
            Cell { u0: um, u1: self.u1, a0: am, a1: self.a1 },
        ]
    }

    /// `nu × 2nu` equal-area grid covering the sphere.
    pub fn grid(nu: usize) -> Vec<Cell> {
        let nu = nu.max(1);
        let na = 2 * nu;
        let mut out = Vec::with_capacity(nu * na);
        for i in 0..nu {
            for j in 0..na {
                out.push(Cell {
                    u0: -1.0 + 2.0 * i as f64 / nu as f64,
                    u1: -1.0 + 2.0 * (i + 1) as f64 / nu as f64,
                    a0: TAU * j as f64 / na as f64,
                    a1: TAU * (j + 1) as f64 / na as f64,
                });
            }
        }
        out
    }
}

/// A quadrature node: point, unit FS tangent, weight (FS area).
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub point: HomogeneousPoint,
    pub tangent: Vec<C64>,
    pub weight: f64,
}

/// Refinement policy for pushforwards.
#[derive(Clone, Copy, Debug)]
pub enum Refine {
    /// Keep the current cells.
    Off,
    /// Split cells until the image of each cell has FS diameter ≤ `max_gap`.
    Gap { max_gap: f64, budget: usize, max_depth: u32 },
}

impl Default for Refine {
    fn default() -> Self {
        Refine::Gap { max_gap: 0.01, budget: 10_000_000, max_depth: 24 }
    }
}

impl Refine {
    pub fn gap(max_gap: f64) -> Self {
        Refine::Gap { max_gap, budget: 10_000_000, max_depth: 24 }
    }
}

impl ParamCurve {
    pub fn line(e0: Vec<C64>, e1: Vec<C64>) -> Self {
        Self { e0, e1, stages: Vec::new() }
    }

    pub fn with_stage(&self, stage: Stage) -> Self {
        let mut c = self.clone();
        c.stages.push(stage);
        c
    }

    /// Point of the base line at sphere parameters `(u, α)` and its unit tangent.
    pub fn base(&self, u: f64, a: f64) -> (Vec<C64>, Vec<C64>) {
        let c0 = C64::new(((1.0 + u) / 2.0).max(0.0).sqrt(), 0.0);
        let c1 = C64::from_polar(((1.0 - u) / 2.0).max(0.0).sqrt(), a);
        let x: Vec<C64> = self.e0.iter().zip(&self.e1).map(|(p, q)| c0 * p + c1 * q).collect();
        let t: Vec<C64> = self.e0.iter().zip(&self.e1).map(|(p, q)| -c1.conj() * p + c0.conj() * q).collect();
        (x, t)
    }

    /// Image point only.
    pub fn point(&self, u: f64, a: f64) -> Result<Vec<C64>> {
        let (mut x, _) = self.base(u, a);
        for s in &self.stages {
            match s {
                Stage::Linear(m) => {
                    let y = mat_vec(m, &x);
                    let f = normalizing_factor(&y).map_err(|_| Error::PointInCenter)?;
                    x = y.into_iter().map(|c| c / f).collect();
                }
                Stage::Endo { map, steps } => {
                    for _ in 0..*steps {
                        let y = map.eval_lift(&x);
                        let f = normalizing_factor(&y)?;
                        x = y.into_iter().map(|c| c / f).collect();
                    }
                }
            }
        }
        Ok(x)
    }

    /// Image point, unit tangent and log of the conformal stretch.
    pub fn eval(&self, u: f64, a: f64) -> Result<(HomogeneousPoint, Vec<C64>, f64)> {
        let (x0, t0) = self.base(u, a);
        let f0 = normalizing_factor(&x0)?;
        let mut x: Vec<C64> = x0.iter().map(|c| c / f0).collect();
        let mut t: Vec<C64> = tangent_unit(&x, &t0.iter().map(|c| c / f0).collect::<Vec<_>>());
        let mut log_stretch = 0.0f64;
        for s in &self.stages {
            match s {
                Stage::Linear(m) => {
                    let y = mat_vec(m, &x);
                    let w = mat_vec(m, &t);
                    let f = normalizing_factor(&y).map_err(|_| Error::PointInCenter)?;
                    let y: Vec<C64> = y.into_iter().map(|c| c / f).collect();
                    let w: Vec<C64> = w.into_iter().map(|c| c / f).collect();
                    log_stretch += 0.5 * (fs_norm_sq(&y, &w) / fs_norm_sq(&x, &t)).ln();
                    t = tangent_unit(&y, &w);
                    x = y;
                }
                Stage::Endo { map, steps } => {
                    let p = HomogeneousPoint::new(x.clone())?;
                    let img = map.tangent_pushforward(&p, &t, *steps);
                    log_stretch += img.log_stretch;
                    x = img.point.into_coords();
                    t = img.tangent;
                }
            }
        }
        Ok((HomogeneousPoint::new(x)?, t, log_stretch))
    }

    /// FS diameter estimate of the image of a cell: twice the largest
    /// distance from the centre image to a corner image.
    fn cell_gap(&self, cell: &Cell, centre: &[C64]) -> Result<f64> {
        let mut g = 0.0f64;
        for (u, a) in cell.corners() {
            g = g.max(fs_distance_raw(centre, &self.point(u, a)?));
        }
        Ok(2.0 * g)
    }

    fn node(&self, cell: &Cell, factor: f64) -> Result<Node> {
        let (u, a) = cell.centre();
        let (p, t, ls) = self.eval(u, a)?;
        let w = factor * cell.area_fraction() * (2.0 * ls).exp();
        Ok(Node { point: p, tangent: t, weight: if w.is_finite() { w } else { 0.0 } })
    }

    fn refine_cell(
        &self,
        cell: Cell,
        factor: f64,
        max_gap: f64,
        depth_left: u32,
        counter: &AtomicUsize,
        budget: usize,
        out: &mut Vec<(Cell, Node)>,
    ) -> Result<()> {
        let (u, a) = cell.centre();
        let centre = self.point(u, a)?;
        if depth_left > 0 && self.cell_gap(&cell, &centre)? > max_gap {
            for child in cell.split() {
                self.refine_cell(child, factor, max_gap, depth_left - 1, counter, budget, out)?;
            }
            return Ok(());
        }
        if counter.fetch_add(1, Ordering::Relaxed) >= budget {
            return Err(Error::RefinementBudgetExceeded(budget));
        }
        out.push((cell, self.node(&cell, factor)?));
        Ok(())
    }

    /// Nodes for the given cells, refined per `policy`; deterministic order.
    pub fn sample(&self, cells: &[Cell], factor: f64, policy: Refine) -> Result<Vec<(Cell, Node)>> {
        match policy {
            Refine::Off => cells
                .par_iter()
                .map(|c| self.node(c, factor).map(|n| (*c, n)))
                .collect(),
            Refine::Gap { max_gap, budget, max_depth } => {
                let counter = AtomicUsize::new(0);
                let parts: Vec<Vec<(Cell, Node)>> = cells
                    .par_iter()
                    .map(|c| {
                        let mut out = Vec::new();
                        self.refine_cell(*c, factor, max_gap, max_depth, &counter, budget, &mut out)?;
                        Ok(out)
                    })
                    .collect::<Result<_>>()?;
                Ok(parts.into_iter().flatten().collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells_partition_the_sphere() {
        let total: f64 = Cell::grid(7).iter().map(Cell::area_fraction).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let c = Cell::grid(3)[4];
        let split: f64 = c.split().iter().map(Cell::area_fraction).sum();
        assert!((split - c.area_fraction()).abs() < 1e-16);
    }

    #[test]
    fn base_tangent_is_unit_and_orthogonal() {
        let one = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        let curve = ParamCurve::line(vec![one, z, z], vec![z, one, z]);
        let (x, t) = curve.base(0.3, 1.1);
        assert!((fs_norm_sq(&x, &t) - 1.0).abs() < 1e-14);
        let (_, _, ls) = curve.eval(0.3, 1.1).unwrap();
        assert!(ls.abs() < 1e-14);
    }
}
