//! Structural discs `θ ↦ R_θ = Σ ρ_i (λ_θ(A_i) A_θ)_* R`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{SampledCurrent, TestForm};
use crate::error::{Error, Result};
use crate::projective::{fs_norm_sq, mat_vec, CenterProjection};
use crate::rng::{complex_normal, stream};

type C64 = Complex64;

/// Default half-width of the θ-domain around `[0, 1]`.
pub const DEFAULT_DOMAIN_RADIUS: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct StructuralDisc {
    base: SampledCurrent,
    automorphisms: Vec<(DMatrix<C64>, f64)>,
    projection: CenterProjection,
    domain_radius: f64,
}

impl StructuralDisc {
    /// `automorphisms` are lifts `A_i` with weights `ρ_i > 0` summing to 1.
    pub fn new(base: SampledCurrent, automorphisms: Vec<(DMatrix<C64>, f64)>, projection: CenterProjection) -> Result<Self> {
        let total: f64 = automorphisms.iter().map(|(_, r)| r).sum();
        if automorphisms.is_empty() || automorphisms.iter().any(|(_, r)| *r <= 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config("smoothing weights must be positive and sum to 1".into()));
        }
        let n = projection.center().k() + 1;
        if automorphisms.iter().any(|(a, _)| a.nrows() != n || a.ncols() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: automorphisms[0].0.nrows() });
        }
        Ok(Self { base, automorphisms, projection, domain_radius: DEFAULT_DOMAIN_RADIUS })
    }

    /// Smoothing by `count` automorphisms `Id + spread·G` with Gaussian `G`
    /// and equal weights; `count = 0` means no smoothing.
    pub fn with_random_smoothing(
        base: SampledCurrent,
        projection: CenterProjection,
        count: usize,
        spread: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = projection.center().k() + 1;
        if count == 0 {
            return Self::new(base, vec![(DMatrix::identity(n, n), 1.0)], projection);
        }
        let mut rng = stream(seed, 0x5d15c);
        let autos = (0..count)
            .map(|_| {
                let g = DMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng) * spread);
                (DMatrix::identity(n, n) + g, 1.0 / count as f64)
            })
            .collect();
        Self::new(base, autos, projection)
    }

    pub fn with_domain_radius(mut self, r: f64) -> Self {
        self.domain_radius = r;
        self
    }

    pub fn base(&self) -> &SampledCurrent {
        &self.base
    }

    pub fn automorphisms(&self) -> &[(DMatrix<C64>, f64)] {
        &self.automorphisms
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Distance from `θ` to the segment `[0, 1]`.
    pub fn distance_to_segment(theta: C64) -> f64 {
        let re = theta.re.clamp(0.0, 1.0);
        ((theta.re - re).powi(2) + theta.im.powi(2)).sqrt()
    }

    pub fn contains(&self, theta: C64) -> bool {
        Self::distance_to_segment(theta) <= self.domain_radius + 1e-12
    }

    /// `λ_θ(A) A_θ` for every smoothing automorphism.
    fn matrices(&self, theta: C64) -> Result<Vec<(DMatrix<C64>, f64)>> {
        if !self.contains(theta) {
            return Err(Error::ThetaOutOfDomain(format!("{theta}")));
        }
        let scale = self.projection.fiber_scale_matrix(theta);
        let n = scale.nrows();
        let id = DMatrix::<C64>::identity(n, n);
        let one_minus = C64::new(1.0, 0.0) - theta;
        Ok(self
            .automorphisms
            .iter()
            .map(|(a, rho)| (((a - &id) * one_minus + &id) * &scale, *rho))
            .collect())
    }

    /// The slice current `R_θ`.
    pub fn evaluate(&self, theta: C64) -> Result<SampledCurrent> {
        let parts = self
            .matrices(theta)?
            .iter()
            .map(|(m, rho)| self.base.transform_linear(m, *rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(SampledCurrent::union(parts))
    }

    /// `⟨R_θ, Φ⟩` without materializing the slice.
    pub fn pair(&self, theta: C64, form: &TestForm) -> Result<f64> {
        let mats = self.matrices(theta)?;
        let s: f64 = self
            .base
            .nodes()
            .par_iter()
            .map(|n| {
                let x = n.point.coords();
                let base_len = fs_norm_sq(x, &n.tangent);
                mats.iter()
                    .map(|(m, rho)| {
                        let y = mat_vec(m, x);
                        let v = mat_vec(m, &n.tangent);
                        let stretch_sq = fs_norm_sq(&y, &v) / base_len;
                        if !stretch_sq.is_finite() || stretch_sq == 0.0 {
                            return 0.0;
                        }
                        rho * n.weight * stretch_sq * form.density(&y, &v)
                    })
                    .sum::<f64>()
            })
            .sum();
        Ok(self.base.mass_scale() * s)
    }

    /// `max |⟨R_θ,Φ⟩ − ⟨R_0,Φ⟩| / |θ|` over sample points on circles of the given radii.
    pub fn regularity_constant(&self, form: &TestForm, radii: &[f64], points: usize) -> Result<f64> {
        let p0 = self.pair(C64::new(0.0, 0.0), form)?;
        let mut c = 0.0f64;
        for &r in radii {
            for j in 0..points {
                let th = C64::from_polar(r, TAU * j as f64 / points as f64);
                c = c.max((self.pair(th, form)? - p0).abs() / r);
            }
        }
        Ok(c)
    }
}

/// Circle-mean deviations of `θ ↦ ⟨R_θ, Φ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubharmonicityReport {
    /// `(θ, r, mean over |θ'−θ| = r minus value at θ)`.
    pub entries: Vec<(C64, f64, f64)>,
    pub min_deviation: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Entries with deviation below `−tolerance`.
    pub violations: usize,
}

pub fn subharmonicity_report(
    disc: &StructuralDisc,
    form: &TestForm,
    theta_grid: &[C64],
    radii: &[f64],
    circle_points: usize,
    tolerance: f64,
) -> Result<SubharmonicityReport> {
    let mut entries = Vec::new();
    for &th in theta_grid {
        let centre = disc.pair(th, form)?;
        for &r in radii {
            let mut mean = 0.0;
            for j in 0..circle_points {
                let p = th + C64::from_polar(r, TAU * (j as f64 + 0.5) / circle_points as f64);
                mean += disc.pair(p, form)?;
            }
            entries.push((th, r, mean / circle_points as f64 - centre));
        }
    }
    let min_deviation = entries.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let max_deviation = entries.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
    let violations = entries.iter().filter(|e| e.2 < -tolerance).count();
    Ok(SubharmonicityReport { entries, min_deviation, max_deviation, tolerance, violations })
}

/// Mass of each slice `R_θ`.
pub fn slice_mass_scan(disc: &StructuralDisc, theta_grid: &[C64]) -> Result<Vec<f64>> {
    theta_grid.iter().map(|&th| disc.pair(th, &TestForm::Omega)).collect()
}
