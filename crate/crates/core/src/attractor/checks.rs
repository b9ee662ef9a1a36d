//! Sampled certificates for the hypotheses on a region: trapping,
//! star-shapedness along fibers, and Jacobian contraction.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::region::{RegionKind, TrappingRegion};
use crate::endomorphism::{ProjectiveMap, SolverOptions};
use crate::error::{Error, Result};
use crate::projective::{normalize, HomogeneousPoint};
use crate::rng::{complex_normal, fs_uniform_point, stream};

type C64 = Complex64;

fn witness(x: &HomogeneousPoint) -> Vec<(f64, f64)> {
    x.coords().iter().map(|c| (c.re, c.im)).collect()
}

/// A random point of the target line/plane `L`.
pub fn random_base_point<R: Rng + ?Sized>(region: &TrappingRegion, rng: &mut R) -> HomogeneousPoint {
    loop {
        let basis = region.projection.target().orthonormal_basis();
        let mut v = vec![C64::new(0.0, 0.0); region.k() + 1];
        for b in basis {
            let c = complex_normal(rng);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += c * bi;
            }
        }
        if let Ok(p) = HomogeneousPoint::new(v) {
            return p;
        }
    }
}

/// Up to `count` FS-uniform points with `u ≤ 0`, by rejection.
pub fn sample_region(region: &TrappingRegion, count: usize, seed: u64) -> Vec<HomogeneousPoint> {
    let mut rng = stream(seed, 0x5a3);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count.saturating_mul(400) {
        if out.len() == count {
            break;
        }
        let x = fs_uniform_point(&mut rng, region.k());
        if region.defining_function(&x) <= 0.0 {
            out.push(x);
        }
    }
    out
}

/// Points of the complement `P^k \ U`.
fn sample_complement(region: &TrappingRegion, count: usize, seed: u64) -> Vec<HomogeneousPoint> {
    let mut rng = stream(seed, 0xc0);
    if let RegionKind::ComplementBall { center, radius } = &region.kind {
        let c = center.coords();
        let nc = crate::projective::norm_sq(c).sqrt();
        return (0..count)
            .filter_map(|_| {
                // Geodesic offset of length < radius in a random direction.
                let v: Vec<C64> = (0..c.len()).map(|_| complex_normal(&mut rng)).collect();
                let w = crate::endomorphism::tangent_unit(c, &v);
                let r = radius * rng.gen::<f64>() * 0.999;
                let y: Vec<C64> = c.iter().zip(&w).map(|(a, b)| a / nc * r.cos() + b * (r.sin() / nc)).collect();
                HomogeneousPoint::new(y).ok()
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count.saturating_mul(400) {
        if out.len() == count {
            break;
        }
        let x = fs_uniform_point(&mut rng, region.k());
        if region.defining_function(&x) > 0.0 {
            out.push(x);
        }
    }
    out
}

/// Points with `u ≈ 0⁻`, by bisection between inside and outside samples.
pub fn sample_boundary(region: &TrappingRegion, count: usize, seed: u64) -> Vec<HomogeneousPoint> {
    if region.is_whole() {
        return Vec::new();
    }
    let inside = sample_region(region, count, seed);
    let outside = sample_complement(region, count, seed ^ 0x9e37);
    inside
        .par_iter()
        .zip(outside.par_iter())
        .filter_map(|(a, b)| {
            let (a, b) = (a.coords(), b.coords());
            let at = |s: f64| normalize(&a.iter().zip(b).map(|(p, q)| p * (1.0 - s) + q * s).collect::<Vec<_>>()).ok();
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                match at(mid) {
                    Some(x) if region.defining_function(&x) <= 0.0 => lo = mid,
                    Some(_) => hi = mid,
                    None => return None,
                }
            }
            at(lo)
        })
        .collect()
}

/// Outcome of a trapping check.
#[derive(Clone, Debug, PartialEq)]
pub struct TrappingReport {
    /// `min −u(f(x))` over sampled `x` in the closure of `U`.
    pub margin: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Complement points whose preimages were all verified outside `U`.
    pub complement_samples: usize,
    pub seed: u64,
}

/// Statistical certificate of `f(U) ⋐ U`.
///
/// Forward test: `u(f(x)) < 0` on interior and boundary samples. Backward
/// test: every preimage of a sampled `y ∉ U` lies outside `U`, which catches
/// violations confined to tiny sets.
pub fn check_trapping(f: &ProjectiveMap, region: &TrappingRegion, samples: usize, seed: u64) -> Result<TrappingReport> {
    let interior = sample_region(region, samples, seed);
    let boundary = sample_boundary(region, samples, seed.wrapping_add(1));
    let mut margin = f64::INFINITY;
    for x in interior.iter().chain(&boundary) {
        let v = region.defining_function(&f.evaluate(x));
        if !(v < 0.0) {
            return Err(Error::TrappingViolated { witness: witness(x), value: v });
        }
        margin = margin.min(-v);
    }
    let complement = sample_complement(region, (samples / 20).max(8), seed.wrapping_add(2));
    let opts = SolverOptions { seed, ..SolverOptions::default() };
    let checked: Vec<Result<usize>> = complement
        .par_iter()
        .map(|y| {
            let pre = f.preimages_one(y, &opts)?;
            for p in &pre {
                if region.defining_function(&p.point) < 0.0 {
                    return Err(Error::TrappingViolated { witness: witness(&p.point), value: region.defining_function(y) });
                }
            }
            Ok(1)
        })
        .collect();
    let mut complement_samples = 0;
    for c in checked {
        match c {
            Ok(n) => complement_samples += n,
            Err(e @ Error::TrappingViolated { .. }) => return Err(e),
            Err(_) => {}
        }
    }
    Ok(TrappingReport {
        margin,
        interior_samples: interior.len(),
        boundary_samples: boundary.len(),
        complement_samples,
        seed,
    })
}

impl TrappingRegion {
    /// Runs [`check_trapping`] and records the margin.
    pub fn validate(&mut self, f: &ProjectiveMap, samples: usize, seed: u64) -> Result<TrappingReport> {
        let r = check_trapping(f, self, samples, seed)?;
        self.validated_margin = Some(r.margin);
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarShapeViolation {
    pub base: Vec<(f64, f64)>,
    pub direction_angle: f64,
    /// Fiber parameter `t` where the section fails to be an interval from 0.
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarShapeReport {
    pub fibers: usize,
    pub rays: usize,
    pub violations: Vec<StarShapeViolation>,
}

impl StarShapeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// `Err(NotStarShaped)` carrying the first violation as witness.
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            Some(v) => Err(Error::NotStarShaped { base: v.base.clone(), angle: v.direction_angle, t: v.t }),
            None => Ok(self),
        }
    }
}

/// Samples of `t` on `[0, ∞)` used along each ray.
const RAY_SAMPLES: usize = 600;

/// Checks that each ray `{s = t e^{iα}}, t ≥ 0` in sampled fibers meets `U`
/// in an interval containing `t = 0`.
pub fn check_star_shaped(region: &TrappingRegion, rays_per_fiber: usize, fibers: usize, seed: u64) -> StarShapeReport {
    let violations: Vec<StarShapeViolation> = (0..fibers)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = stream(seed, i as u64);
            let base = random_base_point(region, &mut rng);
            let offset = rng.gen::<f64>();
            for j in 0..rays_per_fiber {
                let alpha = TAU * (j as f64 + offset) / rays_per_fiber as f64;
                let dir = C64::from_polar(1.0, alpha);
                let mut left = false;
                for m in 0..RAY_SAMPLES {
                    let t = (FRAC_PI_2 * m as f64 / RAY_SAMPLES as f64).tan();
                    let Ok(x) = region.fiber_point(&base, dir * t) else { continue };
                    let inside = region.defining_function(&x) < 0.0;
                    if (m == 0 && !inside) || (left && inside) {
                        return Some(StarShapeViolation { base: witness(&base), direction_angle: alpha, t });
                    }
                    left |= !inside;
                }
            }
            None
        })
        .collect();
    StarShapeReport { fibers, rays: fibers * rays_per_fiber, violations }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianReport {
    /// Sampled max of the real Jacobian `|det Df|²` in FS frames over `U`.
    pub max_jacobian: f64,
    /// Sampled max FS stretch of the fiber direction.
    pub max_transverse_stretch: f64,
    /// Sampled max FS stretch along the direction parallel to `L`.
    pub max_tangential_stretch: f64,
    /// `max_jacobian < 1`: the uniqueness criterion applies.
    pub contracting: bool,
    pub samples: usize,
}

pub fn jacobian_contraction(f: &ProjectiveMap, region: &TrappingRegion, samples: usize, seed: u64) -> JacobianReport {
    let pts = sample_region(region, samples, seed);
    let center = region.projection.center().orthonormal_basis()[0].clone();
    let basis = region.projection.target().orthonormal_basis();
    let rows: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .map(|x| {
            let jac = f.jacobian_data(x).projective_jacobian_modulus;
            let transverse = f.tangent_pushforward(x, &center, 1).stretch();
            let along = region.projection.project(x).ok().and_then(|p| {
                basis
                    .iter()
                    .map(|b| crate::endomorphism::tangent_unit(p.coords(), b))
                    .find(|v| v.iter().any(|c| c.norm() > 0.0))
            });
            let tangential = along.map_or(0.0, |v| f.tangent_pushforward(x, &v, 1).stretch());
            (jac, transverse, tangential)
        })
        .collect();
    let fold = |g: fn(&(f64, f64, f64)) -> f64| rows.iter().map(g).fold(0.0f64, f64::max);
    let max_jacobian = fold(|r| r.0);
    JacobianReport {
        max_jacobian,
        max_transverse_stretch: fold(|r| r.1),
        max_tangential_stretch: fold(|r| r.2),
        contracting: max_jacobian < 1.0,
        samples: rows.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_power_map_traps_the_cone() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let r = check_trapping(&f, &TrappingRegion::fiber_cone(2, 2, 0.2), 2000, 4).unwrap();
        assert!(r.margin > 0.1 && r.margin < 0.2, "{r:?}");
        assert!(r.boundary_samples > 1000);
    }

    #[test]
    fn thinner_cone_has_smaller_margin() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let a = check_trapping(&f, &TrappingRegion::fiber_cone(2, 2, 0.2), 500, 4).unwrap().margin;
        let b = check_trapping(&f, &TrappingRegion::fiber_cone(2, 2, 0.1), 500, 4).unwrap().margin;
        assert!(b < a);
    }

    #[test]
    fn complement_of_small_ball_is_not_trapping() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let center = HomogeneousPoint::from_real(&[1.0, 0.8, 0.7]).unwrap();
        let region = TrappingRegion::new(RegionKind::ComplementBall { center, radius: 0.02 }, crate::projective::CenterProjection::coordinate(2, 2));
        assert!(matches!(check_trapping(&f, &region, 400, 1), Err(Error::TrappingViolated { .. })));
    }

    #[test]
    fn star_shape_of_cone_annulus_and_hyperplane_neighbourhood() {
        assert!(check_star_shaped(&TrappingRegion::fiber_cone(2, 2, 0.2), 8, 20, 3).passed());
        let annulus = TrappingRegion::new(
            RegionKind::FiberAnnulus { inner: 0.1, outer: 0.2 },
            crate::projective::CenterProjection::coordinate(2, 2),
        );
        assert!(!check_star_shaped(&annulus, 8, 20, 3).passed());
        for axis in 0..3 {
            let r = TrappingRegion::new(RegionKind::CoordinateHyperplanes, crate::projective::CenterProjection::coordinate(2, axis));
            assert!(!check_star_shaped(&r, 8, 20, 3).passed());
        }
    }
}
