//! Green functions with tail bounds, sampled measures, and canonical
//! quasi-potentials of curves.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::endomorphism::{ProjectiveMap, SolverOptions};
use crate::error::{Error, Result};
use crate::poly::HomPoly;
use crate::projective::{sup_norm, HomogeneousPoint};
use crate::rng::{complex_normal, fs_uniform_point, stream};

type C64 = Complex64;

/// `g_n(x) = d^{-n} log ‖F^n(x̃)‖_∞` with `x̃` sup-normalized.
#[derive(Clone, Debug)]
pub struct GreenField {
    map: ProjectiveMap,
    depth: usize,
    tail_constant: f64,
}

impl GreenField {
    /// Estimates the tail constant `M = sup |log ‖F(z)‖_∞|` over the unit
    /// sup-sphere: the upper side from coefficient sums (rigorous), the lower
    /// side from `samples` random points.
    pub fn new(map: ProjectiveMap, depth: usize, samples: usize, seed: u64) -> Self {
        let upper = map
            .components()
            .iter()
            .map(|c| c.terms().iter().map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
            .ln();
        let mut rng = stream(seed, 0);
        let mut lower = 0.0f64;
        for _ in 0..samples {
            let x = fs_uniform_point(&mut rng, map.k());
            let v = sup_norm(&map.eval_lift(x.coords())).ln();
            lower = lower.min(v);
        }
        let tail_constant = upper.abs().max(lower.abs());
        Self { map, depth, tail_constant }
    }

    pub fn with_depth(&self, depth: usize) -> Self {
        Self { depth, ..self.clone() }
    }

    pub fn map(&self) -> &ProjectiveMap {
        &self.map
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// `M d^{-n} / (d - 1)`, the distance from `g_n` to `g`.
    pub fn error_bound(&self) -> f64 {
        let d = self.map.degree() as f64;
        self.tail_constant * d.powi(-(self.depth as i32)) / (d - 1.0)
    }

    /// `(g_n(x), bound)`, summed as `Σ_j d^{-(j+1)} log ‖F(x̃_j)‖_∞` over the
    /// normalized orbit so nothing overflows.
    pub fn value(&self, x: &HomogeneousPoint) -> (f64, f64) {
        let d = self.map.degree() as f64;
        let mut acc = 0.0;
        let mut scale = 1.0;
        let mut p = x.coords().to_vec();
        for _ in 0..self.depth {
            let y = self.map.eval_lift(&p);
            let s = sup_norm(&y);
            scale /= d;
            acc += scale * s.ln();
            p = y.into_iter().map(|c| c / s).collect();
        }
        (acc, self.error_bound())
    }
}

/// Weighted point cloud on P^k.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(HomogeneousPoint, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(HomogeneousPoint, f64)>) -> Self {
        Self { atoms }
    }

    pub fn uniform(points: Vec<HomogeneousPoint>) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        Self { atoms: points.into_iter().map(|p| (p, w)).collect() }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        Self { atoms: self.atoms.iter().map(|(p, w)| (p.clone(), w / m)).collect() }
    }

    pub fn pair<F: Fn(&HomogeneousPoint) -> f64 + Sync>(&self, phi: F) -> f64 {
        self.atoms.iter().map(|(p, w)| w * phi(p)).sum()
    }

    pub fn push_forward(&self, f: &ProjectiveMap) -> Self {
        Self { atoms: self.atoms.par_iter().map(|(p, w)| (f.evaluate(p), *w)).collect() }
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| *w).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let k = self.atoms.first().map_or(2, |(p, _)| p.dim());
        let mut s = String::new();
        for i in 0..=k {
            let _ = write!(s, "re{i},im{i},");
        }
        s.push_str("weight\n");
        for (p, w) in &self.atoms {
            for c in p.coords() {
                let _ = write!(s, "{:.17e},{:.17e},", c.re, c.im);
            }
            let _ = writeln!(s, "{w:.17e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() < 3 || vals.len() % 2 == 0 {
                return Err(Error::Parse { line: i + 1, msg: format!("{} fields", vals.len()) });
            }
            let n = (vals.len() - 1) / 2;
            let coords = (0..n).map(|j| C64::new(vals[2 * j], vals[2 * j + 1])).collect();
            atoms.push((HomogeneousPoint::new(coords)?, vals[vals.len() - 1]));
        }
        Ok(Self { atoms })
    }
}

/// Equal-weight atoms at the ends of `count` random preimage walks of length
/// `n` from a generic point; walk `i` draws from its own stream.
pub fn mu_sample(f: &ProjectiveMap, n: usize, count: usize, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = stream(seed, u64::MAX);
    let a = fs_uniform_point(&mut rng, f.k());
    let opts = SolverOptions { seed, ..SolverOptions::default() };
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut x = a.clone();
            for _ in 0..n {
                let pre = f.preimages_one(&x, &opts)?;
                let total: usize = pre.iter().map(|p| p.multiplicity).sum();
                let mut pick = rng.gen_range(0..total);
                for p in pre {
                    if pick < p.multiplicity {
                        x = p.point;
                        break;
                    }
                    pick -= p.multiplicity;
                }
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMeasure::uniform(points))
}

type Evaluator = Arc<dyn Fn(&HomogeneousPoint) -> f64 + Send + Sync>;

/// A quasi-psh function normalized to vanish at the center.
#[derive(Clone)]
pub struct QuasiPotential {
    evaluator: Evaluator,
    /// psh lift: `u(z) = value([z]) + log ‖z‖_∞` is plurisubharmonic on C^{k+1}.
    center: HomogeneousPoint,
}

impl std::fmt::Debug for QuasiPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuasiPotential").field("center", &self.center).finish()
    }
}

impl QuasiPotential {
    pub fn new(evaluator: Evaluator, center: HomogeneousPoint) -> Self {
        Self { evaluator, center }
    }

    pub fn value(&self, x: &HomogeneousPoint) -> f64 {
        (self.evaluator)(x)
    }

    pub fn center(&self) -> &HomogeneousPoint {
        &self.center
    }

    /// Circle means minus centre values of the psh lift on `samples` random
    /// complex discs of radius `≤ max_radius`; subharmonicity means every
    /// entry is `≥ -tol`.
    pub fn sub_mean_value_deficits(&self, samples: usize, max_radius: f64, seed: u64) -> Vec<f64> {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let k = self.center.dim();
                let x = fs_uniform_point(&mut rng, k);
                let v: Vec<C64> = (0..=k).map(|_| complex_normal(&mut rng)).collect();
                let nv = sup_norm(&v);
                let r = max_radius * rng.gen::<f64>().max(0.05);
                let lift = |s: C64| -> f64 {
                    let z: Vec<C64> = x.coords().iter().zip(&v).map(|(a, b)| a + b * (s / nv)).collect();
                    let p = HomogeneousPoint::new(z.clone()).expect("small disc avoids the origin");
                    self.value(&p) + sup_norm(&z).ln()
                };
                let centre = lift(C64::new(0.0, 0.0));
                let m = 256;
                let mean = (0..m)
                    .map(|j| lift(C64::from_polar(r, std::f64::consts::TAU * j as f64 / m as f64)))
                    .sum::<f64>()
                    / m as f64;
                mean - centre
            })
            .collect()
    }
}

/// `x ↦ (1/D) log(|P(x̃)| / ‖x̃‖_∞^D)`, shifted to vanish at `center`.
pub fn canonical_potential_of_curve(p: &HomPoly, center: &HomogeneousPoint) -> Result<QuasiPotential> {
    if p.is_zero() {
        return Err(Error::CenterOnCurve);
    }
    let dd = p.degree() as f64;
    let norm = p.coeff_norm();
    let raw = {
        let p = p.clone();
        move |x: &HomogeneousPoint| (p.eval(x.coords()).norm() / norm).ln() / dd
    };
    let c0 = raw(center);
    if !c0.is_finite() || c0 * dd < -30.0 {
        return Err(Error::CenterOnCurve);
    }
    Ok(QuasiPotential::new(Arc::new(move |x: &HomogeneousPoint| raw(x) - c0), center.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(i: usize) -> HomPoly {
        HomPoly::power(3, i, 1)
    }

    #[test]
    fn power_map_green_is_zero() {
        let gf = GreenField::new(ProjectiveMap::power_map(2, 2), 10, 1000, 1);
        assert_eq!(gf.tail_constant(), 0.0);
        let mut rng = stream(2, 0);
        for _ in 0..100 {
            let x = fs_uniform_point(&mut rng, 2);
            assert_eq!(gf.value(&x), (0.0, 0.0));
        }
    }

    #[test]
    fn perturbed_telescoping_and_functional_equation() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let g8 = GreenField::new(f.clone(), 8, 2000, 1);
        let g12 = g8.with_depth(12);
        let g9 = g8.with_depth(9);
        let m = g8.tail_constant();
        assert!(m > 0.0);
        assert!((g9.error_bound() / g8.error_bound() - 0.5).abs() < 1e-15);
        let mut rng = stream(5, 0);
        for _ in 0..200 {
            let x = fs_uniform_point(&mut rng, 2);
            assert!((g8.value(&x).0 - g12.value(&x).0).abs() <= m * 2f64.powi(-9));
            let lhs = g9.value(&x).0;
            let rhs = g8.value(&f.evaluate(&x)).0 / 2.0 + sup_norm(&f.eval_lift(x.coords())).ln() / 2.0;
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn curve_potential_examples() {
        let i = HomogeneousPoint::from_real(&[0.0, 0.0, 1.0]).unwrap();
        // I = [0:0:1] lies on {z0 = 0} but not on {z2 = 0}.
        assert!(matches!(canonical_potential_of_curve(&line(0), &i), Err(Error::CenterOnCurve)));
        let g = canonical_potential_of_curve(&line(2), &i).unwrap();
        assert_eq!(g.value(&i), 0.0);
        let on = HomogeneousPoint::from_real(&[0.3, 1.0, 0.0]).unwrap();
        assert_eq!(g.value(&on), f64::NEG_INFINITY);
        let mut rng = stream(8, 0);
        for _ in 0..50 {
            let x = fs_uniform_point(&mut rng, 2);
            let v = g.value(&x);
            assert!(v.is_finite() && v <= 0.0);
        }

        let j = HomogeneousPoint::from_real(&[1.0, 0.2, 0.3]).unwrap();
        let q = HomPoly::new(3, 2, vec![(vec![1, 1, 0], C64::new(1.0, 0.0)), (vec![0, 0, 2], C64::new(-0.5, 0.0))]).unwrap();
        let q2_terms = {
            let mut t = Vec::new();
            for (e1, c1) in q.terms() {
                for (e2, c2) in q.terms() {
                    t.push(((0..3).map(|k| e1[k] + e2[k]).collect(), c1 * c2));
                }
            }
            t
        };
        let q2 = HomPoly::new(3, 4, q2_terms).unwrap();
        let a = canonical_potential_of_curve(&q, &j).unwrap();
        let b = canonical_potential_of_curve(&q2, &j).unwrap();
        let mut rng = stream(9, 0);
        for _ in 0..50 {
            let x = fs_uniform_point(&mut rng, 2);
            assert!((a.value(&x) - b.value(&x)).abs() < 1e-12);
        }
        let deficits = a.sub_mean_value_deficits(100, 0.01, 3);
        assert!(deficits.iter().all(|&d| d >= -1e-9), "{:?}", deficits.iter().cloned().fold(0.0, f64::min));
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::uniform(vec![
            HomogeneousPoint::from_real(&[1.0, 0.5, -0.25]).unwrap(),
            HomogeneousPoint::new(vec![C64::new(0.1, 0.3), C64::new(1.0, 0.0), C64::new(0.0, -0.7)]).unwrap(),
        ]);
        let back = DiscreteMeasure::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn mu_sample_on_power_map_lives_on_torus() {
        let f = ProjectiveMap::power_map(2, 2);
        let mu = mu_sample(&f, 12, 200, 4).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        let vals: Vec<f64> = mu.atoms.iter().map(|(p, _)| (p.coords()[0].norm() / p.coords()[2].norm()).ln()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() <= 3.0 * (var / vals.len() as f64).sqrt() + 1e-3);
    }
}
