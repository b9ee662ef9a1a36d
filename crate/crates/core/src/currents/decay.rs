//! Decay of `d^{-n} (f^n)_*(φ[L'])` measured through `dd^c` and `d`.
//!
//! For a line current `S = [L']` and a smooth `φ`,
//! `a_n = max_Φ |⟨d^{-n} dd^c (f^n)_*(φS), Φ⟩| = max_Φ |d^{-n} ∫_{L'} Φ∘f^n dd^cφ|`
//! and `b_n = d^{-n} ∫_{L'} |dφ| |D f^n|`, the mass of `d^{-n}(f^n)_*(dφ ∧ S)`
//! before cancellation between overlapping image sheets.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{SampledCurrent, ScalarField};
use crate::endomorphism::ProjectiveMap;
use crate::error::{Error, Result};
use crate::projective::{herm, HomogeneousPoint};

type C64 = Complex64;

const STENCIL_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRates {
    pub n: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Least-squares slopes of `log a_n`, `log b_n` against `n`; `None` when
    /// the values sit at the quadrature noise floor.
    pub slope_a: Option<f64>,
    pub slope_b: Option<f64>,
}

impl DecayRates {
    /// Both slopes, or `DegenerateFit` if either is missing.
    pub fn slopes(&self) -> Result<(f64, f64)> {
        match (self.slope_a, self.slope_b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::DegenerateFit(format!("a = {:?}, b = {:?}", self.a, self.b))),
        }
    }
}

/// Least-squares slope of `log v` against `n`; `None` below `floor`.
pub fn log_slope(n: &[usize], v: &[f64], floor: f64) -> Option<f64> {
    if n.len() < 2 || v.iter().any(|x| !x.is_finite() || x.abs() <= floor) {
        return None;
    }
    let xs: Vec<f64> = n.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = v.iter().map(|x| x.abs().ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

struct LineChart {
    e0: Vec<C64>,
    e1: Vec<C64>,
}

impl LineChart {
    /// Chart coordinate of `x` and whether the roles of `e0, e1` are swapped.
    fn coordinate(&self, x: &[C64]) -> (C64, bool) {
        let a = herm(x, &self.e0);
        let b = herm(x, &self.e1);
        if a.norm() >= b.norm() {
            (b / a, false)
        } else {
            (a / b, true)
        }
    }

    fn lift(&self, s: C64, swapped: bool) -> Vec<C64> {
        let (p, q) = if swapped { (&self.e1, &self.e0) } else { (&self.e0, &self.e1) };
        p.iter().zip(q).map(|(a, b)| a + s * b).collect()
    }

    /// `dd^cφ / ω` and `|dφ|` (angle metric) at `x`.
    fn derivatives(&self, phi: &ScalarField, x: &[C64]) -> (f64, f64) {
        let (s, sw) = self.coordinate(x);
        let h = STENCIL_STEP;
        let f = |z: C64| phi.eval(&self.lift(z, sw));
        let f0 = f(s);
        let fx = [f(s + h), f(s - h)];
        let fy = [f(s + C64::new(0.0, h)), f(s - C64::new(0.0, h))];
        let lap = (fx[0] + fx[1] + fy[0] + fy[1] - 4.0 * f0) / (h * h);
        let gx = (fx[0] - fx[1]) / (2.0 * h);
        let gy = (fy[0] - fy[1]) / (2.0 * h);
        let conf = 1.0 + s.norm_sqr();
        (0.5 * lap * conf * conf, (gx * gx + gy * gy).sqrt() * conf)
    }
}

/// `a_n`, `b_n` for `n = 1..=n_max` and their fitted slopes.
///
/// `s` must be an unpushed line current (its parametrization provides the
/// chart used for `dd^cφ`).
pub fn decay_rates(
    s: &SampledCurrent,
    f: &ProjectiveMap,
    phi: &ScalarField,
    family: &[ScalarField],
    n_max: usize,
) -> Result<DecayRates> {
    let chart = match s.pieces() {
        [p] if p.curve.stages.is_empty() => {
            LineChart { e0: p.curve.e0.clone(), e1: p.curve.e1.clone() }
        }
        _ => return Err(Error::Config("decay rates need an unpushed line current".into())),
    };
    if family.is_empty() || n_max < 2 {
        return Err(Error::DegenerateFit("need a test family and n_max ≥ 2".into()));
    }
    let d = f.degree() as f64;
    let scale = s.mass_scale();
    // Per node and n: w·(dd^cφ/ω)·Φ_j(f^n x) for each Φ_j, and w·|dφ|·|Df^n|.
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = s
        .nodes()
        .par_iter()
        .map(|node| {
            let (lap, grad) = chart.derivatives(phi, node.point.coords());
            let mut a = vec![0.0; n_max * family.len()];
            let mut b = vec![0.0; n_max];
            let mut p: HomogeneousPoint = node.point.clone();
            let mut t = node.tangent.clone();
            let mut log_stretch = 0.0;
            for n in 0..n_max {
                let img = f.tangent_pushforward(&p, &t, 1);
                log_stretch += img.log_stretch;
                p = img.point;
                t = img.tangent;
                for (j, fam) in family.iter().enumerate() {
                    a[n * family.len() + j] = node.weight * lap * fam.at(&p);
                }
                let st = log_stretch.exp();
                b[n] = if st.is_finite() { node.weight * grad * st } else { 0.0 };
            }
            (a, b)
        })
        .collect();
    let mut a_sum = vec![0.0; n_max * family.len()];
    let mut b_sum = vec![0.0; n_max];
    for (a, b) in &per_node {
        for (acc, v) in a_sum.iter_mut().zip(a) {
            *acc += v;
        }
        for (acc, v) in b_sum.iter_mut().zip(b) {
            *acc += v;
        }
    }
    let ns: Vec<usize> = (1..=n_max).collect();
    let a: Vec<f64> = (0..n_max)
        .map(|n| {
            let m = a_sum[n * family.len()..(n + 1) * family.len()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            scale * m * d.powi(-(n as i32 + 1))
        })
        .collect();
    let b: Vec<f64> = (0..n_max).map(|n| scale * b_sum[n] * d.powi(-(n as i32 + 1))).collect();
    // Quadrature cancellation leaves ~1e-12 relative residue on a zero integral.
    let floor_a = 1e-9 * d.powi(-(n_max as i32));
    let floor_b = 1e-12;
    Ok(DecayRates { slope_a: log_slope(&ns, &a, floor_a), slope_b: log_slope(&ns, &b, floor_b), n: ns, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::LinearSubspace;

    #[test]
    fn slope_of_exact_geometric_sequence() {
        let n = [1usize, 2, 3, 4];
        let v: Vec<f64> = n.iter().map(|&k| 3.0 * 0.5f64.powi(k as i32)).collect();
        assert!((log_slope(&n, &v, 0.0).unwrap() + 2f64.ln()).abs() < 1e-12);
        assert!(log_slope(&n, &[1.0, 0.0, 1.0, 1.0], 1e-12).is_none());
    }

    #[test]
    fn constant_weight_has_no_dd_c() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let l = LinearSubspace::span(&[
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.03, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.02)],
        ])
        .unwrap();
        let s = SampledCurrent::line_current(&l, 2000).unwrap();
        let r = decay_rates(&s, &f, &ScalarField::Constant(1.0), &[ScalarField::Constant(1.0)], 3).unwrap();
        assert!(r.a.iter().all(|v| *v == 0.0));
        assert!(r.slope_a.is_none());
        assert!(matches!(r.slopes(), Err(Error::DegenerateFit(_))));
    }
}
