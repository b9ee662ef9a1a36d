//! Preimages `f^{-n}(a)` by stepwise homotopy continuation.
//!
//! One step solves `F(z) ∝ w` as the projective system
//! `w_p F_i(z) - w_i F_p(z) = 0` (`i ≠ p`, `p` the pivot of `w`) on a random
//! affine patch, starting from the power map aimed at a random target.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::ProjectiveMap;
use crate::error::{Error, Result};
use crate::projective::{fs_distance, pivot_index, sup_norm, HomogeneousPoint};
use crate::rng::{complex_normal, stream};

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_steps: usize,
    pub residual_tol: f64,
    pub cluster_tol: f64,
    pub polish_iters: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_steps: 10_000, residual_tol: 1e-10, cluster_tol: 1e-6, polish_iters: 50, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preimage {
    pub point: HomogeneousPoint,
    pub multiplicity: usize,
}

/// Random data of one homotopy: start target, patch and gamma.
struct Homotopy<'a> {
    f: &'a ProjectiveMap,
    w: Vec<C64>,
    start: Vec<C64>,
    pivot: usize,
    patch: Vec<C64>,
    gamma: C64,
}

impl<'a> Homotopy<'a> {
    fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.f.k).filter(move |&i| i != self.pivot)
    }

    /// Residuals of the target and start systems (without the patch row).
    fn systems(&self, z: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let fz = self.f.eval_lift(z);
        let d = self.f.d as i32;
        let p = self.pivot;
        let mut t = Vec::with_capacity(self.f.k);
        let mut s = Vec::with_capacity(self.f.k);
        for i in self.rows() {
            t.push(self.w[p] * fz[i] - self.w[i] * fz[p]);
            s.push(self.start[p] * z[i].powi(d) - self.start[i] * z[p].powi(d));
        }
        (t, s)
    }

    fn jacobians(&self, z: &[C64]) -> (DMatrix<C64>, DMatrix<C64>) {
        let n = self.f.k + 1;
        let jf = self.f.jacobian_lift(z);
        let d = self.f.d as i32;
        let p = self.pivot;
        let mut jt = DMatrix::zeros(n - 1, n);
        let mut js = DMatrix::zeros(n - 1, n);
        for (r, i) in self.rows().enumerate() {
            for j in 0..n {
                jt[(r, j)] = self.w[p] * jf[(i, j)] - self.w[i] * jf[(p, j)];
            }
            js[(r, i)] = self.start[p] * z[i].powi(d - 1) * d as f64;
            js[(r, p)] = -self.start[i] * z[p].powi(d - 1) * d as f64;
        }
        (jt, js)
    }

    /// `H(z,t)` including the patch row, and `∂H/∂z`, `∂H/∂t`.
    fn eval(&self, z: &[C64], t: f64) -> (DVector<C64>, DMatrix<C64>, DVector<C64>) {
        let n = self.f.k + 1;
        let (tv, sv) = self.systems(z);
        let (jt, js) = self.jacobians(z);
        let a = self.gamma * (1.0 - t);
        let mut h = DVector::zeros(n);
        let mut hz = DMatrix::zeros(n, n);
        let mut ht = DVector::zeros(n);
        for r in 0..n - 1 {
            h[r] = a * sv[r] + tv[r] * t;
            ht[r] = tv[r] - self.gamma * sv[r];
            for j in 0..n {
                hz[(r, j)] = a * js[(r, j)] + jt[(r, j)] * t;
            }
        }
        h[n - 1] = self.patch.iter().zip(z).map(|(c, x)| c * x).sum::<C64>() - 1.0;
        for j in 0..n {
            hz[(n - 1, j)] = self.patch[j];
        }
        (h, hz, ht)
    }

    fn velocity(&self, z: &[C64], t: f64) -> Option<Vec<C64>> {
        let (_, hz, ht) = self.eval(z, t);
        let v = hz.lu().solve(&(-ht))?;
        Some(v.iter().copied().collect())
    }

    fn newton(&self, z: &mut [C64], t: f64, iters: usize, tol: f64) -> bool {
        for _ in 0..iters {
            let (h, hz, _) = self.eval(z, t);
            let Some(dz) = hz.lu().solve(&(-h)) else { return false };
            let scale = 1.0 + sup_norm(z);
            for (zi, di) in z.iter_mut().zip(dz.iter()) {
                *zi += di;
            }
            if dz.iter().map(|c| c.norm()).fold(0.0, f64::max) <= tol * scale {
                return true;
            }
        }
        false
    }

    fn start_solutions(&self) -> Vec<Vec<C64>> {
        let n = self.f.k + 1;
        let d = self.f.d as usize;
        let p = self.pivot;
        let others: Vec<usize> = self.rows().collect();
        let roots: Vec<C64> = others
            .iter()
            .map(|&i| (self.start[i] / self.start[p]).powf(1.0 / d as f64))
            .collect();
        let total = d.pow(others.len() as u32);
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut z = vec![C64::new(0.0, 0.0); n];
            z[p] = C64::new(1.0, 0.0);
            for (r, &i) in others.iter().enumerate() {
                let m = idx % d;
                idx /= d;
                let zeta = C64::from_polar(1.0, std::f64::consts::TAU * m as f64 / d as f64);
                z[i] = roots[r] * zeta;
            }
            let c: C64 = self.patch.iter().zip(&z).map(|(a, b)| a * b).sum();
            out.push(z.into_iter().map(|x| x / c).collect());
        }
        out
    }

    /// Tracks one path from `t = 0` to `t = 1`; returns the endpoint.
    fn track(&self, mut z: Vec<C64>, opts: &SolverOptions) -> Result<Vec<C64>> {
        let mut t = 0.0f64;
        let mut h = 0.01f64;
        let n = z.len();
        for _ in 0..opts.max_steps {
            if t >= 1.0 {
                return Ok(z);
            }
            let step = h.min(1.0 - t);
            // Classical RK4 predictor on dz/dt = -H_z^{-1} H_t.
            let k1 = self.velocity(&z, t);
            let pred = k1.and_then(|k1| {
                let mid1: Vec<C64> = (0..n).map(|i| z[i] + k1[i] * (step / 2.0)).collect();
                let k2 = self.velocity(&mid1, t + step / 2.0)?;
                let mid2: Vec<C64> = (0..n).map(|i| z[i] + k2[i] * (step / 2.0)).collect();
                let k3 = self.velocity(&mid2, t + step / 2.0)?;
                let end: Vec<C64> = (0..n).map(|i| z[i] + k3[i] * step).collect();
                let k4 = self.velocity(&end, t + step)?;
                Some(
                    (0..n)
                        .map(|i| z[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (step / 6.0))
                        .collect::<Vec<C64>>(),
                )
            });
            let accepted = pred.and_then(|mut zn| {
                let moved = sup_norm(&zn.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
                let ok = self.newton(&mut zn, t + step, 3, 1e-9)
                    && sup_norm(&zn).is_finite()
                    && moved < 0.5 * (1.0 + sup_norm(&z));
                ok.then_some(zn)
            });
            match accepted {
                Some(zn) => {
                    z = zn;
                    t += step;
                    h = (h * 1.6).min(0.1);
                }
                None => {
                    h *= 0.5;
                    if h < 1e-13 {
                        // Endgame failure near a singular endpoint: hand the
                        // current point to the polishing stage.
                        if t > 0.999 {
                            return Ok(z);
                        }
                        return Err(Error::SolverFailure(format!("step size collapsed at t={t:.6}")));
                    }
                }
            }
        }
        Err(Error::SolverFailure(format!("exceeded {} steps", opts.max_steps)))
    }

    /// Relative residual of the target system at a sup-normalized lift.
    fn residual(&self, z: &[C64]) -> f64 {
        let s = sup_norm(z);
        let zn: Vec<C64> = z.iter().map(|c| c / s).collect();
        let (t, _) = self.systems(&zn);
        sup_norm(&t)
    }
}

impl ProjectiveMap {
    /// All solutions of `f(z) = w`, clustered by multiplicity; `d^k` in total.
    pub fn preimages_one(&self, w: &HomogeneousPoint, opts: &SolverOptions) -> Result<Vec<Preimage>> {
        let expected = (self.d as usize).pow(self.k as u32);
        let mut last_err = None;
        for attempt in 0..4u64 {
            match self.preimages_attempt(w, opts, attempt) {
                Ok(v) if v.iter().map(|p| p.multiplicity).sum::<usize>() == expected => return Ok(v),
                Ok(v) => {
                    last_err = Some(Error::SolverFailure(format!(
                        "found {} of {expected} roots",
                        v.iter().map(|p| p.multiplicity).sum::<usize>()
                    )))
                }
                Err(e @ Error::CriticalValue(_)) => return Err(e),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::SolverFailure("no attempt".into())))
    }

    fn preimages_attempt(&self, w: &HomogeneousPoint, opts: &SolverOptions, attempt: u64) -> Result<Vec<Preimage>> {
        let n = self.k + 1;
        let mut rng = stream(opts.seed, attempt);
        let start: Vec<C64> = (0..n)
            .map(|_| C64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU) * (0.5 + rng.gen::<f64>()))
            .collect();
        let patch: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
        let gamma = C64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
        let wc = w.coords().to_vec();
        let pivot = pivot_index(&wc)?;
        let hom = Homotopy { f: self, w: wc, start, pivot, patch, gamma };

        let mut roots: Vec<HomogeneousPoint> = Vec::new();
        let mut singular = Vec::new();
        for z0 in hom.start_solutions() {
            let mut z = hom.track(z0, opts)?;
            hom.newton(&mut z, 1.0, opts.polish_iters, 1e-15);
            let res = hom.residual(&z);
            if !(res <= opts.residual_tol) {
                return Err(Error::CriticalValue(format!("polished residual {res:.2e}")));
            }
            let p = HomogeneousPoint::new(z.clone())?;
            let img = self.evaluate(&p);
            if fs_distance(&img, w) > 1e-8 {
                return Err(Error::SolverFailure(format!("root maps {:.2e} away", fs_distance(&img, w))));
            }
            let (_, hz, _) = hom.eval(&z, 1.0);
            let sv = hz.singular_values();
            singular.push(sv.min() / sv.max());
            roots.push(p);
        }

        let mut clusters: Vec<(HomogeneousPoint, usize, f64)> = Vec::new();
        for (p, cond) in roots.into_iter().zip(singular) {
            match clusters.iter_mut().find(|(q, _, _)| fs_distance(q, &p) <= opts.cluster_tol) {
                Some(c) => {
                    c.1 += 1;
                    c.2 = c.2.min(cond);
                }
                None => clusters.push((p, 1, cond)),
            }
        }
        // Two paths landing on a well-conditioned root means one path jumped.
        if clusters.iter().any(|(_, m, cond)| *m > 1 && *cond > 1e-6) {
            return Err(Error::SolverFailure("path jumping detected".into()));
        }
        let mut out: Vec<Preimage> =
            clusters.into_iter().map(|(point, multiplicity, _)| Preimage { point, multiplicity }).collect();
        out.sort_by(|a, b| a.point.lex_cmp(&b.point));
        Ok(out)
    }

    /// The full fiber `f^{-n}(a)` with multiplicities, solved level by level;
    /// lexicographically sorted, independent of thread scheduling.
    pub fn preimages(&self, a: &HomogeneousPoint, n: usize, opts: &SolverOptions) -> Result<Vec<Preimage>> {
        let mut level = vec![Preimage { point: a.clone(), multiplicity: 1 }];
        for _ in 0..n {
            let next: Vec<Vec<Preimage>> = level
                .par_iter()
                .map(|p| {
                    self.preimages_one(&p.point, opts).map(|kids| {
                        kids.into_iter()
                            .map(|q| Preimage { point: q.point, multiplicity: q.multiplicity * p.multiplicity })
                            .collect()
                    })
                })
                .collect::<Result<_>>()?;
            level = next.into_iter().flatten().collect();
        }
        level.sort_by(|a, b| a.point.lex_cmp(&b.point));
        Ok(level)
    }
}
