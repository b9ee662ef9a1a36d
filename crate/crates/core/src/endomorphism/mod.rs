//! Holomorphic endomorphisms of P^k given by homogeneous polynomials.

mod preimage;

pub use preimage::{Preimage, SolverOptions};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly::{eval_all, parse_monomial_file, write_monomial_file, HomPoly};
use crate::projective::{
    fs_norm_sq, herm, norm_sq, normalizing_factor, sup_norm, HomogeneousPoint,
};
use crate::rng::{fs_uniform_point, stream};

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct ProjectiveMap {
    k: usize,
    d: u32,
    components: Vec<HomPoly>,
    jac: Vec<Vec<HomPoly>>,
}

/// Outcome of [`ProjectiveMap::validate`].
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub trials: usize,
    /// Minimum of `‖F(z)‖_∞ / ‖z‖_∞^d` over the sampled points.
    pub min_ratio: f64,
    pub witness: HomogeneousPoint,
    /// Smallest relative pivot in the degree `(k+1)(d-1)+1` Macaulay matrix
    /// (computed at high precision, `k = 2` only).
    pub macaulay_pivot: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct JacobianData {
    pub matrix: DMatrix<C64>,
    /// `|det|^2` of the differential in Fubini–Study orthonormal frames.
    pub projective_jacobian_modulus: f64,
}

/// Result of pushing a tangent vector forward along an orbit.
#[derive(Clone, Debug)]
pub struct TangentImage {
    pub point: HomogeneousPoint,
    /// Lift of the image tangent, orthogonal to `point` and of unit FS length.
    pub tangent: Vec<C64>,
    /// `log` of the Fubini–Study length ratio `|D f^n v| / |v|`.
    pub log_stretch: f64,
}

impl TangentImage {
    pub fn stretch(&self) -> f64 {
        self.log_stretch.exp()
    }
}

impl ProjectiveMap {
    pub fn new(k: usize, d: u32, components: Vec<HomPoly>) -> Result<Self> {
        if components.len() != k + 1 {
            return Err(Error::DimensionMismatch { expected: k + 1, got: components.len() });
        }
        if k < 1 || d < 1 {
            return Err(Error::Parse { line: 0, msg: format!("need k ≥ 1 and d ≥ 1, got k={k} d={d}") });
        }
        for c in &components {
            if c.nvars() != k + 1 || c.degree() != d {
                return Err(Error::Parse { line: 0, msg: "component of wrong shape".into() });
            }
        }
        let jac = components
            .iter()
            .map(|c| (0..=k).map(|j| c.derivative(j)).collect())
            .collect();
        Ok(Self { k, d, components, jac })
    }

    /// `[z_0^d : … : z_k^d]`.
    pub fn power_map(k: usize, d: u32) -> Self {
        let comps = (0..=k).map(|i| HomPoly::power(k + 1, i, d)).collect();
        Self::new(k, d, comps).expect("power map is well formed")
    }

    /// `[z0² + ε z1 z2 : z1² + ε z0 z2 : z2²]`, attracting the line `{z2 = 0}`.
    pub fn perturbed_power_map(eps: f64) -> Self {
        let one = C64::new(1.0, 0.0);
        let e = C64::new(eps, 0.0);
        let comps = vec![
            HomPoly::new(3, 2, vec![(vec![2, 0, 0], one), (vec![0, 1, 1], e)]).unwrap(),
            HomPoly::new(3, 2, vec![(vec![0, 2, 0], one), (vec![1, 0, 1], e)]).unwrap(),
            HomPoly::power(3, 2, 2),
        ];
        Self::new(2, 2, comps).expect("well formed")
    }

    /// `[z0² + z1² : 2i z0 z1 : z2²]`: the line `{z2 = 0}` is attracting and the
    /// map restricted to it is a Lattès map (uniformly expanding on the line).
    pub fn skew_lattes_map() -> Self {
        let one = C64::new(1.0, 0.0);
        let comps = vec![
            HomPoly::new(3, 2, vec![(vec![2, 0, 0], one), (vec![0, 2, 0], one)]).unwrap(),
            HomPoly::new(3, 2, vec![(vec![1, 1, 0], C64::new(0.0, 2.0))]).unwrap(),
            HomPoly::power(3, 2, 2),
        ];
        Self::new(2, 2, comps).expect("well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f = parse_monomial_file(text, "pmap")?;
        let mut terms: Vec<Vec<(Vec<u32>, C64)>> = vec![Vec::new(); f.k + 1];
        for (comp, e, c) in f.lines {
            if comp > f.k {
                return Err(Error::Parse { line: 0, msg: format!("component index {comp} > k={}", f.k) });
            }
            terms[comp].push((e, c));
        }
        let comps = terms
            .into_iter()
            .map(|t| HomPoly::new(f.k + 1, f.d, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(f.k, f.d, comps)
    }

    pub fn to_text(&self) -> String {
        let refs: Vec<&HomPoly> = self.components.iter().collect();
        write_monomial_file("pmap", self.k, self.d, &refs)
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn components(&self) -> &[HomPoly] {
        &self.components
    }

    /// `F(z)` on a lift.
    pub fn eval_lift(&self, z: &[C64]) -> Vec<C64> {
        eval_all(&self.components, z)
    }

    /// `DF(z)` on a lift.
    pub fn jacobian_lift(&self, z: &[C64]) -> DMatrix<C64> {
        let n = self.k + 1;
        let rows: Vec<Vec<C64>> = self.jac.iter().map(|r| eval_all(r, z)).collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    pub fn evaluate(&self, x: &HomogeneousPoint) -> HomogeneousPoint {
        HomogeneousPoint::new(self.eval_lift(x.coords())).expect("validated map has no common zero")
    }

    pub fn iterate(&self, x: &HomogeneousPoint, n: usize) -> HomogeneousPoint {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.evaluate(&y);
        }
        y
    }

    /// Monte-Carlo check that the components have no common zero, plus an
    /// exact-rank Macaulay test at `k = 2`.
    pub fn validate(&self, trials: usize, seed: u64) -> Result<ValidationReport> {
        let mut rng = stream(seed, 0);
        let mut best = f64::INFINITY;
        let mut witness = HomogeneousPoint::from_real(&vec![1.0; self.k + 1])?;
        for _ in 0..trials.max(1) {
            let x = fs_uniform_point(&mut rng, self.k);
            let r = sup_norm(&self.eval_lift(x.coords()));
            if r < best {
                best = r;
                witness = x;
            }
        }
        let macaulay_pivot = if self.k == 2 {
            Some(crate::algebraic::macaulay_min_pivot(&self.components, 256)?)
        } else {
            None
        };
        let degenerate = best < 1e-8 || macaulay_pivot.is_some_and(|p| p < 1e-30);
        if degenerate {
            return Err(Error::DegenerateMap {
                witness: witness.coords().iter().map(|c| (c.re, c.im)).collect(),
                ratio: best,
            });
        }
        Ok(ValidationReport { trials, min_ratio: best, witness, macaulay_pivot })
    }

    pub fn jacobian_data(&self, x: &HomogeneousPoint) -> JacobianData {
        let n = self.k + 1;
        let nx = norm_sq(x.coords()).sqrt();
        let xu: Vec<C64> = x.coords().iter().map(|c| c / nx).collect();
        let matrix = self.jacobian_lift(&xu);
        let y = self.eval_lift(&xu);
        let ny = norm_sq(&y).sqrt();
        let src = orthonormal_complement(&xu);
        let dst = orthonormal_complement(&y);
        let m = DMatrix::from_fn(n - 1, n - 1, |a, b| {
            let jv: Vec<C64> = (0..n).map(|i| (0..n).map(|j| matrix[(i, j)] * src[b][j]).sum()).collect();
            herm(&jv, &dst[a]) / ny
        });
        let det = m.determinant();
        JacobianData { matrix, projective_jacobian_modulus: det.norm_sqr() }
    }

    /// Pushes `v` (a lift of a tangent vector at `x`) forward by `f^n`,
    /// renormalizing at each step and accumulating the stretch in log space.
    pub fn tangent_pushforward(&self, x: &HomogeneousPoint, v: &[C64], n: usize) -> TangentImage {
        let mut p = x.coords().to_vec();
        let mut t = tangent_unit(&p, v);
        let mut log_stretch = 0.0f64;
        for _ in 0..n {
            if !log_stretch.is_finite() {
                break;
            }
            let y = self.eval_lift(&p);
            let w = mat_mul(&self.jacobian_lift(&p), &t);
            let s = normalizing_factor(&y).expect("validated map has no common zero");
            let y: Vec<C64> = y.iter().map(|c| c / s).collect();
            let w: Vec<C64> = w.iter().map(|c| c / s).collect();
            let ratio = fs_norm_sq(&y, &w);
            log_stretch += 0.5 * ratio.ln();
            t = tangent_unit(&y, &w);
            p = y;
        }
        TangentImage { point: HomogeneousPoint::new(p).expect("nonzero"), tangent: t, log_stretch }
    }
}

/// Component of `v` orthogonal to `x`, scaled to unit FS length (zero if degenerate).
pub fn tangent_unit(x: &[C64], v: &[C64]) -> Vec<C64> {
    let c = herm(v, x) / norm_sq(x);
    let w: Vec<C64> = v.iter().zip(x).map(|(a, b)| a - c * b).collect();
    let l = fs_norm_sq(x, &w).sqrt();
    if l > 0.0 && l.is_finite() {
        w.into_iter().map(|z| z / l).collect()
    } else {
        vec![C64::new(0.0, 0.0); x.len()]
    }
}

fn mat_mul(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    crate::projective::mat_vec(m, v)
}

/// Orthonormal basis of `x^⊥` in C^{k+1}.
pub fn orthonormal_complement(x: &[C64]) -> Vec<Vec<C64>> {
    let n = x.len();
    let nx = norm_sq(x).sqrt();
    let mut out: Vec<Vec<C64>> = vec![x.iter().map(|c| c / nx).collect()];
    for i in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &out {
                let c = herm(&e, b);
                for (ei, bi) in e.iter_mut().zip(b) {
                    *ei -= c * bi;
                }
            }
        }
        let l = norm_sq(&e).sqrt();
        if l > 1e-8 {
            out.push(e.into_iter().map(|z| z / l).collect());
        }
        if out.len() == n {
            break;
        }
    }
    out.remove(0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::fs_distance;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn evaluation_examples() {
        let f = ProjectiveMap::power_map(2, 2);
        let x = HomogeneousPoint::from_real(&[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.evaluate(&x), HomogeneousPoint::from_real(&[4.0, 1.0, 1.0]).unwrap());
        assert_eq!(f.iterate(&x, 0), x);
        let one = HomogeneousPoint::from_real(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.iterate(&one, 17), one);
    }

    #[test]
    fn validation_examples() {
        assert!(ProjectiveMap::power_map(2, 2).validate(200, 1).is_ok());
        assert!(ProjectiveMap::perturbed_power_map(0.05).validate(200, 1).is_ok());
        assert!(ProjectiveMap::skew_lattes_map().validate(200, 1).is_ok());
        let t = "pmap k=2 d=2\n0 2 0 0 1 0\n1 1 1 0 1 0\n2 1 0 1 1 0\n";
        let g = ProjectiveMap::parse(t).unwrap();
        assert!(matches!(g.validate(200, 1), Err(Error::DegenerateMap { .. })));
    }

    #[test]
    fn parse_round_trip() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let g = ProjectiveMap::parse(&f.to_text()).unwrap();
        assert_eq!(f.content_hash(), g.content_hash());
    }

    #[test]
    fn tangent_pushforward_examples() {
        let f = ProjectiveMap::power_map(2, 2);
        let x = HomogeneousPoint::from_real(&[1.0, 0.3, 0.7]).unwrap();
        let v = [c(0.0), c(1.0), c(0.0)];
        let r0 = f.tangent_pushforward(&x, &v, 0);
        assert_eq!(r0.log_stretch, 0.0);

        // t ↦ t² in the chart z0 = z2 = 1: near t = 0 the FS metric is flat up
        // to O(t²), so the stretch is 2|t| to leading order.
        for t in [1e-3, 1e-4] {
            let x = HomogeneousPoint::from_real(&[1.0, t, 1.0]).unwrap();
            let s = f.tangent_pushforward(&x, &v, 1).stretch();
            assert!((s / (2.0 * t) - 1.0).abs() < 1e-5, "t={t} s={s}");
        }

        let g = ProjectiveMap::perturbed_power_map(0.05);
        let y = HomogeneousPoint::from_real(&[0.4, -0.9, 0.2]).unwrap();
        let w = [c(0.3), c(0.1), c(-1.0)];
        let two = g.tangent_pushforward(&y, &w, 2);
        let one = g.tangent_pushforward(&y, &w, 1);
        let next = g.tangent_pushforward(&one.point, &one.tangent, 1);
        assert!(((one.log_stretch + next.log_stretch) - two.log_stretch).abs() < 1e-8);
        assert!(fs_distance(&two.point, &g.iterate(&y, 2)) < 1e-12);
    }

    #[test]
    fn jacobian_chain_rule() {
        let g = ProjectiveMap::perturbed_power_map(0.05);
        let x = HomogeneousPoint::from_real(&[0.4, -0.9, 0.2]).unwrap();
        let j1 = g.jacobian_data(&x).projective_jacobian_modulus;
        let j2 = g.jacobian_data(&g.evaluate(&x)).projective_jacobian_modulus;
        // |Jac f²| from the composed lifted differential.
        let xu = x.coords().to_vec();
        let fx = g.eval_lift(&xu);
        let m = g.jacobian_lift(&fx) * g.jacobian_lift(&xu);
        let composed = composed_modulus(&g, &xu, &m);
        assert!((composed / (j1 * j2) - 1.0).abs() < 1e-8);
    }

    fn composed_modulus(g: &ProjectiveMap, x: &[C64], m: &DMatrix<C64>) -> f64 {
        let nx = norm_sq(x).sqrt();
        let xu: Vec<C64> = x.iter().map(|c| c / nx).collect();
        let scale = nx.powi(-((g.degree() * g.degree() - 1) as i32));
        let y = g.eval_lift(&g.eval_lift(&xu));
        let ny = norm_sq(&y).sqrt();
        let src = orthonormal_complement(&xu);
        let dst = orthonormal_complement(&y);
        let mm = DMatrix::from_fn(2, 2, |a, b| {
            let jv = crate::projective::mat_vec(m, &src[b]);
            herm(&jv, &dst[a]) * scale / ny
        });
        mm.determinant().norm_sqr()
    }
}
