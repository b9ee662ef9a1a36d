//! Homogeneous-coordinate geometry of P^k.
//!
//! Points are stored sup-normalized: the first coordinate of maximal modulus
//! is exactly `1`. The Fubini–Study metric is the angle metric
//! `d(x, y) = arccos(|<x,y>| / (|x||y|))`, and the Kähler form is scaled so a
//! projective line has area 1 (the angle metric gives a line area `pi`).

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const EPS_PROJ: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct HomogeneousPoint {
    coords: Vec<C64>,
}

impl fmt::Debug for HomogeneousPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, " : ")?;
            }
            write!(f, "{:.6}{:+.6}i", c.re, c.im)?;
        }
        write!(f, "]")
    }
}

impl HomogeneousPoint {
    /// Builds a point from raw homogeneous coordinates, normalizing them.
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        normalize_coords(coords).map(|coords| Self { coords })
    }

    pub fn from_real(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<C64> {
        self.coords
    }

    /// `k`, the dimension of the ambient projective space.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn approx_eq(&self, other: &Self, eps: f64) -> bool {
        fs_distance(self, other) <= eps
    }

    /// Lexicographic order on normalized coordinates (re, then im).
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let o = a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
            if o != std::cmp::Ordering::Equal {
                return o;
            }
        }
        self.coords.len().cmp(&other.coords.len())
    }
}

/// Index of the first coordinate of maximal modulus.
pub fn pivot_index(coords: &[C64]) -> Result<usize> {
    let mut pivot = 0;
    let mut best = -1.0f64;
    for (i, c) in coords.iter().enumerate() {
        let m = c.norm();
        if !m.is_finite() {
            return Err(Error::ZeroVector);
        }
        if m > best {
            best = m;
            pivot = i;
        }
    }
    if best <= 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(pivot)
}

/// The complex number a lift is divided by during normalization.
pub fn normalizing_factor(coords: &[C64]) -> Result<C64> {
    pivot_index(coords).map(|p| coords[p])
}

fn normalize_coords(mut coords: Vec<C64>) -> Result<Vec<C64>> {
    let pivot = pivot_index(&coords)?;
    let p = coords[pivot];
    for (i, c) in coords.iter_mut().enumerate() {
        *c = if i == pivot { C64::new(1.0, 0.0) } else { *c / p };
    }
    Ok(coords)
}

/// Sup-norm normalization of a homogeneous vector.
pub fn normalize(coords: &[C64]) -> Result<HomogeneousPoint> {
    HomogeneousPoint::new(coords.to_vec())
}

pub fn sup_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Hermitian product `sum a_i conj(b_i)`.
pub fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `|a ^ b|^2 = |a|^2 |b|^2 - |<a,b>|^2`, summed over 2x2 minors for accuracy.
pub fn wedge_norm_sq(a: &[C64], b: &[C64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            s += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    s
}

/// Fubini–Study (angle) distance on lifts; in `[0, pi/2]`.
pub fn fs_distance_raw(a: &[C64], b: &[C64]) -> f64 {
    let w = wedge_norm_sq(a, b).sqrt();
    let h = herm(a, b).norm();
    w.atan2(h)
}

pub fn fs_distance(x: &HomogeneousPoint, y: &HomogeneousPoint) -> f64 {
    fs_distance_raw(&x.coords, &y.coords)
}

/// Squared angle-metric length of the tangent vector induced by `v` at the
/// lift `x` (only the component of `v` orthogonal to `x` contributes).
pub fn fs_norm_sq(x: &[C64], v: &[C64]) -> f64 {
    let nx = norm_sq(x);
    wedge_norm_sq(x, v) / (nx * nx)
}

/// The Fubini–Study Kähler form, normalized so that a line has area 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct FubiniStudyForm;

impl FubiniStudyForm {
    /// Total volume `∫ ω^k`.
    pub const TOTAL_VOLUME: f64 = 1.0;

    /// Density of `ω` on the complex direction `v` at `x`, relative to the
    /// Euclidean area of the parameter `s` in `s ↦ x + s v`.
    pub fn density(&self, x: &[C64], v: &[C64]) -> f64 {
        fs_norm_sq(x, v) / std::f64::consts::PI
    }
}

/// A linear subspace of P^k, stored both by kernel covectors and by an
/// orthonormal spanning set of lifts.
#[derive(Clone, Debug)]
pub struct LinearSubspace {
    k: usize,
    dimension: usize,
    kernel_forms: Vec<Vec<C64>>,
    basis: Vec<Vec<C64>>,
}

impl LinearSubspace {
    /// The projective span of the given vectors in C^{k+1}.
    pub fn span(vectors: &[Vec<C64>]) -> Result<Self> {
        let n = vectors.first().ok_or(Error::ZeroVector)?.len();
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let basis = gram_schmidt(vectors, 1e-12);
        if basis.is_empty() {
            return Err(Error::ZeroVector);
        }
        let mut full = basis.clone();
        for i in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            full.push(e);
        }
        let complete = gram_schmidt(&full, 1e-10);
        let kernel_forms = complete[basis.len()..]
            .iter()
            .map(|c| c.iter().map(|z| z.conj()).collect())
            .collect();
        Ok(Self { k: n - 1, dimension: basis.len() - 1, kernel_forms, basis })
    }

    /// The subspace cut out by the given covectors.
    pub fn from_kernel(forms: &[Vec<C64>], k: usize) -> Result<Self> {
        let conj: Vec<Vec<C64>> = forms.iter().map(|f| f.iter().map(|z| z.conj()).collect()).collect();
        let normals = gram_schmidt(&conj, 1e-12);
        let mut full = normals.clone();
        for i in 0..=k {
            let mut e = vec![C64::new(0.0, 0.0); k + 1];
            e[i] = C64::new(1.0, 0.0);
            full.push(e);
        }
        let complete = gram_schmidt(&full, 1e-10);
        let basis = complete[normals.len()..].to_vec();
        if basis.is_empty() {
            return Err(Error::ZeroVector);
        }
        Self::span(&basis)
    }

    /// The coordinate point `e_i`.
    pub fn coordinate_point(k: usize, i: usize) -> Self {
        let mut e = vec![C64::new(0.0, 0.0); k + 1];
        e[i] = C64::new(1.0, 0.0);
        Self::span(&[e]).expect("nonzero")
    }

    /// The coordinate hyperplane `{z_i = 0}`.
    pub fn coordinate_hyperplane(k: usize, i: usize) -> Self {
        let mut f = vec![C64::new(0.0, 0.0); k + 1];
        f[i] = C64::new(1.0, 0.0);
        Self::from_kernel(&[f], k).expect("nonzero")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kernel_forms(&self) -> &[Vec<C64>] {
        &self.kernel_forms
    }

    pub fn orthonormal_basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    pub fn contains(&self, x: &HomogeneousPoint, eps: f64) -> bool {
        let n = norm_sq(x.coords()).sqrt();
        self.kernel_forms.iter().all(|f| {
            let s: C64 = f.iter().zip(x.coords()).map(|(a, b)| a * b).sum();
            s.norm() <= eps * n
        })
    }

    /// Image under an invertible linear map of C^{k+1}.
    pub fn transform(&self, m: &DMatrix<C64>) -> Result<Self> {
        let vs: Vec<Vec<C64>> = self.basis.iter().map(|b| mat_vec(m, b)).collect();
        Self::span(&vs)
    }
}

fn gram_schmidt(vectors: &[Vec<C64>], tol: f64) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = herm(&w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= c * ei;
                }
            }
        }
        let n = norm_sq(&w).sqrt();
        if n > tol {
            out.push(w.into_iter().map(|z| z / n).collect());
        }
    }
    out
}

pub fn mat_vec(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Projection of `P^k \ I` onto `L` along the subspaces through `I`.
#[derive(Clone, Debug)]
pub struct CenterProjection {
    center: LinearSubspace,
    target: LinearSubspace,
    /// Columns: basis of I, then basis of L.
    frame: DMatrix<C64>,
    frame_inv: DMatrix<C64>,
}

impl CenterProjection {
    pub fn new(center: LinearSubspace, target: LinearSubspace) -> Result<Self> {
        let n = center.k + 1;
        if target.k != center.k {
            return Err(Error::DimensionMismatch { expected: center.k, got: target.k });
        }
        let cols = center.basis.len() + target.basis.len();
        if cols != n {
            return Err(Error::DimensionMismatch { expected: n, got: cols });
        }
        let frame = DMatrix::from_fn(n, n, |i, j| {
            if j < center.basis.len() {
                center.basis[j][i]
            } else {
                target.basis[j - center.basis.len()][i]
            }
        });
        let svd_min = frame.clone().svd(false, false).singular_values.min();
        if svd_min < 1e-12 {
            return Err(Error::SubspacesIntersect);
        }
        let frame_inv = frame.clone().try_inverse().ok_or(Error::SubspacesIntersect)?;
        Ok(Self { center, target, frame, frame_inv })
    }

    /// `I = e_axis`, `L = {z_axis = 0}`.
    pub fn coordinate(k: usize, axis: usize) -> Self {
        Self::new(
            LinearSubspace::coordinate_point(k, axis),
            LinearSubspace::coordinate_hyperplane(k, axis),
        )
        .expect("coordinate pair is transverse")
    }

    pub fn center(&self) -> &LinearSubspace {
        &self.center
    }

    pub fn target(&self) -> &LinearSubspace {
        &self.target
    }

    fn split(&self, x: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let c = mat_vec(&self.frame_inv, x);
        let p = self.center.basis.len();
        (c[..p].to_vec(), c[p..].to_vec())
    }

    /// Coordinates of `x` along `I` (fiber part) and along `L` (base part).
    pub fn fiber_and_base(&self, x: &HomogeneousPoint) -> (Vec<C64>, Vec<C64>) {
        self.split(x.coords())
    }

    /// `|fiber| / |base|` in sup norms; infinite on `I`.
    pub fn fiber_modulus(&self, x: &HomogeneousPoint) -> f64 {
        let (fib, base) = self.split(x.coords());
        let b = sup_norm(&base);
        if b == 0.0 {
            f64::INFINITY
        } else {
            sup_norm(&fib) / b
        }
    }

    pub fn project(&self, x: &HomogeneousPoint) -> Result<HomogeneousPoint> {
        self.fiber_scale(C64::new(0.0, 0.0), x)
    }

    /// `A_θ`: multiplication by `θ` in the vector space `I(x) \ I` with origin `π(x)`.
    pub fn fiber_scale(&self, theta: C64, x: &HomogeneousPoint) -> Result<HomogeneousPoint> {
        let (fib, base) = self.split(x.coords());
        if sup_norm(&base) <= 1e-14 * sup_norm(x.coords()) {
            return Err(Error::PointInCenter);
        }
        let mut c: Vec<C64> = fib.iter().map(|z| z * theta).collect();
        c.extend(base);
        HomogeneousPoint::new(mat_vec(&self.frame, &c))
    }

    /// Matrix of `A_θ` acting on lifts.
    pub fn fiber_scale_matrix(&self, theta: C64) -> DMatrix<C64> {
        let n = self.frame.nrows();
        let p = self.center.basis.len();
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i < p {
                theta
            } else {
                C64::new(1.0, 0.0)
            }
        });
        &self.frame * d * &self.frame_inv
    }

    /// The point `π(x) + s·(direction in I)` for `p = 1`, i.e. fiber coordinate `s`
    /// measured against the sup norm of the base coordinates.
    pub fn fiber_point(&self, base: &HomogeneousPoint, s: C64) -> Result<HomogeneousPoint> {
        let (_, b) = self.split(base.coords());
        let bn = sup_norm(&b);
        if bn == 0.0 {
            return Err(Error::PointInCenter);
        }
        let mut c = vec![C64::new(0.0, 0.0); self.center.basis.len()];
        c[0] = s * bn;
        c.extend(b);
        HomogeneousPoint::new(mat_vec(&self.frame, &c))
    }
}
