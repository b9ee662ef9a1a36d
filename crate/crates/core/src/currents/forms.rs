//! Scalar cutoffs and (1,1) test forms evaluated on complex tangent lines.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::projective::{fs_distance_raw, fs_norm_sq, mat_vec, norm_sq, HomogeneousPoint};

type C64 = Complex64;

/// A smooth real function on P^k.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `|ℓ(z)|² / (|ℓ|² |z|²)`: squared sine of the distance to `{ℓ = 0}`.
    HyperplaneDistSq(Vec<C64>),
    /// `exp(-h/width²)` with `h` as above; concentrated near `{ℓ = 0}`.
    HyperplaneGaussian { form: Vec<C64>, width: f64 },
    /// `exp(-d(x, c)²/width²)` in the Fubini–Study distance.
    Gaussian { center: HomogeneousPoint, width: f64 },
    /// `Re(ℓ1(z) conj(ℓ2(z))) / |z|²`, a real-analytic oscillating observable.
    Bilinear { left: Vec<C64>, right: Vec<C64> },
    Custom(Arc<dyn Fn(&[C64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::HyperplaneDistSq(l) => write!(f, "HyperplaneDistSq({l:?})"),
            Self::HyperplaneGaussian { form, width } => write!(f, "HyperplaneGaussian({form:?}, {width})"),
            Self::Gaussian { center, width } => write!(f, "Gaussian({center:?}, {width})"),
            Self::Bilinear { left, right } => write!(f, "Bilinear({left:?}, {right:?})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn apply(l: &[C64], z: &[C64]) -> C64 {
    l.iter().zip(z).map(|(a, b)| a * b).sum()
}

impl ScalarField {
    /// Evaluates on any lift.
    pub fn eval(&self, z: &[C64]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::HyperplaneDistSq(l) => apply(l, z).norm_sqr() / (norm_sq(l) * norm_sq(z)),
            Self::HyperplaneGaussian { form, width } => {
                let h = apply(form, z).norm_sqr() / (norm_sq(form) * norm_sq(z));
                (-h / (width * width)).exp()
            }
            Self::Gaussian { center, width } => {
                let d = fs_distance_raw(center.coords(), z);
                (-(d * d) / (width * width)).exp()
            }
            Self::Bilinear { left, right } => (apply(left, z) * apply(right, z).conj()).re / norm_sq(z),
            Self::Custom(f) => f(z),
        }
    }

    pub fn at(&self, x: &HomogeneousPoint) -> f64 {
        self.eval(x.coords())
    }

    /// Supremum bound `‖χ‖_∞` (exact for the built-in kinds).
    pub fn sup_bound(&self) -> f64 {
        match self {
            Self::Constant(c) => c.abs(),
            Self::HyperplaneDistSq(_) | Self::HyperplaneGaussian { .. } | Self::Gaussian { .. } => 1.0,
            Self::Bilinear { left, right } => (norm_sq(left) * norm_sq(right)).sqrt(),
            Self::Custom(_) => f64::NAN,
        }
    }
}

/// A (1,1) test form, evaluated as its density against `ω` on a complex
/// tangent direction.
#[derive(Clone, Debug)]
pub enum TestForm {
    Omega,
    /// `A^*ω` for a projective-linear `A`.
    PulledOmega(DMatrix<C64>),
    /// `χ ω`.
    CutoffOmega(ScalarField),
    /// `χ A^*ω`.
    CutoffPulled(ScalarField, DMatrix<C64>),
    Combination(Vec<(f64, TestForm)>),
}

fn pulled_density(a: &DMatrix<C64>, x: &[C64], t: &[C64]) -> f64 {
    let ax = mat_vec(a, x);
    let at = mat_vec(a, t);
    fs_norm_sq(&ax, &at) / fs_norm_sq(x, t)
}

impl TestForm {
    /// `Φ(t, it) / ω(t, it)` at `x` for the complex direction `t`.
    pub fn density(&self, x: &[C64], t: &[C64]) -> f64 {
        match self {
            Self::Omega => 1.0,
            Self::PulledOmega(a) => pulled_density(a, x, t),
            Self::CutoffOmega(chi) => chi.eval(x),
            Self::CutoffPulled(chi, a) => chi.eval(x) * pulled_density(a, x, t),
            Self::Combination(parts) => parts.iter().map(|(c, f)| c * f.density(x, t)).sum(),
        }
    }

    /// `h ω` with `h` the squared sine distance to `{ℓ = 0}`: `dd^c` of it is
    /// strictly positive within distance `π/4` of that hyperplane, which
    /// contains every thin trapping neighbourhood of it.
    pub fn strictly_positive_near(form: Vec<C64>) -> Self {
        Self::CutoffOmega(ScalarField::HyperplaneDistSq(form))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn identity_pullback_is_omega() {
        let id = DMatrix::<C64>::identity(3, 3);
        let x = [c(1.0), C64::new(0.3, 0.2), c(-0.5)];
        let t = [c(0.1), c(1.0), C64::new(0.0, 0.4)];
        assert!((TestForm::PulledOmega(id).density(&x, &t) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn combination_is_linear() {
        let x = [c(1.0), C64::new(0.3, 0.2), c(-0.5)];
        let t = [c(0.1), c(1.0), C64::new(0.0, 0.4)];
        let a = TestForm::CutoffOmega(ScalarField::HyperplaneDistSq(vec![c(0.0), c(0.0), c(1.0)]));
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0) } else { C64::new(0.1, 0.05) });
        let b = TestForm::PulledOmega(m);
        let combo = TestForm::Combination(vec![(2.5, a.clone()), (-0.75, b.clone())]);
        let lhs = combo.density(&x, &t);
        let rhs = 2.5 * a.density(&x, &t) - 0.75 * b.density(&x, &t);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
