//! Seeded random streams.
//!
//! Every parallel job draws from its own ChaCha stream keyed by
//! `(seed, stream)`, so results never depend on scheduling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::projective::HomogeneousPoint;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
}

/// A point distributed according to the normalized Fubini–Study volume.
pub fn fs_uniform_point<R: Rng + ?Sized>(rng: &mut R, k: usize) -> HomogeneousPoint {
    loop {
        let coords: Vec<Complex64> = (0..=k).map(|_| complex_normal(rng)).collect();
        if let Ok(p) = HomogeneousPoint::new(coords) {
            return p;
        }
    }
}

/// Uniform complex number in the disc of the given radius.
pub fn disc_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>())
}
