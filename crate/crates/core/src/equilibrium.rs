//! The equilibrium measure `ν = T ∧ τ` through the Cesàro average
//! `ν_n = (1/n) Σ_{j<n} d^{-n} (f^j)_*[L'] ∧ (f^{n−j})^*ω`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::{implicitize_image, intersect_curves, pullback_curve, HomPoly2, DEFAULT_BITS};
use crate::currents::{Refine, SampledCurrent, ScalarField};
use crate::endomorphism::ProjectiveMap;
use crate::error::{Error, Result};
use crate::green::DiscreteMeasure;
use crate::projective::{HomogeneousPoint, LinearSubspace};
use crate::rng::{fs_uniform_point, stream};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuMode {
    /// Quadrature nodes weighted by tangent stretch.
    Density,
    /// Intersection points of image curves with pulled-back random lines.
    Exact,
}

/// A finite-`n` approximation of `ν`, normalized to mass 1.
#[derive(Clone, Debug)]
pub struct NuApproximant {
    pub measure: DiscreteMeasure,
    pub n: usize,
    pub mode: NuMode,
    /// Mass before normalization.
    pub raw_mass: f64,
    pub map_hash: String,
    pub line: Vec<Vec<C64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NuSidecar {
    pub n: usize,
    pub mode: NuMode,
    pub raw_mass: f64,
    pub map_hash: String,
    pub line: Vec<Vec<[f64; 2]>>,
    pub atoms: usize,
    pub seed: Option<u64>,
}

impl NuApproximant {
    pub fn pair(&self, phi: &ScalarField) -> f64 {
        self.measure.pair(|x| phi.at(x))
    }

    pub fn sidecar(&self, seed: Option<u64>) -> NuSidecar {
        NuSidecar {
            n: self.n,
            mode: self.mode,
            raw_mass: self.raw_mass,
            map_hash: self.map_hash.clone(),
            line: self.line.iter().map(|v| v.iter().map(|c| [c.re, c.im]).collect()).collect(),
            atoms: self.measure.len(),
            seed,
        }
    }
}

/// Density-mode `ν_n`: every node of the refined `(f^n)_*[L']` quadrature,
/// traced back to its base point `x ∈ L'`, puts weight
/// `w · d^{-n} / n` on each of `x, f(x), …, f^{n−1}(x)`, where `w` already
/// carries the full stretch `|D f^n|²` of the cell.
pub fn nu_sample(f: &Arc<ProjectiveMap>, line: &LinearSubspace, n: usize, nodes: usize, refine: Refine) -> Result<NuApproximant> {
    let n_eff = n.max(1);
    let base = SampledCurrent::line_current(line, nodes)?;
    let pushed = if n == 0 { base } else { base.pushforward(f, n, refine)? };
    let sources = pushed
        .node_sources()
        .ok_or_else(|| Error::Config("pushforward lost its parametrization".into()))?;
    let scale = pushed.mass_scale() / n_eff as f64;
    let atoms: Vec<(HomogeneousPoint, f64)> = pushed
        .nodes()
        .par_iter()
        .zip(sources.par_iter())
        .flat_map_iter(|(node, (_, x))| {
            let w = node.weight * scale;
            let mut out = Vec::with_capacity(n_eff);
            let mut p = x.clone();
            for _ in 0..n_eff {
                let next = f.evaluate(&p);
                out.push((p, w));
                p = next;
            }
            out
        })
        .collect();
    let measure = DiscreteMeasure::new(atoms);
    let raw_mass = measure.total_mass();
    Ok(NuApproximant {
        measure: measure.normalized(),
        n,
        mode: NuMode::Density,
        raw_mass,
        map_hash: f.content_hash(),
        line: line.orthonormal_basis().to_vec(),
    })
}

/// Exact-mode `ν_n` for small `n`: `ω` is replaced by the Crofton average
/// over `lines` random lines `H`, and `(f^j)_*[L'] ∧ (f^{n−j})^*[H]` by the
/// intersection points of the implicitized curves with multiplicities.
pub fn nu_exact_small(f: &ProjectiveMap, line: &LinearSubspace, n: usize, lines: usize, seed: u64) -> Result<NuApproximant> {
    if f.k() != 2 || n == 0 || n > 4 {
        return Err(Error::Config("exact mode needs k = 2 and 1 ≤ n ≤ 4".into()));
    }
    let d = f.degree() as f64;
    let l_form = line.kernel_forms()[0].clone();
    let images: Vec<(HomPoly2, f64)> = (0..n)
        .map(|j| {
            if j == 0 {
                Ok((HomPoly2::linear([l_form[0], l_form[1], l_form[2]], DEFAULT_BITS), 1.0))
            } else {
                let c = implicitize_image(line, f, j, DEFAULT_BITS)?;
                Ok((c.poly, c.multiplicity as f64))
            }
        })
        .collect::<Result<_>>()?;
    let per_line: Vec<Vec<(HomogeneousPoint, f64)>> = (0..lines)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let a = fs_uniform_point(&mut rng, 2);
            let a = a.coords();
            let mut pulled = vec![HomPoly2::linear([a[0], a[1], a[2]], DEFAULT_BITS)];
            for _ in 0..n {
                let next = pullback_curve(f, pulled.last().expect("nonempty"))?;
                pulled.push(next);
            }
            let mut atoms = Vec::new();
            for (j, (curve, mult)) in images.iter().enumerate() {
                for (p, m) in intersect_curves(curve, &pulled[n - j])? {
                    atoms.push((p, mult * m as f64 * d.powi(-(n as i32)) / (n as f64 * lines as f64)));
                }
            }
            Ok(atoms)
        })
        .collect::<Result<_>>()?;
    let measure = DiscreteMeasure::new(per_line.into_iter().flatten().collect());
    let raw_mass = measure.total_mass();
    Ok(NuApproximant {
        measure: measure.normalized(),
        n,
        mode: NuMode::Exact,
        raw_mass,
        map_hash: f.content_hash(),
        line: line.orthonormal_basis().to_vec(),
    })
}

/// `max_φ |⟨ν, φ∘f⟩ − ⟨ν, φ⟩|`.
pub fn invariance_gap(nu: &NuApproximant, f: &ProjectiveMap, observables: &[ScalarField]) -> f64 {
    let pushed = nu.measure.push_forward(f);
    observables
        .iter()
        .map(|phi| (pushed.pair(|x| phi.at(x)) - nu.measure.pair(|x| phi.at(x))).abs())
        .fold(0.0, f64::max)
}

/// `C_n = ⟨ν, φ·(ψ∘f^n)⟩ − ⟨ν,φ⟩⟨ν,ψ⟩` for each `n` in `ns`.
pub fn mixing_correlation(nu: &NuApproximant, f: &ProjectiveMap, phi: &ScalarField, psi: &ScalarField, ns: &[usize]) -> Vec<f64> {
    let mean_phi = nu.pair(phi);
    let mean_psi = nu.pair(psi);
    let n_max = ns.iter().copied().max().unwrap_or(0);
    // Per atom: w·φ(x) and ψ(f^m x) for m ≤ n_max.
    let rows: Vec<(f64, Vec<f64>)> = nu
        .measure
        .atoms
        .par_iter()
        .map(|(x, w)| {
            let mut vals = Vec::with_capacity(n_max + 1);
            let mut p = x.clone();
            for m in 0..=n_max {
                vals.push(psi.at(&p));
                if m < n_max {
                    p = f.evaluate(&p);
                }
            }
            (w * phi.at(x), vals)
        })
        .collect();
    ns.iter()
        .map(|&n| rows.iter().map(|(a, v)| a * v[n]).sum::<f64>() - mean_phi * mean_psi)
        .collect()
}

/// Whether `|C_n|` stays below its running maximum from the start by a
/// shrinking envelope: the max over the second half is below the max over the
/// first half.
pub fn envelope_decreasing(c: &[f64]) -> bool {
    if c.len() < 2 {
        return true;
    }
    let h = c.len() / 2;
    let first = c[..h].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let second = c[h..].iter().map(|x| x.abs()).fold(0.0, f64::max);
    second <= first
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::random_line_near;

    fn start_line() -> LinearSubspace {
        let mut rng = stream(5, 0);
        random_line_near(&LinearSubspace::coordinate_hyperplane(2, 2), 0.05, &mut rng).unwrap()
    }

    #[test]
    fn cesaro_mass_is_one() {
        let f = Arc::new(ProjectiveMap::perturbed_power_map(0.05));
        let nu = nu_sample(&f, &start_line(), 4, 2048, Refine::gap(0.05)).unwrap();
        assert!((nu.raw_mass - 1.0).abs() < 0.05, "{}", nu.raw_mass);
        assert!((nu.measure.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_observables_are_trivial() {
        let f = Arc::new(ProjectiveMap::perturbed_power_map(0.05));
        let nu = nu_sample(&f, &start_line(), 3, 1024, Refine::gap(0.1)).unwrap();
        assert!(invariance_gap(&nu, &f, &[ScalarField::Constant(2.0)]) < 1e-12);
        let phi = ScalarField::HyperplaneDistSq(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let c = mixing_correlation(&nu, &f, &phi, &ScalarField::Constant(1.0), &[1, 2, 3]);
        assert!(c.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn zero_steps_is_uniform_on_the_line() {
        let f = Arc::new(ProjectiveMap::perturbed_power_map(0.05));
        let l = start_line();
        let nu = nu_sample(&f, &l, 0, 800, Refine::Off).unwrap();
        assert!(nu.measure.atoms.iter().all(|(p, _)| l.contains(p, 1e-10)));
        let w0 = nu.measure.atoms[0].1;
        assert!(nu.measure.atoms.iter().all(|(_, w)| (w - w0).abs() < 1e-12));
    }

    #[test]
    fn exact_mode_counts_match_bezout() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let nu = nu_exact_small(&f, &start_line(), 2, 2, 3).unwrap();
        assert!((nu.raw_mass - 1.0).abs() < 1e-9, "{}", nu.raw_mass);
    }
}
