//! Attracting sets, attracting currents and the experiments built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::checks::{check_star_shaped, sample_region, StarShapeReport};
use super::region::{RegionKind, TrappingRegion};
use crate::algebraic::{implicitize_image, DEFAULT_BITS};
use crate::currents::{random_line_near, Refine, SampledCurrent, ScalarField, TestForm};
use crate::endomorphism::{ProjectiveMap, SolverOptions};
use crate::error::{Error, Result};
use crate::green::canonical_potential_of_curve;
use crate::projective::{fs_distance, CenterProjection, HomogeneousPoint, LinearSubspace};
use crate::rng::{fs_uniform_point, stream};

type C64 = Complex64;

/// Images under `f^n` of `grid_size` samples of `U`.
pub fn attracting_set(f: &ProjectiveMap, region: &TrappingRegion, n: usize, grid_size: usize, seed: u64) -> Vec<HomogeneousPoint> {
    sample_region(region, grid_size, seed).par_iter().map(|x| f.iterate(x, n)).collect()
}

/// Largest distance from a point of `a` to the nearest point of `b`.
pub fn one_sided_hausdorff(a: &[HomogeneousPoint], b: &[HomogeneousPoint]) -> f64 {
    a.par_iter()
        .map(|x| b.iter().map(|y| fs_distance(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// Pairings of successive pushforwards against a fixed set of forms.
#[derive(Clone, Debug)]
pub struct ConvergenceDiagnostic {
    pub form_names: Vec<String>,
    pub test_forms: Vec<TestForm>,
    /// `pairings[n][j] = ⟨τ_n, Φ_j⟩` for `n = 0..=n_max`.
    pub pairings: Vec<Vec<f64>>,
    /// `max_j |⟨τ_n,Φ_j⟩ − ⟨τ_{n−1},Φ_j⟩|` for `n ≥ 1`.
    pub cauchy_gaps: Vec<f64>,
    /// Last pairings, once three consecutive gaps are below `tolerance`.
    pub limit_estimates: Option<Vec<f64>>,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

impl ConvergenceDiagnostic {
    pub fn new(forms: Vec<(String, TestForm)>, tolerance: f64) -> Self {
        let (form_names, test_forms) = forms.into_iter().unzip();
        Self {
            form_names,
            test_forms,
            pairings: Vec::new(),
            cauchy_gaps: Vec::new(),
            limit_estimates: None,
            tolerance,
            warnings: Vec::new(),
        }
    }

    /// Ψ strictly `dd^c`-positive near `L`, two cutoffs along `L` and a pulled-back `ω`.
    pub fn standard(projection: &CenterProjection, tolerance: f64) -> Self {
        let k = projection.center().k();
        let l_form = projection.target().kernel_forms()[0].clone();
        let base = projection.target().orthonormal_basis();
        let at = |v: &[C64]| HomogeneousPoint::new(v.to_vec()).expect("nonzero");
        let mix: Vec<C64> = base[0].iter().zip(&base[1]).map(|(a, b)| a + b * C64::new(0.6, 0.3)).collect();
        let a = DMatrix::from_fn(k + 1, k + 1, |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.15 * (i as f64 - j as f64), 0.1)
            }
        });
        Self::new(
            vec![
                ("psi".into(), TestForm::strictly_positive_near(l_form)),
                ("cutoff_a".into(), TestForm::CutoffOmega(ScalarField::Gaussian { center: at(&base[0]), width: 0.7 })),
                ("cutoff_b".into(), TestForm::CutoffOmega(ScalarField::Gaussian { center: at(&mix), width: 0.5 })),
                ("pulled".into(), TestForm::PulledOmega(a)),
            ],
            tolerance,
        )
    }

    pub fn record(&mut self, s: &SampledCurrent) {
        let row: Vec<f64> = self.test_forms.iter().map(|f| s.pair(f)).collect();
        if let Some(prev) = self.pairings.last() {
            self.cauchy_gaps.push(row.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        self.pairings.push(row);
        let g = &self.cauchy_gaps;
        if g.len() >= 3 && g[g.len() - 3..].iter().all(|&x| x < self.tolerance) {
            self.limit_estimates = self.pairings.last().cloned();
        } else {
            self.limit_estimates = None;
        }
    }
}

/// Knobs for [`attracting_current`].
#[derive(Clone, Copy, Debug)]
pub struct CurrentOptions {
    pub nodes: usize,
    pub refine: Refine,
}

impl Default for CurrentOptions {
    fn default() -> Self {
        Self { nodes: 4096, refine: Refine::gap(0.05) }
    }
}

/// `τ_n = d^{-n} (f^n)_*[L']` for `n ≤ n_max`, with pairings recorded in `diag`.
pub fn attracting_current(
    f: &Arc<ProjectiveMap>,
    region: &TrappingRegion,
    line: &LinearSubspace,
    n_max: usize,
    diag: &mut ConvergenceDiagnostic,
    opts: CurrentOptions,
) -> Result<SampledCurrent> {
    let mut s = SampledCurrent::line_current(line, opts.nodes)?;
    if s.nodes().iter().any(|n| !region.contains(&n.point)) {
        return Err(Error::Region("starting line is not contained in U".into()));
    }
    if region.validated_margin.is_none() {
        diag.warnings.push("trapping not validated for this region".into());
    }
    diag.record(&s);
    for _ in 0..n_max {
        s = s.pushforward(f, 1, opts.refine)?;
        diag.record(&s);
    }
    let g = &diag.cauchy_gaps;
    if g.len() >= 3 {
        let last = g[g.len() - 1];
        if last > 10.0 * diag.tolerance && last >= g[g.len() - 2] && g[g.len() - 2] >= g[g.len() - 3] {
            return Err(Error::NonConvergence(format!("Cauchy gaps {g:?}")));
        }
    }
    Ok(s)
}

/// Result of the run on the power map with the hyperplane-neighbourhood region.
#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub star_shape: Vec<StarShapeReport>,
    /// `(axis, pairings of τ_n)` for each starting line.
    pub runs: Vec<(usize, Vec<f64>)>,
    /// Pairings of `[z_axis = 0]` itself.
    pub references: Vec<Vec<f64>>,
    pub within_cluster_gap: f64,
    pub between_cluster_gap: f64,
    pub control_spread: f64,
}

impl CounterexampleReport {
    pub fn separated(&self) -> bool {
        self.between_cluster_gap >= 10.0 * self.within_cluster_gap
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Power map of degree `d` on `P²` with `U` the neighbourhood of the three
/// coordinate lines: three starting lines near each line give three limits.
pub fn counterexample_run(d: u32, lines_per_axis: usize, n: usize, nodes: usize, seed: u64) -> Result<CounterexampleReport> {
    let f = Arc::new(ProjectiveMap::power_map(2, d));
    let star_shape = (0..3)
        .map(|axis| {
            let r = TrappingRegion::new(RegionKind::CoordinateHyperplanes, CenterProjection::coordinate(2, axis));
            check_star_shaped(&r, 8, 32, seed)
        })
        .collect();
    let region = TrappingRegion::new(RegionKind::CoordinateHyperplanes, CenterProjection::coordinate(2, 2));
    let forms: Vec<(String, TestForm)> = (0..3)
        .map(|i| {
            let mut e = vec![C64::new(0.0, 0.0); 3];
            e[i] = C64::new(1.0, 0.0);
            (format!("near_z{i}"), TestForm::CutoffOmega(ScalarField::HyperplaneGaussian { form: e, width: 0.3 }))
        })
        .collect();
    let opts = CurrentOptions { nodes, refine: Refine::gap(0.05) };
    let mut runs = Vec::new();
    let mut references = Vec::new();
    for axis in 0..3 {
        let l = LinearSubspace::coordinate_hyperplane(2, axis);
        let mut diag = ConvergenceDiagnostic::new(forms.clone(), 1e-3);
        let reference = SampledCurrent::line_current(&l, nodes)?;
        diag.record(&reference);
        references.push(diag.pairings[0].clone());
        let mut rng = stream(seed, axis as u64);
        for _ in 0..lines_per_axis {
            let start = random_line_near(&l, 0.05, &mut rng)?;
            let mut diag = ConvergenceDiagnostic::new(forms.clone(), 1e-3);
            attracting_current(&f, &region, &start, n, &mut diag, opts)?;
            runs.push((axis, diag.pairings.last().cloned().unwrap_or_default()));
        }
    }
    let mut within = 0.0f64;
    let mut between = f64::INFINITY;
    for (i, (ai, pi)) in runs.iter().enumerate() {
        for (aj, pj) in &runs[i + 1..] {
            let g = max_gap(pi, pj);
            if ai == aj {
                within = within.max(g);
            } else {
                between = between.min(g);
            }
        }
    }
    // Control: a star-shaped cone around one line gives a single limit.
    let cone = TrappingRegion::fiber_cone(2, 2, 0.2);
    let mut control: Vec<Vec<f64>> = Vec::new();
    let mut rng = stream(seed, 99);
    for _ in 0..lines_per_axis.max(2) {
        let start = random_line_near(&LinearSubspace::coordinate_hyperplane(2, 2), 0.05, &mut rng)?;
        let mut diag = ConvergenceDiagnostic::new(forms.clone(), 1e-3);
        attracting_current(&f, &cone, &start, n, &mut diag, opts)?;
        control.push(diag.pairings.last().cloned().unwrap_or_default());
    }
    let control_spread = control.iter().flat_map(|a| control.iter().map(move |b| max_gap(a, b))).fold(0.0, f64::max);
    Ok(CounterexampleReport {
        star_shape,
        runs,
        references,
        within_cluster_gap: within,
        between_cluster_gap: between,
        control_spread,
    })
}

/// Pointwise comparison of canonical potentials of two curve currents.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialReport {
    /// `max (g_S − g_τ)` over the global sample.
    pub max_excess: f64,
    /// `max |g_S − g_τ|` over the sample of `U`.
    pub max_abs_on_u: f64,
    pub value_at_center_s: f64,
    pub value_at_center_tau: f64,
    pub grid_points: usize,
    pub u_points: usize,
}

/// Canonical potentials (vanishing at `I`) of `d^{-n}(f^n)_*[L_s]` and
/// `d^{-n}(f^n)_*[L_τ]`, from their exact defining polynomials.
pub fn potential_comparison(
    f: &ProjectiveMap,
    region: &TrappingRegion,
    line_s: &LinearSubspace,
    line_tau: &LinearSubspace,
    n: usize,
    grid_points: usize,
    u_points: usize,
    seed: u64,
) -> Result<PotentialReport> {
    let center = HomogeneousPoint::new(region.projection.center().orthonormal_basis()[0].clone())?;
    let gs = canonical_potential_of_curve(&implicitize_image(line_s, f, n, DEFAULT_BITS)?.poly.to_hompoly(), &center)?;
    let gt = canonical_potential_of_curve(&implicitize_image(line_tau, f, n, DEFAULT_BITS)?.poly.to_hompoly(), &center)?;
    let max_excess = (0..grid_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = fs_uniform_point(&mut rng, region.k());
            let v = gs.value(&x) - gt.value(&x);
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let in_u = sample_region(region, u_points, seed ^ 0xabc);
    let max_abs_on_u = in_u
        .par_iter()
        .map(|x| (gs.value(x) - gt.value(x)).abs())
        .filter(|v| v.is_finite())
        .reduce(|| 0.0, f64::max);
    Ok(PotentialReport {
        max_excess,
        max_abs_on_u,
        value_at_center_s: gs.value(&center),
        value_at_center_tau: gt.value(&center),
        grid_points,
        u_points: in_u.len(),
    })
}

/// `E_a[#(f^{-n}(a) ∩ U) / d^n]` over FS-uniform `a`, for each `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreimageStatReport {
    pub n: Vec<usize>,
    pub mean_fraction: Vec<f64>,
    /// Whether every fiber had exactly `d^{kn}` points with multiplicity.
    pub fiber_sizes_exact: bool,
    pub samples: usize,
    /// `U = P^k`: the statistic is the trivial `d^{(k-1)n}`.
    pub vacuous: bool,
}

impl PreimageStatReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.mean_fraction.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn lebesgue_preimage_stat(
    f: &ProjectiveMap,
    region: &TrappingRegion,
    ns: &[usize],
    point_samples: usize,
    seed: u64,
) -> Result<PreimageStatReport> {
    let d = f.degree() as f64;
    let k = f.k();
    let opts = SolverOptions { seed, ..SolverOptions::default() };
    let rows: Vec<Vec<(f64, bool)>> = (0..point_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 0x9e + i as u64);
            let a = fs_uniform_point(&mut rng, k);
            ns.iter()
                .map(|&n| {
                    let pre = f.preimages(&a, n, &opts)?;
                    let total: u64 = pre.iter().map(|p| p.multiplicity as u64).sum();
                    let inside: u64 = pre.iter().filter(|p| region.contains(&p.point)).map(|p| p.multiplicity as u64).sum();
                    Ok((inside as f64 / d.powi(n as i32), total == (f.degree() as u64).pow((k * n) as u32)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mean_fraction = (0..ns.len())
        .map(|j| rows.iter().map(|r| r[j].0).sum::<f64>() / point_samples.max(1) as f64)
        .collect();
    Ok(PreimageStatReport {
        n: ns.to_vec(),
        mean_fraction,
        fiber_sizes_exact: rows.iter().all(|r| r.iter().all(|c| c.1)),
        samples: point_samples,
        vacuous: region.is_whole(),
    })
}

/// Computes each keyed run once and hands out the cached result afterwards.
pub struct RunRegistry<V: Clone> {
    cache: Mutex<HashMap<String, V>>,
}

impl<V: Clone> Default for RunRegistry<V> {
    fn default() -> Self {
        Self { cache: Mutex::new(HashMap::new()) }
    }
}

impl<V: Clone> RunRegistry<V> {
    /// Key from the map hash, region, line and seed of a run.
    pub fn key(map_hash: &str, region: &str, line: &str, seed: u64) -> String {
        format!("{map_hash}|{region}|{line}|{seed}")
    }

    pub fn get_or_compute<F: FnOnce() -> Result<V>>(&self, key: &str, compute: F) -> Result<V> {
        if let Some(v) = self.cache.lock().expect("registry lock").get(key) {
            return Ok(v.clone());
        }
        let v = compute()?;
        self.cache.lock().expect("registry lock").entry(key.to_string()).or_insert(v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
