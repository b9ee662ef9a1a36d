//! Entropy estimators: greedy `(n, ε)`-separated sets and the volume growth
//! of iterated graphs.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::endomorphism::{orthonormal_complement, ProjectiveMap};
use crate::error::{Error, Result};
use crate::projective::{fs_distance, herm, norm_sq, HomogeneousPoint};
use crate::rng::{fs_uniform_point, stream};

type C64 = Complex64;

/// Orbit segments `x, f(x), …, f^{n−1}(x)` of a cloud.
pub fn orbits(f: &ProjectiveMap, cloud: &[HomogeneousPoint], n: usize) -> Vec<Vec<HomogeneousPoint>> {
    cloud
        .par_iter()
        .map(|x| {
            let mut out = Vec::with_capacity(n.max(1));
            let mut p = x.clone();
            for j in 0..n.max(1) {
                if j > 0 {
                    p = f.evaluate(&p);
                }
                out.push(p.clone());
            }
            out
        })
        .collect()
}

/// `max_j d(f^j x, f^j y)` over the stored segments.
pub fn orbit_distance(a: &[HomogeneousPoint], b: &[HomogeneousPoint]) -> f64 {
    a.iter().zip(b).map(|(x, y)| fs_distance(x, y)).fold(0.0, f64::max)
}

/// Entries of `x x^* / |x|²` used as hash coordinates; each moves by at most
/// `√2 · d_FS` when the point moves.
fn embed(x: &HomogeneousPoint) -> [f64; 4] {
    let c = x.coords();
    let n = norm_sq(c);
    let m = c[0] * c.get(1).copied().unwrap_or_default().conj() / n;
    [c[0].norm_sqr() / n, c.get(1).map_or(0.0, |v| v.norm_sqr()) / n, m.re, m.im]
}

fn cell_of(e: &[f64; 4], size: f64) -> [i64; 4] {
    [0, 1, 2, 3].map(|i| (e[i] / size).floor() as i64)
}

/// Greedy maximal `(n, ε)`-separated subset of the cloud (indices, in scan order).
pub fn separated_set(f: &ProjectiveMap, cloud: &[HomogeneousPoint], n: usize, eps: f64) -> Vec<usize> {
    let segs = orbits(f, cloud, n);
    let size = std::f64::consts::SQRT_2 * eps;
    let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    for (i, seg) in segs.iter().enumerate() {
        let c = cell_of(&embed(&seg[0]), size);
        let mut clash = false;
        'outer: for dc in 0..81 {
            let mut key = c;
            let mut r = dc;
            for k in &mut key {
                *k += (r % 3) as i64 - 1;
                r /= 3;
            }
            if let Some(list) = grid.get(&key) {
                for &j in list {
                    if orbit_distance(seg, &segs[j]) <= eps {
                        clash = true;
                        break 'outer;
                    }
                }
            }
        }
        if !clash {
            grid.entry(c).or_default().push(i);
            kept.push(i);
        }
    }
    kept
}

pub fn separated_count(f: &ProjectiveMap, cloud: &[HomogeneousPoint], n: usize, eps: f64) -> usize {
    separated_set(f, cloud, n, eps).len()
}

/// Counts for one `ε` over a range of `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationRun {
    pub eps: f64,
    pub counts: Vec<(usize, usize)>,
    pub cloud_size: usize,
}

impl SeparationRun {
    pub fn new(f: &ProjectiveMap, cloud: &[HomogeneousPoint], ns: &[usize], eps: f64) -> Self {
        Self { eps, counts: ns.iter().map(|&n| (n, separated_count(f, cloud, n, eps))).collect(), cloud_size: cloud.len() }
    }

    /// Like [`SeparationRun::new`] but stops after the first count above
    /// `cap · cloud_size`; later counts only measure the cloud, not the map.
    pub fn until_saturated(f: &ProjectiveMap, cloud: &[HomogeneousPoint], ns: &[usize], eps: f64, cap: f64) -> Self {
        let mut counts = Vec::new();
        for &n in ns {
            let c = separated_count(f, cloud, n, eps);
            counts.push((n, c));
            if c as f64 > cap * cloud.len() as f64 {
                break;
            }
        }
        Self { eps, counts, cloud_size: cloud.len() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,eps,count")?;
        for (n, c) in &self.counts {
            writeln!(w, "{n},{},{c}", self.eps)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log count` against `n`.
pub fn entropy_estimate(run: &SeparationRun) -> Result<f64> {
    if run.counts.len() < 4 || run.counts.iter().any(|&(_, c)| c == 0) {
        return Err(Error::DegenerateFit(format!("need ≥ 4 positive counts, got {:?}", run.counts)));
    }
    let xs: Vec<f64> = run.counts.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = run.counts.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all n equal".into()));
    }
    Ok(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

/// Slope fitted only over counts at most `cap · cloud_size`.
pub fn unsaturated_estimate(run: &SeparationRun, cap: f64) -> Result<f64> {
    let limit = cap * run.cloud_size as f64;
    let kept = SeparationRun {
        eps: run.eps,
        counts: run.counts.iter().copied().filter(|&(_, c)| c as f64 <= limit).collect(),
        cloud_size: run.cloud_size,
    };
    entropy_estimate(&kept)
}

/// All `d^{kn}` preimages of one random point: an equidistributed sample of
/// the equilibrium measure that costs one solve per tree node.
pub fn preimage_tree_cloud(f: &ProjectiveMap, n: usize, seed: u64) -> Result<Vec<HomogeneousPoint>> {
    let mut rng = stream(seed, 0);
    let a = fs_uniform_point(&mut rng, f.k());
    let opts = crate::endomorphism::SolverOptions { seed, ..Default::default() };
    Ok(f.preimages(&a, n, &opts)?.into_iter().map(|p| p.point).collect())
}

/// `H = Σ_{i<n} (D f^i)^*(D f^i)` at `x` in FS-orthonormal frames (k = 2).
fn form_sum(f: &ProjectiveMap, x: &HomogeneousPoint, n: usize) -> Matrix2<C64> {
    let frame: Vec<Vec<C64>> = orthonormal_complement(x.coords())
        .into_iter()
        .map(|v| crate::endomorphism::tangent_unit(x.coords(), &v))
        .collect();
    let mut h = Matrix2::<C64>::zeros();
    let mut p = x.clone();
    let mut vs = frame.clone();
    let mut scale = [1.0f64; 2];
    for i in 0..n.max(1) {
        let ny = norm_sq(p.coords());
        let u: Vec<Vec<C64>> = vs.iter().zip(&scale).map(|(v, s)| v.iter().map(|c| c * *s).collect()).collect();
        for a in 0..2 {
            for b in 0..2 {
                h[(a, b)] += herm(&u[b], &u[a]) / ny;
            }
        }
        if i + 1 == n.max(1) {
            break;
        }
        let imgs: Vec<_> = vs.iter().map(|v| f.tangent_pushforward(&p, v, 1)).collect();
        for (k, img) in imgs.iter().enumerate() {
            scale[k] *= img.stretch();
            vs[k] = img.tangent.clone();
        }
        p = imgs[0].point.clone();
    }
    h
}

/// Monte-Carlo estimate of `∫_W det(Σ_{i<n} (f^i)^*ω) / ω²`, i.e. the volume
/// of the graph of `(id, f, …, f^{n−1})` over `W` with `P²` of volume 1.
pub fn graph_volume<F: Fn(&HomogeneousPoint) -> bool + Sync>(
    f: &ProjectiveMap,
    in_w: F,
    n: usize,
    mc_points: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if f.k() != 2 {
        return Err(Error::Config("graph volume is implemented for k = 2".into()));
    }
    let vals: Vec<f64> = (0..mc_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = fs_uniform_point(&mut rng, 2);
            if !in_w(&x) {
                return 0.0;
            }
            let h = form_sum(f, &x, n);
            let det = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).re;
            if det.is_finite() {
                det.max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let m = mc_points.max(1) as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(VolumeEstimate { n, volume: mean, std_error: (var / m).sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub n: usize,
    pub volume: f64,
    pub std_error: f64,
}

/// Slope of `log V_n` (optionally minus `k log n`) against `n`.
pub fn volume_growth_rate(series: &[VolumeEstimate], remove_polynomial: bool) -> Result<f64> {
    if series.len() < 2 || series.iter().any(|v| !(v.volume > 0.0)) {
        return Err(Error::DegenerateFit("volume series must be positive".into()));
    }
    let xs: Vec<f64> = series.iter().map(|v| v.n as f64).collect();
    let ys: Vec<f64> = series
        .iter()
        .map(|v| v.volume.ln() - if remove_polynomial { 2.0 * (v.n as f64).ln() } else { 0.0 })
        .collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    Ok(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>())
}

pub fn write_volume_csv<W: Write>(series: &[VolumeEstimate], mut w: W) -> Result<()> {
    writeln!(w, "n,volume,std_error")?;
    for v in series {
        writeln!(w, "{},{:.17e},{:.17e}", v.n, v.volume, v.std_error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::HomPoly;

    fn identity_map() -> ProjectiveMap {
        ProjectiveMap::new(2, 1, (0..3).map(|i| HomPoly::power(3, i, 1)).collect()).unwrap()
    }

    fn cloud(n: usize, seed: u64) -> Vec<HomogeneousPoint> {
        let mut rng = stream(seed, 0);
        (0..n).map(|_| fs_uniform_point(&mut rng, 2)).collect()
    }

    #[test]
    fn huge_epsilon_gives_one_point() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        assert_eq!(separated_count(&f, &cloud(200, 1), 1, 2.0), 1);
    }

    #[test]
    fn identity_count_is_constant_in_n() {
        let f = identity_map();
        let c = cloud(500, 2);
        let a = separated_count(&f, &c, 1, 0.3);
        assert_eq!(a, separated_count(&f, &c, 5, 0.3));
    }

    #[test]
    fn greedy_set_is_separated_and_maximal() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let c = cloud(400, 3);
        let (n, eps) = (3, 0.4);
        let kept = separated_set(&f, &c, n, eps);
        let segs = orbits(&f, &c, n);
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                assert!(orbit_distance(&segs[i], &segs[j]) > eps);
            }
        }
        for i in 0..c.len() {
            assert!(kept.contains(&i) || kept.iter().any(|&j| orbit_distance(&segs[i], &segs[j]) <= eps));
        }
    }

    #[test]
    fn single_point_cloud_has_zero_entropy() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let run = SeparationRun::new(&f, &cloud(1, 4), &[1, 2, 3, 4], 0.05);
        assert_eq!(entropy_estimate(&run).unwrap(), 0.0);
    }

    #[test]
    fn saturation_cap_drops_late_counts() {
        let run = SeparationRun { eps: 0.1, counts: vec![(1, 10), (2, 40), (3, 160), (4, 640), (5, 1000)], cloud_size: 1000 };
        assert!((unsaturated_estimate(&run, 0.9).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(entropy_estimate(&run).unwrap() < 4f64.ln());
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let c = cloud(300, 6);
        let capped = SeparationRun::until_saturated(&f, &c, &[1, 2, 3, 4, 5, 6], 0.3, 0.2);
        let last = capped.counts.last().unwrap().1;
        assert!(capped.counts.len() == 6 || last as f64 > 60.0);
    }

    #[test]
    fn one_step_graph_volume_is_region_volume() {
        let f = ProjectiveMap::perturbed_power_map(0.05);
        let v = graph_volume(&f, |x| x.coords()[2].norm() < 0.5, 1, 4000, 5).unwrap();
        let frac = (0..4000)
            .filter(|&i| {
                let mut r = stream(5, i as u64);
                fs_uniform_point(&mut r, 2).coords()[2].norm() < 0.5
            })
            .count() as f64
            / 4000.0;
        assert!((v.volume - frac).abs() < 1e-12, "{} vs {frac}", v.volume);
        let v3 = graph_volume(&f, |x| x.coords()[2].norm() < 0.5, 3, 4000, 5).unwrap();
        assert!(v3.volume > v.volume);
    }
}
