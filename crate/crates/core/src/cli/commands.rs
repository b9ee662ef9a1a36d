use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde_json::{json, Value};

use super::artifacts::{num, sha256_hex, Artifacts, RunManifest, Table};
use super::{CommonArgs, Command, NuModeArg};
use crate::attractor::{
    attracting_current, check_star_shaped, check_trapping, counterexample_run, jacobian_contraction,
    lebesgue_preimage_stat, potential_comparison, sample_region, ConvergenceDiagnostic, CurrentOptions, RegionFile,
    TrappingRegion,
};
use crate::currents::{random_line_near, Refine, ScalarField};
use crate::endomorphism::ProjectiveMap;
use crate::entropy::{
    entropy_estimate, graph_volume, preimage_tree_cloud, unsaturated_estimate, volume_growth_rate, SeparationRun,
};
use crate::equilibrium::{envelope_decreasing, mixing_correlation, nu_exact_small, nu_sample, NuApproximant};
use crate::error::{Error, Result};
use crate::green::{mu_sample, GreenField};
use crate::projective::{HomogeneousPoint, LinearSubspace};
use crate::rng::{fs_uniform_point, stream};

type C64 = Complex64;

/// Resolved inputs shared by all commands.
struct Run<'a> {
    common: &'a CommonArgs,
    name: &'static str,
    config: BTreeMap<String, Value>,
    inputs: BTreeMap<String, String>,
    summary: BTreeMap<String, Value>,
    out: Artifacts,
}

impl<'a> Run<'a> {
    fn new(common: &'a CommonArgs, name: &'static str) -> Result<Self> {
        let mut config = BTreeMap::new();
        config.insert("seed".into(), json!(common.seed));
        Ok(Self { common, name, config, inputs: BTreeMap::new(), summary: BTreeMap::new(), out: Artifacts::create(&common.out)? })
    }

    fn set(&mut self, key: &str, v: Value) {
        self.config.insert(key.into(), v);
    }

    fn note(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    fn n(&mut self, default: usize) -> usize {
        let n = self.common.n.unwrap_or(default);
        self.set("n", json!(n));
        n
    }

    fn nodes(&mut self, default: usize) -> usize {
        let v = self.common.nodes.unwrap_or(default);
        self.set("nodes", json!(v));
        v
    }

    fn tol(&mut self, default: f64) -> f64 {
        let v = self.common.tol.unwrap_or(default);
        self.set("tol", json!(v));
        v
    }

    fn map(&mut self) -> Result<ProjectiveMap> {
        let f = match &self.common.map {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                self.set("map", json!(path.display().to_string()));
                ProjectiveMap::parse(&text)?
            }
            None => {
                self.set("map", json!("builtin:perturbed_power_map(0.05)"));
                ProjectiveMap::perturbed_power_map(0.05)
            }
        };
        self.inputs.insert("map_sha256".into(), f.content_hash());
        Ok(f)
    }

    fn region(&mut self, k: usize) -> Result<TrappingRegion> {
        let region = match &self.common.region {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                RegionFile::parse(&text)?.build()?
            }
            None => TrappingRegion::fiber_cone(k, k, 0.2),
        };
        if region.k() != k {
            return Err(Error::DimensionMismatch { expected: k, got: region.k() });
        }
        let toml = region.to_file().to_toml();
        self.inputs.insert("region_sha256".into(), sha256_hex(toml.as_bytes()));
        self.set("region", json!(toml));
        Ok(region)
    }

    fn finish(self) -> Result<RunManifest> {
        self.out.finish(self.name, self.config, self.inputs, self.summary)
    }
}

pub(super) fn dispatch(common: &CommonArgs, command: &Command) -> Result<RunManifest> {
    match command {
        Command::ValidateMap => validate_map(common),
        Command::CheckRegion => check_region(common),
        Command::Green => green(common),
        Command::Mu => mu(common),
        Command::Tau { gap } => tau(common, *gap),
        Command::Nu { mode, gap, lines } => nu(common, *mode, *gap, *lines),
        Command::Entropy { eps, global_eps, tree_depth } => entropy(common, eps, global_eps, *tree_depth),
        Command::Mixing { lags, gap } => mixing(common, *lags, *gap),
        Command::Counterexample { d, lines_per_axis } => counterexample(common, *d, *lines_per_axis),
        Command::Potentials { u_points } => potentials(common, *u_points),
        Command::PreimageStat => preimage_stat(common),
        Command::Report => report(common),
    }
}

fn coords_row(p: &HomogeneousPoint) -> Vec<String> {
    p.coords().iter().flat_map(|c| [num(c.re), num(c.im)]).collect()
}

fn coord_header(k1: usize) -> Vec<String> {
    (0..k1).flat_map(|i| [format!("z{i}_re"), format!("z{i}_im")]).collect()
}

fn key_value(rows: &[(&str, String)]) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t
}

/// Random starting line near `L` that lies in `U`, drawn from `stream(seed, 0)`.
fn start_line(region: &TrappingRegion, seed: u64, index: u64) -> Result<LinearSubspace> {
    let mut rng = stream(seed, index);
    random_line_near(region.projection.target(), 0.05, &mut rng)
}

fn validate_map(common: &CommonArgs) -> Result<RunManifest> {
    let mut run = Run::new(common, "validate-map")?;
    let f = run.map()?;
    let trials = run.nodes(2000);
    let r = f.validate(trials, common.seed)?;
    let witness = r.witness.coords().iter().map(|c| format!("{}{:+}i", num(c.re), num(c.im))).collect::<Vec<_>>().join(" ");
    let table = key_value(&[
        ("k", f.k().to_string()),
        ("degree", f.degree().to_string()),
        ("trials", r.trials.to_string()),
        ("min_ratio", num(r.min_ratio)),
        ("macaulay_min_pivot", r.macaulay_pivot.map_or("none".into(), num)),
        ("witness", witness),
    ]);
    run.out.write_table("validate-map.csv", &table)?;
    run.note("min_ratio", json!(r.min_ratio));
    run.finish()
}

fn check_region(common: &CommonArgs) -> Result<RunManifest> {
    let mut run = Run::new(common, "check-region")?;
    let f = run.map()?;
    let region = run.region(f.k())?;
    let samples = run.nodes(2000);
    let mut table = Table::new(&["check", "passed", "value", "detail"]);
    let trapping = check_trapping(&f, &region, samples, common.seed);
    match &trapping {
        Ok(r) => table.push(vec![
            "trapping".into(),
            "true".into(),
            num(r.margin),
            format!("interior={} boundary={} complement={}", r.interior_samples, r.boundary_samples, r.complement_samples),
        ]),
        Err(e) => table.push(vec!["trapping".into(), "false".into(), "nan".into(), e.to_string()]),
    }
    let star = check_star_shaped(&region, 8, 32, common.seed);
    let star_detail = star.violations.first().map_or(String::new(), |v| {
        format!("base={:?} angle={} t={}", v.base, num(v.direction_angle), num(v.t))
    });
    table.push(vec!["star_shaped".into(), star.passed().to_string(), star.violations.len().to_string(), star_detail]);
    let jac = jacobian_contraction(&f, &region, samples, common.seed);
    table.push(vec![
        "jacobian_below_one".into(),
        jac.contracting.to_string(),
        num(jac.max_jacobian),
        format!("transverse={} tangential={}", num(jac.max_transverse_stretch), num(jac.max_tangential_stretch)),
    ]);
    run.out.write_table("check-region.csv", &table)?;
    run.note("star_shaped", json!(star.passed()));
    run.note("trapping", json!(trapping.is_ok()));
    let manifest = run.finish()?;
    trapping?;
    star.into_result()?;
    Ok(manifest)
}

fn green(common: &CommonArgs) -> Result<RunManifest> {
    let mut run = Run::new(common, "green")?;
    let f = run.map()?;
    let depth = run.n(20);
    let count = run.nodes(1000);
    let k1 = f.k() + 1;
    let field = GreenField::new(f, depth, 2000, common.seed);
    let mut rng = stream(common.seed, 1);
    let pts: Vec<HomogeneousPoint> = (0..count).map(|_| fs_uniform_point(&mut rng, k1 - 1)).collect();
    let mut header = vec!["i".to_string()];
    header.extend(coord_header(k1));
    header.extend(["g".to_string(), "bound".to_string()]);
    let mut table = Table { header, rows: Vec::new() };
    let mut fig = Vec::with_capacity(count);
    for (i, p) in pts.iter().enumerate() {
        let (g, bound) = field.value(p);
        let mut row = vec![i.to_string()];
        row.extend(coords_row(p));
        row.extend([num(g), num(bound)]);
        table.push(row);
        fig.push((p.clone(), g));
    }
    run.out.write_table("green.csv", &table)?;
    run.out.write_figure("fig_green", &fig)?;
    run.note("error_bound", json!(field.error_bound()));
    run.finish()
}

fn mu(common: &CommonArgs) -> Result<RunManifest> {
    let mut run = Run::new(common, "mu")?;
    let f = run.map()?;
    let n = run.n(8);
    let count = run.nodes(2000);
    let m = mu_sample(&f, n, count, common.seed)?;
    run.out.write_bytes("mu.csv", m.to_csv().as_bytes())?;
    run.out.write_figure("fig_mu", &m.atoms)?;
    run.note("atoms", json!(m.len()));
    run.finish()
}

/// The starting line must lie in a region that passed the trapping check.
fn validated_region(run: &mut Run, f: &ProjectiveMap) -> Result<TrappingRegion> {
    let mut region = run.region(f.k())?;
    let report = region.validate(f, 2000, run.common.seed)?;
    run.note("trapping_margin", json!(report.margin));
    Ok(region)
}

fn tau(common: &CommonArgs, gap: f64) -> Result<RunManifest> {
    let mut run = Run::new(common, "tau")?;
    let f = Arc::new(run.map()?);
    let region = validated_region(&mut run, &f)?;
    let n = run.n(8);
    let nodes = run.nodes(4096);
    let tol = run.tol(1e-3);
    run.set("gap", json!(gap));
    let line = start_line(&region, common.seed, 0)?;
    let mut diag = ConvergenceDiagnostic::standard(&region.projection, tol);
    let s = attracting_current(&f, &region, &line, n, &mut diag, CurrentOptions { nodes, refine: Refine::gap(gap) })?;
    let mut header = vec!["n".to_string()];
    header.extend(diag.form_names.iter().cloned());
    header.push("cauchy_gap".into());
    let mut table = Table { header, rows: Vec::new() };
    for (i, p) in diag.pairings.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|v| num(*v)));
        row.push(if i == 0 { String::new() } else { num(diag.cauchy_gaps[i - 1]) });
        table.push(row);
    }
    run.out.write_table("tau_pairings.csv", &table)?;
    s.save(&run.out.path("tau_nodes"), Some(f.content_hash()), Some(common.seed))?;
    run.out.adopt("tau_nodes.csv")?;
    run.out.adopt("tau_nodes.json")?;
    let fig: Vec<(HomogeneousPoint, f64)> = s.nodes().iter().map(|nd| (nd.point.clone(), nd.weight)).collect();
    run.out.write_figure("fig_tau", &fig)?;
    run.note("mass", json!(s.mass()));
    run.note("nodes", json!(s.len()));
    run.note("warnings", json!(diag.warnings));
    run.note("converged", json!(diag.limit_estimates.is_some()));
    run.finish()
}

fn write_nu(run: &mut Run, nu: &NuApproximant) -> Result<()> {
    run.out.write_bytes("nu.csv", nu.measure.to_csv().as_bytes())?;
    let side = serde_json::to_string_pretty(&nu.sidecar(Some(run.common.seed))).map_err(|e| Error::Io(e.to_string()))?;
    run.out.write_bytes("nu.json", side.as_bytes())?;
    run.out.write_figure("fig_nu", &nu.measure.atoms)?;
    run.note("raw_mass", json!(nu.raw_mass));
    run.note("atoms", json!(nu.measure.len()));
    Ok(())
}

fn nu(common: &CommonArgs, mode: NuModeArg, gap: f64, lines: usize) -> Result<RunManifest> {
    let mut run = Run::new(common, "nu")?;
    let f = Arc::new(run.map()?);
    let region = validated_region(&mut run, &f)?;
    let line = start_line(&region, common.seed, 0)?;
    let approx = match mode {
        NuModeArg::Density => {
            let n = run.n(8);
            let nodes = run.nodes(4096);
            run.set("mode", json!("density"));
            run.set("gap", json!(gap));
            nu_sample(&f, &line, n, nodes, Refine::gap(gap))?
        }
        NuModeArg::Exact => {
            let n = run.n(3);
            run.set("mode", json!("exact"));
            run.set("lines", json!(lines));
            nu_exact_small(&f, &line, n, lines, common.seed)?
        }
    };
    write_nu(&mut run, &approx)?;
    run.finish()
}

fn entropy(common: &CommonArgs, eps: &[f64], global_eps: &[f64], tree_depth: usize) -> Result<RunManifest> {
    let mut run = Run::new(common, "entropy")?;
    let f = run.map()?;
    let region = validated_region(&mut run, &f)?;
    let n = run.n(8);
    let count = run.nodes(5000);
    run.set("eps", json!(eps));
    run.set("global_eps", json!(global_eps));
    run.set("tree_depth", json!(tree_depth));
    let ns: Vec<usize> = (1..=n).collect();
    let mut counts = Table::new(&["cloud", "eps", "n", "count"]);
    let mut estimates = Table::new(&["cloud", "eps", "estimate"]);
    let cloud = sample_region(&region, count, common.seed);
    let mut u_max = f64::NEG_INFINITY;
    for &e in eps {
        let sep = SeparationRun::new(&f, &cloud, &ns, e);
        for (m, c) in &sep.counts {
            counts.push(vec!["U".into(), num(e), m.to_string(), c.to_string()]);
        }
        let est = entropy_estimate(&sep)?;
        u_max = u_max.max(est);
        estimates.push(vec!["U".into(), num(e), num(est)]);
    }
    let tree = preimage_tree_cloud(&f, tree_depth, common.seed)?;
    let mut g_max = f64::NEG_INFINITY;
    for &e in global_eps {
        let sep = SeparationRun::until_saturated(&f, &tree, &ns, e, 0.5);
        for (m, c) in &sep.counts {
            counts.push(vec!["global".into(), num(e), m.to_string(), c.to_string()]);
        }
        match unsaturated_estimate(&sep, 0.5) {
            Ok(est) => {
                g_max = g_max.max(est);
                estimates.push(vec!["global".into(), num(e), num(est)]);
            }
            Err(_) => estimates.push(vec!["global".into(), num(e), "nan".into()]),
        }
    }
    let series: Vec<_> = (1..=n.min(6))
        .map(|m| graph_volume(&f, |x| region.contains(x), m, count, common.seed))
        .collect::<Result<_>>()?;
    let mut vol = Table::new(&["n", "volume", "std_error"]);
    for v in &series {
        vol.push(vec![v.n.to_string(), num(v.volume), num(v.std_error)]);
    }
    let rate = volume_growth_rate(&series, false)?;
    estimates.push(vec!["U_volume".into(), String::new(), num(rate)]);
    run.out.write_table("entropy_counts.csv", &counts)?;
    run.out.write_table("entropy_estimates.csv", &estimates)?;
    run.out.write_table("entropy_volume.csv", &vol)?;
    run.note("u_estimate", json!(u_max));
    run.note("global_estimate", json!(g_max));
    run.note("volume_rate", json!(rate));
    run.finish()
}

/// Fixed observables: a bump at `[1:1:0]` and `Re(z0 z̄1)/|z|²`.
fn mixing_observables(k: usize) -> Result<(ScalarField, ScalarField)> {
    let mut c = vec![0.0; k + 1];
    c[0] = 1.0;
    c[1] = 1.0;
    let unit = |i: usize| (0..=k).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect::<Vec<_>>();
    Ok((
        ScalarField::Gaussian { center: HomogeneousPoint::from_real(&c)?, width: 0.5 },
        ScalarField::Bilinear { left: unit(0), right: unit(1) },
    ))
}

fn mixing(common: &CommonArgs, lags: usize, gap: f64) -> Result<RunManifest> {
    let mut run = Run::new(common, "mixing")?;
    let f = Arc::new(run.map()?);
    let region = validated_region(&mut run, &f)?;
    let n = run.n(8);
    let nodes = run.nodes(2048);
    run.set("lags", json!(lags));
    run.set("gap", json!(gap));
    let line = start_line(&region, common.seed, 0)?;
    let nu = nu_sample(&f, &line, n, nodes, Refine::gap(gap))?;
    let (phi, psi) = mixing_observables(f.k())?;
    let ls: Vec<usize> = (1..=lags).collect();
    let c = mixing_correlation(&nu, &f, &phi, &psi, &ls);
    let scale = phi.sup_bound() * psi.sup_bound();
    let mut table = Table::new(&["lag", "correlation", "relative"]);
    for (l, v) in ls.iter().zip(&c) {
        table.push(vec![l.to_string(), num(*v), num(v.abs() / scale)]);
    }
    run.out.write_table("mixing.csv", &table)?;
    run.note("envelope_decreasing", json!(envelope_decreasing(&c)));
    run.note("last_relative", json!(c.last().map(|v| v.abs() / scale)));
    run.finish()
}

fn counterexample(common: &CommonArgs, d: u32, lines_per_axis: usize) -> Result<RunManifest> {
    let mut run = Run::new(common, "counterexample")?;
    run.set("d", json!(d));
    run.set("lines_per_axis", json!(lines_per_axis));
    let n = run.n(6);
    let nodes = run.nodes(2048);
    let r = counterexample_run(d, lines_per_axis, n, nodes, common.seed)?;
    let forms = ["near_z0", "near_z1", "near_z2"];
    let mut header = vec!["axis".to_string(), "line".to_string()];
    header.extend(forms.iter().map(|s| s.to_string()));
    let mut runs = Table { header: header.clone(), rows: Vec::new() };
    for (i, (axis, p)) in r.runs.iter().enumerate() {
        let mut row = vec![axis.to_string(), i.to_string()];
        row.extend(p.iter().map(|v| num(*v)));
        runs.push(row);
    }
    header.remove(1);
    header.push("lines".into());
    let mut centroids = Table { header, rows: Vec::new() };
    for axis in 0..3 {
        let members: Vec<&Vec<f64>> = r.runs.iter().filter(|(a, _)| *a == axis).map(|(_, p)| p).collect();
        let mut row = vec![axis.to_string()];
        for j in 0..forms.len() {
            row.push(num(members.iter().map(|p| p[j]).sum::<f64>() / members.len().max(1) as f64));
        }
        row.push(members.len().to_string());
        centroids.push(row);
    }
    let mut summary = key_value(&[
        ("within_cluster_gap", num(r.within_cluster_gap)),
        ("between_cluster_gap", num(r.between_cluster_gap)),
        ("control_spread", num(r.control_spread)),
        ("separated", r.separated().to_string()),
    ]);
    for (axis, s) in r.star_shape.iter().enumerate() {
        let witness = s.violations.first().map_or(String::new(), |v| format!("base={:?} t={}", v.base, num(v.t)));
        summary.push(vec![format!("star_shaped_axis{axis}"), format!("{} {}", s.passed(), witness)]);
    }
    run.out.write_table("counterexample_runs.csv", &runs)?;
    run.out.write_table("counterexample_centroids.csv", &centroids)?;
    run.out.write_table("counterexample_summary.csv", &summary)?;
    run.note("separated", json!(r.separated()));
    run.note("star_shape_fails", json!(r.star_shape.iter().all(|s| !s.passed())));
    run.finish()
}

fn potentials(common: &CommonArgs, u_points: usize) -> Result<RunManifest> {
    let mut run = Run::new(common, "potentials")?;
    let f = run.map()?;
    let region = validated_region(&mut run, &f)?;
    let n = run.n(3);
    let grid = run.nodes(10_000);
    let tol = run.tol(1e-2);
    run.set("u_points", json!(u_points));
    let a = start_line(&region, common.seed, 0)?;
    let b = start_line(&region, common.seed, 1)?;
    let r = potential_comparison(&f, &region, &a, &b, n, grid, u_points, common.seed)?;
    let table = key_value(&[
        ("max_excess", num(r.max_excess)),
        ("max_abs_on_u", num(r.max_abs_on_u)),
        ("value_at_center_s", num(r.value_at_center_s)),
        ("value_at_center_tau", num(r.value_at_center_tau)),
        ("grid_points", r.grid_points.to_string()),
        ("u_points", r.u_points.to_string()),
    ]);
    run.out.write_table("potentials.csv", &table)?;
    run.note("within_tol", json!(r.max_excess <= tol && r.max_abs_on_u <= tol));
    run.finish()
}

fn preimage_stat(common: &CommonArgs) -> Result<RunManifest> {
    let mut run = Run::new(common, "preimage-stat")?;
    let f = run.map()?;
    let region = validated_region(&mut run, &f)?;
    let n = run.n(5);
    let samples = run.nodes(20);
    let ns: Vec<usize> = (2..=n.max(2)).collect();
    let r = lebesgue_preimage_stat(&f, &region, &ns, samples, common.seed)?;
    let mut table = Table::new(&["n", "mean_fraction"]);
    for (m, v) in r.n.iter().zip(&r.mean_fraction) {
        table.push(vec![m.to_string(), num(*v)]);
    }
    run.out.write_table("preimage_stat.csv", &table)?;
    run.note("fiber_sizes_exact", json!(r.fiber_sizes_exact));
    run.note("strictly_decreasing", json!(r.strictly_decreasing()));
    run.note("vacuous", json!(r.vacuous));
    run.finish()
}

/// Collects every `*.run.json` in the output directory into `report.json`
/// and a one-line-per-artifact `report.csv`.
fn report(common: &CommonArgs) -> Result<RunManifest> {
    let mut manifests = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(&common.out)
        .map_err(|e| Error::Io(format!("{}: {e}", common.out.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".run.json") && n != "report.run.json")
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Config(format!("no run manifests in {}", common.out.display())));
    }
    for name in &names {
        let text = std::fs::read_to_string(common.out.join(name))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse { line: 0, msg: format!("{name}: {e}") })?;
        manifests.push(m);
    }
    let mut run = Run::new(common, "report")?;
    let mut table = Table::new(&["command", "artifact", "sha256", "bytes", "verified"]);
    for m in &manifests {
        for a in &m.artifacts {
            let verified = std::fs::read(common.out.join(&a.name)).map(|b| sha256_hex(&b) == a.sha256).unwrap_or(false);
            table.push(vec![m.command.clone(), a.name.clone(), a.sha256.clone(), a.bytes.to_string(), verified.to_string()]);
        }
    }
    run.out.write_table("report.csv", &table)?;
    let text = serde_json::to_string_pretty(&manifests).map_err(|e| Error::Io(e.to_string()))?;
    run.out.write_bytes("report.json", text.as_bytes())?;
    run.note("runs", json!(names));
    run.finish()
}
