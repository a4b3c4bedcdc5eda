//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use liouville_core::alpha_select::{AlphaPolicy, HeuristicMode};
use liouville_core::interpolation::InterpolationMode;
use liouville_core::marginalize::{default_bins_1d, marginal_with_spec, BinSpec, MarginalConfig, PointCloud};
use liouville_core::metrics::{summarize, Histogram, Histogram2d};
use liouville_core::propagation::Snapshot;
use liouville_core::scenarios::{builtin_scenarios, compare_1d, Scenario};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::exec::Rayon;
use crate::io::{self, CsvOut, SnapshotIndex};
use crate::run::run_to_dir;

#[derive(Debug, Parser)]
#[command(name = "liouville", version, about = "Density-based uncertainty propagation for atmospheric entry")]
pub struct Cli {
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output on stderr; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory.
    #[arg(long, env = "LIOUVILLE_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate a scenario with the density-based method and Monte Carlo, then reconstruct and compare.
    Run {
        /// Scenario file, or `builtin:<name>`.
        scenario: String,
        /// Density-based sample count (default: the scenario's).
        #[arg(long)]
        samples: Option<usize>,
        /// Comma-separated Monte Carlo sizes; the largest is the reference. Pass an empty string for none.
        #[arg(long, value_delimiter = ',')]
        mc_samples: Option<Vec<String>>,
        /// Master seed (default: the scenario's)
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Reconstruct marginals from a stored snapshot directory.
    Marginal {
        /// Directory holding `snapshots.json`.
        snapshots: PathBuf,
        /// One component for a 1-D marginal.
        #[arg(long, conflicts_with = "axes", required_unless_present = "axes")]
        axis: Option<String>,
        /// Two comma-separated components for a 2-D marginal.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<String>>,
        /// Bins per axis.
        #[arg(long)]
        bins: Option<usize>,
        /// `hull`, `fixed:<α>`, `max|mean|median|min[:<scale>]` or `cv`.
        #[arg(long)]
        alpha_mode: Option<String>,
        #[arg(long, value_enum)]
        interpolation: Option<Interp>,
        /// Only this snapshot index.
        #[arg(long)]
        snapshot: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Distances between two snapshot directories with the same schedule.
    Compare {
        /// Method under test.
        method: PathBuf,
        /// Reference.
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::All)]
        metric: Metric,
        /// Bins per axis (default from the method's sample count).
        #[arg(long)]
        bins: Option<usize>,
        /// CSV path; a `_summary.csv` sibling holds the aggregates. Default: stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check scenario files against the schema and the consistency rules.
    Validate {
        /// Scenario files, or `builtin:<name>`
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// List the shipped scenarios, or write them as JSON files.
    Scenarios {
        /// Directory to write `<name>.json` files into
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Print the JSON Schema of scenario files.
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interp {
    Linear,
    Enhanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Hellinger,
    Wasserstein,
    All,
}

pub fn parse_alpha_mode(s: &str) -> Result<AlphaPolicy> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
        match a {
            Some(a) => a
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0)
                .ok_or_else(|| CliError::validation(format!("--alpha-mode: `{a}` is not a positive number"))),
            None => default.ok_or_else(|| CliError::validation(format!("--alpha-mode {kind} needs a value, e.g. {kind}:0.5"))),
        }
    };
    let heuristic = |mode| -> Result<AlphaPolicy> { Ok(AlphaPolicy::Heuristic { mode, scale: num(arg, Some(1.0))? }) };
    match kind {
        "hull" => Ok(AlphaPolicy::ConvexHull),
        "fixed" => Ok(AlphaPolicy::Fixed { alpha: num(arg, None)? }),
        "max" => heuristic(HeuristicMode::Max),
        "mean" => heuristic(HeuristicMode::Mean),
        "median" => heuristic(HeuristicMode::Median),
        "min" => heuristic(HeuristicMode::Min),
        "cv" => Ok(AlphaPolicy::CrossValidated { cv: Default::default(), de: Default::default(), warm_start: true }),
        _ => Err(CliError::validation(format!(
            "--alpha-mode: unknown mode `{kind}`; expected hull, fixed:<α>, max, mean, median, min or cv"
        ))),
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

pub fn execute(cli: Cli) -> Result<()> {
    let exec = Rayon::new(cli.threads).map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    match cli.command {
        Command::Run { scenario, samples, mc_samples, seed, out } => {
            let s = io::load_scenario(&scenario)?;
            let mut options = s.run.clone();
            if let Some(n) = samples {
                options.samples = n;
            }
            if let Some(m) = mc_samples {
                options.mc_samples = m
                    .iter()
                    .filter(|v| !v.is_empty())
                    .map(|v| v.trim().parse().map_err(|_| CliError::validation(format!("--mc-samples: `{v}` is not a count"))))
                    .collect::<Result<_>>()?;
            }
            if let Some(seed) = seed {
                options.seed = seed;
            }
            let checked = Scenario { run: options.clone(), ..s.clone() };
            checked.validate().map_err(|e| match e {
                liouville_core::scenarios::ScenarioError::Invalid { path, message } => {
                    CliError::validation(format!("{path}: {message} (after command-line overrides)"))
                }
                other => other.into(),
            })?;
            let manifest = run_to_dir(&s, &options, &out.out, &exec, exec.threads())?;
            for e in &manifest.errors {
                log::warn!("{}{}: {}", e.stage, e.indep.map(|s| format!(" at {s}")).unwrap_or_default(), e.message);
            }
            print_json(&serde_json::json!({
                "out": out.out,
                "manifest": out.out.join(crate::run::MANIFEST),
                "scenario_sha256": manifest.scenario_sha256,
                "total_s": manifest.timings.total_s,
                "stage_errors": manifest.errors.len(),
            }));
            Ok(())
        }
        Command::Marginal { snapshots, axis, axes, bins, alpha_mode, interpolation, snapshot, out } => {
            let names = match (axis, axes) {
                (Some(a), _) => vec![a],
                (None, Some(v)) if v.len() == 2 => v,
                (None, Some(v)) => return Err(CliError::validation(format!("--axes takes two components, got {}", v.len()))),
                (None, None) => unreachable!("clap requires one"),
            };
            let (index, snaps) = io::read_snapshots(&snapshots)?;
            let mut cfg = index.marginal;
            if let Some(a) = alpha_mode {
                cfg.alpha = parse_alpha_mode(&a)?;
            }
            if let Some(i) = interpolation {
                cfg.interpolation = match i {
                    Interp::Linear => InterpolationMode::Linear,
                    Interp::Enhanced => InterpolationMode::GradientEnhanced,
                };
            }
            let written = cmd_marginal(&index, &snaps, &names, bins, &cfg, snapshot, &out.out, &exec)?;
            print_json(&serde_json::json!({ "written": written }));
            Ok(())
        }
        Command::Compare { method, reference, metric, bins, out } => cmd_compare(&method, &reference, metric, bins, out.as_deref(), &exec),
        Command::Validate { scenarios } => {
            for src in scenarios {
                let s = io::load_scenario(&src)?;
                print_json(&serde_json::json!({ "scenario": src, "name": s.name, "valid": true, "sha256": io::scenario_hash(&s) }));
            }
            Ok(())
        }
        Command::Scenarios { write } => {
            for s in builtin_scenarios() {
                match &write {
                    Some(dir) => {
                        let p = dir.join(format!("{}.json", s.name));
                        io::write_json(&p, &s)?;
                        print_json(&serde_json::json!({ "name": s.name, "written": p }));
                    }
                    None => print_json(&serde_json::json!({ "name": s.name, "description": s.description })),
                }
            }
            Ok(())
        }
        Command::Schema => {
            print!("{}", scenario_schema());
            Ok(())
        }
    }
}

/// JSON Schema of scenario files, pretty-printed.
pub fn scenario_schema() -> String {
    io::to_json_pretty(&schemars::schema_for!(Scenario))
}

fn component_index(index: &SnapshotIndex, name: &str) -> Result<usize> {
    index.components.iter().position(|c| c == name).ok_or_else(|| {
        CliError::validation(format!("unknown component `{name}`; available: {}", index.components.join(", ")))
    })
}

fn active_values(s: &Snapshot, k: usize) -> Vec<f64> {
    s.active().map(|x| x.state[k]).collect()
}

fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 }).collect()
}

fn range_of(values: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    (hi > lo).then_some((lo, hi))
}

#[allow(clippy::too_many_arguments)]
fn cmd_marginal(
    index: &SnapshotIndex,
    snaps: &[Snapshot],
    names: &[String],
    bins: Option<usize>,
    cfg: &MarginalConfig,
    only: Option<usize>,
    out: &Path,
    exec: &Rayon,
) -> Result<Vec<PathBuf>> {
    let comps = names.iter().map(|n| component_index(index, n)).collect::<Result<Vec<_>>>()?;
    if comps.len() == 2 && comps[0] == comps[1] {
        return Err(CliError::validation("--axes must name two different components"));
    }
    if let Some(k) = only {
        if k >= snaps.len() {
            return Err(CliError::validation(format!("--snapshot {k}: the directory holds {} snapshots", snaps.len())));
        }
    }
    let axes = index.axes.iter().map(|n| component_index(index, n)).collect::<Result<Vec<_>>>()?;
    let positions = if index.has_density {
        comps
            .iter()
            .zip(names)
            .map(|(k, n)| {
                axes.iter().position(|a| a == k).ok_or_else(|| {
                    CliError::validation(format!("`{n}` is fixed in this run; reconstructable components: {}", index.axes.join(", ")))
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    cfg.validate().map_err(|e| CliError::validation(e.to_string()))?;
    let tag = names.join("-");
    let mut written = Vec::new();
    let mut failures = 0;
    let selected: Vec<usize> = match only {
        Some(k) => vec![k],
        None => (0..snaps.len()).collect(),
    };
    for &k in &selected {
        let snap = &snaps[k];
        let n = snap.active_count();
        let nb = bins.unwrap_or_else(|| {
            if comps.len() == 1 {
                cfg.bins_1d.unwrap_or_else(|| default_bins_1d(n.max(1)))
            } else {
                cfg.bins_2d.unwrap_or_else(|| liouville_core::marginalize::default_bins_2d(n.max(1)))
            }
        });
        if nb == 0 {
            return Err(CliError::validation("--bins must be at least 1"));
        }
        let path = out.join(format!("marginal_{k:03}_{tag}.csv"));
        let result: std::result::Result<(), String> = if index.has_density {
            let buffer = if comps.len() == 1 { cfg.buffer } else { cfg.buffer_2d };
            PointCloud::from_snapshot(snap, &axes)
                .and_then(|cloud| {
                    let spec = BinSpec::from_cloud(&cloud, &positions, &vec![nb; positions.len()], buffer)?;
                    marginal_with_spec(&cloud, &spec, cfg, None, exec)
                })
                .map_err(|e| e.to_string())
                .and_then(|m| io::write_marginal_csv(&path, names, &m).map_err(|e| e.to_string()))
        } else {
            let vals: Vec<Vec<f64>> = comps.iter().map(|&c| active_values(snap, c)).collect();
            let edges: Option<Vec<Vec<f64>>> = vals.iter().map(|v| range_of(v).map(|(lo, hi)| linspace(lo, hi, nb))).collect();
            match edges {
                None => Err("no spread in the active samples".into()),
                Some(e) if comps.len() == 1 => Histogram::from_samples(&vals[0], e[0].clone())
                    .map_err(|e| e.to_string())
                    .and_then(|h| io::write_histogram_csv(&path, &names[0], &h).map_err(|e| e.to_string())),
                Some(e) => Histogram2d::from_samples(&vals[0], &vals[1], [e[0].clone(), e[1].clone()])
                    .map_err(|e| e.to_string())
                    .and_then(|h| io::write_histogram2d_csv(&path, &[names[0].clone(), names[1].clone()], &h).map_err(|e| e.to_string())),
            }
        };
        match result {
            Ok(()) => written.push(path),
            Err(e) => {
                failures += 1;
                log::warn!("snapshot {k} ({} = {}): {e}", index.independent, snap.indep);
            }
        }
    }
    if failures == selected.len() {
        return Err(CliError::numerical(format!("no marginal could be computed for `{tag}`")));
    }
    Ok(written)
}

/// A comparable side at one snapshot: its histogram on shared edges and,
/// for sample-only data, the raw values.
fn side(index: &SnapshotIndex, snap: &Snapshot, comp: usize, edges_range: (f64, f64), nb: usize, exec: &Rayon) -> Result<(Histogram, Option<Vec<f64>>)> {
    let values = active_values(snap, comp);
    if index.has_density {
        let axes = index.axes.iter().map(|n| component_index(index, n)).collect::<Result<Vec<_>>>()?;
        let pos = axes.iter().position(|&a| a == comp).expect("checked by caller");
        let cfg = &index.marginal;
        let m = PointCloud::from_snapshot(snap, &axes)
            .and_then(|c| {
                let spec = BinSpec::with_ranges(&c, &[pos], &[nb], cfg.buffer, &[Some(edges_range)])?;
                marginal_with_spec(&c, &spec, cfg, None, exec)
            })
            .map_err(|e| CliError::numerical(format!("{} at {}: {e}", index.components[comp], snap.indep)))?;
        Ok((m.to_histogram().expect("1-D"), None))
    } else {
        let h = Histogram::from_samples(&values, linspace(edges_range.0, edges_range.1, nb))
            .map_err(|e| CliError::numerical(e.to_string()))?;
        Ok((h, Some(values)))
    }
}

fn cmd_compare(method: &Path, reference: &Path, metric: Metric, bins: Option<usize>, out: Option<&Path>, exec: &Rayon) -> Result<()> {
    let (mi, ms) = io::read_snapshots(method)?;
    let (ri, rs) = io::read_snapshots(reference)?;
    let sched = |s: &[Snapshot]| s.iter().map(|x| x.indep).collect::<Vec<_>>();
    let (a, b) = (sched(&ms), sched(&rs));
    let aligned = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
    if !aligned || mi.components != ri.components {
        return Err(CliError::validation(format!("snapshot schedules differ: method {a:?}, reference {b:?}")));
    }
    let comps: Vec<String> = if mi.has_density { mi.axes.clone() } else if ri.has_density { ri.axes.clone() } else { mi.axes.clone() };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for name in &comps {
        let k = component_index(&mi, name)?;
        if ri.has_density && !ri.axes.contains(name) {
            continue;
        }
        let (mut hs, mut wn) = (Vec::new(), Vec::new());
        for (s, (m, r)) in ms.iter().zip(&rs).enumerate() {
            let mut all = active_values(m, k);
            all.extend(active_values(r, k));
            let Some(range) = range_of(&all) else {
                log::warn!("{name} at snapshot {s}: no spread, skipped");
                continue;
            };
            let nb = bins.unwrap_or_else(|| mi.marginal.bins_1d.unwrap_or_else(|| default_bins_1d(m.active_count().max(1))));
            let (mh, mx) = side(&mi, m, k, range, nb, exec)?;
            let (rh, rx) = side(&ri, r, k, range, nb, exec)?;
            let c = compare_1d(&mh, mx.as_deref(), &rh, rx.as_deref());
            let wnorm = if c.reference_std > 0.0 { c.wasserstein / c.reference_std } else { c.wasserstein };
            hs.push(c.hellinger);
            wn.push(wnorm);
            rows.push((name.clone(), m.indep, c, wnorm));
        }
        let (h, w) = (summarize(&hs), summarize(&wn));
        summary.push((name.clone(), h, w));
    }
    let header: Vec<&str> = match metric {
        Metric::Hellinger => vec!["component", "indep", "hellinger"],
        Metric::Wasserstein => vec!["component", "indep", "wasserstein", "wasserstein_normalized"],
        Metric::All => vec!["component", "indep", "hellinger", "wasserstein", "wasserstein_normalized", "mean_difference", "std_difference"],
    };
    let fmt = |(name, indep, c, wn): &(String, f64, liouville_core::scenarios::PointComparison, f64)| -> Vec<String> {
        let mut r = vec![name.clone(), indep.to_string()];
        match metric {
            Metric::Hellinger => r.push(c.hellinger.to_string()),
            Metric::Wasserstein => r.extend([c.wasserstein.to_string(), wn.to_string()]),
            Metric::All => r.extend(
                [c.hellinger, c.wasserstein, *wn, c.mean_difference, c.std_difference].iter().map(|v| v.to_string()),
            ),
        }
        r
    };
    let sheader = ["component", "hellinger_mean", "hellinger_std", "wasserstein_normalized_mean", "wasserstein_normalized_std"];
    match out {
        Some(p) => {
            let mut w = CsvOut::create(p, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
            for r in &rows {
                w.row(fmt(r))?;
            }
            w.finish()?;
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "compare".into());
            let sp = p.with_file_name(format!("{stem}_summary.csv"));
            let mut w = CsvOut::create(&sp, &sheader.map(String::from))?;
            for (n, h, wsum) in &summary {
                w.row([n.clone(), h.mean.to_string(), h.std.to_string(), wsum.mean.to_string(), wsum.std.to_string()])?;
            }
            w.finish()?;
            print_json(&serde_json::json!({ "written": [p, sp] }));
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let err = |e: csv::Error| CliError::new(crate::error::ErrorKind::Io, format!("stdout: {e}"));
            w.write_record(&header).map_err(err)?;
            for r in &rows {
                w.write_record(fmt(r)).map_err(err)?;
            }
            w.flush().map_err(|e| CliError::new(crate::error::ErrorKind::Io, format!("stdout: {e}")))?;
            for (n, h, wsum) in &summary {
                log::info!("{n}: hellinger {:.4} ± {:.4}, normalized wasserstein {:.4} ± {:.4}", h.mean, h.std, wsum.mean, wsum.std);
            }
        }
    }
    Ok(())
}

