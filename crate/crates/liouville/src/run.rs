//! Runs a scenario and lays its artifacts out on disk with a manifest.
//!
//! ```text
//! out/
//!   manifest.json  scenario.json
//!   snapshots/db/  snapshots/mc_<N>/      one CSV per snapshot + snapshots.json
//!   marginals/db/  marginals/mc_<N>/      1-D and 2-D marginals per snapshot
//!   derived/                              derived-quantity marginals
//!   reports/                              distance and moment comparisons
//!   compliance/                           probability series
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use liouville_core::dynamics::Flavor;
use liouville_core::rng::{streams, sub_seed};
use liouville_core::scenarios::{
    run_pipeline, AlphaRecord, Clock, Comparison, RunArtifacts, RunOptions, Scenario, StageError, Timings,
};
use liouville_core::Executor;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{self, CsvOut};

pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub continuum_samples: u64,
    /// `(ensemble size, seed)` per Monte Carlo run.
    pub mc_samples: Vec<(usize, u64)>,
    /// Base of the per-snapshot α-search seeds.
    pub alpha_selection: u64,
}

impl Seeds {
    pub fn derive(master: u64, mc_sizes: &[usize]) -> Self {
        let mut sizes = mc_sizes.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        let mc_base = sub_seed(master, streams::MC_SAMPLES);
        Seeds {
            master,
            continuum_samples: sub_seed(master, streams::CONTINUUM_SAMPLES),
            mc_samples: sizes.iter().enumerate().map(|(k, &m)| (m, sub_seed(mc_base, k as u64))).collect(),
            alpha_selection: sub_seed(master, streams::DIFFERENTIAL_EVOLUTION),
        }
    }
}

/// Per-bin α values of one reconstructed marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAlphas {
    pub indep: f64,
    pub components: Vec<String>,
    /// `null` where a bin was too sparse to triangulate.
    pub alpha: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub method: String,
    pub reference: String,
    pub component: String,
    pub hellinger_mean: f64,
    pub hellinger_std: f64,
    pub wasserstein_normalized_mean: f64,
    pub wasserstein_normalized_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub scenario_sha256: String,
    pub options: RunOptions,
    pub seeds: Seeds,
    pub threads: usize,
    pub independent: String,
    pub schedule: Vec<f64>,
    pub timings: Timings,
    /// Marginalization over propagation time for the density-based method.
    pub marginalization_to_propagation: f64,
    pub alpha_selection: Vec<AlphaRecord>,
    pub bin_alpha: Vec<BinAlphas>,
    pub comparisons: Vec<ComparisonSummary>,
    pub errors: Vec<StageError>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

fn summaries(comparisons: &[Comparison]) -> Vec<ComparisonSummary> {
    comparisons
        .iter()
        .flat_map(|c| {
            c.components.iter().map(move |cc| ComparisonSummary {
                method: c.method.clone(),
                reference: c.reference.clone(),
                component: cc.component.clone(),
                hellinger_mean: cc.distances.hellinger_summary.mean,
                hellinger_std: cc.distances.hellinger_summary.std,
                wasserstein_normalized_mean: cc.distances.wasserstein_summary.mean,
                wasserstein_normalized_std: cc.distances.wasserstein_summary.std,
            })
        })
        .collect()
}

/// Run the pipeline and write everything under `out`.
pub fn run_to_dir<E: Executor>(scenario: &Scenario, options: &RunOptions, out: &Path, exec: &E, threads: usize) -> Result<RunManifest> {
    let clock = WallClock::start();
    log::info!("running `{}` with {} samples, Monte Carlo {:?}, seed {}", scenario.name, options.samples, options.mc_samples, options.seed);
    let a = run_pipeline(scenario, options, exec, &clock)?;
    log::info!("pipeline finished in {:.1} s", a.timings.total_s);
    write_artifacts(&a, out, threads)
}

pub fn write_artifacts(a: &RunArtifacts, out: &Path, threads: usize) -> Result<RunManifest> {
    io::create_dir(out)?;
    let scenario = &a.scenario;
    let hash = io::scenario_hash(scenario);
    let flavor = scenario.flavor();
    let names: Vec<String> = flavor.component_names().iter().map(|s| s.to_string()).collect();
    let built = scenario.build()?;
    let axes: Vec<String> = built.axes.iter().map(|&k| names[k].clone()).collect();
    let radius = (flavor == Flavor::SixState).then_some(scenario.planet.radius_m);
    let mut paths: Vec<PathBuf> = Vec::new();

    let p = out.join("scenario.json");
    io::write_json(&p, scenario)?;
    paths.push(p);

    let cfg = &scenario.reconstruction.marginal;
    paths.extend(io::write_snapshots(&out.join("snapshots/db"), &a.db.snapshots, &axes, cfg, &hash)?);
    for run in &a.mc {
        let dir = out.join(format!("snapshots/mc_{}", run.samples));
        paths.extend(io::write_snapshots(&dir, &run.propagation.snapshots, &axes, cfg, &hash)?);
    }

    let mut bin_alpha = Vec::new();
    for (k, s) in a.db_snapshots.iter().enumerate() {
        for m in s.marginals_1d.iter().chain(&s.marginals_2d) {
            let p = out.join(format!("marginals/db/snapshot_{k:03}_{}.csv", m.components.join("-")));
            io::write_marginal_csv(&p, &m.components, &m.marginal)?;
            paths.push(p);
            bin_alpha.push(BinAlphas { indep: s.indep, components: m.components.clone(), alpha: m.marginal.bins.iter().map(|b| b.alpha.is_finite().then_some(b.alpha)).collect() });
        }
        for d in &s.derived {
            let p = out.join(format!("derived/snapshot_{k:03}_v-{}.csv", d.quantity));
            io::write_marginal_csv(&p, &[d.quantity.clone()], &d.marginal)?;
            paths.push(p);
        }
    }
    for run in &a.mc {
        for (k, s) in run.snapshots.iter().enumerate() {
            for (name, h) in &s.histograms_1d {
                let p = out.join(format!("marginals/mc_{}/snapshot_{k:03}_{name}.csv", run.samples));
                io::write_histogram_csv(&p, name, h)?;
                paths.push(p);
            }
            for (pair, h) in &s.histograms_2d {
                let p = out.join(format!("marginals/mc_{}/snapshot_{k:03}_{}-{}.csv", run.samples, pair[0], pair[1]));
                io::write_histogram2d_csv(&p, pair, h)?;
                paths.push(p);
            }
        }
    }

    if !a.comparisons.is_empty() {
        let p = out.join("reports/comparisons.json");
        io::write_json(&p, &a.comparisons)?;
        paths.push(p);
    }
    for c in &a.comparisons {
        let p = out.join(format!("reports/{}_vs_{}.csv", c.method, c.reference));
        let header = ["component", "indep", "hellinger", "wasserstein", "wasserstein_normalized", "mean_difference", "std_difference"];
        let mut w = CsvOut::create(&p, &header.map(String::from))?;
        for cc in &c.components {
            let d = &cc.distances;
            for i in 0..d.indep.len() {
                w.row([
                    cc.component.clone(),
                    d.indep[i].to_string(),
                    d.hellinger[i].to_string(),
                    d.wasserstein[i].to_string(),
                    d.wasserstein_normalized[i].to_string(),
                    cc.mean_difference[i].to_string(),
                    cc.std_difference[i].to_string(),
                ])?;
            }
        }
        w.finish()?;
        paths.push(p);
        if !c.pairs.is_empty() {
            let p = out.join(format!("reports/{}_vs_{}_2d.csv", c.method, c.reference));
            let mut w = CsvOut::create(&p, &["components", "indep", "hellinger"].map(String::from))?;
            for pc in &c.pairs {
                for (s, h) in pc.indep.iter().zip(&pc.hellinger) {
                    w.row([pc.components.join("-"), s.to_string(), h.to_string()])?;
                }
            }
            w.finish()?;
            paths.push(p);
        }
    }
    let comparisons = summaries(&a.comparisons);
    if !comparisons.is_empty() {
        let p = out.join("reports/summary.csv");
        let header = ["method", "reference", "component", "hellinger_mean", "hellinger_std", "wasserstein_normalized_mean", "wasserstein_normalized_std"];
        let mut w = CsvOut::create(&p, &header.map(String::from))?;
        for s in &comparisons {
            w.row([
                s.method.clone(),
                s.reference.clone(),
                s.component.clone(),
                s.hellinger_mean.to_string(),
                s.hellinger_std.to_string(),
                s.wasserstein_normalized_mean.to_string(),
                s.wasserstein_normalized_std.to_string(),
            ])?;
        }
        w.finish()?;
        paths.push(p);
    }

    for c in &a.compliance {
        let p = out.join(format!("compliance/{}.csv", c.name));
        io::write_compliance_csv(&p, c, radius)?;
        paths.push(p);
    }

    let t = &a.timings;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: scenario.name.clone(),
        scenario_sha256: hash,
        options: a.options.clone(),
        seeds: Seeds::derive(a.options.seed, &a.options.mc_samples),
        threads,
        independent: flavor.independent().into(),
        schedule: a.db.snapshots.iter().map(|s| s.indep).collect(),
        timings: t.clone(),
        marginalization_to_propagation: if t.propagation_db_s > 0.0 { t.marginalization_db_s / t.propagation_db_s } else { f64::NAN },
        alpha_selection: a.alpha_log.clone(),
        bin_alpha,
        comparisons,
        errors: a.errors.clone(),
        artifacts: paths
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/"))
            .collect(),
    };
    io::write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
