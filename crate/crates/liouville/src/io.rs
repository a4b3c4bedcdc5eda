//! File formats: scenarios, snapshot directories, marginal/histogram CSVs,
//! compliance series and comparison reports.

use std::fs;
use std::path::{Path, PathBuf};

use liouville_core::dynamics::Flavor;
use liouville_core::marginalize::{BinStatus, Marginal, MarginalConfig};
use liouville_core::metrics::{Histogram, Histogram2d};
use liouville_core::propagation::{DensitySample, SampleStatus, Snapshot};
use liouville_core::scenarios::{builtin, ComplianceSeries, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, ErrorKind, Result};

/// Prefix selecting a shipped scenario instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Parse and validate a scenario; errors carry a JSON pointer.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let ptr = pointer(e.path());
        let inner = e.into_inner();
        let message = if ptr.is_empty() { inner.to_string() } else { format!("{ptr}: {inner}") };
        CliError { pointer: (!ptr.is_empty()).then_some(ptr), ..CliError::validation(message) }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// A scenario file, or `builtin:<name>`.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    if let Some(name) = source.strip_prefix(BUILTIN_PREFIX) {
        return Ok(builtin(name)?);
    }
    let path = Path::new(source);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text).map_err(|e| e.in_file(path))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// SHA-256 of the canonical JSON form.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(s).expect("serializable")))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_pretty(value))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let ptr = pointer(e.path());
        CliError {
            pointer: Some(ptr.clone()),
            ..CliError::new(ErrorKind::Io, format!("{}: {ptr}: {}", path.display(), e.into_inner()))
        }
        .in_file(path)
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

/// Builds one CSV file row by row, mapping errors to the file.
pub struct CsvOut {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut out = CsvOut { path: path.to_path_buf(), w: csv_writer(path)? };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

/// Index of a snapshot directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotIndex {
    pub flavor: Flavor,
    /// Name of the independent variable.
    pub independent: String,
    pub components: Vec<String>,
    pub has_density: bool,
    /// Components spanning the reconstruction space.
    pub axes: Vec<String>,
    pub marginal: MarginalConfig,
    pub scenario_sha256: String,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub indep: f64,
    pub file: String,
    pub active: usize,
}

pub const SNAPSHOT_INDEX: &str = "snapshots.json";

fn status_name(s: SampleStatus) -> &'static str {
    match s {
        SampleStatus::Active => "active",
        SampleStatus::Terminated => "terminated",
        SampleStatus::Failed => "failed",
    }
}

fn parse_status(s: &str) -> Option<SampleStatus> {
    Some(match s {
        "active" => SampleStatus::Active,
        "terminated" => SampleStatus::Terminated,
        "failed" => SampleStatus::Failed,
        _ => return None,
    })
}

/// One CSV per snapshot (state, `n`, `ln n`, `∂ ln n / ∂x`, status) plus the index.
/// Returns the written paths.
pub fn write_snapshots(
    dir: &Path,
    snapshots: &[Snapshot],
    axes: &[String],
    marginal: &MarginalConfig,
    scenario_sha256: &str,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let Some(first) = snapshots.first() else {
        return Err(CliError::numerical("no snapshots to write"));
    };
    let flavor = first.flavor;
    let names: Vec<String> = flavor.component_names().iter().map(|s| s.to_string()).collect();
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (k, snap) in snapshots.iter().enumerate() {
        let file = format!("snapshot_{k:03}.csv");
        let path = dir.join(&file);
        let mut header = names.clone();
        if snap.has_density {
            header.push("n".into());
            header.push("log_n".into());
            header.extend(names.iter().map(|c| format!("dlogn_d{c}")));
        }
        header.push("status".into());
        let mut out = CsvOut::create(&path, &header)?;
        for s in &snap.samples {
            let mut row: Vec<String> = s.state.iter().map(|&x| num(x)).collect();
            if snap.has_density {
                row.push(num(s.log_n.exp()));
                row.push(num(s.log_n));
                row.extend(s.grad_log_n.iter().map(|&g| num(g)));
            }
            row.push(status_name(s.status).into());
            out.row(&row)?;
        }
        out.finish()?;
        entries.push(SnapshotEntry { indep: snap.indep, file, active: snap.active_count() });
        written.push(path);
    }
    let index = SnapshotIndex {
        flavor,
        independent: flavor.independent().into(),
        components: names,
        has_density: first.has_density,
        axes: axes.to_vec(),
        marginal: *marginal,
        scenario_sha256: scenario_sha256.into(),
        snapshots: entries,
    };
    let path = dir.join(SNAPSHOT_INDEX);
    write_json(&path, &index)?;
    written.push(path);
    Ok(written)
}

pub fn read_snapshots(dir: &Path) -> Result<(SnapshotIndex, Vec<Snapshot>)> {
    let index: SnapshotIndex = read_json(&dir.join(SNAPSHOT_INDEX))?;
    let d = index.components.len();
    let mut snaps = Vec::with_capacity(index.snapshots.len());
    for e in &index.snapshots {
        let path = dir.join(&e.file);
        let bad = |msg: String| CliError::new(ErrorKind::Io, format!("{}: {msg}", path.display())).in_file(&path);
        let mut rdr = csv::Reader::from_path(&path).map_err(|err| CliError::io(&path, err))?;
        let header = rdr.headers().map_err(|err| CliError::io(&path, err))?.clone();
        let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column `{name}`")));
        let state_cols = index.components.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
        let (log_col, grad_cols) = if index.has_density {
            (Some(col("log_n")?), index.components.iter().map(|c| col(&format!("dlogn_d{c}"))).collect::<Result<Vec<_>>>()?)
        } else {
            (None, Vec::new())
        };
        let status_col = col("status")?;
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|err| CliError::io(&path, err))?;
            let f = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("row {}: column {} is not a number", line + 2, header.get(c).unwrap_or("?"))))
            };
            let state = state_cols.iter().map(|&c| f(c)).collect::<Result<Vec<_>>>()?;
            let status = parse_status(rec.get(status_col).unwrap_or(""))
                .ok_or_else(|| bad(format!("row {}: unknown status", line + 2)))?;
            let (log_n, grad_log_n) = match log_col {
                Some(lc) => (f(lc)?, grad_cols.iter().map(|&c| f(c)).collect::<Result<Vec<_>>>()?),
                None => (f64::NEG_INFINITY, Vec::new()),
            };
            debug_assert_eq!(state.len(), d);
            samples.push(DensitySample { state, log_n, grad_log_n, status });
        }
        snaps.push(Snapshot { indep: e.indep, flavor: index.flavor, has_density: index.has_density, samples });
    }
    Ok((index, snaps))
}

fn status_label(s: BinStatus) -> &'static str {
    match s {
        BinStatus::Ok => "ok",
        BinStatus::CoreDegenerate => "core_degenerate",
        BinStatus::TooFewPoints => "too_few_points",
        BinStatus::Degenerate => "degenerate",
    }
}

/// Edge columns per axis, then value and per-bin diagnostics. 2-D marginals
/// are in long format, first axis slowest.
pub fn write_marginal_csv(path: &Path, names: &[String], m: &Marginal) -> Result<()> {
    let mut header: Vec<String> = names.iter().flat_map(|n| [format!("{n}_lower"), format!("{n}_upper")]).collect();
    header.extend(["value", "mass", "alpha", "core_points", "extended_points", "status"].map(String::from));
    let mut out = CsvOut::create(path, &header)?;
    let shape: Vec<usize> = m.edges.iter().map(|e| e.len() - 1).collect();
    for (flat, (value, bin)) in m.values.iter().zip(&m.bins).enumerate() {
        let mut idx = vec![0; shape.len()];
        let mut rest = flat;
        for a in (0..shape.len()).rev() {
            idx[a] = rest % shape[a];
            rest /= shape[a];
        }
        let mut row: Vec<String> = idx.iter().enumerate().flat_map(|(a, &i)| [num(m.edges[a][i]), num(m.edges[a][i + 1])]).collect();
        row.extend([
            num(*value),
            num(bin.mass),
            num(bin.alpha),
            bin.core_points.to_string(),
            bin.extended_points.to_string(),
            status_label(bin.status).into(),
        ]);
        out.row(&row)?;
    }
    out.finish()
}

pub fn write_histogram_csv(path: &Path, name: &str, h: &Histogram) -> Result<()> {
    let mut out = CsvOut::create(path, &[format!("{name}_lower"), format!("{name}_upper"), "value".into()])?;
    for (i, v) in h.density.iter().enumerate() {
        out.row([num(h.edges[i]), num(h.edges[i + 1]), num(*v)])?;
    }
    out.finish()
}

pub fn write_histogram2d_csv(path: &Path, names: &[String; 2], h: &Histogram2d) -> Result<()> {
    let header = [
        format!("{}_lower", names[0]),
        format!("{}_upper", names[0]),
        format!("{}_lower", names[1]),
        format!("{}_upper", names[1]),
        "value".into(),
    ];
    let mut out = CsvOut::create(path, &header)?;
    let ny = h.edges[1].len() - 1;
    for (k, v) in h.density.iter().enumerate() {
        let (i, j) = (k / ny, k % ny);
        out.row([num(h.edges[0][i]), num(h.edges[0][i + 1]), num(h.edges[1][j]), num(h.edges[1][j + 1]), num(*v)])?;
    }
    out.finish()
}

/// `indep,probability`, plus `altitude_m` when the independent variable is a radius.
pub fn write_compliance_csv(path: &Path, series: &ComplianceSeries, radius: Option<f64>) -> Result<()> {
    let mut header = vec!["indep".to_string(), "probability".to_string()];
    if radius.is_some() {
        header.push("altitude_m".into());
    }
    let mut out = CsvOut::create(path, &header)?;
    for (s, p) in series.indep.iter().zip(&series.probability) {
        let mut row = vec![num(*s), num(*p)];
        if let Some(r) = radius {
            row.push(num(s - r));
        }
        out.row(&row)?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let snap = Snapshot {
            indep: 2.5,
            flavor: Flavor::ThreeState,
            has_density: true,
            samples: vec![
                DensitySample {
                    state: vec![6.5e6, 7200.0, -0.5, 1e4, 1.0],
                    log_n: -12.345678901234567,
                    grad_log_n: vec![1e-3, -2.0, 0.1, 3.3e-7, 0.0],
                    status: SampleStatus::Active,
                },
                DensitySample {
                    state: vec![6.4e6, 300.0, -1.5, 1e4, 1.0],
                    log_n: f64::NEG_INFINITY,
                    grad_log_n: vec![0.0; 5],
                    status: SampleStatus::Terminated,
                },
            ],
        };
        let axes = vec!["r".to_string(), "v".into()];
        write_snapshots(dir.path(), &[snap.clone()], &axes, &MarginalConfig::default(), "abc").unwrap();
        let (index, back) = read_snapshots(dir.path()).unwrap();
        assert_eq!(back, vec![snap]);
        assert_eq!(index.axes, axes);
        assert_eq!(index.snapshots[0].active, 1);
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let mut v = serde_json::to_value(builtin("strategic_3state").unwrap()).unwrap();
        v["dynamics"]["initial"]["velocity_m_per_s"]["sigma"] = serde_json::json!("fast");
        let e = parse_scenario(&v.to_string()).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Validation);
        // Tagged enums buffer their content, so the pointer stops at the
        // enclosing object; the message keeps the line and column.
        assert_eq!(e.pointer.as_deref(), Some("/dynamics"));
        assert!(e.message.contains("\"fast\"") && e.message.contains("column"), "{}", e.message);

        let mut v = serde_json::to_value(builtin("strategic_3state").unwrap()).unwrap();
        v["run"]["samples"] = serde_json::json!(-3);
        let e = parse_scenario(&v.to_string()).unwrap_err();
        assert_eq!(e.pointer.as_deref(), Some("/run/samples"));

        let mut v = serde_json::to_value(builtin("strategic_3state").unwrap()).unwrap();
        v["planet"]["radius_km"] = serde_json::json!(6378.1);
        let e = parse_scenario(&v.to_string()).unwrap_err();
        assert!(e.message.contains("radius_km"), "{}", e.message);
    }
}
