//! Artifact persistence: CSV tables and JSON reports.
//!
//! Every file begins with a comment line embedding the config hash, run
//! seed, and manifest version, so any artifact can be traced to the exact
//! configuration that produced it and reruns can be compared byte for
//! byte. Floats are written in Rust's shortest round-trip form, which
//! parses back to identical bits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{Family, FeatureMatrix};
use crate::labels::Task;
use crate::panel::PricePanel;
use crate::strategy::{BacktestLedger, Regime};
use crate::walkforward::SubsetEvaluation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub seed: u64,
    pub manifest_version: u32,
}

/// First 16 hex characters of the SHA-256 of the JSON-serialized config.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_vec(config)
        .map_err(|e| Error::Config(format!("config not serialisable: {e}")))?;
    let digest = Sha256::digest(&json);
    let mut out = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}

pub fn header_line(meta: &ArtifactMeta) -> String {
    format!(
        "# tailcast config_hash={} seed={} manifest={}",
        meta.config_hash, meta.seed, meta.manifest_version
    )
}

pub fn parse_header(line: &str) -> Option<ArtifactMeta> {
    let rest = line.strip_prefix("# tailcast ")?;
    let mut config_hash = None;
    let mut seed = None;
    let mut manifest = None;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        match key {
            "config_hash" => config_hash = Some(value.to_string()),
            "seed" => seed = value.parse::<u64>().ok(),
            "manifest" => manifest = value.parse::<u32>().ok(),
            _ => {}
        }
    }
    Some(ArtifactMeta {
        config_hash: config_hash?,
        seed: seed?,
        manifest_version: manifest?,
    })
}

/// Read the leading meta comment of an artifact file.
pub fn read_meta(path: &Path) -> Result<ArtifactMeta> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = content.lines().next().unwrap_or("");
    parse_header(first)
        .ok_or_else(|| Error::Data(format!("{}: missing artifact header", path.display())))
}

/// True when `path` exists and already carries exactly this meta header,
/// meaning a rerun with the same config can skip the work.
pub fn matches_existing(path: &Path, meta: &ArtifactMeta) -> bool {
    match read_meta(path) {
        Ok(found) => found == *meta,
        Err(_) => false,
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write a price panel as a wide CSV (`date,SYM1,...`) with a meta header.
pub fn write_panel_csv(panel: &PricePanel, meta: &ArtifactMeta, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", header_line(meta)).map_err(io_err)?;
    writeln!(w, "date,{}", panel.symbols().join(",")).map_err(io_err)?;
    let prices = panel.prices();
    for (t, date) in panel.dates().iter().enumerate() {
        write!(w, "{date}").map_err(io_err)?;
        for a in 0..panel.symbols().len() {
            write!(w, ",{}", prices[[t, a]]).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    finish(w, path)
}

/// Write the feature matrix. A second comment line records the family of
/// each column so the file round-trips without the config.
pub fn write_features_csv(
    features: &FeatureMatrix,
    meta: &ArtifactMeta,
    path: &Path,
) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", header_line(meta)).map_err(io_err)?;
    let families: Vec<&str> = features.families.iter().map(|f| f.label()).collect();
    writeln!(w, "# families={}", families.join(",")).map_err(io_err)?;
    writeln!(w, "date,row,{}", features.names.join(",")).map_err(io_err)?;
    for r in 0..features.n_rows() {
        write!(w, "{},{}", features.dates[r], features.return_indices[r]).map_err(io_err)?;
        for c in 0..features.n_features() {
            write!(w, ",{}", features.values[[r, c]]).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    finish(w, path)
}

/// Read back a feature matrix written by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<(ArtifactMeta, FeatureMatrix)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = content.lines();
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    let meta = parse_header(lines.next().unwrap_or(""))
        .ok_or_else(|| bad("missing artifact header"))?;
    let family_line = lines
        .next()
        .and_then(|l| l.strip_prefix("# families="))
        .ok_or_else(|| bad("missing family line"))?;
    let families: Vec<Family> = family_line
        .split(',')
        .map(|l| Family::from_label(l).ok_or_else(|| bad("unknown family label")))
        .collect::<Result<_>>()?;
    let header = lines.next().ok_or_else(|| bad("missing column header"))?;
    let mut columns = header.split(',');
    if columns.next() != Some("date") || columns.next() != Some("row") {
        return Err(bad("unexpected leading columns"));
    }
    let names: Vec<String> = columns.map(|c| c.to_string()).collect();
    if names.len() != families.len() {
        return Err(bad("family line and column header disagree"));
    }
    let mut dates = Vec::new();
    let mut return_indices = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let date = parts
            .next()
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
            .ok_or_else(|| bad("bad date cell"))?;
        let row = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("bad row cell"))?;
        dates.push(date);
        return_indices.push(row);
        let mut count = 0usize;
        for cell in parts {
            cells.push(cell.parse::<f64>().map_err(|_| bad("bad value cell"))?);
            count += 1;
        }
        if count != names.len() {
            return Err(bad("row width does not match header"));
        }
    }
    let n_rows = dates.len();
    let values = Array2::from_shape_vec((n_rows, names.len()), cells)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let matrix = FeatureMatrix {
        dates,
        return_indices,
        names,
        families,
        values,
        manifest_version: meta.manifest_version,
        zero_filled: 0,
    };
    Ok((meta, matrix))
}

/// Sidecar manifest describing a persisted feature matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub meta: ArtifactMeta,
    pub n_rows: usize,
    pub n_features: usize,
    pub first_return_index: usize,
    pub zero_filled: usize,
    pub names: Vec<String>,
    pub families: Vec<Family>,
}

pub fn write_manifest_json(
    features: &FeatureMatrix,
    meta: &ArtifactMeta,
    path: &Path,
) -> Result<()> {
    let manifest = FeatureManifest {
        meta: meta.clone(),
        n_rows: features.n_rows(),
        n_features: features.n_features(),
        first_return_index: features.return_indices.first().copied().unwrap_or(0),
        zero_filled: features.zero_filled,
        names: features.names.clone(),
        families: features.families.clone(),
    };
    write_json(&manifest, path)
}

/// Serialize any report as pretty JSON (stable field order, exact floats).
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&content)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// One out-of-sample prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub subset: crate::features::FeatureSubset,
    pub task: Task,
    pub fold: usize,
    pub row: usize,
    pub return_index: usize,
    pub date: NaiveDate,
    pub score: f64,
    pub label: bool,
}

/// Flatten all fold scores of all subsets into prediction records, ordered
/// by subset, task, then row.
pub fn prediction_records(
    evaluations: &[SubsetEvaluation],
    features: &FeatureMatrix,
) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for eval in evaluations {
        for task in Task::all() {
            let task_eval = eval.task(task);
            for fold in &task_eval.folds {
                for (offset, row) in fold.test_rows.clone().enumerate() {
                    out.push(PredictionRecord {
                        subset: eval.subset,
                        task,
                        fold: fold.fold,
                        row,
                        return_index: features.return_indices[row],
                        date: features.dates[row],
                        score: fold.scores[offset],
                        label: fold.labels[offset],
                    });
                }
            }
        }
    }
    out
}

pub fn write_predictions_csv(
    records: &[PredictionRecord],
    meta: &ArtifactMeta,
    path: &Path,
) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", header_line(meta)).map_err(io_err)?;
    writeln!(w, "subset,task,fold,row,return_index,date,score,label").map_err(io_err)?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.subset.label(),
            r.task.label(),
            r.fold,
            r.row,
            r.return_index,
            r.date,
            r.score,
            r.label as u8
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

pub fn read_predictions_csv(path: &Path) -> Result<(ArtifactMeta, Vec<PredictionRecord>)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    let mut lines = content.lines();
    let meta = parse_header(lines.next().unwrap_or(""))
        .ok_or_else(|| bad("missing artifact header"))?;
    let header = lines.next().ok_or_else(|| bad("missing column header"))?;
    if header != "subset,task,fold,row,return_index,date,score,label" {
        return Err(bad("unexpected prediction columns"));
    }
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(bad("unexpected prediction row width"));
        }
        records.push(PredictionRecord {
            subset: crate::features::FeatureSubset::from_label(parts[0])
                .ok_or_else(|| bad("unknown subset"))?,
            task: Task::from_label(parts[1]).ok_or_else(|| bad("unknown task"))?,
            fold: parts[2].parse().map_err(|_| bad("bad fold"))?,
            row: parts[3].parse().map_err(|_| bad("bad row"))?,
            return_index: parts[4].parse().map_err(|_| bad("bad return index"))?,
            date: NaiveDate::parse_from_str(parts[5], "%Y-%m-%d")
                .map_err(|_| bad("bad date"))?,
            score: parts[6].parse().map_err(|_| bad("bad score"))?,
            label: match parts[7] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("bad label")),
            },
        });
    }
    Ok((meta, records))
}

pub fn write_ledger_csv(
    ledger: &BacktestLedger,
    meta: &ArtifactMeta,
    path: &Path,
) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", header_line(meta)).map_err(io_err)?;
    writeln!(
        w,
        "date,exposure,regime,defensive_alloc,equity_return,defensive_return,\
         transaction_cost,leverage_cost,net_return,wealth"
    )
    .map_err(io_err)?;
    for t in 0..ledger.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            ledger.dates[t],
            ledger.exposure[t],
            ledger.regimes[t].label(),
            ledger.defensive_alloc[t],
            ledger.equity_return[t],
            ledger.defensive_return[t],
            ledger.transaction_cost[t],
            ledger.leverage_cost[t],
            ledger.net_return[t],
            ledger.wealth[t]
        )
        .map_err(io_err)?;
    }
    finish(w, path)
}

pub fn read_ledger_csv(path: &Path) -> Result<(ArtifactMeta, BacktestLedger)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    let mut lines = content.lines();
    let meta = parse_header(lines.next().unwrap_or(""))
        .ok_or_else(|| bad("missing artifact header"))?;
    lines.next().ok_or_else(|| bad("missing column header"))?;
    let mut ledger = BacktestLedger {
        dates: Vec::new(),
        exposure: Vec::new(),
        regimes: Vec::new(),
        defensive_alloc: Vec::new(),
        equity_return: Vec::new(),
        defensive_return: Vec::new(),
        transaction_cost: Vec::new(),
        leverage_cost: Vec::new(),
        net_return: Vec::new(),
        wealth: Vec::new(),
    };
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(bad("unexpected ledger row width"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad numeric cell"));
        ledger.dates.push(
            NaiveDate::parse_from_str(parts[0], "%Y-%m-%d").map_err(|_| bad("bad date"))?,
        );
        ledger.exposure.push(num(parts[1])?);
        ledger
            .regimes
            .push(Regime::from_label(parts[2]).ok_or_else(|| bad("unknown regime"))?);
        ledger.defensive_alloc.push(num(parts[3])?);
        ledger.equity_return.push(num(parts[4])?);
        ledger.defensive_return.push(num(parts[5])?);
        ledger.transaction_cost.push(num(parts[6])?);
        ledger.leverage_cost.push(num(parts[7])?);
        ledger.net_return.push(num(parts[8])?);
        ledger.wealth.push(num(parts[9])?);
    }
    Ok((meta, ledger))
}
