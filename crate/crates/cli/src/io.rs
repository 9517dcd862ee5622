//! Curve CSV files and plot-ready tables.

use std::path::Path;

use serde::Serialize;
use slerb_core::fitkit::{mean_std, DecayFit, Outcome, PopulationCurve, Randomization};
use slerb_core::msgates::Target;

use crate::CliError;

const HEADER: [&str; 7] = ["length", "randomization_index", "n00", "n01", "n10", "n11", "target"];

fn target_label(t: Target) -> &'static str {
    match t {
        Target::Ket00 => "00",
        Target::Ket11 => "11",
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Counts are written as integers, exact probabilities with a decimal point
/// and full round-trip precision.
pub fn write_curve(path: &Path, curve: &PopulationCurve) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(HEADER).map_err(|e| io_err(path, e))?;
    for (l, pts) in curve.lengths.iter().zip(&curve.points) {
        for (k, r) in pts.iter().enumerate() {
            let cells: Vec<String> = match r.outcome {
                Outcome::Counts(n) => n.iter().map(u64::to_string).collect(),
                Outcome::Probabilities(p) => p.iter().map(|x| format!("{x:?}")).collect(),
            };
            let mut row = vec![l.to_string(), k.to_string()];
            row.extend(cells);
            row.push(target_label(r.target).to_string());
            w.write_record(&row).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn parse_outcome(cells: &[&str]) -> Result<Outcome, String> {
    if cells.iter().all(|c| c.bytes().all(|b| b.is_ascii_digit())) {
        let mut n = [0u64; 4];
        for (slot, c) in n.iter_mut().zip(cells) {
            *slot = c.parse().map_err(|e| format!("bad count '{c}': {e}"))?;
        }
        Ok(Outcome::Counts(n))
    } else {
        let mut p = [0.0; 4];
        for (slot, c) in p.iter_mut().zip(cells) {
            *slot = c.parse().map_err(|e| format!("bad probability '{c}': {e}"))?;
        }
        Ok(Outcome::Probabilities(p))
    }
}

pub fn read_curve(path: &Path) -> Result<PopulationCurve, CliError> {
    let bad = |line: usize, msg: String| CliError::Config(format!("{}:{line}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let header = rd.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(bad(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut lengths: Vec<usize> = Vec::new();
    let mut points: Vec<Vec<Randomization>> = Vec::new();
    let mut shots = None;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let l: usize = rec[0].parse().map_err(|e| bad(line, format!("bad length: {e}")))?;
        let outcome = parse_outcome(&[&rec[2], &rec[3], &rec[4], &rec[5]]).map_err(|m| bad(line, m))?;
        let target = match &rec[6] {
            "00" => Target::Ket00,
            "11" => Target::Ket11,
            other => return Err(bad(line, format!("unknown target '{other}'"))),
        };
        let s = match outcome {
            Outcome::Counts(n) => n.iter().sum(),
            Outcome::Probabilities(_) => 0,
        };
        if *shots.get_or_insert(s) != s {
            return Err(bad(line, "shot count differs from earlier rows".into()));
        }
        if lengths.last() != Some(&l) {
            lengths.push(l);
            points.push(Vec::new());
        }
        points.last_mut().unwrap().push(Randomization { target, outcome });
    }
    if lengths.is_empty() {
        return Err(bad(2, "no data rows".into()));
    }
    PopulationCurve::new(lengths, points, shots.unwrap_or(0), None)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Mean and standard error per length for each population.
pub fn write_curve_table(path: &Path, curve: &PopulationCurve) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record([
        "length",
        "survival",
        "survival_err",
        "flip",
        "flip_err",
        "leak",
        "leak_err",
    ])
    .map_err(|e| io_err(path, e))?;
    for (i, l) in curve.lengths.iter().enumerate() {
        let ps = curve.populations(i);
        let n = ps.len() as f64;
        let mut row = vec![l.to_string()];
        for k in 0..3 {
            let (m, s) = mean_std(&ps.iter().map(|p| p.as_array()[k]).collect::<Vec<_>>());
            row.push(m.to_string());
            row.push((s / n.sqrt()).to_string());
        }
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Fitted model sampled at every integer length up to `l_max`.
pub fn write_model_table(path: &Path, fit: &DecayFit, l_max: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["length", "survival", "flip", "leak"])
        .map_err(|e| io_err(path, e))?;
    for l in 0..=l_max {
        let p = fit.predict(l);
        w.write_record([
            l.to_string(),
            p.p_survival.to_string(),
            p.p_flip.to_string(),
            p.p_leak.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
