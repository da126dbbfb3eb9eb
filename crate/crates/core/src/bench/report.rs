use serde::{Deserialize, Serialize};

use super::formulas::{efficiency_hybrid, efficiency_mpi, power_per_iteration};
use super::profiles::MachineProfile;
use crate::error::{Error, Result};

/// One measured run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub ranks: usize,
    pub threads: usize,
    pub iterations: usize,
    pub wall_s: f64,
    pub msgs: u64,
    pub bytes: u64,
    pub collectives: u64,
    pub write_ops: u64,
    pub activations: u64,
}

impl RunRecord {
    pub fn resources(&self) -> usize {
        self.ranks * self.threads
    }

    fn time_per_iteration(&self) -> f64 {
        self.wall_s / self.iterations as f64
    }
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    case: &'a str,
    machine: &'a str,
    ranks: usize,
    threads: usize,
    iterations: usize,
    wall_s: String,
    msgs: u64,
    bytes: u64,
    collectives: u64,
    write_ops: u64,
    activations: u64,
    em: String,
    eh: String,
    wh_per_iter: String,
}

pub const REPORT_COLUMNS: [&str; 14] = [
    "case",
    "machine",
    "ranks",
    "threads",
    "iterations",
    "wall_s",
    "msgs",
    "bytes",
    "collectives",
    "write_ops",
    "activations",
    "em",
    "eh",
    "wh_per_iter",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub table: String,
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Usage(format!("records csv: {e}"))
}

pub fn write_records(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

/// Parses records; report columns beyond the record fields are ignored.
pub fn read_records(text: &str) -> Result<Vec<RunRecord>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// Message-passing efficiency against the smallest single-thread run of the
/// same case.
fn em_for(r: &RunRecord, all: &[RunRecord]) -> Option<f64> {
    if r.threads != 1 {
        return None;
    }
    let base = all.iter().filter(|b| b.case == r.case && b.threads == 1).min_by_key(|b| b.ranks)?;
    efficiency_mpi(base.time_per_iteration(), r.time_per_iteration(), base.ranks as f64, r.ranks as f64).ok()
}

/// Hybrid efficiency against the largest single-thread run of the same case
/// that uses no more cores.
fn eh_for(r: &RunRecord, all: &[RunRecord]) -> Option<f64> {
    if r.threads == 1 {
        return None;
    }
    let base = all
        .iter()
        .filter(|b| b.case == r.case && b.threads == 1 && b.resources() <= r.resources())
        .max_by_key(|b| b.ranks)?;
    efficiency_hybrid(base.time_per_iteration(), r.time_per_iteration(), base.resources() as f64, r.resources() as f64)
        .ok()
}

/// CSV and aligned text table, one row per record and profile.
pub fn emit_report(records: &[RunRecord], profiles: &[MachineProfile]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Usage("no run records to report".into()));
    }
    if profiles.is_empty() {
        return Err(Error::Usage("no machine profiles to report against".into()));
    }
    for r in records {
        if !(r.wall_s > 0.0 && r.wall_s.is_finite()) || r.iterations == 0 {
            return Err(Error::Usage(format!(
                "record for {} ({} ranks x {} threads) needs wall_s > 0 and iterations >= 1",
                r.case, r.ranks, r.threads
            )));
        }
    }
    let fmt = |v: Option<f64>, places: usize| v.map_or(String::new(), |v| format!("{v:.places$}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut cells: Vec<Vec<String>> = vec![REPORT_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for p in profiles {
        for r in records {
            let nodes = p.nodes_for(r.resources()) as f64;
            let row = Row {
                case: &r.case,
                machine: p.name,
                ranks: r.ranks,
                threads: r.threads,
                iterations: r.iterations,
                wall_s: format!("{:.6}", r.wall_s),
                msgs: r.msgs,
                bytes: r.bytes,
                collectives: r.collectives,
                write_ops: r.write_ops,
                activations: r.activations,
                em: fmt(em_for(r, records), 4),
                eh: fmt(eh_for(r, records), 4),
                wh_per_iter: fmt(power_per_iteration(r.wall_s, p.power_per_node, nodes, r.iterations as f64).ok(), 3),
            };
            cells.push(vec![
                row.case.to_string(),
                row.machine.to_string(),
                row.ranks.to_string(),
                row.threads.to_string(),
                row.iterations.to_string(),
                row.wall_s.clone(),
                row.msgs.to_string(),
                row.bytes.to_string(),
                row.collectives.to_string(),
                row.write_ops.to_string(),
                row.activations.to_string(),
                row.em.clone(),
                row.eh.clone(),
                row.wh_per_iter.clone(),
            ]);
            w.serialize(&row).map_err(csv_error)?;
        }
    }
    let csv = String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)?;
    let widths: Vec<usize> =
        (0..REPORT_COLUMNS.len()).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut table = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        table.push_str(line.join("  ").trim_end());
        table.push('\n');
    }
    Ok(Report { csv, table })
}
