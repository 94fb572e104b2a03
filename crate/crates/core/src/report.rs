//! Metric files: per-round CSV, PAGE action trajectories, run summaries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::orchestrator::{Algorithm, ExperimentConfig, ReplicatedSummary, RoundRecord};

pub const ROUND_COLUMNS: [&str; 12] = [
    "t",
    "global_acc",
    "global_loss",
    "mean_local_acc",
    "var_local_acc",
    "r_cs",
    "mean_r_i",
    "min_p",
    "max_p",
    "mean_alpha",
    "mean_eta",
    "wall_ms",
];

pub const TRAJECTORY_COLUMNS: [&str; 5] = ["t", "client", "weight", "alpha", "eta"];

/// One line of the per-round CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub t: usize,
    pub global_acc: f64,
    pub global_loss: f64,
    pub mean_local_acc: f64,
    pub var_local_acc: f64,
    pub r_cs: f64,
    pub mean_r_i: f64,
    pub min_p: f64,
    pub max_p: f64,
    pub mean_alpha: f64,
    pub mean_eta: f64,
    pub wall_ms: f64,
}

impl From<&RoundRecord> for RoundRow {
    fn from(r: &RoundRecord) -> Self {
        let n = r.weights.len() as f64;
        Self {
            t: r.t,
            global_acc: r.global_acc,
            global_loss: r.global_loss,
            mean_local_acc: r.mean_local_acc,
            var_local_acc: r.var_local_acc,
            r_cs: r.r_cs,
            mean_r_i: r.mean_r_i,
            min_p: r.weights.iter().copied().fold(f64::INFINITY, f64::min),
            max_p: r.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_alpha: r.alphas.iter().sum::<usize>() as f64 / n,
            mean_eta: r.etas.iter().sum::<f64>() / n,
            wall_ms: r.wall_ms,
        }
    }
}

/// One client's action in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub client: usize,
    pub weight: f64,
    pub alpha: usize,
    pub eta: f64,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(e.to_string())
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, columns: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_error)?;
    if !headers.iter().eq(columns.iter().copied()) {
        return Err(Error::Format(format!("unexpected CSV header {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Per-round CSV with the columns of [`ROUND_COLUMNS`]. An empty history
/// still gets a header line.
pub fn write_rounds_csv<W: Write>(out: W, history: &[RoundRecord]) -> Result<()> {
    if history.is_empty() {
        let mut w = csv_writer(out);
        w.write_record(ROUND_COLUMNS).map_err(csv_error)?;
        w.flush()?;
        return Ok(());
    }
    write_rows(out, history.iter().map(RoundRow::from))
}

pub fn read_rounds_csv<R: Read>(input: R) -> Result<Vec<RoundRow>> {
    read_rows(input, &ROUND_COLUMNS)
}

/// Weights and local schedules of every client in every round, long format.
pub fn write_trajectory_csv<W: Write>(out: W, history: &[RoundRecord]) -> Result<()> {
    let rows = history.iter().flat_map(|r| {
        (0..r.weights.len()).map(move |i| TrajectoryRow {
            t: r.t,
            client: i,
            weight: r.weights[i],
            alpha: r.alphas[i],
            eta: r.etas[i],
        })
    });
    let mut rows = rows.peekable();
    if rows.peek().is_none() {
        let mut w = csv_writer(out);
        w.write_record(TRAJECTORY_COLUMNS).map_err(csv_error)?;
        w.flush()?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    read_rows(input, &TRAJECTORY_COLUMNS)
}

/// SHA-256 of the config's canonical JSON, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

pub const SUMMARY_SCHEMA: u32 = 1;

/// Summary document written next to the CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDoc {
    pub schema_version: u32,
    pub config_hash: String,
    #[serde(flatten)]
    pub summary: ReplicatedSummary,
}

impl SummaryDoc {
    pub fn new(cfg: &ExperimentConfig, summary: ReplicatedSummary) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA,
            config_hash: config_hash(cfg),
            summary,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("summary: {e}")))?;
        if doc.schema_version != SUMMARY_SCHEMA {
            return Err(Error::Format(format!("unsupported summary schema {}", doc.schema_version)));
        }
        Ok(doc)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.summary.algorithm
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` for fewer than two points, mismatched
/// lengths or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}
