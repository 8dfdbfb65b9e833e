//! Sweep CSV rows and log-log rate tables.
//!
//! Floats are written as `{:.16e}`, i.e. 17 significant digits, which
//! round-trips every `f64`. Aggregate rows put `mean;stderr` in the `excess`
//! and `frob_err_sq_norm` columns, means in `risk`, `bayes_risk` and
//! `margin_tau`, leave `replicate`, `seed` and `iterations` blank, and report
//! `succeeded/total` under `converged`. Failed replicates leave the metric
//! columns blank and say `failed` under `converged`.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use obmc_core::{fit_rate, Estimator, RateFit};

use crate::config::{SweepConfig, TruthMode};
use crate::error::{Error, Result};
use crate::experiments::CellResult;

pub const SWEEP_HEADER: [&str; 20] = [
    "row_kind",
    "estimator",
    "m1",
    "m2",
    "r",
    "gamma",
    "margin_tau",
    "generator",
    "sampling_scheme",
    "n",
    "replicate",
    "seed",
    "lambda_used",
    "excess",
    "risk",
    "bayes_risk",
    "frob_err_sq_norm",
    "iterations",
    "converged",
    "runtime_ms",
];

pub const RATE_HEADER: [&str; 15] = [
    "estimator",
    "m1",
    "m2",
    "r",
    "gamma",
    "points",
    "excess_slope",
    "excess_intercept",
    "excess_r_squared",
    "excess_dropped",
    "frob_slope",
    "frob_intercept",
    "frob_r_squared",
    "frob_dropped",
    "min_n",
];

/// Formats a float with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn generator_label(config: &SweepConfig) -> String {
    match config.truth_mode {
        TruthMode::Fresh => config.generator.name().to_string(),
        TruthMode::Fixed => format!("{}@fixed_truth", config.generator.name()),
    }
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes the header and, per cell in the given order, its replicate rows
/// followed by its aggregate row.
pub fn write_sweep(out: impl Write, config: &SweepConfig, cells: &[CellResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(to_io)?;
    let generator = generator_label(config);
    let scheme = config.sampling_scheme.name();
    for cell in cells {
        let k = &cell.key;
        let prefix = |kind: &str, tau: f64| {
            vec![
                kind.to_string(),
                k.estimator.name().to_string(),
                k.shape.rows().to_string(),
                k.shape.cols().to_string(),
                k.rank.to_string(),
                float(k.gamma),
                float(tau),
                generator.clone(),
                scheme.to_string(),
                k.n.to_string(),
            ]
        };
        for rec in &cell.records {
            let mut row = prefix("replicate", rec.margin_tau);
            row.extend([
                rec.replicate.to_string(),
                rec.seed.to_string(),
                float(rec.lambda_used),
            ]);
            match &rec.metrics {
                Some(m) => row.extend([
                    float(m.excess),
                    float(m.risk),
                    float(m.bayes_risk),
                    float(m.frob_error_sq_normalized),
                    m.iterations.to_string(),
                    m.converged.to_string(),
                    m.runtime_ms.to_string(),
                ]),
                None => row.extend(["", "", "", "", "", "failed", ""].map(String::from)),
            }
            w.write_record(&row).map_err(to_io)?;
        }
        let a = &cell.aggregate;
        let lambda = cell.records.first().map_or(0.0, |r| r.lambda_used);
        let mut row = prefix("aggregate", a.mean_margin_tau);
        row.extend([
            String::new(),
            String::new(),
            float(lambda),
            format!("{};{}", float(a.mean_excess), float(a.stderr_excess)),
            float(a.mean_risk),
            float(a.mean_bayes_risk),
            format!("{};{}", float(a.mean_frob), float(a.stderr_frob)),
            String::new(),
            format!("{}/{}", a.succeeded, a.total),
            String::new(),
        ]);
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()
}

/// One aggregate row read back from a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub estimator: Estimator,
    pub m1: usize,
    pub m2: usize,
    pub r: usize,
    pub gamma: f64,
    pub n: usize,
    pub mean_excess: f64,
    pub stderr_excess: f64,
    pub mean_frob: f64,
    pub stderr_frob: f64,
}

impl From<&CellResult> for AggregateRow {
    fn from(c: &CellResult) -> Self {
        Self {
            estimator: c.key.estimator,
            m1: c.key.shape.rows(),
            m2: c.key.shape.cols(),
            r: c.key.rank,
            gamma: c.key.gamma,
            n: c.key.n,
            mean_excess: c.aggregate.mean_excess,
            stderr_excess: c.aggregate.stderr_excess,
            mean_frob: c.aggregate.mean_frob,
            stderr_frob: c.aggregate.stderr_frob,
        }
    }
}

/// Reads the aggregate rows of a sweep CSV.
pub fn read_aggregates(input: impl Read, path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::parse(path, 1, "not a sweep CSV header"));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if &record[0] != "aggregate" {
            continue;
        }
        let bad = |what: &str| Error::parse(path, line, format!("invalid {what}"));
        let int = |i: usize| record[i].parse::<usize>().map_err(|_| bad(SWEEP_HEADER[i]));
        let real = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let pair = |i: usize| -> Result<(f64, f64)> {
            let (m, s) = record[i]
                .split_once(';')
                .ok_or_else(|| bad(SWEEP_HEADER[i]))?;
            Ok((real(m, SWEEP_HEADER[i])?, real(s, SWEEP_HEADER[i])?))
        };
        let estimator = Estimator::from_name(&record[1]).ok_or_else(|| bad("estimator"))?;
        let (mean_excess, stderr_excess) = pair(13)?;
        let (mean_frob, stderr_frob) = pair(16)?;
        rows.push(AggregateRow {
            estimator,
            m1: int(2)?,
            m2: int(3)?,
            r: int(4)?,
            gamma: real(&record[5], "gamma")?,
            n: int(9)?,
            mean_excess,
            stderr_excess,
            mean_frob,
            stderr_frob,
        });
    }
    Ok(rows)
}

/// Rate fits of one `(estimator, shape, r, gamma)` group across `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub estimator: Estimator,
    pub m1: usize,
    pub m2: usize,
    pub r: usize,
    pub gamma: f64,
    /// `(n, mean_excess, mean_frob)` in increasing `n`.
    pub points: Vec<(usize, f64, f64)>,
    /// `None` when fewer than three positive points remain.
    pub excess: Option<RateFit>,
    pub frob: Option<RateFit>,
}

fn rate_or_warn(points: &[(f64, f64)], what: &str) -> Option<RateFit> {
    match fit_rate(points) {
        Ok(fit) => Some(fit),
        Err(e) => {
            log::warn!("no {what} rate: {e}");
            None
        }
    }
}

/// Groups aggregate rows by everything but `n` and fits both rates.
pub fn rate_rows(rows: &[AggregateRow]) -> Vec<RateRow> {
    type Group = (Estimator, usize, usize, usize, u64);
    let mut groups: BTreeMap<Group, (f64, Vec<(usize, f64, f64)>)> = BTreeMap::new();
    for row in rows {
        // Order gammas numerically: bits of a positive float sort like the value.
        let key = (row.estimator, row.m1, row.m2, row.r, row.gamma.to_bits());
        let entry = groups.entry(key).or_insert_with(|| (row.gamma, Vec::new()));
        entry.1.push((row.n, row.mean_excess, row.mean_frob));
    }
    groups
        .into_iter()
        .map(|((estimator, m1, m2, r, _), (gamma, mut points))| {
            points.sort_by_key(|p| p.0);
            let excess: Vec<(f64, f64)> = points.iter().map(|p| (p.0 as f64, p.1)).collect();
            let frob: Vec<(f64, f64)> = points.iter().map(|p| (p.0 as f64, p.2)).collect();
            RateRow {
                estimator,
                m1,
                m2,
                r,
                gamma,
                excess: rate_or_warn(&excess, "excess"),
                frob: rate_or_warn(&frob, "estimation error"),
                points,
            }
        })
        .collect()
}

pub fn write_rates(out: impl Write, rows: &[RateRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_HEADER).map_err(to_io)?;
    let fit_cols = |fit: &Option<RateFit>| match fit {
        Some(f) => [
            float(f.slope),
            float(f.intercept),
            float(f.r_squared),
            f.dropped.to_string(),
        ],
        None => Default::default(),
    };
    for row in rows {
        let mut rec = vec![
            row.estimator.name().to_string(),
            row.m1.to_string(),
            row.m2.to_string(),
            row.r.to_string(),
            float(row.gamma),
            row.points.len().to_string(),
        ];
        rec.extend(fit_cols(&row.excess));
        rec.extend(fit_cols(&row.frob));
        rec.push(
            row.points
                .first()
                .map_or(String::new(), |p| p.0.to_string()),
        );
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush()
}
