//! Plain-text matrix and sample files.
//!
//! A matrix file has optional `# key value` metadata lines, then a line
//! `m1 m2`, then `m1` lines of `m2` whitespace-separated decimals. Truth files
//! carry the keys `r`, `gamma`, `tau`, `generator` and `seed`.
//!
//! A sample file has `# scheme` and `# seed` metadata, a line `m1 m2 n`, then
//! `n` lines `i j y` with zero-based indices and labels `1` or `-1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use obmc_core::{Generator, Matrix, SampleSet, SamplingScheme, Shape, TruthMatrix};

use crate::error::{Error, Result};

pub type Metadata = BTreeMap<String, String>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits a file into its `#` metadata and its numbered data lines.
fn split(text: &str, path: &Path) -> Result<(Metadata, Vec<(usize, String)>)> {
    let mut meta = Metadata::new();
    let mut data = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let (key, value) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            if key.is_empty() {
                return Err(Error::parse(path, idx + 1, "empty metadata key"));
            }
            meta.insert(key.to_string(), value.trim().to_string());
        } else {
            data.push((idx + 1, line.to_string()));
        }
    }
    Ok((meta, data))
}

fn fields<T: std::str::FromStr>(
    line: &str,
    count: usize,
    path: &Path,
    at: usize,
) -> Result<Vec<T>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != count {
        return Err(Error::parse(
            path,
            at,
            format!("expected {count} fields, found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| Error::parse(path, at, format!("cannot parse `{p}`")))
        })
        .collect()
}

pub fn format_matrix(m: &Matrix, meta: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} {v}");
    }
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix, meta: &[(&str, String)]) -> Result<()> {
    write(path, &format_matrix(m, meta))
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<(Matrix, Metadata)> {
    let (meta, data) = split(text, path)?;
    let Some(((at, dims), rows)) = data.split_first().map(|(d, r)| (d.clone(), r)) else {
        return Err(Error::parse(path, 1, "missing `m1 m2` line"));
    };
    let dims: Vec<usize> = fields(&dims, 2, path, at)?;
    let (m1, m2) = (dims[0], dims[1]);
    if m1 == 0 || m2 == 0 {
        return Err(Error::parse(path, at, "dimensions must be positive"));
    }
    if rows.len() != m1 {
        let at = rows.last().map_or(at, |r| r.0);
        return Err(Error::parse(
            path,
            at,
            format!("expected {m1} rows, found {}", rows.len()),
        ));
    }
    let mut m = Matrix::zeros(m1, m2);
    for (i, (at, line)) in rows.iter().enumerate() {
        let values: Vec<f64> = fields(line, m2, path, *at)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::parse(path, *at, format!("non-finite value {v}")));
        }
        for (j, v) in values.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok((m, meta))
}

pub fn read_matrix(path: &Path) -> Result<(Matrix, Metadata)> {
    parse_matrix(&read(path)?, path)
}

pub fn truth_metadata(t: &TruthMatrix) -> Vec<(&'static str, String)> {
    vec![
        ("r", t.rank_budget.to_string()),
        ("gamma", format!("{}", t.gamma)),
        ("tau", format!("{}", t.margin_tau)),
        ("generator", t.generator.name().to_string()),
        ("seed", t.seed.to_string()),
    ]
}

pub fn write_truth(path: &Path, t: &TruthMatrix) -> Result<()> {
    write_matrix(path, &t.entries, &truth_metadata(t))
}

/// Reads a truth file; all five metadata keys are required.
pub fn read_truth(path: &Path) -> Result<TruthMatrix> {
    let (entries, meta) = read_matrix(path)?;
    let get = |key: &str| {
        meta.get(key)
            .ok_or_else(|| Error::parse(path, 1, format!("missing `# {key}` metadata")))
    };
    let bad = |key: &str| Error::parse(path, 1, format!("invalid `# {key}` metadata"));
    let gamma: f64 = get("gamma")?.parse().map_err(|_| bad("gamma"))?;
    let margin_tau: f64 = get("tau")?.parse().map_err(|_| bad("tau"))?;
    if !(gamma > 0.0 && gamma.is_finite()) || !(margin_tau >= 0.0) {
        return Err(bad("gamma"));
    }
    Ok(TruthMatrix {
        rank_budget: get("r")?.parse().map_err(|_| bad("r"))?,
        gamma,
        margin_tau,
        generator: Generator::from_name(get("generator")?).ok_or_else(|| bad("generator"))?,
        seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
        entries,
    })
}

pub fn format_samples(s: &SampleSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scheme {}", s.scheme().name());
    let _ = writeln!(out, "# seed {}", s.seed());
    let _ = writeln!(out, "{} {} {}", s.shape().rows(), s.shape().cols(), s.len());
    for ((i, j), y) in s.iter() {
        let _ = writeln!(out, "{i} {j} {y}");
    }
    out
}

pub fn write_samples(path: &Path, s: &SampleSet) -> Result<()> {
    write(path, &format_samples(s))
}

pub fn parse_samples(text: &str, path: &Path) -> Result<SampleSet> {
    let (meta, data) = split(text, path)?;
    let scheme = match meta.get("scheme") {
        Some(name) => SamplingScheme::from_name(name)
            .ok_or_else(|| Error::parse(path, 1, format!("unknown sampling scheme `{name}`")))?,
        None => SamplingScheme::IidUniform,
    };
    let seed = match meta.get("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::parse(path, 1, "invalid `# seed` metadata"))?,
        None => 0,
    };
    let Some(((at, dims), rows)) = data.split_first().map(|(d, r)| (d.clone(), r)) else {
        return Err(Error::parse(path, 1, "missing `m1 m2 n` line"));
    };
    let dims: Vec<usize> = fields(&dims, 3, path, at)?;
    if rows.len() != dims[2] {
        return Err(Error::parse(
            path,
            at,
            format!("expected {} samples, found {}", dims[2], rows.len()),
        ));
    }
    let shape = Shape::new(dims[0], dims[1]).map_err(|e| Error::parse(path, at, e.to_string()))?;
    let mut indices = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (at, line) in rows {
        let v: Vec<i64> = fields(line, 3, path, *at)?;
        if v[0] < 0 || v[1] < 0 {
            return Err(Error::parse(path, *at, "negative index"));
        }
        if v[2] != 1 && v[2] != -1 {
            return Err(Error::parse(path, *at, "label must be 1 or -1"));
        }
        indices.push((v[0] as usize, v[1] as usize));
        labels.push(v[2] as i8);
    }
    SampleSet::new(shape, indices, labels, scheme, seed)
        .map_err(|e| Error::parse(path, at, e.to_string()))
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    parse_samples(&read(path)?, path)
}
