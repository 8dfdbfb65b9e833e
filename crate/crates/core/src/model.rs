//! Observation model: logistic link, ground-truth generators, sampling and
//! the averaged negative log-likelihood with its gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Philox;
use crate::Matrix;

/// Matrix dimensions `m1 x m2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shape {
    m1: usize,
    m2: usize,
}

impl Shape {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::invalid("shape dimensions must be positive"));
        }
        Ok(Self { m1, m2 })
    }

    pub fn rows(&self) -> usize {
        self.m1
    }

    pub fn cols(&self) -> usize {
        self.m2
    }

    /// `d = m1 + m2`.
    pub fn dim_sum(&self) -> usize {
        self.m1 + self.m2
    }

    /// `M = max(m1, m2)`.
    pub fn max_dim(&self) -> usize {
        self.m1.max(self.m2)
    }

    /// `m = min(m1, m2)`.
    pub fn min_dim(&self) -> usize {
        self.m1.min(self.m2)
    }

    pub fn entry_count(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn of(x: &Matrix) -> Result<Self> {
        Self::new(x.nrows(), x.ncols())
    }

    pub(crate) fn check(&self, x: &Matrix, what: &str) -> Result<()> {
        if x.nrows() != self.m1 || x.ncols() != self.m2 {
            return Err(Error::invalid(alloc::format!(
                "{what} is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                self.m1,
                self.m2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    GaussianFactor,
    BlockSign,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::GaussianFactor => "gaussian_factor",
            Generator::BlockSign => "block_sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gaussian_factor" => Some(Generator::GaussianFactor),
            "block_sign" => Some(Generator::BlockSign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SamplingScheme {
    /// `n` indices drawn uniformly with replacement.
    #[default]
    IidUniform,
    /// Each entry kept independently with probability `n / (m1 m2)`.
    BernoulliMask,
}

impl SamplingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingScheme::IidUniform => "iid_uniform",
            SamplingScheme::BernoulliMask => "bernoulli_mask",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "iid_uniform" => Some(SamplingScheme::IidUniform),
            "bernoulli_mask" => Some(SamplingScheme::BernoulliMask),
            _ => None,
        }
    }
}

/// Ground-truth parameter matrix with the bounds it was generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthMatrix {
    pub entries: Matrix,
    pub rank_budget: usize,
    /// Entrywise amplitude bound.
    pub gamma: f64,
    /// Smallest absolute entry; zero means no margin.
    pub margin_tau: f64,
    pub generator: Generator,
    pub seed: u64,
}

impl TruthMatrix {
    pub fn shape(&self) -> Shape {
        Shape {
            m1: self.entries.nrows(),
            m2: self.entries.ncols(),
        }
    }
}

/// Observed `(index, label)` pairs. Labels are `+1` or `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    indices: Vec<(usize, usize)>,
    labels: Vec<i8>,
    scheme: SamplingScheme,
    seed: u64,
    shape: Shape,
}

impl SampleSet {
    pub fn new(
        shape: Shape,
        indices: Vec<(usize, usize)>,
        labels: Vec<i8>,
        scheme: SamplingScheme,
        seed: u64,
    ) -> Result<Self> {
        if indices.len() != labels.len() {
            return Err(Error::invalid("indices and labels differ in length"));
        }
        if let Some(&(r, c)) = indices
            .iter()
            .find(|&&(r, c)| r >= shape.rows() || c >= shape.cols())
        {
            return Err(Error::invalid(alloc::format!(
                "index ({r}, {c}) outside {}x{}",
                shape.rows(),
                shape.cols()
            )));
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::invalid("labels must be +1 or -1"));
        }
        if scheme == SamplingScheme::BernoulliMask {
            let mut seen = vec![false; shape.entry_count()];
            for &(r, c) in &indices {
                let k = r * shape.cols() + c;
                if seen[k] {
                    return Err(Error::invalid("bernoulli_mask samples must be distinct"));
                }
                seen[k] = true;
            }
        }
        Ok(Self {
            indices,
            labels,
            scheme,
            seed,
            shape,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), i8)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.labels.iter().copied())
    }

    /// The samples at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        if positions.iter().any(|&p| p >= self.len()) {
            return Err(Error::invalid("subset position out of range"));
        }
        Ok(Self {
            indices: positions.iter().map(|&p| self.indices[p]).collect(),
            labels: positions.iter().map(|&p| self.labels[p]).collect(),
            scheme: self.scheme,
            seed: self.seed,
            shape: self.shape,
        })
    }

    pub fn tally(&self) -> Tally {
        Tally::new(self)
    }
}

/// Logistic link `e^x / (1 + e^x)`.
pub fn logistic_link(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid("logistic_link needs a finite input"));
    }
    Ok(sigmoid(x))
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x < 0.0 {
        let e = libm::exp(x);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(-x))
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Draws a ground-truth matrix of rank at most `rank` with `max |X| <= gamma`.
///
/// `gaussian_factor` rescales `A B^T` (standard normal factors of width `rank`)
/// so its largest entry is exactly `gamma`; attempt `k` draws from
/// `Philox::stream(seed, k)`. `block_sign` splits rows and columns into `rank`
/// contiguous, near-equal groups and fills each block with `+-gamma` from a
/// random `rank x rank` sign table, redrawn (attempt `k` from the same
/// streams) until the table is nonsingular. Its margin is `gamma` exactly.
pub fn generate_truth(
    shape: Shape,
    rank: usize,
    gamma: f64,
    generator: Generator,
    seed: u64,
) -> Result<TruthMatrix> {
    if rank == 0 || rank > shape.min_dim() {
        return Err(Error::invalid(alloc::format!(
            "rank {rank} must lie in 1..={}",
            shape.min_dim()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be positive and finite"));
    }
    let (m1, m2) = (shape.rows(), shape.cols());
    let (entries, margin_tau) = match generator {
        Generator::GaussianFactor => {
            let mut attempt = 0u64;
            loop {
                let mut g = Philox::stream(seed, attempt);
                let a = Matrix::from_fn(m1, rank, |_, _| g.normal());
                let b = Matrix::from_fn(m2, rank, |_, _| g.normal());
                let p = &a * b.transpose();
                let peak = p.amax();
                if peak > 0.0 && peak.is_finite() {
                    let x = p * (gamma / peak);
                    let tau = x.iter().fold(f64::INFINITY, |t, v| t.min(v.abs()));
                    break (x, tau);
                }
                attempt += 1;
            }
        }
        Generator::BlockSign => {
            let mut attempt = 0u64;
            let table = loop {
                let mut g = Philox::stream(seed, attempt);
                let t: Vec<i64> = (0..rank * rank)
                    .map(|_| if g.sign() > 0.0 { 1 } else { -1 })
                    .collect();
                if integer_full_rank(&t, rank) {
                    break t;
                }
                attempt += 1;
            };
            let x = Matrix::from_fn(m1, m2, |i, j| {
                let gi = i * rank / m1;
                let gj = j * rank / m2;
                gamma * table[gi * rank + gj] as f64
            });
            (x, gamma)
        }
    };
    Ok(TruthMatrix {
        entries,
        rank_budget: rank,
        gamma,
        margin_tau,
        generator,
        seed,
    })
}

/// Exact nonsingularity test for a small integer matrix (Bareiss elimination).
fn integer_full_rank(table: &[i64], n: usize) -> bool {
    let mut a: Vec<i128> = table.iter().map(|&v| i128::from(v)).collect();
    let mut prev: i128 = 1;
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| a[i * n + k] != 0) else {
            return false;
        };
        if p != k {
            for j in 0..n {
                a.swap(p * n + j, k * n + j);
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
            a[i * n + k] = 0;
        }
        prev = a[k * n + k];
    }
    true
}

/// Draws labelled observations from the logistic model.
///
/// Index selection uses `Philox::stream(seed, 0)` and labels use
/// `Philox::stream(seed, 1)`; a label is `+1` when a uniform draw falls below
/// `f(X*_w)`. Under `bernoulli_mask` entries are visited in row-major order.
pub fn sample_observations(
    truth: &TruthMatrix,
    n: usize,
    scheme: SamplingScheme,
    seed: u64,
) -> Result<SampleSet> {
    let shape = truth.shape();
    let total = shape.entry_count();
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if scheme == SamplingScheme::BernoulliMask && n > total {
        return Err(Error::invalid(alloc::format!(
            "bernoulli_mask needs n <= m1*m2 = {total}, got {n}"
        )));
    }
    let mut pick = Philox::stream(seed, 0);
    let mut coin = Philox::stream(seed, 1);
    let indices: Vec<(usize, usize)> = match scheme {
        SamplingScheme::IidUniform => (0..n)
            .map(|_| {
                let k = pick.below(total as u64) as usize;
                (k / shape.cols(), k % shape.cols())
            })
            .collect(),
        SamplingScheme::BernoulliMask => {
            let p = n as f64 / total as f64;
            (0..total)
                .filter(|_| pick.next_f64() < p)
                .map(|k| (k / shape.cols(), k % shape.cols()))
                .collect()
        }
    };
    let labels = indices
        .iter()
        .map(|&(r, c)| {
            if coin.next_f64() < sigmoid(truth.entries[(r, c)]) {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(SampleSet {
        indices,
        labels,
        scheme,
        seed,
        shape,
    })
}

/// `-(1/n) * loglik(X)`, accumulated sample by sample.
pub fn neg_log_likelihood(x: &Matrix, samples: &SampleSet) -> Result<f64> {
    samples.shape.check(x, "parameter matrix")?;
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("parameter matrix has non-finite entries"));
    }
    let total: f64 = samples
        .iter()
        .map(|(w, y)| softplus(-f64::from(y) * x[w]))
        .sum();
    Ok(total / samples.len() as f64)
}

/// Gradient of [`neg_log_likelihood`]; zero off the sampled entries.
pub fn nll_gradient(x: &Matrix, samples: &SampleSet) -> Result<Matrix> {
    samples.shape.check(x, "parameter matrix")?;
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    let inv_n = 1.0 / samples.len() as f64;
    for (w, y) in samples.iter() {
        let target = if y > 0 { 1.0 } else { 0.0 };
        g[w] += (sigmoid(x[w]) - target) * inv_n;
    }
    Ok(g)
}

/// Label counts per distinct sampled entry.
///
/// The solvers evaluate the likelihood through this table: each distinct entry
/// costs one link evaluation no matter how often it was drawn.
#[derive(Debug, Clone)]
pub struct Tally {
    shape: Shape,
    n: usize,
    cells: Vec<TallyCell>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TallyCell {
    pub row: usize,
    pub col: usize,
    pub pos: f64,
    pub neg: f64,
}

impl Tally {
    fn new(samples: &SampleSet) -> Self {
        let mut keyed: Vec<(usize, i8)> = samples
            .iter()
            .map(|((r, c), y)| (c * samples.shape.rows() + r, y))
            .collect();
        keyed.sort_unstable();
        let mut cells: Vec<TallyCell> = Vec::new();
        let mut last = usize::MAX;
        for (k, y) in keyed {
            if k != last {
                cells.push(TallyCell {
                    row: k % samples.shape.rows(),
                    col: k / samples.shape.rows(),
                    pos: 0.0,
                    neg: 0.0,
                });
                last = k;
            }
            let cell = cells.last_mut().expect("pushed above");
            if y > 0 {
                cell.pos += 1.0;
            } else {
                cell.neg += 1.0;
            }
        }
        Self {
            shape: samples.shape,
            n: samples.len(),
            cells,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[TallyCell] {
        &self.cells
    }

    /// Largest number of draws landing on one entry.
    pub fn max_multiplicity(&self) -> f64 {
        self.cells
            .iter()
            .fold(0.0, |m, c| f64::max(m, c.pos + c.neg))
    }

    /// Averaged negative log-likelihood given the value at each tallied entry.
    pub fn loss_with(&self, value_at: impl Fn(&TallyCell) -> f64) -> f64 {
        let total: f64 = self
            .cells
            .iter()
            .map(|c| {
                let x = value_at(c);
                c.pos * softplus(-x) + c.neg * softplus(x)
            })
            .sum();
        total / self.n as f64
    }

    pub fn loss(&self, x: &Matrix) -> f64 {
        self.loss_with(|c| x[(c.row, c.col)])
    }

    /// Per-cell derivative `((pos + neg) f(x) - pos) / n`.
    pub fn cell_gradient(&self, cell: &TallyCell, x: f64) -> f64 {
        ((cell.pos + cell.neg) * sigmoid(x) - cell.pos) / self.n as f64
    }

    pub fn gradient(&self, x: &Matrix) -> Matrix {
        let mut g = Matrix::zeros(self.shape.rows(), self.shape.cols());
        for c in &self.cells {
            g[(c.row, c.col)] = self.cell_gradient(c, x[(c.row, c.col)]);
        }
        g
    }
}
