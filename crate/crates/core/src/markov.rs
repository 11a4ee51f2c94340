//! Multiple Markov chains: alphabets, sequences, transition counting,
//! maximum-likelihood estimation, simulation, and entropy computations.
//!
//! Symbols are dense indices `0..m`; mapping user-facing labels (letters,
//! gray levels) to indices is left to callers. A context is the tuple of
//! the `k` symbols preceding a position, oldest first. Its dense index
//! treats the oldest symbol as the most significant digit, so lexicographic
//! context order equals index order.

use std::fmt::Write as _;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Hard cap on transition-table size (`m^k * m` entries).
const MAX_TABLE_ENTRIES: usize = 1 << 28;

/// Iteration budget for the stationary-distribution power iteration.
const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// L1 residual below which the power iteration is considered converged.
const STATIONARY_TOL: f64 = 1e-12;

/// Row-sum tolerance when validating probability rows.
const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("alphabet must have at least 2 symbols, got {m}")]
    InvalidAlphabet { m: usize },
    #[error("symbol {symbol} at position {position} is outside alphabet of size {m}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        m: usize,
    },
    #[error("transition table for m={m}, k={k} exceeds the size cap")]
    ModelTooLarge { m: usize, k: usize },
    #[error("context has length {got}, expected {expected}")]
    ContextLength { expected: usize, got: usize },
    #[error("row {row} is not a probability vector (sum {sum})")]
    InvalidRow { row: usize, sum: f64 },
    #[error("model has {got} rows, expected {expected}")]
    RowCount { expected: usize, got: usize },
    #[error("operands use different alphabets ({left} vs {right} symbols)")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("distributions have different lengths ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("stationary distribution did not converge within {iterations} iterations")]
    StationaryNoConvergence { iterations: usize },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// An alphabet of `m` symbols, identified with the indices `0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    m: usize,
}

impl Alphabet {
    pub fn new(m: usize) -> Result<Self, MarkovError> {
        if m < 2 {
            return Err(MarkovError::InvalidAlphabet { m });
        }
        Ok(Self { m })
    }

    pub fn size(&self) -> usize {
        self.m
    }
}

/// A finite sequence of symbols over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeq {
    alphabet: Alphabet,
    symbols: Vec<usize>,
}

impl SymbolSeq {
    pub fn new(alphabet: Alphabet, symbols: Vec<usize>) -> Result<Self, MarkovError> {
        for (position, &symbol) in symbols.iter().enumerate() {
            if symbol >= alphabet.size() {
                return Err(MarkovError::SymbolOutOfRange {
                    position,
                    symbol,
                    m: alphabet.size(),
                });
            }
        }
        Ok(Self { alphabet, symbols })
    }

    pub fn empty(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            symbols: Vec::new(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }
}

/// A tuple of `k` symbols preceding a position, oldest first. `k = 0` gives
/// the empty context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    symbols: Vec<usize>,
}

impl Context {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    pub fn empty() -> Self {
        Self {
            symbols: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Dense index with the oldest symbol as the most significant digit.
    pub fn index(&self, m: usize) -> Result<usize, MarkovError> {
        let mut idx = 0usize;
        for (position, &symbol) in self.symbols.iter().enumerate() {
            if symbol >= m {
                return Err(MarkovError::SymbolOutOfRange {
                    position,
                    symbol,
                    m,
                });
            }
            idx = idx * m + symbol;
        }
        Ok(idx)
    }

    /// Inverse of [`Context::index`] for a context of length `k`.
    pub fn from_index(mut index: usize, m: usize, k: usize) -> Self {
        let mut symbols = vec![0usize; k];
        for slot in symbols.iter_mut().rev() {
            *slot = index % m;
            index /= m;
        }
        Self { symbols }
    }
}

/// Number of contexts `m^k`, guarded so that the full table `m^k * m`
/// stays below the size cap.
fn context_count(m: usize, k: usize) -> Result<usize, MarkovError> {
    let mut count = 1usize;
    for _ in 0..k {
        count = count
            .checked_mul(m)
            .ok_or(MarkovError::ModelTooLarge { m, k })?;
    }
    match count.checked_mul(m) {
        Some(table) if table <= MAX_TABLE_ENTRIES => Ok(count),
        _ => Err(MarkovError::ModelTooLarge { m, k }),
    }
}

/// Slides a context index one symbol forward: drops the oldest symbol and
/// appends `symbol`.
pub(crate) fn slide_context(ctx: usize, symbol: usize, m: usize, contexts: usize) -> usize {
    (ctx * m + symbol) % contexts
}

/// Occurrence counts `n(i|j)` of symbol `i` after context `j`, with context
/// totals `n(j)`. A context ending the counted prefix is not followed by a
/// symbol and therefore does not contribute to `n(j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    alphabet: Alphabet,
    k: usize,
    contexts: usize,
    table: Vec<u64>,
    totals: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(alphabet: Alphabet, k: usize) -> Result<Self, MarkovError> {
        let contexts = context_count(alphabet.size(), k)?;
        Ok(Self {
            alphabet,
            k,
            contexts,
            table: vec![0; contexts * alphabet.size()],
            totals: vec![0; contexts],
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    pub fn count(&self, context: &Context, symbol: usize) -> Result<u64, MarkovError> {
        let idx = self.check_context(context)?;
        if symbol >= self.alphabet.size() {
            return Err(MarkovError::SymbolOutOfRange {
                position: 0,
                symbol,
                m: self.alphabet.size(),
            });
        }
        Ok(self.count_at(idx, symbol))
    }

    pub fn context_total(&self, context: &Context) -> Result<u64, MarkovError> {
        let idx = self.check_context(context)?;
        Ok(self.total_at(idx))
    }

    /// Sum of all `n(i|j)`; equals `max(n - k, 0)` for a counted prefix of
    /// length `n`.
    pub fn total_transitions(&self) -> u64 {
        self.totals.iter().sum()
    }

    fn check_context(&self, context: &Context) -> Result<usize, MarkovError> {
        if context.len() != self.k {
            return Err(MarkovError::ContextLength {
                expected: self.k,
                got: context.len(),
            });
        }
        context.index(self.alphabet.size())
    }

    pub(crate) fn count_at(&self, ctx: usize, symbol: usize) -> u64 {
        self.table[ctx * self.alphabet.size() + symbol]
    }

    pub(crate) fn total_at(&self, ctx: usize) -> u64 {
        self.totals[ctx]
    }

    pub(crate) fn record(&mut self, ctx: usize, symbol: usize) {
        self.table[ctx * self.alphabet.size() + symbol] += 1;
        self.totals[ctx] += 1;
    }

    /// Laplace add-one cell boundaries for a context row: cumulative counts
    /// `cums[s] = s + sum_{i<s} n(i|j)` for `s = 0..=m`, plus the common
    /// denominator `n(j) + m`. `cums[m]` equals the denominator.
    pub(crate) fn laplace_bounds(&self, ctx: usize) -> (Vec<u64>, u64) {
        let m = self.alphabet.size();
        let mut cums = Vec::with_capacity(m + 1);
        let mut acc = 0u64;
        cums.push(0);
        for i in 0..m {
            acc += self.count_at(ctx, i) + 1;
            cums.push(acc);
        }
        (cums, self.total_at(ctx) + m as u64)
    }
}

/// Counts `n(i|j)` over the positions `k+1..=n` of `seq`: a transition is
/// recorded for each position that has a full `k`-symbol context before it.
pub fn count_transitions(seq: &SymbolSeq, k: usize) -> Result<TransitionCounts, MarkovError> {
    let mut counts = TransitionCounts::new(seq.alphabet(), k)?;
    let m = seq.alphabet().size();
    let contexts = counts.contexts;
    let mut ctx = 0usize;
    for (t, &sym) in seq.symbols().iter().enumerate() {
        if t >= k {
            counts.record(ctx, sym);
        }
        ctx = slide_context(ctx, sym, m, contexts);
    }
    Ok(counts)
}

/// Laplace add-one predictive distribution `(n(i|j)+1)/(n(j)+m)` for the
/// given context. Entries are exact rationals, strictly positive, and sum
/// to one exactly.
pub fn predictive_distribution(
    counts: &TransitionCounts,
    context: &Context,
) -> Result<Vec<Ratio<u64>>, MarkovError> {
    let idx = counts.check_context(context)?;
    let m = counts.alphabet.size() as u64;
    let denom = counts.total_at(idx) + m;
    Ok((0..counts.alphabet.size())
        .map(|i| Ratio::new(counts.count_at(idx, i) + 1, denom))
        .collect())
}

/// A homogeneous Markov chain of order `k`: one probability row per context.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    alphabet: Alphabet,
    k: usize,
    contexts: usize,
    rows: Vec<f64>,
}

impl MarkovModel {
    /// Builds a model from one row per context, in lexicographic context
    /// order. Rows must be nonnegative and sum to one within `1e-12`.
    pub fn new(alphabet: Alphabet, k: usize, rows: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let contexts = context_count(alphabet.size(), k)?;
        if rows.len() != contexts {
            return Err(MarkovError::RowCount {
                expected: contexts,
                got: rows.len(),
            });
        }
        let m = alphabet.size();
        let mut flat = Vec::with_capacity(contexts * m);
        for (row_idx, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(MarkovError::DimensionMismatch {
                    left: row.len(),
                    right: m,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(MarkovError::InvalidRow { row: row_idx, sum });
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            alphabet,
            k,
            contexts,
            rows: flat,
        })
    }

    /// Model with every row uniform.
    pub fn uniform(alphabet: Alphabet, k: usize) -> Result<Self, MarkovError> {
        let contexts = context_count(alphabet.size(), k)?;
        let m = alphabet.size();
        Ok(Self {
            alphabet,
            k,
            contexts,
            rows: vec![1.0 / m as f64; contexts * m],
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    /// Probability row for the context with the given dense index.
    pub fn row(&self, ctx: usize) -> &[f64] {
        let m = self.alphabet.size();
        &self.rows[ctx * m..(ctx + 1) * m]
    }

    pub fn prob(&self, context: &Context, symbol: usize) -> Result<f64, MarkovError> {
        if context.len() != self.k {
            return Err(MarkovError::ContextLength {
                expected: self.k,
                got: context.len(),
            });
        }
        let idx = context.index(self.alphabet.size())?;
        if symbol >= self.alphabet.size() {
            return Err(MarkovError::SymbolOutOfRange {
                position: 0,
                symbol,
                m: self.alphabet.size(),
            });
        }
        Ok(self.row(idx)[symbol])
    }
}

/// Maximum-likelihood estimate `n(i|j)/n(j)` per context. Rows for contexts
/// that never occur are set to uniform; they carry exponent zero in the
/// likelihood, so any valid row maximizes it.
pub fn mle_estimate(seq: &SymbolSeq, k: usize) -> Result<MarkovModel, MarkovError> {
    let counts = count_transitions(seq, k)?;
    mle_from_counts(&counts)
}

/// Maximum-likelihood model from precomputed counts.
pub fn mle_from_counts(counts: &TransitionCounts) -> Result<MarkovModel, MarkovError> {
    let m = counts.alphabet.size();
    let mut rows = Vec::with_capacity(counts.contexts);
    for ctx in 0..counts.contexts {
        let total = counts.total_at(ctx);
        if total == 0 {
            rows.push(vec![1.0 / m as f64; m]);
        } else {
            rows.push(
                (0..m)
                    .map(|i| counts.count_at(ctx, i) as f64 / total as f64)
                    .collect(),
            );
        }
    }
    MarkovModel::new(counts.alphabet, counts.k, rows)
}

/// Negative log-likelihood in bits, `-log2 P(x^n | theta)`, including the
/// `k*log2(m)` contribution of the uniformly coded first `k` symbols.
/// Returns `+inf` when the model assigns probability zero to an observed
/// transition.
pub fn neg_log_likelihood(seq: &SymbolSeq, model: &MarkovModel) -> Result<f64, MarkovError> {
    if seq.alphabet() != model.alphabet() {
        return Err(MarkovError::AlphabetMismatch {
            left: seq.alphabet().size(),
            right: model.alphabet().size(),
        });
    }
    let counts = count_transitions(seq, model.order())?;
    let m = model.alphabet().size();
    let mut bits = model.order() as f64 * (m as f64).log2();
    for ctx in 0..counts.contexts {
        let row = model.row(ctx);
        for (i, &p) in row.iter().enumerate() {
            let c = counts.count_at(ctx, i);
            if c > 0 {
                if p <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                bits -= c as f64 * p.log2();
            }
        }
    }
    Ok(bits)
}

/// Samples a length-`n` realization: the first `k` symbols i.i.d. uniform,
/// the rest from the model rows. Deterministic for a given seed.
pub fn simulate(model: &MarkovModel, n: usize, seed: u64) -> SymbolSeq {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m = model.alphabet().size();
    let k = model.order();
    let mut symbols = Vec::with_capacity(n);
    let mut ctx = 0usize;
    for t in 0..n {
        let sym = if t < k {
            rng.gen_range(0..m)
        } else {
            sample_row(model.row(ctx), &mut rng)
        };
        symbols.push(sym);
        ctx = slide_context(ctx, sym, m, model.contexts);
    }
    SymbolSeq {
        alphabet: model.alphabet(),
        symbols,
    }
}

fn sample_row(row: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let r: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in row.iter().enumerate() {
        cum += p;
        if r < cum {
            return i;
        }
    }
    row.len() - 1
}

/// Entropy rate in bits per symbol: `H = sum_j pi(j) H(theta(.|j))` with
/// `pi` the stationary distribution of the chain over composed states,
/// found by power iteration from the uniform vector. Reducible or periodic
/// chains fail to converge and yield an error.
pub fn entropy_rate(model: &MarkovModel) -> Result<f64, MarkovError> {
    let m = model.alphabet().size();
    let states = model.contexts;
    let mut pi = vec![1.0 / states as f64; states];
    let mut next = vec![0.0f64; states];
    let mut converged = false;
    for _ in 0..STATIONARY_MAX_ITERS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..states {
            let row = model.row(j);
            for (i, &p) in row.iter().enumerate() {
                next[slide_context(j, i, m, states)] += pi[j] * p;
            }
        }
        let residual: f64 = pi
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < STATIONARY_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MarkovError::StationaryNoConvergence {
            iterations: STATIONARY_MAX_ITERS,
        });
    }
    let mut h = 0.0;
    for (j, &weight) in pi.iter().enumerate() {
        let row_h: f64 = model
            .row(j)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum();
        h += weight * row_h;
    }
    Ok(h)
}

/// Cross entropy `H(P,Q) = sum_i -p_i log2 q_i` in bits, with the
/// `0*log(0) = 0` convention; `+inf` when some `p_i > 0` has `q_i = 0`.
pub fn cross_entropy(p: &[f64], q: &[f64]) -> Result<f64, MarkovError> {
    if p.len() != q.len() {
        return Err(MarkovError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut bits = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            bits -= pi * qi.log2();
        }
    }
    Ok(bits)
}

/// Parses the sequence text format: first line `m k`, second line
/// whitespace-separated symbol indices (absent or empty for `n = 0`).
/// Returns the sequence and the order recorded in the header.
pub fn read_sequence(text: &str) -> Result<(SymbolSeq, usize), MarkovError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| MarkovError::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let (m, k) = parse_header(header)?;
    let alphabet = Alphabet::new(m)?;
    let symbols = match lines.next() {
        None => Vec::new(),
        Some(body) => body
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| MarkovError::Parse {
                    line: 2,
                    message: format!("invalid symbol {tok:?}"),
                })
            })
            .collect::<Result<_, _>>()?,
    };
    Ok((SymbolSeq::new(alphabet, symbols)?, k))
}

/// Writes the sequence text format; `k` is recorded in the header.
pub fn write_sequence(seq: &SymbolSeq, k: usize) -> String {
    let mut out = format!("{} {}\n", seq.alphabet().size(), k);
    let mut first = true;
    for &s in seq.symbols() {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{s}");
        first = false;
    }
    out.push('\n');
    out
}

/// Parses the model text format: first line `m k`, then `m^k` rows of `m`
/// probabilities in lexicographic context order.
pub fn read_model(text: &str) -> Result<MarkovModel, MarkovError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| MarkovError::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let (m, k) = parse_header(header)?;
    let alphabet = Alphabet::new(m)?;
    let contexts = context_count(m, k)?;
    let mut rows = Vec::with_capacity(contexts);
    for row_idx in 0..contexts {
        let line_no = row_idx + 2;
        let line = lines.next().ok_or_else(|| MarkovError::Parse {
            line: line_no,
            message: format!("expected {contexts} probability rows"),
        })?;
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| MarkovError::Parse {
                    line: line_no,
                    message: format!("invalid probability {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    MarkovModel::new(alphabet, k, rows)
}

/// Writes the model text format with full-precision probabilities.
pub fn write_model(model: &MarkovModel) -> String {
    let mut out = format!("{} {}\n", model.alphabet().size(), model.order());
    for ctx in 0..model.num_contexts() {
        let row = model.row(ctx);
        for (i, p) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{p}");
        }
        out.push('\n');
    }
    out
}

fn parse_header(line: &str) -> Result<(usize, usize), MarkovError> {
    let mut it = line.split_whitespace();
    let m = it
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| MarkovError::Parse {
            line: 1,
            message: "header must be `m k`".into(),
        })?;
    let k = it
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| MarkovError::Parse {
            line: 1,
            message: "header must be `m k`".into(),
        })?;
    if it.next().is_some() {
        return Err(MarkovError::Parse {
            line: 1,
            message: "trailing tokens after `m k`".into(),
        });
    }
    Ok((m, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(m: usize, symbols: &[usize]) -> SymbolSeq {
        SymbolSeq::new(Alphabet::new(m).unwrap(), symbols.to_vec()).unwrap()
    }

    // "abaa"-style binary sequences: a = 0, b = 1.
    fn binary(text: &str) -> SymbolSeq {
        let symbols = text
            .chars()
            .map(|c| if c == 'a' { 0 } else { 1 })
            .collect::<Vec<_>>();
        seq(2, &symbols)
    }

    #[test]
    fn alphabet_rejects_small_m() {
        assert!(Alphabet::new(1).is_err());
        assert!(Alphabet::new(0).is_err());
        assert!(Alphabet::new(2).is_ok());
    }

    #[test]
    fn symbol_seq_rejects_out_of_range() {
        let err = SymbolSeq::new(Alphabet::new(2).unwrap(), vec![0, 2, 1]).unwrap_err();
        match err {
            MarkovError::SymbolOutOfRange {
                position, symbol, ..
            } => {
                assert_eq!(position, 1);
                assert_eq!(symbol, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn counts_aba_order_one() {
        let counts = count_transitions(&binary("aba"), 1).unwrap();
        let a = Context::new(vec![0]);
        let b = Context::new(vec![1]);
        assert_eq!(counts.count(&a, 1).unwrap(), 1); // n(b|a)
        assert_eq!(counts.count(&b, 0).unwrap(), 1); // n(a|b)
        assert_eq!(counts.count(&a, 0).unwrap(), 0);
        assert_eq!(counts.count(&b, 1).unwrap(), 0);
        // Final 'a' is not counted as a context occurrence.
        assert_eq!(counts.context_total(&a).unwrap(), 1);
        assert_eq!(counts.context_total(&b).unwrap(), 1);
    }

    #[test]
    fn counts_short_sequence_all_zero() {
        let counts = count_transitions(&binary("ab"), 3).unwrap();
        assert_eq!(counts.total_transitions(), 0);
    }

    #[test]
    fn counts_order_zero_are_symbol_counts() {
        let counts = count_transitions(&binary("aab"), 0).unwrap();
        let e = Context::empty();
        assert_eq!(counts.count(&e, 0).unwrap(), 2);
        assert_eq!(counts.count(&e, 1).unwrap(), 1);
    }

    #[test]
    fn predictive_uniform_on_empty_prefix() {
        let counts = count_transitions(&binary(""), 1).unwrap();
        let probs = predictive_distribution(&counts, &Context::new(vec![0])).unwrap();
        assert_eq!(probs, vec![Ratio::new(1, 2), Ratio::new(1, 2)]);
    }

    #[test]
    fn predictive_after_aba() {
        let counts = count_transitions(&binary("aba"), 1).unwrap();
        let probs = predictive_distribution(&counts, &Context::new(vec![0])).unwrap();
        assert_eq!(probs, vec![Ratio::new(1, 3), Ratio::new(2, 3)]);
    }

    #[test]
    fn predictive_after_ab_context_b() {
        let counts = count_transitions(&binary("ab"), 1).unwrap();
        let probs = predictive_distribution(&counts, &Context::new(vec![1])).unwrap();
        assert_eq!(probs, vec![Ratio::new(1, 2), Ratio::new(1, 2)]);
    }

    #[test]
    fn mle_order_zero() {
        let model = mle_estimate(&binary("aab"), 0).unwrap();
        let row = model.row(0);
        assert!((row[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((row[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mle_deterministic_alternation() {
        let model = mle_estimate(&binary("abab"), 1).unwrap();
        assert_eq!(model.prob(&Context::new(vec![0]), 1).unwrap(), 1.0);
        assert_eq!(model.prob(&Context::new(vec![1]), 0).unwrap(), 1.0);
    }

    #[test]
    fn mle_unseen_context_uniform() {
        let model = mle_estimate(&binary("aa"), 1).unwrap();
        let row_b = model.row(1);
        assert_eq!(row_b, &[0.5, 0.5]);
    }

    #[test]
    fn nll_direct_evaluation() {
        let model = MarkovModel::new(Alphabet::new(2).unwrap(), 0, vec![vec![0.75, 0.25]]).unwrap();
        let bits = neg_log_likelihood(&binary("aab"), &model).unwrap();
        assert!((bits + (9.0f64 / 64.0).log2()).abs() < 1e-12);
        assert!((bits - 2.8301).abs() < 1e-4);
    }

    #[test]
    fn nll_prefix_term_only() {
        let model = MarkovModel::new(
            Alphabet::new(2).unwrap(),
            1,
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        )
        .unwrap();
        let bits = neg_log_likelihood(&binary("aaaa"), &model).unwrap();
        assert!((bits - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nll_deterministic_model_gives_prefix_cost() {
        let model = mle_estimate(&binary("abab"), 1).unwrap();
        let bits = neg_log_likelihood(&binary("abab"), &model).unwrap();
        assert!((bits - 1.0).abs() < 1e-12); // k * log2(m) = 1
    }

    #[test]
    fn nll_infinite_on_zero_probability() {
        let model = MarkovModel::new(Alphabet::new(2).unwrap(), 0, vec![vec![1.0, 0.0]]).unwrap();
        let bits = neg_log_likelihood(&binary("aab"), &model).unwrap();
        assert!(bits.is_infinite());
    }

    #[test]
    fn nll_rejects_alphabet_mismatch() {
        let model = MarkovModel::uniform(Alphabet::new(3).unwrap(), 0).unwrap();
        assert!(matches!(
            neg_log_likelihood(&binary("ab"), &model),
            Err(MarkovError::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn predictive_rejects_wrong_context_length() {
        let counts = count_transitions(&binary("abab"), 1).unwrap();
        assert!(matches!(
            predictive_distribution(&counts, &Context::new(vec![0, 1])),
            Err(MarkovError::ContextLength { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn mle_minimizes_nll_among_perturbations() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &(n, k) in &[(40usize, 0usize), (60, 1), (80, 2)] {
            let symbols: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let s = seq(2, &symbols);
            let mle = mle_estimate(&s, k).unwrap();
            let base = neg_log_likelihood(&s, &mle).unwrap();
            for _ in 0..100 {
                let rows: Vec<Vec<f64>> = (0..mle.num_contexts())
                    .map(|ctx| {
                        let mut row: Vec<f64> = mle
                            .row(ctx)
                            .iter()
                            .map(|&p| (p + rng.gen_range(0.01..0.3)).max(1e-9))
                            .collect();
                        let sum: f64 = row.iter().sum();
                        row.iter_mut().for_each(|p| *p /= sum);
                        row
                    })
                    .collect();
                let perturbed = MarkovModel::new(s.alphabet(), k, rows).unwrap();
                let bits = neg_log_likelihood(&s, &perturbed).unwrap();
                assert!(bits + 1e-9 >= base, "perturbation beat the MLE: {bits} < {base}");
            }
        }
    }

    #[test]
    fn simulate_deterministic_model() {
        let model = MarkovModel::new(Alphabet::new(2).unwrap(), 0, vec![vec![1.0, 0.0]]).unwrap();
        let s = simulate(&model, 5, 99);
        assert_eq!(s.symbols(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn simulate_reproducible() {
        let model = MarkovModel::uniform(Alphabet::new(3).unwrap(), 2).unwrap();
        assert_eq!(simulate(&model, 200, 5), simulate(&model, 200, 5));
        assert_ne!(simulate(&model, 200, 5), simulate(&model, 200, 6));
    }

    #[test]
    fn simulate_fair_coin_frequency() {
        let model = MarkovModel::uniform(Alphabet::new(2).unwrap(), 0).unwrap();
        let s = simulate(&model, 10_000, 1);
        let zeros = s.symbols().iter().filter(|&&x| x == 0).count() as f64;
        let freq = zeros / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn entropy_rate_uniform_rows() {
        for m in [2usize, 3, 4] {
            for k in [0usize, 1, 2] {
                let model = MarkovModel::uniform(Alphabet::new(m).unwrap(), k).unwrap();
                let h = entropy_rate(&model).unwrap();
                assert!((h - (m as f64).log2()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn entropy_rate_sticky_binary_chain() {
        let model = MarkovModel::new(
            Alphabet::new(2).unwrap(),
            1,
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap();
        let h = entropy_rate(&model).unwrap();
        let expected = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
        assert!((h - expected).abs() < 1e-9);
        assert!((h - 0.4690).abs() < 1e-4);
    }

    #[test]
    fn entropy_rate_deterministic_alternation_is_zero() {
        // The uniform start vector is already the fixed point of this
        // doubly stochastic chain, so iteration converges despite the
        // periodicity; deterministic rows carry zero entropy.
        let model = MarkovModel::new(
            Alphabet::new(2).unwrap(),
            1,
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(entropy_rate(&model).unwrap(), 0.0);
    }

    #[test]
    fn entropy_rate_periodic_chain_fails() {
        // a -> b -> a with a transient c feeding a: mass oscillates between
        // (2/3, 1/3, 0) and (1/3, 2/3, 0), so the iteration never settles.
        let model = MarkovModel::new(
            Alphabet::new(3).unwrap(),
            1,
            vec![
                vec![0.0, 1.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
            ],
        )
        .unwrap();
        assert!(matches!(
            entropy_rate(&model),
            Err(MarkovError::StationaryNoConvergence { .. })
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let h = cross_entropy(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((h - (1.0 + 0.5 * (4.0f64 / 3.0).log2())).abs() < 1e-12);
        assert!((h - 1.2075).abs() < 1e-4);
        assert!(cross_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap().is_infinite());
        assert!(cross_entropy(&[0.5, 0.5], &[0.1, 0.2, 0.7]).is_err());
    }

    #[test]
    fn cross_entropy_self_is_entropy() {
        let p = [0.2, 0.3, 0.5];
        let h: f64 = p.iter().map(|&x: &f64| -x * x.log2()).sum();
        assert!((cross_entropy(&p, &p).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn sequence_format_roundtrip() {
        let s = seq(3, &[0, 2, 1, 1]);
        let text = write_sequence(&s, 2);
        assert_eq!(text, "3 2\n0 2 1 1\n");
        let (back, k) = read_sequence(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(k, 2);

        let empty = SymbolSeq::empty(Alphabet::new(2).unwrap());
        let (back, k) = read_sequence(&write_sequence(&empty, 0)).unwrap();
        assert!(back.is_empty());
        assert_eq!(k, 0);
    }

    #[test]
    fn sequence_format_rejects_bad_input() {
        assert!(read_sequence("").is_err());
        assert!(read_sequence("1 0\n0\n").is_err()); // m too small
        assert!(read_sequence("2 0\n0 2\n").is_err()); // symbol out of range
        assert!(read_sequence("2 0 9\n0\n").is_err()); // trailing token
        assert!(read_sequence("2 0\nx\n").is_err());
    }

    #[test]
    fn model_format_roundtrip() {
        let model = MarkovModel::new(
            Alphabet::new(2).unwrap(),
            1,
            vec![vec![0.88, 0.12], vec![0.12, 0.88]],
        )
        .unwrap();
        let text = write_model(&model);
        let back = read_model(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn model_format_rejects_bad_rows() {
        assert!(read_model("2 1\n0.5 0.5\n").is_err()); // missing row
        assert!(read_model("2 0\n0.6 0.6\n").is_err()); // not a distribution
    }

    #[test]
    fn context_index_roundtrip() {
        let m = 3;
        for idx in 0..27 {
            let ctx = Context::from_index(idx, m, 3);
            assert_eq!(ctx.index(m).unwrap(), idx);
        }
        // Oldest symbol is the most significant digit.
        assert_eq!(Context::new(vec![2, 0, 1]).index(3).unwrap(), 2 * 9 + 1);
    }

    proptest! {
        #[test]
        fn predictive_rows_sum_to_one(
            m in 2usize..5,
            k in 0usize..3,
            symbols in proptest::collection::vec(0usize..4, 0..120),
        ) {
            let symbols: Vec<usize> = symbols.into_iter().map(|s| s % m).collect();
            let s = seq(m, &symbols);
            let counts = count_transitions(&s, k).unwrap();
            for ctx in 0..counts.num_contexts() {
                let context = Context::from_index(ctx, m, k);
                let probs = predictive_distribution(&counts, &context).unwrap();
                let sum: Ratio<u64> = probs.iter().sum();
                prop_assert_eq!(sum, Ratio::new(1, 1));
                for p in &probs {
                    prop_assert!(*p > Ratio::new(0, 1) && *p < Ratio::new(1, 1));
                }
            }
        }

        #[test]
        fn transition_totals_match_length(
            m in 2usize..5,
            k in 0usize..4,
            symbols in proptest::collection::vec(0usize..4, 0..200),
        ) {
            let symbols: Vec<usize> = symbols.into_iter().map(|s| s % m).collect();
            let n = symbols.len();
            let s = seq(m, &symbols);
            let counts = count_transitions(&s, k).unwrap();
            prop_assert_eq!(counts.total_transitions(), n.saturating_sub(k) as u64);
        }
    }
}
