//! Order selection for Markov chains by code-length minimization.
//!
//! `MV(x^n, k)` is the maximized negative log-likelihood at order `k`;
//! `RIC(x^n, k) = MV(x^n, k) + |Theta_k|/2 * log2(n)` penalizes the
//! `|Theta_k| = (m-1) m^k` free parameters. The adaptive code length serves
//! as a third, directly operational criterion: the penalty it pays arises
//! from coding adaptively rather than from an explicit term.

use thiserror::Error;

use crate::arithcode::{
    adaptive_code_length_fast, encode_adaptive_message, encode_simple, ArithCodeError,
};
use crate::markov::{mle_estimate, neg_log_likelihood, MarkovError, SymbolSeq};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Code(#[from] ArithCodeError),
}

/// Which value [`select_order`] minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Ric,
    Mv,
    AdaptiveLength,
}

/// Maximized negative log-likelihood in bits: the sequence coded at order
/// `k` with its own maximum-likelihood parameter.
pub fn mv(seq: &SymbolSeq, k: usize) -> Result<f64, MarkovError> {
    neg_log_likelihood(seq, &mle_estimate(seq, k)?)
}

/// Parameter-count penalty `(m-1) m^k / 2 * log2(n)` in bits.
pub fn penalty(m: usize, k: usize, n: usize) -> f64 {
    (m - 1) as f64 * (m as f64).powi(k as i32) / 2.0 * (n as f64).log2()
}

/// `RIC(x^n, k) = MV(x^n, k) + (m-1) m^k / 2 * log2(n)`.
pub fn ric(seq: &SymbolSeq, k: usize) -> Result<f64, MarkovError> {
    Ok(mv(seq, k)? + penalty(seq.alphabet().size(), k, seq.len()))
}

/// The order in `0..=k_max` minimizing the chosen criterion, ties broken
/// toward the smaller order. Adaptive lengths use the floating-point path.
pub fn select_order(
    seq: &SymbolSeq,
    k_max: usize,
    criterion: Criterion,
) -> Result<usize, CriteriaError> {
    let mut values = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let value = match criterion {
            Criterion::Ric => ric(seq, k)?,
            Criterion::Mv => mv(seq, k)?,
            Criterion::AdaptiveLength => adaptive_code_length_fast(seq, k)?,
        };
        values.push(value);
    }
    Ok(argmin_first(&values))
}

/// Index of the first minimum.
fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// One row of a criterion-comparison curve, all values in bits per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub k: usize,
    pub adaptive_bps: f64,
    pub simple_bps: f64,
    pub mv_bps: f64,
    pub ric_bps: f64,
}

/// Per-order comparison of the four criteria on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionCurve {
    rows: Vec<CurveRow>,
}

impl CriterionCurve {
    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    /// CSV export: header `k,adaptive_bps,simple_bps,mv_bps,ric_bps`, one
    /// row per order, six decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,adaptive_bps,simple_bps,mv_bps,ric_bps\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                row.k, row.adaptive_bps, row.simple_bps, row.mv_bps, row.ric_bps
            ));
        }
        out
    }
}

/// Evaluates all four criteria for `k = 0..=k_max`, divided by `n`. With
/// `exact` set, adaptive and simple values are true payload lengths from
/// the exact coders; otherwise the adaptive value comes from the fast
/// floating path and the simple value from `ceil(MV)`.
pub fn criterion_curve(
    seq: &SymbolSeq,
    k_max: usize,
    exact: bool,
) -> Result<CriterionCurve, CriteriaError> {
    let n = seq.len() as f64;
    let m = seq.alphabet().size();
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mv_bits = mv(seq, k)?;
        let ric_bits = mv_bits + penalty(m, k, seq.len());
        let (adaptive_bits, simple_bits) = if exact {
            let adaptive_msg = encode_adaptive_message(seq, k)?;
            let (simple_msg, _) = encode_simple(seq, k)?;
            (
                adaptive_msg.payload_len() as f64,
                simple_msg.payload_len() as f64,
            )
        } else {
            (adaptive_code_length_fast(seq, k)?, mv_bits.ceil())
        };
        rows.push(CurveRow {
            k,
            adaptive_bps: adaptive_bits / n,
            simple_bps: simple_bits / n,
            mv_bps: mv_bits / n,
            ric_bps: ric_bits / n,
        });
    }
    Ok(CriterionCurve { rows })
}
