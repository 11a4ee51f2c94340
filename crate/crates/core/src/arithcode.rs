//! Exact-rational arithmetic coding.
//!
//! The adaptive encoder shrinks a coding interval `[a, b)` of `[0, 1)` one
//! symbol at a time, splitting it in proportion to the Laplace add-one
//! predictive distribution computed from the already-processed prefix; the
//! decoder replays the identical splits, so no side information is needed.
//! The non-adaptive ("simple") encoder instead fixes the splits at the
//! maximum-likelihood transition ratios of the whole sequence.
//!
//! All interval arithmetic is exact: endpoints are arbitrary-precision
//! rationals, so small examples can be checked against hand computations
//! and the Kraft sum can be evaluated without rounding. A floating-point
//! accounting path ([`adaptive_code_length_fast`]) serves larger inputs
//! where only the code length is needed, not the bits.
//!
//! Sub-intervals are ordered by ascending symbol index; encoder and decoder
//! must agree on this, so it is normative. The first `k` symbols are coded
//! with uniform `1/m` splits.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::markov::{
    count_transitions, mle_from_counts, slide_context, Alphabet, MarkovError, MarkovModel,
    SymbolSeq, TransitionCounts,
};

/// File-format magic for coded messages.
const MAGIC: &[u8; 4] = b"RIC1";

#[derive(Debug, Error)]
pub enum ArithCodeError {
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error("invalid interval: {reason}")]
    InvalidInterval { reason: String },
    #[error("bad magic bytes, expected `RIC1`")]
    BadMagic,
    #[error("truncated input: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("nonzero padding bits after payload")]
    BadPadding,
    #[error("invalid header: {message}")]
    HeaderInvalid { message: String },
    #[error("invalid bit character {character:?}")]
    BitParse { character: char },
}

/// A half-open sub-interval `[a, b)` of `[0, 1)` with exact rational
/// endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactInterval {
    a: BigRational,
    b: BigRational,
}

impl ExactInterval {
    pub fn new(a: BigRational, b: BigRational) -> Result<Self, ArithCodeError> {
        if a < BigRational::zero() || a >= b || b > BigRational::one() {
            return Err(ArithCodeError::InvalidInterval {
                reason: format!("need 0 <= a < b <= 1, got a={a}, b={b}"),
            });
        }
        Ok(Self { a, b })
    }

    /// The whole unit interval `[0, 1)`.
    pub fn unit() -> Self {
        Self {
            a: BigRational::zero(),
            b: BigRational::one(),
        }
    }

    pub fn lower(&self) -> &BigRational {
        &self.a
    }

    pub fn upper(&self) -> &BigRational {
        &self.b
    }

    pub fn width(&self) -> BigRational {
        &self.b - &self.a
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        *x >= self.a && *x < self.b
    }
}

impl std::fmt::Display for ExactInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.a, self.b)
    }
}

/// A finite bit string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitCode {
    bits: Vec<bool>,
}

impl BitCode {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The code interpreted as the fraction `0.b1 b2 ... bL` in binary.
    pub fn as_fraction(&self) -> BigRational {
        let mut num = BigUint::zero();
        for &bit in &self.bits {
            num <<= 1usize;
            if bit {
                num += 1u32;
            }
        }
        let den = BigUint::one() << self.bits.len();
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

impl std::fmt::Display for BitCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &bit in &self.bits {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BitCode {
    type Err = ArithCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                character => Err(ArithCodeError::BitParse { character }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }
}

/// A coded sequence: header `(m, k, n)` plus the payload bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedMessage {
    m: usize,
    k: usize,
    n: usize,
    payload: BitCode,
}

impl CodedMessage {
    pub fn new(m: usize, k: usize, n: usize, payload: BitCode) -> Result<Self, ArithCodeError> {
        if m < 2 {
            return Err(ArithCodeError::HeaderInvalid {
                message: format!("alphabet size {m} < 2"),
            });
        }
        for (name, value) in [("m", m), ("k", k), ("n", n), ("payload bits", payload.len())] {
            if value > u32::MAX as usize {
                return Err(ArithCodeError::HeaderInvalid {
                    message: format!("{name} = {value} exceeds u32 range"),
                });
            }
        }
        Ok(Self { m, k, n, payload })
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn seq_len(&self) -> usize {
        self.n
    }

    pub fn payload(&self) -> &BitCode {
        &self.payload
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    /// Serializes to the `RIC1` format: magic, then `m`, `k`, `n` and the
    /// payload bit count as 32-bit big-endian integers, then the payload
    /// bits packed MSB-first and zero-padded to a byte boundary.
    pub fn to_bytes(&self) -> Vec<u8> {
        let bits = self.payload.len();
        let mut out = Vec::with_capacity(20 + bits.div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.m as u32).to_be_bytes());
        out.extend_from_slice(&(self.k as u32).to_be_bytes());
        out.extend_from_slice(&(self.n as u32).to_be_bytes());
        out.extend_from_slice(&(bits as u32).to_be_bytes());
        let mut byte = 0u8;
        for (i, &bit) in self.payload.bits().iter().enumerate() {
            if bit {
                byte |= 1 << (7 - (i % 8));
            }
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if !bits.is_multiple_of(8) {
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, ArithCodeError> {
        if data.len() < 20 {
            return Err(ArithCodeError::Truncated {
                expected: 20,
                got: data.len(),
            });
        }
        if &data[0..4] != MAGIC {
            return Err(ArithCodeError::BadMagic);
        }
        let field = |i: usize| {
            u32::from_be_bytes(data[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        };
        let (m, k, n, bits) = (field(0), field(1), field(2), field(3));
        let expected = 20 + bits.div_ceil(8);
        if data.len() < expected {
            return Err(ArithCodeError::Truncated {
                expected,
                got: data.len(),
            });
        }
        if data.len() > expected {
            return Err(ArithCodeError::TrailingBytes {
                extra: data.len() - expected,
            });
        }
        let body = &data[20..];
        let mut payload = BitCode::new();
        for i in 0..bits {
            payload.push(body[i / 8] & (1 << (7 - (i % 8))) != 0);
        }
        // Padding bits must be zero.
        for i in bits..body.len() * 8 {
            if body[i / 8] & (1 << (7 - (i % 8))) != 0 {
                return Err(ArithCodeError::BadPadding);
            }
        }
        Self::new(m, k, n, payload)
    }
}

/// Exact coder state: the current interval is `[a_num/den, (a_num+w_num)/den)`.
/// Keeping one shared denominator avoids per-step gcd reduction.
struct CoderState {
    a_num: BigUint,
    w_num: BigUint,
    den: BigUint,
}

impl CoderState {
    fn unit() -> Self {
        Self {
            a_num: BigUint::zero(),
            w_num: BigUint::one(),
            den: BigUint::one(),
        }
    }

    /// Restricts to the cell `[cum, cum+width)/denom` of the current
    /// interval.
    fn refine(&mut self, cum: u64, width: u64, denom: u64) {
        self.a_num = &self.a_num * denom + &self.w_num * cum;
        self.w_num = &self.w_num * width;
        self.den = &self.den * denom;
    }

    fn interval(&self) -> ExactInterval {
        let b_num = &self.a_num + &self.w_num;
        ExactInterval {
            a: BigRational::new(
                BigInt::from(self.a_num.clone()),
                BigInt::from(self.den.clone()),
            ),
            b: BigRational::new(BigInt::from(b_num), BigInt::from(self.den.clone())),
        }
    }

    fn dyadic(&self) -> BitCode {
        let b_num = &self.a_num + &self.w_num;
        dyadic_core(&self.a_num, &self.den, &b_num, &self.den, &self.w_num, &self.den)
    }
}

/// The split source shared by the adaptive encoder and decoder: Laplace
/// add-one counts over the processed prefix, uniform for the first `k`
/// positions.
struct AdaptiveModel {
    counts: TransitionCounts,
    m: usize,
    k: usize,
    contexts: usize,
    ctx: usize,
    t: usize,
}

impl AdaptiveModel {
    fn new(alphabet: Alphabet, k: usize) -> Result<Self, MarkovError> {
        let counts = TransitionCounts::new(alphabet, k)?;
        Ok(Self {
            m: alphabet.size(),
            contexts: counts.num_contexts(),
            counts,
            k,
            ctx: 0,
            t: 0,
        })
    }

    /// Cell boundaries `cums[0..=m]` and their common denominator for the
    /// current position.
    fn bounds(&self) -> (Vec<u64>, u64) {
        if self.t < self.k {
            ((0..=self.m as u64).collect(), self.m as u64)
        } else {
            self.counts.laplace_bounds(self.ctx)
        }
    }

    /// Numerator and denominator of the probability assigned to `symbol`
    /// at the current position.
    fn prob_parts(&self, symbol: usize) -> (u64, u64) {
        if self.t < self.k {
            (1, self.m as u64)
        } else {
            (
                self.counts.count_at(self.ctx, symbol) + 1,
                self.counts.total_at(self.ctx) + self.m as u64,
            )
        }
    }

    fn advance(&mut self, symbol: usize) {
        if self.t >= self.k {
            self.counts.record(self.ctx, symbol);
        }
        self.ctx = slide_context(self.ctx, symbol, self.m, self.contexts);
        self.t += 1;
    }
}

/// Adaptive predictive encoding of `seq` at order `k`. Returns the coded
/// message and the full trace of `n + 1` coding intervals for inspection.
pub fn encode_adaptive(
    seq: &SymbolSeq,
    k: usize,
) -> Result<(CodedMessage, Vec<ExactInterval>), ArithCodeError> {
    encode_adaptive_inner(seq, k, true)
}

/// [`encode_adaptive`] without materializing the interval trace; prefer
/// this when only the coded message is needed.
pub fn encode_adaptive_message(seq: &SymbolSeq, k: usize) -> Result<CodedMessage, ArithCodeError> {
    Ok(encode_adaptive_inner(seq, k, false)?.0)
}

/// Exact adaptive code length in bits: `-log2` of the final interval
/// width, evaluated without emitting the bits.
pub fn adaptive_code_length_exact(seq: &SymbolSeq, k: usize) -> Result<f64, ArithCodeError> {
    let state = adaptive_state(seq, k)?;
    Ok(log2_biguint(&state.den) - log2_biguint(&state.w_num))
}

fn adaptive_state(seq: &SymbolSeq, k: usize) -> Result<CoderState, ArithCodeError> {
    let mut model = AdaptiveModel::new(seq.alphabet(), k)?;
    let mut state = CoderState::unit();
    for &sym in seq.symbols() {
        let (bounds, denom) = model.bounds();
        state.refine(bounds[sym], bounds[sym + 1] - bounds[sym], denom);
        model.advance(sym);
    }
    Ok(state)
}

fn encode_adaptive_inner(
    seq: &SymbolSeq,
    k: usize,
    with_trace: bool,
) -> Result<(CodedMessage, Vec<ExactInterval>), ArithCodeError> {
    let mut model = AdaptiveModel::new(seq.alphabet(), k)?;
    let mut state = CoderState::unit();
    let mut trace = Vec::new();
    if with_trace {
        trace.reserve(seq.len() + 1);
        trace.push(state.interval());
    }
    for &sym in seq.symbols() {
        let (bounds, denom) = model.bounds();
        state.refine(bounds[sym], bounds[sym + 1] - bounds[sym], denom);
        model.advance(sym);
        if with_trace {
            trace.push(state.interval());
        }
    }
    let msg = CodedMessage::new(seq.alphabet().size(), k, seq.len(), state.dyadic())?;
    Ok((msg, trace))
}

/// Decodes a message produced by [`encode_adaptive`] by replaying the
/// encoder's splits and selecting, at every step, the cell containing the
/// payload fraction.
pub fn decode_adaptive(msg: &CodedMessage) -> Result<SymbolSeq, ArithCodeError> {
    let alphabet = Alphabet::new(msg.alphabet_size())?;
    let mut model = AdaptiveModel::new(alphabet, msg.order())?;
    let mut state = CoderState::unit();
    let p_bits = msg.payload_len();
    let mut v = BigUint::zero();
    for &bit in msg.payload().bits() {
        v <<= 1usize;
        if bit {
            v += 1u32;
        }
    }
    let m = alphabet.size();
    // The header's length field is untrusted; let the vector grow instead
    // of pre-allocating whatever it claims.
    let mut symbols = Vec::with_capacity(msg.seq_len().min(1 << 20));
    for _ in 0..msg.seq_len() {
        let (bounds, denom) = model.bounds();
        // v < cell upper bound  <=>  v*den*denom < (a_num*denom + w_num*cum) * 2^p.
        let target = &v * (&state.den * denom);
        let base = &state.a_num * denom;
        let mut chosen = m - 1;
        for s in 0..m {
            let upper = (&base + &state.w_num * bounds[s + 1]) << p_bits;
            if target < upper {
                chosen = s;
                break;
            }
        }
        state.refine(bounds[chosen], bounds[chosen + 1] - bounds[chosen], denom);
        model.advance(chosen);
        symbols.push(chosen);
    }
    Ok(SymbolSeq::new(alphabet, symbols)?)
}

/// Non-adaptive encoding: a first pass estimates the maximum-likelihood
/// transition ratios, a second pass runs the interval recursion with those
/// fixed splits (uniform for the first `k` symbols). The model is returned
/// as side information; its description length is not counted.
pub fn encode_simple(
    seq: &SymbolSeq,
    k: usize,
) -> Result<(CodedMessage, MarkovModel), ArithCodeError> {
    let counts = count_transitions(seq, k)?;
    let model = mle_from_counts(&counts)?;
    let m = seq.alphabet().size();
    let contexts = counts.num_contexts();
    let mut state = CoderState::unit();
    let mut ctx = 0usize;
    for (t, &sym) in seq.symbols().iter().enumerate() {
        if t < k {
            state.refine(sym as u64, 1, m as u64);
        } else {
            let cum: u64 = (0..sym).map(|i| counts.count_at(ctx, i)).sum();
            let width = counts.count_at(ctx, sym);
            let total = counts.total_at(ctx);
            // Every coded transition occurs in the sequence the model was
            // fitted on, so its count is nonzero.
            debug_assert!(width > 0 && total > 0);
            state.refine(cum, width, total);
        }
        ctx = slide_context(ctx, sym, m, contexts);
    }
    let msg = CodedMessage::new(m, k, seq.len(), state.dyadic())?;
    Ok((msg, model))
}

/// Extracts the dyadic code of an interval: with `L = ceil(-log2(b-a))`
/// and `c = ceil(a * 2^L)`, emits the `L`-bit fractional expansion of
/// `(c+1)/2^L` when that lies below `b`, falling back to `c/2^L` when only
/// one length-`L` dyadic fits the interval.
pub fn dyadic_code(interval: &ExactInterval) -> BitCode {
    let part = |r: &BigRational| {
        (
            r.numer().to_biguint().expect("endpoints are nonnegative"),
            r.denom().to_biguint().expect("denominators are positive"),
        )
    };
    let (a_num, a_den) = part(interval.lower());
    let (b_num, b_den) = part(interval.upper());
    let (w_num, w_den) = part(&interval.width());
    dyadic_core(&a_num, &a_den, &b_num, &b_den, &w_num, &w_den)
}

/// [`dyadic_code`] on raw numerator/denominator pairs; the fractions need
/// not be reduced.
fn dyadic_core(
    a_num: &BigUint,
    a_den: &BigUint,
    b_num: &BigUint,
    b_den: &BigUint,
    w_num: &BigUint,
    w_den: &BigUint,
) -> BitCode {
    // Smallest l with width >= 2^-l. The width is in (0, 1], so the bit
    // lengths pin l to within one.
    let mut l = (w_den.bits() - w_num.bits()) as usize;
    if (w_num << l) < *w_den {
        l += 1;
    }

    loop {
        let c = ((a_num << l) + a_den - 1u32) / a_den;
        let b_shifted = b_num << l;
        let successor = &c + 1u32;
        if &successor * b_den < b_shifted {
            return expansion(&successor, l);
        }
        if &c * b_den < b_shifted {
            return expansion(&c, l);
        }
        l += 1;
    }
}

/// `l`-bit MSB-first binary expansion of `value` (`value < 2^l`).
fn expansion(value: &BigUint, l: usize) -> BitCode {
    BitCode::from_bits((0..l).rev().map(|i| value.bit(i as u64)).collect())
}

/// Adaptive code length in bits, accumulated in floating point:
/// `sum_t -log2(theta_hat_t(x_{t+1} | context))` with the first `k`
/// symbols costed at `log2 m` each. Equals `-log2` of the exact final
/// interval width up to floating error.
pub fn adaptive_code_length_fast(seq: &SymbolSeq, k: usize) -> Result<f64, MarkovError> {
    let mut model = AdaptiveModel::new(seq.alphabet(), k)?;
    let mut bits = 0.0f64;
    for &sym in seq.symbols() {
        let (num, den) = model.prob_parts(sym);
        bits += (den as f64).log2() - (num as f64).log2();
        model.advance(sym);
    }
    Ok(bits)
}

/// `log2` of a positive big rational, accurate to a few ulps. Useful for
/// comparing exact interval widths against floating-point code lengths.
pub fn log2_rational(r: &BigRational) -> f64 {
    let num = r.numer().to_biguint().expect("positive rational");
    let den = r.denom().to_biguint().expect("positive rational");
    log2_biguint(&num) - log2_biguint(&den)
}

fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        x.to_f64().expect("fits in f64").log2()
    } else {
        let shift = bits - 53;
        let top = (x >> shift).to_f64().expect("53-bit value fits in f64");
        top.log2() + shift as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{mle_estimate, neg_log_likelihood, simulate};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn interval(an: i64, ad: i64, bn: i64, bd: i64) -> ExactInterval {
        ExactInterval::new(ratio(an, ad), ratio(bn, bd)).unwrap()
    }

    fn binary(text: &str) -> SymbolSeq {
        let symbols = text
            .chars()
            .map(|c| if c == 'a' { 0 } else { 1 })
            .collect::<Vec<_>>();
        SymbolSeq::new(Alphabet::new(2).unwrap(), symbols).unwrap()
    }

    fn random_seq(rng: &mut ChaCha12Rng, m: usize, n: usize) -> SymbolSeq {
        let symbols = (0..n).map(|_| rng.gen_range(0..m)).collect();
        SymbolSeq::new(Alphabet::new(m).unwrap(), symbols).unwrap()
    }

    #[test]
    fn abaa_order_one_interval_trace() {
        let (msg, trace) = encode_adaptive(&binary("abaa"), 1).unwrap();
        let expected = vec![
            interval(0, 1, 1, 1),
            interval(0, 1, 1, 2),
            interval(1, 4, 1, 2),
            interval(1, 4, 3, 8),
            interval(1, 4, 7, 24),
        ];
        assert_eq!(trace, expected);
        assert_eq!(msg.payload().to_string(), "01001");
        assert_eq!(msg.payload_len(), 5);
    }

    #[test]
    fn empty_sequence_codes_to_nothing() {
        let seq = SymbolSeq::empty(Alphabet::new(2).unwrap());
        let (msg, trace) = encode_adaptive(&seq, 1).unwrap();
        assert_eq!(trace, vec![ExactInterval::unit()]);
        assert!(msg.payload().is_empty());
        let back = decode_adaptive(&msg).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn aa_order_zero_trace() {
        let (msg, trace) = encode_adaptive(&binary("aa"), 0).unwrap();
        assert_eq!(
            trace,
            vec![interval(0, 1, 1, 1), interval(0, 1, 1, 2), interval(0, 1, 1, 3)]
        );
        assert_eq!(msg.payload().to_string(), "01");
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(dyadic_code(&interval(1, 4, 7, 24)).to_string(), "01001");
        assert!(dyadic_code(&ExactInterval::unit()).is_empty());
        // Only one length-2 dyadic lies in [1/3, 2/3): 3/4 is outside, so
        // the code falls back to 1/2.
        assert_eq!(dyadic_code(&interval(1, 3, 2, 3)).to_string(), "10");
        // Width exactly 2^-L aligned on a dyadic boundary: the successor
        // equals b, so the fallback emits the lower dyadic.
        assert_eq!(dyadic_code(&interval(0, 1, 1, 2)).to_string(), "0");
        assert_eq!(dyadic_code(&interval(1, 4, 1, 2)).to_string(), "01");
    }

    #[test]
    fn dyadic_code_lies_in_interval() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let d = rng.gen_range(2i64..1000);
            let x = rng.gen_range(0..d - 1);
            let w = rng.gen_range(1..=d - x);
            let iv = ExactInterval::new(ratio(x, d), ratio(x + w, d)).unwrap();
            let code = dyadic_code(&iv);
            assert!(
                iv.contains(&code.as_fraction()),
                "code {code} outside {iv}"
            );
            // L = ceil(-log2 width): 2^-L <= width.
            let two_pow = ratio(1, 1i64 << code.len().min(62));
            assert!(two_pow <= iv.width());
        }
    }

    #[test]
    fn decode_inverts_abaa_example() {
        let payload: BitCode = "01001".parse().unwrap();
        let msg = CodedMessage::new(2, 1, 4, payload).unwrap();
        let seq = decode_adaptive(&msg).unwrap();
        assert_eq!(seq, binary("abaa"));
    }

    #[test]
    fn nesting_and_width_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = rng.gen_range(2..4);
            let k = rng.gen_range(0..3);
            let n = rng.gen_range(0..40);
            let seq = random_seq(&mut rng, m, n);
            let (_, trace) = encode_adaptive(&seq, k).unwrap();

            // Replay the predictive probabilities independently.
            let mut prod = BigRational::one();
            let mut counts = TransitionCounts::new(seq.alphabet(), k).unwrap();
            let mut ctx = 0usize;
            for (t, &sym) in seq.symbols().iter().enumerate() {
                let (num, den) = if t < k {
                    (1, m as u64)
                } else {
                    (
                        counts.count_at(ctx, sym) + 1,
                        counts.total_at(ctx) + m as u64,
                    )
                };
                prod *= BigRational::new(BigInt::from(num), BigInt::from(den));
                if t >= k {
                    counts.record(ctx, sym);
                }
                ctx = slide_context(ctx, sym, m, counts.num_contexts());

                let prev = &trace[t];
                let cur = &trace[t + 1];
                assert!(cur.lower() >= prev.lower() && cur.upper() <= prev.upper());
                assert_eq!(cur.width(), prod);
            }
        }
    }

    #[test]
    fn roundtrip_random_messages() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..60 {
            let m = rng.gen_range(2..5);
            let k = rng.gen_range(0..4);
            let n = rng.gen_range(0..80);
            let seq = random_seq(&mut rng, m, n);
            let (msg, _) = encode_adaptive(&seq, k).unwrap();
            let bytes = msg.to_bytes();
            let parsed = CodedMessage::from_bytes(&bytes).unwrap();
            assert_eq!(parsed, msg);
            assert_eq!(decode_adaptive(&parsed).unwrap(), seq);
        }
    }

    #[test]
    fn kraft_sum_small() {
        for k in [0usize, 1] {
            for n in [4usize, 5] {
                let mut sum = BigRational::zero();
                for word in 0..(1u32 << n) {
                    let symbols: Vec<usize> =
                        (0..n).map(|i| ((word >> (n - 1 - i)) & 1) as usize).collect();
                    let seq = SymbolSeq::new(Alphabet::new(2).unwrap(), symbols).unwrap();
                    let (msg, _) = encode_adaptive(&seq, k).unwrap();
                    sum += BigRational::new(
                        BigInt::from(1u32),
                        BigInt::from(BigUint::one() << msg.payload_len()),
                    );
                }
                assert!(sum <= BigRational::one(), "Kraft sum {sum} > 1");
            }
        }
    }

    #[test]
    fn simple_coder_examples() {
        let (msg, _) = encode_simple(&binary("aab"), 0).unwrap();
        assert_eq!(msg.payload_len(), 3); // ceil(log2(27/4))

        let (msg, model) = encode_simple(&binary("aaaa"), 0).unwrap();
        assert_eq!(msg.payload_len(), 0);
        assert_eq!(model.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn simple_length_tracks_ceil_mv() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..60 {
            let m = rng.gen_range(2..5);
            let k = rng.gen_range(0..3);
            let n = rng.gen_range(k.max(1)..120);
            let seq = random_seq(&mut rng, m, n);
            let (msg, _) = encode_simple(&seq, k).unwrap();
            let mv = neg_log_likelihood(&seq, &mle_estimate(&seq, k).unwrap()).unwrap();
            let diff = (msg.payload_len() as f64 - mv.ceil()).abs();
            assert!(diff <= 1.0, "payload {} vs ceil(MV) {}", msg.payload_len(), mv.ceil());
        }
    }

    #[test]
    fn fast_length_matches_abaa_hand_value() {
        let bits = adaptive_code_length_fast(&binary("abaa"), 1).unwrap();
        assert!((bits - 24.0f64.log2()).abs() < 1e-12);
        assert_eq!(bits.ceil() as usize, 5);

        let empty = SymbolSeq::empty(Alphabet::new(2).unwrap());
        assert_eq!(adaptive_code_length_fast(&empty, 1).unwrap(), 0.0);
    }

    #[test]
    fn fast_length_matches_exact_width() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..200 {
            let m = rng.gen_range(2..4);
            let k = rng.gen_range(0..3);
            let n = rng.gen_range(0..=300);
            let seq = random_seq(&mut rng, m, n);
            let fast = adaptive_code_length_fast(&seq, k).unwrap();
            let exact = adaptive_code_length_exact(&seq, k).unwrap();
            assert!((fast - exact).abs() < 1e-6, "fast {fast} vs exact {exact}");
        }
    }

    #[test]
    fn adaptivity_pays_off_on_biased_chain() {
        let model = MarkovModel::new(
            Alphabet::new(2).unwrap(),
            1,
            vec![vec![0.95, 0.05], vec![0.05, 0.95]],
        )
        .unwrap();
        let seq = simulate(&model, 2000, 17);
        let k1 = adaptive_code_length_fast(&seq, 1).unwrap();
        let k0 = adaptive_code_length_fast(&seq, 0).unwrap();
        assert!(k1 < k0, "order 1 should code shorter: {k1} vs {k0}");
    }

    #[test]
    fn message_bytes_golden() {
        let msg = CodedMessage::new(2, 1, 4, "01001".parse().unwrap()).unwrap();
        let bytes = msg.to_bytes();
        let expected = [
            b'R', b'I', b'C', b'1', // magic
            0, 0, 0, 2, // m
            0, 0, 0, 1, // k
            0, 0, 0, 4, // n
            0, 0, 0, 5, // payload bits
            0b0100_1000, // 01001 packed MSB-first, zero-padded
        ];
        assert_eq!(bytes, expected);
        assert_eq!(CodedMessage::from_bytes(&bytes).unwrap(), msg);
    }

    #[test]
    fn message_bytes_reject_malformed() {
        let msg = CodedMessage::new(2, 0, 3, "101".parse().unwrap()).unwrap();
        let good = msg.to_bytes();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            CodedMessage::from_bytes(&bad_magic),
            Err(ArithCodeError::BadMagic)
        ));

        assert!(matches!(
            CodedMessage::from_bytes(&good[..good.len() - 1]),
            Err(ArithCodeError::Truncated { .. })
        ));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            CodedMessage::from_bytes(&trailing),
            Err(ArithCodeError::TrailingBytes { .. })
        ));

        let mut bad_pad = good.clone();
        *bad_pad.last_mut().unwrap() |= 1;
        assert!(matches!(
            CodedMessage::from_bytes(&bad_pad),
            Err(ArithCodeError::BadPadding)
        ));

        let mut small_m = good;
        small_m[7] = 1;
        assert!(matches!(
            CodedMessage::from_bytes(&small_m),
            Err(ArithCodeError::HeaderInvalid { .. })
        ));
    }

    #[test]
    fn interval_validation() {
        assert!(ExactInterval::new(ratio(1, 2), ratio(1, 2)).is_err());
        assert!(ExactInterval::new(ratio(2, 3), ratio(1, 3)).is_err());
        assert!(ExactInterval::new(ratio(-1, 3), ratio(1, 3)).is_err());
        assert!(ExactInterval::new(ratio(1, 3), ratio(4, 3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn roundtrip_is_identity(
            m in 2usize..5,
            k in 0usize..4,
            symbols in proptest::collection::vec(0usize..4, 0..60),
        ) {
            let symbols: Vec<usize> = symbols.into_iter().map(|s| s % m).collect();
            let seq = SymbolSeq::new(Alphabet::new(m).unwrap(), symbols).unwrap();
            let (msg, _) = encode_adaptive(&seq, k).unwrap();
            prop_assert_eq!(decode_adaptive(&msg).unwrap(), seq);
        }
    }
}
