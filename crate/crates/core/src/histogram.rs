//! Histogram partition selection by minimum description length.
//!
//! Given counts over a fine grid of `R` cells, the criterion scores a
//! coarsening (a sub-partition keeping a subset of the cut points) by the
//! code length of the binned data plus a `(m-1)/2 * log2(n)` parameter
//! penalty; an optional `-n log2(r)` term accounts for the sample
//! precision `r` and is constant over partitions. The optimal sub-partition
//! among all `2^(R-1)` candidates is found as a shortest path over cut
//! indices, in at most `R(R+1)/2` edge-cost evaluations.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Enumeration guard for the brute-force oracle.
const BRUTE_FORCE_MAX_CELLS: usize = 20;

#[derive(Debug, Error)]
pub enum HistogramError {
    #[error("invalid grid: {message}")]
    InvalidGrid { message: String },
    #[error("sample {index} (value {value}) is outside the grid range")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("got {got} counts for {cells} cells")]
    CountMismatch { cells: usize, got: usize },
    #[error("invalid sub-partition: {message}")]
    InvalidPartition { message: String },
    #[error("{cells} cells exceed the brute-force limit of {max}")]
    TooManyCells { cells: usize, max: usize },
    #[error("precision must be positive, got {value}")]
    InvalidPrecision { value: f64 },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A maximal grid: strictly increasing boundaries `t_0 < ... < t_R`
/// delimiting `R` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    boundaries: Vec<f64>,
}

impl CellGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, HistogramError> {
        if boundaries.len() < 2 {
            return Err(HistogramError::InvalidGrid {
                message: "need at least two boundaries".into(),
            });
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(HistogramError::InvalidGrid {
                message: "boundaries must be finite".into(),
            });
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HistogramError::InvalidGrid {
                message: "boundaries must be strictly increasing".into(),
            });
        }
        Ok(Self { boundaries })
    }

    /// Regular grid of `cells` equal cells on `[lo, hi]`; the last boundary
    /// is exactly `hi`.
    pub fn regular(lo: f64, hi: f64, cells: usize) -> Result<Self, HistogramError> {
        if cells == 0 {
            return Err(HistogramError::InvalidGrid {
                message: "need at least one cell".into(),
            });
        }
        let span = hi - lo;
        let mut boundaries: Vec<f64> = (0..=cells)
            .map(|i| lo + span * i as f64 / cells as f64)
            .collect();
        boundaries[cells] = hi;
        Self::new(boundaries)
    }

    /// Number of cells `R`.
    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn lo(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn hi(&self) -> f64 {
        *self.boundaries.last().expect("grid has boundaries")
    }
}

/// Cell counts of a sample over a [`CellGrid`], with an optional recorded
/// sample precision.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSample {
    grid: CellGrid,
    counts: Vec<u64>,
    n: u64,
    precision: Option<f64>,
}

impl BinnedSample {
    pub fn from_counts(grid: CellGrid, counts: Vec<u64>) -> Result<Self, HistogramError> {
        if counts.len() != grid.cells() {
            return Err(HistogramError::CountMismatch {
                cells: grid.cells(),
                got: counts.len(),
            });
        }
        let n = counts.iter().sum();
        Ok(Self {
            grid,
            counts,
            n,
            precision: None,
        })
    }

    /// Records the sample precision `r`, enabling the `-n log2(r)` term in
    /// criterion values.
    pub fn with_precision(mut self, r: f64) -> Result<Self, HistogramError> {
        if !r.is_finite() || r <= 0.0 {
            return Err(HistogramError::InvalidPrecision { value: r });
        }
        self.precision = Some(r);
        Ok(self)
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn precision(&self) -> Option<f64> {
        self.precision
    }

    fn precision_bits(&self) -> f64 {
        match self.precision {
            Some(r) => -(self.n as f64) * r.log2(),
            None => 0.0,
        }
    }
}

/// Bins `data` into the cells of `grid`: cell `c` is `[t_c, t_{c+1})`,
/// except the last cell which is closed on the right so that binning is
/// total on `[t_0, t_R]`.
pub fn bin_sample(data: &[f64], grid: &CellGrid) -> Result<BinnedSample, HistogramError> {
    let r = grid.cells();
    let bounds = grid.boundaries();
    let mut counts = vec![0u64; r];
    for (index, &value) in data.iter().enumerate() {
        if !(value >= grid.lo() && value <= grid.hi()) {
            return Err(HistogramError::SampleOutOfRange { index, value });
        }
        let cell = bounds.partition_point(|&b| b <= value) - 1;
        counts[cell.min(r - 1)] += 1;
    }
    BinnedSample::from_counts(grid.clone(), counts)
}

/// A coarsening of a grid: the subset of cut indices kept, always
/// containing `0` and `R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPartition {
    cuts: Vec<usize>,
}

impl SubPartition {
    pub fn new(cuts: Vec<usize>, cells: usize) -> Result<Self, HistogramError> {
        if cuts.first() != Some(&0) || cuts.last() != Some(&cells) {
            return Err(HistogramError::InvalidPartition {
                message: format!("cuts must start at 0 and end at {cells}"),
            });
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HistogramError::InvalidPartition {
                message: "cuts must be strictly increasing".into(),
            });
        }
        Ok(Self { cuts })
    }

    /// The finest sub-partition: every cut kept.
    pub fn full(cells: usize) -> Self {
        Self {
            cuts: (0..=cells).collect(),
        }
    }

    /// The coarsest sub-partition: a single interval.
    pub fn single(cells: usize) -> Self {
        Self {
            cuts: vec![0, cells],
        }
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    /// Number of intervals `m`.
    pub fn interval_count(&self) -> usize {
        self.cuts.len() - 1
    }

    /// Cut-index pairs `(lo, hi)` of each interval.
    pub fn intervals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cuts.windows(2).map(|w| (w[0], w[1]))
    }
}

fn prefix_counts(sample: &BinnedSample) -> Vec<u64> {
    let mut pref = Vec::with_capacity(sample.counts.len() + 1);
    pref.push(0u64);
    let mut acc = 0u64;
    for &c in &sample.counts {
        acc += c;
        pref.push(acc);
    }
    pref
}

/// `-cnt * log2(cnt / (n * len))`, with empty intervals contributing zero.
fn interval_term(cnt: u64, len: f64, n: u64) -> f64 {
    if cnt == 0 {
        0.0
    } else {
        let cnt = cnt as f64;
        -cnt * (cnt / (n as f64 * len)).log2()
    }
}

/// Description-length criterion of a sub-partition in bits:
/// `-sum_j n_j log2(n_j / (n l_j)) + (m-1)/2 * log2(n)`, plus
/// `-n log2(r)` when the sample records its precision. Empty intervals
/// contribute zero to the sum but still count toward `m`.
pub fn crit(sample: &BinnedSample, part: &SubPartition) -> f64 {
    assert_eq!(
        *part.cuts.last().expect("partition is nonempty"),
        sample.grid.cells(),
        "partition does not match the sample grid"
    );
    assert!(sample.n >= 1, "criterion requires a nonempty sample");
    let pref = prefix_counts(sample);
    let bounds = sample.grid.boundaries();
    let n = sample.n;
    let mut bits = 0.0;
    for (lo, hi) in part.intervals() {
        bits += interval_term(pref[hi] - pref[lo], bounds[hi] - bounds[lo], n);
    }
    bits += (part.interval_count() - 1) as f64 / 2.0 * (n as f64).log2();
    bits + sample.precision_bits()
}

/// Comparison used to pick between candidate partitions: smaller value,
/// then fewer intervals, then lexicographically smaller cut set.
fn compare_candidates(
    value_a: f64,
    cuts_a: &[usize],
    value_b: f64,
    cuts_b: &[usize],
) -> Ordering {
    value_a
        .partial_cmp(&value_b)
        .expect("criterion values are never NaN")
        .then_with(|| cuts_a.len().cmp(&cuts_b.len()))
        .then_with(|| cuts_a.cmp(cuts_b))
}

/// Result of a dynamic-programming selection, with the number of edge-cost
/// evaluations performed (at most `R(R+1)/2`).
#[derive(Debug, Clone)]
pub struct DpSelection {
    pub partition: SubPartition,
    pub crit_bits: f64,
    pub edge_evals: usize,
}

/// Minimizes [`crit`] over all sub-partitions of the sample grid.
pub fn dp_select(sample: &BinnedSample) -> (SubPartition, f64) {
    let result = dp_select_instrumented(sample);
    (result.partition, result.crit_bits)
}

/// [`dp_select`] as a shortest path over cut indices. The cost of the edge
/// `c -> c'` is the merged interval's code-length term plus `1/2 log2(n)`
/// per interval; the final value subtracts the one excess `1/2 log2(n)`.
pub fn dp_select_instrumented(sample: &BinnedSample) -> DpSelection {
    assert!(sample.n >= 1, "selection requires a nonempty sample");
    let r = sample.grid.cells();
    let pref = prefix_counts(sample);
    let bounds = sample.grid.boundaries();
    let n = sample.n;
    let half_log_n = 0.5 * (n as f64).log2();

    struct Node {
        cost: f64,
        cuts: Vec<usize>,
    }
    let mut nodes: Vec<Option<Node>> = Vec::with_capacity(r + 1);
    nodes.push(Some(Node {
        cost: 0.0,
        cuts: vec![0],
    }));
    nodes.extend((0..r).map(|_| None));

    let mut edge_evals = 0usize;
    for hi in 1..=r {
        for lo in 0..hi {
            edge_evals += 1;
            let edge =
                interval_term(pref[hi] - pref[lo], bounds[hi] - bounds[lo], n) + half_log_n;
            let prev = nodes[lo].as_ref().expect("all prefixes are reachable");
            let cost = prev.cost + edge;
            let replace = match &nodes[hi] {
                None => true,
                Some(cur) => {
                    // The candidate's cut set is prev.cuts followed by hi.
                    // Both cut sets end at hi, so when their lengths match
                    // the lexicographic tie-break reduces to the prefixes.
                    match cost.partial_cmp(&cur.cost).expect("costs are never NaN") {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => match (prev.cuts.len() + 1).cmp(&cur.cuts.len()) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => prev.cuts[..] < cur.cuts[..cur.cuts.len() - 1],
                        },
                    }
                }
            };
            if replace {
                let mut cuts = nodes[lo].as_ref().unwrap().cuts.clone();
                cuts.push(hi);
                nodes[hi] = Some(Node { cost, cuts });
            }
        }
    }

    let end = nodes[r].take().expect("end node reached");
    let crit_bits = end.cost - half_log_n + sample.precision_bits();
    DpSelection {
        partition: SubPartition { cuts: end.cuts },
        crit_bits,
        edge_evals,
    }
}

/// Exhaustive minimizer over all `2^(R-1)` sub-partitions, used as an
/// oracle for [`dp_select`]. Guarded to small `R`.
pub fn brute_force_select(
    sample: &BinnedSample,
) -> Result<(SubPartition, f64), HistogramError> {
    let r = sample.grid.cells();
    if r > BRUTE_FORCE_MAX_CELLS {
        return Err(HistogramError::TooManyCells {
            cells: r,
            max: BRUTE_FORCE_MAX_CELLS,
        });
    }
    let mut best: Option<(SubPartition, f64)> = None;
    for mask in 0u32..(1u32 << (r - 1)) {
        let mut cuts = vec![0usize];
        cuts.extend((1..r).filter(|&i| mask & (1 << (i - 1)) != 0));
        cuts.push(r);
        let part = SubPartition { cuts };
        let value = crit(sample, &part);
        let replace = match &best {
            None => true,
            Some((cur, cur_value)) => {
                compare_candidates(value, part.cuts(), *cur_value, cur.cuts()).is_lt()
            }
        };
        if replace {
            best = Some((part, value));
        }
    }
    Ok(best.expect("at least one sub-partition exists"))
}

/// I.i.d. draws from the standard Laplace density `exp(-|x|)/2` by inverse
/// CDF, rejecting draws outside `[lo, hi]`. Deterministic for a given seed.
pub fn sample_laplace(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    assert!(lo < 0.0 && 0.0 < hi, "interval must contain 0");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u: f64 = rng.gen();
        let x = if u < 0.5 {
            (2.0 * u).ln()
        } else {
            -(2.0 * (1.0 - u)).ln()
        };
        if x >= lo && x <= hi {
            out.push(x);
        }
    }
    out
}

/// JSON export of a selected partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub boundaries: Vec<f64>,
    pub counts: Vec<u64>,
    pub crit_bits: f64,
    pub m: usize,
}

impl PartitionReport {
    pub fn new(sample: &BinnedSample, part: &SubPartition, crit_bits: f64) -> Self {
        let pref = prefix_counts(sample);
        let bounds = sample.grid.boundaries();
        Self {
            boundaries: part.cuts().iter().map(|&c| bounds[c]).collect(),
            counts: part.intervals().map(|(lo, hi)| pref[hi] - pref[lo]).collect(),
            crit_bits,
            m: part.interval_count(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HistogramError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// JSON export of a binned sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub boundaries: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl HistogramReport {
    pub fn new(sample: &BinnedSample) -> Self {
        Self {
            boundaries: sample.grid.boundaries().to_vec(),
            counts: sample.counts.clone(),
            n: sample.n,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HistogramError> {
        Ok(serde_json::from_str(text)?)
    }
}
