//! False-positive model for the location filter.
//!
//! `Pr(E_fp) = sum_alpha Pr(E_fp | alpha) Pr(alpha)`, where `alpha` is the
//! number of lit bits after `h` embeddings of `k2` hashes each. Given `alpha`,
//! each of the `|F| = h(|Delta|-1)` false pairs collides independently with
//! `p1 = (alpha/m2)^k2`, and
//!
//! ```text
//! Pr(E_fp | alpha) = 1/|P| * sum_{j=1}^{|F|} p1^j p2^(|F|-j) C_j
//! C_j              = sum_J f_J * sum_{l=1}^{J} C(|F| - l, j - 1)
//! ```
//!
//! `f_J` (how many valid sequences have exactly `J` single-substitution
//! alternatives) comes from one of two backends: exhaustive enumeration
//! ([`Backend::Oracle`], ground truth) or the fitted closed form
//! ([`Backend::ClosedForm`]). All combinatorial quantities are exact integers;
//! floats appear only in the final probability sums.

use std::fmt;
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::combinatorics::{big_ln, binom, BinomialTable};
use crate::segmentation::{
    count_valid_sequences, enumerate_valid_sequences, SegmentationError, SeqLenMode, DEFAULT_ENUMERATION_CAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("alpha = {alpha} outside support [1, {max}]")]
    AlphaOutOfSupport { alpha: u32, max: u32 },
    #[error("J = {0} is not an even value >= 2")]
    NotEven(usize),
    #[error("J = {big_j} outside [1, {max}]")]
    JOutOfRange { big_j: usize, max: usize },
    #[error(transparent)]
    Enumeration(#[from] SegmentationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    #[default]
    ClosedForm,
    Oracle,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::ClosedForm => "closed_form",
            Backend::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelParams {
    pub m2: u32,
    pub k2: u16,
    pub h: usize,
    pub delta: u16,
    pub mode: SeqLenMode,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.m2 == 0 || self.k2 == 0 || u32::from(self.k2) > self.m2 {
            return Err(AnalyticsError::InvalidParams(format!(
                "need m2 >= 1 and 1 <= k2 <= m2 (m2 = {}, k2 = {})",
                self.m2, self.k2
            )));
        }
        if self.h == 0 || self.delta == 0 {
            return Err(AnalyticsError::InvalidParams(format!(
                "need h >= 1 and delta >= 1 (h = {}, delta = {})",
                self.h, self.delta
            )));
        }
        Ok(())
    }

    /// `|F| = h(|Delta| - 1)`.
    pub fn false_pairs(&self) -> usize {
        false_pairs(self.h, self.delta)
    }

    /// Largest possible `alpha`: `min(m2, k2 h)`.
    pub fn alpha_max(&self) -> u32 {
        alpha_max(self.m2, self.k2, self.h)
    }
}

fn false_pairs(h: usize, delta: u16) -> usize {
    h * usize::from(delta.saturating_sub(1))
}

fn alpha_max(m2: u32, k2: u16, h: usize) -> u32 {
    let throws = u64::from(k2) * h as u64;
    throws.min(u64::from(m2)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionProbs {
    pub p1: f64,
    pub p2: f64,
}

pub fn collision_probs(alpha: u32, m2: u32, k2: u16) -> CollisionProbs {
    let p1 = (f64::from(alpha) / f64::from(m2)).powi(i32::from(k2));
    CollisionProbs { p1, p2: 1.0 - p1 }
}

/// `Pr(alpha)` for every `alpha` in `[1, min(m2, k2 h)]` (index 0 is `alpha = 1`).
///
/// Occupancy recurrence over throws,
/// `P_{t+1}(a) = P_t(a) a/m2 + P_t(a-1) (m2-a+1)/m2`. Every term is
/// non-negative, so unlike the inclusion-exclusion form
/// `C(m2, a) sum_g (-1)^g C(a, g) ((a-g)/m2)^(k2 h)` it is stable in floating point.
pub fn pr_alpha_distribution(m2: u32, k2: u16, h: usize) -> Vec<f64> {
    let top = alpha_max(m2, k2, h) as usize;
    let throws = usize::from(k2) * h;
    let m = f64::from(m2);
    let mut p = vec![0.0f64; top + 1];
    p[0] = 1.0;
    for t in 0..throws {
        for a in (1..=top.min(t + 1)).rev() {
            p[a] = p[a] * (a as f64 / m) + p[a - 1] * ((m - a as f64 + 1.0) / m);
        }
        p[0] = 0.0;
    }
    p.remove(0);
    p
}

pub fn pr_alpha(m2: u32, k2: u16, h: usize, alpha: u32) -> Result<f64, AnalyticsError> {
    let max = alpha_max(m2, k2, h);
    if alpha == 0 || alpha > max {
        return Err(AnalyticsError::AlphaOutOfSupport { alpha, max });
    }
    Ok(pr_alpha_distribution(m2, k2, h)[alpha as usize - 1])
}

/// Range of `J`: `1..=2|Delta|-2`, empty when `|Delta| < 2`.
pub fn j_bounds(delta: u16) -> RangeInclusive<usize> {
    if delta < 2 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    1..=2 * usize::from(delta) - 2
}

/// Number of `j`-subsets of the false pairs that contain at least one of the
/// `J` triggering pairs: `sum_{l=1}^{J} C(h(|Delta|-1) - l, j - 1)`.
pub fn extension_count(big_j: usize, j: usize, h: usize, delta: u16) -> BigUint {
    let n = false_pairs(h, delta) as i64;
    (1..=big_j as i64).map(|l| binom(n - l, j as i64 - 1)).sum()
}

/// `sum_{i=0}^{t} C(t, i) C(b, i)`; a negative `t` counts as an empty product (1).
fn bracket(t: i64, b: i64) -> BigUint {
    if t < 0 {
        return BigUint::one();
    }
    (0..=t).map(|i| binom(t, i) * binom(b, i)).sum()
}

fn full_term(even_j: i64, delta: i64, h: i64) -> BigUint {
    let half = even_j / 2;
    bracket(half - 1, delta - half - 1) * bracket(half, h - delta - half + 1)
}

fn partial_term(even_j: i64, small_delta: i64, h: i64) -> BigUint {
    let half = even_j / 2;
    bracket(half - 1, small_delta - half - 1) * bracket(half - 1, h - small_delta - half + 1)
}

fn check_even(big_j: usize) -> Result<(), AnalyticsError> {
    if big_j < 2 || big_j % 2 == 1 {
        return Err(AnalyticsError::NotEven(big_j));
    }
    Ok(())
}

/// Fitted count for sequences spanning all `|Delta|` segments (even `J` only).
pub fn f_even_full(big_j: usize, delta: u16, h: usize) -> Result<BigUint, AnalyticsError> {
    check_even(big_j)?;
    Ok(full_term(big_j as i64, i64::from(delta), h as i64))
}

/// Fitted count for sequences spanning `small_delta < |Delta|` segments (even `J` only).
pub fn f_even_partial(big_j: usize, small_delta: u16, h: usize) -> Result<BigUint, AnalyticsError> {
    check_even(big_j)?;
    Ok(partial_term(big_j as i64, i64::from(small_delta), h as i64))
}

/// Closed-form `f_J`, evaluated at `2 floor(J/2)`.
pub fn f_j_closed(big_j: usize, delta: u16, h: usize) -> Result<BigUint, AnalyticsError> {
    let range = j_bounds(delta);
    if !range.contains(&big_j) {
        return Err(AnalyticsError::JOutOfRange { big_j, max: *range.end() });
    }
    let even = 2 * (big_j / 2) as i64;
    let (d, hh) = (i64::from(delta), h as i64);
    Ok(full_term(even, d, hh) + (1..d).map(|sd| partial_term(even, sd, hh)).sum::<BigUint>())
}

/// `f_J` for `J = 1..=2|Delta|-2` from the closed form.
pub fn f_vector_closed(delta: u16, h: usize) -> Vec<BigUint> {
    j_bounds(delta).map(|j| f_j_closed(j, delta, h).expect("J in range")).collect()
}

/// Number of positions `i >= anchored` with a single substitute value that
/// keeps the sequence valid. Each position admits at most one substitute.
pub fn trigger_count(seq: &[u16], r: u16, anchored: usize) -> usize {
    (anchored..seq.len()).filter(|&i| substitute(seq, r, i).is_some()).count()
}

/// The alternative value at position `i` that keeps `seq` valid, if any.
pub fn substitute(seq: &[u16], r: u16, i: usize) -> Option<u16> {
    let cur = seq[i];
    let candidates: &[u16] = if i == 0 { &[1] } else { &[seq[i - 1], seq[i - 1] + 1] };
    candidates.iter().copied().find(|&v| {
        v != cur && v <= r && seq.get(i + 1).is_none_or(|&next| next == v || next == v + 1)
    })
}

/// Exact `f_J` by enumeration: sequences of length `seq_len` whose last `h`
/// positions are embedders (earlier ones are fixed anchors), histogrammed by
/// their trigger count. Entry `J - 1` holds `f_J`; sequences with `J = 0` are
/// not represented.
pub fn f_j_oracle(delta: u16, h: usize, seq_len: usize, cap: usize) -> Result<Vec<BigUint>, AnalyticsError> {
    if seq_len < h {
        return Err(AnalyticsError::InvalidParams(format!("seq_len {seq_len} shorter than h {h}")));
    }
    let width = *j_bounds(delta).end();
    let mut hist = vec![0u64; width];
    for seq in enumerate_valid_sequences(delta, seq_len, cap)? {
        let big_j = trigger_count(&seq.indices(), delta, seq_len - h);
        if big_j > 0 {
            assert!(big_j <= width, "J = {big_j} exceeds 2|Delta|-2 = {width}");
            hist[big_j - 1] += 1;
        }
    }
    Ok(hist.into_iter().map(BigUint::from).collect())
}

/// `C_j` for one `j`.
pub fn c_j(j: usize, delta: u16, h: usize, f: &[BigUint]) -> BigUint {
    f.iter().enumerate().map(|(idx, fj)| fj * extension_count(idx + 1, j, h, delta)).sum()
}

/// `C_1..=C_{|F|}`.
pub fn c_vector(delta: u16, h: usize, f: &[BigUint]) -> Vec<BigUint> {
    let n = false_pairs(h, delta);
    if n == 0 {
        return Vec::new();
    }
    let table = BinomialTable::new(n);
    (1..=n)
        .map(|j| {
            let mut ext = BigUint::zero();
            let mut total = BigUint::zero();
            for (idx, fj) in f.iter().enumerate() {
                let big_j = idx + 1;
                ext += table.get(n as i64 - big_j as i64, j as i64 - 1);
                if !fj.is_zero() {
                    total += fj * &ext;
                }
            }
            total
        })
        .collect()
}

/// `Pr(E_fp | alpha)` and whether it had to be clamped into `[0, 1]`.
pub fn pr_efp_given_alpha(alpha: u32, params: &ModelParams, c: &[BigUint], p_count: &BigUint) -> (f64, bool) {
    let c_ln: Vec<f64> = c.iter().map(big_ln).collect();
    conditional_fp(alpha, params.m2, params.k2, &c_ln, big_ln(p_count))
}

fn conditional_fp(alpha: u32, m2: u32, k2: u16, c_ln: &[f64], p_ln: f64) -> (f64, bool) {
    let n = c_ln.len();
    let CollisionProbs { p1, p2 } = collision_probs(alpha, m2, k2);
    if n == 0 || p1 == 0.0 || p_ln == f64::NEG_INFINITY {
        return (0.0, false);
    }
    let raw = if p2 <= 0.0 {
        (c_ln[n - 1] - p_ln).exp()
    } else {
        let (l1, l2) = (p1.ln(), p2.ln());
        c_ln.iter()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .map(|(idx, c)| {
                let j = (idx + 1) as f64;
                (c + j * l1 + (n as f64 - j) * l2 - p_ln).exp()
            })
            .sum::<f64>()
            + 0.0
    };
    if raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpBreakdown {
    pub params: ModelParams,
    pub backend: Backend,
    /// `Pr(alpha)` for `alpha = 1..=alpha_max`.
    pub pr_alpha: Vec<f64>,
    /// `f_J` for `J = 1..=2|Delta|-2`.
    pub f_j: Vec<BigUint>,
    /// `C_j` for `j = 1..=|F|`.
    pub c_j: Vec<BigUint>,
    /// `|P|`.
    pub p_count: BigUint,
    pub pr_efp_given_alpha: Vec<f64>,
    pub total: f64,
    /// True if any conditional term or the total was clamped to 1.
    pub clamped: bool,
}

/// The `k2`/`m2`-independent part of the model for fixed `(h, |Delta|, mode, backend)`.
#[derive(Debug, Clone)]
pub struct FpModel {
    h: usize,
    delta: u16,
    mode: SeqLenMode,
    backend: Backend,
    f_j: Vec<BigUint>,
    c_j: Vec<BigUint>,
    c_ln: Vec<f64>,
    p_count: BigUint,
}

impl FpModel {
    pub fn new(h: usize, delta: u16, mode: SeqLenMode, backend: Backend) -> Result<Self, AnalyticsError> {
        FpModel::with_cap(h, delta, mode, backend, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(
        h: usize,
        delta: u16,
        mode: SeqLenMode,
        backend: Backend,
        cap: usize,
    ) -> Result<Self, AnalyticsError> {
        if h == 0 || delta == 0 {
            return Err(AnalyticsError::InvalidParams(format!("need h >= 1 and delta >= 1 (h = {h}, delta = {delta})")));
        }
        let f_j = match backend {
            Backend::ClosedForm => f_vector_closed(delta, h),
            Backend::Oracle => f_j_oracle(delta, h, mode.seq_len(h), cap)?,
        };
        let c_j = c_vector(delta, h, &f_j);
        let c_ln = c_j.iter().map(big_ln).collect();
        let p_count = count_valid_sequences(delta, mode.seq_len(h));
        Ok(FpModel { h, delta, mode, backend, f_j, c_j, c_ln, p_count })
    }

    pub fn f_j(&self) -> &[BigUint] {
        &self.f_j
    }

    pub fn c_j(&self) -> &[BigUint] {
        &self.c_j
    }

    pub fn p_count(&self) -> &BigUint {
        &self.p_count
    }

    pub fn params(&self, m2: u32, k2: u16) -> ModelParams {
        ModelParams { m2, k2, h: self.h, delta: self.delta, mode: self.mode }
    }

    pub fn evaluate(&self, m2: u32, k2: u16) -> Result<FpBreakdown, AnalyticsError> {
        let params = self.params(m2, k2);
        params.validate()?;
        let pr_alpha = pr_alpha_distribution(m2, k2, self.h);
        let p_ln = big_ln(&self.p_count);
        let mut clamped = false;
        let conditional: Vec<f64> = (1..=params.alpha_max())
            .map(|alpha| {
                let (v, c) = conditional_fp(alpha, m2, k2, &self.c_ln, p_ln);
                clamped |= c;
                v
            })
            .collect();
        // An empty f64 sum is -0.0; `+ 0.0` normalizes it.
        let mut total: f64 = conditional.iter().zip(&pr_alpha).map(|(c, p)| c * p).sum::<f64>() + 0.0;
        if total > 1.0 {
            total = 1.0;
            clamped = true;
        }
        Ok(FpBreakdown {
            params,
            backend: self.backend,
            pr_alpha,
            f_j: self.f_j.clone(),
            c_j: self.c_j.clone(),
            p_count: self.p_count.clone(),
            pr_efp_given_alpha: conditional,
            total,
            clamped,
        })
    }
}

pub fn pr_efp(params: &ModelParams, backend: Backend) -> Result<FpBreakdown, AnalyticsError> {
    params.validate()?;
    FpModel::new(params.h, params.delta, params.mode, backend)?.evaluate(params.m2, params.k2)
}

/// One row of the closed-form versus enumeration comparison for `f_J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FjComparison {
    pub delta: u16,
    pub h: usize,
    pub big_j: usize,
    pub closed: BigUint,
    pub oracle: BigUint,
}

impl FjComparison {
    pub fn agrees(&self) -> bool {
        self.closed == self.oracle
    }
}

/// Compares both `f_J` backends on every `(delta, h)` with `2 <= delta <= delta_max`
/// and `1 <= h <= h_max`.
pub fn compare_f_j(delta_max: u16, h_max: usize, mode: SeqLenMode) -> Result<Vec<FjComparison>, AnalyticsError> {
    let mut rows = Vec::new();
    for delta in 2..=delta_max {
        for h in 1..=h_max {
            let oracle = f_j_oracle(delta, h, mode.seq_len(h), DEFAULT_ENUMERATION_CAP)?;
            let closed = f_vector_closed(delta, h);
            for (idx, (c, o)) in closed.into_iter().zip(oracle).enumerate() {
                rows.push(FjComparison { delta, h, big_j: idx + 1, closed: c, oracle: o });
            }
        }
    }
    Ok(rows)
}

/// Lossy but convenient view of a big count.
pub fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::ratio_to_f64;
    use crate::segmentation::is_valid_sequence;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    /// Brute-force Pr(alpha): enumerate every assignment of `throws` balls to `m` bins.
    fn pr_alpha_brute(m: u32, throws: u32) -> Vec<f64> {
        let total = (m as u64).pow(throws);
        let mut hist = vec![0u64; m as usize + 1];
        for code in 0..total {
            let mut c = code;
            let mut lit = 0u64;
            for _ in 0..throws {
                lit |= 1 << (c % m as u64);
                c /= m as u64;
            }
            hist[lit.count_ones() as usize] += 1;
        }
        let top = throws.min(m) as usize;
        (1..=top).map(|a| hist[a] as f64 / total as f64).collect()
    }

    /// Inclusion-exclusion form, exact integers.
    fn pr_alpha_alternating(m2: u32, k2: u16, h: usize) -> Vec<f64> {
        let top = alpha_max(m2, k2, h);
        let throws = u32::from(k2) * h as u32;
        let denom = BigUint::from(m2).pow(throws);
        (1..=top)
            .map(|alpha| {
                let (mut plus, mut minus) = (BigUint::zero(), BigUint::zero());
                for gamma in 0..=alpha {
                    let term = binom(i64::from(alpha), i64::from(gamma)) * BigUint::from(alpha - gamma).pow(throws);
                    if gamma % 2 == 0 {
                        plus += term;
                    } else {
                        minus += term;
                    }
                }
                ratio_to_f64(&(binom(i64::from(m2), i64::from(alpha)) * (plus - minus)), &denom)
            })
            .collect()
    }

    #[test]
    fn recurrence_matches_inclusion_exclusion() {
        for (m, k, h) in [(200u32, 5u16, 15usize), (60, 4, 10), (16, 3, 9), (300, 4, 10), (20, 30, 15)] {
            let a = pr_alpha_distribution(m, k, h);
            let b = pr_alpha_alternating(m, k, h);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-14 + 1e-10 * y, "m={m} k={k} h={h}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn pr_alpha_examples() {
        assert_eq!(pr_alpha(37, 1, 1, 1).unwrap(), 1.0);
        let two = pr_alpha_distribution(2, 1, 2);
        assert_eq!(two, vec![0.5, 0.5]);
        let big_case: f64 = pr_alpha_distribution(200, 5, 15).iter().sum();
        assert!((big_case - 1.0).abs() < 1e-9);
        assert!(matches!(pr_alpha(8, 2, 2, 0), Err(AnalyticsError::AlphaOutOfSupport { .. })));
        assert!(matches!(pr_alpha(8, 2, 2, 5), Err(AnalyticsError::AlphaOutOfSupport { max: 4, .. })));
    }

    #[test]
    fn pr_alpha_matches_exhaustive_assignment() {
        for (m, k, h) in [(4u32, 2u16, 2usize), (5, 3, 2), (8, 2, 3), (3, 1, 5), (6, 2, 4)] {
            let throws = u32::from(k) * h as u32;
            let exact = pr_alpha_distribution(m, k, h);
            let brute = pr_alpha_brute(m, throws);
            assert_eq!(exact.len(), brute.len());
            for (a, b) in exact.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-12, "m={m} k={k} h={h}: {exact:?} vs {brute:?}");
            }
        }
    }

    #[test]
    fn collision_examples() {
        assert_eq!(collision_probs(200, 200, 3).p1, 1.0);
        assert_eq!(collision_probs(0, 200, 3).p1, 0.0);
        let c = collision_probs(100, 200, 3);
        assert_eq!(c.p1, 0.125);
        assert_eq!(c.p2, 0.875);
    }

    #[test]
    fn j_bound_examples() {
        assert_eq!(j_bounds(2), 1..=2);
        assert_eq!(j_bounds(6), 1..=10);
        assert!(j_bounds(1).is_empty());
    }

    #[test]
    fn extension_examples() {
        assert_eq!(extension_count(1, 1, 5, 4), big(1));
        assert_eq!(extension_count(2, 1, 5, 4), big(2));
        assert_eq!(extension_count(2, 2, 3, 2), big(3));
    }

    #[test]
    fn extension_matches_subset_enumeration() {
        for n in 1..=10usize {
            for big_j in 1..=n {
                for j in 1..=n {
                    let brute = (0u32..1 << n)
                        .filter(|s| s.count_ones() as usize == j && s & ((1 << big_j) - 1) != 0)
                        .count() as u64;
                    // h = n, delta = 2 gives |F| = n.
                    assert_eq!(extension_count(big_j, j, n, 2), big(brute), "n={n} J={big_j} j={j}");
                }
            }
        }
    }

    #[test]
    fn closed_form_terms() {
        // Direct evaluation of the fitted formulas.
        assert_eq!(f_even_full(2, 4, 6).unwrap(), big(3));
        assert_eq!(f_even_partial(2, 2, 3).unwrap(), big(1));
        assert_eq!(f_even_full(3, 4, 6), Err(AnalyticsError::NotEven(3)));
        assert_eq!(f_even_partial(0, 2, 3), Err(AnalyticsError::NotEven(0)));
        // f_2 at (delta=2, h=3): f^e_{2,2} + f^s_{2,1} = 2 + 1.
        assert_eq!(f_j_closed(2, 2, 3).unwrap(), f_even_full(2, 2, 3).unwrap() + f_even_partial(2, 1, 3).unwrap());
        assert_eq!(f_j_closed(2, 2, 3).unwrap(), big(3));
        // J = 1 maps to 0: every bracket is an empty product.
        assert_eq!(f_j_closed(1, 5, 7).unwrap(), big(5));
        assert!(matches!(f_j_closed(4, 2, 3), Err(AnalyticsError::JOutOfRange { .. })));
        assert!(matches!(f_j_closed(0, 2, 3), Err(AnalyticsError::JOutOfRange { .. })));
    }

    #[test]
    fn substitution_matches_full_validity_check() {
        for r in 1..=4u16 {
            for len in 1..=6 {
                for seq in enumerate_valid_sequences(r, len, 10_000).unwrap() {
                    let s = seq.indices();
                    for i in 0..len {
                        let valid_alts: Vec<u16> = (1..=r)
                            .filter(|&v| v != s[i])
                            .filter(|&v| {
                                let mut t = s.clone();
                                t[i] = v;
                                is_valid_sequence(&t, r)
                            })
                            .collect();
                        assert!(valid_alts.len() <= 1);
                        assert_eq!(substitute(&s, r, i), valid_alts.first().copied(), "{s:?} at {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(f_j_oracle(2, 3, 3, 100).unwrap(), vec![big(2), big(1)]);
        assert!(f_j_oracle(1, 4, 4, 100).unwrap().is_empty());
        // Anchored form: vehicle sequences (1,1,1),(1,1,2),(1,2,2),(2,2,2) have J = 1,2,2,1.
        assert_eq!(f_j_oracle(2, 3, 4, 100).unwrap(), vec![big(2), big(2)]);
    }

    #[test]
    fn c_j_examples() {
        let f = f_j_oracle(2, 3, 3, 100).unwrap();
        assert_eq!(c_j(1, 2, 3, &f), big(4));
        let weighted: BigUint = f.iter().enumerate().map(|(i, x)| x * (i as u64 + 1)).sum();
        assert_eq!(c_j(1, 2, 3, &f), weighted);
        let cv = c_vector(2, 3, &f);
        assert_eq!(cv.len(), 3);
        for (j, c) in cv.iter().enumerate() {
            assert_eq!(*c, c_j(j + 1, 2, 3, &f));
        }
        let zeros = vec![BigUint::zero(); 4];
        assert!(c_vector(3, 4, &zeros).iter().all(Zero::is_zero));
    }

    #[test]
    fn c_one_is_j_weighted_sum() {
        for delta in 2..=5u16 {
            for h in 1..=7 {
                for f in [f_j_oracle(delta, h, h, 100_000).unwrap(), f_vector_closed(delta, h)] {
                    let weighted: BigUint = f.iter().enumerate().map(|(i, x)| x * (i as u64 + 1)).sum();
                    assert_eq!(c_j(1, delta, h, &f), weighted);
                }
            }
        }
    }

    #[test]
    fn conditional_limits() {
        let model = FpModel::new(3, 2, SeqLenMode::H, Backend::Oracle).unwrap();
        let params = model.params(16, 2);
        let (zero, _) = pr_efp_given_alpha(0, &params, model.c_j(), model.p_count());
        assert_eq!(zero, 0.0);
        // alpha = m2: only j = |F| survives.
        let (full, clamped) = pr_efp_given_alpha(16, &params, model.c_j(), model.p_count());
        let expect = to_f64(model.c_j().last().unwrap()) / to_f64(model.p_count());
        assert!((full - expect.min(1.0)).abs() < 1e-12);
        assert_eq!(clamped, expect > 1.0);
    }

    #[test]
    fn oracle_conditional_equals_trigger_average() {
        // With exact f_J, sum_j p1^j p2^(n-j) C_j = sum_J f_J (1 - p2^J).
        let model = FpModel::new(4, 3, SeqLenMode::H, Backend::Oracle).unwrap();
        let params = model.params(40, 3);
        for alpha in [1u32, 5, 12, 30, 40] {
            let (v, clamped) = pr_efp_given_alpha(alpha, &params, model.c_j(), model.p_count());
            let p2 = collision_probs(alpha, 40, 3).p2;
            let direct: f64 = model
                .f_j()
                .iter()
                .enumerate()
                .map(|(i, f)| to_f64(f) * (1.0 - p2.powi(i as i32 + 1)))
                .sum::<f64>()
                / to_f64(model.p_count());
            assert!(!clamped);
            assert!((v - direct).abs() < 1e-12, "alpha={alpha}: {v} vs {direct}");
        }
    }

    #[test]
    fn breakdown_invariants() {
        for backend in [Backend::ClosedForm, Backend::Oracle] {
            let b = pr_efp(&ModelParams { m2: 200, k2: 5, h: 15, delta: 8, mode: SeqLenMode::H }, backend).unwrap();
            assert_eq!(b.pr_alpha.len(), 75);
            assert!((b.pr_alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(b.f_j.len(), 14);
            assert_eq!(b.c_j.len(), 105);
            assert!((0.0..=1.0).contains(&b.total));
        }
    }

    #[test]
    fn degenerate_single_segment() {
        let b = pr_efp(&ModelParams { m2: 50, k2: 3, h: 6, delta: 1, mode: SeqLenMode::H }, Backend::Oracle).unwrap();
        assert_eq!(b.total, 0.0);
        assert!(b.c_j.is_empty());
    }

    #[test]
    fn larger_filters_lower_fp() {
        let model = FpModel::new(10, 15, SeqLenMode::H, Backend::ClosedForm).unwrap();
        let mut last = f64::INFINITY;
        for m2 in (100..=500).step_by(50) {
            let t = model.evaluate(m2, 4).unwrap().total;
            assert!(t < last, "m2={m2}: {t} !< {last}");
            last = t;
        }
    }

    #[test]
    fn more_segments_raise_fp() {
        let mut last = -1.0;
        for delta in 2..=12u16 {
            let t = FpModel::new(15, delta, SeqLenMode::H, Backend::ClosedForm).unwrap().evaluate(100, 4).unwrap().total;
            assert!(t > last, "delta={delta}: {t} !> {last}");
            last = t;
        }
    }

    #[test]
    fn rejects_invalid_params() {
        let bad = ModelParams { m2: 8, k2: 9, h: 2, delta: 3, mode: SeqLenMode::H };
        assert!(matches!(pr_efp(&bad, Backend::Oracle), Err(AnalyticsError::InvalidParams(_))));
        let cap = FpModel::with_cap(20, 10, SeqLenMode::H, Backend::Oracle, 1000);
        assert!(matches!(cap, Err(AnalyticsError::Enumeration(_))));
    }
}
