//! Hash-count selection and bit-budget split.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{AnalyticsError, Backend, FpModel};
use crate::segmentation::SeqLenMode;

pub const DEFAULT_EPSILON1: f64 = 1e-4;
pub const DEFAULT_K2_CAP: u16 = 64;
pub const MIN_M1: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("empty k2 range")]
    EmptyRange,
    #[error("k2 range {lo}..={hi} not within [1, m2 = {m2}]")]
    RangeOutOfBounds { lo: u16, hi: u16, m2: u32 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub k2_star: u16,
    /// Set only by [`split_budget`].
    pub k1_star: Option<u16>,
    pub m1: Option<u32>,
    pub m2: u32,
    pub achieved_pr_efp: f64,
    pub curve: Vec<(u16, f64)>,
    /// Any point on the curve was clamped to 1.
    pub clamped: bool,
}

pub fn default_k2_range(m2: u32) -> RangeInclusive<u16> {
    1..=m2.min(u32::from(DEFAULT_K2_CAP)) as u16
}

/// Exhaustive search for the `k2` minimizing the modelled false-positive
/// probability. Ties go to the smaller `k2`.
pub fn optimize_k2(
    m2: u32,
    h: usize,
    delta: u16,
    k2_range: Option<RangeInclusive<u16>>,
    mode: SeqLenMode,
    backend: Backend,
) -> Result<OptimizationResult, OptimizeError> {
    let model = FpModel::new(h, delta, mode, backend)?;
    optimize_k2_with(&model, m2, k2_range)
}

/// [`optimize_k2`] against a prebuilt model.
pub fn optimize_k2_with(
    model: &FpModel,
    m2: u32,
    k2_range: Option<RangeInclusive<u16>>,
) -> Result<OptimizationResult, OptimizeError> {
    let range = k2_range.unwrap_or_else(|| default_k2_range(m2));
    if range.is_empty() {
        return Err(OptimizeError::EmptyRange);
    }
    let (lo, hi) = (*range.start(), *range.end());
    if lo == 0 || u32::from(hi) > m2 {
        return Err(OptimizeError::RangeOutOfBounds { lo, hi, m2 });
    }
    let points: Vec<(u16, f64, bool)> = range
        .into_par_iter()
        .map(|k2| model.evaluate(m2, k2).map(|b| (k2, b.total, b.clamped)))
        .collect::<Result<_, _>>()?;
    let mut best = points[0];
    for &p in &points[1..] {
        if p.1 < best.1 {
            best = p;
        }
    }
    Ok(OptimizationResult {
        k2_star: best.0,
        k1_star: None,
        m1: None,
        m2,
        achieved_pr_efp: best.1,
        curve: points.iter().map(|&(k, v, _)| (k, v)).collect(),
        clamped: points.iter().any(|p| p.2),
    })
}

/// `max(1, round(m1 / h * ln 2))`.
pub fn classical_k(m1: u32, h: usize) -> u16 {
    let k = (f64::from(m1) / h as f64 * std::f64::consts::LN_2).round();
    k.clamp(1.0, f64::from(u16::MAX)) as u16
}

/// `(1 - e^{-k h / m})^k`.
pub fn classical_fp(m1: u32, k1: u16, h: usize) -> f64 {
    (1.0 - (-(f64::from(k1) * h as f64) / f64::from(m1)).exp()).powi(i32::from(k1))
}

/// `min(1, N(N-1) fp)`: chance that any of the tested ordered pairs is a false edge.
pub fn edge_union_bound(m1: u32, k1: u16, h: usize, n_nodes: usize) -> f64 {
    let pairs = (n_nodes * n_nodes.saturating_sub(1)) as f64;
    (pairs * classical_fp(m1, k1, h)).min(1.0)
}

/// Smallest edge-filter size meeting the union bound, with the remaining
/// bits going to the location filter and its `k2` optimized.
pub fn split_budget(
    m: u32,
    h: usize,
    delta: u16,
    n_nodes: usize,
    epsilon1: f64,
    mode: SeqLenMode,
    backend: Backend,
) -> Result<OptimizationResult, OptimizeError> {
    if h == 0 {
        return Err(OptimizeError::Infeasible("h must be at least 1".into()));
    }
    if epsilon1.is_nan() || epsilon1 <= 0.0 {
        return Err(OptimizeError::Infeasible(format!("epsilon1 = {epsilon1} must be positive")));
    }
    let m1 = (MIN_M1..m)
        .find(|&m1| edge_union_bound(m1, classical_k(m1, h), h, n_nodes) <= epsilon1)
        .ok_or_else(|| {
            OptimizeError::Infeasible(format!(
                "no edge filter smaller than m = {m} bits reaches epsilon1 = {epsilon1} for h = {h}, N = {n_nodes}"
            ))
        })?;
    let m2 = m - m1;
    let mut result = optimize_k2(m2, h, delta, None, mode, backend)?;
    result.k1_star = Some(classical_k(m1, h));
    result.m1 = Some(m1);
    Ok(result)
}
