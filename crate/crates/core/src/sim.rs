//! Monte Carlo trials: random placements and paths, end-to-end embedding and
//! recovery, and empirical false-positive rates.
//!
//! Trial `t` draws everything from ChaCha8 seeded with `base_seed` on stream
//! `t`, so trials are independent of each other and of execution order, and a
//! sweep reuses the same placements, paths and packet ids at every grid point.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bloom::BloomFilter;
use crate::protocol::{
    recover_provenance, Arrangement, Classification, Clbf, ClbfParams, LocationKey, PacketId, ProtocolError,
    RecoveryLimits,
};
use crate::segmentation::{
    sample_feasible_sequence, sample_path_sequence, NodeId, NodePlacement, SegmentId, SegmentSequence, SeqLenMode,
};

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), seed = base_seed, stream = trial index";
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;
pub const RSU: NodeId = NodeId(0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("no valid {h}-hop path under the placement")]
    NoValidPath { h: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl SimError {
    /// Per-trial failures that are counted as skips rather than aborting a point.
    pub fn is_skip(&self) -> bool {
        matches!(
            self,
            SimError::NoValidPath { .. }
                | SimError::Protocol(ProtocolError::PathExplosion { .. } | ProtocolError::ArrangementExplosion { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlacementPolicy {
    /// `count` nodes per segment, the RSU occupying one slot of `A1`; needs `N = count * delta`.
    UniformPerSegment(usize),
    /// Every vehicle in a uniformly random segment.
    Random,
    /// `h` vehicles on a uniformly random valid sequence, the rest uniformly random.
    Lattice,
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlacementPolicy::UniformPerSegment(c) => write!(f, "uniform_per_segment({c})"),
            PlacementPolicy::Random => f.write_str("random"),
            PlacementPolicy::Lattice => f.write_str("lattice"),
        }
    }
}

impl FromStr for PlacementPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PlacementPolicy::Random),
            "lattice" => Ok(PlacementPolicy::Lattice),
            _ => s
                .strip_prefix("uniform_per_segment(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|c| c.trim().parse().ok())
                .map(PlacementPolicy::UniformPerSegment)
                .ok_or_else(|| format!("unknown placement `{s}` (random, lattice, uniform_per_segment(C))")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Nodes including the RSU.
    pub n_nodes: usize,
    pub delta: u16,
    pub h: usize,
    pub m1: u32,
    pub k1: u16,
    pub m2: u32,
    pub k2: u16,
    pub placement: PlacementPolicy,
    pub mode: SeqLenMode,
    pub trials: u64,
    pub base_seed: u64,
    pub limits: RecoveryLimits,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.delta == 0 {
            return bad("delta must be at least 1".into());
        }
        if self.h == 0 || self.h > usize::from(u8::MAX) {
            return bad(format!("h = {} outside [1, 255]", self.h));
        }
        if self.n_nodes < self.h + 1 {
            return bad(format!("N = {} cannot host a {}-hop path of distinct nodes", self.n_nodes, self.h));
        }
        if u32::from(self.k1) > self.m1 || self.k1 == 0 || u32::from(self.k2) > self.m2 || self.k2 == 0 {
            return bad(format!(
                "need 1 <= k1 <= m1 and 1 <= k2 <= m2 (m1 = {}, k1 = {}, m2 = {}, k2 = {})",
                self.m1, self.k1, self.m2, self.k2
            ));
        }
        if let PlacementPolicy::UniformPerSegment(c) = self.placement {
            if c == 0 || self.n_nodes != c * usize::from(self.delta) {
                return bad(format!(
                    "uniform_per_segment({c}) needs N = {c} * delta = {}, got N = {}",
                    c * usize::from(self.delta),
                    self.n_nodes
                ));
            }
        }
        Ok(())
    }

    pub fn clbf_params(&self, trial_index: u64) -> ClbfParams {
        ClbfParams { m1: self.m1, k1: self.k1, m2: self.m2, k2: self.k2, seed: self.base_seed ^ trial_index }
    }
}

pub fn trial_rng(base_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial_index);
    rng
}

/// Places vehicles `1..N` (the RSU is node 0, in `A1`).
pub fn generate_network<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<NodePlacement, SimError> {
    config.validate()?;
    let mut vehicles: Vec<NodeId> = (1..config.n_nodes as u32).map(NodeId).collect();
    vehicles.shuffle(rng);
    let mut placement = NodePlacement::new(RSU);
    let r = config.delta;
    match config.placement {
        PlacementPolicy::UniformPerSegment(c) => {
            let slots = (1..=r).flat_map(|s| std::iter::repeat_n(SegmentId(s), if s == 1 { c - 1 } else { c }));
            for (node, seg) in vehicles.into_iter().zip(slots) {
                placement.place(node, seg);
            }
        }
        PlacementPolicy::Random => {
            for node in vehicles {
                placement.place(node, SegmentId(rng.gen_range(1..=r)));
            }
        }
        PlacementPolicy::Lattice => {
            let unlimited = vec![config.h; usize::from(r)];
            let seq = sample_feasible_sequence(&unlimited, config.h, config.mode, rng)
                .ok_or(SimError::NoValidPath { h: config.h })?;
            let mut rest = vehicles.into_iter();
            for (&s, node) in seq.iter().zip(rest.by_ref()) {
                placement.place(node, SegmentId(s));
            }
            for node in rest {
                placement.place(node, SegmentId(rng.gen_range(1..=r)));
            }
        }
    }
    Ok(placement)
}

/// A uniformly random valid `h`-hop path into the RSU: nodes source first
/// (RSU last) and the RSU-outward segment sequence of the embedders.
pub fn generate_path<R: Rng + ?Sized>(
    placement: &NodePlacement,
    r: u16,
    h: usize,
    mode: SeqLenMode,
    rng: &mut R,
) -> Result<(Vec<NodeId>, Vec<u16>), SimError> {
    let mut by_segment: Vec<Vec<NodeId>> = vec![Vec::new(); usize::from(r)];
    for (node, seg) in placement.vehicles() {
        by_segment[usize::from(seg.0) - 1].push(node);
    }
    let counts: Vec<usize> = by_segment.iter().map(Vec::len).collect();
    let seq = sample_path_sequence(&counts, h, mode, rng).ok_or(SimError::NoValidPath { h })?;
    for nodes in by_segment.iter_mut() {
        nodes.shuffle(rng);
    }
    let mut outward = Vec::with_capacity(h);
    for &s in &seq {
        outward.push(by_segment[usize::from(s) - 1].pop().expect("sampler respects counts"));
    }
    let mut path: Vec<NodeId> = outward.into_iter().rev().collect();
    path.push(placement.rsu());
    Ok((path, seq))
}

/// Source embeds, every relay embeds, the last relay delivers to the RSU.
pub fn embed_path(clbf: &mut Clbf, path: &[NodeId], seq: &[u16]) -> Result<(), ProtocolError> {
    let h = seq.len();
    clbf.source_embed(path[0], SegmentId(seq[h - 1]))?;
    for i in 1..h {
        clbf.forward_embed(path[i - 1], path[i], SegmentId(seq[h - 1 - i]))?;
    }
    clbf.deliver(path[h - 1], path[h])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub classification: Classification,
    /// Bits set in the location filter.
    pub alpha: u32,
    pub arrangements_count: usize,
    pub paths_count: usize,
}

pub fn run_trial(config: &ScenarioConfig, trial_index: u64) -> Result<TrialResult, SimError> {
    let mut rng = trial_rng(config.base_seed, trial_index);
    let placement = generate_network(config, &mut rng)?;
    let (path, seq) = generate_path(&placement, config.delta, config.h, config.mode, &mut rng)?;
    let pid = PacketId(rng.gen());
    let mut clbf = Clbf::new(config.clbf_params(trial_index), pid)?;
    embed_path(&mut clbf, &path, &seq)?;
    let outcome =
        recover_provenance(&clbf, &placement.nodes(), placement.rsu(), config.delta, config.mode, config.limits)?;
    let truth = Arrangement { path, sequence: SegmentSequence::from_indices(&seq) };
    Ok(TrialResult {
        classification: outcome.classify(&truth),
        alpha: clbf.location_filter().popcount(),
        arrangements_count: outcome.arrangements.len(),
        paths_count: outcome.paths.len(),
    })
}

/// Every trial of `config`, in trial order.
pub fn run_trials(config: &ScenarioConfig) -> Vec<Result<TrialResult, SimError>> {
    (0..config.trials).into_par_iter().map(|t| run_trial(config, t)).collect()
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (n, p) = (n as f64, successes as f64 / n as f64);
    let z2 = Z95 * Z95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    K2,
    M2,
    Delta,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::K2 => "k2",
            SweepAxis::M2 => "m2",
            SweepAxis::Delta => "delta",
        }
    }

    pub fn apply(self, config: &ScenarioConfig, value: u32) -> Result<ScenarioConfig, SimError> {
        let mut c = *config;
        let narrow = |v: u32| u16::try_from(v).map_err(|_| SimError::InvalidConfig(format!("{v} exceeds u16")));
        match self {
            SweepAxis::K2 => c.k2 = narrow(value)?,
            SweepAxis::M2 => c.m2 = value,
            SweepAxis::Delta => c.delta = narrow(value)?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k2" => Ok(SweepAxis::K2),
            "m2" => Ok(SweepAxis::M2),
            "delta" => Ok(SweepAxis::Delta),
            _ => Err(format!("unknown sweep axis `{s}` (k2, m2, delta)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_value: u32,
    /// Completed (non-skipped) trials.
    pub trials: u64,
    pub fp_count: u64,
    pub fp_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_alpha: f64,
    pub skipped_trials: u64,
    pub miss_count: u64,
    /// Set when the point could not run at all.
    pub error: Option<String>,
}

impl SweepResult {
    fn failed(axis_value: u32, err: &SimError) -> Self {
        SweepResult {
            axis_value,
            trials: 0,
            fp_count: 0,
            fp_rate: 0.0,
            ci_low: 0.0,
            ci_high: 1.0,
            mean_alpha: 0.0,
            skipped_trials: 0,
            miss_count: 0,
            error: Some(err.to_string()),
        }
    }
}

/// Runs all trials of one configuration. Hard errors abort; skips are counted.
pub fn run_point(config: &ScenarioConfig, axis_value: u32) -> Result<SweepResult, SimError> {
    config.validate()?;
    let (mut trials, mut fp, mut miss, mut skipped, mut alpha_sum) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for result in run_trials(config) {
        match result {
            Ok(t) => {
                trials += 1;
                alpha_sum += u64::from(t.alpha);
                match t.classification {
                    Classification::FalsePositive => fp += 1,
                    Classification::Miss => miss += 1,
                    Classification::Unique => {}
                }
            }
            Err(e) if e.is_skip() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let fp_rate = if trials == 0 { 0.0 } else { fp as f64 / trials as f64 };
    let (ci_low, ci_high) = wilson_interval(fp, trials);
    Ok(SweepResult {
        axis_value,
        trials,
        fp_count: fp,
        fp_rate,
        ci_low,
        ci_high,
        mean_alpha: if trials == 0 { 0.0 } else { alpha_sum as f64 / trials as f64 },
        skipped_trials: skipped,
        miss_count: miss,
        error: None,
    })
}

/// One result per value, in the given order. A failing point is recorded and
/// the sweep continues.
pub fn run_sweep(config: &ScenarioConfig, axis: SweepAxis, values: &[u32]) -> Vec<SweepResult> {
    values
        .iter()
        .map(|&v| {
            axis.apply(config, v)
                .and_then(|c| run_point(&c, v))
                .unwrap_or_else(|e| SweepResult::failed(v, &e))
        })
        .collect()
}

/// Monte Carlo histogram of lit location-filter bits after `h` embeddings of
/// `k2` hashes each. Entry `a` counts trials with `alpha = a`.
pub fn alpha_histogram(m2: u32, k2: u16, h: usize, trials: u64, base_seed: u64) -> Result<Vec<u64>, SimError> {
    BloomFilter::new(m2, k2, 0).map_err(ProtocolError::from)?;
    let top = (u64::from(k2) * h as u64).min(u64::from(m2)) as usize;
    let alphas: Vec<u32> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(base_seed, t);
            let mut filter = BloomFilter::new(m2, k2, rng.gen()).expect("validated");
            let pid = PacketId(rng.gen());
            for node in 1..=h as u32 {
                let segment = SegmentId(rng.gen_range(1..=u16::MAX));
                filter.insert(&LocationKey { node: NodeId(node), segment, pid }.key());
            }
            filter.popcount()
        })
        .collect();
    let mut hist = vec![0u64; top + 1];
    for a in alphas {
        hist[a as usize] += 1;
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaBin {
    pub alpha: u32,
    pub trials: u64,
    pub fp_count: u64,
}

/// Empirical false-positive counts grouped by `alpha`, ascending.
pub fn fp_by_alpha(results: &[TrialResult]) -> Vec<AlphaBin> {
    let mut bins: std::collections::BTreeMap<u32, (u64, u64)> = Default::default();
    for t in results {
        let e = bins.entry(t.alpha).or_default();
        e.0 += 1;
        if t.classification == Classification::FalsePositive {
            e.1 += 1;
        }
    }
    bins.into_iter().map(|(alpha, (trials, fp_count))| AlphaBin { alpha, trials, fp_count }).collect()
}
