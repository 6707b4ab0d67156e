//! Linear road fragmentation, the node-to-segment map and valid segment
//! sequences.
//!
//! Sequences are always listed RSU-outward: element 0 belongs to the node
//! nearest the RSU. A sequence is valid when it starts at `A1`, never
//! decreases, and grows by at most one per step.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::combinatorics::binom;

/// Default cap on exhaustive sequence enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("coordinate {coordinate} m is outside coverage [0, {road_length})")]
    OutOfCoverage { coordinate: f64, road_length: f64 },
    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),
    #[error("segment index {index} outside [1, {r}]")]
    InvalidSegment { index: u16, r: u16 },
    #[error("enumeration of {requested} sequences exceeds cap {cap}")]
    TooMany { requested: BigUint, cap: usize },
}

/// 1-based segment index; `A1` holds the RSU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentId(pub u16);

impl SegmentId {
    pub fn new(index: u16, r: u16) -> Result<Self, SegmentationError> {
        if index == 0 || index > r {
            return Err(SegmentationError::InvalidSegment { index, r });
        }
        Ok(SegmentId(index))
    }

    pub fn index(self) -> u16 {
        self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.0)
    }
}

/// Uniform partition of `[0, road_length)` into `r` half-open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDictionary {
    road_length: f64,
    boundaries: Vec<f64>,
}

impl SegmentDictionary {
    pub fn uniform(road_length: f64, r: u16) -> Result<Self, SegmentationError> {
        if r == 0 {
            return Err(SegmentationError::InvalidDictionary("segment count must be >= 1".into()));
        }
        if !(road_length.is_finite() && road_length > 0.0) {
            return Err(SegmentationError::InvalidDictionary(format!(
                "road length must be positive, got {road_length}"
            )));
        }
        let width = road_length / f64::from(r);
        let mut boundaries: Vec<f64> = (0..r).map(|i| f64::from(i) * width).collect();
        boundaries.push(road_length);
        Ok(SegmentDictionary { road_length, boundaries })
    }

    pub fn r(&self) -> u16 {
        (self.boundaries.len() - 1) as u16
    }

    pub fn road_length(&self) -> f64 {
        self.road_length
    }

    /// `[start, end)` of a segment.
    pub fn interval(&self, seg: SegmentId) -> (f64, f64) {
        let i = usize::from(seg.0) - 1;
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn locate(&self, coordinate: f64) -> Result<SegmentId, SegmentationError> {
        if !(coordinate >= 0.0 && coordinate < self.road_length) {
            return Err(SegmentationError::OutOfCoverage { coordinate, road_length: self.road_length });
        }
        // Number of interval starts <= coordinate.
        let idx = self.boundaries[..self.boundaries.len() - 1].partition_point(|&b| b <= coordinate);
        Ok(SegmentId(idx as u16))
    }
}

/// The map `g` from nodes to segments, with the RSU pinned to `A1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePlacement {
    rsu: NodeId,
    segments: BTreeMap<NodeId, SegmentId>,
    coordinates: BTreeMap<NodeId, f64>,
}

impl NodePlacement {
    pub fn new(rsu: NodeId) -> Self {
        NodePlacement { rsu, segments: BTreeMap::new(), coordinates: BTreeMap::new() }
    }

    pub fn rsu(&self) -> NodeId {
        self.rsu
    }

    pub fn place(&mut self, node: NodeId, seg: SegmentId) {
        assert_ne!(node, self.rsu, "the RSU is fixed in A1");
        self.segments.insert(node, seg);
    }

    /// Places a node by coordinate, deriving its segment from the dictionary.
    pub fn place_at(
        &mut self,
        node: NodeId,
        coordinate: f64,
        dict: &SegmentDictionary,
    ) -> Result<SegmentId, SegmentationError> {
        let seg = dict.locate(coordinate)?;
        self.place(node, seg);
        self.coordinates.insert(node, coordinate);
        Ok(seg)
    }

    pub fn segment_of(&self, node: NodeId) -> Option<SegmentId> {
        if node == self.rsu {
            return Some(SegmentId(1));
        }
        self.segments.get(&node).copied()
    }

    pub fn coordinate_of(&self, node: NodeId) -> Option<f64> {
        self.coordinates.get(&node).copied()
    }

    /// Vehicles (every node but the RSU), ascending by id.
    pub fn vehicles(&self) -> impl Iterator<Item = (NodeId, SegmentId)> + '_ {
        self.segments.iter().map(|(&n, &s)| (n, s))
    }

    /// Every node including the RSU, ascending by id.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut all: Vec<NodeId> = self.segments.keys().copied().collect();
        all.push(self.rsu);
        all.sort();
        all
    }

    /// Vehicle count per segment; element 0 is `A1`.
    pub fn vehicle_counts(&self, r: u16) -> Vec<usize> {
        let mut counts = vec![0; usize::from(r)];
        for seg in self.segments.values() {
            if let Some(c) = counts.get_mut(usize::from(seg.0) - 1) {
                *c += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentSequence(pub Vec<SegmentId>);

impl SegmentSequence {
    pub fn from_indices(indices: &[u16]) -> Self {
        SegmentSequence(indices.iter().map(|&i| SegmentId(i)).collect())
    }

    pub fn indices(&self) -> Vec<u16> {
        self.0.iter().map(|s| s.0).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SegmentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

pub fn is_valid_sequence(seq: &[u16], r: u16) -> bool {
    match seq.first() {
        Some(&1) => {}
        _ => return false,
    }
    seq.iter().all(|&s| (1..=r).contains(&s)) && seq.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1)
}

/// How the `h` embedding nodes of a path relate to the counted sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum SeqLenMode {
    /// The embedders' own sequence (length `h`) must be valid.
    #[default]
    H,
    /// The RSU is prepended as a fixed `A1` anchor; the sequence has length `h + 1`
    /// and only the last `h` entries belong to embedders.
    HPlus1,
}

impl SeqLenMode {
    pub fn seq_len(self, h: usize) -> usize {
        match self {
            SeqLenMode::H => h,
            SeqLenMode::HPlus1 => h + 1,
        }
    }

    /// Leading sequence positions that are fixed and never tested at recovery.
    pub fn anchored_prefix(self) -> usize {
        match self {
            SeqLenMode::H => 0,
            SeqLenMode::HPlus1 => 1,
        }
    }

    /// Validity of an embedder sequence (RSU-outward, length `h`).
    pub fn embedders_valid(self, embedders: &[u16], r: u16) -> bool {
        match self {
            SeqLenMode::H => is_valid_sequence(embedders, r),
            SeqLenMode::HPlus1 => {
                let mut full = Vec::with_capacity(embedders.len() + 1);
                full.push(1);
                full.extend_from_slice(embedders);
                is_valid_sequence(&full, r)
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeqLenMode::H => "h",
            SeqLenMode::HPlus1 => "h_plus_1",
        }
    }
}

/// `sum_{i=1}^{r} C(len-1, i-1)`.
pub fn count_valid_sequences(r: u16, len: usize) -> BigUint {
    if len == 0 {
        return BigUint::zero();
    }
    (1..=i64::from(r)).map(|i| binom(len as i64 - 1, i - 1)).sum()
}

/// Every valid sequence of length `len` over `r` segments, in lexicographic order.
pub fn enumerate_valid_sequences(
    r: u16,
    len: usize,
    cap: usize,
) -> Result<Vec<SegmentSequence>, SegmentationError> {
    let total = count_valid_sequences(r, len);
    if total > BigUint::from(cap) {
        return Err(SegmentationError::TooMany { requested: total, cap });
    }
    let mut out = Vec::new();
    if len == 0 || r == 0 {
        return Ok(out);
    }
    let mut current = Vec::with_capacity(len);
    current.push(1u16);
    extend_sequences(&mut current, len, r, &mut |s| out.push(SegmentSequence::from_indices(s)));
    Ok(out)
}

fn extend_sequences(current: &mut Vec<u16>, len: usize, r: u16, emit: &mut dyn FnMut(&[u16])) {
    if current.len() == len {
        emit(current);
        return;
    }
    let last = *current.last().unwrap();
    for next in [last, last + 1] {
        if next <= r {
            current.push(next);
            extend_sequences(current, len, r, emit);
            current.pop();
        }
    }
}

/// All valid embedder sequences (length `h`) under `mode`.
pub fn embedder_sequences(
    r: u16,
    h: usize,
    mode: SeqLenMode,
    cap: usize,
) -> Result<Vec<Vec<u16>>, SegmentationError> {
    let skip = mode.anchored_prefix();
    Ok(enumerate_valid_sequences(r, mode.seq_len(h), cap)?
        .into_iter()
        .map(|s| s.indices()[skip..].to_vec())
        .collect())
}

/// Uniformly samples an embedder sequence (RSU-outward, length `h`) that is
/// valid under `mode` and uses at most `counts[s]` nodes of segment `A{s+1}`.
/// Returns `None` when no such sequence exists.
pub fn sample_feasible_sequence<R: Rng + ?Sized>(
    counts: &[usize],
    h: usize,
    mode: SeqLenMode,
    rng: &mut R,
) -> Option<Vec<u16>> {
    sample_runs(counts, h, mode, |_, _| 1.0, rng)
}

/// Like [`sample_feasible_sequence`], but weighs each sequence by the number
/// of node paths realizing it (`prod_s counts[s]! / (counts[s] - b_s)!` for run
/// lengths `b_s`), so that picking nodes uniformly within each run afterwards
/// yields a uniformly random valid path.
pub fn sample_path_sequence<R: Rng + ?Sized>(
    counts: &[usize],
    h: usize,
    mode: SeqLenMode,
    rng: &mut R,
) -> Option<Vec<u16>> {
    sample_runs(counts, h, mode, |c, b| (c - b + 1..=c).map(|x| x as f64).product(), rng)
}

fn sample_runs<R: Rng + ?Sized>(
    counts: &[usize],
    h: usize,
    mode: SeqLenMode,
    run_weight: impl Fn(usize, usize) -> f64,
    rng: &mut R,
) -> Option<Vec<u16>> {
    let r = counts.len();
    if h == 0 || r == 0 {
        return None;
    }
    // ways[l][rem]: weighted completions when segments before l are done and
    // `rem` embedders remain for segments l.. (each used segment takes >= 1).
    let mut ways = vec![vec![0f64; h + 1]; r + 1];
    for row in ways.iter_mut() {
        row[0] = 1.0;
    }
    for l in (1..r).rev() {
        for rem in 1..=h {
            ways[l][rem] = (1..=counts[l].min(rem)).map(|b| run_weight(counts[l], b) * ways[l + 1][rem - b]).sum();
        }
    }
    let first_min = match mode {
        SeqLenMode::H => 1,
        SeqLenMode::HPlus1 => 0,
    };
    let first_choices: Vec<(usize, f64)> = (first_min..=counts[0].min(h))
        .map(|b| (b, if r > 1 || b == h { run_weight(counts[0], b) * ways[1][h - b] } else { 0.0 }))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let mut runs = vec![pick_weighted(&first_choices, rng)?];
    let mut rem = h - runs[0];
    let mut l = 1;
    while rem > 0 {
        let choices: Vec<(usize, f64)> = (1..=counts[l].min(rem))
            .map(|b| (b, run_weight(counts[l], b) * ways[l + 1][rem - b]))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let b = pick_weighted(&choices, rng)?;
        runs.push(b);
        rem -= b;
        l += 1;
    }
    Some(
        runs.iter()
            .enumerate()
            .flat_map(|(seg, &b)| std::iter::repeat_n(seg as u16 + 1, b))
            .collect(),
    )
}

fn pick_weighted<R: Rng + ?Sized>(choices: &[(usize, f64)], rng: &mut R) -> Option<usize> {
    let total: f64 = choices.iter().map(|c| c.1).sum();
    if choices.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    for &(v, w) in choices {
        if x < w {
            return Some(v);
        }
        x -= w;
    }
    choices.last().map(|c| c.0)
}
