//! Correlated linear Bloom filter (CLBF) packets: embedding at the source and
//! forwarders, and provenance recovery at the RSU.
//!
//! Embedding accounting for an `h`-hop path `v_1 -> ... -> v_h -> RSU`:
//!
//! * the source `v_1` only inserts its location pair;
//! * each forwarder `v_i` inserts the edge `(v_{i-1}, v_i)` and its location pair;
//! * the last forwarder inserts the edge into the RSU when it transmits
//!   ([`Clbf::deliver`]); the RSU's reception adds nothing.
//!
//! So the edge filter holds `h` edges, the location filter `h` pairs, and
//! `hop_count == h`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bloom::{BloomError, BloomFilter, Key};
use crate::segmentation::{NodeId, SegmentId, SegmentSequence, SeqLenMode};

pub const DEFAULT_MAX_PATH_EXPANSIONS: u64 = 1_000_000;
pub const DEFAULT_MAX_ARRANGEMENTS: usize = 1_000_000;

/// Bytes before the two bit images in the wire format.
pub const CLBF_HEADER_LEN: usize = 8 + 1 + 4 + 4 + 2 + 2 + 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Bloom(#[from] BloomError),
    #[error("source embedding requires a fresh packet (hop_count = {hop_count})")]
    NotFresh { hop_count: u8 },
    #[error("forwarding requires a prior source embedding")]
    NoSource,
    #[error("edge endpoints must differ (both {0})")]
    SelfEdge(NodeId),
    #[error("hop count overflow (max 255 embeddings)")]
    HopOverflow,
    #[error("path recovery exceeded {limit} DFS expansions")]
    PathExplosion { limit: u64 },
    #[error("location recovery exceeded {limit} arrangements")]
    ArrangementExplosion { limit: usize },
    #[error("malformed CLBF image: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub prev: NodeId,
    pub curr: NodeId,
    pub pid: PacketId,
}

impl EdgeKey {
    pub fn key(&self) -> Key {
        Key::from_fields(&[&self.prev.0.to_le_bytes(), &self.curr.0.to_le_bytes(), &self.pid.0.to_le_bytes()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationKey {
    pub node: NodeId,
    pub segment: SegmentId,
    pub pid: PacketId,
}

impl LocationKey {
    pub fn key(&self) -> Key {
        Key::from_fields(&[&self.node.0.to_le_bytes(), &self.segment.0.to_le_bytes(), &self.pid.0.to_le_bytes()])
    }
}

/// Filter geometry shared by every packet of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClbfParams {
    pub m1: u32,
    pub k1: u16,
    pub m2: u32,
    pub k2: u16,
    pub seed: u64,
}

impl ClbfParams {
    pub fn total_bits(&self) -> u64 {
        u64::from(self.m1) + u64::from(self.m2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clbf {
    edge_filter: BloomFilter,
    location_filter: BloomFilter,
    pid: PacketId,
    hop_count: u8,
    seed: u64,
}

impl Clbf {
    /// Empty packet. The edge filter uses `seed`, the location filter `seed + 1`.
    pub fn new(params: ClbfParams, pid: PacketId) -> Result<Self, ProtocolError> {
        Ok(Clbf {
            edge_filter: BloomFilter::new(params.m1, params.k1, params.seed)?,
            location_filter: BloomFilter::new(params.m2, params.k2, params.seed.wrapping_add(1))?,
            pid,
            hop_count: 0,
            seed: params.seed,
        })
    }

    pub fn params(&self) -> ClbfParams {
        ClbfParams {
            m1: self.edge_filter.m(),
            k1: self.edge_filter.k(),
            m2: self.location_filter.m(),
            k2: self.location_filter.k(),
            seed: self.seed,
        }
    }

    pub fn pid(&self) -> PacketId {
        self.pid
    }

    pub fn hop_count(&self) -> u8 {
        self.hop_count
    }

    pub fn edge_filter(&self) -> &BloomFilter {
        &self.edge_filter
    }

    pub fn location_filter(&self) -> &BloomFilter {
        &self.location_filter
    }

    pub fn edge_filter_mut(&mut self) -> &mut BloomFilter {
        &mut self.edge_filter
    }

    pub fn location_filter_mut(&mut self) -> &mut BloomFilter {
        &mut self.location_filter
    }

    pub fn source_embed(&mut self, source: NodeId, seg: SegmentId) -> Result<(), ProtocolError> {
        if self.hop_count != 0 {
            return Err(ProtocolError::NotFresh { hop_count: self.hop_count });
        }
        self.location_filter.insert(&LocationKey { node: source, segment: seg, pid: self.pid }.key());
        self.hop_count = 1;
        Ok(())
    }

    pub fn forward_embed(&mut self, prev: NodeId, curr: NodeId, seg: SegmentId) -> Result<(), ProtocolError> {
        if self.hop_count == 0 {
            return Err(ProtocolError::NoSource);
        }
        if prev == curr {
            return Err(ProtocolError::SelfEdge(curr));
        }
        let next = self.hop_count.checked_add(1).ok_or(ProtocolError::HopOverflow)?;
        self.edge_filter.insert(&EdgeKey { prev, curr, pid: self.pid }.key());
        self.location_filter.insert(&LocationKey { node: curr, segment: seg, pid: self.pid }.key());
        self.hop_count = next;
        Ok(())
    }

    /// Final transmission: the last forwarder records the edge into the RSU.
    pub fn deliver(&mut self, last: NodeId, rsu: NodeId) -> Result<(), ProtocolError> {
        if self.hop_count == 0 {
            return Err(ProtocolError::NoSource);
        }
        if last == rsu {
            return Err(ProtocolError::SelfEdge(rsu));
        }
        self.edge_filter.insert(&EdgeKey { prev: last, curr: rsu, pid: self.pid }.key());
        Ok(())
    }

    pub fn has_edge(&self, prev: NodeId, curr: NodeId) -> bool {
        self.edge_filter.contains(&EdgeKey { prev, curr, pid: self.pid }.key())
    }

    pub fn has_location(&self, node: NodeId, segment: SegmentId) -> bool {
        self.location_filter.contains(&LocationKey { node, segment, pid: self.pid }.key())
    }

    /// Wire image: header (pid u64, hop_count u8, m1 u32, m2 u32, k1 u16, k2 u16,
    /// seed u64; little-endian) followed by the edge and location bit images.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = self.params();
        let mut out = Vec::with_capacity(CLBF_HEADER_LEN + (p.m1 as usize).div_ceil(8) + (p.m2 as usize).div_ceil(8));
        out.extend_from_slice(&self.pid.0.to_le_bytes());
        out.push(self.hop_count);
        out.extend_from_slice(&p.m1.to_le_bytes());
        out.extend_from_slice(&p.m2.to_le_bytes());
        out.extend_from_slice(&p.k1.to_le_bytes());
        out.extend_from_slice(&p.k2.to_le_bytes());
        out.extend_from_slice(&p.seed.to_le_bytes());
        out.extend_from_slice(&self.edge_filter.bit_bytes());
        out.extend_from_slice(&self.location_filter.bit_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() < CLBF_HEADER_LEN {
            return Err(ProtocolError::Malformed(format!(
                "{} bytes is shorter than the {CLBF_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        let pid = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let hop_count = bytes[8];
        let m1 = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        let m2 = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
        let k1 = u16::from_le_bytes(bytes[17..19].try_into().unwrap());
        let k2 = u16::from_le_bytes(bytes[19..21].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[21..29].try_into().unwrap());
        let n1 = (m1 as usize).div_ceil(8);
        let n2 = (m2 as usize).div_ceil(8);
        let body = &bytes[CLBF_HEADER_LEN..];
        if body.len() != n1 + n2 {
            return Err(ProtocolError::Malformed(format!(
                "body has {} bytes, header implies {}",
                body.len(),
                n1 + n2
            )));
        }
        Ok(Clbf {
            edge_filter: BloomFilter::from_bit_bytes(m1, k1, seed, &body[..n1])?,
            location_filter: BloomFilter::from_bit_bytes(m2, k2, seed.wrapping_add(1), &body[n1..])?,
            pid: PacketId(pid),
            hop_count,
            seed,
        })
    }
}

/// One candidate explanation of the packet: a node path (source first, RSU
/// last) and the RSU-outward segment sequence of its embedders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arrangement {
    pub path: Vec<NodeId>,
    pub sequence: SegmentSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Unique,
    FalsePositive,
    /// The true arrangement was not recovered. Bloom filters have no false
    /// negatives, so this indicates a bug.
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryLimits {
    pub max_path_expansions: u64,
    pub max_arrangements: usize,
}

impl Default for RecoveryLimits {
    fn default() -> Self {
        RecoveryLimits {
            max_path_expansions: DEFAULT_MAX_PATH_EXPANSIONS,
            max_arrangements: DEFAULT_MAX_ARRANGEMENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryOutcome {
    pub edges: Vec<EdgeKey>,
    pub paths: Vec<Vec<NodeId>>,
    pub arrangements: Vec<Arrangement>,
    pub edge_tests: u64,
    pub location_tests: u64,
}

impl RecoveryOutcome {
    pub fn classify(&self, truth: &Arrangement) -> Classification {
        if !self.arrangements.contains(truth) {
            Classification::Miss
        } else if self.arrangements.len() > 1 {
            Classification::FalsePositive
        } else {
            Classification::Unique
        }
    }
}

/// Tests every ordered pair of distinct nodes against the edge filter.
/// Returns the passing edges and the number of membership tests.
pub fn recover_edges(clbf: &Clbf, nodes: &[NodeId]) -> (Vec<EdgeKey>, u64) {
    let mut edges = Vec::new();
    let mut tests = 0;
    for &a in nodes {
        for &b in nodes {
            if a == b {
                continue;
            }
            tests += 1;
            if clbf.has_edge(a, b) {
                edges.push(EdgeKey { prev: a, curr: b, pid: clbf.pid() });
            }
        }
    }
    (edges, tests)
}

/// All simple paths with exactly `h` edges that end at `rsu`, built by DFS
/// backwards from the RSU over `edges`. Paths are listed source first.
/// `source_candidates = None` lets any node start a path.
pub fn recover_paths(
    edges: &[EdgeKey],
    source_candidates: Option<&BTreeSet<NodeId>>,
    rsu: NodeId,
    h: usize,
    max_expansions: u64,
) -> Result<Vec<Vec<NodeId>>, ProtocolError> {
    let mut incoming: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for e in edges {
        incoming.entry(e.curr).or_default().push(e.prev);
    }
    let mut paths = Vec::new();
    let mut stack = vec![rsu];
    let mut expansions = 0u64;
    walk_back(&incoming, source_candidates, h, &mut stack, &mut paths, &mut expansions, max_expansions)?;
    paths.sort();
    Ok(paths)
}

fn walk_back(
    incoming: &BTreeMap<NodeId, Vec<NodeId>>,
    sources: Option<&BTreeSet<NodeId>>,
    h: usize,
    stack: &mut Vec<NodeId>,
    out: &mut Vec<Vec<NodeId>>,
    expansions: &mut u64,
    limit: u64,
) -> Result<(), ProtocolError> {
    *expansions += 1;
    if *expansions > limit {
        return Err(ProtocolError::PathExplosion { limit });
    }
    let head = *stack.last().unwrap();
    if stack.len() == h + 1 {
        if sources.is_none_or(|s| s.contains(&head)) {
            out.push(stack.iter().rev().copied().collect());
        }
        return Ok(());
    }
    if let Some(preds) = incoming.get(&head) {
        for &p in preds {
            if !stack.contains(&p) {
                stack.push(p);
                walk_back(incoming, sources, h, stack, out, expansions, limit)?;
                stack.pop();
            }
        }
    }
    Ok(())
}

/// Pairs every embedder of `path` (source first, RSU excluded) with all `r`
/// segments, then keeps the combinations that form a valid sequence under `mode`.
/// Returns the RSU-outward sequences and the number of membership tests.
pub fn recover_locations(
    clbf: &Clbf,
    embedders: &[NodeId],
    r: u16,
    mode: SeqLenMode,
    max_arrangements: usize,
) -> Result<(Vec<SegmentSequence>, u64), ProtocolError> {
    // RSU-outward: the last embedder is nearest the RSU.
    let allowed: Vec<Vec<bool>> = embedders
        .iter()
        .rev()
        .map(|&node| (1..=r).map(|s| clbf.has_location(node, SegmentId(s))).collect())
        .collect();
    let tests = embedders.len() as u64 * u64::from(r);
    let mut out = Vec::new();
    if embedders.is_empty() {
        return Ok((out, tests));
    }
    let mut current = Vec::with_capacity(embedders.len());
    // Value preceding position 0: the anchor under HPlus1, nothing under H.
    let first: &[u16] = match mode {
        SeqLenMode::H => &[1],
        SeqLenMode::HPlus1 => &[1, 2],
    };
    for &s in first {
        if s <= r && allowed[0][usize::from(s) - 1] {
            current.push(s);
            extend_locations(&allowed, r, &mut current, &mut out, max_arrangements)?;
            current.pop();
        }
    }
    Ok((out, tests))
}

fn extend_locations(
    allowed: &[Vec<bool>],
    r: u16,
    current: &mut Vec<u16>,
    out: &mut Vec<SegmentSequence>,
    limit: usize,
) -> Result<(), ProtocolError> {
    if current.len() == allowed.len() {
        if out.len() == limit {
            return Err(ProtocolError::ArrangementExplosion { limit });
        }
        out.push(SegmentSequence::from_indices(current));
        return Ok(());
    }
    let last = *current.last().unwrap();
    let pos = current.len();
    for next in [last, last + 1] {
        if next <= r && allowed[pos][usize::from(next) - 1] {
            current.push(next);
            extend_locations(allowed, r, current, out, limit)?;
            current.pop();
        }
    }
    Ok(())
}

/// Full RSU pipeline: edges, then `hop_count`-hop paths into the RSU, then
/// location sequences for every path.
pub fn recover_provenance(
    clbf: &Clbf,
    nodes: &[NodeId],
    rsu: NodeId,
    r: u16,
    mode: SeqLenMode,
    limits: RecoveryLimits,
) -> Result<RecoveryOutcome, ProtocolError> {
    let (edges, edge_tests) = recover_edges(clbf, nodes);
    let h = usize::from(clbf.hop_count());
    let paths = recover_paths(&edges, None, rsu, h, limits.max_path_expansions)?;
    let mut arrangements = Vec::new();
    let mut location_tests = 0;
    for path in &paths {
        let budget = limits.max_arrangements - arrangements.len();
        let (seqs, tests) = recover_locations(clbf, &path[..path.len() - 1], r, mode, budget)
            .map_err(|e| match e {
                ProtocolError::ArrangementExplosion { .. } => {
                    ProtocolError::ArrangementExplosion { limit: limits.max_arrangements }
                }
                other => other,
            })?;
        location_tests += tests;
        arrangements.extend(seqs.into_iter().map(|sequence| Arrangement { path: path.clone(), sequence }));
    }
    Ok(RecoveryOutcome { edges, paths, arrangements, edge_tests, location_tests })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m1: u32, k1: u16, m2: u32, k2: u16) -> ClbfParams {
        ClbfParams { m1, k1, m2, k2, seed: 7 }
    }

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    /// Embeds `path` (source first) with RSU-outward segments `seq`.
    fn embed(clbf: &mut Clbf, path: &[NodeId], seq: &[u16], rsu: NodeId) {
        let segs: Vec<u16> = seq.iter().rev().copied().collect();
        clbf.source_embed(path[0], SegmentId(segs[0])).unwrap();
        for i in 1..path.len() {
            clbf.forward_embed(path[i - 1], path[i], SegmentId(segs[i])).unwrap();
        }
        clbf.deliver(*path.last().unwrap(), rsu).unwrap();
    }

    #[test]
    fn source_embed_touches_only_location_filter() {
        let mut c = Clbf::new(params(8, 3, 8, 3), PacketId(1)).unwrap();
        c.source_embed(n(4), SegmentId(3)).unwrap();
        assert_eq!(c.edge_filter().popcount(), 0);
        assert!((1..=3).contains(&c.location_filter().popcount()));
        assert!(c.has_location(n(4), SegmentId(3)));
        assert_eq!(c.hop_count(), 1);
        assert_eq!(c.source_embed(n(4), SegmentId(3)), Err(ProtocolError::NotFresh { hop_count: 1 }));
    }

    #[test]
    fn forward_embed_records_edge_and_location() {
        let mut c = Clbf::new(params(64, 3, 64, 3), PacketId(9)).unwrap();
        assert_eq!(c.forward_embed(n(1), n(2), SegmentId(1)), Err(ProtocolError::NoSource));
        c.source_embed(n(1), SegmentId(2)).unwrap();
        c.forward_embed(n(1), n(2), SegmentId(1)).unwrap();
        assert!(c.has_edge(n(1), n(2)));
        assert!(c.has_location(n(2), SegmentId(1)));
        assert_eq!(c.forward_embed(n(2), n(2), SegmentId(1)), Err(ProtocolError::SelfEdge(n(2))));
        assert_eq!(c.hop_count(), 2);
    }

    #[test]
    fn hop_count_after_fourteen_forwards() {
        let mut c = Clbf::new(params(256, 4, 200, 5), PacketId(3)).unwrap();
        c.source_embed(n(15), SegmentId(8)).unwrap();
        for i in (1..15).rev() {
            c.forward_embed(n(i + 1), n(i), SegmentId(1)).unwrap();
        }
        assert_eq!(c.hop_count(), 15);
    }

    #[test]
    fn wire_roundtrip_and_layout() {
        let mut c = Clbf::new(params(8, 3, 8, 3), PacketId(0xdead_beef)).unwrap();
        embed(&mut c, &[n(3), n(2), n(1)], &[1, 2, 2], n(0));
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), CLBF_HEADER_LEN + 2);
        assert_eq!(&bytes[..8], &0xdead_beefu64.to_le_bytes());
        assert_eq!(bytes[8], 3);
        assert_eq!(Clbf::from_bytes(&bytes).unwrap(), c);
        assert!(Clbf::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Clbf::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn edge_recovery_tests_every_ordered_pair() {
        let mut c = Clbf::new(params(4096, 4, 64, 2), PacketId(1)).unwrap();
        c.source_embed(n(1), SegmentId(1)).unwrap();
        c.deliver(n(1), n(0)).unwrap();
        let (edges, tests) = recover_edges(&c, &[n(0), n(1)]);
        assert_eq!(tests, 2);
        assert_eq!(edges, vec![EdgeKey { prev: n(1), curr: n(0), pid: PacketId(1) }]);

        let nodes: Vec<NodeId> = (0..16).map(n).collect();
        let (edges, tests) = recover_edges(&c, &nodes);
        assert_eq!(tests, 240);
        assert!(edges.iter().any(|e| e.prev == n(1) && e.curr == n(0)));
    }

    #[test]
    fn dfs_finds_exact_and_spurious_paths() {
        let pid = PacketId(0);
        let e = |a: u32, b: u32| EdgeKey { prev: n(a), curr: n(b), pid };
        let exact = vec![e(2, 1), e(1, 0)];
        assert_eq!(recover_paths(&exact, None, n(0), 2, 100).unwrap(), vec![vec![n(2), n(1), n(0)]]);

        // One spurious edge 3 -> 1 opens a second two-hop route into the RSU.
        let extra = vec![e(2, 1), e(1, 0), e(3, 1)];
        let paths = recover_paths(&extra, None, n(0), 2, 100).unwrap();
        assert_eq!(paths, vec![vec![n(2), n(1), n(0)], vec![n(3), n(1), n(0)]]);

        let only_two: BTreeSet<NodeId> = [n(2)].into();
        assert_eq!(recover_paths(&extra, Some(&only_two), n(0), 2, 100).unwrap().len(), 1);

        let complete: Vec<EdgeKey> =
            (0..9).flat_map(|a| (0..9).filter(move |&b| b != a).map(move |b| e(a, b))).collect();
        assert_eq!(
            recover_paths(&complete, None, n(0), 8, 1000),
            Err(ProtocolError::PathExplosion { limit: 1000 })
        );
    }

    #[test]
    fn location_recovery_counts_tests() {
        let mut c = Clbf::new(params(4096, 4, 4096, 4), PacketId(5)).unwrap();
        let path = [n(4), n(3), n(2), n(1)];
        embed(&mut c, &path, &[1, 2, 2, 3], n(0));
        let (seqs, tests) = recover_locations(&c, &path, 6, SeqLenMode::H, 100).unwrap();
        assert_eq!(tests, 4 * 6);
        assert_eq!(seqs, vec![SegmentSequence::from_indices(&[1, 2, 2, 3])]);
    }

    /// Location filter with exactly the given (node, segment) pairs lit, using
    /// one hash and a filter large enough that the chosen keys do not collide.
    fn exact_location_filter(pairs: &[(u32, u16)], pid: PacketId) -> Clbf {
        let mut c = Clbf::new(params(64, 1, 1 << 20, 1), pid).unwrap();
        for &(node, seg) in pairs {
            c.location_filter_mut().insert(&LocationKey { node: n(node), segment: SegmentId(seg), pid }.key());
        }
        c
    }

    #[test]
    fn extra_recovery_example() {
        // Path I4 -> I3 -> I2 -> I1 -> RSU with RSU-outward sequence (A1, A2, A2, A3):
        // I1 in A1, I2 and I3 in A2, I4 in A3.
        let truth = [(1, 1), (2, 2), (3, 2), (4, 3)];
        let path = [n(4), n(3), n(2), n(1)];
        let pid = PacketId(77);

        let mut with_a2 = truth.to_vec();
        with_a2.push((4, 2));
        let c = exact_location_filter(&with_a2, pid);
        let (seqs, tests) = recover_locations(&c, &path, 6, SeqLenMode::H, 100).unwrap();
        assert_eq!(tests, 24);
        let got: BTreeSet<Vec<u16>> = seqs.iter().map(|s| s.indices()).collect();
        assert_eq!(got, [vec![1, 2, 2, 2], vec![1, 2, 2, 3]].into());

        let mut with_a1 = truth.to_vec();
        with_a1.push((4, 1));
        let c = exact_location_filter(&with_a1, pid);
        let (seqs, _) = recover_locations(&c, &path, 6, SeqLenMode::H, 100).unwrap();
        assert_eq!(seqs, vec![SegmentSequence::from_indices(&[1, 2, 2, 3])]);
    }

    #[test]
    fn large_filters_recover_uniquely() {
        let mut c = Clbf::new(params(4096, 6, 4096, 6), PacketId(12)).unwrap();
        let path = [n(3), n(2), n(1)];
        embed(&mut c, &path, &[1, 1, 2], n(0));
        let nodes: Vec<NodeId> = (0..6).map(n).collect();
        let out = recover_provenance(&c, &nodes, n(0), 4, SeqLenMode::H, RecoveryLimits::default()).unwrap();
        let truth = Arrangement {
            path: vec![n(3), n(2), n(1), n(0)],
            sequence: SegmentSequence::from_indices(&[1, 1, 2]),
        };
        assert_eq!(out.classify(&truth), Classification::Unique);
        assert_eq!(out.edge_tests, 30);
        assert_eq!(out.location_tests, 12);
    }

    #[test]
    fn saturated_filters_yield_every_permitted_arrangement() {
        let mut c = Clbf::new(params(16, 2, 16, 2), PacketId(2)).unwrap();
        let path = [n(2), n(1)];
        embed(&mut c, &path, &[1, 2], n(0));
        c.edge_filter_mut().fill();
        c.location_filter_mut().fill();
        let nodes: Vec<NodeId> = (0..3).map(n).collect();
        for (mode, per_path) in [(SeqLenMode::H, 2), (SeqLenMode::HPlus1, 4)] {
            let out = recover_provenance(&c, &nodes, n(0), 3, mode, RecoveryLimits::default()).unwrap();
            // Two 2-hop paths into node 0 over three nodes.
            assert_eq!(out.paths.len(), 2);
            assert_eq!(out.arrangements.len(), 2 * per_path);
            assert!(out.arrangements.iter().all(|a| mode.embedders_valid(&a.sequence.indices(), 3)));
        }
    }

    #[test]
    fn classification_rules() {
        let a = Arrangement { path: vec![n(1), n(0)], sequence: SegmentSequence::from_indices(&[1]) };
        let b = Arrangement { path: vec![n(2), n(0)], sequence: SegmentSequence::from_indices(&[1]) };
        let outcome = |arr: Vec<Arrangement>| RecoveryOutcome {
            edges: vec![],
            paths: vec![],
            arrangements: arr,
            edge_tests: 0,
            location_tests: 0,
        };
        assert_eq!(outcome(vec![a.clone()]).classify(&a), Classification::Unique);
        assert_eq!(outcome(vec![a.clone(), b.clone()]).classify(&a), Classification::FalsePositive);
        assert_eq!(outcome(vec![b]).classify(&a), Classification::Miss);
    }
}
