//! TOML scenario files and the built-in figure presets.
//!
//! ```toml
//! [network]
//! nodes = 16                        # including the RSU
//! delta = 8
//! h = 15
//! road_length_m = 800.0             # optional, default 100 m per segment
//! placement = "uniform_per_segment(2)"   # or "random", "lattice"
//! seq_len_mode = "h_plus_1"         # optional, default "h"
//!
//! [filters]
//! m1 = 1024
//! k1 = 8
//! m2 = 200
//! k2 = 9
//! seed = 0                          # optional; used by `trace`
//!
//! [experiment]                      # optional
//! trials = 10000
//! base_seed = 2024
//! axis = "k2"                       # k2, m2 or delta
//! values = [2, 3, 4]                # or from/to/step
//!
//! [optimize]                        # optional
//! total_bits = 1000                 # enables the budget split
//! epsilon1 = 1e-4
//! k2_min = 1
//! k2_max = 64
//!
//! [trace]                           # optional, for `trace`
//! pid = 1
//! path = ["I4@A3", "I3@A2", "I2@A2", "I1@A1"]   # source first
//! ```
//!
//! Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clbf::optimizer::DEFAULT_EPSILON1;
use clbf::protocol::RecoveryLimits;
use clbf::segmentation::{NodeId, SegmentId, SeqLenMode};
use clbf::sim::{PlacementPolicy, ScenarioConfig, SweepAxis};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SEGMENT_LENGTH_M: f64 = 100.0;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    network: NetworkSection,
    filters: FiltersSection,
    experiment: Option<ExperimentSection>,
    optimize: Option<OptimizeSection>,
    trace: Option<TraceSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    nodes: usize,
    delta: u16,
    h: usize,
    road_length_m: Option<f64>,
    #[serde(default = "default_placement")]
    placement: String,
    seq_len_mode: Option<String>,
}

fn default_placement() -> String {
    "random".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiltersSection {
    m1: u32,
    k1: u16,
    m2: u32,
    k2: u16,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    base_seed: u64,
    axis: Option<String>,
    values: Option<Vec<u32>>,
    from: Option<u32>,
    to: Option<u32>,
    step: Option<u32>,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeSection {
    total_bits: Option<u32>,
    epsilon1: Option<f64>,
    k2_min: Option<u16>,
    k2_max: Option<u16>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSection {
    #[serde(default = "default_pid")]
    pid: u64,
    path: Vec<String>,
}

fn default_pid() -> u64 {
    1
}

/// One hop of a declared path: a vehicle and the segment it reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub node: NodeId,
    pub segment: SegmentId,
}

impl FromStr for Hop {
    type Err = String;

    /// `I3@A2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("bad hop `{s}`, expected I<node>@A<segment>");
        let (node, seg) = s.trim().split_once('@').ok_or_else(err)?;
        let node = node.strip_prefix('I').and_then(|n| n.parse().ok()).ok_or_else(err)?;
        let seg = seg.strip_prefix('A').and_then(|n| n.parse().ok()).ok_or_else(err)?;
        Ok(Hop { node: NodeId(node), segment: SegmentId(seg) })
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.node, self.segment)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub total_bits: Option<u32>,
    pub epsilon1: f64,
    pub k2_min: Option<u16>,
    pub k2_max: Option<u16>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { total_bits: None, epsilon1: DEFAULT_EPSILON1, k2_min: None, k2_max: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub pid: u64,
    /// Source first.
    pub path: Vec<Hop>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub road_length_m: f64,
    pub filter_seed: u64,
    pub sweep: Option<Sweep>,
    pub optimize: OptimizeOptions,
    pub trace: Option<TraceOptions>,
}

impl Scenario {
    pub fn from_toml(name: &str, text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(format!("{name}: {e}")))?;
        let parse = |msg: String| CliError::Parse(format!("{name}: {msg}"));
        let net = file.network;
        let placement: PlacementPolicy = net.placement.parse().map_err(parse)?;
        let mode = match net.seq_len_mode.as_deref() {
            None | Some("h") => SeqLenMode::H,
            Some("h_plus_1") => SeqLenMode::HPlus1,
            Some(other) => return Err(parse(format!("unknown seq_len_mode `{other}` (h, h_plus_1)"))),
        };
        let exp = file.experiment;
        let sweep = match &exp {
            Some(e) => sweep_from(e).map_err(parse)?,
            None => None,
        };
        let config = ScenarioConfig {
            n_nodes: net.nodes,
            delta: net.delta,
            h: net.h,
            m1: file.filters.m1,
            k1: file.filters.k1,
            m2: file.filters.m2,
            k2: file.filters.k2,
            placement,
            mode,
            trials: exp.as_ref().map_or(DEFAULT_TRIALS, |e| e.trials),
            base_seed: exp.as_ref().map_or(0, |e| e.base_seed),
            limits: RecoveryLimits::default(),
        };
        config.validate().map_err(|e| parse(e.to_string()))?;
        let road_length_m = net.road_length_m.unwrap_or(DEFAULT_SEGMENT_LENGTH_M * f64::from(net.delta));
        if !(road_length_m > 0.0 && road_length_m.is_finite()) {
            return Err(parse(format!("road_length_m = {road_length_m} must be positive")));
        }
        let optimize = match file.optimize {
            Some(o) => OptimizeOptions {
                total_bits: o.total_bits,
                epsilon1: o.epsilon1.unwrap_or(DEFAULT_EPSILON1),
                k2_min: o.k2_min,
                k2_max: o.k2_max,
            },
            None => OptimizeOptions::default(),
        };
        let trace = match file.trace {
            Some(t) => Some(TraceOptions {
                pid: t.pid,
                path: t.path.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(parse)?,
            }),
            None => None,
        };
        Ok(Scenario {
            name: name.to_string(),
            config,
            road_length_m,
            filter_seed: file.filters.seed,
            sweep,
            optimize,
            trace,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
        Scenario::from_toml(&name, &text)
    }

    /// The declared sweep, or a single point at the configured value of `k2`.
    pub fn sweep_or_point(&self) -> Sweep {
        self.sweep.clone().unwrap_or(Sweep { axis: SweepAxis::K2, values: vec![u32::from(self.config.k2)] })
    }

    /// Validates every grid point up front.
    pub fn point_configs(&self) -> Result<Vec<(u32, ScenarioConfig)>, CliError> {
        let sweep = self.sweep_or_point();
        sweep
            .values
            .iter()
            .map(|&v| sweep.axis.apply(&self.config, v).map(|c| (v, c)))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{}: {e}", self.name)))
    }
}

fn sweep_from(e: &ExperimentSection) -> Result<Option<Sweep>, String> {
    let Some(axis) = &e.axis else {
        if e.values.is_some() || e.from.is_some() || e.to.is_some() {
            return Err("sweep values given without `axis`".into());
        }
        return Ok(None);
    };
    let axis: SweepAxis = axis.parse()?;
    let values = match (&e.values, e.from, e.to) {
        (Some(v), None, None) if e.step.is_none() => v.clone(),
        (None, Some(from), Some(to)) => {
            let step = e.step.unwrap_or(1);
            if step == 0 {
                return Err("step must be positive".into());
            }
            (from..=to).step_by(step as usize).collect()
        }
        _ => return Err("give either `values` or `from`/`to` (with optional `step`)".into()),
    };
    if values.is_empty() {
        return Err("empty sweep".into());
    }
    Ok(Some(Sweep { axis, values }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig3D8,
    Fig3D16,
    Fig4,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig3D8, Preset::Fig3D16, Preset::Fig4, Preset::Fig5];

    pub fn id(self) -> &'static str {
        match self {
            Preset::Fig3D8 => "FIG3_D8",
            Preset::Fig3D16 => "FIG3_D16",
            Preset::Fig4 => "FIG4",
            Preset::Fig5 => "FIG5",
        }
    }

    pub fn file_stem(self) -> String {
        self.id().to_ascii_lowercase()
    }

    pub fn scenario(self) -> Scenario {
        let base = ScenarioConfig {
            n_nodes: 16,
            delta: 8,
            h: 15,
            m1: 1024,
            k1: 8,
            m2: 200,
            k2: 9,
            placement: PlacementPolicy::UniformPerSegment(2),
            mode: SeqLenMode::HPlus1,
            trials: DEFAULT_TRIALS,
            base_seed: 2024,
            limits: RecoveryLimits::default(),
        };
        let (config, sweep) = match self {
            Preset::Fig3D8 => (base, Sweep { axis: SweepAxis::K2, values: (2..=30).collect() }),
            Preset::Fig3D16 => (
                ScenarioConfig { delta: 16, placement: PlacementPolicy::UniformPerSegment(1), ..base },
                Sweep { axis: SweepAxis::K2, values: (2..=30).collect() },
            ),
            Preset::Fig4 => (
                ScenarioConfig { n_nodes: 11, h: 10, delta: 15, k2: 4, placement: PlacementPolicy::Lattice, ..base },
                Sweep { axis: SweepAxis::M2, values: (60..=300).step_by(20).collect() },
            ),
            Preset::Fig5 => (
                ScenarioConfig { m2: 100, k2: 4, placement: PlacementPolicy::Lattice, ..base },
                Sweep { axis: SweepAxis::Delta, values: (2..=16).collect() },
            ),
        };
        Scenario {
            name: self.id().to_string(),
            road_length_m: DEFAULT_SEGMENT_LENGTH_M * f64::from(config.delta),
            config,
            filter_seed: 0,
            sweep: Some(sweep),
            optimize: OptimizeOptions::default(),
            trace: None,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset `{s}` (FIG3_D8, FIG3_D16, FIG4, FIG5)"))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}
