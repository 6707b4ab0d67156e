use std::process::ExitCode;

use clbf::analytics::AnalyticsError;
use clbf::optimizer::OptimizeError;
use clbf::protocol::ProtocolError;
use clbf::segmentation::SegmentationError;
use clbf::sim::SimError;
use thiserror::Error;

/// A routing rule a declared path can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathRule {
    /// Consecutive hops more than one segment apart.
    Adjacency,
    /// A hop moving away from the RSU.
    BackHop,
    /// The hop nearest the RSU is not next to it.
    Anchor,
}

impl PathRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PathRule::Adjacency => "adjacency",
            PathRule::BackHop => "back-hop",
            PathRule::Anchor => "anchor",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("path violates the {} rule: {detail}", rule.as_str())]
    PathRule { rule: PathRule, detail: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::PathRule { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::ResourceCap(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }

    pub fn to_exit_code(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Enumeration(SegmentationError::TooMany { .. }) => CliError::ResourceCap(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Infeasible(msg) => CliError::Infeasible(msg),
            OptimizeError::Analytics(a) => a.into(),
            OptimizeError::EmptyRange | OptimizeError::RangeOutOfBounds { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::PathExplosion { .. } | ProtocolError::ArrangementExplosion { .. } => {
                CliError::ResourceCap(e.to_string())
            }
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(msg) => CliError::Usage(msg),
            SimError::NoValidPath { .. } => CliError::Infeasible(e.to_string()),
            SimError::Protocol(p) => p.into(),
        }
    }
}
