//! JSON network description.
//!
//! ```json
//! {
//!   "nodes": [{"energy": 1.0}, {"energy": 1.0}, {"energy": 1.0}],
//!   "edges": [{"i": 1, "j": 3, "coupling": 1.0}, {"i": 2, "j": 3, "coupling": 1.0}],
//!   "lambda_env": 1.0,
//!   "source": {"mode": "correlated", "targets": [1, 2], "rate": 0.5, "phase": 0.0},
//!   "drain": {"node": 3, "rate": 1.0}
//! }
//! ```
//!
//! Node labels are 1-based. Unknown keys are rejected.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DrainConfig, NetworkSpec, SourceConfig, SourceMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default = "default_lambda_env")]
    pub lambda_env: f64,
    pub source: SourceEntry,
    pub drain: DrainEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeEntry {
    Independent,
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub mode: ModeEntry,
    pub targets: Vec<usize>,
    pub rate: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrainEntry {
    pub node: usize,
    pub rate: f64,
}

fn default_lambda_env() -> f64 {
    1.0
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Validated network, source and drain.
    pub fn build(&self) -> Result<(NetworkSpec, SourceConfig, DrainConfig)> {
        let n = self.nodes.len();
        let mut couplings = DMatrix::zeros(n, n);
        for e in &self.edges {
            for k in [e.i, e.j] {
                if k == 0 || k > n {
                    return Err(Error::InvalidNetwork(format!("edge node {k} outside 1..={n}")));
                }
            }
            if e.i == e.j {
                return Err(Error::InvalidNetwork(format!("self-loop on node {}", e.i)));
            }
            if couplings[(e.i - 1, e.j - 1)] != 0.0 {
                return Err(Error::InvalidNetwork(format!("duplicate edge {}-{}", e.i, e.j)));
            }
            couplings[(e.i - 1, e.j - 1)] = e.coupling;
            couplings[(e.j - 1, e.i - 1)] = e.coupling;
        }
        let spec = NetworkSpec::new(
            self.nodes.iter().map(|n| n.energy).collect(),
            couplings,
            self.lambda_env,
        )?;
        let mode = match self.source.mode {
            ModeEntry::Independent => SourceMode::Independent,
            ModeEntry::Correlated => SourceMode::Correlated,
        };
        let src = SourceConfig {
            mode,
            targets: self.source.targets.clone(),
            rate: self.source.rate,
            phase: self.source.phase,
        };
        src.validate(&spec)?;
        let drain = DrainConfig {
            target: self.drain.node,
            rate: self.drain.rate,
        };
        drain.validate(&spec)?;
        Ok((spec, src, drain))
    }

    /// File form of an in-memory network.
    pub fn from_parts(spec: &NetworkSpec, src: &SourceConfig, drain: &DrainConfig) -> Self {
        let n = spec.n_nodes();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = spec.couplings()[(i, j)];
                if v != 0.0 {
                    edges.push(EdgeEntry {
                        i: i + 1,
                        j: j + 1,
                        coupling: v,
                    });
                }
            }
        }
        Self {
            nodes: spec
                .site_energies()
                .iter()
                .map(|&energy| NodeEntry { energy })
                .collect(),
            edges,
            lambda_env: spec.env_constant(),
            source: SourceEntry {
                mode: match src.mode {
                    SourceMode::Independent => ModeEntry::Independent,
                    SourceMode::Correlated => ModeEntry::Correlated,
                },
                targets: src.targets.clone(),
                rate: src.rate,
                phase: src.phase,
            },
            drain: DrainEntry {
                node: drain.target,
                rate: drain.rate,
            },
        }
    }
}
