//! Per-node roles for the inductive train/validation/test protocol.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    TrainLabeled,
    TrainUnlabeled,
    #[serde(rename = "val")]
    Validation,
    Test,
}

impl NodeRole {
    /// Nodes visible in the training subgraph.
    pub fn is_training(self) -> bool {
        matches!(self, NodeRole::TrainLabeled | NodeRole::TrainUnlabeled)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::TrainLabeled => "train_labeled",
            NodeRole::TrainUnlabeled => "train_unlabeled",
            NodeRole::Validation => "val",
            NodeRole::Test => "test",
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train_labeled" => Ok(NodeRole::TrainLabeled),
            "train_unlabeled" => Ok(NodeRole::TrainUnlabeled),
            "val" | "validation" => Ok(NodeRole::Validation),
            "test" => Ok(NodeRole::Test),
            other => Err(Error::InvalidConfig(format!("unknown node role `{other}`"))),
        }
    }
}

/// Role of every node. Always covers all `n` nodes and has at least one
/// labeled training node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    roles: Vec<NodeRole>,
}

impl SplitAssignment {
    pub fn new(roles: Vec<NodeRole>) -> Result<Self> {
        if !roles.contains(&NodeRole::TrainLabeled) {
            return Err(Error::InvalidConfig(
                "split assignment has no train_labeled node".into(),
            ));
        }
        Ok(Self { roles })
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    #[inline]
    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn nodes_with(&self, role: NodeRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, role: NodeRole) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    pub fn training_nodes(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_training())
            .map(|(i, _)| i)
            .collect()
    }

    /// Visibility flags for the training subgraph.
    pub fn training_mask(&self) -> Vec<bool> {
        self.roles.iter().map(|r| r.is_training()).collect()
    }
}
