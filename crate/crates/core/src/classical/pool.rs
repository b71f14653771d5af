use serde::{Deserialize, Serialize};

use super::ClassicalError;
use crate::encoding::EncodedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Avg,
    Max,
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avg" => Ok(Pooling::Avg),
            "max" => Ok(Pooling::Max),
            other => Err(format!("unknown pooling `{other}` (expected avg or max)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVector {
    pub values: Vec<f64>,
    pub pooling: Pooling,
}

/// Collapses node features into one vector, discarding edges.
pub fn pool(eg: &EncodedGraph, method: Pooling) -> Result<GraphVector, ClassicalError> {
    let first = eg.node_features.first().ok_or(ClassicalError::EmptyGraph)?;
    let width = first.features.len();
    let mut values = vec![0.0; width];
    for node in &eg.node_features {
        if node.features.len() != width {
            return Err(ClassicalError::WidthMismatch { expected: width, got: node.features.len() });
        }
        for (acc, &b) in values.iter_mut().zip(&node.features) {
            let b = f64::from(b);
            match method {
                Pooling::Avg => *acc += b,
                Pooling::Max => *acc = acc.max(b),
            }
        }
    }
    if method == Pooling::Avg {
        let n = eg.num_nodes() as f64;
        values.iter_mut().for_each(|v| *v /= n);
    }
    Ok(GraphVector { values, pooling: method })
}
