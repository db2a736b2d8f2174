//! Fitted ensembles and their JSON representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GbdtParams;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, Scaler};

pub const SCHEMA_VERSION: &str = "1";

/// Tree node. Rows with `scaled value <= cut` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        cut: f64,
        gain: f64,
        /// Hessian sum of the training rows reaching this node.
        cover: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                Node::Leaf { .. } => out.push(n),
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    /// Leaf value for an already scaled feature row.
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    cut,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *cut { left } else { right };
                }
            }
        }
    }

    fn validate(&self, cols: usize) -> Result<()> {
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                Node::Leaf { value, cover } => {
                    if !value.is_finite() || !cover.is_finite() {
                        return Err(Error::MalformedModel("non-finite leaf".into()));
                    }
                }
                Node::Split {
                    feature,
                    cut,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= cols {
                        return Err(Error::MalformedModel(format!(
                            "split on feature {feature} but the model has {cols} columns"
                        )));
                    }
                    if !cut.is_finite() {
                        return Err(Error::MalformedModel("non-finite cut".into()));
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub schema_version: String,
    pub params: GbdtParams,
    /// Log-odds of the weighted positive prior.
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    /// Per-feature quantile cuts in scaled feature space.
    pub bin_edges: Vec<Vec<f64>>,
    pub trees: Vec<Node>,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        FeatureConfig::from_names(&self.feature_names)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch(self.schema_version.clone()));
        }
        self.params
            .validate()
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        let cols = self.feature_names.len();
        if self.scaler.means.len() != cols || self.scaler.stds.len() != cols {
            return Err(Error::MalformedModel(
                "scaler length differs from feature count".into(),
            ));
        }
        if self
            .scaler
            .stds
            .iter()
            .any(|s| s.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::MalformedModel("scaler stds must be positive".into()));
        }
        if !self.bin_edges.is_empty() && self.bin_edges.len() != cols {
            return Err(Error::MalformedModel(
                "bin_edges length differs from feature count".into(),
            ));
        }
        if !self.base_score.is_finite() {
            return Err(Error::MalformedModel("non-finite base_score".into()));
        }
        for tree in &self.trees {
            tree.validate(cols)?;
        }
        Ok(())
    }
}

pub fn save_model(model: &GbdtModel) -> String {
    serde_json::to_string(model).expect("model serialization is infallible")
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<serde_json::Value>,
}

pub fn load_model(json_text: &str) -> Result<GbdtModel> {
    let probe: VersionProbe =
        serde_json::from_str(json_text).map_err(|e| Error::MalformedModel(e.to_string()))?;
    match probe.schema_version {
        Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(Error::SchemaVersionMismatch(v)),
        Some(other) => return Err(Error::SchemaVersionMismatch(other.to_string())),
        None => return Err(Error::MalformedModel("missing schema_version".into())),
    }
    let model: GbdtModel =
        serde_json::from_str(json_text).map_err(|e| Error::MalformedModel(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &GbdtModel) -> Result<()> {
    std::fs::write(path, save_model(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<GbdtModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_model(&text)
}

/// Single-stump model over one intensity column, for tests.
#[cfg(test)]
pub(crate) fn stump_json(version: &str) -> String {
    format!(
        r#"{{
  "schema_version": "{version}",
  "params": {{"n_estimators": 1, "max_depth": 1, "max_bin": 256, "min_child_weight": 1.0,
              "learning_rate": 0.3, "l2_reg": 1.0, "scale_pos_weight": 1.0, "max_delta_step": 3.0}},
  "base_score": -1.0,
  "feature_names": ["intensity"],
  "scaler": {{"means": [10.0], "stds": [2.0]}},
  "bin_edges": [[0.0]],
  "trees": [
    {{"feature": 0, "cut": 0.5, "gain": 3.0, "cover": 5.0,
      "left": {{"value": -0.5, "cover": 4.0}},
      "right": {{"value": 2.0, "cover": 1.0}}}}
  ]
}}"#
    )
}
