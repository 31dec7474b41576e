use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Factor, FactorGraph};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorFile {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

/// On-disk factor graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorGraphFile {
    pub n_vars: usize,
    pub factors: Vec<FactorFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<usize>,
}

impl From<&FactorGraph> for FactorGraphFile {
    fn from(fg: &FactorGraph) -> Self {
        Self {
            n_vars: fg.n_vars(),
            factors: fg
                .factors()
                .iter()
                .map(|f| FactorFile {
                    vars: f.vars.clone(),
                    table: f.table.clone(),
                })
                .collect(),
            hidden: fg.hidden_vars(),
        }
    }
}

impl FactorGraphFile {
    pub fn into_factor_graph(self) -> Result<FactorGraph> {
        let factors = self.factors.into_iter().map(|f| Factor::new(f.vars, f.table)).collect();
        FactorGraph::new(self.n_vars, factors)?.with_hidden(&self.hidden)
    }
}

impl FactorGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FactorGraphFile::from(self)).expect("factor graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<FactorGraphFile>(s)?.into_factor_graph()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_hidden() {
        let fg = FactorGraph::from_json(r#"{"n_vars":2,"factors":[{"vars":[0,1],"table":[1,2,3,4]}]}"#).unwrap();
        assert_eq!(fg.weight(&[1, 0]), 3.0);
        assert!(fg.hidden_vars().is_empty());
        let fg = FactorGraph::from_json(r#"{"n_vars":2,"factors":[],"hidden":[1]}"#).unwrap();
        assert_eq!(fg.hidden_vars(), vec![1]);
        let back = FactorGraph::from_json(&fg.to_json()).unwrap();
        assert_eq!(back.hidden_vars(), vec![1]);
    }
}
