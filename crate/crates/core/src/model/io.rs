use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Graph, LocalMatrix, QgmModel};
use crate::error::Result;

/// On-disk model: each matrix is four `[re, im]` pairs in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub edges: Vec<[usize; 2]>,
    pub visible: Vec<usize>,
    pub matrices: Vec<[[f64; 2]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
    /// Free-form provenance (the CLI stores its run config here).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl From<&QgmModel> for ModelFile {
    fn from(model: &QgmModel) -> Self {
        let matrices = model
            .matrices
            .iter()
            .map(|mat| {
                let p = mat.params();
                [[p[0], p[1]], [p[2], p[3]], [p[4], p[5]], [p[6], p[7]]]
            })
            .collect();
        Self {
            m: model.m(),
            edges: model.graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
            visible: model.graph.visible().to_vec(),
            matrices,
            max_degree: model.graph.degree_bound(),
            config: None,
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<QgmModel> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut graph = Graph::new(self.m, &edges, &self.visible)?;
        if let Some(k) = self.max_degree {
            graph = graph.with_degree_bound(k)?;
        }
        let matrices = self
            .matrices
            .iter()
            .map(|e| {
                let z = |k: usize| C64::new(e[k][0], e[k][1]);
                LocalMatrix::new(z(0), z(1), z(2), z(3))
            })
            .collect();
        QgmModel::new(graph, matrices)
    }
}

impl QgmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(s)?.into_model()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
