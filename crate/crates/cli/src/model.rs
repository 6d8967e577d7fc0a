//! Model files: KRR models are stored with their training pairs and refitted
//! on load; neural models are training checkpoints.

use std::fs;
use std::path::Path;

use fgw_core::graph::LabeledGraph;
use fgw_core::io::{deserialize_labeled, serialize};
use fgw_core::krr::{Kernel, KrrModel};
use fgw_core::neural::{Checkpoint, NeuralModel, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const KRR_FORMAT: &str = "fgw-krr";
pub const KRR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrFile {
    pub format: String,
    pub version: u32,
    /// `gaussian` or `linear`.
    pub kernel: String,
    pub gamma: Option<f64>,
    pub lambda: f64,
    /// Top-1 accuracy of the chosen point on the validation split.
    pub validation_top1: Option<f64>,
    pub inputs: Vec<Vec<f64>>,
    /// Training graphs as graph documents.
    pub graphs: Vec<String>,
}

impl KrrFile {
    pub fn new(kernel: &Kernel, lambda: f64, validation_top1: Option<f64>, inputs: &[Vec<f64>], graphs: &[LabeledGraph]) -> CliResult<Self> {
        let (name, gamma) = match kernel {
            Kernel::Gaussian { gamma } => ("gaussian", Some(*gamma)),
            Kernel::Linear => ("linear", None),
            Kernel::Precomputed => return Err(CliError::Usage("precomputed kernels cannot be stored".into())),
        };
        Ok(Self {
            format: KRR_FORMAT.into(),
            version: KRR_VERSION,
            kernel: name.into(),
            gamma,
            lambda,
            validation_top1,
            inputs: inputs.to_vec(),
            graphs: graphs.iter().map(serialize).collect(),
        })
    }

    pub fn kernel(&self) -> CliResult<Kernel> {
        match (self.kernel.as_str(), self.gamma) {
            ("gaussian", Some(g)) => Ok(Kernel::gaussian(g)?),
            ("linear", _) => Ok(Kernel::Linear),
            (k, _) => Err(CliError::Data(format!("unsupported kernel {k:?} in model file"))),
        }
    }

    pub fn training_graphs(&self) -> CliResult<Vec<LabeledGraph>> {
        Ok(self.graphs.iter().map(|g| deserialize_labeled(g)).collect::<fgw_core::Result<_>>()?)
    }

    pub fn fit(&self) -> CliResult<KrrModel> {
        Ok(KrrModel::fit(self.kernel()?, self.inputs.clone(), &self.training_graphs()?, self.lambda)?)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fs::write(path, serde_json::to_string(self).expect("model files always serialize"))?;
        Ok(())
    }
}

/// A loaded predictor of either family.
pub enum Predictor {
    Krr { file: KrrFile, model: KrrModel },
    Neural { model: NeuralModel, solver: SolverConfig },
}

impl Predictor {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read model {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if value.get("format").and_then(|v| v.as_str()) == Some(KRR_FORMAT) {
            let file: KrrFile =
                serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if file.version != KRR_VERSION {
                return Err(CliError::Data(format!("unsupported KRR model version {}", file.version)));
            }
            let model = file.fit()?;
            return Ok(Predictor::Krr { file, model });
        }
        let ck = Checkpoint::from_json(&text)?;
        Ok(Predictor::Neural { model: ck.trainer.model, solver: ck.trainer.config.solver })
    }

    /// Template weights at `x`: ridge coefficients or softmax outputs.
    pub fn weights(&self, x: &[f64]) -> CliResult<Vec<f64>> {
        match self {
            Predictor::Krr { model, .. } => Ok(model.weights_at(x)?),
            Predictor::Neural { model, .. } => Ok(model.weights_at(x)?.iter().copied().collect()),
        }
    }
}
