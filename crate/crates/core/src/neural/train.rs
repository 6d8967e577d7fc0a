//! Minibatch ADAM training and checkpoints.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::mlp::Mlp;
use super::{init_templates, NeuralModel, SolverConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{symmetrize_and_clamp, MeasureGraph};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TemplateInit {
    /// Uniform `[0, 1]` structure and features.
    #[default]
    RandomUniform,
    /// Distinct training graphs drawn at random.
    FromTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_mlp: f64,
    pub lr_templates: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub learn_templates: bool,
    pub hidden: Vec<usize>,
    pub template_sizes: Vec<usize>,
    pub template_init: TemplateInit,
    pub beta: f64,
    pub n_out: usize,
    /// Clamp learned template features to the per-column range seen in the training targets.
    pub clamp_features: bool,
    pub solver: SolverConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 8,
            lr_mlp: 1e-3,
            lr_templates: 1e-2,
            adam: AdamConfig::default(),
            seed: 0,
            learn_templates: true,
            hidden: vec![100, 100],
            template_sizes: vec![5; 10],
            template_init: TemplateInit::RandomUniform,
            beta: 0.5,
            n_out: 40,
            clamp_features: false,
            solver: SolverConfig::training(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr_mlp >= 0.0 && self.lr_templates >= 0.0) {
            return bad("learning rates must be nonnegative");
        }
        if self.template_sizes.is_empty() || self.template_sizes.contains(&0) {
            return bad("template sizes must be positive and nonempty");
        }
        if self.n_out == 0 {
            return bad("n_out must be positive");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Training state: everything needed to resume bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: NeuralModel,
    adam_mlp: AdamState,
    adam_templates: AdamState,
    rng: ChaCha8Rng,
    pub epoch: usize,
    /// Mean training loss of every finished epoch.
    pub history: Vec<f64>,
    feature_lo: Vec<f64>,
    feature_hi: Vec<f64>,
}

impl Trainer {
    pub fn new(config: TrainConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        if data.is_empty() || data.inputs.len() != data.graphs.len() {
            return Err(Error::InvalidParameter("training set is empty or inconsistent".into()));
        }
        let p = data.inputs[0].len();
        let d = data.graphs[0].feature_dim();
        for (x, g) in data.inputs.iter().zip(&data.graphs) {
            if x.len() != p {
                return Err(Error::DimMismatch(p, x.len()));
            }
            if g.feature_dim() != d {
                return Err(Error::DimMismatch(d, g.feature_dim()));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let templates = init_templates(&config.template_sizes, d, config.template_init, &data.graphs, &mut rng)?;
        let mut sizes = vec![p];
        sizes.extend(&config.hidden);
        sizes.push(templates.len());
        let mlp = Mlp::new(&sizes, &mut rng)?;
        let mut model = NeuralModel::new(mlp, templates, config.beta, config.n_out)?;

        let count = data.len() as f64;
        for k in 0..p {
            let mean = data.inputs.iter().map(|x| x[k]).sum::<f64>() / count;
            let var = data.inputs.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / count;
            model.input_mean[k] = mean;
            model.input_scale[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let mut feature_lo = vec![f64::INFINITY; d];
        let mut feature_hi = vec![f64::NEG_INFINITY; d];
        for g in &data.graphs {
            for k in 0..d {
                for v in g.features().column(k).iter() {
                    feature_lo[k] = feature_lo[k].min(*v);
                    feature_hi[k] = feature_hi[k].max(*v);
                }
            }
        }

        let mlp_lens: Vec<usize> = model
            .mlp
            .weights
            .iter()
            .map(|w| w.len())
            .chain(model.mlp.biases.iter().map(|b| b.len()))
            .collect();
        let tpl_lens: Vec<usize> =
            model.template_c.iter().map(|c| c.len()).chain(model.template_f.iter().map(|f| f.len())).collect();
        Ok(Self {
            adam_mlp: AdamState::new(config.adam, &mlp_lens),
            adam_templates: AdamState::new(config.adam, &tpl_lens),
            config,
            model,
            rng,
            epoch: 0,
            history: Vec::new(),
            feature_lo,
            feature_hi,
        })
    }

    /// One pass over the data in a freshly shuffled order; returns the mean loss.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut losses = vec![0.0; data.len()];
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<(&[f64], _)> = chunk.iter().map(|&i| (data.inputs[i].as_slice(), &data.graphs[i])).collect();
            let (batch_losses, grads) =
                self.model.loss_and_grads(&batch, &self.config.solver, self.config.learn_templates)?;
            for (&i, l) in chunk.iter().zip(batch_losses) {
                losses[i] = l;
            }

            let mlp = &mut self.model.mlp;
            let mut params: Vec<&mut [f64]> = Vec::new();
            params.extend(mlp.weights.iter_mut().map(|w| w.as_mut_slice()));
            params.extend(mlp.biases.iter_mut().map(|b| b.as_mut_slice()));
            let mut g: Vec<&[f64]> = grads.mlp.weights.iter().map(|w| w.as_slice()).collect();
            g.extend(grads.mlp.biases.iter().map(|b| b.as_slice()));
            self.adam_mlp.step(&mut params, &g, self.config.lr_mlp)?;

            if self.config.learn_templates {
                let mut params: Vec<&mut [f64]> = Vec::new();
                params.extend(self.model.template_c.iter_mut().map(|c| c.as_mut_slice()));
                params.extend(self.model.template_f.iter_mut().map(|f| f.as_mut_slice()));
                let mut g: Vec<&[f64]> = grads.template_c.iter().map(|c| c.as_slice()).collect();
                g.extend(grads.template_f.iter().map(|f| f.as_slice()));
                self.adam_templates.step(&mut params, &g, self.config.lr_templates)?;
                self.project_templates();
            }
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        self.epoch += 1;
        self.history.push(mean);
        Ok(mean)
    }

    fn project_templates(&mut self) {
        for c in &mut self.model.template_c {
            symmetrize_and_clamp(c);
        }
        if self.config.clamp_features {
            for f in &mut self.model.template_f {
                for k in 0..f.ncols() {
                    for v in f.column_mut(k).iter_mut() {
                        *v = v.clamp(self.feature_lo[k], self.feature_hi[k]);
                    }
                }
            }
        }
    }

    /// Runs epochs until `config.epochs` have been completed.
    pub fn run(&mut self, data: &Dataset, mut on_epoch: impl FnMut(usize, f64)) -> Result<()> {
        while self.epoch < self.config.epochs {
            let loss = self.run_epoch(data)?;
            on_epoch(self.epoch, loss);
        }
        Ok(())
    }
}

/// Versioned JSON checkpoint of a [`Trainer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub trainer: Trainer,
}

impl Checkpoint {
    pub fn new(trainer: Trainer) -> Self {
        Self { version: CHECKPOINT_VERSION, trainer }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoints always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::SchemaVersionMismatch { found: header.version, expected: CHECKPOINT_VERSION });
        }
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Trains from scratch and returns the model with its per-epoch loss history.
pub fn train(config: TrainConfig, data: &Dataset) -> Result<(NeuralModel, Vec<f64>)> {
    let mut trainer = Trainer::new(config, data)?;
    trainer.run(data, |_, _| {})?;
    Ok((trainer.model, trainer.history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LabeledGraph;
    use nalgebra::DMatrix;

    fn small_data() -> Dataset {
        let graph = |n: usize, k: f64| {
            let c = DMatrix::from_fn(n, n, |i, j| if i != j && (i + j) % 2 == 1 { 1.0 } else { 0.0 });
            LabeledGraph::new(c, DMatrix::from_element(n, 1, k)).unwrap()
        };
        Dataset {
            inputs: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            graphs: vec![graph(4, 0.0), graph(5, 1.0), graph(4, 2.0), graph(6, 1.0)],
        }
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 2,
            hidden: vec![6],
            template_sizes: vec![3, 4],
            n_out: 5,
            solver: SolverConfig { bary_max_outer: 5, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let data = small_data();
        let config = TrainConfig { lr_mlp: 0.0, lr_templates: 0.0, ..quick_config() };
        let (_, history) = train(config, &data).unwrap();
        assert_eq!(history.len(), 3);
        assert!(history.iter().all(|l| *l == history[0]));
    }

    #[test]
    fn overfits_a_single_pair() {
        let data = small_data().subset(&[1]);
        let config = TrainConfig {
            epochs: 500,
            batch_size: 1,
            lr_templates: 0.05,
            hidden: vec![4],
            template_sizes: vec![5],
            n_out: 5,
            solver: SolverConfig { loss_restarts: 4, ..Default::default() },
            ..Default::default()
        };
        let (_, history) = train(config, &data).unwrap();
        assert!(history.last().unwrap() <= &(0.1 * history[0]), "{history:?}");
    }

    #[test]
    fn templates_stay_projected() {
        let data = small_data();
        let config = TrainConfig { lr_templates: 0.5, clamp_features: true, ..quick_config() };
        let mut t = Trainer::new(config, &data).unwrap();
        t.run(&data, |_, _| {}).unwrap();
        for (c, f) in t.model.template_c.iter().zip(&t.model.template_f) {
            assert_eq!(c, &c.transpose());
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(f.iter().all(|v| (0.0..=2.0).contains(v)));
        }
    }

    #[test]
    fn resume_reproduces_the_next_epoch() {
        let data = small_data();
        let mut a = Trainer::new(quick_config(), &data).unwrap();
        a.run_epoch(&data).unwrap();
        let saved = Checkpoint::new(a.clone()).to_json();
        let next = a.run_epoch(&data).unwrap();

        let mut b = Checkpoint::from_json(&saved).unwrap().trainer;
        assert_eq!(b.run_epoch(&data).unwrap(), next);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_versioning() {
        let t = Trainer::new(quick_config(), &small_data()).unwrap();
        let json = Checkpoint::new(t).to_json().replacen("\"version\":1", "\"version\":9", 1);
        assert!(matches!(Checkpoint::from_json(&json), Err(Error::SchemaVersionMismatch { found: 9, .. })));
        assert!(matches!(Checkpoint::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let data = small_data();
        let (m1, h1) = train(quick_config(), &data).unwrap();
        let (m2, h2) = train(quick_config(), &data).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
    }
}
