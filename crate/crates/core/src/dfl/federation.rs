//! Lockstep training of several domains over a fixed neighbour graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coordinator::{DomainLearner, TrainingHyperparams};
use super::data::{dirichlet_partition, SyntheticTask};
use super::message::RoundMessage;
use super::model::{Architecture, Dataset, ModelParameters};
use super::DflError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSetup {
    pub classes: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub samples_per_domain: usize,
    pub validation_per_domain: usize,
    pub test_samples: usize,
    pub dirichlet_alpha: f64,
    pub feature_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSetup {
    fn default() -> Self {
        SyntheticSetup {
            classes: 4,
            input_dim: 16,
            hidden: 32,
            samples_per_domain: 600,
            validation_per_domain: 150,
            test_samples: 800,
            dirichlet_alpha: 0.3,
            feature_sd: 0.15,
            seed: 7,
        }
    }
}

impl SyntheticSetup {
    pub fn architecture(&self) -> Result<Architecture, DflError> {
        use super::model::Activation::{Relu, Softmax};
        Architecture::new(vec![self.input_dim, self.hidden, self.classes], vec![Relu, Softmax])
    }
}

/// One row of `dfl_metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DflRecord {
    pub round: u32,
    pub domain: String,
    /// Held-out F1 on the shared test set.
    pub f1: f64,
    pub eta: f64,
    pub wafs: Vec<(String, f64)>,
}

pub struct Federation {
    pub learners: Vec<DomainLearner>,
    neighbors: Vec<Vec<usize>>,
    pub test: Dataset,
    mailbox: Vec<RoundMessage>,
    pub task: SyntheticTask,
    pub proportions: Vec<Vec<f64>>,
}

impl Federation {
    /// Build domains with Dirichlet-skewed local data. `neighbors[i]` lists
    /// the indices adjacent to domain `i`; `names[i]` is its id.
    pub fn synthetic(
        names: &[String],
        neighbors: Vec<Vec<usize>>,
        setup: &SyntheticSetup,
        hp: &TrainingHyperparams,
    ) -> Result<Self, DflError> {
        if names.len() != neighbors.len() || neighbors.iter().flatten().any(|&j| j >= names.len()) {
            return Err(DflError::Config("neighbour list does not match domains".into()));
        }
        let arch = setup.architecture()?;
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        let task = SyntheticTask::new(&mut rng, setup.input_dim, setup.classes, setup.feature_sd);
        let proportions = dirichlet_partition(&mut rng, setup.dirichlet_alpha, setup.classes, names.len());
        let data: Vec<(Dataset, Dataset)> = proportions
            .iter()
            .map(|p| (task.sample(&mut rng, setup.samples_per_domain, p), task.sample(&mut rng, setup.validation_per_domain, p)))
            .collect();
        let uniform = vec![1.0 / setup.classes as f64; setup.classes];
        let test = task.sample(&mut rng, setup.test_samples, &uniform);
        let init = ModelParameters::init(&arch, &mut ChaCha8Rng::seed_from_u64(setup.seed ^ 0x5eed));
        let learners = data
            .into_iter()
            .enumerate()
            .map(|(i, (train, val))| {
                let ids: Vec<String> = neighbors[i].iter().map(|&j| names[j].clone()).collect();
                DomainLearner::new(names[i].clone(), init.clone(), &ids, train, val, hp.clone(), setup.seed.wrapping_add(1 + i as u64))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mailbox = learners.iter().map(DomainLearner::outbound).collect();
        Ok(Federation { learners, neighbors, test, mailbox, task, proportions })
    }

    /// Every domain adjacent to every other.
    pub fn complete_graph(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
    }

    /// F1 of each domain's model on the shared test set.
    pub fn test_f1(&self) -> Result<Vec<f64>, DflError> {
        self.learners.iter().map(|l| l.evaluate(&self.test)).collect()
    }

    /// One lockstep round: every domain consumes the previous round's messages.
    pub fn step(&mut self) -> Result<Vec<DflRecord>, DflError> {
        let names: Vec<String> = self.learners.iter().map(|l| l.id.clone()).collect();
        let mut next = Vec::with_capacity(self.learners.len());
        let mut out = Vec::with_capacity(self.learners.len());
        for (i, learner) in self.learners.iter_mut().enumerate() {
            let inbox: Vec<(String, RoundMessage)> =
                self.neighbors[i].iter().map(|&j| (names[j].clone(), self.mailbox[j].clone())).collect();
            let (msg, report) = learner.run_round(&inbox)?;
            next.push(msg);
            out.push(DflRecord {
                round: report.round,
                domain: learner.id.clone(),
                f1: learner.evaluate(&self.test)?,
                eta: report.eta,
                wafs: report.neighbors.into_iter().map(|(d, waf, _)| (d, waf)).collect(),
            });
        }
        self.mailbox = next;
        Ok(out)
    }

    pub fn run(&mut self, rounds: u32) -> Result<Vec<DflRecord>, DflError> {
        let mut all = Vec::new();
        for _ in 0..rounds {
            all.extend(self.step()?);
        }
        Ok(all)
    }
}
