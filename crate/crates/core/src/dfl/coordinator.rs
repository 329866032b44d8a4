use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::compress::{compress_topk, decompress, SparseUpdate};
use super::message::RoundMessage;
use super::model::{Dataset, ModelParameters};
use super::stats::{class_distribution, kl_divergence, macro_f1, F1Formula};
use super::weighting::{
    aggregate, eta_adjustment, learning_rate_from_adjustments, normalize_weights, uniform_weights, update_alpha,
    weight_adjustment_factor,
};
use super::DflError;

/// Where each round's optimisation starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepFrom {
    /// Gradient at the aggregate, displacement applied to the local model.
    Local,
    /// Gradient at the aggregate, step applied to the aggregate.
    #[default]
    Aggregated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Dynamic,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingHyperparams {
    pub eta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta: f64,
    pub k_top: usize,
    pub batch_size: usize,
    pub rounds: u32,
    pub local_epochs_per_round: u32,
    pub alpha0: f64,
    pub alpha_max: f64,
    /// Rounds a neighbour's last message may be reused before it is dropped.
    pub staleness_limit: u32,
    /// Neighbour F1 values kept for the trailing mean in the alpha update.
    pub gamma_window: usize,
    pub f1_formula: F1Formula,
    pub step_from: StepFrom,
    pub weighting: Weighting,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        TrainingHyperparams {
            eta0: 0.01,
            lambda1: 0.7,
            lambda2: 0.3,
            beta: 0.1,
            k_top: 128,
            batch_size: 32,
            rounds: 100,
            local_epochs_per_round: 1,
            alpha0: 0.05,
            alpha_max: 1.0,
            staleness_limit: 3,
            gamma_window: 5,
            f1_formula: F1Formula::Standard,
            step_from: StepFrom::Aggregated,
            weighting: Weighting::Dynamic,
        }
    }
}

impl TrainingHyperparams {
    pub fn validate(&self) -> Result<(), DflError> {
        let fail = |m: &str| Err(DflError::Config(m.to_string()));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return fail("eta0 must be positive");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return fail("beta must be in (0, 1]");
        }
        if self.k_top == 0 {
            return fail("k_top must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(0.0..=self.alpha_max).contains(&self.alpha0) {
            return fail("alpha0 must be in [0, alpha_max]");
        }
        if !self.lambda1.is_finite() || !self.lambda2.is_finite() {
            return fail("lambda1 and lambda2 must be finite");
        }
        if self.gamma_window == 0 {
            return fail("gamma_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborState {
    pub domain_id: String,
    pub waf: f64,
    pub alpha: f64,
    pub eta: f64,
    pub f1: f64,
    pub class_distribution: Vec<f64>,
    pub last_update: Option<SparseUpdate>,
    dense: Option<ModelParameters>,
    f1_history: VecDeque<f64>,
    /// Consecutive rounds without a fresh message.
    pub staleness: u32,
}

impl NeighborState {
    fn new(domain_id: String, alpha0: f64, eta0: f64) -> Self {
        NeighborState {
            domain_id,
            waf: 0.0,
            alpha: alpha0,
            eta: eta0,
            f1: 0.0,
            class_distribution: Vec::new(),
            last_update: None,
            dense: None,
            f1_history: VecDeque::new(),
            staleness: 0,
        }
    }

    /// Mean of the retained F1 history, or `None` before any message.
    pub fn trailing_f1(&self) -> Option<f64> {
        if self.f1_history.is_empty() {
            None
        } else {
            Some(self.f1_history.iter().sum::<f64>() / self.f1_history.len() as f64)
        }
    }
}

/// Per-round diagnostics for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub f1: f64,
    pub eta: f64,
    /// `(neighbour, waf, weight)` for every neighbour that took part.
    pub neighbors: Vec<(String, f64, f64)>,
}

/// One domain's worker and coordinator.
#[derive(Debug, Clone)]
pub struct DomainLearner {
    pub id: String,
    model: ModelParameters,
    neighbors: BTreeMap<String, NeighborState>,
    train: Dataset,
    validation: Dataset,
    class_distribution: Vec<f64>,
    hp: TrainingHyperparams,
    rng: ChaCha8Rng,
    round: u32,
    f1: f64,
}

impl DomainLearner {
    pub fn new(
        id: impl Into<String>,
        init: ModelParameters,
        neighbor_ids: &[String],
        train: Dataset,
        validation: Dataset,
        hp: TrainingHyperparams,
        seed: u64,
    ) -> Result<Self, DflError> {
        hp.validate()?;
        if train.is_empty() {
            return Err(DflError::EmptyInput);
        }
        let classes = init.arch.classes();
        let class_distribution = class_distribution(&train.ys, classes);
        let neighbors = neighbor_ids
            .iter()
            .map(|n| (n.clone(), NeighborState::new(n.clone(), hp.alpha0, hp.eta0)))
            .collect();
        let mut learner = DomainLearner {
            id: id.into(),
            model: init,
            neighbors,
            train,
            validation,
            class_distribution,
            hp,
            rng: ChaCha8Rng::seed_from_u64(seed),
            round: 0,
            f1: 0.0,
        };
        learner.f1 = learner.evaluate_validation()?;
        Ok(learner)
    }

    pub fn model(&self) -> &ModelParameters {
        &self.model
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn hyperparams(&self) -> &TrainingHyperparams {
        &self.hp
    }

    pub fn neighbor(&self, id: &str) -> Option<&NeighborState> {
        self.neighbors.get(id)
    }

    pub fn class_distribution(&self) -> &[f64] {
        &self.class_distribution
    }

    /// Add labelled samples, e.g. newly collected context records.
    pub fn extend_training(&mut self, extra: Dataset) {
        self.train.extend(extra);
        self.class_distribution = class_distribution(&self.train.ys, self.model.arch.classes());
    }

    fn evaluate_validation(&self) -> Result<f64, DflError> {
        let data = if self.validation.is_empty() { &self.train } else { &self.validation };
        self.evaluate(data)
    }

    /// Macro-F1 of the current model on `data`.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64, DflError> {
        let preds: Vec<usize> = data.xs.iter().map(|x| self.model.predict(x)).collect();
        macro_f1(&preds, &data.ys, self.model.arch.classes(), self.hp.f1_formula)
    }

    /// What this domain currently advertises to its neighbours.
    pub fn outbound(&self) -> RoundMessage {
        RoundMessage {
            update: compress_topk(&self.model, self.hp.k_top),
            f1: self.f1,
            class_distribution: self.class_distribution.clone(),
        }
    }

    /// One training round given whatever neighbour messages arrived.
    pub fn run_round(&mut self, inbox: &[(String, RoundMessage)]) -> Result<(RoundMessage, RoundReport), DflError> {
        self.round += 1;
        let arch = self.model.arch.clone();

        // Decompress fresh messages.
        let mut fresh = Vec::new();
        for (from, msg) in inbox {
            let Some(state) = self.neighbors.get_mut(from) else {
                log::warn!("{}: ignoring message from non-neighbour {from}", self.id);
                continue;
            };
            state.dense = Some(decompress(&msg.update, &arch)?);
            state.last_update = Some(msg.update.clone());
            state.f1 = msg.f1;
            state.class_distribution = msg.class_distribution.clone();
            state.staleness = 0;
            fresh.push(from.clone());
        }
        for (id, state) in self.neighbors.iter_mut() {
            if !fresh.contains(id) && state.dense.is_some() {
                state.staleness += 1;
            }
        }

        // Weight adjustment factors for every neighbour still within the staleness limit.
        let mut active = Vec::new();
        for state in self.neighbors.values_mut() {
            if state.dense.is_none() || state.staleness > self.hp.staleness_limit {
                continue;
            }
            let kl = kl_divergence(&state.class_distribution, &self.class_distribution)?;
            state.waf = weight_adjustment_factor(state.f1, kl, self.hp.lambda1, self.hp.lambda2);
            active.push(state.domain_id.clone());
        }

        let (aggregated, eta, neighbors) = if active.is_empty() {
            (self.model.clone(), self.hp.eta0, Vec::new())
        } else {
            let wafs: Vec<f64> = active.iter().map(|d| self.neighbors[d].waf).collect();
            let weights = match self.hp.weighting {
                Weighting::Dynamic => normalize_weights(&wafs),
                Weighting::Uniform => uniform_weights(wafs.len()),
            };
            let pairs: Vec<(f64, &ModelParameters)> = active
                .iter()
                .zip(&weights)
                .map(|(d, w)| (*w, self.neighbors[d].dense.as_ref().expect("active neighbours hold a model")))
                .collect();
            let aggregated = aggregate(&pairs)?;

            let mean_waf = wafs.iter().sum::<f64>() / wafs.len() as f64;
            let mut deltas = Vec::with_capacity(active.len());
            for d in &active {
                let state = self.neighbors.get_mut(d).expect("active");
                let delta = eta_adjustment(state.waf, state.alpha, mean_waf);
                state.eta = self.hp.eta0 + delta;
                deltas.push(delta);
            }
            let eta = learning_rate_from_adjustments(self.hp.eta0, &deltas);
            let report = active.iter().zip(&wafs).zip(&weights).map(|((d, waf), w)| (d.clone(), *waf, *w)).collect();
            (aggregated, eta, report)
        };

        self.model = self.train_on(&aggregated, eta)?;
        let message_update = compress_topk(&self.model, self.hp.k_top);
        self.f1 = self.evaluate_validation()?;

        for d in &fresh {
            let state = self.neighbors.get_mut(d).expect("fresh neighbours exist");
            let gamma = state.f1;
            let gamma_bar = state.trailing_f1().unwrap_or(gamma);
            state.alpha = update_alpha(state.alpha, state.waf, gamma, gamma_bar, self.hp.beta, self.hp.alpha_max);
            state.f1_history.push_back(gamma);
            while state.f1_history.len() > self.hp.gamma_window {
                state.f1_history.pop_front();
            }
        }

        let message = RoundMessage { update: message_update, f1: self.f1, class_distribution: self.class_distribution.clone() };
        Ok((message, RoundReport { round: self.round, f1: self.f1, eta, neighbors }))
    }

    /// Minibatch descent starting at the aggregate.
    fn train_on(&mut self, aggregated: &ModelParameters, eta: f64) -> Result<ModelParameters, DflError> {
        let mut theta = aggregated.clone();
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        for _ in 0..self.hp.local_epochs_per_round {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.hp.batch_size) {
                let batch = self.train.subset(chunk);
                let g = theta.gradient(&batch)?;
                theta.axpy(-eta, &g);
            }
        }
        if !theta.is_finite() {
            return Err(DflError::NonFiniteGradient);
        }
        Ok(match self.hp.step_from {
            StepFrom::Aggregated => theta,
            StepFrom::Local => {
                let mut next = self.model.clone();
                next.axpy(1.0, &theta);
                next.axpy(-1.0, aggregated);
                next
            }
        })
    }
}
