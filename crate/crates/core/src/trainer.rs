//! Batched policy-gradient ascent over the reshaping meta-parameters.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EpisodeRun, Estimator};
use crate::model::{BanditConfig, Instance};
use crate::policy::{canonical_meta_params, DecayBase, MetaParams, SamplingPolicy};
use crate::rng::{EpisodeKey, Phase};
use crate::stats::{l2_norm, pairwise_mean, pairwise_sum_scalar};

/// Adam state for gradient *ascent*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dim: usize, step_size: f64) -> Self {
        Self {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Consumes one gradient and returns the parameter increment
    /// `step_size * m_hat / (sqrt(v_hat) + epsilon)`. On error the state is unchanged.
    pub fn step(&mut self, grad: &[f64]) -> Result<Vec<f64>> {
        if grad.len() != self.first_moment.len() {
            return Err(Error::LengthMismatch {
                expected: self.first_moment.len(),
                found: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let n = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(n);
        let bias2 = 1.0 - self.beta2.powi(n);
        let mut delta = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self
            .first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut())
            .zip(grad)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            delta.push(self.step_size * m_hat / (v_hat.sqrt() + self.epsilon));
        }
        Ok(delta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub iterations: usize,
    pub batch_size: usize,
    pub estimator: Estimator,
    pub step_size: f64,
    /// Defaults to the canonical parameters (standard TS).
    pub initial: Option<MetaParams>,
    pub decay: DecayBase,
    /// Rescale batch gradients whose norm exceeds this value.
    pub max_grad_norm: Option<f64>,
    /// Keep a parameter snapshot every this many iterations.
    pub checkpoint_every: Option<usize>,
}

impl TrainingRun {
    pub fn new(iterations: usize, batch_size: usize, estimator: Estimator, step_size: f64) -> Self {
        Self {
            iterations,
            batch_size,
            estimator,
            step_size,
            initial: None,
            decay: DecayBase::default(),
            max_grad_norm: None,
            checkpoint_every: None,
        }
    }
}

/// One learning-curve row. `iteration` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub batch_regret: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub params: MetaParams,
    pub curve: Vec<CurvePoint>,
    /// Mean pulls per arm in each training batch (by arm index).
    pub batch_pulls: Vec<Vec<f64>>,
    pub checkpoints: Vec<(usize, MetaParams)>,
    pub episodes_simulated: u64,
}

struct EpisodeResult {
    gradient: Vec<f64>,
    regret: f64,
    pulls: Vec<f64>,
}

/// Runs `run.iterations` Adam ascent steps. Iteration `k` draws a fresh batch
/// of instances from the training phase of `seed`, batch `k`.
pub fn train(config: &BanditConfig, run: &TrainingRun, seed: u64) -> Result<TrainingOutcome> {
    train_with(config, run, seed, |_| {})
}

/// [`train`] with a callback invoked after each iteration.
pub fn train_with(
    config: &BanditConfig,
    run: &TrainingRun,
    seed: u64,
    mut on_iteration: impl FnMut(&CurvePoint),
) -> Result<TrainingOutcome> {
    if run.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    if !(run.step_size > 0.0 && run.step_size.is_finite()) {
        return Err(Error::InvalidConfig("step_size must be positive".into()));
    }
    let mut params = run
        .initial
        .clone()
        .unwrap_or_else(|| canonical_meta_params(config));
    if params.arms() != config.arms() {
        return Err(Error::LengthMismatch {
            expected: config.arms(),
            found: params.arms(),
        });
    }
    let k = config.arms();
    let mut adam = AdamState::new(params.dim(), run.step_size);
    let mut outcome = TrainingOutcome {
        params: params.clone(),
        curve: Vec::with_capacity(run.iterations),
        batch_pulls: Vec::with_capacity(run.iterations),
        checkpoints: Vec::new(),
        episodes_simulated: 0,
    };
    let self_play = run.estimator.needs_self_play();
    let mut initial_regret = None;

    for iteration in 1..=run.iterations {
        let started = Instant::now();
        let policy = SamplingPolicy {
            params: params.clone(),
            decay: run.decay,
        };
        let results: Vec<EpisodeResult> = (0..run.batch_size as u64)
            .into_par_iter()
            .map(|i| {
                let key = EpisodeKey::new(seed, Phase::Train, iteration as u64, i);
                let instance = Instance::for_episode(config, &key);
                let episode = EpisodeRun::simulate(&policy, config, &instance, &key, self_play)?;
                let gradient = episode.gradient(run.estimator, config)?;
                let mut pulls = vec![0.0; k];
                for &a in episode.main.actions() {
                    pulls[a] += 1.0;
                }
                Ok(EpisodeResult {
                    gradient: gradient.0,
                    regret: episode.main.regret(),
                    pulls,
                })
            })
            .collect::<Result<_>>()?;
        outcome.episodes_simulated += run.batch_size as u64 * if self_play { 2 } else { 1 };

        let regrets: Vec<f64> = results.iter().map(|r| r.regret).collect();
        let batch_regret = pairwise_sum_scalar(&regrets) / run.batch_size as f64;
        let grads: Vec<Vec<f64>> = results.iter().map(|r| r.gradient.clone()).collect();
        let pulls: Vec<Vec<f64>> = results.into_iter().map(|r| r.pulls).collect();
        let mut grad = pairwise_mean(&grads);
        let grad_norm = l2_norm(&grad);

        let initial = *initial_regret.get_or_insert(batch_regret);
        if batch_regret > 10.0 * initial && initial > 0.0 {
            return Err(Error::Diverged {
                iteration,
                regret: batch_regret,
                initial,
            });
        }

        if let Some(max) = run.max_grad_norm {
            if grad_norm > max {
                let scale = max / grad_norm;
                grad.iter_mut().for_each(|g| *g *= scale);
            }
        }
        let delta = adam.step(&grad)?;
        params.apply_delta(&delta)?;

        let point = CurvePoint {
            iteration,
            batch_regret,
            grad_norm,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        on_iteration(&point);
        outcome.curve.push(point);
        outcome.batch_pulls.push(pairwise_mean(&pulls));
        if run
            .checkpoint_every
            .is_some_and(|every| every > 0 && iteration % every == 0)
        {
            outcome.checkpoints.push((iteration, params.clone()));
        }
    }
    outcome.params = params;
    Ok(outcome)
}
