//! Regret evaluation on shared instance batches, and the competing policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, posterior_mean_var, BanditConfig, Instance, PosteriorStats};
use crate::policy::{ArmLambdas, SamplingPolicy};
use crate::quantile::normal_quantile;
use crate::rng::{EpisodeKey, Phase, RandomStream, Substream};
use crate::stats::{mean_and_std_error, pairwise_mean};

/// A bandit algorithm that can be evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Standard Thompson sampling from the exact posterior.
    NaiveTs,
    /// Posterior quantile index at level `1 - 1/t`.
    BayesUcb,
    /// Thompson sampling with reshaped posteriors.
    Reshaped(SamplingPolicy),
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::NaiveTs => "naive_ts",
            Policy::BayesUcb => "bayes_ucb",
            Policy::Reshaped(_) => "trained_ts",
        }
    }

    /// Action sequence on `instance`. Randomized policies draw `K` standard
    /// normals per epoch from `rng`, in arm order, so naive TS and reshaped TS
    /// share variates.
    pub fn rollout(
        &self,
        config: &BanditConfig,
        instance: &Instance,
        rng: &mut RandomStream,
    ) -> Vec<usize> {
        let (k, h) = (config.arms(), config.horizon());
        let sd = config.noise_sd();
        let mut stats = PosteriorStats::new(k);
        let mut index = vec![0.0; k];
        let mut actions = Vec::with_capacity(h);
        let lambdas = match self {
            Policy::Reshaped(p) => Some(ArmLambdas::new(&p.params)),
            _ => None,
        };
        for t in 1..=h {
            let action = match self {
                Policy::NaiveTs => {
                    for (a, x) in index.iter_mut().enumerate() {
                        let (m, v) = posterior_mean_var(&stats, config, a);
                        *x = m + v.sqrt() * rng.standard_normal();
                    }
                    argmax(&index)
                }
                Policy::BayesUcb => bayes_ucb_action(&stats, config, t),
                Policy::Reshaped(p) => {
                    let lambdas = lambdas.as_ref().expect("reshaped lambdas");
                    let ln_base = p.decay.value(t, h).ln();
                    for (a, x) in index.iter_mut().enumerate() {
                        let (m, v) = lambdas.moments(
                            a,
                            stats.reward_sum[a],
                            stats.pull_count[a] as f64,
                            ln_base,
                        );
                        *x = m + v.sqrt() * rng.standard_normal();
                    }
                    argmax(&index)
                }
            };
            let r = instance.reward_unchecked(sd[action], action, t);
            stats.reward_sum[action] += r;
            stats.pull_count[action] += 1;
            actions.push(action);
        }
        actions
    }
}

/// `sum_t (max_a theta_a - theta_{A_t})`.
pub fn episode_regret(actions: &[usize], instance: &Instance) -> f64 {
    let theta = instance.theta();
    let best = instance.best_mean();
    actions.iter().map(|&a| best - theta[a]).sum()
}

/// Bayes-UCB: argmax of `m + q * v` with `q` the standard normal quantile at
/// `1 - 1/t`. At `t = 1` the level is 0 and the lowest-index arm is played.
pub fn bayes_ucb_action(stats: &PosteriorStats, config: &BanditConfig, t: usize) -> usize {
    if t <= 1 {
        return 0;
    }
    let q = normal_quantile(1.0 - 1.0 / t as f64);
    let index: Vec<f64> = (0..config.arms())
        .map(|a| {
            let (m, v) = posterior_mean_var(stats, config, a);
            m + q * v.sqrt()
        })
        .collect();
    argmax(&index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub policy: String,
    pub mean_regret: f64,
    pub std_error: f64,
    pub instances: usize,
    /// Mean pulls per arm, by arm index.
    pub mean_pulls: Vec<f64>,
}

impl EvaluationReport {
    /// Mean pulls per arm sorted in descending order.
    pub fn pull_histogram(&self) -> Vec<f64> {
        let mut h = self.mean_pulls.clone();
        h.sort_by(|a, b| b.total_cmp(a));
        h
    }
}

/// Evaluates every policy on the same `n_instances` instances generated from
/// `eval_seed`. Each policy draws its own policy noise from the episode's
/// policy substream, independent of any training stream.
pub fn evaluate_policies(
    policies: &[(String, Policy)],
    config: &BanditConfig,
    eval_seed: u64,
    n_instances: usize,
) -> Result<Vec<EvaluationReport>> {
    if n_instances < 2 {
        return Err(Error::TooFewInstances {
            required: 2,
            got: n_instances,
        });
    }
    for (_, p) in policies {
        if let Policy::Reshaped(sp) = p {
            if sp.params.arms() != config.arms() {
                return Err(Error::LengthMismatch {
                    expected: config.arms(),
                    found: sp.params.arms(),
                });
            }
        }
    }
    let k = config.arms();
    // per instance: (regret, pulls) for each policy
    let per_instance: Vec<Vec<(f64, Vec<f64>)>> = (0..n_instances as u64)
        .into_par_iter()
        .map(|i| {
            let key = EpisodeKey::new(eval_seed, Phase::Eval, 0, i);
            let instance = Instance::for_episode(config, &key);
            policies
                .iter()
                .map(|(_, p)| {
                    let actions = p.rollout(config, &instance, &mut key.stream(Substream::Policy));
                    let mut pulls = vec![0.0; k];
                    for &a in &actions {
                        pulls[a] += 1.0;
                    }
                    (episode_regret(&actions, &instance), pulls)
                })
                .collect()
        })
        .collect();

    Ok(policies
        .iter()
        .enumerate()
        .map(|(j, (label, _))| {
            let regrets: Vec<f64> = per_instance.iter().map(|r| r[j].0).collect();
            let pulls: Vec<Vec<f64>> = per_instance.iter().map(|r| r[j].1.clone()).collect();
            let (mean_regret, std_error) = mean_and_std_error(&regrets);
            EvaluationReport {
                policy: label.clone(),
                mean_regret,
                std_error,
                instances: n_instances,
                mean_pulls: pairwise_mean(&pulls),
            }
        })
        .collect())
}

pub fn evaluate_policy(
    policy: &Policy,
    config: &BanditConfig,
    eval_seed: u64,
    n_instances: usize,
) -> Result<EvaluationReport> {
    let mut reports = evaluate_policies(
        &[(policy.label().to_string(), policy.clone())],
        config,
        eval_seed,
        n_instances,
    )?;
    Ok(reports.remove(0))
}

/// Mean pulls per arm over the evaluation batch, sorted descending.
pub fn pull_histogram(
    policy: &Policy,
    config: &BanditConfig,
    eval_seed: u64,
    n_instances: usize,
) -> Result<Vec<f64>> {
    Ok(evaluate_policy(policy, config, eval_seed, n_instances)?.pull_histogram())
}
