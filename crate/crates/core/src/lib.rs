//! Policy-gradient training of parameterized Thompson sampling for Gaussian
//! multi-armed bandits.
//!
//! A Thompson-sampling policy draws a "pseudo-action" (a vector of sampled
//! arm means) from a reshaped posterior and plays its argmax. Treating the
//! pseudo-action as the decision makes the log-density differentiable in the
//! reshaping meta-parameters, so the policy can be tuned with score-function
//! gradient estimates. This crate provides:
//!
//! - [`model`]: the Gaussian bandit, pre-drawn instances and conjugate posteriors.
//! - [`policy`]: the reshaped sampling distribution, argmax rule and analytic score.
//! - [`estimators`]: episodes, reward metrics, baselines and gradient estimators.
//! - [`trainer`]: batched Adam ascent over the meta-parameters.
//! - [`evaluation`]: regret measurement, naive TS and Bayes-UCB.
//! - [`variance`]: covariance-trace studies of single-time estimators.
//! - [`experiment`]: presets and the JSON experiment config.
//!
//! Time indices named `t` or `tau` are 1-based decision epochs in `1..=T`.
//! Buffers indexed by time store epoch `t` at offset `t - 1`.

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod experiment;
pub mod model;
pub mod policy;
pub mod quantile;
pub mod report;
pub mod rng;
pub mod stats;
pub mod trainer;
pub mod variance;

pub use error::{Error, Result};
pub use estimators::{
    baseline_values, estimate_gradient, metric_values, run_episode, single_time_estimate,
    BaselineKind, EpisodeRun, Estimator, GradientEstimate, MetricKind, Trajectory,
};
pub use evaluation::{
    bayes_ucb_action, episode_regret, evaluate_policies, evaluate_policy, pull_histogram,
    EvaluationReport, Policy,
};
pub use experiment::{ExperimentConfig, Preset};
pub use model::{posterior_mean_var, BanditConfig, Instance, PosteriorStats};
pub use policy::{
    canonical_meta_params, reshape_distribution, sample_pseudo_action, score, select_action,
    DecayBase, MetaParams, PseudoAction, SamplingDistribution, SamplingPolicy, ScoreVector,
};
pub use rng::{EpisodeKey, Phase, RandomStream, Substream};
pub use trainer::{train, train_with, AdamState, CurvePoint, TrainingOutcome, TrainingRun};
pub use variance::{run_variance_study, GapRow, TraceRow, VarianceReport, VarianceStudy};
