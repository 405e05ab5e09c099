//! Episodes, reward metrics, baselines and score-function gradient estimators.
//!
//! An admissible estimator has the form `G = sum_t S_t (M_t - B_t)` where
//! `S_t` is the score of the pseudo-action at epoch `t`, `M_t` a reward metric
//! for the remaining horizon and `B_t` a baseline independent of the
//! pseudo-action given the history.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, posterior_from_sums, BanditConfig, Instance, PosteriorStats};
use crate::policy::{ArmLambdas, SamplingPolicy, PARAMS_PER_ARM};
use crate::rng::{EpisodeKey, RandomStream, Substream};

/// One simulated episode of a reshaped TS policy.
///
/// Per-epoch buffers are row-major with epoch `t` at row `t - 1`; the
/// posterior snapshot at row `t - 1` is the state *before* acting at `t`.
#[derive(Clone, Debug)]
pub struct Trajectory<'a> {
    instance: &'a Instance,
    arms: usize,
    horizon: usize,
    pseudo: Vec<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    scores: Vec<f64>,
    sums: Vec<f64>,
    counts: Vec<u64>,
    final_stats: PosteriorStats,
}

impl<'a> Trajectory<'a> {
    fn with_capacity(instance: &'a Instance, arms: usize, horizon: usize) -> Self {
        Self {
            instance,
            arms,
            horizon,
            pseudo: Vec::with_capacity(horizon * arms),
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            scores: Vec::with_capacity(horizon * arms * PARAMS_PER_ARM),
            sums: Vec::with_capacity(horizon * arms),
            counts: Vec::with_capacity(horizon * arms),
            final_stats: PosteriorStats::new(arms),
        }
    }

    /// Plays a fixed action sequence on `instance`. Pseudo-actions and scores
    /// are zero; useful for oracle runs and hand-built cases.
    pub fn replay(
        config: &BanditConfig,
        instance: &'a Instance,
        actions: &[usize],
    ) -> Result<Self> {
        check_instance(config, instance)?;
        if actions.len() != config.horizon() {
            return Err(Error::LengthMismatch {
                expected: config.horizon(),
                found: actions.len(),
            });
        }
        let (k, h) = (config.arms(), config.horizon());
        let mut traj = Self::with_capacity(instance, k, h);
        let mut stats = PosteriorStats::new(k);
        for (i, &a) in actions.iter().enumerate() {
            config.check_arm(a)?;
            traj.sums.extend_from_slice(&stats.reward_sum);
            traj.counts.extend_from_slice(&stats.pull_count);
            traj.pseudo.extend(std::iter::repeat_n(0.0, k));
            traj.scores
                .extend(std::iter::repeat_n(0.0, PARAMS_PER_ARM * k));
            let r = instance.reward_unchecked(config.noise_sd()[a], a, i + 1);
            traj.actions.push(a);
            traj.rewards.push(r);
            stats.record(a, r)?;
        }
        traj.final_stats = stats;
        Ok(traj)
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn pseudo_action(&self, t: usize) -> &[f64] {
        &self.pseudo[(t - 1) * self.arms..t * self.arms]
    }

    pub fn score(&self, t: usize) -> &[f64] {
        let d = PARAMS_PER_ARM * self.arms;
        &self.scores[(t - 1) * d..t * d]
    }

    pub fn sums_before(&self, t: usize) -> &[f64] {
        &self.sums[(t - 1) * self.arms..t * self.arms]
    }

    pub fn counts_before(&self, t: usize) -> &[u64] {
        &self.counts[(t - 1) * self.arms..t * self.arms]
    }

    /// Posterior statistics before acting at epoch `t`.
    pub fn snapshot(&self, t: usize) -> PosteriorStats {
        PosteriorStats {
            reward_sum: self.sums_before(t).to_vec(),
            pull_count: self.counts_before(t).to_vec(),
        }
    }

    pub fn final_stats(&self) -> &PosteriorStats {
        &self.final_stats
    }

    pub fn regret(&self) -> f64 {
        crate::evaluation::episode_regret(&self.actions, self.instance)
    }

    /// One JSON object describing the episode, for debug dumps.
    pub fn to_json_line(&self) -> String {
        let rows: Vec<serde_json::Value> = (1..=self.horizon)
            .map(|t| {
                serde_json::json!({
                    "t": t,
                    "pseudo_action": self.pseudo_action(t),
                    "action": self.actions[t - 1],
                    "reward": self.rewards[t - 1],
                    "score": self.score(t),
                    "reward_sum": self.sums_before(t),
                    "pull_count": self.counts_before(t),
                })
            })
            .collect();
        serde_json::json!({ "theta": self.instance.theta(), "steps": rows }).to_string()
    }
}

fn check_instance(config: &BanditConfig, instance: &Instance) -> Result<()> {
    if instance.theta().len() != config.arms() || instance.horizon() != config.horizon() {
        return Err(Error::LengthMismatch {
            expected: config.arms() * config.horizon(),
            found: instance.theta().len() * instance.horizon(),
        });
    }
    Ok(())
}

/// Runs TS(lambda) for `T` epochs. Each epoch draws `K` standard normals from
/// `rng`, in arm order.
pub fn run_episode<'a>(
    policy: &SamplingPolicy,
    config: &BanditConfig,
    instance: &'a Instance,
    rng: &mut RandomStream,
) -> Result<Trajectory<'a>> {
    check_instance(config, instance)?;
    if policy.params.arms() != config.arms() {
        return Err(Error::LengthMismatch {
            expected: config.arms(),
            found: policy.params.arms(),
        });
    }
    let (k, h) = (config.arms(), config.horizon());
    let lambdas = ArmLambdas::new(&policy.params);
    let sd = config.noise_sd();
    let mut traj = Trajectory::with_capacity(instance, k, h);
    let mut sums = vec![0.0; k];
    let mut counts = vec![0u64; k];
    let mut theta_tilde = vec![0.0; k];
    let mut step_score = vec![0.0; PARAMS_PER_ARM * k];

    for t in 1..=h {
        let ln_base = policy.decay.value(t, h).ln();
        for a in 0..k {
            let (mean, var) = lambdas.moments(a, sums[a], counts[a] as f64, ln_base);
            theta_tilde[a] = mean + var.sqrt() * rng.standard_normal();
        }
        for a in 0..k {
            let s = lambdas.score(a, sums[a], counts[a] as f64, ln_base, theta_tilde[a]);
            for (block, v) in s.into_iter().enumerate() {
                step_score[block * k + a] = v;
            }
        }
        let action = argmax(&theta_tilde);
        let reward = instance.reward_unchecked(sd[action], action, t);

        traj.pseudo.extend_from_slice(&theta_tilde);
        traj.scores.extend_from_slice(&step_score);
        traj.sums.extend_from_slice(&sums);
        traj.counts.extend_from_slice(&counts);
        traj.actions.push(action);
        traj.rewards.push(reward);

        sums[action] += reward;
        counts[action] += 1;
    }
    traj.final_stats = PosteriorStats {
        reward_sum: sums,
        pull_count: counts,
    };
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Observed rewards over the remaining horizon.
    Obs,
    /// True means of the chosen arms.
    Mean,
    /// Posterior means after pulling each chosen arm for the rest of the horizon.
    Fin,
    /// Posterior mean of each chosen arm at its selection time.
    Bayes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "null")]
    Null,
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "self")]
    SelfPlay,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Obs,
        MetricKind::Mean,
        MetricKind::Fin,
        MetricKind::Bayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Obs => "obs",
            MetricKind::Mean => "mean",
            MetricKind::Fin => "fin",
            MetricKind::Bayes => "bayes",
        }
    }
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Null,
        BaselineKind::Oracle,
        BaselineKind::SelfPlay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Null => "null",
            BaselineKind::Oracle => "oracle",
            BaselineKind::SelfPlay => "self",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigSchema(format!("unknown reward metric `{s}`")))
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::ConfigSchema(format!("unknown baseline `{s}`")))
    }
}

/// A reward-metric / baseline pair that passes the coupling rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Estimator {
    metric: MetricKind,
    baseline: BaselineKind,
}

impl Estimator {
    /// The oracle baseline is only defined for metrics that can be evaluated
    /// on the constant best-arm action sequence without its own history.
    pub fn new(metric: MetricKind, baseline: BaselineKind) -> Result<Self> {
        if baseline == BaselineKind::Oracle && metric == MetricKind::Bayes {
            return Err(Error::NotCoupled { metric, baseline });
        }
        Ok(Self { metric, baseline })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn baseline(&self) -> BaselineKind {
        self.baseline
    }

    pub fn needs_self_play(&self) -> bool {
        self.baseline == BaselineKind::SelfPlay
    }

    /// Every admissible pair, baseline-major.
    pub fn all() -> Vec<Estimator> {
        BaselineKind::ALL
            .into_iter()
            .flat_map(|b| MetricKind::ALL.into_iter().map(move |m| (m, b)))
            .filter_map(|(m, b)| Estimator::new(m, b).ok())
            .collect()
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.metric, self.baseline)
    }
}

/// Posterior mean of `arm` after its observations before `t` plus
/// counterfactual pulls at every epoch `t..=T`, given the suffix noise sum.
#[inline]
fn finite_sample_mean(
    config: &BanditConfig,
    traj: &Trajectory<'_>,
    t: usize,
    arm: usize,
    noise_suffix: f64,
) -> f64 {
    let remaining = (traj.horizon - t + 1) as f64;
    let theta = traj.instance.theta()[arm];
    let sum = traj.sums_before(t)[arm] + remaining * theta + config.noise_sd()[arm] * noise_suffix;
    let pulls = traj.counts_before(t)[arm] as f64 + remaining;
    posterior_from_sums(
        config.prior_mean()[arm],
        config.prior_var()[arm],
        config.noise_var()[arm],
        sum,
        pulls,
    )
    .0
}

/// Backward pass over epochs computing the finite-sample metric, and the
/// same metric for the constant action `oracle_arm` when requested.
fn finite_sample_pass(
    config: &BanditConfig,
    traj: &Trajectory<'_>,
    oracle_arm: Option<usize>,
) -> (Vec<f64>, Vec<f64>) {
    let (k, h) = (traj.arms, traj.horizon);
    let mut noise_suffix = vec![0.0; k];
    let mut action_suffix = vec![0u64; k];
    let mut metric = vec![0.0; h];
    let mut oracle = vec![0.0; if oracle_arm.is_some() { h } else { 0 }];
    for t in (1..=h).rev() {
        for (a, acc) in noise_suffix.iter_mut().enumerate() {
            *acc += traj.instance.noise_row(a)[t - 1];
        }
        action_suffix[traj.actions[t - 1]] += 1;
        metric[t - 1] = (0..k)
            .filter(|&a| action_suffix[a] > 0)
            .map(|a| {
                action_suffix[a] as f64 * finite_sample_mean(config, traj, t, a, noise_suffix[a])
            })
            .sum();
        if let Some(best) = oracle_arm {
            oracle[t - 1] =
                (h - t + 1) as f64 * finite_sample_mean(config, traj, t, best, noise_suffix[best]);
        }
    }
    (metric, oracle)
}

fn suffix_sums(per_epoch: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = per_epoch.collect();
    let mut acc = 0.0;
    for x in out.iter_mut().rev() {
        acc += *x;
        *x = acc;
    }
    out
}

/// `M_t` for `t = 1..=T` (index `t - 1`).
pub fn metric_values(kind: MetricKind, traj: &Trajectory<'_>, config: &BanditConfig) -> Vec<f64> {
    let theta = traj.instance.theta();
    match kind {
        MetricKind::Obs => suffix_sums(traj.rewards.iter().copied()),
        MetricKind::Mean => suffix_sums(traj.actions.iter().map(|&a| theta[a])),
        MetricKind::Fin => finite_sample_pass(config, traj, None).0,
        MetricKind::Bayes => suffix_sums((1..=traj.horizon).map(|t| {
            let a = traj.actions[t - 1];
            posterior_from_sums(
                config.prior_mean()[a],
                config.prior_var()[a],
                config.noise_var()[a],
                traj.sums_before(t)[a],
                traj.counts_before(t)[a] as f64,
            )
            .0
        })),
    }
}

/// `B_t` for `t = 1..=T`, coupled to `metric`.
pub fn baseline_values(
    kind: BaselineKind,
    traj: &Trajectory<'_>,
    metric: MetricKind,
    self_traj: Option<&Trajectory<'_>>,
    config: &BanditConfig,
) -> Result<Vec<f64>> {
    let h = traj.horizon;
    match kind {
        BaselineKind::Null => Ok(vec![0.0; h]),
        BaselineKind::Oracle => {
            let instance = traj.instance;
            let best = instance.best_arm();
            let theta = instance.theta()[best];
            match metric {
                MetricKind::Obs => {
                    let sd = config.noise_sd()[best];
                    Ok(suffix_sums(
                        instance.noise_row(best).iter().map(|xi| theta + sd * xi),
                    ))
                }
                MetricKind::Mean => Ok((1..=h).map(|t| (h - t + 1) as f64 * theta).collect()),
                MetricKind::Fin => Ok(finite_sample_pass(config, traj, Some(best)).1),
                MetricKind::Bayes => Err(Error::NotCoupled {
                    metric,
                    baseline: kind,
                }),
            }
        }
        BaselineKind::SelfPlay => {
            let other = self_traj.ok_or(Error::MissingSelfPlay)?;
            if !std::ptr::eq(other.instance, traj.instance)
                && other.instance.theta() != traj.instance.theta()
            {
                return Err(Error::MissingSelfPlay);
            }
            Ok(metric_values(metric, other, config))
        }
    }
}

/// A flattened gradient, laid out like [`crate::MetaParams::to_flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate(pub Vec<f64>);

impl GradientEstimate {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        crate::stats::l2_norm(&self.0)
    }
}

fn check_terms(traj: &Trajectory<'_>, m: &[f64], b: &[f64]) -> Result<()> {
    for v in [m, b] {
        if v.len() != traj.horizon {
            return Err(Error::LengthMismatch {
                expected: traj.horizon,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("reward metric or baseline"));
        }
    }
    Ok(())
}

/// `sum_t S_t (M_t - B_t)`.
pub fn estimate_gradient(traj: &Trajectory<'_>, m: &[f64], b: &[f64]) -> Result<GradientEstimate> {
    check_terms(traj, m, b)?;
    let mut g = vec![0.0; PARAMS_PER_ARM * traj.arms];
    for t in 1..=traj.horizon {
        let w = m[t - 1] - b[t - 1];
        for (gi, si) in g.iter_mut().zip(traj.score(t)) {
            *gi += si * w;
        }
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient estimate"));
    }
    Ok(GradientEstimate(g))
}

/// `T * S_tau (M_tau - B_tau)`.
pub fn single_time_estimate(
    traj: &Trajectory<'_>,
    m: &[f64],
    b: &[f64],
    tau: usize,
) -> Result<GradientEstimate> {
    check_terms(traj, m, b)?;
    if !(1..=traj.horizon).contains(&tau) {
        return Err(Error::TimeOutOfRange {
            t: tau,
            horizon: traj.horizon,
        });
    }
    let w = traj.horizon as f64 * (m[tau - 1] - b[tau - 1]);
    Ok(GradientEstimate(
        traj.score(tau).iter().map(|s| s * w).collect(),
    ))
}

/// The learner's episode and, when needed, an independent self-play run on
/// the same instance.
#[derive(Clone, Debug)]
pub struct EpisodeRun<'a> {
    pub main: Trajectory<'a>,
    pub self_play: Option<Trajectory<'a>>,
}

impl<'a> EpisodeRun<'a> {
    /// Simulates episode `key`: the learner consumes the policy substream and
    /// the self-play run the self-play substream.
    pub fn simulate(
        policy: &SamplingPolicy,
        config: &BanditConfig,
        instance: &'a Instance,
        key: &EpisodeKey,
        with_self_play: bool,
    ) -> Result<Self> {
        let main = run_episode(policy, config, instance, &mut key.stream(Substream::Policy))?;
        let self_play = if with_self_play {
            Some(run_episode(
                policy,
                config,
                instance,
                &mut key.stream(Substream::SelfPlay),
            )?)
        } else {
            None
        };
        Ok(Self { main, self_play })
    }

    /// `(M, B)` for `estimator`.
    pub fn terms(
        &self,
        estimator: Estimator,
        config: &BanditConfig,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = metric_values(estimator.metric, &self.main, config);
        let b = baseline_values(
            estimator.baseline,
            &self.main,
            estimator.metric,
            self.self_play.as_ref(),
            config,
        )?;
        Ok((m, b))
    }

    pub fn gradient(
        &self,
        estimator: Estimator,
        config: &BanditConfig,
    ) -> Result<GradientEstimate> {
        let (m, b) = self.terms(estimator, config)?;
        estimate_gradient(&self.main, &m, &b)
    }

    pub fn single_time(
        &self,
        estimator: Estimator,
        config: &BanditConfig,
        tau: usize,
    ) -> Result<GradientEstimate> {
        let (m, b) = self.terms(estimator, config)?;
        single_time_estimate(&self.main, &m, &b, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{canonical_meta_params, MetaParams};
    use crate::rng::Phase;
    use approx::assert_relative_eq;

    fn unit(arms: usize, horizon: usize) -> BanditConfig {
        BanditConfig::homogeneous(arms, horizon, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn mean_and_oracle_on_two_arms() {
        let c = unit(2, 2);
        let inst =
            Instance::from_parts(vec![1.0, 0.0], vec![vec![0.3, -0.2], vec![0.0, 0.0]]).unwrap();
        let traj = Trajectory::replay(&c, &inst, &[0, 0]).unwrap();
        assert_eq!(metric_values(MetricKind::Mean, &traj, &c), vec![2.0, 1.0]);
        let b = baseline_values(BaselineKind::Oracle, &traj, MetricKind::Mean, None, &c).unwrap();
        assert_eq!(b, vec![2.0, 1.0]);
        let g = estimate_gradient(&traj, &[2.0, 1.0], &b).unwrap();
        assert!(g.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn observed_metric_sums_rewards() {
        let c = unit(1, 2);
        let inst = Instance::from_parts(vec![1.0], vec![vec![-0.5, 0.5]]).unwrap();
        let traj = Trajectory::replay(&c, &inst, &[0, 0]).unwrap();
        assert_eq!(traj.rewards(), &[0.5, 1.5]);
        assert_eq!(metric_values(MetricKind::Obs, &traj, &c), vec![2.0, 1.5]);
    }

    #[test]
    fn finite_sample_metric_last_epoch() {
        let c = unit(1, 3);
        let inst = Instance::from_parts(vec![0.8], vec![vec![0.1, 0.2, -0.6]]).unwrap();
        let c1 = c.with_horizon(1).unwrap();
        let inst1 = Instance::from_parts(vec![0.8], vec![vec![-0.6]]).unwrap();
        let traj1 = Trajectory::replay(&c1, &inst1, &[0]).unwrap();
        let fin = metric_values(MetricKind::Fin, &traj1, &c1);
        assert_relative_eq!(fin[0], (0.8 - 0.6) / 2.0, max_relative = 1e-14);

        // with two earlier pulls the last epoch sees three observations in total
        let traj = Trajectory::replay(&c, &inst, &[0, 0, 0]).unwrap();
        let fin = metric_values(MetricKind::Fin, &traj, &c);
        let total: f64 = 3.0 * 0.8 + 0.1 + 0.2 - 0.6;
        assert_relative_eq!(fin[2], total / 4.0, max_relative = 1e-14);
        assert_relative_eq!(fin[0], 3.0 * total / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn bayes_metric_uses_prior_at_first_pull() {
        let c = BanditConfig::new(1, vec![0.7, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let inst = Instance::from_parts(vec![0.0, 0.0], vec![vec![0.0], vec![0.0]]).unwrap();
        let traj = Trajectory::replay(&c, &inst, &[0]).unwrap();
        assert_eq!(metric_values(MetricKind::Bayes, &traj, &c), vec![0.7]);
    }

    #[test]
    fn oracle_rejects_bayes_and_self_play_needs_run() {
        let c = unit(2, 2);
        let inst = Instance::from_parts(vec![1.0, 0.0], vec![vec![0.0; 2], vec![0.0; 2]]).unwrap();
        let traj = Trajectory::replay(&c, &inst, &[0, 1]).unwrap();
        assert!(matches!(
            baseline_values(BaselineKind::Oracle, &traj, MetricKind::Bayes, None, &c),
            Err(Error::NotCoupled { .. })
        ));
        assert!(matches!(
            baseline_values(BaselineKind::SelfPlay, &traj, MetricKind::Mean, None, &c),
            Err(Error::MissingSelfPlay)
        ));
        assert!(Estimator::new(MetricKind::Bayes, BaselineKind::Oracle).is_err());
        assert_eq!(Estimator::all().len(), 11);
        assert_eq!(
            baseline_values(BaselineKind::Null, &traj, MetricKind::Obs, None, &c).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn self_play_on_identical_run_cancels() {
        let c = unit(3, 6);
        let key = EpisodeKey::new(5, Phase::Train, 0, 0);
        let inst = Instance::for_episode(&c, &key);
        let policy = SamplingPolicy::canonical(&c);
        let a = run_episode(&policy, &c, &inst, &mut key.stream(Substream::Policy)).unwrap();
        let b = a.clone();
        for metric in MetricKind::ALL {
            let m = metric_values(metric, &a, &c);
            let base = baseline_values(BaselineKind::SelfPlay, &a, metric, Some(&b), &c).unwrap();
            assert_eq!(m, base);
            let g = estimate_gradient(&a, &m, &base).unwrap();
            assert!(g.0.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_epoch_episode() {
        let c = unit(2, 1);
        let key = EpisodeKey::new(1, Phase::Train, 0, 0);
        let inst = Instance::for_episode(&c, &key);
        let traj = run_episode(
            &SamplingPolicy::canonical(&c),
            &c,
            &inst,
            &mut key.stream(Substream::Policy),
        )
        .unwrap();
        assert_eq!(traj.actions().len(), 1);
        assert_eq!(traj.snapshot(1), PosteriorStats::new(2));
        let m = metric_values(MetricKind::Obs, &traj, &c);
        let b = vec![0.25];
        assert_eq!(
            single_time_estimate(&traj, &m, &b, 1).unwrap(),
            estimate_gradient(&traj, &m, &b).unwrap()
        );
    }

    #[test]
    fn trajectory_invariants() {
        let c = BanditConfig::new(
            12,
            vec![0.0, 0.5, -0.5],
            vec![1.0, 2.0, 0.5],
            vec![0.1, 1.0, 4.0],
        )
        .unwrap();
        let key = EpisodeKey::new(2, Phase::Train, 0, 3);
        let inst = Instance::for_episode(&c, &key);
        let p = MetaParams::new(
            vec![0.1, 0.0, -0.2],
            vec![0.5, -0.3, 0.2],
            vec![1.0, 0.0, -1.0],
            vec![0.7, -0.4, 2.0],
        )
        .unwrap();
        let traj = run_episode(
            &SamplingPolicy::new(p),
            &c,
            &inst,
            &mut key.stream(Substream::Policy),
        )
        .unwrap();
        assert_eq!(traj.final_stats().observations(), 12);
        for t in 1..=12 {
            assert_eq!(traj.actions()[t - 1], argmax(traj.pseudo_action(t)));
            let next = if t < 12 {
                traj.snapshot(t + 1)
            } else {
                traj.final_stats().clone()
            };
            let expected = traj
                .snapshot(t)
                .update_posterior(traj.actions()[t - 1], traj.rewards()[t - 1])
                .unwrap();
            assert_eq!(next, expected);
        }
    }

    #[test]
    fn averaging_single_time_over_all_epochs_recovers_full_estimate() {
        let c = unit(3, 9);
        let key = EpisodeKey::new(8, Phase::Train, 0, 1);
        let inst = Instance::for_episode(&c, &key);
        let mut p = canonical_meta_params(&c);
        p.apply_delta(&[
            0.1, -0.2, 0.3, 0.0, 0.1, -0.1, 0.2, 0.2, 0.0, 0.5, 0.5, -0.5,
        ])
        .unwrap();
        let run = EpisodeRun::simulate(&SamplingPolicy::new(p), &c, &inst, &key, true).unwrap();
        for est in Estimator::all() {
            let (m, b) = run.terms(est, &c).unwrap();
            let full = estimate_gradient(&run.main, &m, &b).unwrap();
            let mut avg = [0.0; 12];
            for tau in 1..=9 {
                let g = single_time_estimate(&run.main, &m, &b, tau).unwrap();
                for (x, y) in avg.iter_mut().zip(&g.0) {
                    *x += y / 9.0;
                }
            }
            for (x, y) in avg.iter().zip(&full.0) {
                assert_relative_eq!(x, y, epsilon = 1e-10, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn estimator_input_errors() {
        let c = unit(2, 3);
        let inst = Instance::from_parts(vec![0.0, 0.0], vec![vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let traj = Trajectory::replay(&c, &inst, &[0, 1, 0]).unwrap();
        assert!(estimate_gradient(&traj, &[0.0; 2], &[0.0; 3]).is_err());
        assert!(estimate_gradient(&traj, &[f64::NAN, 0.0, 0.0], &[0.0; 3]).is_err());
        assert!(matches!(
            single_time_estimate(&traj, &[0.0; 3], &[0.0; 3], 0),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(single_time_estimate(&traj, &[0.0; 3], &[0.0; 3], 4).is_err());
        // replayed trajectories carry zero scores
        let g = estimate_gradient(&traj, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!(g.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn estimator_names_parse() {
        assert_eq!(
            "self".parse::<BaselineKind>().unwrap(),
            BaselineKind::SelfPlay
        );
        assert_eq!("fin".parse::<MetricKind>().unwrap(), MetricKind::Fin);
        assert!("median".parse::<MetricKind>().is_err());
        assert_eq!(
            Estimator::new(MetricKind::Mean, BaselineKind::SelfPlay)
                .unwrap()
                .to_string(),
            "mean/self"
        );
    }
}
