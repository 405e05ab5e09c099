//! Gaussian bandit environment.
//!
//! Arm `a` has an unknown mean `theta[a] ~ N(prior_mean[a], prior_var[a])`
//! and rewards `theta[a] + sqrt(noise_var[a]) * xi[a][t]` with a known noise
//! variance. An [`Instance`] pre-draws the whole `K x T` noise panel, so the
//! reward of every arm at every epoch is fixed before any action is taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{EpisodeKey, RandomStream, Substream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBanditConfig", into = "RawBanditConfig")]
pub struct BanditConfig {
    horizon: usize,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
    noise_var: Vec<f64>,
    noise_sd: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBanditConfig {
    arms: usize,
    horizon: usize,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
    noise_var: Vec<f64>,
}

impl TryFrom<RawBanditConfig> for BanditConfig {
    type Error = Error;

    fn try_from(raw: RawBanditConfig) -> Result<Self> {
        if raw.prior_mean.len() != raw.arms {
            return Err(Error::InvalidConfig(format!(
                "prior_mean has {} entries for {} arms",
                raw.prior_mean.len(),
                raw.arms
            )));
        }
        BanditConfig::new(raw.horizon, raw.prior_mean, raw.prior_var, raw.noise_var)
    }
}

impl From<BanditConfig> for RawBanditConfig {
    fn from(c: BanditConfig) -> Self {
        RawBanditConfig {
            arms: c.arms(),
            horizon: c.horizon,
            prior_mean: c.prior_mean,
            prior_var: c.prior_var,
            noise_var: c.noise_var,
        }
    }
}

impl BanditConfig {
    pub fn new(
        horizon: usize,
        prior_mean: Vec<f64>,
        prior_var: Vec<f64>,
        noise_var: Vec<f64>,
    ) -> Result<Self> {
        let k = prior_mean.len();
        if k == 0 {
            return Err(Error::InvalidConfig("at least one arm is required".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if prior_var.len() != k || noise_var.len() != k {
            return Err(Error::InvalidConfig(format!(
                "per-arm arrays disagree in length: prior_mean {}, prior_var {}, noise_var {}",
                k,
                prior_var.len(),
                noise_var.len()
            )));
        }
        if prior_mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("prior_mean must be finite".into()));
        }
        if prior_var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("prior_var must be positive".into()));
        }
        if noise_var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("noise_var must be positive".into()));
        }
        let noise_sd = noise_var.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            horizon,
            prior_mean,
            prior_var,
            noise_var,
            noise_sd,
        })
    }

    /// `arms` arms sharing one prior and one noise variance.
    pub fn homogeneous(
        arms: usize,
        horizon: usize,
        prior_mean: f64,
        prior_var: f64,
        noise_var: f64,
    ) -> Result<Self> {
        Self::new(
            horizon,
            vec![prior_mean; arms],
            vec![prior_var; arms],
            vec![noise_var; arms],
        )
    }

    pub fn arms(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.prior_mean
    }

    pub fn prior_var(&self) -> &[f64] {
        &self.prior_var
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(
            horizon,
            self.prior_mean.clone(),
            self.prior_var.clone(),
            self.noise_var.clone(),
        )
    }

    pub(crate) fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.arms() {
            Ok(())
        } else {
            Err(Error::ArmOutOfRange {
                arm,
                arms: self.arms(),
            })
        }
    }

    pub(crate) fn check_time(&self, t: usize) -> Result<()> {
        if (1..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }
}

/// True means plus the full standard-normal reward-noise panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    theta: Vec<f64>,
    /// Row-major `K x T`: `noise[a * T + (t - 1)]`.
    noise: Vec<f64>,
    horizon: usize,
}

impl Instance {
    /// Draws `theta` from `theta_rng` (one normal per arm) and the noise panel
    /// from `noise_rng` (arm-major, `T` normals per arm).
    pub fn sample(
        config: &BanditConfig,
        theta_rng: &mut RandomStream,
        noise_rng: &mut RandomStream,
    ) -> Self {
        let theta = config
            .prior_mean
            .iter()
            .zip(&config.prior_var)
            .map(|(&m, &v)| m + v.sqrt() * theta_rng.standard_normal())
            .collect();
        let mut noise = vec![0.0; config.arms() * config.horizon];
        noise_rng.fill_standard_normal(&mut noise);
        Self {
            theta,
            noise,
            horizon: config.horizon,
        }
    }

    /// The instance of episode `key`, drawn from its theta and reward-noise substreams.
    pub fn for_episode(config: &BanditConfig, key: &EpisodeKey) -> Self {
        Self::sample(
            config,
            &mut key.stream(Substream::Theta),
            &mut key.stream(Substream::RewardNoise),
        )
    }

    pub fn from_parts(theta: Vec<f64>, noise: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = noise.first().map_or(0, Vec::len);
        if noise.len() != theta.len() {
            return Err(Error::LengthMismatch {
                expected: theta.len(),
                found: noise.len(),
            });
        }
        if let Some(row) = noise.iter().find(|r| r.len() != horizon) {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: row.len(),
            });
        }
        if theta
            .iter()
            .chain(noise.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("instance"));
        }
        Ok(Self {
            theta,
            noise: noise.into_iter().flatten().collect(),
            horizon,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Noise draws of `arm` for epochs `1..=T`.
    pub fn noise_row(&self, arm: usize) -> &[f64] {
        &self.noise[arm * self.horizon..(arm + 1) * self.horizon]
    }

    /// Lowest-index arm with the largest true mean.
    pub fn best_arm(&self) -> usize {
        argmax(&self.theta)
    }

    pub fn best_mean(&self) -> f64 {
        self.theta[self.best_arm()]
    }

    #[inline]
    pub(crate) fn reward_unchecked(&self, sd: f64, arm: usize, t: usize) -> f64 {
        self.theta[arm] + sd * self.noise[arm * self.horizon + t - 1]
    }

    /// Reward of pulling `arm` at epoch `t` (1-based).
    pub fn realize_reward(&self, config: &BanditConfig, arm: usize, t: usize) -> Result<f64> {
        config.check_arm(arm)?;
        config.check_time(t)?;
        if self.theta.len() != config.arms() || self.horizon != config.horizon() {
            return Err(Error::LengthMismatch {
                expected: config.arms() * config.horizon(),
                found: self.noise.len(),
            });
        }
        Ok(self.reward_unchecked(config.noise_sd[arm], arm, t))
    }
}

pub fn sample_instance(config: &BanditConfig, key: &EpisodeKey) -> Instance {
    Instance::for_episode(config, key)
}

/// Lowest index attaining the maximum.
#[inline]
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-arm sufficient statistics: reward sums and pull counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorStats {
    pub reward_sum: Vec<f64>,
    pub pull_count: Vec<u64>,
}

impl PosteriorStats {
    pub fn new(arms: usize) -> Self {
        Self {
            reward_sum: vec![0.0; arms],
            pull_count: vec![0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.reward_sum.len()
    }

    pub fn observations(&self) -> u64 {
        self.pull_count.iter().sum()
    }

    /// Records one observation in place.
    pub fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.arms() {
            return Err(Error::ArmOutOfRange {
                arm,
                arms: self.arms(),
            });
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        self.reward_sum[arm] += reward;
        self.pull_count[arm] += 1;
        Ok(())
    }

    /// Returns the statistics after observing `reward` on `arm`.
    pub fn update_posterior(mut self, arm: usize, reward: f64) -> Result<Self> {
        self.record(arm, reward)?;
        Ok(self)
    }
}

/// Closed-form posterior `(mean, variance)` of `theta[arm]` from sufficient statistics.
#[inline]
pub fn posterior_from_sums(
    prior_mean: f64,
    prior_var: f64,
    noise_var: f64,
    reward_sum: f64,
    pulls: f64,
) -> (f64, f64) {
    let precision = 1.0 / prior_var + pulls / noise_var;
    let var = 1.0 / precision;
    (var * (prior_mean / prior_var + reward_sum / noise_var), var)
}

pub fn posterior_mean_var(stats: &PosteriorStats, config: &BanditConfig, arm: usize) -> (f64, f64) {
    posterior_from_sums(
        config.prior_mean[arm],
        config.prior_var[arm],
        config.noise_var[arm],
        stats.reward_sum[arm],
        stats.pull_count[arm] as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Phase;
    use approx::assert_relative_eq;

    fn unit(arms: usize, horizon: usize) -> BanditConfig {
        BanditConfig::homogeneous(arms, horizon, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(BanditConfig::homogeneous(3, 10, 0.0, 0.0, 1.0).is_err());
        assert!(BanditConfig::homogeneous(3, 10, 0.0, 1.0, -1.0).is_err());
        assert!(BanditConfig::homogeneous(0, 10, 0.0, 1.0, 1.0).is_err());
        assert!(BanditConfig::homogeneous(2, 0, 0.0, 1.0, 1.0).is_err());
        assert!(BanditConfig::new(5, vec![0.0; 2], vec![1.0; 3], vec![1.0; 2]).is_err());
    }

    #[test]
    fn config_json_checks_arm_count() {
        let ok = r#"{"arms":2,"horizon":3,"prior_mean":[0,0],"prior_var":[1,1],"noise_var":[1,2]}"#;
        let c: BanditConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(c.arms(), 2);
        assert_eq!(c.noise_sd()[1], 2f64.sqrt());
        let bad =
            r#"{"arms":3,"horizon":3,"prior_mean":[0,0],"prior_var":[1,1],"noise_var":[1,2]}"#;
        assert!(serde_json::from_str::<BanditConfig>(bad).is_err());
    }

    #[test]
    fn instance_is_deterministic() {
        let c = unit(4, 7);
        let key = EpisodeKey::new(99, Phase::Eval, 0, 5);
        assert_eq!(sample_instance(&c, &key), sample_instance(&c, &key));
        let other = EpisodeKey::new(99, Phase::Eval, 0, 6);
        assert_ne!(sample_instance(&c, &key), sample_instance(&c, &other));
    }

    #[test]
    fn reward_formula() {
        let c = BanditConfig::new(2, vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 4.0]).unwrap();
        let inst =
            Instance::from_parts(vec![1.0, 0.0], vec![vec![0.0, 0.3], vec![1.5, 0.0]]).unwrap();
        assert_eq!(inst.realize_reward(&c, 0, 1).unwrap(), 1.0);
        assert_eq!(inst.realize_reward(&c, 1, 1).unwrap(), 3.0);
        assert_eq!(
            inst.realize_reward(&c, 1, 1).unwrap(),
            inst.realize_reward(&c, 1, 1).unwrap()
        );
        assert!(matches!(
            inst.realize_reward(&c, 2, 1),
            Err(Error::ArmOutOfRange { .. })
        ));
        assert!(matches!(
            inst.realize_reward(&c, 0, 0),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            inst.realize_reward(&c, 0, 3),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn single_observation_posterior() {
        let c = unit(1, 5);
        let fresh = PosteriorStats::new(1);
        assert_eq!(posterior_mean_var(&fresh, &c, 0), (0.0, 1.0));
        let s = fresh.update_posterior(0, 2.0).unwrap();
        let (m, v) = posterior_mean_var(&s, &c, 0);
        assert_relative_eq!(m, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_observation_posterior() {
        let c = unit(1, 5);
        let s = PosteriorStats::new(1)
            .update_posterior(0, 1.0)
            .unwrap()
            .update_posterior(0, 3.0)
            .unwrap();
        let (m, v) = posterior_mean_var(&s, &c, 0);
        assert_relative_eq!(m, 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn variance_after_n_pulls_with_matched_noise() {
        let c = BanditConfig::homogeneous(1, 50, 0.0, 2.5, 2.5).unwrap();
        let mut s = PosteriorStats::new(1);
        let mut prev = posterior_mean_var(&s, &c, 0).1;
        for n in 1..=30u64 {
            s.record(0, 0.1 * n as f64).unwrap();
            let v = posterior_mean_var(&s, &c, 0).1;
            assert_relative_eq!(v, 2.5 / (1.0 + n as f64), max_relative = 1e-14);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn update_touches_only_one_arm() {
        let s = PosteriorStats::new(3).update_posterior(1, 0.7).unwrap();
        assert_eq!(s.reward_sum, vec![0.0, 0.7, 0.0]);
        assert_eq!(s.pull_count, vec![0, 1, 0]);
        assert_eq!(s.observations(), 1);
    }

    #[test]
    fn rejects_non_finite_reward() {
        let s = PosteriorStats::new(2);
        assert!(matches!(
            s.clone().update_posterior(0, f64::NAN),
            Err(Error::NonFinite(_))
        ));
        assert!(s.update_posterior(0, f64::INFINITY).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[-3.0]), 0);
    }
}
