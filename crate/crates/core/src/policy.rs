//! Thompson sampling with parameterized posterior reshaping, TS(lambda).
//!
//! For arm `a` at epoch `t`, with `S` the reward sum and `N` the pull count
//! before `t`, the pseudo-action coordinate is drawn from
//!
//! ```text
//! mean = (lm + ls * S) / (1 + ls * N)
//! var  = lv * d(t)^lg / (1 + ls * N)
//! ```
//!
//! `lm` and `lg` are optimized directly; `lv` and `ls` are stored as logs so
//! any real parameter vector is a valid policy. `d(t)` is the decay base, see
//! [`DecayBase`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, BanditConfig, PosteriorStats};

/// Reshaping meta-parameters in unconstrained coordinates.
///
/// `lambda_m = eta_m`, `lambda_v = exp(eta_v)`, `lambda_sigma = exp(eta_sigma)`
/// and `lambda_gamma = eta_gamma`. Flattened vectors (gradients, Adam state)
/// use the block layout `[eta_m | eta_v | eta_sigma | eta_gamma]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMetaParams", into = "RawMetaParams")]
pub struct MetaParams {
    eta_m: Vec<f64>,
    eta_v: Vec<f64>,
    eta_sigma: Vec<f64>,
    eta_gamma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetaParams {
    eta_m: Vec<f64>,
    eta_v: Vec<f64>,
    eta_sigma: Vec<f64>,
    eta_gamma: Vec<f64>,
}

impl TryFrom<RawMetaParams> for MetaParams {
    type Error = Error;

    fn try_from(r: RawMetaParams) -> Result<Self> {
        MetaParams::new(r.eta_m, r.eta_v, r.eta_sigma, r.eta_gamma)
    }
}

impl From<MetaParams> for RawMetaParams {
    fn from(p: MetaParams) -> Self {
        RawMetaParams {
            eta_m: p.eta_m,
            eta_v: p.eta_v,
            eta_sigma: p.eta_sigma,
            eta_gamma: p.eta_gamma,
        }
    }
}

/// Number of meta-parameters per arm.
pub const PARAMS_PER_ARM: usize = 4;

impl MetaParams {
    pub fn new(
        eta_m: Vec<f64>,
        eta_v: Vec<f64>,
        eta_sigma: Vec<f64>,
        eta_gamma: Vec<f64>,
    ) -> Result<Self> {
        let k = eta_m.len();
        if k == 0 {
            return Err(Error::InvalidConfig(
                "meta-parameters need at least one arm".into(),
            ));
        }
        for len in [eta_v.len(), eta_sigma.len(), eta_gamma.len()] {
            if len != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: len,
                });
            }
        }
        let p = Self {
            eta_m,
            eta_v,
            eta_sigma,
            eta_gamma,
        };
        if p.to_flat().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("meta-parameters"));
        }
        Ok(p)
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || !flat.len().is_multiple_of(PARAMS_PER_ARM) {
            return Err(Error::LengthMismatch {
                expected: PARAMS_PER_ARM * (flat.len() / PARAMS_PER_ARM).max(1),
                found: flat.len(),
            });
        }
        let k = flat.len() / PARAMS_PER_ARM;
        Self::new(
            flat[..k].to_vec(),
            flat[k..2 * k].to_vec(),
            flat[2 * k..3 * k].to_vec(),
            flat[3 * k..].to_vec(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.eta_m, &self.eta_v, &self.eta_sigma, &self.eta_gamma]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn arms(&self) -> usize {
        self.eta_m.len()
    }

    pub fn dim(&self) -> usize {
        PARAMS_PER_ARM * self.arms()
    }

    pub fn eta_m(&self) -> &[f64] {
        &self.eta_m
    }

    pub fn eta_v(&self) -> &[f64] {
        &self.eta_v
    }

    pub fn eta_sigma(&self) -> &[f64] {
        &self.eta_sigma
    }

    pub fn eta_gamma(&self) -> &[f64] {
        &self.eta_gamma
    }

    /// `(lambda_m, lambda_v, lambda_sigma, lambda_gamma)` of one arm.
    pub fn lambda(&self, arm: usize) -> [f64; 4] {
        [
            self.eta_m[arm],
            self.eta_v[arm].exp(),
            self.eta_sigma[arm].exp(),
            self.eta_gamma[arm],
        ]
    }

    /// Adds a flattened step, e.g. an Adam update.
    pub fn apply_delta(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: delta.len(),
            });
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("parameter update"));
        }
        let k = self.arms();
        for (block, v) in [
            &mut self.eta_m,
            &mut self.eta_v,
            &mut self.eta_sigma,
            &mut self.eta_gamma,
        ]
        .into_iter()
        .enumerate()
        {
            for (x, d) in v.iter_mut().zip(&delta[block * k..(block + 1) * k]) {
                *x += d;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("meta-parameters serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Meta-parameters under which TS(lambda) coincides with standard TS.
pub fn canonical_meta_params(config: &BanditConfig) -> MetaParams {
    let k = config.arms();
    MetaParams {
        eta_m: config.prior_mean().to_vec(),
        eta_v: config.prior_var().iter().map(|v| v.ln()).collect(),
        eta_sigma: config
            .prior_var()
            .iter()
            .zip(config.noise_var())
            .map(|(v, s)| (v / s).ln())
            .collect(),
        eta_gamma: vec![0.0; k],
    }
}

/// Base of the variance-decay factor `d(t)^lambda_gamma`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayBase {
    /// `d(t) = 1 - (t - 1) / T`, ranging over `[1/T, 1]`.
    #[default]
    Shifted,
    /// `d(t) = max(1 - t / T, floor)`; `floor` must be positive.
    Clamped { floor: f64 },
}

impl DecayBase {
    #[inline]
    pub fn value(self, t: usize, horizon: usize) -> f64 {
        let (t, h) = (t as f64, horizon as f64);
        match self {
            DecayBase::Shifted => 1.0 - (t - 1.0) / h,
            DecayBase::Clamped { floor } => (1.0 - t / h).max(floor),
        }
    }
}

/// Per-arm Normal law of the pseudo-action.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDistribution {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Sampled arm means; the played arm is their argmax.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoAction(pub Vec<f64>);

/// Gradient of the log sampling density in unconstrained coordinates,
/// laid out like [`MetaParams::to_flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

/// Constrained per-arm parameters cached for the inner simulation loop.
#[derive(Clone, Debug)]
pub(crate) struct ArmLambdas {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ArmLambdas {
    pub fn new(p: &MetaParams) -> Self {
        Self {
            m: p.eta_m.clone(),
            v: p.eta_v.iter().map(|x| x.exp()).collect(),
            sigma: p.eta_sigma.iter().map(|x| x.exp()).collect(),
            gamma: p.eta_gamma.clone(),
        }
    }

    /// `(mean, var)` of arm `a` given its sums and `ln d(t)`.
    #[inline]
    pub fn moments(&self, a: usize, sum: f64, count: f64, ln_base: f64) -> (f64, f64) {
        let denom = 1.0 + self.sigma[a] * count;
        let decay = if self.gamma[a] == 0.0 {
            1.0
        } else {
            (self.gamma[a] * ln_base).exp()
        };
        (
            (self.m[a] + self.sigma[a] * sum) / denom,
            self.v[a] * decay / denom,
        )
    }

    /// Score of arm `a` at pseudo-action coordinate `x`, ordered `(m, v, sigma, gamma)`.
    #[inline]
    pub fn score(&self, a: usize, sum: f64, count: f64, ln_base: f64, x: f64) -> [f64; 4] {
        let (mean, var) = self.moments(a, sum, count, ln_base);
        let denom = 1.0 + self.sigma[a] * count;
        let dev = x - mean;
        let d_mean = dev / var;
        // d log p / d var, pre-multiplied by var
        let d_var_scaled = 0.5 * (dev * dev / var - 1.0);
        [
            d_mean / denom,
            d_var_scaled,
            self.sigma[a] * (d_mean * (sum - mean * count) - d_var_scaled * count) / denom,
            d_var_scaled * ln_base,
        ]
    }
}

/// A reshaped Thompson-sampling policy: meta-parameters plus decay base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub params: MetaParams,
    #[serde(default)]
    pub decay: DecayBase,
}

impl SamplingPolicy {
    pub fn new(params: MetaParams) -> Self {
        Self {
            params,
            decay: DecayBase::default(),
        }
    }

    pub fn canonical(config: &BanditConfig) -> Self {
        Self::new(canonical_meta_params(config))
    }

    pub fn distribution(
        &self,
        stats: &PosteriorStats,
        t: usize,
        horizon: usize,
    ) -> SamplingDistribution {
        let lambdas = ArmLambdas::new(&self.params);
        let ln_base = self.decay.value(t, horizon).ln();
        let (mean, var) = (0..self.params.arms())
            .map(|a| lambdas.moments(a, stats.reward_sum[a], stats.pull_count[a] as f64, ln_base))
            .unzip();
        SamplingDistribution { mean, var }
    }

    pub fn score(
        &self,
        stats: &PosteriorStats,
        t: usize,
        horizon: usize,
        pseudo: &PseudoAction,
    ) -> ScoreVector {
        let k = self.params.arms();
        let lambdas = ArmLambdas::new(&self.params);
        let ln_base = self.decay.value(t, horizon).ln();
        let mut out = vec![0.0; PARAMS_PER_ARM * k];
        for a in 0..k {
            let s = lambdas.score(
                a,
                stats.reward_sum[a],
                stats.pull_count[a] as f64,
                ln_base,
                pseudo.0[a],
            );
            for (block, v) in s.into_iter().enumerate() {
                out[block * k + a] = v;
            }
        }
        ScoreVector(out)
    }
}

/// Sampling distribution at epoch `t` under the default decay base.
pub fn reshape_distribution(
    lambda: &MetaParams,
    stats: &PosteriorStats,
    t: usize,
    horizon: usize,
) -> SamplingDistribution {
    SamplingPolicy::new(lambda.clone()).distribution(stats, t, horizon)
}

/// `mean + sqrt(var) * z`, coordinate-wise. Policies that consume the same
/// `z` produce coupled draws.
pub fn sample_pseudo_action(dist: &SamplingDistribution, z: &[f64]) -> Result<PseudoAction> {
    if z.len() != dist.mean.len() {
        return Err(Error::LengthMismatch {
            expected: dist.mean.len(),
            found: z.len(),
        });
    }
    Ok(PseudoAction(
        dist.mean
            .iter()
            .zip(&dist.var)
            .zip(z)
            .map(|((m, v), z)| m + v.sqrt() * z)
            .collect(),
    ))
}

/// Arm with the largest sampled mean; ties go to the lowest index.
pub fn select_action(pseudo: &PseudoAction) -> usize {
    argmax(&pseudo.0)
}

/// Score of the pseudo-action under the default decay base.
pub fn score(
    lambda: &MetaParams,
    stats: &PosteriorStats,
    t: usize,
    horizon: usize,
    pseudo: &PseudoAction,
) -> ScoreVector {
    SamplingPolicy::new(lambda.clone()).score(stats, t, horizon, pseudo)
}
