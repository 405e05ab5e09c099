//! Empirical covariance traces of single-time gradient estimators.
//!
//! Every sample is one episode with a uniformly drawn epoch `tau`; all
//! estimators are evaluated on the same episode, self-play run and `tau`, so
//! their differences are paired. Confidence intervals come from a bootstrap
//! over contiguous blocks of samples: samples are i.i.d., so resampling
//! block sums with replacement is a valid (and cheap) paired bootstrap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{BaselineKind, EpisodeRun, Estimator, MetricKind};
use crate::model::{BanditConfig, Instance};
use crate::policy::SamplingPolicy;
use crate::rng::{EpisodeKey, Phase, Substream};

#[derive(Clone, Debug)]
pub struct VarianceStudy {
    pub samples: usize,
    pub seed: u64,
    pub blocks: usize,
    pub resamples: usize,
    /// Confidence level of the reported intervals, e.g. 0.95.
    pub level: f64,
    pub estimators: Vec<Estimator>,
}

impl VarianceStudy {
    pub fn new(samples: usize, seed: u64, estimators: Vec<Estimator>) -> Self {
        Self {
            samples,
            seed,
            blocks: 1000,
            resamples: 1000,
            level: 0.95,
            estimators,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub metric: MetricKind,
    pub baseline: BaselineKind,
    pub trace: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `trace(higher) - trace(lower)` for two metrics sharing a baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub baseline: BaselineKind,
    pub higher: MetricKind,
    pub lower: MetricKind,
    pub gap: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl GapRow {
    /// The whole interval lies above zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub samples: usize,
    pub level: f64,
    pub traces: Vec<TraceRow>,
    pub gaps: Vec<GapRow>,
}

impl VarianceReport {
    pub fn trace(&self, metric: MetricKind, baseline: BaselineKind) -> Option<&TraceRow> {
        self.traces
            .iter()
            .find(|r| r.metric == metric && r.baseline == baseline)
    }

    pub fn gap(
        &self,
        baseline: BaselineKind,
        higher: MetricKind,
        lower: MetricKind,
    ) -> Option<&GapRow> {
        self.gaps
            .iter()
            .find(|g| g.baseline == baseline && g.higher == higher && g.lower == lower)
    }
}

/// Per-estimator sufficient statistics over a set of samples.
#[derive(Clone, Debug)]
struct Moments {
    count: f64,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn zero(estimators: usize, dim: usize) -> Self {
        Self {
            count: 0.0,
            sum: vec![vec![0.0; dim]; estimators],
            sum_sq: vec![0.0; estimators],
        }
    }

    fn add(&mut self, other: &Moments) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    /// Sample covariance traces, one per estimator.
    fn traces(&self) -> Vec<f64> {
        let n = self.count;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, &q)| {
                let norm_sq: f64 = s.iter().map(|x| x * x).sum();
                (q - norm_sq / n) / (n - 1.0)
            })
            .collect()
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn interval(mut xs: Vec<f64>, level: f64) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (percentile(&xs, tail), percentile(&xs, 1.0 - tail))
}

/// Metric pairs ordered by decreasing information set.
const ORDERED_METRICS: [(MetricKind, MetricKind); 2] = [
    (MetricKind::Obs, MetricKind::Mean),
    (MetricKind::Mean, MetricKind::Fin),
];

pub fn run_variance_study(
    policy: &SamplingPolicy,
    config: &BanditConfig,
    study: &VarianceStudy,
) -> Result<VarianceReport> {
    if study.samples < 2 || study.estimators.is_empty() {
        return Err(Error::InvalidConfig(
            "a variance study needs at least two samples and one estimator".into(),
        ));
    }
    if study.blocks < 2 || study.resamples < 2 {
        return Err(Error::InvalidConfig(
            "a variance study needs at least two blocks and two resamples".into(),
        ));
    }
    let blocks = study.blocks.min(study.samples);
    let dim = policy.params.dim();
    let n_est = study.estimators.len();
    let self_play = study.estimators.iter().any(Estimator::needs_self_play);
    let horizon = config.horizon();
    let n = study.samples;

    let block_moments: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::zero(n_est, dim);
            for i in (b * n / blocks)..((b + 1) * n / blocks) {
                let key = EpisodeKey::new(study.seed, Phase::Study, 0, i as u64);
                let instance = Instance::for_episode(config, &key);
                let run = EpisodeRun::simulate(policy, config, &instance, &key, self_play)?;
                let tau = key.stream(Substream::Auxiliary).index(horizon) + 1;
                for (e, &est) in study.estimators.iter().enumerate() {
                    let g = run.single_time(est, config, tau)?;
                    for (s, x) in acc.sum[e].iter_mut().zip(&g.0) {
                        *s += x;
                    }
                    acc.sum_sq[e] += g.0.iter().map(|x| x * x).sum::<f64>();
                }
                acc.count += 1.0;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = Moments::zero(n_est, dim);
    for m in &block_moments {
        total.add(m);
    }
    let point = total.traces();

    let mut rng = EpisodeKey::new(study.seed, Phase::Study, 1, 0).stream(Substream::Auxiliary);
    let replicate_traces: Vec<Vec<f64>> = (0..study.resamples)
        .map(|_| {
            let mut acc = Moments::zero(n_est, dim);
            for _ in 0..blocks {
                acc.add(&block_moments[rng.index(blocks)]);
            }
            acc.traces()
        })
        .collect();

    let traces = study
        .estimators
        .iter()
        .enumerate()
        .map(|(e, est)| {
            let (ci_low, ci_high) =
                interval(replicate_traces.iter().map(|r| r[e]).collect(), study.level);
            TraceRow {
                metric: est.metric(),
                baseline: est.baseline(),
                trace: point[e],
                ci_low,
                ci_high,
            }
        })
        .collect();

    let position = |m: MetricKind, b: BaselineKind| {
        study
            .estimators
            .iter()
            .position(|e| e.metric() == m && e.baseline() == b)
    };
    let mut gaps = Vec::new();
    for baseline in BaselineKind::ALL {
        for (higher, lower) in ORDERED_METRICS {
            if let (Some(hi), Some(lo)) = (position(higher, baseline), position(lower, baseline)) {
                let (ci_low, ci_high) = interval(
                    replicate_traces.iter().map(|r| r[hi] - r[lo]).collect(),
                    study.level,
                );
                gaps.push(GapRow {
                    baseline,
                    higher,
                    lower,
                    gap: point[hi] - point[lo],
                    ci_low,
                    ci_high,
                });
            }
        }
    }

    Ok(VarianceReport {
        samples: n,
        level: study.level,
        traces,
        gaps,
    })
}
