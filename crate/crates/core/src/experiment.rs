//! Experiment presets and the JSON experiment config.
//!
//! A config file is one JSON object with `"schema_version": 1`. When it names
//! a `preset`, the preset supplies every field and the file overrides any
//! subset of them, object by object. Without a preset every field is required.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::{BaselineKind, Estimator, MetricKind};
use crate::model::BanditConfig;
use crate::policy::DecayBase;
use crate::trainer::TrainingRun;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 10 identical arms, 500 epochs.
    Standard,
    /// 5 arms with noise standard deviations 0.1, 0.4, 1, 4, 10 over 50 epochs.
    Hetero,
    /// 20 identical arms, 20 epochs.
    ManyArms,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Standard, Preset::Hetero, Preset::ManyArms];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Standard => "standard",
            Preset::Hetero => "hetero",
            Preset::ManyArms => "many_arms",
        }
    }

    pub fn bandit(self) -> BanditConfig {
        match self {
            Preset::Standard => BanditConfig::homogeneous(10, 500, 0.0, 1.0, 1.0),
            Preset::Hetero => BanditConfig::new(
                50,
                vec![0.0; 5],
                vec![1.0; 5],
                vec![0.01, 0.16, 1.0, 16.0, 100.0],
            ),
            Preset::ManyArms => BanditConfig::homogeneous(20, 20, 0.0, 1.0, 1.0),
        }
        .expect("preset bandit configs are valid")
    }

    pub fn config(self) -> ExperimentConfig {
        let (batch_size, step_size, n_instances) = match self {
            Preset::Standard => (5000, 0.01, 20_000),
            Preset::Hetero | Preset::ManyArms => (1000, 0.05, 10_000),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            preset: Some(self),
            bandit: self.bandit(),
            training: TrainingSection {
                iterations: 1000,
                batch_size,
                step_size,
                metric: MetricKind::Mean,
                baseline: BaselineKind::SelfPlay,
                seed: 1,
                max_grad_norm: None,
                checkpoint_every: None,
                decay: DecayBase::default(),
            },
            evaluation: EvaluationSection {
                n_instances,
                seed: 2,
            },
            output_dir: default_output_dir(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::ConfigSchema(format!("unknown preset `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub metric: MetricKind,
    pub baseline: BaselineKind,
    pub seed: u64,
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    #[serde(default)]
    pub decay: DecayBase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub n_instances: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub bandit: BanditConfig,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".to_string()
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(s)?;
        let preset = match raw.get("preset") {
            None | Some(Value::Null) => None,
            Some(Value::String(name)) => Some(name.parse::<Preset>()?),
            Some(other) => {
                return Err(Error::ConfigSchema(format!(
                    "preset must be a string, found {other}"
                )))
            }
        };
        let config: ExperimentConfig = match preset {
            // parse from text so schema errors keep their line and column
            None => serde_json::from_str(s)?,
            Some(p) => {
                let mut base = serde_json::to_value(p.config()).expect("preset serializes");
                merge(&mut base, raw);
                serde_json::from_value(base)?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigSchema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.estimator()?;
        let t = &self.training;
        if t.batch_size == 0 {
            return Err(Error::ConfigSchema(
                "training.batch_size must be positive".into(),
            ));
        }
        if !(t.step_size > 0.0 && t.step_size.is_finite()) {
            return Err(Error::ConfigSchema(
                "training.step_size must be positive".into(),
            ));
        }
        if t.max_grad_norm.is_some_and(|m| m.is_nan() || m <= 0.0) {
            return Err(Error::ConfigSchema(
                "training.max_grad_norm must be positive".into(),
            ));
        }
        if let DecayBase::Clamped { floor } = t.decay {
            if !(floor > 0.0 && floor <= 1.0) {
                return Err(Error::ConfigSchema(
                    "training.decay.floor must be in (0, 1]".into(),
                ));
            }
        }
        if self.evaluation.n_instances < 2 {
            return Err(Error::ConfigSchema(
                "evaluation.n_instances must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn estimator(&self) -> Result<Estimator> {
        Estimator::new(self.training.metric, self.training.baseline)
    }

    pub fn training_run(&self) -> Result<TrainingRun> {
        let t = &self.training;
        let mut run = TrainingRun::new(t.iterations, t.batch_size, self.estimator()?, t.step_size);
        run.max_grad_norm = t.max_grad_norm;
        run.checkpoint_every = t.checkpoint_every;
        run.decay = t.decay;
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_experimental_settings() {
        let s = Preset::Standard.config();
        assert_eq!((s.bandit.arms(), s.bandit.horizon()), (10, 500));
        assert_eq!((s.training.batch_size, s.training.step_size), (5000, 0.01));
        assert_eq!(s.evaluation.n_instances, 20_000);
        let h = Preset::Hetero.config();
        assert_eq!((h.bandit.arms(), h.bandit.horizon()), (5, 50));
        assert_eq!(h.bandit.noise_var(), &[0.01, 0.16, 1.0, 16.0, 100.0]);
        assert_eq!(h.training.step_size, 0.05);
        let m = Preset::ManyArms.config();
        assert_eq!((m.bandit.arms(), m.bandit.horizon()), (20, 20));
        assert_eq!(m.evaluation.n_instances, 10_000);
    }

    #[test]
    fn preset_overrides_merge() {
        let c = ExperimentConfig::from_json_str(
            r#"{"schema_version":1,"preset":"hetero","training":{"iterations":3,"metric":"fin"}}"#,
        )
        .unwrap();
        assert_eq!(c.training.iterations, 3);
        assert_eq!(c.training.metric, MetricKind::Fin);
        assert_eq!(c.training.batch_size, 1000);
        assert_eq!(c.bandit, Preset::Hetero.bandit());
    }

    #[test]
    fn missing_field_without_preset_is_line_anchored() {
        let text = r#"{
  "schema_version": 1,
  "bandit": {"arms": 2, "horizon": 5, "prior_mean": [0, 0], "prior_var": [1, 1]},
  "training": {"iterations": 1, "batch_size": 4, "step_size": 0.05,
               "metric": "mean", "baseline": "null", "seed": 1},
  "evaluation": {"n_instances": 10, "seed": 2}
}"#;
        match ExperimentConfig::from_json_str(text) {
            Err(Error::ConfigSyntax { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("noise_var"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_uncoupled_pair_and_bad_version() {
        assert!(matches!(
            ExperimentConfig::from_json_str(
                r#"{"schema_version":1,"preset":"standard","training":{"metric":"bayes","baseline":"oracle"}}"#
            ),
            Err(Error::NotCoupled { .. })
        ));
        assert!(
            ExperimentConfig::from_json_str(r#"{"schema_version":2,"preset":"standard"}"#).is_err()
        );
        assert!(
            ExperimentConfig::from_json_str(r#"{"schema_version":1,"preset":"huge"}"#).is_err()
        );
        assert!(ExperimentConfig::from_json_str(
            r#"{"schema_version":1,"preset":"standard","extra":true}"#
        )
        .is_err());
    }

    #[test]
    fn round_trip_is_fixed_point() {
        for p in Preset::ALL {
            let c = p.config();
            let text = c.to_json_string();
            let back = ExperimentConfig::from_json_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_json_string(), text);
        }
        let mut c = Preset::Hetero.config();
        c.preset = None;
        c.training.decay = DecayBase::Clamped { floor: 0.01 };
        c.training.max_grad_norm = Some(5.0);
        let back = ExperimentConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
    }
}
