//! Fixtures shared by the benchmarks.

use pgts_core::{EpisodeKey, Instance, Phase, Preset, SamplingPolicy};

pub struct Fixture {
    pub preset: Preset,
    pub config: pgts_core::BanditConfig,
    pub policy: SamplingPolicy,
    pub key: EpisodeKey,
    pub instance: Instance,
}

/// Canonical policy and one fixed instance for `preset`.
pub fn fixture(preset: Preset) -> Fixture {
    let config = preset.bandit();
    let key = EpisodeKey::new(1, Phase::Study, 0, 0);
    let instance = Instance::for_episode(&config, &key);
    Fixture {
        preset,
        policy: SamplingPolicy::canonical(&config),
        config,
        key,
        instance,
    }
}

pub fn all_fixtures() -> Vec<Fixture> {
    Preset::ALL.into_iter().map(fixture).collect()
}
