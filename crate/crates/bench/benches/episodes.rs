use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pgts_bench::all_fixtures;
use pgts_core::quantile::normal_quantile;
use pgts_core::{run_episode, BaselineKind, EpisodeRun, Estimator, MetricKind, Policy, Substream};

fn episodes(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    for f in all_fixtures() {
        group.bench_function(format!("reshaped_ts/{}", f.preset), |b| {
            b.iter(|| {
                let mut rng = f.key.stream(Substream::Policy);
                black_box(
                    run_episode(&f.policy, &f.config, &f.instance, &mut rng)
                        .unwrap()
                        .regret(),
                )
            })
        });
        for policy in [Policy::NaiveTs, Policy::BayesUcb] {
            group.bench_function(format!("{}/{}", policy.label(), f.preset), |b| {
                b.iter(|| {
                    let mut rng = f.key.stream(Substream::Policy);
                    black_box(policy.rollout(&f.config, &f.instance, &mut rng))
                })
            });
        }
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    for f in all_fixtures() {
        let run = EpisodeRun::simulate(&f.policy, &f.config, &f.instance, &f.key, true).unwrap();
        for (metric, baseline) in [
            (MetricKind::Obs, BaselineKind::Null),
            (MetricKind::Mean, BaselineKind::SelfPlay),
            (MetricKind::Fin, BaselineKind::Oracle),
            (MetricKind::Bayes, BaselineKind::Null),
        ] {
            let est = Estimator::new(metric, baseline).unwrap();
            group.bench_function(format!("{est}/{}", f.preset), |b| {
                b.iter(|| black_box(run.gradient(est, &f.config).unwrap()))
            });
        }
    }
    group.finish();
}

fn quantile(c: &mut Criterion) {
    let ps: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    c.bench_function("normal_quantile/999", |b| {
        b.iter(|| {
            ps.iter()
                .map(|&p| normal_quantile(black_box(p)))
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, episodes, gradients, quantile);
criterion_main!(benches);
