use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pbshm_core::family::{three_span_family, two_span_family, FamilyTemplate, StructureInstance};
use pbshm_core::fibre::OperatorSpec;
use pbshm_core::graph::{MetricConfig, Population, Provenance};
use pbshm_core::par::Execution;
use pbshm_core::physics::{populate_fibre, CampaignSettings, Condition};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bridge() -> StructureInstance {
    let f = Arc::new(two_span_family());
    let theta = f.midpoint();
    StructureInstance::new(f, theta).unwrap()
}

fn conditions() -> Vec<Condition> {
    vec![
        Condition::healthy(),
        Condition::damaged(1, "D1", 0.25),
        Condition::damaged(2, "P1", 0.25),
        Condition::damaged(3, "D2", 0.25),
    ]
}

fn settings() -> CampaignSettings {
    CampaignSettings {
        acquisitions: 8,
        ..Default::default()
    }
}

fn population(n: usize) -> Population {
    let families: [Arc<FamilyTemplate>; 2] = [Arc::new(two_span_family()), Arc::new(three_span_family())];
    let mut pop = Population::new();
    for i in 0..n {
        let f = &families[i % 2];
        let theta: Vec<f64> = (0..f.dimension())
            .map(|d| {
                let (lo, hi) = f.bounds(d);
                lo + (hi - lo) * (((i * 7 + d * 3) % 11) as f64 + 0.5) / 11.0
            })
            .collect();
        let inst = StructureInstance::new(Arc::clone(f), theta).unwrap();
        pop.insert_instance(format!("s{i}"), inst, Provenance::Simulated).unwrap();
    }
    pop
}

fn bench_populate(c: &mut Criterion) {
    let (inst, conds, s) = (bridge(), conditions(), settings());
    let mut g = c.benchmark_group("populate_fibre");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| populate_fibre("b", black_box(&inst), &conds, &s, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_chain(c: &mut Criterion) {
    let s = settings();
    let base = populate_fibre("b", &bridge(), &conditions(), &s, Execution::Parallel).unwrap();
    let chain = [OperatorSpec::demean(), OperatorSpec::welch(s.welch_segment, s.sample_rate)];
    let mut g = c.benchmark_group("feature_chain");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || {
                    let mut f = pbshm_core::fibre::Fibre::new("b", base.fibre.config().clone()).unwrap();
                    for ((j, k), v) in base.fibre.project_stratum(0).unwrap().cells() {
                        f.ingest(j, k, v.to_vec(), base.fibre.start_time(k).unwrap()).unwrap();
                    }
                    f
                },
                |mut f| f.apply_chain(0, &chain, exec).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn bench_distance_matrix(c: &mut Criterion) {
    let pop = population(24);
    let cfg = MetricConfig::default();
    let mut g = c.benchmark_group("distance_matrix");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pop.distance_matrix(None, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_populate, bench_chain, bench_distance_matrix);
criterion_main!(benches);
