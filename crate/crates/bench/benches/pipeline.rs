use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use langworld_core::pipeline::run;
use langworld_core::{ClassifierRegistry, Mode};

fn modes(c: &mut Criterion) {
    let registry = ClassifierRegistry::default();
    let models = langworld_bench::trained_models(&registry);
    let sites = langworld_bench::sites(&registry);
    let site = &sites["site1"];
    let instruction = "go to the nearest ball in the hallway";

    let mut group = c.benchmark_group("run");
    for mode in Mode::ALL {
        group.bench_with_input(
            BenchmarkId::from_parameter(mode.label()),
            &mode,
            |b, &mode| b.iter(|| run(black_box(instruction), site, &models, &registry, mode)),
        );
    }
    group.finish();
}

criterion_group!(benches, modes);
criterion_main!(benches);
