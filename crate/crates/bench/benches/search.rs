use criterion::{criterion_group, criterion_main, Criterion};

use didea_bench::search_fixture;
use didea_core::search::run_search;
use didea_core::{Scorer, SearchConfig};

fn search(c: &mut Criterion) {
    let fx = search_fixture(200, 50);
    let mut group = c.benchmark_group("run_search_50_spectra");
    group.sample_size(10);
    for scorer in [Scorer::Didea, Scorer::Xcorr] {
        let cfg = SearchConfig { scorer, ..SearchConfig::default() };
        group.bench_function(scorer.to_string(), |b| {
            b.iter(|| run_search(&fx.spectra, &fx.target, &fx.decoy, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
