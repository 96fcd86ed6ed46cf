use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecqi_bench::profiles;
use ecqi_core::ecqi::{ecqi, EcqiConfig, ScanOrder, SearchStrategy};
use ecqi_core::link::McsTable;

fn strategies(c: &mut Criterion) {
    let table = McsTable::default();
    let set = profiles(16, 8, 12.0, 32, 7);
    let mut g = c.benchmark_group("ecqi_search");
    let cases = [
        ("linear_asc", SearchStrategy::LinearAsc),
        ("linear_desc", SearchStrategy::LinearDesc),
        ("binary", SearchStrategy::Binary),
        (
            "relaxed",
            SearchStrategy::Relaxed {
                delta_p: 0.02,
                order: ScanOrder::Binary,
            },
        ),
    ];
    for (name, search) in cases {
        let cfg = EcqiConfig {
            n: 2,
            p: 0.9,
            search,
            validate_monotone: Some(false),
            ..EcqiConfig::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| {
                set.iter()
                    .map(|p| ecqi(p, &table, cfg).unwrap().index)
                    .sum::<usize>()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, strategies);
criterion_main!(benches);
