use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qif_bench::{comparison_families, family};
use qif_core::{
    build_conflict_witness, build_finite_gap_witness, classify_level, compare, enumerate_channel, enumerate_channels,
    leakage_series, parse_program, renyi_entropy, Bindings, CorpusId, Distribution, EstimatorConfig, RenyiOrder,
    SizeSchedule,
};

fn entropy(c: &mut Criterion) {
    let mut group = c.benchmark_group("renyi_entropy");
    let counts: Vec<u64> = (1..=4096u64).map(|i| i * 3 + i % 7).collect();
    let d = Distribution::from_counts(&counts, counts.iter().sum()).unwrap();
    for order in ["0", "0.5", "1", "2", "inf"] {
        let o: RenyiOrder = order.parse().unwrap();
        group.bench_with_input(BenchmarkId::new("4096 outputs", format!("H_{order}")), &o, |b, &o| {
            b.iter(|| renyi_entropy(black_box(&d), o))
        });
    }
    group.finish();
}

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumeration");
    let popcount = parse_program("param L = 2; if popcount(A) == L { 1 } else { 0 }").unwrap();
    let modulus = parse_program("param L = 7; A % L").unwrap();
    for k in [12u32, 16] {
        let n = 1u64 << k;
        group.throughput(Throughput::Elements(n));
        group.bench_with_input(BenchmarkId::new("popcount", n), &n, |b, &n| {
            b.iter(|| enumerate_channel(&popcount, &Bindings::new(), n, n).unwrap())
        });
    }
    let sizes: Vec<u64> = (2..=4096).collect();
    group.throughput(Throughput::Elements(4096));
    group.bench_function("modulus sweep 2..=4096", |b| {
        b.iter(|| enumerate_channels(&modulus, &Bindings::new(), black_box(&sizes), 1 << 16).unwrap())
    });
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 40);
    let families = comparison_families();
    c.bench_function("compare all pairs 2^8..2^40", |b| {
        b.iter(|| {
            for x in &families {
                for y in &families {
                    black_box(compare(x, y, &schedule, &config).unwrap().verdict);
                }
            }
        })
    });
    let series = leakage_series(&family(CorpusId::P6, "2"), &schedule, RenyiOrder::Infinity).unwrap();
    c.bench_function("classify P6[L=2]", |b| b.iter(|| classify_level(black_box(&series), &config).unwrap()));
}

fn witnesses(c: &mut Criterion) {
    let pairs: Vec<(RenyiOrder, RenyiOrder)> = [("2", "inf"), ("0", "0.5"), ("0.5", "3"), ("1", "inf")]
        .iter()
        .map(|(a, b)| (a.parse().unwrap(), b.parse().unwrap()))
        .collect();
    c.bench_function("conflict witnesses", |b| {
        b.iter(|| pairs.iter().map(|&(a, o)| build_conflict_witness(a, o).unwrap().n).sum::<u64>())
    });
    let alpha = RenyiOrder::from_value(0.5).unwrap();
    c.bench_function("gap witness D=4", |b| b.iter(|| build_finite_gap_witness(black_box(4.0), alpha).unwrap()));
}

criterion_group!(benches, entropy, enumeration, estimation, witnesses);
criterion_main!(benches);
