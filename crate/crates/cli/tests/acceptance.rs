//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::LN_2;
use std::time::Instant;

use qif_cli::{cmd_analyze, cmd_compare, Format, ProgramSpec, RunConfig};
use qif_core::comparator::same_level;
use qif_core::entropy::renyi_entropy_nats;
use qif_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn order(s: &str) -> RenyiOrder {
    s.parse().unwrap()
}

fn family(id: CorpusId, l: Option<&str>) -> ProgramFamily {
    let bindings: Vec<(String, String)> = l.map(|v| vec![("L".to_string(), v.to_string())]).unwrap_or_default();
    corpus_family(id, &bindings).unwrap()
}

fn il(f: &ProgramFamily, n: u64, o: &str) -> f64 {
    leakage(f, n, order(o)).unwrap()
}

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol
}

fn criterion_1() -> Outcome {
    let (p1, p2) = (family(CorpusId::P1, None), family(CorpusId::P2, None));
    let n = 1 << 16;
    let (h0, h1, hinf) = (il(&p1, n, "0"), il(&p1, n, "1"), il(&p1, n, "inf"));
    // 8192 singleton outputs and one output holding 7/8 of the inputs.
    let hinf_expected = -(7.0f64 / 8.0).log2();
    let ok = close(h0, 8193f64.log2(), 1e-6)
        && close(h0, 13.00018, 1e-5)
        && close(h1, 2.16864, 1e-4)
        && close(hinf, hinf_expected, 1e-12)
        && close(hinf, 0.19265, 1e-5)
        && close(hinf * LN_2, 0.13353, 1e-4)
        && ["0", "1", "inf"].iter().all(|o| il(&p2, n, o) == 3.0)
        && h0 > il(&p2, n, "0")
        && hinf < il(&p2, n, "inf");
    check(ok, format!("IL_0(P1)={h0:.6} IL_1(P1)={h1:.6} IL_inf(P1)={hinf:.6} IL_*(P2)=3"))
}

fn criterion_2() -> Outcome {
    let (p3, p4) = (family(CorpusId::P3, None), family(CorpusId::P4, Some("N/2")));
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in [4u32, 8, 16] {
        let n = 1u64 << k;
        let q = 1.0 / n as f64;
        ok &= ["0", "1", "inf"].iter().all(|o| il(&p4, n, o) == 1.0);
        ok &= il(&p3, n, "0") == 1.0;
        let e_inf = (il(&p3, n, "inf") - -(1.0 - q).log2()).abs();
        let e_one = (il(&p3, n, "1") - (-(1.0 - q) * (1.0 - q).log2() - q * q.log2())).abs();
        worst = worst.max(e_inf).max(e_one);
    }
    check(ok && worst <= 1e-9, format!("P4[L=N/2] = 1 at all orders, P3 max error {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let schedule = SizeSchedule::powers_of_two(1, 16);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let families: Vec<ProgramFamily> = vec![
        family(CorpusId::P1, None),
        family(CorpusId::P2, None),
        family(CorpusId::P3, None),
        family(CorpusId::P4, Some("N/2")),
        family(CorpusId::P4, Some("N/4")),
        family(CorpusId::P4, Some("3")),
        family(CorpusId::P4, Some("3sqrtN")),
        family(CorpusId::P4, Some("3logN")),
        family(CorpusId::P5, Some("2")),
        family(CorpusId::P5, Some("4")),
        family(CorpusId::P5, Some("7")),
        family(CorpusId::P6, Some("0")),
        family(CorpusId::P6, Some("1")),
        family(CorpusId::P6, Some("2")),
        family(CorpusId::P7, Some("1")),
    ];
    for f in &families {
        for n in schedule.sizes().unwrap().into_iter().filter(|&n| f.in_domain(n)) {
            let shannon = il(f, n, "1");
            for o in ["0.5", "2", "inf"] {
                worst = worst.max((alt_leakage(f, n, order(o)).unwrap() - shannon).abs());
                checked += 1;
            }
        }
    }
    check(worst <= 1e-9, format!("{checked} evaluations, max |alt - Shannon| = {worst:.2e}"))
}

fn d_j(j: u32) -> Distribution {
    let n = 1u64 << j;
    Distribution::from_counts(&[n - 1, 1], n).unwrap()
}

fn criterion_4() -> Outcome {
    // Shannon ratio in natural log: H_1 / (-(1 - p1) ln(1 - p1)).
    let d = d_j(20);
    let t = 1.0 / (1u64 << 20) as f64;
    let shannon = renyi_entropy_nats(&d, RenyiOrder::Shannon) / (-t * t.ln());
    let shannon_ok = close(shannon, 1.0, 1e-2);

    // Order 2: H_2 / (1 - p1) in bits tends to (a / (a - 1)) / ln 2.
    let limit = 2.0 / LN_2;
    let gaps: Vec<f64> = (10..=20).map(|j| (peak_ratio(&d_j(j), order("2")).unwrap() - limit).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let order2_ok = monotone && gaps[gaps.len() - 1] < 1e-4;

    // Order 1/2: H_a / (1 - p1)^a stays within a positive band.
    let (lo, hi) = (1.0, 4.0);
    let half: Vec<f64> = (10..=30).map(|j| peak_ratio(&d_j(j), order("0.5")).unwrap()).collect();
    let (min, max) = half.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let half_ok = min >= lo && max <= hi;

    check(
        shannon_ok && order2_ok && half_ok,
        format!(
            "Shannon ratio at j=20 = {shannon:.6} (|r-1| {} 1e-2); order 2 gap {:.2e} at j=20, monotone={monotone}; \
             order 0.5 in [{min:.4}, {max:.4}]",
            if shannon_ok { "<=" } else { ">" },
            gaps[gaps.len() - 1]
        ),
    )
}

fn criterion_5() -> Outcome {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    let cases: Vec<(ProgramFamily, RateTag)> = vec![
        (family(CorpusId::P4, Some("N/4")), RateTag::Constant),
        (family(CorpusId::P4, Some("3")), RateTag::InvN),
        (family(CorpusId::P4, Some("3sqrtN")), RateTag::InvSqrtN),
        (family(CorpusId::P4, Some("3logN")), RateTag::LogOverN),
        (family(CorpusId::P5, Some("2")), RateTag::Constant),
        (family(CorpusId::P5, Some("4")), RateTag::Constant),
        (family(CorpusId::P5, Some("7")), RateTag::Constant),
        (family(CorpusId::P6, Some("0")), RateTag::PolyLogOverN(0)),
        (family(CorpusId::P6, Some("1")), RateTag::PolyLogOverN(1)),
        (family(CorpusId::P6, Some("2")), RateTag::PolyLogOverN(2)),
    ];
    let mut failures = Vec::new();
    let mut constant = f64::NAN;
    for (i, (f, expected)) in cases.iter().enumerate() {
        let series = leakage_series(f, &schedule, RenyiOrder::Infinity).unwrap();
        let level = classify_level(&series, &config).unwrap();
        if i == 0 {
            constant = level.fitted_constant.unwrap_or(f64::NAN);
        }
        if !same_level(level.tag, *expected) {
            failures.push(format!("{f}: {} != {expected}", level.tag));
        }
    }
    let target = (4.0f64 / 3.0).log2();
    if constant.is_nan() || (constant - target).abs() > 0.02 * target {
        failures.push(format!("P4[L=N/4] constant {constant} vs {target}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} families classified, P4[L=N/4] constant {constant:.5}", cases.len())
        } else {
            failures.join("; ")
        },
    )
}

fn decided_pairs() -> Vec<(ProgramFamily, ProgramFamily, Verdict)> {
    vec![
        (family(CorpusId::P5, Some("4")), family(CorpusId::P4, Some("N/2")), Verdict::SameLevel),
        (family(CorpusId::P6, Some("0")), family(CorpusId::P4, Some("3")), Verdict::SameLevel),
        (family(CorpusId::P4, Some("N/2")), family(CorpusId::P3, None), Verdict::FirstHigher),
    ]
}

fn criterion_6() -> Outcome {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    let mut pairs = decided_pairs();
    pairs.push((family(CorpusId::P7, Some("1")), family(CorpusId::P4, Some("3logN")), Verdict::Incomparable));
    let mut lines = Vec::new();
    let mut ok = true;
    for (a, b, expected) in &pairs {
        let c = compare(a, b, &schedule, &config).unwrap();
        ok &= c.verdict == *expected;
        lines.push(format!("{a} vs {b}: {}", c.verdict));
    }
    check(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    let mut bad = Vec::new();
    for (a, b, expected) in decided_pairs() {
        for o in ["0.5", "1", "2"] {
            let c = compare_at_order(&a, &b, &schedule, order(o), &config).unwrap();
            if c.verdict != expected {
                bad.push(format!("{a} vs {b} at {o}: {}", c.verdict));
            }
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() { "3 pairs x 3 orders agree with min-entropy".into() } else { bad.join("; ") },
    )
}

fn random_finite(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> RenyiOrder {
    RenyiOrder::from_value(rng.random_range(lo..hi)).unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut conflict_pass = 0;
    let mut cases = [0usize; 3];
    for i in 0..50 {
        let (a, b) = match i % 3 {
            0 => {
                let a = random_finite(&mut rng, 1.01, 6.0);
                let b = if rng.random_bool(0.3) {
                    RenyiOrder::Infinity
                } else {
                    random_finite(&mut rng, a.value() + 0.05, 12.0)
                };
                (a, b)
            }
            1 => {
                let a = if rng.random_bool(0.3) { RenyiOrder::Zero } else { random_finite(&mut rng, 0.01, 0.9) };
                (a, random_finite(&mut rng, a.value() + 0.05, 0.99))
            }
            _ => {
                let a = match rng.random_range(0..3) {
                    0 => RenyiOrder::Zero,
                    1 => RenyiOrder::Shannon,
                    _ => random_finite(&mut rng, 0.01, 0.99),
                };
                let b = if rng.random_bool(0.3) { RenyiOrder::Infinity } else { random_finite(&mut rng, 1.05, 12.0) };
                (a, b)
            }
        };
        let (a, b) = if rng.random_bool(0.5) { (b, a) } else { (a, b) };
        let Ok(w) = build_conflict_witness(a, b) else { continue };
        cases[match w.case {
            WitnessCase::Case1 => 0,
            WitnessCase::Case2 => 1,
            WitnessCase::Case3 => 2,
        }] += 1;
        if verify_witness(&Witness::Conflict(w)).is_ok_and(|c| c.pass) {
            conflict_pass += 1;
        }
    }
    let mut gap_pass = 0;
    for _ in 0..20 {
        let d = 1.0 + rng.random_range(1e-3..=7.0);
        let alpha = random_finite(&mut rng, 0.01, 0.99);
        let Ok(w) = build_finite_gap_witness(d, alpha) else { continue };
        let strict = w.r_alpha > d && w.r_beta < 1.0 / d;
        if strict && verify_witness(&Witness::Gap(w)).is_ok_and(|c| c.pass) {
            gap_pass += 1;
        }
    }
    check(
        conflict_pass == 50 && gap_pass == 20 && cases.iter().all(|&c| c > 0),
        format!("conflict {conflict_pass}/50 (cases {cases:?}), gap {gap_pass}/20"),
    )
}

fn criterion_9() -> Outcome {
    let max = 1u64 << 16;
    let mut programs: Vec<CorpusProgram> = vec![CorpusProgram::P1, CorpusProgram::P2];
    for threshold in ["N/2", "N/4", "3", "3sqrtN", "3logN"] {
        programs.push(CorpusProgram::P3 { threshold: threshold.parse().unwrap() });
        programs.push(CorpusProgram::P4 { threshold: threshold.parse().unwrap() });
    }
    programs.extend([2, 4, 7].map(|modulus| CorpusProgram::P5 { modulus }));
    programs.extend([0, 1, 2].map(|ones| CorpusProgram::P6 { ones }));
    programs.extend([1, 3].map(|target| CorpusProgram::P7 { target }));

    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    for p in &programs {
        let sizes: Vec<u64> = (2..=max).filter(|&n| p.in_domain(n)).collect();
        let ast = parse_program(&p.dsl_source()).unwrap();
        let enumerated = if p.dsl_bindings(max).is_empty() {
            enumerate_channels(&ast, &Bindings::new(), &sizes, max).unwrap()
        } else {
            sizes.iter().map(|&n| enumerate_channel(&ast, &p.dsl_bindings(n), n, max).unwrap()).collect()
        };
        for (&n, e) in sizes.iter().zip(&enumerated) {
            compared += 1;
            if p.distribution_at(n).unwrap().to_counts() != e.to_counts() {
                mismatches.push(format!("{} at {n}", p.name()));
            }
        }
    }
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} programs, {compared} sizes, all counts equal", programs.len())
        } else {
            mismatches.join("; ")
        },
    )
}

fn criterion_10() -> Outcome {
    let schedule: SizeSchedule = "2^4..2^32".parse().unwrap();
    let mut config = RunConfig::new(schedule);
    config.orders = ["0", "0.5", "1", "2", "inf"].map(order).to_vec();
    let specs: Vec<ProgramSpec> = [
        "P1",
        "P2",
        "P3",
        "P4",
        "P4,L=N/4",
        "P4,L=3",
        "P4,L=3sqrtN",
        "P4,L=3logN",
        "P5",
        "P5,L=4",
        "P5,L=7",
        "P6,L=0",
        "P6",
        "P6,L=2",
        "P7",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect();
    let render = || -> Vec<String> {
        let mut out = Vec::new();
        for s in &specs {
            let r = cmd_analyze(s, &config).unwrap();
            out.push(r.render(Format::Json));
            out.push(r.render(Format::Csv));
        }
        let mut cfg = config.clone();
        cfg.schedule = SizeSchedule::powers_of_two(6, 24);
        for a in &specs[2..] {
            for b in &specs[2..] {
                let r = cmd_compare(a, b, &cfg).unwrap();
                out.push(r.render(Format::Json));
            }
        }
        out
    };
    let (first, second) = (render(), render());
    let bytes: usize = first.iter().map(String::len).sum();
    check(first == second, format!("{} reports, {bytes} bytes, identical across runs", first.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("conflict between P1 and P2 at 2^16", criterion_1),
        ("P3 / P4 leakage table", criterion_2),
        ("alternative leakage equals Shannon leakage", criterion_3),
        ("peaked-distribution limit ratios", criterion_4),
        ("leakage levels", criterion_5),
        ("comparison verdicts", criterion_6),
        ("verdicts agree across orders", criterion_7),
        ("witness round trip", criterion_8),
        ("closed forms equal enumeration up to 2^16", criterion_9),
        ("deterministic reports", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
