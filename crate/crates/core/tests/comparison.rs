use qif_core::comparator::same_level;
use qif_core::*;

fn family(id: CorpusId, l: Option<&str>) -> ProgramFamily {
    let bindings: Vec<(String, String)> = l.map(|v| vec![("L".to_string(), v.to_string())]).unwrap_or_default();
    corpus_family(id, &bindings).unwrap()
}

/// Families sharing the `2^k`, `k >= 2` domain.
fn power_of_two_families() -> Vec<ProgramFamily> {
    vec![
        family(CorpusId::P3, None),
        family(CorpusId::P3, Some("5")),
        family(CorpusId::P4, None),
        family(CorpusId::P4, Some("N/4")),
        family(CorpusId::P4, Some("3")),
        family(CorpusId::P4, Some("3sqrtN")),
        family(CorpusId::P4, Some("3logN")),
        family(CorpusId::P5, Some("2")),
        family(CorpusId::P5, Some("7")),
        family(CorpusId::P6, Some("0")),
        family(CorpusId::P6, Some("1")),
        family(CorpusId::P6, Some("2")),
        family(CorpusId::P7, None),
    ]
}

#[test]
fn every_family_is_at_its_own_level() {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    for f in power_of_two_families() {
        assert_eq!(compare(&f, &f, &schedule, &config).unwrap().verdict, Verdict::SameLevel, "{f}");
    }
    let p1 = family(CorpusId::P1, None);
    let wide = SizeSchedule::Explicit((2..=7).map(|k| 1u64 << (8 * k)).collect());
    assert_eq!(compare(&p1, &p1, &wide, &config).unwrap().verdict, Verdict::SameLevel);
}

#[test]
fn swapping_the_programs_reverses_the_verdict() {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    let families = power_of_two_families();
    for a in &families {
        for b in &families {
            let forward = compare(a, b, &schedule, &config).unwrap();
            let backward = compare(b, a, &schedule, &config).unwrap();
            assert_eq!(forward.verdict, backward.verdict.reversed(), "{a} vs {b}");
        }
    }
}

#[test]
fn verdicts_follow_the_leakage_levels() {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(8, 20);
    let rank = |tag: RateTag| match tag.canonical() {
        RateTag::Constant => 0,
        RateTag::InvSqrtN => 1,
        RateTag::PolyLogOverN(_) => 2,
        RateTag::LogOverN => 3,
        RateTag::InvN => 4,
        other => panic!("unexpected {other}"),
    };
    let families: Vec<_> = power_of_two_families().into_iter().filter(|f| !f.name().starts_with("P7")).collect();
    let levels: Vec<RateClass> = families
        .iter()
        .map(|f| classify_level(&leakage_series(f, &schedule, RenyiOrder::Infinity).unwrap(), &config).unwrap())
        .collect();
    for (i, a) in families.iter().enumerate() {
        for (j, b) in families.iter().enumerate() {
            let verdict = compare(a, b, &schedule, &config).unwrap().verdict;
            let (la, lb) = (levels[i].tag, levels[j].tag);
            if same_level(la, lb) {
                assert_eq!(verdict, Verdict::SameLevel, "{a} vs {b}");
            } else if rank(la) != rank(lb) {
                let expected = if rank(la) < rank(lb) { Verdict::FirstHigher } else { Verdict::SecondHigher };
                assert_eq!(verdict, expected, "{a} ({la}) vs {b} ({lb})");
            }
        }
    }
}

#[test]
fn constant_program_leaks_less_than_anything() {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(4, 14);
    let constant = ProgramFamily::from_source("constant", "0", Bindings::new(), 1 << 16).unwrap();
    let p3 = family(CorpusId::P3, None);
    assert_eq!(compare(&constant, &p3, &schedule, &config).unwrap().verdict, Verdict::SecondHigher);
    assert_eq!(compare(&p3, &constant, &schedule, &config).unwrap().verdict, Verdict::FirstHigher);
    assert_eq!(compare(&constant, &constant, &schedule, &config).unwrap().verdict, Verdict::SameLevel);
}

#[test]
fn dsl_and_builtin_versions_compare_equal() {
    let config = EstimatorConfig::default();
    let schedule = SizeSchedule::powers_of_two(6, 16);
    let builtin = family(CorpusId::P6, Some("2"));
    let dsl = ProgramFamily::from_source(
        "popcount",
        "param L; if popcount(A) == L { 1 } else { 0 }",
        [("L".to_string(), 2)].into_iter().collect(),
        1 << 16,
    )
    .unwrap();
    let c = compare(&builtin, &dsl, &schedule, &config).unwrap();
    assert_eq!(c.verdict, Verdict::SameLevel);
    assert!(c.estimate.evidence.iter().all(|&(_, r)| r == 1.0));
}

#[test]
fn bounded_ratios_for_finite_order_families() {
    let orders: Vec<RenyiOrder> = ["1", "inf", "0.5", "2"].iter().map(|s| s.parse().unwrap()).collect();
    let schedule = SizeSchedule::powers_of_two(4, 16);

    let p3 = order_ratio_bounds(&family(CorpusId::P3, None), &schedule, &orders).unwrap();
    assert!(p3.pass);
    for o in &p3.orders {
        assert!(o.min > 0.0 && o.max < 16.0, "{o:?}");
    }
    let inf = p3.orders.iter().find(|o| o.order == RenyiOrder::Infinity).unwrap();
    let last = inf.ratios.last().unwrap().1;
    assert!((last - std::f64::consts::LOG2_E).abs() < 1e-4);

    let p5 = order_ratio_bounds(&family(CorpusId::P5, Some("4")), &schedule, &orders).unwrap();
    for o in &p5.orders {
        assert!((o.max - o.min).abs() < 1e-12, "{o:?}");
    }

    let p4 = order_ratio_bounds(&family(CorpusId::P4, Some("3")), &schedule, &orders).unwrap();
    let shannon = p4.orders.iter().find(|o| o.order == RenyiOrder::Shannon).unwrap();
    let last = shannon.ratios.last().unwrap().1;
    assert!((last - 1.0).abs() < 0.15, "{last}");

    assert!(matches!(
        order_ratio_bounds(&family(CorpusId::P3, None), &schedule, &[RenyiOrder::Zero]),
        Err(ComparatorError::Entropy(_))
    ));
    let constant = ProgramFamily::from_source("constant", "0", Bindings::new(), 1 << 16).unwrap();
    assert!(matches!(
        order_ratio_bounds(&constant, &schedule, &[RenyiOrder::Infinity]),
        Err(ComparatorError::Entropy(EntropyError::DegenerateDistribution))
    ));
    assert!(matches!(
        order_ratio_bounds(&family(CorpusId::P1, None), &SizeSchedule::Explicit(vec![1 << 16, 1 << 24]), &orders),
        Err(ComparatorError::NotFiniteOrder(_))
    ));
}
