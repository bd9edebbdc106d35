use proptest::prelude::*;
use qif_core::leakage::alt_leakage;
use qif_core::*;

fn programs_for(k: u32) -> Vec<CorpusProgram> {
    let mut out = vec![
        CorpusProgram::P7 { target: 1 },
        CorpusProgram::P7 { target: 5 },
        CorpusProgram::P6 { ones: 0 },
        CorpusProgram::P6 { ones: k / 2 },
        CorpusProgram::P6 { ones: k },
    ];
    for threshold in [
        Threshold::Fraction(2.0),
        Threshold::Fraction(3.0),
        Threshold::Constant(0),
        Threshold::Constant(3),
        Threshold::Sqrt(3.0),
        Threshold::Sqrt(0.7),
        Threshold::Log(3.0),
        Threshold::Log(1.5),
    ] {
        out.push(CorpusProgram::P3 { threshold });
        out.push(CorpusProgram::P4 { threshold });
    }
    out
}

#[test]
fn closed_forms_match_enumeration_on_power_of_two_sizes() {
    for k in 2..=14 {
        for p in programs_for(k) {
            let n = 1u64 << k;
            if p.in_domain(n) {
                assert!(closed_form_matches_enumeration(&p, n, DEFAULT_ENUM_CAP).unwrap(), "{} at 2^{k}", p.name());
            }
        }
    }
}

proptest! {
    #[test]
    fn modular_closed_form_matches_enumeration(modulus in 2u64..300, size in 2u64..5000) {
        let p = CorpusProgram::P5 { modulus };
        prop_assert!(closed_form_matches_enumeration(&p, size, DEFAULT_ENUM_CAP).unwrap());
    }

    #[test]
    fn alternative_leakage_is_shannon(k in 2u32..30, which in 0usize..21, a in 0.05f64..10.0) {
        let programs = programs_for(k);
        let p = programs[which % programs.len()];
        let n = 1u64 << k;
        prop_assume!(p.in_domain(n));
        let f = ProgramFamily::corpus(p);
        let order = RenyiOrder::from_value(a).unwrap();
        let shannon = leakage(&f, n, RenyiOrder::Shannon).unwrap();
        prop_assert!((alt_leakage(&f, n, order).unwrap() - shannon).abs() < 1e-9);
    }
}

#[test]
fn finite_order_families_have_bounded_support() {
    let schedule = SizeSchedule::powers_of_two(4, 30);
    for p in programs_for(4).into_iter().chain([CorpusProgram::P5 { modulus: 7 }]) {
        let report = finite_order_check(&ProgramFamily::corpus(p), &schedule).unwrap();
        assert_eq!(report.order_class, OrderClass::FopConsistent, "{}", p.name());
        assert!(report.max_support <= 7);
    }
}

#[test]
fn conflict_between_the_first_two_programs() {
    let p1 = corpus_family(CorpusId::P1, &[]).unwrap();
    let p2 = corpus_family(CorpusId::P2, &[]).unwrap();
    let n = 1 << 16;
    let at = |f: &ProgramFamily, o| leakage(f, n, o).unwrap();
    assert!(at(&p1, RenyiOrder::Zero) > at(&p2, RenyiOrder::Zero));
    assert!(at(&p1, RenyiOrder::Infinity) < at(&p2, RenyiOrder::Infinity));
    assert!(at(&p1, RenyiOrder::Shannon) < at(&p2, RenyiOrder::Shannon));
}
