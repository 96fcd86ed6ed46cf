use ecqi_core::config::parse_config;
use ecqi_core::ecqi::*;
use ecqi_core::link::{CbSinrProfile, CbgLayout, McsTable};
use ecqi_core::Error;
use proptest::prelude::*;

fn profile() -> impl Strategy<Value = CbSinrProfile> {
    (1usize..=16, -15.0f64..50.0)
        .prop_flat_map(|(c, center)| {
            (
                prop::collection::vec(center - 8.0..center + 8.0, c),
                1usize..=c.min(8),
            )
        })
        .prop_map(|(sinr, m)| {
            let c = sinr.len();
            CbSinrProfile::new(sinr, CbgLayout::new(c, m).unwrap()).unwrap()
        })
}

fn cfg_for(p: &CbSinrProfile, n: usize, target: f64) -> EcqiConfig {
    EcqiConfig {
        n: n.min(p.layout().num_cbgs()),
        p: target,
        validate_monotone: Some(true),
        ..EcqiConfig::default()
    }
}

fn index(p: &CbSinrProfile, cfg: &EcqiConfig) -> usize {
    ecqi(p, &McsTable::default(), cfg).unwrap().index
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn strategies_agree(p in profile(), n in 0usize..8, target in 0.01f64..0.99) {
        let base = cfg_for(&p, n, target);
        let expect = index(&p, &base);
        for search in [
            SearchStrategy::LinearAsc,
            SearchStrategy::LinearDesc,
            SearchStrategy::Relaxed { delta_p: 0.0, order: ScanOrder::Binary },
            SearchStrategy::Relaxed { delta_p: 0.0, order: ScanOrder::LinearDesc },
        ] {
            prop_assert_eq!(index(&p, &EcqiConfig { search, ..base.clone() }), expect);
        }
    }

    #[test]
    fn methods_agree(p in profile(), n in 0usize..=3, target in 0.01f64..0.99) {
        let base = EcqiConfig { method: ProbabilityMethod::Recursion, ..cfg_for(&p, n, target) };
        let expect = index(&p, &base);
        for method in [ProbabilityMethod::ClosedForm, ProbabilityMethod::Direct] {
            prop_assert_eq!(index(&p, &EcqiConfig { method, ..base.clone() }), expect);
        }
    }

    #[test]
    fn better_channel_never_lowers_index(p in profile(), n in 0usize..8, target in 0.01f64..0.99, gain in 0.0f64..10.0) {
        let cfg = cfg_for(&p, n, target);
        prop_assert!(index(&p.shifted(gain), &cfg) >= index(&p, &cfg));
    }

    #[test]
    fn stricter_target_never_raises_index(p in profile(), n in 0usize..8, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(index(&p, &cfg_for(&p, n, hi)) <= index(&p, &cfg_for(&p, n, lo)));
    }

    #[test]
    fn tolerating_more_failures_never_lowers_index(p in profile(), target in 0.01f64..0.99) {
        let m = p.layout().num_cbgs();
        let mut prev = 0;
        for n in 0..=m {
            let r = index(&p, &cfg_for(&p, n, target));
            prop_assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn relaxed_band_stays_within_band_or_is_strict(p in profile(), n in 0usize..8, target in 0.05f64..0.95, delta in 0.0f64..0.05) {
        let base = cfg_for(&p, n, target);
        let strict = index(&p, &base);
        let cfg = EcqiConfig {
            search: SearchStrategy::Relaxed { delta_p: delta, order: ScanOrder::LinearDesc },
            ..base.clone()
        };
        let r = ecqi(&p, &McsTable::default(), &cfg).unwrap();
        let mut stats = SearchStats::default();
        let q = evaluate_q(&p, &McsTable::default(), r.index, &base, &mut stats).unwrap();
        prop_assert!(r.index == strict || (q - target).abs() <= delta || r.out_of_range);
    }

    #[test]
    fn binary_search_evaluation_bound(p in profile(), n in 0usize..8, target in 0.01f64..0.99) {
        let cfg = EcqiConfig { validate_monotone: Some(false), ..cfg_for(&p, n, target) };
        let r = ecqi(&p, &McsTable::default(), &cfg).unwrap();
        let len = McsTable::default().len();
        prop_assert!(r.stats.mcs_evaluations <= (len as f64).log2().ceil() as usize + 1);
    }
}

#[test]
fn closed_form_accounting_through_the_engine() {
    let table = McsTable::default();
    let p = CbSinrProfile::flat(10.0, 8, 8).unwrap();
    for (n, expect) in [(1, 8), (2, 17), (3, 27)] {
        let cfg = EcqiConfig {
            n,
            mode: EcqiMode::ExactlyN,
            ..EcqiConfig::default()
        };
        let mut stats = SearchStats::default();
        evaluate_q(&p, &table, 12, &cfg, &mut stats).unwrap();
        assert_eq!(stats.multiplications, expect, "N = {n}");
    }
    let cfg = EcqiConfig {
        n: 2,
        mode: EcqiMode::ExactlyN,
        method: ProbabilityMethod::Direct,
        ..EcqiConfig::default()
    };
    let mut stats = SearchStats::default();
    evaluate_q(&p, &table, 12, &cfg, &mut stats).unwrap();
    assert_eq!(stats.multiplications, complexity_direct(8, 2).unwrap());
    assert_eq!(stats.multiplications, 224);
}

#[test]
fn out_of_range_reports_zero() {
    let table = McsTable::default();
    let deep = CbSinrProfile::flat(-60.0, 4, 4).unwrap();
    let one = EcqiConfig {
        n: 1,
        ..EcqiConfig::default()
    };
    let r = ecqi(&deep, &table, &one).unwrap();
    assert_eq!((r.index, r.out_of_range), (0, true));
    // Tolerating every CBG makes any MCS qualify.
    let r = ecqi(&deep, &table, &EcqiConfig::default()).unwrap();
    assert_eq!(r.index, table.len() - 1);
    let high = CbSinrProfile::flat(90.0, 4, 4).unwrap();
    let r = ecqi(&high, &table, &one).unwrap();
    assert_eq!(r.index, table.len() - 1);
    let b = baseline_cqi(-60.0, &table, 0.1, 8);
    assert!(b.out_of_range);
}

#[test]
fn n_above_m_is_rejected() {
    let err = parse_config("[ecqi]\nn = 9\nmax_cbgs = 8\n", &[]).unwrap_err();
    match err {
        Error::Validation { field, msg } => {
            assert_eq!(field, "ecqi.n");
            assert!(msg.contains("N exceeds M"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let p = CbSinrProfile::flat(10.0, 4, 2).unwrap();
    let cfg = EcqiConfig {
        n: 3,
        ..EcqiConfig::default()
    };
    assert!(ecqi(&p, &McsTable::default(), &cfg).is_err());
}

#[test]
fn complexity_table() {
    assert_eq!(complexity_direct(8, 1).unwrap(), 64);
    assert_eq!(complexity_direct(8, 3).unwrap(), 448);
    assert_eq!(complexity_closed(8, 1).unwrap(), 8);
    assert_eq!(complexity_closed(8, 2).unwrap(), 17);
    assert_eq!(complexity_closed(8, 3).unwrap(), 27);
    assert!(complexity_closed(8, 4).is_err());
    assert!(complexity_direct(4, 5).is_err());
}
