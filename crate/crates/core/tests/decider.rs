mod common;

use common::{config_for, decide_brute, enumerate_cases, run_case, DecisionCase, Thresholds, DEFAULT_THRESHOLDS};
use flas_core::decider::{Trigger, Verdict};
use flas_core::sim::MAX_MATCHERS;
use proptest::prelude::*;

#[test]
fn exhaustive_patterns_match_the_rule() {
    let th = DEFAULT_THRESHOLDS;
    let cfg = config_for(&th, 4);
    let cases = enumerate_cases(4, MAX_MATCHERS);
    assert!(cases.len() >= 128);
    for c in &cases {
        let (v, t, cool, buffered) = run_case(c, &cfg, th.dt);
        let (bv, bt, bcool) = decide_brute(c, &th);
        assert_eq!((v, t, cool), (bv, bt, bcool), "{c:?}");
        // the buffer restarts after every action
        if v != Verdict::None {
            assert_eq!(buffered, 0, "{c:?}");
        }
    }
}

#[test]
fn scale_out_wins_over_scale_in() {
    // a trend forecast that is both rising and falling cannot occur with
    // majority 3 of 4, so use a majority of 2
    let th = Thresholds { majority: 2, ..DEFAULT_THRESHOLDS };
    let cfg = config_for(&th, 4);
    let c = DecisionCase {
        forecast: Some(vec![1.5, 1.5, -1.5, -1.5]),
        buffer: vec![0.005],
        rt_estimate: 0.005,
        cooldown: 0,
        matchers: 4,
        max_matchers: MAX_MATCHERS,
        t_sa_pred: 2.3,
    };
    let (v, t, cool, _) = run_case(&c, &cfg, 1.0);
    assert_eq!((v, t, cool), (Verdict::ScaleOut, Trigger::Proactive, 5));
}

#[test]
fn cooldown_counts_down_one_tick_per_call() {
    let th = DEFAULT_THRESHOLDS;
    let cfg = config_for(&th, 4);
    let mut c = enumerate_cases(4, MAX_MATCHERS).into_iter().find(|c| c.cooldown == 2).unwrap();
    for expect in [1, 0] {
        let (v, t, cool, _) = run_case(&c, &cfg, 1.0);
        assert_eq!((v, t, cool), (Verdict::None, Trigger::Cooldown, expect));
        c.cooldown = cool;
    }
}

fn level() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.5), Just(0.0), Just(-1.5), -3.0f64..3.0]
}

fn rt() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.9), Just(0.1), Just(0.005), 0.0f64..2.0]
}

proptest! {
    #[test]
    fn random_cases_match_the_rule(
        h in 1usize..7,
        majority_frac in 0.0f64..1.0,
        react_w in 1usize..4,
        forecast in proptest::collection::vec(level(), 6),
        has_forecast in any::<bool>(),
        buffer in proptest::collection::vec(rt(), 0..5),
        est in rt(),
        cooldown in 0u64..3,
        m_pow in 0u32..21,
        t_sa in 0.1f64..9.9,
    ) {
        let majority = 1 + ((h as f64 - 1.0) * majority_frac).round() as usize;
        let th = Thresholds { majority, react_w, ..DEFAULT_THRESHOLDS };
        let cfg = config_for(&th, h);
        let c = DecisionCase {
            forecast: has_forecast.then(|| forecast[..h].to_vec()),
            buffer,
            rt_estimate: est,
            cooldown,
            matchers: 1 << m_pow,
            max_matchers: MAX_MATCHERS,
            t_sa_pred: t_sa,
        };
        let (v, t, cool, _) = run_case(&c, &cfg, 1.0);
        prop_assert_eq!((v, t, cool), decide_brute(&c, &th));
    }
}
