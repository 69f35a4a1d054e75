use locupdate::sim::{run, run_with_trace, EventKind, Scenario, TraceRecord};
use locupdate::{CostModel, CostedEvent, Policy, PolicyKind, RateConfig, TimerParams};
use proptest::prelude::*;

fn scenario(ios: f64, ccrr: f64, csa: f64, t_p: f64, policy: Policy) -> Scenario {
    Scenario::new(
        RateConfig::new(ios, ccrr, csa).unwrap(),
        TimerParams::new(t_p).unwrap(),
        policy,
        CostModel::default(),
    )
}

fn trace(s: &Scenario, seed: u64, horizon: f64) -> Vec<TraceRecord> {
    let mut out = Vec::new();
    run_with_trace(s, seed, horizon, |r| {
        out.push(*r);
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn csa_does_not_perturb_ios_arrivals() {
    let ios_times = |csa: f64| -> Vec<f64> {
        trace(&scenario(0.7, 0.4, csa, 1.0, Policy::cloud_aware(0.0).unwrap()), 21, 500.0)
            .into_iter()
            .filter(|r| r.kind == EventKind::IosArrival)
            .map(|r| r.time)
            .collect()
    };
    let base = ios_times(0.0);
    assert!(!base.is_empty());
    assert_eq!(base, ios_times(0.3));
    assert_eq!(base, ios_times(3.0));
}

#[test]
fn both_policies_see_the_same_workload() {
    let arrivals = |policy: Policy| -> Vec<(f64, EventKind)> {
        trace(&scenario(0.7, 0.4, 0.9, 1.0, policy), 8, 400.0)
            .into_iter()
            .filter(|r| {
                matches!(r.kind, EventKind::IosArrival | EventKind::CcrrArrival | EventKind::CsaArrival)
            })
            .map(|r| (r.time, r.kind))
            .collect()
    };
    assert_eq!(arrivals(Policy::standard_ims()), arrivals(Policy::cloud_aware(0.0).unwrap()));
}

#[test]
fn strict_baseline_ignores_sessions_for_refresh() {
    let s = scenario(2.0, 0.5, 0.0, 1.0, Policy::standard_ims());
    let lenient = s.with_policy(Policy::new(PolicyKind::StandardIms, 0.0, Some(true)).unwrap());
    let strict = run(&s, 4, 20_000.0).unwrap();
    let relaxed = run(&lenient, 4, 20_000.0).unwrap();
    assert!(relaxed.prr_count < strict.prr_count);
    assert_eq!(strict.events.ios, relaxed.events.ios);
    assert_eq!(strict.checkpoint_count, strict.events.ccrr);
}

#[test]
fn detection_latency_bounded_by_timer_under_both_policies() {
    for policy in [Policy::standard_ims(), Policy::cloud_aware(0.0).unwrap()] {
        for seed in 0..50 {
            let mut s = scenario(0.3, 0.2, 0.4, 1.7, policy);
            s.detach_at = Some(25.0 + seed as f64 * 0.37);
            let report = run(&s, seed, 200.0).unwrap();
            let detected = report.detach_detected_at.unwrap();
            let last = report.last_refresh_before_detach.unwrap();
            assert!(detected > s.detach_at.unwrap());
            assert!(detected <= last + 1.7 + 1e-12, "{detected} vs {last}");
        }
    }
}

#[test]
fn batched_publish_stays_fresh_between_batches() {
    for delta in [0.1, 0.25, 0.5] {
        let s = scenario(0.5, 0.3, 2.0, 1.0, Policy::cloud_aware(delta).unwrap());
        let records = trace(&s, 13, 2_000.0);
        let mut checked = 0;
        for r in records.iter().filter(|r| r.registered && !r.publish_pending) {
            assert!(
                r.registrar_expiry >= r.device_expiry - delta - 1e-12,
                "t={} device {} registrar {}",
                r.time,
                r.device_expiry,
                r.registrar_expiry
            );
            checked += 1;
        }
        assert!(checked > 1000);
        let publishes = records.iter().filter(|r| r.kind == EventKind::PublishTick).count();
        let csa = records.iter().filter(|r| r.kind == EventKind::CsaArrival).count();
        assert!(publishes > 0 && publishes < csa, "batching collapses accesses");
    }
}

#[test]
fn publish_ticks_land_on_fixed_phase_boundaries() {
    let delta = 0.25;
    let s = scenario(0.0, 0.0, 3.0, 1.0, Policy::cloud_aware(delta).unwrap());
    for r in trace(&s, 2, 300.0).iter().filter(|r| r.kind == EventKind::PublishTick) {
        let k = r.time / delta;
        assert!((k - k.round()).abs() < 1e-9, "publish at {}", r.time);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn timers_coupled_without_batching(
        ios in 0.0..2.0f64, ccrr in 0.0..2.0f64, csa in 0.0..2.0f64,
        t_p in 0.2..3.0f64, seed in any::<u64>(), cloud in any::<bool>()
    ) {
        let policy = if cloud { Policy::cloud_aware(0.0).unwrap() } else { Policy::standard_ims() };
        for r in trace(&scenario(ios, ccrr, csa, t_p, policy), seed, 300.0) {
            prop_assert_eq!(r.device_expiry, r.registrar_expiry);
        }
    }

    #[test]
    fn cloud_never_needs_more_prr(
        ios in 0.0..2.0f64, ccrr in 0.0..2.0f64, csa in 0.0..2.0f64,
        t_p in 0.2..3.0f64, seed in any::<u64>(), delta in prop_oneof![Just(0.0), 0.05..0.5f64]
    ) {
        let s = scenario(ios, ccrr, csa, t_p, Policy::standard_ims());
        let ims = run(&s, seed, 500.0).unwrap();
        let cloud = run(&s.with_policy(Policy::cloud_aware(delta).unwrap()), seed, 500.0).unwrap();
        prop_assert!(cloud.prr_count <= ims.prr_count);
    }

    #[test]
    fn live_device_keeps_its_binding(
        ios in 0.0..2.0f64, ccrr in 0.0..2.0f64, csa in 0.0..2.0f64,
        t_p in 0.2..3.0f64, seed in any::<u64>(), cloud in any::<bool>()
    ) {
        let policy = if cloud { Policy::cloud_aware(0.0).unwrap() } else { Policy::standard_ims() };
        let report = run(&scenario(ios, ccrr, csa, t_p, policy), seed, 500.0).unwrap();
        prop_assert_eq!(report.events.registrar_timer_expiry, 0);
        prop_assert_eq!(report.spurious_detaches, 0);
        prop_assert_eq!(report.detach_detected_at, None);
    }

    #[test]
    fn power_equals_sum_of_event_costs(
        ios in 0.0..2.0f64, ccrr in 0.0..2.0f64, csa in 0.0..2.0f64,
        t_p in 0.2..3.0f64, seed in any::<u64>(), cloud in any::<bool>()
    ) {
        let costs = CostModel::default();
        let policy = if cloud { Policy::cloud_aware(0.0).unwrap() } else { Policy::standard_ims() };
        let report = run(&scenario(ios, ccrr, csa, t_p, policy), seed, 500.0).unwrap();
        let csa_cost = if cloud { costs.event_cost(CostedEvent::Csa) } else { 0.0 };
        let expected = report.events.ios as f64 * costs.event_cost(CostedEvent::Ios)
            + report.events.ccrr as f64 * costs.event_cost(CostedEvent::Ccrr)
            + report.events.csa as f64 * csa_cost
            + report.prr_count as f64 * costs.event_cost(CostedEvent::Prr);
        prop_assert_eq!(report.power.total, expected);
    }
}
