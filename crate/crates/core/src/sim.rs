//! Discrete-time fluid-queue model of the elastic publish/subscribe service.
//!
//! The pipeline is Access Point -> Matcher -> Exit Point. Only the matcher
//! layer is stateful and CPU bound, so it is the only layer that scales.
//! Every matcher processes notifications at a rate that degrades with the
//! number of stored subscriptions; arrivals that exceed capacity are queued.

use std::fmt;

use rand::Rng;

use crate::error::SimError;

/// Largest matcher count considered when searching for a sufficient configuration.
pub const MAX_MATCHERS: u32 = 1 << 20;

/// Instance counts of the three operator layers, printed as `ap-matcher-ep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ServiceConfig {
    pub ap_instances: u32,
    pub matcher_instances: u32,
    pub ep_instances: u32,
}

impl ServiceConfig {
    pub fn new(ap_instances: u32, matcher_instances: u32, ep_instances: u32) -> Result<Self, SimError> {
        if ap_instances == 0 || ep_instances == 0 {
            return Err(SimError::InvalidConfig("access and exit point counts must be >= 1".into()));
        }
        if !matcher_instances.is_power_of_two() || matcher_instances > MAX_MATCHERS {
            return Err(SimError::InvalidConfig(format!(
                "matcher count {matcher_instances} is not a power of two in [1, 2^20]"
            )));
        }
        Ok(Self { ap_instances, matcher_instances, ep_instances })
    }

    /// The 1-1-1 topology every scenario starts from.
    pub const fn minimal() -> Self {
        Self { ap_instances: 1, matcher_instances: 1, ep_instances: 1 }
    }

    pub fn scaled_out(&self) -> Self {
        Self { matcher_instances: self.matcher_instances * 2, ..*self }
    }

    /// `None` when already at a single matcher.
    pub fn scaled_in(&self) -> Option<Self> {
        (self.matcher_instances >= 2)
            .then(|| Self { matcher_instances: self.matcher_instances / 2, ..*self })
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self::minimal()
    }
}

impl fmt::Display for ServiceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.ap_instances, self.matcher_instances, self.ep_instances)
    }
}

/// Ground-truth scaling-time model `a0 + a1*N + a2*S` (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingTimeCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Messages per second one matcher sustains with no stored subscriptions.
    pub mu0: f64,
    /// Capacity degradation per stored subscription.
    pub kappa: f64,
    /// Per-message service latency of one matcher holding no subscriptions (s).
    pub base_service_time: f64,
    /// Capacity multiplier while a repartitioning is in flight.
    pub scaling_overhead_factor: f64,
    pub t_coeffs: ScalingTimeCoeffs,
    /// Half-width of the uniform relative noise on the true scaling time.
    pub t_noise: f64,
    /// Tick length in seconds.
    pub dt: f64,
    pub rng_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            mu0: 30_000.0,
            kappa: 2.1e-5,
            base_service_time: 0.0055,
            scaling_overhead_factor: 0.8,
            t_coeffs: ScalingTimeCoeffs { a0: 1.0, a1: 5e-5, a2: 3e-6 },
            t_noise: 0.05,
            dt: 1.0,
            rng_seed: 42,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let c = &self.t_coeffs;
        let ok = self.mu0 > 0.0
            && self.kappa >= 0.0
            && self.base_service_time > 0.0
            && self.scaling_overhead_factor > 0.0
            && self.scaling_overhead_factor <= 1.0
            && c.a0 >= 0.0
            && c.a1 >= 0.0
            && c.a2 >= 0.0
            && (0.0..1.0).contains(&self.t_noise)
            && self.dt > 0.0
            && [self.mu0, self.kappa, self.base_service_time, self.dt].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidParams(format!("{self:?}")))
        }
    }

    /// Per-message latency of a matcher partition: each of the `m` matchers
    /// holds `S/m` subscriptions.
    pub fn service_time(&self, matchers: u32, stored_subs: f64) -> f64 {
        self.base_service_time * (1.0 + self.kappa * stored_subs / f64::from(matchers))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalingKind {
    ScaleOut,
    ScaleIn,
}

impl ScalingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingKind::ScaleOut => "scale_out",
            ScalingKind::ScaleIn => "scale_in",
        }
    }
}

impl fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scaling action, from its triggering point `tp` to its reconfiguration point `rp`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingEvent {
    pub kind: ScalingKind,
    pub tp: u64,
    pub rp: u64,
    /// Measured duration `(rp - tp) * dt`.
    pub t_actual: f64,
    /// Duration drawn from the ground-truth model before tick rounding.
    pub t_raw: f64,
    pub t_predicted: f64,
    pub config_before: ServiceConfig,
    pub config_after: ServiceConfig,
    /// Workload at the triggering point (profiling uses these as regressors).
    pub notif_rate: f64,
    pub stored_subs: f64,
}

/// One tick of offered load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadPoint {
    pub t: u64,
    pub notif_rate: f64,
    pub sub_rate: f64,
    pub unsub_rate: f64,
}

impl WorkloadPoint {
    pub fn new(t: u64, notif_rate: f64, sub_rate: f64, unsub_rate: f64) -> Self {
        Self { t, notif_rate, sub_rate, unsub_rate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: u64,
    pub config: ServiceConfig,
    pub stored_subs: f64,
    pub queue: f64,
    /// Response time in seconds.
    pub rt: f64,
    pub throughput: f64,
    /// Capacity the tick was served at.
    pub capacity: f64,
    /// Arrival rate of the last tick.
    pub arrival_rate: f64,
    pub in_scaling: Option<ScalingEvent>,
    pub saturated: bool,
}

impl SystemState {
    /// Idle system at tick 0.
    pub fn initial(config: ServiceConfig, stored_subs: f64, params: &SimParams) -> Self {
        let stored_subs = stored_subs.max(0.0);
        Self {
            t: 0,
            config,
            stored_subs,
            queue: 0.0,
            rt: params.service_time(config.matcher_instances, stored_subs),
            throughput: 0.0,
            capacity: capacity(&config, stored_subs, params, false),
            arrival_rate: 0.0,
            in_scaling: None,
            saturated: false,
        }
    }

    pub fn matchers(&self) -> u32 {
        self.config.matcher_instances
    }
}

/// Notifications per second the matcher layer sustains.
pub fn capacity(config: &ServiceConfig, stored_subs: f64, params: &SimParams, scaling_active: bool) -> f64 {
    let m = f64::from(config.matcher_instances);
    let c = m * params.mu0 / (1.0 + params.kappa * stored_subs.max(0.0));
    if scaling_active {
        c * params.scaling_overhead_factor
    } else {
        c
    }
}

/// Advance the service by one tick under the offered load `wp`.
pub fn step(state: &SystemState, wp: &WorkloadPoint, params: &SimParams) -> SystemState {
    let dt = params.dt;
    let stored_subs = (state.stored_subs + (wp.sub_rate - wp.unsub_rate) * dt).max(0.0);
    let scaling_active = state.in_scaling.is_some();
    let cap = capacity(&state.config, stored_subs, params, scaling_active);

    let lambda = wp.notif_rate;
    let throughput = (lambda + state.queue / dt).min(cap);
    let queue = (state.queue + (lambda - throughput) * dt).max(0.0);
    let rt = params.service_time(state.config.matcher_instances, stored_subs) + queue / cap;

    let t = state.t + 1;
    let (config, in_scaling) = match &state.in_scaling {
        Some(ev) if ev.rp <= t => (ev.config_after, None),
        other => (state.config, other.clone()),
    };

    SystemState {
        t,
        config,
        stored_subs,
        queue,
        rt,
        throughput,
        capacity: cap,
        arrival_rate: lambda,
        in_scaling,
        saturated: lambda > cap,
    }
}

/// Ground-truth duration of a scaling action started under `wp` with `stored_subs`.
pub fn true_scaling_time<R: Rng + ?Sized>(
    wp: &WorkloadPoint,
    stored_subs: f64,
    params: &SimParams,
    rng: &mut R,
) -> f64 {
    let c = &params.t_coeffs;
    let mean = c.a0 + c.a1 * wp.notif_rate + c.a2 * stored_subs;
    // always draw, so the stream position does not depend on t_noise
    let u: f64 = rng.random_range(-1.0..=1.0);
    let t = mean * (1.0 + params.t_noise * u);
    t.max(params.dt)
}

/// Start a scaling action at the current tick. The configuration swap happens at `rp`.
pub fn begin_scaling<R: Rng + ?Sized>(
    state: &SystemState,
    kind: ScalingKind,
    predicted: f64,
    wp: &WorkloadPoint,
    params: &SimParams,
    rng: &mut R,
) -> Result<SystemState, SimError> {
    if state.in_scaling.is_some() {
        return Err(SimError::ScalingInProgress { t: state.t });
    }
    let config_after = match kind {
        ScalingKind::ScaleOut => {
            if state.config.matcher_instances >= MAX_MATCHERS {
                return Err(SimError::AtMaximum { t: state.t });
            }
            state.config.scaled_out()
        }
        ScalingKind::ScaleIn => state.config.scaled_in().ok_or(SimError::AtMinimum { t: state.t })?,
    };
    let t_raw = true_scaling_time(wp, state.stored_subs, params, rng);
    let ticks = ticks_for(t_raw, params.dt);
    let event = ScalingEvent {
        kind,
        tp: state.t,
        rp: state.t + ticks,
        t_actual: ticks as f64 * params.dt,
        t_raw,
        t_predicted: predicted,
        config_before: state.config,
        config_after,
        notif_rate: wp.notif_rate,
        stored_subs: state.stored_subs,
    };
    Ok(SystemState { in_scaling: Some(event), ..state.clone() })
}

/// Whole ticks needed to cover `seconds`, never less than one.
pub fn ticks_for(seconds: f64, dt: f64) -> u64 {
    // guard against 2.0000000000000004-style ceilings
    let ticks = (seconds / dt - 1e-9).ceil();
    (ticks.max(1.0)) as u64
}

/// Smallest power-of-two matcher count that serves `wp` at steady state
/// without queueing and within `sla_max_rt`.
pub fn minimal_sufficient_matchers(
    wp: &WorkloadPoint,
    stored_subs: f64,
    params: &SimParams,
    sla_max_rt: f64,
) -> Result<u32, SimError> {
    let mut m = 1u32;
    loop {
        let config = ServiceConfig { matcher_instances: m, ..ServiceConfig::minimal() };
        let cap = capacity(&config, stored_subs, params, false);
        if wp.notif_rate <= cap && params.service_time(m, stored_subs) <= sla_max_rt {
            return Ok(m);
        }
        if m >= MAX_MATCHERS {
            return Err(SimError::Unsatisfiable { t: wp.t });
        }
        m *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> SimParams {
        SimParams {
            mu0: 20_000.0,
            kappa: 1e-5,
            base_service_time: 0.005,
            t_noise: 0.0,
            ..SimParams::default()
        }
    }

    fn cfg(m: u32) -> ServiceConfig {
        ServiceConfig::new(1, m, 1).unwrap()
    }

    #[test]
    fn capacity_examples() {
        let p = params();
        assert_eq!(capacity(&cfg(1), 0.0, &p, false), 20_000.0);
        assert!((capacity(&cfg(1), 100_000.0, &p, false) - 10_000.0).abs() < 1e-9);
        assert!((capacity(&cfg(2), 100_000.0, &p, true) - 16_000.0).abs() < 1e-9);
    }

    #[test]
    fn config_rejects_non_power_of_two() {
        assert!(ServiceConfig::new(1, 3, 1).is_err());
        assert!(ServiceConfig::new(0, 1, 1).is_err());
        assert_eq!(cfg(2).to_string(), "1-2-1");
    }

    #[test]
    fn step_at_exact_capacity_keeps_queue_empty() {
        let p = params();
        let s0 = SystemState::initial(cfg(1), 0.0, &p);
        let s1 = step(&s0, &WorkloadPoint::new(1, 20_000.0, 0.0, 0.0), &p);
        assert_eq!(s1.queue, 0.0);
        assert!(!s1.saturated);
        assert_eq!(s1.rt, p.base_service_time);
    }

    #[test]
    fn step_under_saturation_queues_excess() {
        let p = params();
        let s0 = SystemState::initial(cfg(1), 100_000.0, &p);
        let s1 = step(&s0, &WorkloadPoint::new(1, 12_000.0, 0.0, 0.0), &p);
        assert!((s1.queue - 2000.0).abs() < 1e-6);
        assert!((s1.throughput - 10_000.0).abs() < 1e-6);
        assert!(s1.saturated);
    }

    #[test]
    fn ten_tick_overload_grows_queue_linearly() {
        let p = params();
        let mut s = SystemState::initial(cfg(1), 0.0, &p);
        let c = 20_000.0;
        let mut last_rt = s.rt;
        for k in 1..=10u64 {
            s = step(&s, &WorkloadPoint::new(k, 1.5 * c, 0.0, 0.0), &p);
            assert!((s.queue - 0.5 * c * k as f64).abs() < 1e-6, "tick {k}");
            // hand-iterated: rt_k = base + 0.5k
            assert!((s.rt - (0.005 + 0.5 * k as f64)).abs() < 1e-9);
            assert!(s.rt > last_rt);
            last_rt = s.rt;
        }
    }

    #[test]
    fn stored_subs_never_negative() {
        let p = params();
        let s0 = SystemState::initial(cfg(1), 10.0, &p);
        let s1 = step(&s0, &WorkloadPoint::new(1, 0.0, 0.0, 1000.0), &p);
        assert_eq!(s1.stored_subs, 0.0);
    }

    #[test]
    fn scaling_time_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = params();
        p.t_coeffs = ScalingTimeCoeffs { a0: 1.0, a1: 0.0, a2: 0.0 };
        let wp = WorkloadPoint::new(1, 10_000.0, 0.0, 0.0);
        assert_eq!(true_scaling_time(&wp, 0.0, &p, &mut rng), 1.0);
        p.t_coeffs = ScalingTimeCoeffs { a0: 1.0, a1: 5e-5, a2: 1e-5 };
        assert!((true_scaling_time(&wp, 100_000.0, &p, &mut rng) - 2.5).abs() < 1e-12);

        p.t_noise = 0.05;
        let a = true_scaling_time(&wp, 100_000.0, &p, &mut ChaCha8Rng::seed_from_u64(9));
        let b = true_scaling_time(&wp, 100_000.0, &p, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - 2.5).abs() <= 0.125 + 1e-12);
    }

    #[test]
    fn begin_scaling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = params();
        let wp = WorkloadPoint::new(100, 10_000.0, 0.0, 0.0);
        let s = SystemState::initial(cfg(1), 0.0, &p);
        let out = begin_scaling(&s, ScalingKind::ScaleOut, 2.0, &wp, &p, &mut rng).unwrap();
        assert_eq!(out.in_scaling.as_ref().unwrap().config_after.to_string(), "1-2-1");
        assert!(matches!(
            begin_scaling(&s, ScalingKind::ScaleIn, 2.0, &wp, &p, &mut rng),
            Err(SimError::AtMinimum { .. })
        ));
        assert!(matches!(
            begin_scaling(&out, ScalingKind::ScaleOut, 2.0, &wp, &p, &mut rng),
            Err(SimError::ScalingInProgress { .. })
        ));

        // t_actual = 2.5 s from tp = 100 lands on rp = 103
        p.t_coeffs = ScalingTimeCoeffs { a0: 1.0, a1: 5e-5, a2: 1e-5 };
        let mut s = SystemState::initial(cfg(1), 100_000.0, &p);
        s.t = 100;
        let out = begin_scaling(&s, ScalingKind::ScaleOut, 2.5, &wp, &p, &mut rng).unwrap();
        let ev = out.in_scaling.unwrap();
        assert_eq!((ev.tp, ev.rp), (100, 103));
        assert_eq!(ev.t_actual, 3.0);
        assert!((ev.t_raw - 2.5).abs() < 1e-12);
    }

    #[test]
    fn config_swaps_at_rp_and_overhead_applies_before() {
        let mut p = params();
        p.t_coeffs = ScalingTimeCoeffs { a0: 2.0, a1: 0.0, a2: 0.0 };
        let wp = WorkloadPoint::new(1, 1000.0, 0.0, 0.0);
        let s = SystemState::initial(cfg(1), 0.0, &p);
        let mut s = begin_scaling(&s, ScalingKind::ScaleOut, 2.0, &wp, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        s = step(&s, &wp, &p);
        assert_eq!(s.matchers(), 1);
        assert!((s.capacity - 16_000.0).abs() < 1e-9);
        s = step(&s, &wp, &p);
        assert_eq!(s.matchers(), 2);
        assert!(s.in_scaling.is_none());
        s = step(&s, &wp, &p);
        assert!((s.capacity - 40_000.0).abs() < 1e-9);
    }

    #[test]
    fn minimal_matchers_examples() {
        let p = params();
        let wp = WorkloadPoint::new(1, 10_000.0, 0.0, 0.0);
        assert_eq!(minimal_sufficient_matchers(&wp, 0.0, &p, 1.0).unwrap(), 1);
        // capacity(1) = 9000, capacity(2) = 18000
        let s = (20_000.0 / 9_000.0 - 1.0) / 1e-5;
        assert_eq!(minimal_sufficient_matchers(&wp, s, &p, 1.0).unwrap(), 2);
        let wp = WorkloadPoint::new(1, 1e12, 0.0, 0.0);
        assert!(matches!(minimal_sufficient_matchers(&wp, 0.0, &p, 1.0), Err(SimError::Unsatisfiable { .. })));
    }

    #[test]
    fn minimal_matchers_matches_brute_force_scan() {
        let p = params();
        let wp = WorkloadPoint::new(1, 10_000.0, 0.0, 0.0);
        for i in 0..=200 {
            let s = i as f64 * 1000.0;
            // brute force: first m in 1,2,4,.. with 20000 m / (1 + 1e-5 s) >= 10000
            let mut expect = 1u32;
            while 20_000.0 * f64::from(expect) / (1.0 + 1e-5 * s) < 10_000.0 {
                expect *= 2;
            }
            assert_eq!(minimal_sufficient_matchers(&wp, s, &p, 1.0).unwrap(), expect, "S = {s}");
        }
        // step rises exactly at S = 100k (m: 1 -> 2) and S = 300k (2 -> 4)
        assert_eq!(minimal_sufficient_matchers(&wp, 100_000.0, &p, 1.0).unwrap(), 1);
        assert_eq!(minimal_sufficient_matchers(&wp, 100_001.0, &p, 1.0).unwrap(), 2);
        assert_eq!(minimal_sufficient_matchers(&wp, 300_001.0, &p, 1.0).unwrap(), 4);
    }

    #[test]
    fn ticks_for_ceiling() {
        assert_eq!(ticks_for(2.5, 1.0), 3);
        assert_eq!(ticks_for(2.0, 1.0), 2);
        assert_eq!(ticks_for(0.4, 1.0), 1);
    }
}
