//! Synthetic subscription workloads for the test scenarios and the
//! profiling phase. Notification rate is constant within a scenario.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::WorkloadError;
use crate::seed::{stream_rng, STREAM_WORKLOAD};
use crate::sim::WorkloadPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkloadKind {
    StationaryPeak,
    NonstationaryPeak,
    SteadyIncrease,
    IsolatedSpike,
    SpikeTrain,
    ProfilingMix,
}

impl WorkloadKind {
    /// The five test scenarios, in presentation order.
    pub const SCENARIOS: [WorkloadKind; 5] = [
        WorkloadKind::StationaryPeak,
        WorkloadKind::NonstationaryPeak,
        WorkloadKind::SteadyIncrease,
        WorkloadKind::IsolatedSpike,
        WorkloadKind::SpikeTrain,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WorkloadKind::StationaryPeak => "stationary_peak",
            WorkloadKind::NonstationaryPeak => "nonstationary_peak",
            WorkloadKind::SteadyIncrease => "steady_increase",
            WorkloadKind::IsolatedSpike => "isolated_spike",
            WorkloadKind::SpikeTrain => "spike_train",
            WorkloadKind::ProfilingMix => "profiling_mix",
        }
    }

    pub fn is_seasonal(&self) -> bool {
        matches!(self, WorkloadKind::StationaryPeak)
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadKind {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::SCENARIOS.as_slice(), &[WorkloadKind::ProfilingMix]]
            .concat()
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkloadError::InvalidSpec(format!("unknown workload kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub duration: u64,
    pub seed: u64,
    pub base_sub_rate: f64,
    pub peak_sub_rate: f64,
    /// Seasonal period (stationary peak) or peak footprint (nonstationary peak), ticks.
    pub period: u64,
    /// Subscription growth per second for the steady increase.
    pub ramp: f64,
    /// Stored-subscription level at which the steady increase stops.
    pub sub_cap: f64,
    pub spike_width: u64,
    pub spike_count: u32,
    pub notif_rate: f64,
    /// Width ratio of the unsubscription wave to the subscription wave. The
    /// wave removes exactly what the peak added, at proportionally lower rate.
    pub unsub_stretch: f64,
}

impl WorkloadSpec {
    /// Scenario defaults; 600 ticks each, 2400 for the profiling mix.
    pub fn default_for(kind: WorkloadKind) -> Self {
        let base = Self {
            kind,
            duration: 600,
            seed: 0,
            base_sub_rate: 1_000.0,
            peak_sub_rate: 11_400.0,
            period: 200,
            ramp: 500.0,
            sub_cap: 100_000.0,
            spike_width: 1,
            spike_count: 1,
            notif_rate: 10_000.0,
            unsub_stretch: 4.0,
        };
        match kind {
            WorkloadKind::StationaryPeak | WorkloadKind::NonstationaryPeak => base,
            WorkloadKind::SteadyIncrease => Self { base_sub_rate: 0.0, ..base },
            WorkloadKind::IsolatedSpike => Self { base_sub_rate: 30_000.0, peak_sub_rate: 120_000.0, ..base },
            WorkloadKind::SpikeTrain => Self {
                base_sub_rate: 30_000.0,
                peak_sub_rate: 45_000.0,
                spike_width: 2,
                spike_count: 4,
                ..base
            },
            WorkloadKind::ProfilingMix => Self { duration: 2400, ..base },
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Ticks of the subscription pulse of a peak.
    fn pulse_width(&self) -> u64 {
        (self.period / 8).max(2)
    }

    fn unsub_width(&self) -> u64 {
        ((self.pulse_width() as f64 * self.unsub_stretch).round() as u64).max(1)
    }

    /// Ticks covered by one full peak, from pulse start to the end of the unsubscription wave.
    fn peak_footprint(&self) -> u64 {
        2 * self.pulse_width() + self.unsub_width()
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidSpec(msg));
        if self.duration == 0 {
            return bad("duration must be positive".into());
        }
        let rates = [self.base_sub_rate, self.peak_sub_rate, self.ramp, self.sub_cap, self.notif_rate];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("rates must be finite and non-negative".into());
        }
        if self.peak_sub_rate < self.base_sub_rate {
            return bad(format!("peak {} below base {}", self.peak_sub_rate, self.base_sub_rate));
        }
        if !(self.unsub_stretch.is_finite() && self.unsub_stretch > 0.0) {
            return bad(format!("unsub_stretch must be positive, got {}", self.unsub_stretch));
        }
        match self.kind {
            WorkloadKind::StationaryPeak => {
                if self.period < 16 || self.period > self.duration / 2 {
                    return bad(format!("period {} must lie in [16, duration/2]", self.period));
                }
                if self.pulse_width() + self.peak_footprint() > self.period {
                    return bad(format!("unsub_stretch {} does not fit the period", self.unsub_stretch));
                }
            }
            WorkloadKind::NonstationaryPeak => {
                if self.period < 16 || self.peak_footprint() + self.pulse_width() > self.duration {
                    return bad("peak does not fit the duration".into());
                }
            }
            WorkloadKind::SpikeTrain | WorkloadKind::IsolatedSpike => {
                let count = if self.kind == WorkloadKind::IsolatedSpike { 1 } else { u64::from(self.spike_count) };
                if self.spike_width == 0 || count == 0 || 2 * count * self.spike_width + 2 > self.duration {
                    return bad("spikes do not fit the duration".into());
                }
            }
            WorkloadKind::SteadyIncrease => {}
            WorkloadKind::ProfilingMix => {
                if self.duration < 5 * 200 {
                    return bad("profiling mix needs at least 1000 ticks".into());
                }
            }
        }
        Ok(())
    }
}

/// Raised-cosine pulse of `width` ticks whose values sum to `width / 2`.
fn raised_cosine(i: u64, width: u64) -> f64 {
    0.5 * (1.0 - (2.0 * PI * i as f64 / width as f64).cos())
}

/// Adds one peak starting at tick index `start` (0-based) into the rate vectors.
fn add_peak(spec: &WorkloadSpec, start: u64, sub: &mut [f64], unsub: &mut [f64]) {
    let w = spec.pulse_width();
    let wu = spec.unsub_width();
    let amp = spec.peak_sub_rate - spec.base_sub_rate;
    let amp_u = amp * w as f64 / wu as f64;
    for i in 0..w {
        if let Some(v) = sub.get_mut((start + i) as usize) {
            *v += amp * raised_cosine(i, w);
        }
    }
    let ustart = start + 2 * w;
    for i in 0..wu {
        if let Some(v) = unsub.get_mut((ustart + i) as usize) {
            *v += amp_u * raised_cosine(i, wu);
        }
    }
}

fn points(notif: f64, sub: Vec<f64>, unsub: Vec<f64>) -> Vec<WorkloadPoint> {
    sub.into_iter()
        .zip(unsub)
        .enumerate()
        .map(|(i, (s, u))| WorkloadPoint::new(i as u64 + 1, notif, s.max(0.0), u.max(0.0)))
        .collect()
}

/// Generate the series for ticks `1..=duration`.
pub fn generate(spec: &WorkloadSpec) -> Result<Vec<WorkloadPoint>, WorkloadError> {
    spec.validate()?;
    let n = spec.duration as usize;
    let base = spec.base_sub_rate;
    let mut sub = vec![base; n];
    let mut unsub = vec![base; n];
    match spec.kind {
        WorkloadKind::StationaryPeak => {
            let offset = spec.pulse_width();
            let mut start = offset;
            while start < spec.duration {
                add_peak(spec, start, &mut sub, &mut unsub);
                start += spec.period;
            }
        }
        WorkloadKind::NonstationaryPeak => {
            let mut rng = stream_rng(spec.seed, STREAM_WORKLOAD);
            let lo = spec.pulse_width();
            let hi = spec.duration - spec.peak_footprint();
            let start = rng.random_range(lo..=hi);
            add_peak(spec, start, &mut sub, &mut unsub);
        }
        WorkloadKind::SteadyIncrease => {
            let mut stored = 0.0;
            for (s, u) in sub.iter_mut().zip(unsub.iter_mut()) {
                *u = 0.0;
                *s = if stored < spec.sub_cap { spec.ramp } else { 0.0 };
                stored += *s;
            }
        }
        WorkloadKind::IsolatedSpike => {
            // the spike's subscribers leave again the next instant
            let at = n / 2;
            sub[at] = spec.peak_sub_rate;
            unsub[at + 1] += spec.peak_sub_rate - base;
        }
        WorkloadKind::SpikeTrain => {
            let w = spec.spike_width as usize;
            let start = n / 3;
            for k in 0..spec.spike_count as usize {
                let s0 = start + 2 * k * w;
                for v in &mut sub[s0..(s0 + w).min(n)] {
                    *v = spec.peak_sub_rate;
                }
            }
        }
        WorkloadKind::ProfilingMix => return Ok(profiling_mix(spec)),
    }
    Ok(points(spec.notif_rate, sub, unsub))
}

/// Segments of every scenario at varied notification and subscription
/// intensity, each drained of its leftover subscriptions before the next.
fn profiling_mix(spec: &WorkloadSpec) -> Vec<WorkloadPoint> {
    const SCALES: [(WorkloadKind, f64, f64); 5] = [
        (WorkloadKind::StationaryPeak, 0.8, 1.0),
        (WorkloadKind::SteadyIncrease, 1.1, 1.6),
        (WorkloadKind::NonstationaryPeak, 1.2, 0.7),
        (WorkloadKind::SpikeTrain, 0.9, 1.0),
        (WorkloadKind::StationaryPeak, 1.0, 1.4),
    ];
    let seg = spec.duration / SCALES.len() as u64;
    let mut out = Vec::with_capacity(spec.duration as usize);
    for (i, &(kind, n_scale, s_scale)) in SCALES.iter().enumerate() {
        let len = if i + 1 == SCALES.len() { spec.duration - seg * i as u64 } else { seg };
        let d = WorkloadSpec::default_for(kind);
        let part = WorkloadSpec {
            duration: len,
            seed: crate::seed::sub_seed(spec.seed, i as u64),
            notif_rate: spec.notif_rate * n_scale,
            base_sub_rate: d.base_sub_rate * s_scale,
            peak_sub_rate: d.peak_sub_rate * s_scale,
            ramp: d.ramp * s_scale * 2.0,
            sub_cap: d.sub_cap * s_scale,
            period: (len / 3).min(d.period),
            ..d
        };
        let mut seg_points = generate(&part).expect("profiling segments are valid by construction");
        drain_tail(&mut seg_points, (len / 6).max(1));
        for p in seg_points {
            out.push(WorkloadPoint { t: out.len() as u64 + 1, ..p });
        }
    }
    out
}

/// Spread an unsubscription of the segment's net subscriptions over its last `ticks` points.
fn drain_tail(points: &mut [WorkloadPoint], ticks: u64) {
    let net: f64 = points.iter().map(|p| p.sub_rate - p.unsub_rate).sum();
    if net <= 0.0 {
        return;
    }
    let n = points.len();
    let k = (ticks as usize).min(n);
    for p in &mut points[n - k..] {
        p.unsub_rate += net / k as f64;
    }
}

pub fn write_csv<W: Write>(w: W, points: &[WorkloadPoint]) -> Result<(), WorkloadError> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let err = |e: csv::Error| WorkloadError::Csv(e.to_string());
    wr.write_record(["t", "notif_rate", "sub_rate", "unsub_rate"]).map_err(err)?;
    for p in points {
        wr.write_record(&[p.t.to_string(), p.notif_rate.to_string(), p.sub_rate.to_string(), p.unsub_rate.to_string()])
            .map_err(err)?;
    }
    wr.flush().map_err(|e| WorkloadError::Csv(e.to_string()))
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<WorkloadPoint>, WorkloadError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(|e| WorkloadError::Csv(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "notif_rate", "sub_rate", "unsub_rate"] {
        return Err(WorkloadError::Csv(format!("unexpected header {headers:?}")));
    }
    let mut out: Vec<WorkloadPoint> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| WorkloadError::Csv(e.to_string()))?;
        let field = |i: usize| -> Result<f64, WorkloadError> {
            rec[i].trim().parse().map_err(|_| WorkloadError::Csv(format!("row {}: bad value {:?}", line + 2, &rec[i])))
        };
        let t: u64 = rec[0].trim().parse().map_err(|_| WorkloadError::Csv(format!("row {}: bad tick", line + 2)))?;
        let p = WorkloadPoint::new(t, field(1)?, field(2)?, field(3)?);
        if [p.notif_rate, p.sub_rate, p.unsub_rate].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(WorkloadError::Csv(format!("row {}: rates must be non-negative", line + 2)));
        }
        if out.last().is_some_and(|q| q.t + 1 != t) || (out.is_empty() && t != 1) {
            return Err(WorkloadError::Csv(format!("row {}: ticks must run 1, 2, 3, ...", line + 2)));
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_spike_defaults() {
        let pts = generate(&WorkloadSpec::default_for(WorkloadKind::IsolatedSpike)).unwrap();
        assert_eq!(pts.iter().filter(|p| p.sub_rate == 120_000.0).count(), 1);
        assert!(pts.iter().all(|p| p.sub_rate == 120_000.0 || p.sub_rate == 30_000.0));
    }

    #[test]
    fn stationary_peak_repeats() {
        let spec = WorkloadSpec { duration: 400, ..WorkloadSpec::default_for(WorkloadKind::StationaryPeak) };
        let pts = generate(&spec).unwrap();
        for t in 0..200 {
            assert_eq!(pts[t].sub_rate, pts[t + 200].sub_rate);
            assert_eq!(pts[t].unsub_rate, pts[t + 200].unsub_rate);
        }
        // each period removes what it added
        let net: f64 = pts[..200].iter().map(|p| p.sub_rate - p.unsub_rate).sum();
        assert!(net.abs() < 1e-6);
    }

    #[test]
    fn steady_increase_caps_subscriptions() {
        let spec = WorkloadSpec::default_for(WorkloadKind::SteadyIncrease);
        let pts = generate(&spec).unwrap();
        let total: f64 = pts.iter().map(|p| p.sub_rate).sum();
        assert!(total <= spec.sub_cap + spec.ramp);
        assert!(total >= spec.sub_cap);
    }

    #[test]
    fn nonstationary_phase_depends_on_seed() {
        let spec = WorkloadSpec::default_for(WorkloadKind::NonstationaryPeak);
        let a = generate(&spec.with_seed(1)).unwrap();
        let b = generate(&spec.with_seed(2)).unwrap();
        assert_eq!(a, generate(&spec.with_seed(1)).unwrap());
        assert_ne!(a, b);
    }

    #[test]
    fn invalid_specs() {
        let s = WorkloadSpec { duration: 0, ..WorkloadSpec::default_for(WorkloadKind::SpikeTrain) };
        assert!(generate(&s).is_err());
        let s = WorkloadSpec { period: 400, ..WorkloadSpec::default_for(WorkloadKind::StationaryPeak) };
        assert!(generate(&s).is_err());
        let s = WorkloadSpec { peak_sub_rate: 10.0, ..WorkloadSpec::default_for(WorkloadKind::StationaryPeak) };
        assert!(generate(&s).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pts = generate(&WorkloadSpec::default_for(WorkloadKind::ProfilingMix)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &pts).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), pts);
    }
}
