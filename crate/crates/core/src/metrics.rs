//! Synthetic resource monitor.
//!
//! Produces dstat-style samples of one matcher node from the simulator's
//! ground truth and turns a sampling period worth of them into a single
//! cleaned, period-averaged observation.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::MetricsError;
use crate::sim::{SimParams, SystemState, WorkloadPoint};

pub const N_CHANNELS: usize = 14;

/// Channel names in sample field order (also the CSV column order).
pub const CHANNEL_NAMES: [&str; N_CHANNELS] = [
    "cpu_user",
    "cpu_system",
    "cpu_idle",
    "cpu_wait",
    "ctx_switches",
    "intr",
    "mem_used",
    "mem_free",
    "mem_cache",
    "mem_buffers",
    "disk_read",
    "disk_write",
    "net_recv",
    "net_send",
];

/// One raw low-level sample. Percentages in [0, 100], everything else >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSample {
    pub t: u64,
    pub cpu_user: f64,
    pub cpu_system: f64,
    pub cpu_idle: f64,
    pub cpu_wait: f64,
    pub ctx_switches: f64,
    pub intr: f64,
    pub mem_used: f64,
    pub mem_free: f64,
    pub mem_cache: f64,
    pub mem_buffers: f64,
    pub disk_read: f64,
    pub disk_write: f64,
    pub net_recv: f64,
    pub net_send: f64,
}

impl MetricSample {
    pub fn channels(&self) -> [f64; N_CHANNELS] {
        [
            self.cpu_user,
            self.cpu_system,
            self.cpu_idle,
            self.cpu_wait,
            self.ctx_switches,
            self.intr,
            self.mem_used,
            self.mem_free,
            self.mem_cache,
            self.mem_buffers,
            self.disk_read,
            self.disk_write,
            self.net_recv,
            self.net_send,
        ]
    }

    pub fn from_channels(t: u64, c: [f64; N_CHANNELS]) -> Self {
        Self {
            t,
            cpu_user: c[0],
            cpu_system: c[1],
            cpu_idle: c[2],
            cpu_wait: c[3],
            ctx_switches: c[4],
            intr: c[5],
            mem_used: c[6],
            mem_free: c[7],
            mem_cache: c[8],
            mem_buffers: c[9],
            disk_read: c[10],
            disk_write: c[11],
            net_recv: c[12],
            net_send: c[13],
        }
    }
}

/// Period-averaged sample with compound metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CleanSample {
    pub sample: MetricSample,
    pub mem_used_pct: f64,
    pub outlier_flag: bool,
}

impl CleanSample {
    pub fn from_sample(sample: MetricSample) -> Self {
        Self { mem_used_pct: mem_used_pct(&sample), sample, outlier_flag: false }
    }

    /// Value of a named predictor (a raw channel or `mem_used_pct`).
    pub fn get(&self, name: &str) -> Option<f64> {
        if name == "mem_used_pct" {
            return Some(self.mem_used_pct);
        }
        CHANNEL_NAMES.iter().position(|c| *c == name).map(|i| self.sample.channels()[i])
    }
}

fn mem_used_pct(s: &MetricSample) -> f64 {
    let total = s.mem_used + s.mem_free + s.mem_cache + s.mem_buffers;
    if total > 0.0 {
        100.0 * s.mem_used / total
    } else {
        0.0
    }
}

/// Noise settings and the affine maps from service state to each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsParams {
    /// Relative Gaussian noise on every channel.
    pub noise_sigma: f64,
    /// Per-channel probability of an outlier spike.
    pub outlier_prob: f64,
    pub outlier_factor: f64,
    /// Raw samples averaged into one observation per tick.
    pub samples_per_period: usize,
    pub outlier_k: f64,
    pub mem_total: f64,
    pub mem_os: f64,
    pub bytes_per_sub: f64,
    pub bytes_per_queued_msg: f64,
    pub mem_cache: f64,
    pub buffer_base: f64,
    pub buffer_per_queued_msg: f64,
    pub ctx_base: f64,
    pub ctx_per_msg: f64,
    pub intr_base: f64,
    pub intr_per_msg: f64,
    pub bytes_per_notif: f64,
    pub bytes_per_sub_msg: f64,
    pub disk_read: f64,
    pub disk_write: f64,
}

impl Default for MetricsParams {
    fn default() -> Self {
        const MIB: f64 = 1024.0 * 1024.0;
        Self {
            noise_sigma: 0.03,
            outlier_prob: 0.005,
            outlier_factor: 5.0,
            samples_per_period: 10,
            outlier_k: 3.0,
            mem_total: 8192.0 * MIB,
            mem_os: 256.0 * MIB,
            bytes_per_sub: 4096.0,
            bytes_per_queued_msg: 1024.0,
            mem_cache: 512.0 * MIB,
            buffer_base: 0.25 * MIB,
            buffer_per_queued_msg: 2048.0,
            ctx_base: 1500.0,
            ctx_per_msg: 0.6,
            intr_base: 800.0,
            intr_per_msg: 0.25,
            bytes_per_notif: 512.0,
            bytes_per_sub_msg: 256.0,
            disk_read: 200_000.0,
            disk_write: 1_000_000.0,
        }
    }
}

impl MetricsParams {
    pub fn noiseless() -> Self {
        Self { noise_sigma: 0.0, outlier_prob: 0.0, ..Self::default() }
    }
}

/// Noise-free channel values for a node of the service in `state` under `wp`.
pub fn expected_channels(state: &SystemState, wp: &WorkloadPoint, mp: &MetricsParams) -> [f64; N_CHANNELS] {
    let m = f64::from(state.matchers());
    let lambda = wp.notif_rate;
    let util = if state.capacity > 0.0 { lambda / state.capacity } else { 0.0 };
    let cpu_user = (100.0 * util).clamp(0.0, 100.0);
    let headroom = 100.0 - cpu_user;
    let busy = util.min(1.0);
    let cpu_system = 0.1 * headroom * busy;
    let cpu_wait = 0.05 * headroom * busy;
    let cpu_idle = 100.0 - cpu_user - cpu_system - cpu_wait;

    let msgs = lambda + state.throughput;
    let mem_used = mp.mem_os + mp.bytes_per_sub * state.stored_subs / m + mp.bytes_per_queued_msg * state.queue;
    let mem_buffers = mp.buffer_base + mp.buffer_per_queued_msg * state.queue;
    let mem_free = (mp.mem_total - mem_used - mp.mem_cache - mem_buffers).max(0.0);
    [
        cpu_user,
        cpu_system,
        cpu_idle,
        cpu_wait,
        if msgs > 0.0 { mp.ctx_base + mp.ctx_per_msg * msgs } else { 0.0 },
        if lambda > 0.0 { mp.intr_base + mp.intr_per_msg * lambda } else { 0.0 },
        mem_used,
        mem_free,
        mp.mem_cache,
        mem_buffers,
        mp.disk_read,
        mp.disk_write,
        mp.bytes_per_notif * lambda + mp.bytes_per_sub_msg * (wp.sub_rate + wp.unsub_rate) / m,
        mp.bytes_per_notif * state.throughput,
    ]
}

/// One raw sample: expected values with relative Gaussian noise and rare spikes.
pub fn emit_metrics<R: Rng + ?Sized>(
    state: &SystemState,
    wp: &WorkloadPoint,
    _params: &SimParams,
    mp: &MetricsParams,
    rng: &mut R,
) -> MetricSample {
    let mut c = expected_channels(state, wp, mp);
    for (i, v) in c.iter_mut().enumerate() {
        if i == 2 {
            continue; // idle is the complement of the other cpu channels
        }
        let z: f64 = StandardNormal.sample(rng);
        let spike = rng.random::<f64>() < mp.outlier_prob;
        *v = (*v * (1.0 + mp.noise_sigma * z)).max(0.0);
        if spike {
            *v *= mp.outlier_factor;
        }
    }
    // keep the cpu split a valid partition of 100%
    for i in [0usize, 1, 3] {
        c[i] = c[i].min(100.0);
    }
    let busy = c[0] + c[1] + c[3];
    if busy > 100.0 {
        for i in [0usize, 1, 3] {
            c[i] *= 100.0 / busy;
        }
    }
    c[2] = (100.0 - c[0] - c[1] - c[3]).max(0.0);
    MetricSample::from_channels(state.t, c)
}

/// All samples of one monitoring period.
pub fn emit_period<R: Rng + ?Sized>(
    state: &SystemState,
    wp: &WorkloadPoint,
    params: &SimParams,
    mp: &MetricsParams,
    rng: &mut R,
) -> Vec<MetricSample> {
    (0..mp.samples_per_period.max(1)).map(|_| emit_metrics(state, wp, params, mp, rng)).collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Result of cleaning one channel over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSummary {
    pub value: f64,
    pub rejected: usize,
    pub fallback: bool,
}

/// Median/MAD outlier rejection then averaging of one channel.
pub fn clean_channel(values: &[f64], outlier_k: f64) -> ChannelSummary {
    let s = sorted(values.iter().copied());
    let med = median(&s);
    let mad = median(&sorted(values.iter().map(|x| (x - med).abs())));
    let tol = if mad > 0.0 { outlier_k * mad } else { 1e-9 };
    let kept: Vec<f64> = values.iter().copied().filter(|x| (x - med).abs() <= tol).collect();
    if kept.is_empty() {
        ChannelSummary { value: med, rejected: values.len(), fallback: true }
    } else {
        ChannelSummary {
            value: kept.iter().sum::<f64>() / kept.len() as f64,
            rejected: values.len() - kept.len(),
            fallback: false,
        }
    }
}

/// Clean one sampling period into a single observation.
///
/// Per channel, values farther than `outlier_k * MAD` from the median are
/// dropped and the rest averaged. The observation is flagged when some channel
/// lost more than a quarter of its samples (or had to fall back to the median),
/// i.e. when the average rests on too few points to be trusted.
pub fn preprocess(window: &[MetricSample], outlier_k: f64) -> Result<CleanSample, MetricsError> {
    if window.is_empty() {
        return Err(MetricsError::EmptyWindow);
    }
    if !(outlier_k > 0.0) {
        return Err(MetricsError::BadOutlierK(outlier_k));
    }
    let n = window.len();
    let rows: Vec<[f64; N_CHANNELS]> = window.iter().map(MetricSample::channels).collect();
    let mut out = [0.0; N_CHANNELS];
    let mut flag = false;
    for (ch, slot) in out.iter_mut().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[ch]).collect();
        let summary = clean_channel(&column, outlier_k);
        flag |= summary.fallback || summary.rejected * 4 > n;
        *slot = summary.value;
    }
    let sample = MetricSample::from_channels(window[n - 1].t, out);
    Ok(CleanSample { mem_used_pct: mem_used_pct(&sample), sample, outlier_flag: flag })
}

pub fn write_csv_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "t,{}", CHANNEL_NAMES.join(","))
}

pub fn write_csv_row<W: Write>(w: &mut W, s: &MetricSample) -> io::Result<()> {
    write!(w, "{}", s.t)?;
    for v in s.channels() {
        write!(w, ",{v}")?;
    }
    writeln!(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ServiceConfig, SimParams, SystemState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn idle_state() -> (SystemState, SimParams) {
        let p = SimParams::default();
        (SystemState::initial(ServiceConfig::minimal(), 0.0, &p), p)
    }

    #[test]
    fn idle_system_is_idle() {
        let (s, p) = idle_state();
        let wp = WorkloadPoint::new(1, 0.0, 0.0, 0.0);
        let m = emit_metrics(&s, &wp, &p, &MetricsParams::noiseless(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(m.cpu_user, 0.0);
        assert_eq!(m.cpu_idle, 100.0);
        assert_eq!(m.net_recv, 0.0);
    }

    #[test]
    fn half_utilization_maps_to_half_cpu() {
        let (s, p) = idle_state();
        let wp = WorkloadPoint::new(1, s.capacity / 2.0, 0.0, 0.0);
        let m = emit_metrics(&s, &wp, &p, &MetricsParams::noiseless(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!((m.cpu_user - 50.0).abs() < 1e-12);
        let sum = m.cpu_user + m.cpu_system + m.cpu_idle + m.cpu_wait;
        assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn emission_is_seed_deterministic() {
        let (s, p) = idle_state();
        let wp = WorkloadPoint::new(1, 8000.0, 100.0, 50.0);
        let mp = MetricsParams::default();
        let a = emit_metrics(&s, &wp, &p, &mp, &mut ChaCha8Rng::seed_from_u64(3));
        let b = emit_metrics(&s, &wp, &p, &mp, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_emission_ignores_rng() {
        let (s, p) = idle_state();
        let wp = WorkloadPoint::new(1, 8000.0, 100.0, 50.0);
        let mp = MetricsParams::noiseless();
        let a = emit_metrics(&s, &wp, &p, &mp, &mut ChaCha8Rng::seed_from_u64(3));
        let b = emit_metrics(&s, &wp, &p, &mp, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn preprocess_identical_window() {
        let (s, p) = idle_state();
        let wp = WorkloadPoint::new(1, 8000.0, 0.0, 0.0);
        let m = emit_metrics(&s, &wp, &p, &MetricsParams::noiseless(), &mut ChaCha8Rng::seed_from_u64(0));
        let c = preprocess(&[m; 6], 3.0).unwrap();
        for (x, y) in c.sample.channels().iter().zip(m.channels()) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
        assert!(!c.outlier_flag);
    }

    #[test]
    fn preprocess_drops_spike_with_zero_mad() {
        let mut window = Vec::new();
        for x in [10.0, 10.0, 10.0, 10.0, 1000.0] {
            window.push(MetricSample { cpu_user: x, ..Default::default() });
        }
        let summary = clean_channel(&[10.0, 10.0, 10.0, 10.0, 1000.0], 3.0);
        assert_eq!(summary.value, 10.0);
        assert_eq!(summary.rejected, 1);
        let c = preprocess(&window, 3.0).unwrap();
        assert_eq!(c.sample.cpu_user, 10.0);
    }

    #[test]
    fn mem_used_pct_arithmetic() {
        const GB: f64 = 1e9;
        let s = MetricSample { mem_used: GB, mem_free: 3.0 * GB, ..Default::default() };
        let c = preprocess(&[s], 3.0).unwrap();
        assert!((c.mem_used_pct - 25.0).abs() < 1e-12);
    }

    #[test]
    fn preprocess_errors() {
        assert_eq!(preprocess(&[], 3.0), Err(MetricsError::EmptyWindow));
        assert!(preprocess(&[MetricSample::default()], 0.0).is_err());
    }

    #[test]
    fn all_outlier_channel_falls_back_to_median() {
        // k < 1 can reject every value of a spread-out channel
        let s = clean_channel(&[1.0, 2.0, 4.0, 8.0], 0.1);
        assert!(s.fallback);
        assert_eq!(s.value, 3.0);
    }
}
