//! Sample and hold-update event sequences, the four-bound admissibility test,
//! seeded generators of admissible pairs, and the composed delay profile of a
//! double sample-and-hold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing event-time differences against bounds.
pub const TIME_TOL: f64 = 1e-12;

fn time_slack(scale: f64) -> f64 {
    TIME_TOL * scale.abs().max(1.0)
}

/// A finite prefix of an admissible event sequence on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct EventSequence {
    times: Vec<f64>,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    times: Vec<f64>,
    horizon: f64,
}

impl TryFrom<RawSequence> for EventSequence {
    type Error = Error;
    fn try_from(raw: RawSequence) -> Result<Self> {
        EventSequence::new(raw.times, raw.horizon)
    }
}

impl From<EventSequence> for RawSequence {
    fn from(s: EventSequence) -> Self {
        RawSequence { times: s.times, horizon: s.horizon }
    }
}

impl EventSequence {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidSequence("empty sequence".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidSequence(format!("first event at {} instead of 0", times[0])));
        }
        if !horizon.is_finite() {
            return Err(Error::InvalidSequence("horizon must be finite".into()));
        }
        for (k, pair) in times.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidSequence(format!(
                    "times not strictly increasing at index {}: {} then {}",
                    k + 1,
                    pair[0],
                    pair[1]
                )));
            }
        }
        let last = *times.last().unwrap();
        if !(horizon > last) {
            return Err(Error::InvalidSequence(format!(
                "horizon {horizon} does not exceed the last event {last}"
            )));
        }
        Ok(Self { times, horizon })
    }

    /// `0, h, 2h, ...` strictly below `horizon`, each time computed as `k * h`.
    pub fn periodic(h: f64, horizon: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidSequence(format!("period {h} must be positive")));
        }
        let times = (0..).map(|k| k as f64 * h).take_while(|t| *t < horizon).collect();
        Self::new(times, horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last event in `[0, t]`.
    pub fn last_at_or_before(&self, t: f64) -> Option<usize> {
        let n = self.times.partition_point(|&x| x <= t);
        n.checked_sub(1)
    }

    /// Index of the first event in `[t, +inf)`.
    pub fn first_at_or_after(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&x| x < t);
        (k < self.times.len()).then_some(k)
    }

    /// One time per line, preceded by a `# horizon` comment line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# horizon {}\n", self.horizon);
        for t in &self.times {
            out.push_str(&format!("{t}\n"));
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. `horizon` overrides the header.
    pub fn from_text(text: &str, horizon: Option<f64>) -> Result<Self> {
        let mut header = None;
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("horizon") {
                    header = Some(parse_f64(v.trim(), i + 1)?);
                }
                continue;
            }
            times.push(parse_f64(line, i + 1)?);
        }
        let horizon = horizon.or(header).ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: "no horizon given".into(),
        })?;
        Self::new(times, horizon)
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse {
        location: format!("line {line}"),
        message: format!("{s:?}: {e}"),
    })
}

/// Bounds `(tau', tau*, tau_circ, tau_natural)` on an asynchronous sample/update pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds", into = "RawBounds")]
pub struct AsyncBounds {
    /// Maximum inter-sample interval.
    pub tau_prime: f64,
    /// Maximum inter-update interval.
    pub tau_star: f64,
    /// Maximum delay from a sample to the next update.
    pub tau_circ: f64,
    /// Maximum delay from an update back to its most recent sample.
    pub tau_natural: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBounds {
    tau_prime: f64,
    tau_star: f64,
    tau_circ: f64,
    tau_natural: f64,
}

impl TryFrom<RawBounds> for AsyncBounds {
    type Error = Error;
    fn try_from(r: RawBounds) -> Result<Self> {
        AsyncBounds::new(r.tau_prime, r.tau_star, r.tau_circ, r.tau_natural)
    }
}

impl From<AsyncBounds> for RawBounds {
    fn from(b: AsyncBounds) -> Self {
        RawBounds {
            tau_prime: b.tau_prime,
            tau_star: b.tau_star,
            tau_circ: b.tau_circ,
            tau_natural: b.tau_natural,
        }
    }
}

impl AsyncBounds {
    pub fn new(tau_prime: f64, tau_star: f64, tau_circ: f64, tau_natural: f64) -> Result<Self> {
        let all = [tau_prime, tau_star, tau_circ, tau_natural];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidBounds("bounds must be finite".into()));
        }
        if !(tau_prime > 0.0 && tau_star > 0.0) {
            return Err(Error::InvalidBounds(format!(
                "tau' = {tau_prime} and tau* = {tau_star} must be positive"
            )));
        }
        if !(0.0 <= tau_circ && tau_circ <= tau_star) {
            return Err(Error::InvalidBounds(format!(
                "tau_circ = {tau_circ} must lie in [0, tau* = {tau_star}]"
            )));
        }
        if !(0.0 <= tau_natural && tau_natural <= tau_circ.min(tau_prime)) {
            return Err(Error::InvalidBounds(format!(
                "tau_natural = {tau_natural} must lie in [0, min(tau_circ, tau')]"
            )));
        }
        Ok(Self { tau_prime, tau_star, tau_circ, tau_natural })
    }

    /// Upper bound on the interval between resets of the composed delay.
    pub fn reset_interval_bound(&self) -> f64 {
        self.tau_prime + self.tau_circ
    }
}

/// Bounds for inter-sample interval `h` and update asynchrony `delta`:
/// `(h, (1 + delta) h, delta h, h min(delta, 1))`.
pub fn bounds_from_h_delta(h: f64, delta: f64) -> Result<AsyncBounds> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidBounds(format!("h = {h} must be positive")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidBounds(format!("delta = {delta} must be non-negative")));
    }
    AsyncBounds::new(h, (1.0 + delta) * h, delta * h, h * delta.min(1.0))
}

/// Which inequality of the admissibility test was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// `t'_{k+1} - t'_k <= tau'`
    SampleGap,
    /// `t*_{k+1} - t*_k <= tau*`
    UpdateGap,
    /// `phi_k - t'_k <= tau_circ`
    SampleToUpdate,
    /// `phi_k - max T' cap [0, phi_k] <= tau_natural`
    UpdateToSample,
    /// `horizon - t'_last <= tau'`: the prefix admits an admissible continuation.
    SampleTail,
    /// `horizon - t*_last <= tau*`
    UpdateTail,
}

impl Constraint {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::SampleGap => "sample-gap",
            Constraint::UpdateGap => "update-gap",
            Constraint::SampleToUpdate => "sample-to-update",
            Constraint::UpdateToSample => "update-to-sample",
            Constraint::SampleTail => "sample-tail",
            Constraint::UpdateTail => "update-tail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub index: usize,
    pub value: f64,
    pub bound: f64,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Sample indices whose next update falls beyond the horizon although
    /// `t'_k + tau_circ < horizon`.
    pub incomplete_coverage: Vec<usize>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, c: Constraint) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.constraint == c)
    }
}

/// Checks a sample/update pair against the four admissibility bounds.
pub fn validate(tp: &EventSequence, ts: &EventSequence, b: &AsyncBounds) -> Result<ValidationReport> {
    if tp.is_empty() || ts.is_empty() {
        return Err(Error::InvalidSequence("empty sequence".into()));
    }
    let slack = time_slack(tp.horizon().max(ts.horizon()));
    let mut report = ValidationReport::default();
    let mut check = |c: Constraint, index: usize, value: f64, bound: f64| {
        if value > bound + slack {
            report.violations.push(Violation { constraint: c, index, value, bound });
        }
    };

    for (k, w) in tp.times().windows(2).enumerate() {
        check(Constraint::SampleGap, k, w[1] - w[0], b.tau_prime);
    }
    for (k, w) in ts.times().windows(2).enumerate() {
        check(Constraint::UpdateGap, k, w[1] - w[0], b.tau_star);
    }
    check(
        Constraint::SampleTail,
        tp.len() - 1,
        tp.horizon() - tp.times()[tp.len() - 1],
        b.tau_prime,
    );
    check(
        Constraint::UpdateTail,
        ts.len() - 1,
        ts.horizon() - ts.times()[ts.len() - 1],
        b.tau_star,
    );

    let mut uncovered = Vec::new();
    for (k, &t) in tp.times().iter().enumerate() {
        match ts.first_at_or_after(t) {
            Some(j) => {
                let phi = ts.times()[j];
                check(Constraint::SampleToUpdate, k, phi - t, b.tau_circ);
                let latest = tp.times()[tp.last_at_or_before(phi).expect("t'_0 = 0")];
                check(Constraint::UpdateToSample, k, phi - latest, b.tau_natural);
            }
            None => {
                if t + b.tau_circ < ts.horizon() {
                    uncovered.push(k);
                }
            }
        }
    }
    report.incomplete_coverage = uncovered;
    Ok(report)
}

/// Pattern of sample/update pairs produced by [`gen_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorMode {
    /// Every sample is forwarded after a random delay shorter than the next sample gap.
    JitteredDelay,
    /// Updates are issued for a random subset of the samples.
    DownSampling,
    /// Identical periodic sequences.
    Synchronous,
}

impl std::str::FromStr for GeneratorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jittered-delay" | "jittered" => Ok(Self::JitteredDelay),
            "down-sampling" | "downsampling" => Ok(Self::DownSampling),
            "synchronous" | "sync" => Ok(Self::Synchronous),
            other => Err(Error::Parse {
                location: "mode".into(),
                message: format!("unknown generator mode {other:?}"),
            }),
        }
    }
}

/// Minimum sample gap used by the generators, as a fraction of `tau'`.
pub const MIN_GAP_FRACTION: f64 = 1.0 / 20.0;

fn draw(rng: &mut ChaCha8Rng, upper: f64) -> f64 {
    if upper > 0.0 {
        rng.gen_range(0.0..upper)
    } else {
        0.0
    }
}

fn sample_times(rng: &mut ChaCha8Rng, lo: f64, hi: f64, horizon: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    loop {
        let gap = if hi > lo { rng.gen_range(lo..=hi) } else { hi };
        let next = times.last().unwrap() + gap;
        if next >= horizon {
            break;
        }
        times.push(next);
    }
    times
}

/// Seeded generator of sample/update pairs that pass [`validate`] for `b`.
pub fn gen_admissible(
    b: &AsyncBounds,
    horizon: f64,
    mode: GeneratorMode,
    seed: u64,
) -> Result<(EventSequence, EventSequence)> {
    if !(horizon >= 10.0 * b.tau_prime) {
        return Err(Error::Precondition(format!(
            "horizon {horizon} shorter than 10 tau' = {}",
            10.0 * b.tau_prime
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_max = b.tau_prime.min(b.tau_star);
    let g_min = (b.tau_prime * MIN_GAP_FRACTION).min(g_max);

    match mode {
        GeneratorMode::Synchronous => {
            let t = EventSequence::periodic(g_max, horizon)?;
            Ok((t.clone(), t))
        }
        GeneratorMode::JitteredDelay => {
            let samples = sample_times(&mut rng, g_min, g_max, horizon);
            let n = samples.len();
            let mut updates = Vec::with_capacity(n);
            let mut prev_delay = 0.0;
            for k in 0..n {
                let next_gap = if k + 1 < n { samples[k + 1] - samples[k] } else { horizon - samples[k] };
                let delay = if k == 0 {
                    0.0
                } else {
                    let prev_gap = samples[k] - samples[k - 1];
                    let cap = b
                        .tau_natural
                        .min(next_gap)
                        .min(b.tau_star - prev_gap + prev_delay);
                    draw(&mut rng, cap)
                };
                updates.push(samples[k] + delay);
                prev_delay = delay;
            }
            Ok((EventSequence::new(samples, horizon)?, EventSequence::new(updates, horizon)?))
        }
        GeneratorMode::DownSampling => {
            if b.tau_circ <= 0.0 {
                return Err(Error::InfeasibleGenerator(
                    "down-sampling needs tau_circ > 0 to skip any sample".into(),
                ));
            }
            let hi = g_max.min(b.tau_circ);
            let lo = g_min.min(hi / 2.0);
            let samples = sample_times(&mut rng, lo, hi, horizon);
            let n = samples.len();
            let mut updates = vec![0.0];
            let mut last_update = 0.0;
            let mut deadline = f64::INFINITY;
            for k in 1..n {
                let t = samples[k];
                let can_skip = k + 1 < n && {
                    let next = samples[k + 1];
                    next <= deadline.min(t + b.tau_circ) && next - last_update <= b.tau_star
                };
                if can_skip && rng.gen_bool(0.5) {
                    deadline = deadline.min(t + b.tau_circ);
                    continue;
                }
                let next_gap = if k + 1 < n { samples[k + 1] - t } else { horizon - t };
                let cap = b
                    .tau_natural
                    .min(next_gap)
                    .min(deadline - t)
                    .min(last_update + b.tau_star - t);
                let at = t + draw(&mut rng, cap);
                updates.push(at);
                last_update = at;
                deadline = f64::INFINITY;
            }
            Ok((EventSequence::new(samples, horizon)?, EventSequence::new(updates, horizon)?))
        }
    }
}

/// One hold update together with the sample it forwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldUpdate {
    pub time: f64,
    /// Index into the sample sequence of the most recent sample at or before `time`.
    pub source_index: usize,
    pub source_time: f64,
    /// The source sample equals that of the previous update; the delay does not reset.
    pub noop: bool,
}

/// Piecewise-linear composed delay `sigma(t) = t - t'_{q(t)}` of a double sample-and-hold.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    updates: Vec<HoldUpdate>,
    sample_times: Vec<f64>,
    horizon: f64,
}

impl DelayProfile {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn updates(&self) -> &[HoldUpdate] {
        &self.updates
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    /// Updates at which the delay actually resets (the `psi_l` / `lambda_l` pairs).
    pub fn resets(&self) -> impl Iterator<Item = &HoldUpdate> + '_ {
        self.updates.iter().filter(|u| !u.noop)
    }

    fn active_update(&self, t: f64) -> &HoldUpdate {
        let n = self.updates.partition_point(|u| u.time <= t);
        &self.updates[n.saturating_sub(1)]
    }

    /// Index of the sample feeding the hold at time `t`.
    pub fn q(&self, t: f64) -> usize {
        self.active_update(t).source_index
    }

    pub fn source_time(&self, t: f64) -> f64 {
        self.active_update(t).source_time
    }

    pub fn sigma(&self, t: f64) -> f64 {
        t - self.source_time(t)
    }

    /// `max_l (psi_l - lambda_l)`.
    pub fn max_reset_value(&self) -> f64 {
        self.resets().map(|u| u.time - u.source_time).fold(0.0, f64::max)
    }

    /// `max_l (psi_{l+1} - psi_l)` over consecutive resets.
    pub fn max_reset_interval(&self) -> f64 {
        let r: Vec<f64> = self.resets().map(|u| u.time).collect();
        r.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Composed delay of `H_{T*} S_{T*} H_{T'} S_{T'}`.
///
/// A sample co-timed with an update is taken before the update reads the buffer.
pub fn delay_profile(tp: &EventSequence, ts: &EventSequence, horizon: f64) -> Result<DelayProfile> {
    if !(horizon > *tp.times().last().unwrap() && horizon > *ts.times().last().unwrap()) {
        return Err(Error::InvalidSequence(format!(
            "horizon {horizon} does not cover both sequences"
        )));
    }
    let mut updates = Vec::with_capacity(ts.len());
    let mut prev: Option<usize> = None;
    for &t in ts.times() {
        let source_index = tp.last_at_or_before(t).expect("both sequences start at 0");
        updates.push(HoldUpdate {
            time: t,
            source_index,
            source_time: tp.times()[source_index],
            noop: prev == Some(source_index),
        });
        prev = Some(source_index);
    }
    Ok(DelayProfile {
        updates,
        sample_times: tp.times().to_vec(),
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(times: &[f64], horizon: f64) -> EventSequence {
        EventSequence::new(times.to_vec(), horizon).unwrap()
    }

    /// Samples at the integers, updates at 0 and k + 0.5.
    fn half_offset_pair() -> (EventSequence, EventSequence) {
        let tp: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let mut ts = vec![0.0];
        ts.extend((1..10).map(|k| k as f64 + 0.5));
        (seq(&tp, 10.0), seq(&ts, 10.0))
    }

    #[test]
    fn sequence_invariants() {
        assert!(EventSequence::new(vec![], 1.0).is_err());
        assert!(EventSequence::new(vec![0.1], 1.0).is_err());
        assert!(EventSequence::new(vec![0.0, 0.5, 0.5], 1.0).is_err());
        assert!(EventSequence::new(vec![0.0, 0.5], 0.5).is_err());
        let s = seq(&[0.0, 0.5, 0.75], 1.0);
        assert_eq!(s.last_at_or_before(0.5), Some(1));
        assert_eq!(s.last_at_or_before(0.6), Some(1));
        assert_eq!(s.first_at_or_after(0.5), Some(1));
        assert_eq!(s.first_at_or_after(0.8), None);
    }

    #[test]
    fn bounds_from_h_delta_examples() {
        let b = bounds_from_h_delta(1.0, 1.0).unwrap();
        assert_eq!((b.tau_prime, b.tau_star, b.tau_circ, b.tau_natural), (1.0, 2.0, 1.0, 1.0));
        let b = bounds_from_h_delta(0.5, 0.0).unwrap();
        assert_eq!((b.tau_prime, b.tau_star, b.tau_circ, b.tau_natural), (0.5, 0.5, 0.0, 0.0));
        let b = bounds_from_h_delta(1.0, 2.0).unwrap();
        assert_eq!((b.tau_prime, b.tau_star, b.tau_circ, b.tau_natural), (1.0, 3.0, 2.0, 1.0));
        assert!(bounds_from_h_delta(0.0, 1.0).is_err());
        assert!(bounds_from_h_delta(-1.0, 1.0).is_err());
    }

    #[test]
    fn bounds_invariants_are_enforced() {
        assert!(AsyncBounds::new(1.0, 1.0, 1.5, 0.0).is_err());
        assert!(AsyncBounds::new(1.0, 2.0, 0.5, 0.6).is_err());
        assert!(AsyncBounds::new(0.0, 2.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn synchronous_pair_validates() {
        let t = EventSequence::periodic(0.5, 10.0).unwrap();
        let b = AsyncBounds::new(0.5, 0.5, 0.0, 0.0).unwrap();
        let r = validate(&t, &t, &b).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn half_offset_pair_validates() {
        let (tp, ts) = half_offset_pair();
        let ok = AsyncBounds::new(1.0, 1.5, 0.5, 0.5).unwrap();
        assert!(validate(&tp, &ts, &ok).unwrap().passed());

        let tight = AsyncBounds::new(1.0, 1.5, 0.4, 0.4).unwrap();
        let r = validate(&tp, &ts, &tight).unwrap();
        assert!(!r.passed());
        let circ: Vec<usize> = r.violations_of(Constraint::SampleToUpdate).map(|v| v.index).collect();
        assert_eq!(circ, (1..10).collect::<Vec<_>>());
        for v in r.violations_of(Constraint::SampleToUpdate) {
            assert!((v.value - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn uncovered_samples_are_warnings() {
        let tp = seq(&[0.0, 1.0, 2.0], 3.0);
        let ts = seq(&[0.0, 1.0], 3.0);
        let b = AsyncBounds::new(1.0, 2.0, 0.5, 0.5).unwrap();
        let r = validate(&tp, &ts, &b).unwrap();
        assert_eq!(r.incomplete_coverage, vec![2]);
        assert!(r.passed());
    }

    #[test]
    fn generators_produce_valid_pairs() {
        let b = AsyncBounds::new(1.0, 2.0, 1.0, 1.0).unwrap();
        let (tp, ts) = gen_admissible(&b, 10.0, GeneratorMode::JitteredDelay, 0).unwrap();
        assert!(validate(&tp, &ts, &b).unwrap().passed());

        let sync = AsyncBounds::new(0.25, 0.25, 0.0, 0.0).unwrap();
        let (tp, ts) = gen_admissible(&sync, 5.0, GeneratorMode::Synchronous, 3).unwrap();
        assert_eq!(tp, ts);
        assert!(tp.times().windows(2).all(|w| (w[1] - w[0] - 0.25).abs() < 1e-12));
    }

    #[test]
    fn down_sampling_is_co_timed_when_tau_natural_is_zero() {
        let b = AsyncBounds::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let (tp, ts) = gen_admissible(&b, 20.0, GeneratorMode::DownSampling, 11).unwrap();
        assert!(validate(&tp, &ts, &b).unwrap().passed());
        assert!(ts.len() < tp.len());
        for t in ts.times() {
            assert!(tp.times().contains(t));
        }
        let no_slack = AsyncBounds::new(1.0, 2.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            gen_admissible(&no_slack, 20.0, GeneratorMode::DownSampling, 0),
            Err(Error::InfeasibleGenerator(_))
        ));
    }

    #[test]
    fn generators_are_deterministic() {
        let b = AsyncBounds::new(1.0, 3.0, 2.0, 0.5).unwrap();
        for mode in [GeneratorMode::JitteredDelay, GeneratorMode::DownSampling] {
            let a = gen_admissible(&b, 30.0, mode, 42).unwrap();
            let c = gen_admissible(&b, 30.0, mode, 42).unwrap();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn short_horizon_is_rejected() {
        let b = AsyncBounds::new(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(gen_admissible(&b, 5.0, GeneratorMode::Synchronous, 0).is_err());
    }

    #[test]
    fn half_offset_profile() {
        let (tp, ts) = half_offset_pair();
        let p = delay_profile(&tp, &ts, 10.0).unwrap();
        assert_eq!(p.sigma(2.0), 1.0);
        assert_eq!(p.q(2.0), 1);
        assert_eq!(p.sigma(1.4), 1.4);
        assert_eq!(p.q(1.4), 0);
        assert_eq!(p.max_reset_value(), 0.5);
        assert!(p.max_reset_interval() <= 1.5);
    }

    #[test]
    fn synchronous_profile_is_a_saw_tooth() {
        let t = EventSequence::periodic(0.5, 5.0).unwrap();
        let p = delay_profile(&t, &t, 5.0).unwrap();
        for (k, &tk) in t.times().iter().enumerate() {
            assert_eq!(p.sigma(tk), 0.0);
            assert_eq!(p.q(tk + 0.25), k);
            assert!((p.sigma(tk + 0.25) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_source_is_a_noop() {
        let tp = seq(&[0.0, 1.0], 3.0);
        let ts = seq(&[0.0, 1.2, 1.7], 3.0);
        let p = delay_profile(&tp, &ts, 3.0).unwrap();
        let flags: Vec<bool> = p.updates().iter().map(|u| u.noop).collect();
        assert_eq!(flags, vec![false, false, true]);
        assert!((p.sigma(1.69) - 0.69).abs() < 1e-15);
        assert!((p.sigma(1.71) - 0.71).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let b = AsyncBounds::new(0.3, 0.7, 0.4, 0.2).unwrap();
        let (tp, _) = gen_admissible(&b, 6.0, GeneratorMode::JitteredDelay, 5).unwrap();
        let back = EventSequence::from_text(&tp.to_text(), None).unwrap();
        assert_eq!(back, tp);
        let json = serde_json::to_string(&tp).unwrap();
        assert_eq!(serde_json::from_str::<EventSequence>(&json).unwrap(), tp);
    }
}
