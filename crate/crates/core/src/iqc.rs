//! The static multiplier family `Pi(X, Y)` and empirical validators for the
//! gain and input-feedforward-passivity bounds of the perturbation `Delta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{delay_profile, gen_admissible, AsyncBounds, DelayProfile, GeneratorMode};
use crate::signals::{delta_apply, l2_inner, l2_norm, sinusoid, PiecewiseSignal};

/// Relative tolerance for trials on exact piecewise-polynomial inputs.
pub const TOL_LEMMA_EXACT: f64 = 1e-9;

/// Relative tolerance for trials on Hermite-interpolated sinusoids.
pub const TOL_LEMMA_INTERP: f64 = 1e-4;

const PRE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub beta: f64,
    pub eta: f64,
    pub x: f64,
    pub y: f64,
}

impl Multiplier {
    pub fn new(beta: f64, eta: f64, x: f64, y: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("eta", eta), ("X", x), ("Y", y)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { beta, eta, x, y })
    }

    pub fn from_bounds(b: &AsyncBounds, x: f64, y: f64) -> Result<Self> {
        let (beta, eta) = beta_eta(b);
        Self::new(beta, eta, x, y)
    }

    /// `beta X + eta Y`, the weight on `|v|^2`.
    pub fn vv(&self) -> f64 {
        self.beta * self.x + self.eta * self.y
    }

    /// `[[beta X + eta Y, Y], [Y, -X]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.vv(), self.y], [self.y, -self.x]]
    }

    pub fn is_degenerate(&self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { x: self.x * c, y: self.y * c, ..*self }
    }
}

/// `(beta, eta)` with `sqrt(beta) = 2(tau' + tau_circ)/pi + sqrt((tau' + tau_circ) tau_natural)`
/// and `eta = tau_natural`.
pub fn beta_eta(b: &AsyncBounds) -> (f64, f64) {
    (gain_bound(b).powi(2), b.tau_natural)
}

/// Induced-norm bound on `Delta`.
pub fn gain_bound(b: &AsyncBounds) -> f64 {
    let l = b.tau_prime + b.tau_circ;
    2.0 * l / std::f64::consts::PI + (l * b.tau_natural).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainTrial {
    /// `|Delta v| / (bound |v|)`.
    pub ratio: f64,
    pub bound: f64,
    pub v_norm: f64,
    pub w_norm: f64,
}

impl GainTrial {
    pub fn within(&self, tol: f64) -> bool {
        self.ratio <= 1.0 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassivityTrial {
    /// `<Delta v, v> + (tau_natural / 2) |v|^2`.
    pub slack: f64,
    pub v_norm_sq: f64,
}

impl PassivityTrial {
    pub fn within(&self, tol: f64) -> bool {
        self.slack >= -tol * self.v_norm_sq
    }

    pub fn normalized(&self) -> f64 {
        self.slack / self.v_norm_sq
    }
}

fn check_trial_inputs(p: &DelayProfile, b: &AsyncBounds, v: &PiecewiseSignal) -> Result<f64> {
    let scale = p.horizon().max(1.0) * PRE_TOL;
    if p.max_reset_value() > b.tau_natural + scale {
        return Err(Error::Precondition(format!(
            "profile reset value {} exceeds tau_natural {}",
            p.max_reset_value(),
            b.tau_natural
        )));
    }
    let pad = b.reset_interval_bound();
    let resets: Vec<_> = p.resets().collect();
    for pair in resets.windows(2) {
        if pair[1].time - pair[0].source_time > pad + scale {
            return Err(Error::Precondition(format!(
                "reset at {} lies more than tau' + tau_circ after the source sample at {}",
                pair[1].time, pair[0].source_time
            )));
        }
    }
    let support_end = v.horizon() - pad;
    if support_end <= 0.0 {
        return Err(Error::Precondition("horizon shorter than the settling padding".into()));
    }
    let tail = v.sub(&v.truncate(support_end)?)?;
    let v_norm = l2_norm(v);
    if v_norm == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    if l2_norm(&tail) > PRE_TOL * v_norm {
        return Err(Error::Precondition(format!(
            "input is not supported in [0, {support_end}]"
        )));
    }
    Ok(v_norm)
}

pub fn gain_trial(p: &DelayProfile, b: &AsyncBounds, v: &PiecewiseSignal) -> Result<GainTrial> {
    let v_norm = check_trial_inputs(p, b, v)?;
    let w = delta_apply(p, v)?;
    let w_norm = l2_norm(&w);
    let bound = gain_bound(b);
    let ratio = if bound > 0.0 {
        w_norm / (bound * v_norm)
    } else if w_norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GainTrial { ratio, bound, v_norm, w_norm })
}

pub fn passivity_trial(p: &DelayProfile, b: &AsyncBounds, v: &PiecewiseSignal) -> Result<PassivityTrial> {
    let v_norm = check_trial_inputs(p, b, v)?;
    let w = delta_apply(p, v)?;
    let v_norm_sq = v_norm * v_norm;
    Ok(PassivityTrial {
        slack: l2_inner(&w, v)? + 0.5 * b.tau_natural * v_norm_sq,
        v_norm_sq,
    })
}

/// `<[v; w], Pi(X, Y) [v; w]>`.
pub fn iqc_residual(v: &PiecewiseSignal, w: &PiecewiseSignal, m: &Multiplier) -> Result<f64> {
    let vv = l2_inner(v, v)?;
    let ww = l2_inner(w, w)?;
    let wv = l2_inner(w, v)?;
    Ok(m.vv() * vv - m.x * ww + 2.0 * m.y * wv)
}

/// Random piecewise-cubic input with `pieces` segments on `[0, support_end)`,
/// zero up to `horizon`.
pub fn random_cubic_input(
    rng: &mut impl Rng,
    pieces: usize,
    support_end: f64,
    horizon: f64,
) -> Result<PiecewiseSignal> {
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.0..support_end)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut breaks = vec![0.0];
    for c in cuts {
        if c - breaks.last().unwrap() > 1e-9 * support_end {
            breaks.push(c);
        }
    }
    if support_end - breaks.last().unwrap() <= 1e-9 * support_end {
        breaks.pop();
    }
    breaks.push(support_end);
    let mut segs: Vec<Vec<f64>> = Vec::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let deg = rng.gen_range(0..=3usize);
        // coefficients scaled so each monomial stays O(1) over the piece
        let c: Vec<f64> = (0..=deg)
            .map(|k| rng.gen_range(-1.0..1.0) / len.powi(k as i32))
            .collect();
        segs.push(c);
    }
    if support_end < horizon {
        breaks.push(horizon);
        segs.push(vec![0.0]);
    }
    PiecewiseSignal::from_parts(breaks, segs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub mode: GeneratorMode,
    pub ratio: f64,
    pub slack: f64,
    pub slack_normalized: f64,
}

/// Settings of a randomized lemma batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSpec {
    pub trials: usize,
    pub seed: u64,
    /// Horizon in units of `tau'`, before padding.
    pub horizon_periods: f64,
    pub pieces: usize,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self { trials: 1000, seed: 0, horizon_periods: 20.0, pieces: 24 }
    }
}

/// Modes usable for `b`: down-sampling only when `tau_circ > 0`.
pub fn modes_for(b: &AsyncBounds) -> Vec<GeneratorMode> {
    if b.tau_circ > 0.0 {
        vec![GeneratorMode::JitteredDelay, GeneratorMode::DownSampling]
    } else {
        vec![GeneratorMode::JitteredDelay]
    }
}

/// One randomized gain and passivity trial with a per-seed generator.
pub fn run_trial(b: &AsyncBounds, spec: &BatchSpec, seed: u64) -> Result<TrialRecord> {
    let modes = modes_for(b);
    let mode = modes[(seed % modes.len() as u64) as usize];
    let support_end = spec.horizon_periods * b.tau_prime;
    let horizon = support_end + b.reset_interval_bound() + b.tau_prime;
    let (tp, ts) = gen_admissible(b, horizon, mode, seed)?;
    let p = delay_profile(&tp, &ts, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let v = random_cubic_input(&mut rng, spec.pieces, support_end, horizon)?;
    let g = gain_trial(&p, b, &v)?;
    let s = passivity_trial(&p, b, &v)?;
    Ok(TrialRecord {
        seed,
        mode,
        ratio: g.ratio,
        slack: s.slack,
        slack_normalized: s.normalized(),
    })
}

/// Runs `spec.trials` independent trials in parallel; records are in seed order.
pub fn run_lemma_batch(b: &AsyncBounds, spec: &BatchSpec) -> Result<Vec<TrialRecord>> {
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(b, spec, spec.seed.wrapping_add(i)))
        .collect()
}

pub fn batch_csv(b: &AsyncBounds, records: &[TrialRecord]) -> String {
    let mut out = String::from(
        "seed,mode,gain_ratio[-],passivity_slack[s*u^2],slack_over_energy[s],tau_prime[s],tau_star[s],tau_circ[s],tau_natural[s]\n",
    );
    for r in records {
        let mode = match r.mode {
            GeneratorMode::JitteredDelay => "jittered-delay",
            GeneratorMode::DownSampling => "down-sampling",
            GeneratorMode::Synchronous => "synchronous",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            mode,
            r.ratio,
            r.slack,
            r.slack_normalized,
            b.tau_prime,
            b.tau_star,
            b.tau_circ,
            b.tau_natural
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub phase: f64,
    pub ratio: f64,
    pub interp_error_bound: f64,
}

/// Gain ratios of sinusoid-like inputs under synchronous sampling with period `h`,
/// `n_inputs` frequencies and phases spread around `pi / (2h)`.
pub fn synchronous_sinusoid_sweep(h: f64, n_inputs: usize, periods: usize) -> Result<Vec<SweepPoint>> {
    let b = AsyncBounds::new(h, h, 0.0, 0.0)?;
    let support_end = periods as f64 * h;
    let horizon = support_end + h;
    let t = crate::events::EventSequence::periodic(h, horizon)?;
    let p = delay_profile(&t, &t, horizon)?;
    let center = std::f64::consts::PI / (2.0 * h);
    let n_freq = n_inputs.div_ceil(2).max(1);
    let points: Vec<(f64, f64)> = (0..n_inputs)
        .map(|i| {
            let k = i / 2;
            let frac = if n_freq > 1 { k as f64 / (n_freq - 1) as f64 } else { 0.5 };
            let omega = center * 0.5f64.powf(1.0 - 2.0 * frac);
            let phase = if i % 2 == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
            (omega, phase)
        })
        .collect();
    points
        .into_par_iter()
        .map(|(omega, phase)| {
            let s = sinusoid(1.0, omega, phase, support_end, horizon)?;
            let g = gain_trial(&p, &b, &s.signal)?;
            Ok(SweepPoint { omega, phase, ratio: g.ratio, interp_error_bound: s.interp_error_bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventSequence;

    fn sync(h: f64, n: usize) -> (DelayProfile, AsyncBounds, PiecewiseSignal) {
        let horizon = (n + 1) as f64 * h;
        let t = EventSequence::periodic(h, horizon).unwrap();
        let p = delay_profile(&t, &t, horizon).unwrap();
        let b = AsyncBounds::new(h, h, 0.0, 0.0).unwrap();
        let v = PiecewiseSignal::piecewise_constant(vec![0.0, n as f64 * h, horizon], &[1.0, 0.0]).unwrap();
        (p, b, v)
    }

    #[test]
    fn beta_eta_examples() {
        let pi = std::f64::consts::PI;
        let (beta, eta) = beta_eta(&AsyncBounds::new(1.0, 2.0, 1.0, 1.0).unwrap());
        assert!((beta - (4.0 / pi + 2f64.sqrt()).powi(2)).abs() < 1e-12);
        assert!((beta - 7.2224).abs() < 1e-4);
        assert_eq!(eta, 1.0);
        let (beta, eta) = beta_eta(&AsyncBounds::new(0.3, 0.3, 0.0, 0.0).unwrap());
        assert!((beta - (0.6 / pi).powi(2)).abs() < 1e-15);
        assert_eq!(eta, 0.0);
        let (beta, eta) = beta_eta(&AsyncBounds::new(1.0, 3.0, 2.0, 0.0).unwrap());
        assert!((beta - (6.0 / pi).powi(2)).abs() < 1e-12);
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn multiplier_matrix_layout() {
        let m = Multiplier::new(2.0, 0.5, 3.0, 4.0).unwrap();
        assert_eq!(m.matrix(), [[8.0, 4.0], [4.0, -3.0]]);
        assert!(Multiplier::new(1.0, 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn synchronous_constant_input_closed_forms() {
        let (h, n) = (0.4, 50);
        let (p, b, v) = sync(h, n);
        let g = gain_trial(&p, &b, &v).unwrap();
        let expected = std::f64::consts::PI / (2.0 * 3f64.sqrt());
        assert!((g.ratio - expected).abs() < 1e-12, "{}", g.ratio);
        let s = passivity_trial(&p, &b, &v).unwrap();
        assert!((s.slack - n as f64 * h * h / 2.0).abs() < 1e-12);
    }

    #[test]
    fn residual_reductions_match_trials() {
        let (h, n) = (0.25, 12);
        let (p, b, v) = sync(h, n);
        let w = delta_apply(&p, &v).unwrap();
        let (beta, eta) = beta_eta(&b);
        let gain = iqc_residual(&v, &w, &Multiplier::new(beta, eta, 1.0, 0.0).unwrap()).unwrap();
        let g = gain_trial(&p, &b, &v).unwrap();
        let vv = g.v_norm * g.v_norm;
        assert!((gain - (beta * vv - g.w_norm * g.w_norm)).abs() < 1e-12);
        assert!((gain / (beta * vv) - (1.0 - g.ratio * g.ratio)).abs() < 1e-12);
        let pass = iqc_residual(&v, &w, &Multiplier::new(beta, eta, 0.0, 1.0).unwrap()).unwrap();
        let s = passivity_trial(&p, &b, &v).unwrap();
        assert!((pass - 2.0 * s.slack).abs() < 1e-12);
    }

    #[test]
    fn zero_input_is_rejected() {
        let (p, b, _) = sync(0.5, 4);
        let z = PiecewiseSignal::zero(2.5).unwrap();
        assert_eq!(gain_trial(&p, &b, &z), Err(Error::ZeroEnergy));
        assert_eq!(passivity_trial(&p, &b, &z), Err(Error::ZeroEnergy));
    }

    #[test]
    fn unpadded_input_is_rejected() {
        let (p, b, _) = sync(0.5, 4);
        let one = PiecewiseSignal::constant(1.0, 2.5).unwrap();
        assert!(matches!(gain_trial(&p, &b, &one), Err(Error::Precondition(_))));
    }

    #[test]
    fn partially_zero_input_stays_below_bound() {
        let (p, b, _) = sync(0.5, 8);
        let v = PiecewiseSignal::piecewise_constant(vec![0.0, 1.2, 2.1, 4.5], &[0.0, 3.0, 0.0]).unwrap();
        let g = gain_trial(&p, &b, &v).unwrap();
        assert!(g.ratio.is_finite() && g.ratio <= 1.0);
    }

    #[test]
    fn small_random_batch_respects_both_bounds() {
        let b = AsyncBounds::new(1.0, 2.0, 1.0, 1.0).unwrap();
        let spec = BatchSpec { trials: 40, seed: 3, ..BatchSpec::default() };
        let recs = run_lemma_batch(&b, &spec).unwrap();
        assert_eq!(recs.len(), 40);
        assert!(recs.iter().all(|r| r.ratio <= 1.0 + TOL_LEMMA_EXACT));
        assert!(recs.iter().all(|r| r.slack_normalized >= -TOL_LEMMA_EXACT));
        assert!(recs.windows(2).all(|w| w[1].seed == w[0].seed + 1));
        let again = run_lemma_batch(&b, &spec).unwrap();
        assert_eq!(batch_csv(&b, &recs), batch_csv(&b, &again));
    }
}
