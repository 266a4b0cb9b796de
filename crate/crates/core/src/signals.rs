//! Exact piecewise-polynomial signals on `[0, horizon]`.
//!
//! Segments store up to five coefficients in the local coordinate
//! `s = t - t_left`, so every product of two signals has degree at most eight
//! and inner products are integrated in closed form. Signals are
//! right-continuous: at a breakpoint the segment starting there is used.
//!
//! The sample-and-hold operators, integration, the composed delay and the
//! perturbation `(id - R) I` all map this class into itself.

use crate::error::{Error, Result};
use crate::events::{DelayProfile, EventSequence};

/// Largest stored polynomial degree.
pub const MAX_DEGREE: usize = 4;

/// Breakpoints closer than this are collapsed when signals are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Hermite grid density used for sinusoid-like test inputs.
pub const POINTS_PER_PERIOD: usize = 40;

pub type Coeffs = [f64; MAX_DEGREE + 1];

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSignal {
    breaks: Vec<f64>,
    segs: Vec<Coeffs>,
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * s + x)
}

fn degree_of(c: &[f64]) -> usize {
    c.iter().rposition(|x| *x != 0.0).unwrap_or(0)
}

/// Coefficients of `p(s + shift)`.
fn taylor_shift(c: &Coeffs, shift: f64) -> Coeffs {
    if shift == 0.0 {
        return *c;
    }
    let mut out = [0.0; MAX_DEGREE + 1];
    // binomial expansion of sum_k c_k (s + shift)^k
    for (k, &ck) in c.iter().enumerate() {
        if ck == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        for j in 0..=k {
            // binom = C(k, j)
            out[j] += ck * binom * shift.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

fn to_coeffs(c: &[f64]) -> Result<Coeffs> {
    if c.len() > MAX_DEGREE + 1 && c[MAX_DEGREE + 1..].iter().any(|x| *x != 0.0) {
        return Err(Error::DegreeOverflow { degree: degree_of(c), max: MAX_DEGREE });
    }
    let mut out = [0.0; MAX_DEGREE + 1];
    for (o, x) in out.iter_mut().zip(c) {
        *o = *x;
    }
    Ok(out)
}

impl PiecewiseSignal {
    /// Builds a signal from `breaks` (starting at 0, ending at the horizon) and
    /// one local-coordinate coefficient list per interval.
    pub fn from_parts(breaks: Vec<f64>, segs: Vec<Vec<f64>>) -> Result<Self> {
        let segs = segs.iter().map(|c| to_coeffs(c)).collect::<Result<Vec<_>>>()?;
        Self::from_coeffs(breaks, segs)
    }

    pub fn from_coeffs(breaks: Vec<f64>, segs: Vec<Coeffs>) -> Result<Self> {
        if breaks.len() != segs.len() + 1 || segs.is_empty() {
            return Err(Error::Dimension(format!(
                "{} breakpoints for {} segments",
                breaks.len(),
                segs.len()
            )));
        }
        if breaks[0] != 0.0 {
            return Err(Error::Precondition("first breakpoint must be 0".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("breakpoints must be strictly increasing".into()));
        }
        if breaks.iter().chain(segs.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Precondition("non-finite breakpoint or coefficient".into()));
        }
        Ok(Self { breaks, segs })
    }

    pub fn constant(c: f64, horizon: f64) -> Result<Self> {
        Self::from_coeffs(vec![0.0, horizon], vec![[c, 0.0, 0.0, 0.0, 0.0]])
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::constant(0.0, horizon)
    }

    /// A single polynomial in `t` on `[0, horizon]`.
    pub fn polynomial(coeffs: &[f64], horizon: f64) -> Result<Self> {
        Self::from_coeffs(vec![0.0, horizon], vec![to_coeffs(coeffs)?])
    }

    /// Value `values[i]` on `[breaks[i], breaks[i + 1])`.
    pub fn piecewise_constant(breaks: Vec<f64>, values: &[f64]) -> Result<Self> {
        let segs = values.iter().map(|&v| [v, 0.0, 0.0, 0.0, 0.0]).collect();
        Self::from_coeffs(breaks, segs)
    }

    /// Piecewise-cubic Hermite interpolant through `(nodes[i], values[i])` with
    /// slopes `slopes[i]`; `nodes` start at 0 and end at the horizon.
    pub fn hermite(nodes: &[f64], values: &[f64], slopes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 || values.len() != nodes.len() || slopes.len() != nodes.len() {
            return Err(Error::Dimension("Hermite data lengths differ".into()));
        }
        let segs = (0..nodes.len() - 1)
            .map(|i| hermite_coeffs(nodes[i + 1] - nodes[i], values[i], values[i + 1], slopes[i], slopes[i + 1]))
            .collect();
        Self::from_coeffs(nodes.to_vec(), segs)
    }

    pub fn horizon(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn segments(&self) -> &[Coeffs] {
        &self.segs
    }

    pub fn degree(&self) -> usize {
        self.segs.iter().map(|c| degree_of(c)).max().unwrap_or(0)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.degree() == 0
    }

    fn segment_index(&self, t: f64) -> usize {
        let n = self.segs.len();
        self.breaks[..n].partition_point(|&b| b <= t).saturating_sub(1)
    }

    /// Right-continuous evaluation; `t = horizon` uses the left limit and
    /// points outside `[0, horizon]` evaluate to zero.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t >= 0.0 && t <= self.horizon()) {
            return 0.0;
        }
        let i = self.segment_index(t);
        horner(&self.segs[i], t - self.breaks[i])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            segs: self.segs.iter().map(|s| s.map(|x| x * c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let merged = merged_breaks(self, other)?;
        let segs = merged
            .windows(2)
            .map(|w| {
                let a = self.local_at(w[0]);
                let b = other.local_at(w[0]);
                let mut c = [0.0; MAX_DEGREE + 1];
                for k in 0..=MAX_DEGREE {
                    c[k] = op(a[k], b[k]);
                }
                c
            })
            .collect();
        Self::from_coeffs(merged, segs)
    }

    /// Coefficients of the segment containing `t`, re-expanded about `t`.
    fn local_at(&self, t: f64) -> Coeffs {
        let i = self.segment_index(t + MERGE_TOL);
        taylor_shift(&self.segs[i], t - self.breaks[i])
    }

    /// `P_tau f`: equal to `f` on `[0, tau]`, zero afterwards.
    pub fn truncate(&self, tau: f64) -> Result<Self> {
        if tau >= self.horizon() {
            return Ok(self.clone());
        }
        let mask = Self::piecewise_constant(vec![0.0, tau, self.horizon()], &[1.0, 0.0])?;
        let merged = merged_breaks(self, &mask)?;
        let segs = merged
            .windows(2)
            .map(|w| if w[0] < tau { self.local_at(w[0]) } else { [0.0; MAX_DEGREE + 1] })
            .collect();
        Self::from_coeffs(merged, segs)
    }

    /// `(time, value)` rows on a caller-supplied grid, with a header line.
    pub fn to_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("time[s],value\n");
        for &t in grid {
            out.push_str(&format!("{t},{}\n", self.eval(t)));
        }
        out
    }
}

/// Cubic on `[0, len]` with end values `f0, f1` and end slopes `d0, d1`.
pub fn hermite_coeffs(len: f64, f0: f64, f1: f64, d0: f64, d1: f64) -> Coeffs {
    let slope = (f1 - f0) / len;
    let c2 = (3.0 * slope - 2.0 * d0 - d1) / len;
    let c3 = (d0 + d1 - 2.0 * slope) / (len * len);
    [f0, d0, c2, c3, 0.0]
}

fn same_horizon(f: &PiecewiseSignal, g: &PiecewiseSignal) -> Result<()> {
    let (a, b) = (f.horizon(), g.horizon());
    if (a - b).abs() > MERGE_TOL * a.abs().max(1.0) {
        return Err(Error::Dimension(format!("horizons differ: {a} vs {b}")));
    }
    Ok(())
}

fn merged_breaks(f: &PiecewiseSignal, g: &PiecewiseSignal) -> Result<Vec<f64>> {
    same_horizon(f, g)?;
    let mut all: Vec<f64> = f.breaks.iter().chain(g.breaks.iter()).cloned().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= MERGE_TOL * last.abs().max(1.0) => {}
            _ => out.push(t),
        }
    }
    // the horizon of `f` closes the merged grid
    let h = f.horizon();
    let n = out.len();
    if n >= 2 && (h - out[n - 1]).abs() <= MERGE_TOL * h.abs().max(1.0) {
        out[n - 1] = h;
    }
    Ok(out)
}

/// `S_T f`: the values `f(t_k)` under right-continuous evaluation.
pub fn sample(t: &EventSequence, f: &PiecewiseSignal) -> Result<Vec<f64>> {
    let last = *t.times().last().unwrap();
    if last >= f.horizon() {
        return Err(Error::Precondition(format!(
            "event at {last} is not inside the signal horizon {}",
            f.horizon()
        )));
    }
    Ok(t.times().iter().map(|&tk| f.eval(tk)).collect())
}

/// `H_T`: value `vals[k]` on `[t_k, t_{k+1})`, the last value up to `horizon`.
pub fn hold(t: &EventSequence, vals: &[f64], horizon: f64) -> Result<PiecewiseSignal> {
    if vals.len() != t.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} events",
            vals.len(),
            t.len()
        )));
    }
    let mut breaks = t.times().to_vec();
    breaks.push(horizon);
    PiecewiseSignal::piecewise_constant(breaks, vals)
}

/// `t -> int_0^t f`, continuous with value 0 at `t = 0`.
pub fn integrate(f: &PiecewiseSignal) -> Result<PiecewiseSignal> {
    let deg = f.degree();
    if deg >= MAX_DEGREE {
        return Err(Error::DegreeOverflow { degree: deg + 1, max: MAX_DEGREE });
    }
    let mut acc = 0.0;
    let mut segs = Vec::with_capacity(f.segs.len());
    for (i, c) in f.segs.iter().enumerate() {
        let mut out = [0.0; MAX_DEGREE + 1];
        out[0] = acc;
        for k in 0..MAX_DEGREE {
            out[k + 1] = c[k] / (k + 1) as f64;
        }
        acc = horner(&out, f.breaks[i + 1] - f.breaks[i]);
        segs.push(out);
    }
    PiecewiseSignal::from_coeffs(f.breaks.clone(), segs)
}

/// `R_sigma f` for the composed delay of `p`: on each update interval the
/// value of `f` at the active source sample.
pub fn apply_profile(p: &DelayProfile, f: &PiecewiseSignal) -> Result<PiecewiseSignal> {
    if (p.horizon() - f.horizon()).abs() > MERGE_TOL * f.horizon().abs().max(1.0) {
        return Err(Error::Dimension(format!(
            "profile horizon {} differs from signal horizon {}",
            p.horizon(),
            f.horizon()
        )));
    }
    let mut breaks: Vec<f64> = p.updates().iter().map(|u| u.time).collect();
    breaks.push(f.horizon());
    let values: Vec<f64> = p.updates().iter().map(|u| f.eval(u.source_time)).collect();
    PiecewiseSignal::piecewise_constant(breaks, &values)
}

/// `Delta v = (id - R_sigma) I v`: on each reset interval `[psi_l, psi_{l+1})`
/// the output is `int_{lambda_l}^t v`.
pub fn delta_apply(p: &DelayProfile, v: &PiecewiseSignal) -> Result<PiecewiseSignal> {
    let iv = integrate(v)?;
    iv.sub(&apply_profile(p, &iv)?)
}

/// `int_0^horizon f g`, exact on the merged breakpoint grid.
pub fn l2_inner(f: &PiecewiseSignal, g: &PiecewiseSignal) -> Result<f64> {
    let merged = merged_breaks(f, g)?;
    let mut total = 0.0;
    for w in merged.windows(2) {
        let a = f.local_at(w[0]);
        let b = g.local_at(w[0]);
        let mut prod = [0.0; 2 * MAX_DEGREE + 1];
        for i in 0..=MAX_DEGREE {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..=MAX_DEGREE {
                prod[i + j] += a[i] * b[j];
            }
        }
        let len = w[1] - w[0];
        let mut pow = len;
        for (k, c) in prod.iter().enumerate() {
            total += c * pow / (k + 1) as f64;
            pow *= len;
        }
    }
    Ok(total)
}

pub fn l2_norm(f: &PiecewiseSignal) -> f64 {
    l2_inner(f, f).expect("a signal shares its own horizon").max(0.0).sqrt()
}

/// A Hermite-interpolated sinusoid together with its interpolation error bound.
#[derive(Debug, Clone)]
pub struct SinusoidInput {
    pub signal: PiecewiseSignal,
    /// Uniform bound on `|signal - amplitude sin(omega t + phase)|` on the support.
    pub interp_error_bound: f64,
}

/// `amplitude * sin(omega t + phase)` on `[0, support_end)`, zero up to `horizon`,
/// interpolated with [`POINTS_PER_PERIOD`] cubic Hermite nodes per period.
pub fn sinusoid(
    amplitude: f64,
    omega: f64,
    phase: f64,
    support_end: f64,
    horizon: f64,
) -> Result<SinusoidInput> {
    if !(omega > 0.0) || !(support_end > 0.0) || support_end > horizon {
        return Err(Error::Precondition(format!(
            "sinusoid needs omega > 0 and 0 < support_end <= horizon (got {omega}, {support_end}, {horizon})"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / omega / POINTS_PER_PERIOD as f64;
    let n = (support_end / step).ceil().max(1.0) as usize;
    let nodes: Vec<f64> = (0..=n).map(|i| support_end * i as f64 / n as f64).collect();
    let values: Vec<f64> = nodes.iter().map(|t| amplitude * (omega * t + phase).sin()).collect();
    let slopes: Vec<f64> = nodes
        .iter()
        .map(|t| amplitude * omega * (omega * t + phase).cos())
        .collect();
    let mut breaks = nodes.clone();
    let mut segs: Vec<Coeffs> = (0..n)
        .map(|i| hermite_coeffs(nodes[i + 1] - nodes[i], values[i], values[i + 1], slopes[i], slopes[i + 1]))
        .collect();
    if support_end < horizon {
        breaks.push(horizon);
        segs.push([0.0; MAX_DEGREE + 1]);
    }
    let h = support_end / n as f64;
    Ok(SinusoidInput {
        signal: PiecewiseSignal::from_coeffs(breaks, segs)?,
        interp_error_bound: amplitude.abs() * (h * omega).powi(4) / 384.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::delay_profile;

    fn half_offset_profile() -> DelayProfile {
        let tp: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let mut ts = vec![0.0];
        ts.extend((1..10).map(|k| k as f64 + 0.5));
        let tp = EventSequence::new(tp, 10.0).unwrap();
        let ts = EventSequence::new(ts, 10.0).unwrap();
        delay_profile(&tp, &ts, 10.0).unwrap()
    }

    #[test]
    fn sampling_examples() {
        let t = EventSequence::new(vec![0.0, 1.0, 2.0], 3.0).unwrap();
        let c = PiecewiseSignal::constant(2.5, 3.0).unwrap();
        assert_eq!(sample(&t, &c).unwrap(), vec![2.5; 3]);
        let ramp = PiecewiseSignal::polynomial(&[0.0, 1.0], 3.0).unwrap();
        assert_eq!(sample(&t, &ramp).unwrap(), vec![0.0, 1.0, 2.0]);
        let step = PiecewiseSignal::piecewise_constant(vec![0.0, 1.0, 3.0], &[-1.0, 4.0]).unwrap();
        assert_eq!(sample(&t, &step).unwrap(), vec![-1.0, 4.0, 4.0]);
        let short = PiecewiseSignal::constant(1.0, 2.0).unwrap();
        assert!(sample(&t, &short).is_err());
    }

    #[test]
    fn hold_examples() {
        let t = EventSequence::new(vec![0.0], 2.0).unwrap();
        let h = hold(&t, &[5.0], 2.0).unwrap();
        assert_eq!(h.eval(0.0), 5.0);
        assert_eq!(h.eval(1.99), 5.0);
        let t = EventSequence::new(vec![0.0, 1.0], 2.0).unwrap();
        let h = hold(&t, &[1.0, 2.0], 2.0).unwrap();
        assert_eq!((h.eval(0.5), h.eval(1.0), h.eval(1.5)), (1.0, 2.0, 2.0));
        assert!(hold(&t, &[1.0], 2.0).is_err());

        let f = PiecewiseSignal::polynomial(&[1.0, -0.5, 0.25, 0.1], 2.0).unwrap();
        let held = hold(&t, &sample(&t, &f).unwrap(), 2.0).unwrap();
        for &tk in t.times() {
            assert_eq!(held.eval(tk), f.eval(tk));
        }
    }

    #[test]
    fn integration_examples() {
        let one = PiecewiseSignal::constant(1.0, 2.0).unwrap();
        let i = integrate(&one).unwrap();
        assert_eq!(i.eval(1.25), 1.25);
        let ramp = PiecewiseSignal::polynomial(&[0.0, 1.0], 2.0).unwrap();
        let i = integrate(&ramp).unwrap();
        assert!((i.eval(1.5) - 1.125).abs() < 1e-15);
        let sq = PiecewiseSignal::piecewise_constant(vec![0.0, 1.0, 2.0], &[1.0, -1.0]).unwrap();
        let tent = integrate(&sq).unwrap();
        assert_eq!(tent.eval(1.0), 1.0);
        assert_eq!(tent.eval(0.5), 0.5);
        assert_eq!(tent.eval(1.5), 0.5);
        assert_eq!(tent.eval(2.0), 0.0);
        let quartic = PiecewiseSignal::polynomial(&[0.0, 0.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        assert!(matches!(integrate(&quartic), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn profile_application_examples() {
        let p = half_offset_profile();
        let one = PiecewiseSignal::constant(1.0, 10.0).unwrap();
        let r = apply_profile(&p, &one).unwrap();
        assert!(r.segments().iter().all(|c| c[0] == 1.0));

        let ramp = PiecewiseSignal::polynomial(&[0.0, 1.0], 10.0).unwrap();
        let r = apply_profile(&p, &ramp).unwrap();
        assert_eq!(r.eval(1.5), 1.0);
        assert_eq!(r.eval(2.49), 1.0);
        assert_eq!(r.eval(1.49), 0.0);

        let t = EventSequence::periodic(0.5, 4.0).unwrap();
        let sync = delay_profile(&t, &t, 4.0).unwrap();
        let r = apply_profile(&sync, &PiecewiseSignal::polynomial(&[0.0, 1.0], 4.0).unwrap()).unwrap();
        for &tk in t.times() {
            assert_eq!(r.eval(tk + 0.3), tk);
        }
    }

    #[test]
    fn delta_examples() {
        let p = half_offset_profile();
        let one = PiecewiseSignal::constant(1.0, 10.0).unwrap();
        let w = delta_apply(&p, &one).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.0497;
            assert!((w.eval(t) - p.sigma(t)).abs() < 1e-12, "t = {t}");
        }
        let ramp = PiecewiseSignal::polynomial(&[0.0, 1.0], 10.0).unwrap();
        let w = delta_apply(&p, &ramp).unwrap();
        assert!((w.eval(2.0) - 1.5).abs() < 1e-12);

        let t = EventSequence::periodic(0.5, 4.0).unwrap();
        let sync = delay_profile(&t, &t, 4.0).unwrap();
        let w = delta_apply(&sync, &PiecewiseSignal::constant(1.0, 4.0).unwrap()).unwrap();
        for &tk in t.times() {
            assert_eq!(w.eval(tk), 0.0);
            assert!((w.eval(tk + 0.4) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_product_examples() {
        let one = PiecewiseSignal::constant(1.0, 1.0).unwrap();
        assert!((l2_inner(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        let ramp = PiecewiseSignal::polynomial(&[0.0, 1.0], 1.0).unwrap();
        assert!((l2_inner(&ramp, &ramp).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let (h, n) = (0.3, 7);
        let t = EventSequence::periodic(h, n as f64 * h).unwrap();
        let p = delay_profile(&t, &t, n as f64 * h).unwrap();
        let saw = delta_apply(&p, &PiecewiseSignal::constant(1.0, n as f64 * h).unwrap()).unwrap();
        let ones = PiecewiseSignal::constant(1.0, n as f64 * h).unwrap();
        let got = l2_inner(&saw, &ones).unwrap();
        assert!((got - n as f64 * h * h / 2.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn truncation_and_arithmetic() {
        let f = PiecewiseSignal::polynomial(&[1.0, 2.0, -1.0], 3.0).unwrap();
        let tr = f.truncate(1.3).unwrap();
        assert_eq!(tr.eval(1.0), f.eval(1.0));
        assert_eq!(tr.eval(1.3), 0.0);
        assert_eq!(tr.eval(2.5), 0.0);
        let g = PiecewiseSignal::piecewise_constant(vec![0.0, 0.7, 3.0], &[2.0, -1.0]).unwrap();
        let s = f.add(&g).unwrap();
        for &t in &[0.0, 0.5, 0.7, 1.9, 2.99] {
            assert!((s.eval(t) - f.eval(t) - g.eval(t)).abs() < 1e-14);
        }
        let mismatch = PiecewiseSignal::constant(1.0, 2.0).unwrap();
        assert!(f.add(&mismatch).is_err());
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let c = [0.3, -1.2, 0.5, 2.0, -0.7];
        let shifted = taylor_shift(&c, 0.37);
        for &s in &[0.0, 0.1, 0.9] {
            assert!((horner(&shifted, s) - horner(&c, s + 0.37)).abs() < 1e-13);
        }
    }

    #[test]
    fn sinusoid_interpolation_error_is_within_bound() {
        let s = sinusoid(1.0, 2.0, 0.3, 6.0, 8.0).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..6000 {
            let t = k as f64 * 0.001;
            worst = worst.max((s.signal.eval(t) - (2.0 * t + 0.3).sin()).abs());
        }
        assert!(worst <= s.interp_error_bound * 1.0001, "{worst} > {}", s.interp_error_bound);
        assert!(s.interp_error_bound < 1.1e-5);
        assert_eq!(s.signal.eval(7.0), 0.0);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 - t + 0.5 * t * t - 0.2 * t * t * t;
        let df = |t: f64| -1.0 + t - 0.6 * t * t;
        let nodes = [0.0, 0.4, 1.1, 2.0];
        let v: Vec<f64> = nodes.iter().map(|&t| f(t)).collect();
        let d: Vec<f64> = nodes.iter().map(|&t| df(t)).collect();
        let h = PiecewiseSignal::hermite(&nodes, &v, &d).unwrap();
        for k in 0..20 {
            let t = k as f64 * 0.1;
            assert!((h.eval(t) - f(t)).abs() < 1e-13);
        }
    }
}
