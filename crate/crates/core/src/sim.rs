//! Event-driven simulation of the sampled-data loop
//! `u = d - H_{T*} S_{T*} H_{T'} S_{T'} F y`, `y = P u`, `z = W u`.
//!
//! Between events the inputs are constant and the stacked state
//! `(x_P, x_F, x_W)` is advanced with the exact zero-order-hold
//! discretization. Each interval is split into sub-steps of length at most
//! `0.01 / rho(A)`; continuous outputs are stored as cubic Hermite pieces
//! built from exact values and exact time derivatives at the sub-step nodes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{delay_profile, gen_admissible, AsyncBounds, EventSequence, GeneratorMode};
use crate::linalg;
use crate::lti::StateSpace;
use crate::signals::{hermite_coeffs, l2_norm, Coeffs, PiecewiseSignal, MERGE_TOL};

/// Sub-step length times the spectral radius of the stacked `A`.
pub const STEP_RHO: f64 = 0.01;

/// Upper bound on the number of integration sub-steps per run.
pub const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    /// Overrides the default sub-step bound `STEP_RHO / rho(A)`.
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRecord {
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub time: f64,
    pub source_index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySummary {
    pub d_norm: f64,
    pub z_norm: f64,
    /// `|z| / |d|`; `None` when `d = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LoopTrace {
    pub d: PiecewiseSignal,
    pub u: PiecewiseSignal,
    pub y: PiecewiseSignal,
    pub z: PiecewiseSignal,
    /// `(s F) y`, the derivative of the filter output.
    pub v: PiecewiseSignal,
    /// `F y - held`.
    pub w: PiecewiseSignal,
    /// Filter output `F y`.
    pub fy: PiecewiseSignal,
    /// Actuator value, constant between updates.
    pub held: PiecewiseSignal,
    pub samples: Vec<SampleRecord>,
    pub updates: Vec<UpdateRecord>,
    /// Stacked state `(x_P, x_F, x_W)` at every event time, then at the horizon.
    pub event_states: Vec<(f64, Vec<f64>)>,
    pub energy: EnergySummary,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LoopTrace {
    pub fn horizon(&self) -> f64 {
        self.d.horizon()
    }

    /// Stacked state at time `t`, propagated exactly from the preceding event.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let i = self.event_states.partition_point(|(te, _)| *te <= t).saturating_sub(1);
        let (te, x) = &self.event_states[i];
        let u = self.u.eval(*te);
        let (phi, gamma) = linalg::zoh(&self.a, &self.b, t - te);
        let x1 = phi * linalg::dvec(x) + gamma * u;
        x1.iter().cloned().collect()
    }

    /// `(time, d, u, y, z, v, w, held)` rows on a caller-supplied grid.
    pub fn to_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("time[s],d,u,y,z,v,w,held\n");
        for &t in grid {
            out.push_str(&format!(
                "{t},{},{},{},{},{},{},{}\n",
                self.d.eval(t),
                self.u.eval(t),
                self.y.eval(t),
                self.z.eval(t),
                self.v.eval(t),
                self.w.eval(t),
                self.held.eval(t)
            ));
        }
        out
    }
}

/// `|z| / |d|` from the exact signal norms.
pub fn empirical_gain(trace: &LoopTrace) -> Result<f64> {
    trace.energy.ratio.ok_or(Error::ZeroEnergy)
}

fn require_siso(name: &str, s: &StateSpace) -> Result<()> {
    if s.is_siso() {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{name} must be SISO")))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn step_bound(a: &DMatrix<f64>, horizon: f64, opts: &SimOptions) -> Result<f64> {
    let bound = match opts.max_step {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::Precondition(format!("max_step = {s} must be positive"))),
        None => {
            let rho = spectral_radius(a)?;
            if rho > 0.0 {
                STEP_RHO / rho
            } else {
                horizon / 1000.0
            }
        }
    };
    Ok(bound.min(horizon))
}

/// Sorted union of event times with near-coincident times merged, ending at the horizon.
fn merged_events(lists: &[&[f64]], horizon: f64) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().cloned()).filter(|t| *t < horizon).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| close(*a, *b));
    all.push(horizon);
    all
}

/// Per-signal Hermite segment builder over a shared breakpoint list.
struct Recorder {
    breaks: Vec<f64>,
    segs: Vec<Vec<Coeffs>>,
}

impl Recorder {
    fn new(n: usize) -> Self {
        Self { breaks: vec![0.0], segs: vec![Vec::new(); n] }
    }

    fn push(&mut self, t_end: f64, len: f64, ends: &[(f64, f64, f64, f64)]) {
        for (k, &(f0, f1, d0, d1)) in ends.iter().enumerate() {
            self.segs[k].push(hermite_coeffs(len, f0, f1, d0, d1));
        }
        self.breaks.push(t_end);
    }

    fn finish(self) -> Result<Vec<PiecewiseSignal>> {
        let breaks = self.breaks;
        self.segs
            .into_iter()
            .map(|s| PiecewiseSignal::from_coeffs(breaks.clone(), s))
            .collect()
    }
}

fn check_input(d: &PiecewiseSignal, horizon: f64) -> Result<()> {
    if !d.is_piecewise_constant() {
        return Err(Error::Precondition("disturbance must be piecewise constant".into()));
    }
    if !close(d.horizon(), horizon) {
        return Err(Error::InvalidSequence(format!(
            "disturbance horizon {} differs from the event horizon {horizon}",
            d.horizon()
        )));
    }
    Ok(())
}

/// Simulates the sampled loop from a zero initial state.
pub fn simulate_loop(
    p: &StateSpace,
    f: &StateSpace,
    w: &StateSpace,
    tp: &EventSequence,
    ts: &EventSequence,
    d: &PiecewiseSignal,
    opts: &SimOptions,
) -> Result<LoopTrace> {
    require_siso("P", p)?;
    require_siso("F", f)?;
    require_siso("W", w)?;
    if !f.is_strictly_proper() {
        return Err(Error::AlgebraicLoop("F must be strictly proper".into()));
    }
    let horizon = d.horizon();
    for (name, s) in [("sample", tp), ("update", ts)] {
        if !close(s.horizon(), horizon) {
            return Err(Error::InvalidSequence(format!(
                "{name} horizon {} differs from the disturbance horizon {horizon}",
                s.horizon()
            )));
        }
    }
    check_input(d, horizon)?;
    let profile = delay_profile(tp, ts, tp.horizon())?;

    let (np, nf, nw) = (p.n_states(), f.n_states(), w.n_states());
    let n = np + nf + nw;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 1);
    let dp = p.d[(0, 0)];
    let dw = w.d[(0, 0)];
    a.view_mut((0, 0), (np, np)).copy_from(&p.a);
    a.view_mut((np, 0), (nf, np)).copy_from(&(&f.b * &p.c));
    a.view_mut((np, np), (nf, nf)).copy_from(&f.a);
    a.view_mut((np + nf, np + nf), (nw, nw)).copy_from(&w.a);
    b.view_mut((0, 0), (np, 1)).copy_from(&p.b);
    b.view_mut((np, 0), (nf, 1)).copy_from(&(&f.b * dp));
    b.view_mut((np + nf, 0), (nw, 1)).copy_from(&w.b);

    let max_step = step_bound(&a, horizon, opts)?;
    let events = merged_events(&[tp.times(), ts.times(), d.breakpoints()], horizon);

    // output rows: y, F y, v = (F y)', z
    let mut c_out = DMatrix::zeros(4, n);
    let mut d_out = DMatrix::zeros(4, 1);
    c_out.view_mut((0, 0), (1, np)).copy_from(&p.c);
    d_out[(0, 0)] = dp;
    c_out.view_mut((1, np), (1, nf)).copy_from(&f.c);
    c_out.view_mut((3, np + nf), (1, nw)).copy_from(&w.c);
    d_out[(3, 0)] = dw;
    // v = C_f x_f' = C_f (row block of A x + B u)
    let af_rows = a.rows(np, nf).into_owned();
    let bf_rows = b.rows(np, nf).into_owned();
    c_out.row_mut(2).copy_from(&(&f.c * &af_rows));
    d_out[(2, 0)] = (&f.c * &bf_rows)[(0, 0)];

    let mut rec = Recorder::new(4);
    let mut held_vals = Vec::with_capacity(events.len());
    let mut u_vals = Vec::with_capacity(events.len());
    let mut samples = Vec::with_capacity(tp.len());
    let mut updates = Vec::with_capacity(ts.len());
    let mut event_states = Vec::with_capacity(events.len());
    let mut x = DVector::zeros(n);
    let mut held = 0.0;
    let (mut ip, mut is) = (0usize, 0usize);
    let mut steps = 0usize;

    for e in 0..events.len() - 1 {
        let (t0, t1) = (events[e], events[e + 1]);
        event_states.push((t0, x.iter().cloned().collect::<Vec<f64>>()));
        // a sample co-timed with an update is stored first
        while ip < tp.len() && (tp.times()[ip] < t0 || close(tp.times()[ip], t0)) {
            let value = (&f.c * x.rows(np, nf))[(0, 0)];
            samples.push(SampleRecord { time: tp.times()[ip], value });
            ip += 1;
        }
        while is < ts.len() && (ts.times()[is] < t0 || close(ts.times()[is], t0)) {
            let src = profile.updates()[is].source_index;
            held = samples[src].value;
            updates.push(UpdateRecord { time: ts.times()[is], source_index: src, value: held });
            is += 1;
        }
        let u = d.eval(t0) - held;
        held_vals.push(held);
        u_vals.push(u);

        let len = t1 - t0;
        let k = (len / max_step).ceil().max(1.0) as usize;
        steps += k;
        if steps > MAX_STEPS {
            return Err(Error::Precondition(format!(
                "simulation needs more than {MAX_STEPS} sub-steps"
            )));
        }
        let s = len / k as f64;
        let (phi, gamma) = linalg::zoh(&a, &b, s);
        let bu = &b * u;
        let outputs = |x: &DVector<f64>| {
            let xdot = &a * x + &bu;
            let val = &c_out * x + &d_out * u;
            let der = &c_out * &xdot;
            (val, der)
        };
        let (mut val0, mut der0) = outputs(&x);
        for j in 0..k {
            let x1 = &phi * &x + &gamma * u;
            let (val1, der1) = outputs(&x1);
            let t_end = if j + 1 == k { t1 } else { t0 + (j + 1) as f64 * s };
            let seg_len = t_end - rec.breaks.last().unwrap();
            let ends: Vec<(f64, f64, f64, f64)> =
                (0..4).map(|r| (val0[r], val1[r], der0[r], der1[r])).collect();
            rec.push(t_end, seg_len, &ends);
            x = x1;
            val0 = val1;
            der0 = der1;
        }
    }
    event_states.push((horizon, x.iter().cloned().collect()));

    let mut sig = rec.finish()?.into_iter();
    let (y, fy, v, z) = (sig.next().unwrap(), sig.next().unwrap(), sig.next().unwrap(), sig.next().unwrap());
    let held = PiecewiseSignal::piecewise_constant(events.clone(), &held_vals)?;
    let u = PiecewiseSignal::piecewise_constant(events, &u_vals)?;
    let w_sig = fy.sub(&held)?;
    let d_norm = l2_norm(d);
    let z_norm = l2_norm(&z);
    Ok(LoopTrace {
        d: d.clone(),
        u,
        y,
        z,
        v,
        w: w_sig,
        fy,
        held,
        samples,
        updates,
        event_states,
        energy: EnergySummary {
            d_norm,
            z_norm,
            ratio: if d_norm > 0.0 { Some(z_norm / d_norm) } else { None },
        },
        a,
        b,
    })
}

/// Response of every output of `sys` to a piecewise-constant signal on input
/// `input`, all other inputs zero, from a zero initial state.
pub fn simulate_lti(sys: &StateSpace, input: usize, d: &PiecewiseSignal, opts: &SimOptions) -> Result<Vec<PiecewiseSignal>> {
    if input >= sys.n_inputs() {
        return Err(Error::Dimension(format!("input {input} of a {}-input system", sys.n_inputs())));
    }
    let horizon = d.horizon();
    check_input(d, horizon)?;
    let n = sys.n_states();
    let b = sys.b.columns(input, 1).into_owned();
    let dd = sys.d.columns(input, 1).into_owned();
    let max_step = if n == 0 { horizon } else { step_bound(&sys.a, horizon, opts)? };
    let events = merged_events(&[d.breakpoints()], horizon);
    let mut rec = Recorder::new(sys.n_outputs());
    let mut x = DVector::zeros(n);
    for e in 0..events.len() - 1 {
        let (t0, t1) = (events[e], events[e + 1]);
        let u = d.eval(t0);
        let len = t1 - t0;
        let k = (len / max_step).ceil().max(1.0) as usize;
        let s = len / k as f64;
        let (phi, gamma) = linalg::zoh(&sys.a, &b, s);
        let outputs = |x: &DVector<f64>| {
            let xdot = &sys.a * x + &b * u;
            (&sys.c * x + &dd * u, &sys.c * xdot)
        };
        let (mut val0, mut der0) = outputs(&x);
        for j in 0..k {
            let x1 = &phi * &x + &gamma * u;
            let (val1, der1) = outputs(&x1);
            let t_end = if j + 1 == k { t1 } else { t0 + (j + 1) as f64 * s };
            let seg_len = t_end - rec.breaks.last().unwrap();
            let ends: Vec<_> = (0..sys.n_outputs()).map(|r| (val0[r], val1[r], der0[r], der1[r])).collect();
            rec.push(t_end, seg_len, &ends);
            x = x1;
            val0 = val1;
            der0 = der1;
        }
    }
    rec.finish()
}

/// Unit-amplitude pulse on `[0, width)`, zero up to `horizon`.
pub fn pulse(width: f64, horizon: f64) -> Result<PiecewiseSignal> {
    if !(0.0 < width && width < horizon) {
        return Err(Error::Precondition(format!("pulse width {width} must lie in (0, {horizon})")));
    }
    PiecewiseSignal::piecewise_constant(vec![0.0, width, horizon], &[1.0, 0.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloRecord {
    pub seed: u64,
    pub mode: GeneratorMode,
    pub gain: f64,
}

/// Empirical gains over random admissible schedules, one per seed, in seed order.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_gains(
    p: &StateSpace,
    f: &StateSpace,
    w: &StateSpace,
    b: &AsyncBounds,
    d: &PiecewiseSignal,
    modes: &[GeneratorMode],
    seeds: std::ops::Range<u64>,
    opts: &SimOptions,
) -> Result<Vec<MonteCarloRecord>> {
    if modes.is_empty() {
        return Err(Error::Precondition("at least one generator mode is required".into()));
    }
    let seeds: Vec<u64> = seeds.collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mode = modes[(seed % modes.len() as u64) as usize];
            let (tp, ts) = gen_admissible(b, d.horizon(), mode, seed)?;
            let trace = simulate_loop(p, f, w, &tp, &ts, d, opts)?;
            Ok(MonteCarloRecord { seed, mode, gain: empirical_gain(&trace)? })
        })
        .collect()
}
