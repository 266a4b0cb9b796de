//! Robust stability and L2-gain certification of the sampled loop.
//!
//! Feasibility of the state-space LMIs is decided through their
//! frequency-domain equivalents. The plant response is cached on a
//! log-spaced grid (it does not depend on `h` or `delta`), every local
//! maximum of the frequency-domain form is refined by golden-section search,
//! and refined peak frequencies are fed back into the grid before a verdict
//! is issued. [`lmi_eval`] checks externally supplied `Q` certificates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::bounds_from_h_delta;
use crate::iqc::{beta_eta, Multiplier};
use crate::linalg;
use crate::lti::{assemble_g, freq_response, AnalysisPlant, StateSpace};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_AUGMENT_ROUNDS: usize = 6;
const MAX_REFINED_PEAKS: usize = 12;

/// Feasibility slack `1e-7 (1 + |X| + |Y| + gamma^2)`.
pub fn eps_feas(x: f64, y: f64, gamma: f64) -> f64 {
    1e-7 * (1.0 + x.abs() + y.abs() + gamma * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum YMode {
    #[default]
    Free,
    Zero,
}

impl std::str::FromStr for YMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Self::Free),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Parse {
                location: "y-mode".into(),
                message: format!("expected free or zero, got {other:?}"),
            }),
        }
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    /// Values of `X` scanned for stability (scale normalization allows `{0, 1}`).
    pub x_stability: Vec<f64>,
    /// Values of `X` scanned for performance.
    pub x_performance: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub y_mode: YMode,
    pub n_freq: usize,
    /// The frequency grid spans `[span_lo, span_hi] * omega_c`.
    pub span_lo: f64,
    pub span_hi: f64,
    /// Golden-section iterations per frequency peak.
    pub golden_iters: usize,
    /// Golden-section iterations per multiplier coordinate; 0 keeps the grid optimum.
    pub multiplier_iters: usize,
    pub tol_h: f64,
    pub tol_gamma: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let mut y_grid = vec![0.0];
        y_grid.extend(log_space(1e-3, 1e3, 13));
        Self {
            x_stability: vec![0.0, 1.0],
            x_performance: log_space(1e-2, 1e2, 7),
            y_grid,
            y_mode: YMode::Free,
            n_freq: 400,
            span_lo: 1e-3,
            span_hi: 1e3,
            golden_iters: 80,
            multiplier_iters: 60,
            tol_h: 1e-4,
            tol_gamma: 1e-4,
        }
    }
}

impl SearchSpec {
    pub fn with_y_mode(mut self, mode: YMode) -> Self {
        self.y_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let grids = [&self.x_stability, &self.x_performance, &self.y_grid];
        if grids.iter().any(|g| g.is_empty()) {
            return Err(Error::Precondition("multiplier grids must be non-empty".into()));
        }
        if grids.iter().any(|g| g.iter().any(|v| !(*v >= 0.0 && v.is_finite()))) {
            return Err(Error::Precondition("multiplier grid values must be finite and >= 0".into()));
        }
        if self.x_performance.iter().any(|x| *x <= 0.0) {
            return Err(Error::Precondition("performance X values must be positive".into()));
        }
        if self.n_freq < 2 || !(0.0 < self.span_lo && self.span_lo < self.span_hi) {
            return Err(Error::Precondition("frequency grid needs n >= 2 and 0 < span_lo < span_hi".into()));
        }
        if !(self.tol_h > 0.0 && self.tol_gamma > 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The `Y` values actually scanned.
    pub fn y_values(&self) -> Vec<f64> {
        match self.y_mode {
            YMode::Free => {
                let mut y = self.y_grid.clone();
                y.sort_by(|a, b| a.partial_cmp(b).unwrap());
                y.dedup();
                y
            }
            YMode::Zero => vec![0.0],
        }
    }

    fn sorted_x_performance(&self) -> Vec<f64> {
        let mut x = self.x_performance.clone();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        x.dedup();
        x
    }
}

/// Response of the `(d, w) -> (z, v)` plant at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resp {
    pub zd: Complex64,
    pub zw: Complex64,
    pub vd: Complex64,
    pub vw: Complex64,
}

enum Source {
    Plant(StateSpace),
    Siso(StateSpace),
}

impl Source {
    fn eval(&self, omega: f64) -> Result<Resp> {
        match self {
            Source::Plant(g) => {
                let m = freq_response(g, omega)?;
                Ok(Resp { zd: m[(0, 0)], zw: m[(0, 1)], vd: m[(1, 0)], vw: m[(1, 1)] })
            }
            Source::Siso(g) => {
                let zero = Complex64::new(0.0, 0.0);
                Ok(Resp { zd: zero, zw: zero, vd: zero, vw: freq_response(g, omega)?[(0, 0)] })
            }
        }
    }

    fn a(&self) -> &DMatrix<f64> {
        match self {
            Source::Plant(g) | Source::Siso(g) => &g.a,
        }
    }
}

/// Frequency response cached on a grid `0 = omega_0 < ... < omega_N`, plus `omega = inf`.
pub struct FrequencyData {
    source: Source,
    omegas: Vec<f64>,
    resp: Vec<Resp>,
    at_inf: Resp,
    pub omega_c: f64,
    golden_iters: usize,
}

impl FrequencyData {
    pub fn from_plant(plant: &AnalysisPlant, spec: &SearchSpec) -> Result<Self> {
        Self::build(Source::Plant(plant.g.clone()), spec)
    }

    /// Cache for a scalar `G_vw` alone; the `z` and `d` channels are zero.
    pub fn from_siso(gvw: &StateSpace, spec: &SearchSpec) -> Result<Self> {
        if !gvw.is_siso() {
            return Err(Error::Dimension("G_vw must be 1x1".into()));
        }
        Self::build(Source::Siso(gvw.clone()), spec)
    }

    fn build(source: Source, spec: &SearchSpec) -> Result<Self> {
        spec.validate()?;
        let a = source.a();
        let mut extra = Vec::new();
        let omega_c = if a.nrows() == 0 {
            1.0
        } else {
            match source {
                Source::Plant(ref g) | Source::Siso(ref g) => g.require_hurwitz()?,
            }
            let eigs = linalg::eigenvalues(a)?;
            let mags: Vec<f64> = eigs.iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
            for z in &eigs {
                extra.push(z.norm());
                extra.push(z.im.abs());
            }
            if mags.is_empty() {
                1.0
            } else {
                (mags.iter().map(|m| m.ln()).sum::<f64>() / mags.len() as f64).exp()
            }
        };
        let mut omegas = vec![0.0];
        omegas.extend(log_space(spec.span_lo * omega_c, spec.span_hi * omega_c, spec.n_freq));
        omegas.extend(extra.into_iter().filter(|w| *w > 0.0 && w.is_finite()));
        let at_inf = source.eval(f64::INFINITY)?;
        let mut data = Self {
            source,
            omegas: Vec::new(),
            resp: Vec::new(),
            at_inf,
            omega_c,
            golden_iters: spec.golden_iters,
        };
        data.insert(&omegas)?;
        Ok(data)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn eval(&self, omega: f64) -> Result<Resp> {
        self.source.eval(omega)
    }

    /// Adds grid points, keeping the grid sorted and free of near-duplicates.
    pub fn insert(&mut self, ws: &[f64]) -> Result<()> {
        let mut pts: Vec<(f64, Resp)> = self.omegas.iter().cloned().zip(self.resp.iter().cloned()).collect();
        for &w in ws {
            if w.is_finite() && w >= 0.0 {
                pts.push((w, self.source.eval(w)?));
            }
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-14 * b.0.abs().max(1e-300));
        self.omegas = pts.iter().map(|p| p.0).collect();
        self.resp = pts.into_iter().map(|p| p.1).collect();
        Ok(())
    }

    /// Maximum of `phi` over the cached grid and `omega = inf`.
    pub fn grid_sup(&self, phi: &dyn Fn(&Resp) -> f64) -> Peak {
        let mut best = Peak { value: phi(&self.at_inf), omega: f64::INFINITY };
        for (w, r) in self.omegas.iter().zip(&self.resp) {
            let v = phi(r);
            if v > best.value || v.is_nan() {
                best = Peak { value: v, omega: *w };
            }
        }
        best
    }

    /// Supremum of `phi` with golden-section refinement around every grid local maximum.
    pub fn refined_sup(&self, phi: &dyn Fn(&Resp) -> f64) -> Result<(Peak, Vec<f64>)> {
        let vals: Vec<f64> = self.resp.iter().map(phi).collect();
        let n = vals.len();
        let mut best = Peak { value: phi(&self.at_inf), omega: f64::INFINITY };
        let mut locals: Vec<usize> = (0..n)
            .filter(|&i| {
                let left = i == 0 || vals[i] >= vals[i - 1];
                let right = i + 1 == n || vals[i] >= vals[i + 1];
                left && right
            })
            .collect();
        locals.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
        locals.truncate(MAX_REFINED_PEAKS);
        let mut peaks = Vec::new();
        for &i in &locals {
            if vals[i] > best.value || vals[i].is_nan() {
                best = Peak { value: vals[i], omega: self.omegas[i] };
            }
            let lo = if i == 0 { 0.0 } else { self.omegas[i - 1] };
            let hi = if i + 1 == n { self.omegas[i] * 10.0 } else { self.omegas[i + 1] };
            if !(hi > lo) {
                continue;
            }
            let eval = |w: f64| -> Result<f64> { Ok(phi(&self.source.eval(w)?)) };
            let (w, v) = if lo == 0.0 {
                golden_max(0.0, hi, self.golden_iters, eval)?
            } else {
                let (x, v) = golden_max(lo.ln(), hi.ln(), self.golden_iters, |x| eval(x.exp()))?;
                (x.exp(), v)
            };
            peaks.push(w);
            if v > best.value {
                best = Peak { value: v, omega: w };
            }
        }
        Ok((best, peaks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub value: f64,
    /// `+inf` when attained at infinite frequency.
    pub omega: f64,
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, iters: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
        }
        if (hi - lo).abs() <= 1e-13 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

fn stability_form(m: &Multiplier) -> impl Fn(&Resp) -> f64 {
    let (a, x, y) = (m.vv(), m.x, m.y);
    move |r: &Resp| a * r.vw.norm_sqr() + 2.0 * y * r.vw.re - x
}

/// Entries `(p0, q, r)` of the performance form without the `-gamma^2` term.
fn performance_entries(r: &Resp, a: f64, x: f64, y: f64) -> (f64, Complex64, f64) {
    let p0 = r.zd.norm_sqr() + a * r.vd.norm_sqr();
    let q = r.zd.conj() * r.zw + r.vd.conj() * r.vw * a + r.vd.conj() * y;
    let rr = r.zw.norm_sqr() + a * r.vw.norm_sqr() + 2.0 * y * r.vw.re - x;
    (p0, q, rr)
}

fn performance_form(m: &Multiplier, gamma: f64) -> impl Fn(&Resp) -> f64 {
    let (a, x, y, g2) = (m.vv(), m.x, m.y, gamma * gamma);
    move |r: &Resp| {
        let (p0, q, rr) = performance_entries(r, a, x, y);
        let p = p0 - g2;
        0.5 * (p + rr) + (0.25 * (p - rr).powi(2) + q.norm_sqr()).sqrt()
    }
}

fn r_form(m: &Multiplier) -> impl Fn(&Resp) -> f64 {
    let (a, x, y) = (m.vv(), m.x, m.y);
    move |r: &Resp| performance_entries(r, a, x, y).2
}

/// `p0 + |q|^2 / (-r)`, the smallest admissible `gamma^2` at one frequency.
fn gamma_sq_form(m: &Multiplier) -> impl Fn(&Resp) -> f64 {
    let (a, x, y) = (m.vv(), m.x, m.y);
    move |r: &Resp| {
        let (p0, q, rr) = performance_entries(r, a, x, y);
        if rr >= 0.0 {
            f64::INFINITY
        } else {
            p0 + q.norm_sqr() / -rr
        }
    }
}

/// Refined supremum, feeding refined peaks back into a private copy of the
/// grid until the grid maximum agrees with the refinement.
fn converged_sup(data: &mut FrequencyData, phi: &dyn Fn(&Resp) -> f64) -> Result<Peak> {
    let mut last = data.refined_sup(phi)?;
    for _ in 0..MAX_AUGMENT_ROUNDS {
        let grid = data.grid_sup(phi);
        if last.0.value <= grid.value + 1e-12 * grid.value.abs().max(1.0) {
            break;
        }
        data.insert(&last.1)?;
        last = data.refined_sup(phi)?;
    }
    Ok(last.0)
}

fn check_multiplier(m: &Multiplier) -> Result<()> {
    if m.is_degenerate() {
        return Err(Error::DegenerateMultiplier);
    }
    Ok(())
}

/// `sup_omega (beta X + eta Y)|G(jw)|^2 + 2 Y Re G(jw) - X` for a stable scalar `G_vw`.
pub fn fdi_margin_stability(gvw: &StateSpace, m: &Multiplier, spec: &SearchSpec) -> Result<f64> {
    check_multiplier(m)?;
    gvw.require_hurwitz().map_err(|e| Error::Precondition(format!("G_vw is not stable: {e}")))?;
    let data = FrequencyData::from_siso(gvw, spec)?;
    Ok(data.refined_sup(&stability_form(m))?.0.value)
}

/// Same as [`fdi_margin_stability`], on a prepared cache.
pub fn fdi_margin_stability_cached(data: &FrequencyData, m: &Multiplier) -> Result<Peak> {
    check_multiplier(m)?;
    Ok(data.refined_sup(&stability_form(m))?.0)
}

/// `sup_omega lambda_max` of the performance form for `(z, v, d, w)`.
pub fn fdi_margin_performance(
    plant: &AnalysisPlant,
    m: &Multiplier,
    gamma: f64,
    spec: &SearchSpec,
) -> Result<f64> {
    if !(m.x > 0.0) {
        return Err(Error::Precondition("performance certification needs X > 0".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Precondition(format!("gamma = {gamma} must be positive")));
    }
    let data = FrequencyData::from_plant(plant, spec)?;
    Ok(data.refined_sup(&performance_form(m, gamma))?.0.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SearchStats {
    pub grid_points: usize,
    pub multipliers_scanned: usize,
    pub multiplier_refinements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationReport {
    pub feasible: bool,
    pub h: f64,
    pub delta: f64,
    pub beta: f64,
    pub eta: f64,
    pub x: f64,
    pub y: f64,
    /// `+inf` when the worst case sits at infinite frequency.
    pub worst_omega: f64,
    /// Supremum of the frequency-domain form at the chosen multiplier.
    pub margin: f64,
    /// Certified gain bound; `None` for stability reports and infeasible performance.
    pub gamma: Option<f64>,
    pub stats: SearchStats,
}

/// Minimizes a convex function of one variable on `[lo, hi]` by golden section.
fn convex_min(lo: f64, hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (x, v) = golden_max(lo, hi, iters, |x| Ok(-f(x))).expect("infallible objective");
    (x, -v)
}

/// Bracket around grid index `i` for a one-dimensional convex refinement.
fn bracket(grid: &[f64], i: usize) -> (f64, f64) {
    let lo = if i == 0 { 0.0 } else { grid[i - 1] };
    let hi = if i + 1 == grid.len() { grid[i].max(1e-3) * 10.0 } else { grid[i + 1] };
    (lo, hi)
}

/// Stability and performance certification for one `(P, F, W)` loop.
pub struct Certifier {
    pub plant: AnalysisPlant,
    pub spec: SearchSpec,
    data: FrequencyData,
}

impl Certifier {
    pub fn new(p: &StateSpace, f: &StateSpace, w: &StateSpace, spec: SearchSpec) -> Result<Self> {
        let plant = assemble_g(p, f, w)?;
        let data = FrequencyData::from_plant(&plant, &spec)?;
        Ok(Self { plant, spec, data })
    }

    pub fn frequency_data(&self) -> &FrequencyData {
        &self.data
    }

    fn stability_candidates(&self, beta: f64, eta: f64, data: &FrequencyData, stats: &mut SearchStats) -> (Multiplier, f64) {
        let ys = self.spec.y_values();
        let y_free = ys.iter().any(|y| *y > 0.0);
        let mut best: Option<(Multiplier, f64)> = None;
        let consider = |m: Multiplier, v: f64, best: &mut Option<(Multiplier, f64)>| {
            if best.is_none_or(|b| v < b.1) {
                *best = Some((m, v));
            }
        };
        let sup_at = |x: f64, y: f64| data.grid_sup(&stability_form(&Multiplier { beta, eta, x, y })).value;
        for &x in &self.spec.x_stability {
            if x > 0.0 {
                let vals: Vec<f64> = ys.iter().map(|&y| sup_at(x, y)).collect();
                stats.multipliers_scanned += ys.len();
                let i = argmin(&vals);
                let mut pick = (ys[i], vals[i]);
                if y_free && self.spec.multiplier_iters > 0 {
                    let (lo, hi) = bracket(&ys, i);
                    let (y, v) = convex_min(lo, hi, self.spec.multiplier_iters, |y| sup_at(x, y));
                    stats.multiplier_refinements += 1;
                    if v < pick.1 {
                        pick = (y, v);
                    }
                }
                consider(Multiplier { beta, eta, x, y: pick.0 }, pick.1, &mut best);
            } else if y_free {
                // X = 0: the form is homogeneous in Y, so Y = 1 represents every Y > 0
                stats.multipliers_scanned += 1;
                consider(Multiplier { beta, eta, x: 0.0, y: 1.0 }, sup_at(0.0, 1.0), &mut best);
            }
        }
        best.unwrap_or((Multiplier { beta, eta, x: 1.0, y: 0.0 }, sup_at(1.0, 0.0)))
    }

    pub fn certify_stability(&self, h: f64, delta: f64) -> Result<CertificationReport> {
        let (beta, eta) = beta_eta(&bounds_from_h_delta(h, delta)?);
        let mut data = self.data.clone_grid();
        let mut stats = SearchStats::default();
        let mut result = None;
        for _ in 0..MAX_AUGMENT_ROUNDS {
            let (m, grid_val) = self.stability_candidates(beta, eta, &data, &mut stats);
            let (peak, peaks) = data.refined_sup(&stability_form(&m))?;
            result = Some((m, peak));
            if peak.value <= grid_val + 1e-12 * grid_val.abs().max(1.0) || peaks.is_empty() {
                break;
            }
            data.insert(&peaks)?;
        }
        let (m, peak) = result.expect("at least one round");
        stats.grid_points = data.omegas.len() + 1;
        Ok(CertificationReport {
            feasible: peak.value < -eps_feas(m.x, m.y, 0.0),
            h,
            delta,
            beta,
            eta,
            x: m.x,
            y: m.y,
            worst_omega: peak.omega,
            margin: peak.value,
            gamma: None,
            stats,
        })
    }

    /// Smallest `gamma^2` certified by the multiplier `(X, Y)` on the cached grid.
    fn gamma_sq_grid(&self, data: &FrequencyData, beta: f64, eta: f64, x: f64, y: f64) -> f64 {
        let m = Multiplier { beta, eta, x, y };
        let r = data.grid_sup(&r_form(&m)).value;
        if !(r < 0.0) {
            return f64::INFINITY;
        }
        data.grid_sup(&gamma_sq_form(&m)).value
    }

    fn performance_multiplier(&self, data: &FrequencyData, beta: f64, eta: f64, stats: &mut SearchStats) -> (f64, f64, f64) {
        let xs = self.spec.sorted_x_performance();
        let ys = self.spec.y_values();
        let mut best = (xs[0], ys[0], f64::INFINITY);
        let (mut bi, mut bj) = (0, 0);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                stats.multipliers_scanned += 1;
                let g2 = self.gamma_sq_grid(data, beta, eta, x, y);
                if g2 < best.2 {
                    best = (x, y, g2);
                    bi = i;
                    bj = j;
                }
            }
        }
        if !best.2.is_finite() || self.spec.multiplier_iters == 0 {
            return best;
        }
        let y_free = ys.iter().any(|y| *y > 0.0);
        let (mut xb, mut yb) = (bracket(&xs, bi), bracket(&ys, bj));
        xb.0 = xb.0.max(xs[0] * 1e-3);
        for _ in 0..4 {
            let (x, v) = convex_min(xb.0, xb.1, self.spec.multiplier_iters, |x| {
                self.gamma_sq_grid(data, beta, eta, x, best.1)
            });
            stats.multiplier_refinements += 1;
            if v < best.2 {
                best = (x, best.1, v);
            }
            if y_free {
                let (y, v) = convex_min(yb.0, yb.1, self.spec.multiplier_iters, |y| {
                    self.gamma_sq_grid(data, beta, eta, best.0, y)
                });
                stats.multiplier_refinements += 1;
                if v < best.2 {
                    best = (best.0, y, v);
                }
                yb = (0.0f64.max(best.1 * 0.5 - 1e-6), best.1 * 2.0 + 1e-6);
            }
            xb = (best.0 * 0.5, best.0 * 2.0);
        }
        best
    }

    pub fn certify_performance(&self, h: f64, delta: f64) -> Result<CertificationReport> {
        let (beta, eta) = beta_eta(&bounds_from_h_delta(h, delta)?);
        let mut data = self.data.clone_grid();
        let mut stats = SearchStats::default();
        let mut chosen = (1.0, 0.0, f64::INFINITY);
        for _ in 0..MAX_AUGMENT_ROUNDS {
            chosen = self.performance_multiplier(&data, beta, eta, &mut stats);
            if !chosen.2.is_finite() {
                break;
            }
            let m = Multiplier { beta, eta, x: chosen.0, y: chosen.1 };
            let (r_peak, r_peaks) = data.refined_sup(&r_form(&m))?;
            let (g_peak, g_peaks) = data.refined_sup(&gamma_sq_form(&m))?;
            let grid = data.grid_sup(&gamma_sq_form(&m)).value;
            let r_grid = data.grid_sup(&r_form(&m)).value;
            let settled = g_peak.value <= grid * (1.0 + 1e-12) && r_peak.value <= r_grid + 1e-12;
            if settled {
                break;
            }
            data.insert(&r_peaks)?;
            data.insert(&g_peaks)?;
        }
        stats.grid_points = data.omegas.len() + 1;
        let (x, y, g2) = chosen;
        let m = Multiplier { beta, eta, x, y };
        let infeasible = |margin: f64, omega: f64, stats: SearchStats| CertificationReport {
            feasible: false,
            h,
            delta,
            beta,
            eta,
            x,
            y,
            worst_omega: omega,
            margin,
            gamma: None,
            stats,
        };
        if !g2.is_finite() {
            let r = data.grid_sup(&r_form(&m));
            return Ok(infeasible(r.value, r.omega, stats));
        }
        let mut gamma = g2.sqrt() * (1.0 + 0.5 * self.spec.tol_gamma);
        let mut last = Peak { value: f64::INFINITY, omega: f64::NAN };
        for _ in 0..40 {
            last = converged_sup(&mut data, &performance_form(&m, gamma))?;
            if last.value < -eps_feas(x, y, gamma) {
                return Ok(CertificationReport {
                    feasible: true,
                    h,
                    delta,
                    beta,
                    eta,
                    x,
                    y,
                    worst_omega: last.omega,
                    margin: last.value,
                    gamma: Some(gamma),
                    stats,
                });
            }
            gamma *= 1.0 + self.spec.tol_gamma;
        }
        Ok(infeasible(last.value, last.omega, stats))
    }

    /// Largest `h` with a stability certificate at asynchrony `delta`.
    pub fn max_h(&self, delta: f64) -> Result<MaxHReport> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidBounds(format!("delta = {delta} must be non-negative")));
        }
        let h_seed = 1e-6 / self.data.omega_c;
        let seed = self.certify_stability(h_seed, delta)?;
        if !seed.feasible {
            return Err(Error::NoCertificate(format!(
                "no stability certificate at h = {h_seed:e} (delta = {delta})"
            )));
        }
        let h_cap = 1e8 / self.data.omega_c;
        let (mut lo, mut lo_rep) = (h_seed, seed);
        let mut hi = h_seed * 2.0;
        loop {
            let r = self.certify_stability(hi, delta)?;
            if !r.feasible {
                break;
            }
            lo = hi;
            lo_rep = r;
            hi *= 2.0;
            if hi > h_cap {
                return Err(Error::NoCertificate(format!(
                    "stability certified for every h up to {h_cap:e}; no finite bound"
                )));
            }
        }
        while hi - lo > self.spec.tol_h * lo {
            let mid = 0.5 * (lo + hi);
            let r = self.certify_stability(mid, delta)?;
            if r.feasible {
                lo = mid;
                lo_rep = r;
            } else {
                hi = mid;
            }
        }
        let sweep: Vec<(f64, bool)> = (0..12)
            .map(|i| lo * (0.8 + 0.4 * i as f64 / 11.0))
            .map(|h| Ok((h, self.certify_stability(h, delta)?.feasible)))
            .collect::<Result<_>>()?;
        let first_bad_below = sweep.iter().find(|(h, ok)| *h <= lo && !ok).map(|p| p.0);
        let feasible_above = sweep.iter().any(|(h, ok)| *h > hi && *ok);
        let mut h_max = lo;
        let mut downgraded = false;
        if let Some(bad) = first_bad_below {
            downgraded = true;
            h_max = sweep
                .iter()
                .filter(|(h, ok)| *ok && *h < bad)
                .map(|p| p.0)
                .fold(0.0, f64::max);
            if h_max == 0.0 {
                return Err(Error::NoCertificate(format!(
                    "verification sweep below h = {lo} failed at every point"
                )));
            }
            lo_rep = self.certify_stability(h_max, delta)?;
        }
        Ok(MaxHReport {
            delta,
            h_max,
            bracket: (lo, hi),
            monotone: first_bad_below.is_none() && !feasible_above,
            downgraded,
            sweep,
            witness: lo_rep,
        })
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

impl FrequencyData {
    fn clone_grid(&self) -> Self {
        Self {
            source: match &self.source {
                Source::Plant(g) => Source::Plant(g.clone()),
                Source::Siso(g) => Source::Siso(g.clone()),
            },
            omegas: self.omegas.clone(),
            resp: self.resp.clone(),
            at_inf: self.at_inf,
            omega_c: self.omega_c,
            golden_iters: self.golden_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxHReport {
    pub delta: f64,
    pub h_max: f64,
    /// Final bisection bracket `(feasible, infeasible)`.
    pub bracket: (f64, f64),
    /// No sweep point contradicted monotone feasibility.
    pub monotone: bool,
    /// A sweep point below the bisection result failed and the result was lowered.
    pub downgraded: bool,
    pub sweep: Vec<(f64, bool)>,
    /// Certificate at `h_max`.
    pub witness: CertificationReport,
}

/// Stability certificate for `(P, F)` at `(h, delta)`.
pub fn certify_stability(p: &StateSpace, f: &StateSpace, h: f64, delta: f64, spec: &SearchSpec) -> Result<CertificationReport> {
    Certifier::new(p, f, f, spec.clone())?.certify_stability(h, delta)
}

/// Gain certificate for `d -> z = W u` at `(h, delta)`.
pub fn certify_performance(
    p: &StateSpace,
    f: &StateSpace,
    w: &StateSpace,
    h: f64,
    delta: f64,
    spec: &SearchSpec,
) -> Result<CertificationReport> {
    Certifier::new(p, f, w, spec.clone())?.certify_performance(h, delta)
}

pub fn max_h(p: &StateSpace, f: &StateSpace, delta: f64, spec: &SearchSpec) -> Result<MaxHReport> {
    Certifier::new(p, f, f, spec.clone())?.max_h(delta)
}

/// Largest eigenvalue of the LMI left-hand side for a candidate `Q`.
///
/// Without `gamma`, `g` is the scalar `G_vw` (or a two-channel plant whose
/// `w -> v` channel is used) and the stability form is assembled. With
/// `gamma`, `g` must be the `(d, w) -> (z, v)` plant and the gain form is
/// assembled. A negative value certifies feasibility with this `Q`.
pub fn lmi_eval(g: &StateSpace, m: &Multiplier, q: &DMatrix<f64>, gamma: Option<f64>) -> Result<f64> {
    let n = g.n_states();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!("Q is {}x{}, expected {n}x{n}", q.nrows(), q.ncols())));
    }
    if !linalg::is_symmetric(q, 1e-12) {
        return Err(Error::Precondition("Q must be symmetric".into()));
    }
    let mm = m.matrix();
    match gamma {
        None => {
            let s = match (g.n_outputs(), g.n_inputs()) {
                (1, 1) => g.clone(),
                (2, 2) => g.channel(1, 1),
                (o, i) => return Err(Error::Dimension(format!("stability LMI needs a 1x1 or 2x2 system, got {o}x{i}"))),
            };
            let mut lhs = DMatrix::zeros(n + 1, n + 1);
            lhs.view_mut((0, 0), (n, n)).copy_from(&(s.a.transpose() * q + q * &s.a));
            let qb = q * &s.b;
            lhs.view_mut((0, n), (n, 1)).copy_from(&qb);
            lhs.view_mut((n, 0), (1, n)).copy_from(&qb.transpose());
            // [C D; 0 1]^T M [C D; 0 1]
            let mut outer = DMatrix::zeros(2, n + 1);
            outer.view_mut((0, 0), (1, n)).copy_from(&s.c);
            outer[(0, n)] = s.d[(0, 0)];
            outer[(1, n)] = 1.0;
            let mmat = DMatrix::from_row_slice(2, 2, &[mm[0][0], mm[0][1], mm[1][0], mm[1][1]]);
            lhs += outer.transpose() * mmat * outer;
            Ok(linalg::max_sym_eigenvalue(&lhs))
        }
        Some(gamma) => {
            if g.n_outputs() != 2 || g.n_inputs() != 2 {
                return Err(Error::Dimension("gain LMI needs the (d, w) -> (z, v) plant".into()));
            }
            let mut lhs = DMatrix::zeros(n + 2, n + 2);
            lhs.view_mut((0, 0), (n, n)).copy_from(&(g.a.transpose() * q + q * &g.a));
            let qb = q * &g.b;
            lhs.view_mut((0, n), (n, 2)).copy_from(&qb);
            lhs.view_mut((n, 0), (2, n)).copy_from(&qb.transpose());
            // rows (z, v, d, w) as functions of (x, d, w)
            let mut outer = DMatrix::zeros(4, n + 2);
            outer.view_mut((0, 0), (2, n)).copy_from(&g.c);
            outer.view_mut((0, n), (2, 2)).copy_from(&g.d);
            outer[(2, n)] = 1.0;
            outer[(3, n + 1)] = 1.0;
            let mut pi = DMatrix::zeros(4, 4);
            pi[(0, 0)] = 1.0;
            pi[(1, 1)] = mm[0][0];
            pi[(1, 3)] = mm[0][1];
            pi[(3, 1)] = mm[1][0];
            pi[(3, 3)] = mm[1][1];
            pi[(2, 2)] = -gamma * gamma;
            lhs += outer.transpose() * pi * outer;
            Ok(linalg::max_sym_eigenvalue(&lhs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub delta: f64,
    pub h_max: f64,
    pub x: f64,
    pub y: f64,
    pub margin: f64,
    pub monotone: bool,
}

/// `h_max` over a list of `delta` values, in input order.
pub fn sweep_stability(certifier: &Certifier, deltas: &[f64]) -> Result<Vec<StabilityRow>> {
    deltas
        .par_iter()
        .map(|&delta| {
            let r = certifier.max_h(delta)?;
            Ok(StabilityRow {
                delta,
                h_max: r.h_max,
                x: r.witness.x,
                y: r.witness.y,
                margin: r.witness.margin,
                monotone: r.monotone,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerformanceRow {
    pub h: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub x: f64,
    pub y: f64,
}

/// Certified gains over the grid `hs x deltas`, ordered by `delta` then `h`.
pub fn sweep_performance(certifier: &Certifier, hs: &[f64], deltas: &[f64]) -> Result<Vec<PerformanceRow>> {
    let points: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| hs.iter().map(move |&h| (h, d))).collect();
    points
        .par_iter()
        .map(|&(h, delta)| {
            let r = certifier.certify_performance(h, delta)?;
            Ok(PerformanceRow { h, delta, gamma: r.gamma, x: r.x, y: r.y })
        })
        .collect()
}

pub fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut out = String::from("delta[-],h_max[s],X[-],Y[s^-1],margin[-]\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.delta, r.h_max, r.x, r.y, r.margin));
    }
    out
}

pub fn performance_csv(rows: &[PerformanceRow]) -> String {
    let mut out = String::from("h[s],delta[-],gamma[-],X[-],Y[s^-1]\n");
    for r in rows {
        let g = r.gamma.map_or_else(|| "inf".to_string(), |g| g.to_string());
        out.push_str(&format!("{},{},{},{},{}\n", r.h, r.delta, g, r.x, r.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> (StateSpace, StateSpace) {
        (
            StateSpace::from_tf(&[1.0], &[1.0, 0.0]).unwrap(),
            StateSpace::from_tf(&[1.0], &[0.1, 1.0]).unwrap(),
        )
    }

    fn gvw_ex1() -> StateSpace {
        StateSpace::from_tf(&[1.0, 0.0], &[0.1, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn stability_margin_examples() {
        let spec = SearchSpec::default();
        let pi = std::f64::consts::PI;
        for (h, expect) in [(1.5, (3.0 / pi).powi(2) - 1.0), (1.6, (3.2 / pi).powi(2) - 1.0)] {
            let b = bounds_from_h_delta(h, 0.0).unwrap();
            let m = Multiplier::from_bounds(&b, 1.0, 0.0).unwrap();
            let got = fdi_margin_stability(&gvw_ex1(), &m, &spec).unwrap();
            assert!((got - expect).abs() < 1e-9, "h = {h}: {got} vs {expect}");
        }
        let m = Multiplier::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(fdi_margin_stability(&gvw_ex1(), &m, &spec), Err(Error::DegenerateMultiplier));
        let unstable = StateSpace::siso(&[1.0], &[1.0], &[1.0], 0.0).unwrap();
        let m = Multiplier::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(fdi_margin_stability(&unstable, &m, &spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn analysis_plant_channel_matches_closed_form() {
        let (p, f) = ex1();
        let c = Certifier::new(&p, &f, &f, SearchSpec::default()).unwrap();
        let sup = c.frequency_data().refined_sup(&|r: &Resp| r.vw.norm()).unwrap().0;
        assert!((sup.value - 1.0).abs() < 1e-12);
        assert!((sup.omega - 10f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn stability_threshold_example_one() {
        let (p, f) = ex1();
        let spec = SearchSpec::default();
        assert!(certify_stability(&p, &f, 1.55, 0.0, &spec).unwrap().feasible);
        assert!(!certify_stability(&p, &f, 1.60, 0.0, &spec).unwrap().feasible);
    }

    #[test]
    fn performance_margin_examples() {
        let (p, f) = ex1();
        let plant = assemble_g(&p, &f, &f).unwrap();
        let spec = SearchSpec::default();
        let b = bounds_from_h_delta(0.01, 0.0).unwrap();
        // G_zw = G_vw here, so the w-channel entry needs X > 1 / (1 - beta)
        let unit = Multiplier::from_bounds(&b, 1.0, 0.0).unwrap();
        assert!(fdi_margin_performance(&plant, &unit, 1e3, &spec).unwrap() > 0.0);
        let m = Multiplier::from_bounds(&b, 100.0, 0.0).unwrap();
        assert!(fdi_margin_performance(&plant, &m, 1.05, &spec).unwrap() < 0.0);
        assert!(fdi_margin_performance(&plant, &m, 1e3, &spec).unwrap() < 0.0);
        for x in [1e-2, 1.0, 1e2, 1e4] {
            for y in [0.0, 0.1, 10.0] {
                let m = Multiplier::from_bounds(&b, x, y).unwrap();
                assert!(fdi_margin_performance(&plant, &m, 0.95, &spec).unwrap() > 0.0);
            }
        }
        let rep = certify_performance(&p, &f, &f, 0.01, 0.0, &spec).unwrap();
        let g = rep.gamma.unwrap();
        assert!((g - 1.0).abs() < 0.03, "{g}");
        let m = Multiplier::from_bounds(&bounds_from_h_delta(0.01, 0.0).unwrap(), rep.x, rep.y).unwrap();
        assert!(fdi_margin_performance(&plant, &m, g, &spec).unwrap() < 0.0);
    }

    #[test]
    fn lmi_toy_examples() {
        let g = StateSpace::siso(&[-1.0], &[1.0], &[0.0], 0.0).unwrap();
        let q = DMatrix::from_element(1, 1, 1.0);
        let m = Multiplier::new(0.7, 0.0, 1.0, 0.0).unwrap();
        let v = lmi_eval(&g, &m, &q, None).unwrap();
        assert!((v - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);

        let g = StateSpace::siso(&[-1.0], &[1.0], &[0.0], 1.0).unwrap();
        let m = Multiplier::new(0.5, 0.0, 1.0, 0.0).unwrap();
        let v = lmi_eval(&g, &m, &DMatrix::zeros(1, 1), None).unwrap();
        assert!(v.abs() < 1e-15);

        let g = StateSpace::siso(&[-2.0, 1.0, 0.0, -3.0], &[1.0, 1.0], &[0.5, -1.0], 0.1).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let m = Multiplier::new(0.3, 0.2, 1.0, 0.4).unwrap();
        let base = linalg::max_sym_eigenvalue(&lhs_for_scaling(&g, &m, &q));
        let scaled = lmi_eval(&g, &m.scaled(3.0), &(&q * 3.0), None).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-12);

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 0.5]);
        assert!(lmi_eval(&g, &m, &asym, None).is_err());
    }

    fn lhs_for_scaling(g: &StateSpace, m: &Multiplier, q: &DMatrix<f64>) -> DMatrix<f64> {
        // independent assembly of the stability LMI through explicit block products
        let n = g.n_states();
        let mut top = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += g.a[(k, i)] * q[(k, j)] + q[(i, k)] * g.a[(k, j)];
                }
                top[(i, j)] = s;
            }
            let qb: f64 = (0..n).map(|k| q[(i, k)] * g.b[(k, 0)]).sum();
            top[(i, n)] = qb;
            top[(n, i)] = qb;
        }
        let mm = m.matrix();
        let d = g.d[(0, 0)];
        for i in 0..=n {
            for j in 0..=n {
                let vi = if i < n { g.c[(0, i)] } else { d };
                let vj = if j < n { g.c[(0, j)] } else { d };
                let wi = if i < n { 0.0 } else { 1.0 };
                let wj = if j < n { 0.0 } else { 1.0 };
                top[(i, j)] += mm[0][0] * vi * vj + mm[0][1] * (vi * wj + wi * vj) + mm[1][1] * wi * wj;
            }
        }
        top
    }

    #[test]
    fn gain_lmi_reduces_to_quadratic_form() {
        let (p, f) = ex1();
        let plant = assemble_g(&p, &f, &f).unwrap();
        let n = plant.g.n_states();
        let m = Multiplier::new(0.2, 0.1, 1.5, 0.3).unwrap();
        let q = DMatrix::zeros(n, n);
        let v = lmi_eval(&plant.g, &m, &q, Some(2.0)).unwrap();
        assert!(v.is_finite());
        assert!(lmi_eval(&plant.g, &m, &q, None).is_ok());
        assert!(lmi_eval(&plant.g_vw(), &m, &q, Some(2.0)).is_err());
    }

    #[test]
    fn spec_grid_defaults() {
        let s = SearchSpec::default();
        assert_eq!(s.y_values().len(), 14);
        assert_eq!(s.y_values()[0], 0.0);
        assert_eq!(s.x_performance.len(), 7);
        assert!((s.x_performance[3] - 1.0).abs() < 1e-12);
        assert_eq!(s.clone().with_y_mode(YMode::Zero).y_values(), vec![0.0]);
        let bad = SearchSpec { y_grid: vec![-1.0], ..SearchSpec::default() };
        assert!(bad.validate().is_err());
    }
}
