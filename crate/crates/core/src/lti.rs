//! State-space algebra for the continuous-time blocks of the feedback loop:
//! construction, stability margins, frequency response, H-infinity norm and
//! the four-channel analysis plant `(d, w) -> (z, v)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Systems with `max Re(lambda)` in `[-STABILITY_MARGIN, 0]` count as marginal.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Relative tolerance of [`hinf_norm`].
pub const TOL_HINF: f64 = 1e-6;

/// Absolute tolerance for transfer-function identities.
pub const TOL_TF: f64 = 1e-9;

/// A real state-space realization `(A, B, C, D)`.
///
/// `n = 0` encodes a static gain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, not square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::Precondition("non-finite entry in realization".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// SISO realization from row-major slices.
    pub fn siso(a: &[f64], b: &[f64], c: &[f64], d: f64) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n || c.len() != n {
            return Err(Error::Dimension(format!(
                "SISO slices: |A| = {}, |B| = {}, |C| = {}",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(n, n, a),
            DMatrix::from_column_slice(n, 1, b),
            DMatrix::from_row_slice(1, n, c),
            DMatrix::from_element(1, 1, d),
        )
    }

    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    /// Controllable canonical form of `num(s) / den(s)`, coefficients in
    /// descending powers of `s`.
    pub fn from_tf(num: &[f64], den: &[f64]) -> Result<Self> {
        let den = strip_leading_zeros(den);
        let num = strip_leading_zeros(num);
        if den.is_empty() {
            return Err(Error::Precondition("denominator is identically zero".into()));
        }
        if num.len() > den.len() {
            return Err(Error::Precondition(format!(
                "improper transfer function: numerator degree {} > denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        let lead = den[0];
        let n = den.len() - 1;
        let a_coef: Vec<f64> = den[1..].iter().map(|x| x / lead).collect();
        // numerator padded to n + 1 coefficients
        let mut b_coef = vec![0.0; n + 1 - num.len()];
        b_coef.extend(num.iter().map(|x| x / lead));
        let d0 = b_coef[0];
        if n == 0 {
            return Ok(Self::static_gain(DMatrix::from_element(1, 1, d0)));
        }
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -a_coef[j];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = b_coef[j + 1] - a_coef[j] * d0;
        }
        Self::new(a, b, c, DMatrix::from_element(1, 1, d0))
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.n_inputs() == 1 && self.n_outputs() == 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|x| *x == 0.0)
    }

    /// `true` when the realization is a static gain or `max Re(lambda) < -STABILITY_MARGIN`.
    pub fn is_hurwitz(&self) -> Result<bool> {
        if self.n_states() == 0 {
            return Ok(true);
        }
        Ok(hurwitz_margin(self)? < -STABILITY_MARGIN)
    }

    pub fn require_hurwitz(&self) -> Result<()> {
        if self.n_states() == 0 {
            return Ok(());
        }
        let margin = hurwitz_margin(self)?;
        if margin < -STABILITY_MARGIN {
            Ok(())
        } else {
            Err(Error::NotHurwitz { margin })
        }
    }

    /// Sub-system from input `input` to output `output`.
    pub fn channel(&self, output: usize, input: usize) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b.columns(input, 1).into_owned(),
            c: self.c.rows(output, 1).into_owned(),
            d: DMatrix::from_element(1, 1, self.d[(output, input)]),
        }
    }

    /// Frequency response of a SISO system.
    pub fn eval_siso(&self, omega: f64) -> Result<Complex64> {
        Ok(freq_response(self, omega)?[(0, 0)])
    }
}

fn strip_leading_zeros(c: &[f64]) -> &[f64] {
    let first = c.iter().position(|x| *x != 0.0).unwrap_or(c.len());
    &c[first..]
}

/// `max Re(lambda)` over the eigenvalues of `A`.
pub fn hurwitz_margin(sys: &StateSpace) -> Result<f64> {
    if sys.n_states() == 0 {
        return Err(Error::Precondition("hurwitz_margin needs at least one state".into()));
    }
    let eigs = linalg::eigenvalues(&sys.a)?;
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Realization of `s F(s)` for strictly proper, stable `F`:
/// `(A, B, C A, C B)`.
pub fn derivative_compose(f: &StateSpace) -> Result<StateSpace> {
    if !f.is_strictly_proper() {
        return Err(Error::Precondition(
            "derivative of non-strictly-proper block".into(),
        ));
    }
    f.require_hurwitz()?;
    StateSpace::new(f.a.clone(), f.b.clone(), &f.c * &f.a, &f.c * &f.b)
}

/// `C (j omega I - A)^{-1} B + D`; `omega = +inf` returns `D` exactly.
pub fn freq_response(sys: &StateSpace, omega: f64) -> Result<DMatrix<Complex64>> {
    let dc = linalg::to_complex(&sys.d);
    if omega.is_infinite() || sys.n_states() == 0 {
        return Ok(dc);
    }
    let n = sys.n_states();
    let mut m = linalg::to_complex(&sys.a) * Complex64::new(-1.0, 0.0);
    for i in 0..n {
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    let x = linalg::solve_complex(m, &linalg::to_complex(&sys.b))
        .ok_or(Error::PoleOnAxis { omega })?;
    Ok(linalg::to_complex(&sys.c) * x + dc)
}

/// Result of an H-infinity norm computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub norm: f64,
    /// Frequency (rad/time) at which the norm is attained; `+inf` for the feedthrough.
    pub peak_omega: f64,
}

/// H-infinity norm of a stable system.
///
/// Level-set iteration on the Hamiltonian test: `gamma` exceeds the norm iff
/// the Hamiltonian built for `gamma` has no imaginary-axis eigenvalues. Each
/// crossing set of frequencies raises the certified lower bound until the
/// upper level `(1 + TOL_HINF) * lower` produces no crossings.
pub fn hinf_norm(sys: &StateSpace) -> Result<HinfNorm> {
    let sigma_at = |w: f64| -> Result<f64> { Ok(linalg::sigma_max(&freq_response(sys, w)?)) };

    let mut best = HinfNorm {
        norm: sigma_at(f64::INFINITY)?,
        peak_omega: f64::INFINITY,
    };
    if sys.n_states() == 0 {
        return Ok(best);
    }
    sys.require_hurwitz()?;

    let mut candidates = vec![0.0];
    for lam in linalg::eigenvalues(&sys.a)? {
        let w = lam.norm();
        if w > 0.0 {
            candidates.push(w);
        }
        if lam.im.abs() > 0.0 {
            candidates.push(lam.im.abs());
        }
    }
    for w in candidates {
        let s = sigma_at(w)?;
        if s > best.norm {
            best = HinfNorm { norm: s, peak_omega: w };
        }
    }
    if best.norm == 0.0 {
        // G has no detectable gain at probe frequencies; fall back to a tiny level.
        best.norm = f64::MIN_POSITIVE.sqrt();
    }

    for _ in 0..200 {
        let gamma = best.norm * (1.0 + TOL_HINF / 2.0);
        let crossings = imaginary_crossings(sys, gamma)?;
        if crossings.is_empty() {
            return Ok(best);
        }
        let before = best.norm;
        let mut probes = crossings.clone();
        for pair in crossings.windows(2) {
            probes.push(0.5 * (pair[0] + pair[1]));
        }
        for w in probes {
            let s = sigma_at(w)?;
            if s > best.norm {
                best = HinfNorm { norm: s, peak_omega: w };
            }
        }
        if best.norm <= before * (1.0 + TOL_HINF / 4.0) {
            // Crossings did not reveal a higher level: spurious near-axis eigenvalues.
            return Ok(best);
        }
    }
    Err(Error::Numeric {
        what: "H-infinity level-set iteration did not terminate".into(),
        residual: best.norm,
    })
}

/// Sorted non-negative frequencies at which `sigma_max(G(j omega)) = gamma`.
fn imaginary_crossings(sys: &StateSpace, gamma: f64) -> Result<Vec<f64>> {
    let n = sys.n_states();
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let m = d.ncols();
    let p = d.nrows();
    let r = DMatrix::<f64>::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let r_inv = r.try_inverse().ok_or_else(|| Error::Numeric {
        what: "gamma^2 I - D'D is singular".into(),
        residual: gamma,
    })?;
    let a_h = a + b * &r_inv * d.transpose() * c;
    let top_right = b * &r_inv * b.transpose();
    let bottom_left =
        -(c.transpose() * (DMatrix::<f64>::identity(p, p) + d * &r_inv * d.transpose()) * c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));

    let eigs = linalg::eigenvalues(&h)?;
    let mut ws: Vec<f64> = eigs
        .iter()
        .filter(|z| z.re.abs() <= 1e-7 * z.norm().max(1.0) && z.im >= 0.0)
        .map(|z| z.im)
        .collect();
    ws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ws.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
    Ok(ws)
}

/// The four-channel plant with inputs `(d, w)` and outputs `(z, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlant {
    pub g: StateSpace,
    /// State counts of the P, F and W blocks in the augmented state.
    pub n_p: usize,
    pub n_f: usize,
    pub n_w: usize,
}

impl AnalysisPlant {
    pub const INPUT_LABELS: [&'static str; 2] = ["d", "w"];
    pub const OUTPUT_LABELS: [&'static str; 2] = ["z", "v"];

    pub fn g_zd(&self) -> StateSpace {
        self.g.channel(0, 0)
    }
    pub fn g_zw(&self) -> StateSpace {
        self.g.channel(0, 1)
    }
    pub fn g_vd(&self) -> StateSpace {
        self.g.channel(1, 0)
    }
    pub fn g_vw(&self) -> StateSpace {
        self.g.channel(1, 1)
    }
}

fn require_siso(name: &str, sys: &StateSpace) -> Result<()> {
    if sys.is_siso() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{name} must be SISO, got {}x{}",
            sys.n_outputs(),
            sys.n_inputs()
        )))
    }
}

/// Builds `(d, w) -> (z, v)` with `u = d + w - F y`, `y = P u`,
/// `v = (s F) y` and `z = W u` by stacking the states `(x_P, x_F, x_W)`.
pub fn assemble_g(p: &StateSpace, f: &StateSpace, w: &StateSpace) -> Result<AnalysisPlant> {
    require_siso("P", p)?;
    require_siso("F", f)?;
    require_siso("W", w)?;
    if !f.is_strictly_proper() {
        return Err(Error::AlgebraicLoop("F must be strictly proper".into()));
    }
    f.require_hurwitz()?;
    w.require_hurwitz()?;
    let df = derivative_compose(f)?;

    let (np, nf, nw) = (p.n_states(), f.n_states(), w.n_states());
    let n = np + nf + nw;
    let (ap, bp, cp, dp) = (&p.a, &p.b, &p.c, p.d[(0, 0)]);
    let (af, bf, cf) = (&f.a, &f.b, &f.c);
    let (aw, bw, cw, dw) = (&w.a, &w.b, &w.c, w.d[(0, 0)]);

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 2);
    let mut c = DMatrix::zeros(2, n);
    let mut d = DMatrix::zeros(2, 2);

    // x_P' = A_p x_P + B_p (d + w - C_f x_F)
    a.view_mut((0, 0), (np, np)).copy_from(ap);
    a.view_mut((0, np), (np, nf)).copy_from(&(-(bp * cf)));
    // x_F' = A_f x_F + B_f y,  y = C_p x_P + D_p (d + w - C_f x_F)
    a.view_mut((np, 0), (nf, np)).copy_from(&(bf * cp));
    a.view_mut((np, np), (nf, nf)).copy_from(&(af - bf * cf * dp));
    // x_W' = A_w x_W + B_w (d + w - C_f x_F)
    a.view_mut((np + nf, np), (nw, nf)).copy_from(&(-(bw * cf)));
    a.view_mut((np + nf, np + nf), (nw, nw)).copy_from(aw);

    for col in 0..2 {
        b.view_mut((0, col), (np, 1)).copy_from(bp);
        b.view_mut((np, col), (nf, 1)).copy_from(&(bf * dp));
        b.view_mut((np + nf, col), (nw, 1)).copy_from(bw);
    }

    // z = C_w x_W + D_w (d + w - C_f x_F)
    c.view_mut((0, np), (1, nf)).copy_from(&(-(cf * dw)));
    c.view_mut((0, np + nf), (1, nw)).copy_from(cw);
    // v = C_f A_f x_F + C_f B_f y
    let cfbf = df.d[(0, 0)];
    c.view_mut((1, 0), (1, np)).copy_from(&(cp * cfbf));
    c.view_mut((1, np), (1, nf)).copy_from(&(&df.c - cf * (cfbf * dp)));

    for col in 0..2 {
        d[(0, col)] = dw;
        d[(1, col)] = cfbf * dp;
    }

    let g = StateSpace::new(a, b, c, d)?;
    if n > 0 {
        let margin = hurwitz_margin(&g)?;
        if margin >= -STABILITY_MARGIN {
            return Err(Error::NominalUnstable { margin });
        }
    }
    Ok(AnalysisPlant { g, n_p: np, n_f: nf, n_w: nw })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag() -> StateSpace {
        StateSpace::siso(&[-10.0], &[1.0], &[10.0], 0.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn margins_of_small_matrices() {
        let s = StateSpace::siso(&[-1.0], &[1.0], &[1.0], 0.0).unwrap();
        assert_eq!(hurwitz_margin(&s).unwrap(), -1.0);
        let s = StateSpace::siso(&[0.0, 1.0, -1.0, -2.0], &[0.0, 1.0], &[1.0, 0.0], 0.0).unwrap();
        assert!(close(hurwitz_margin(&s).unwrap(), -1.0, 1e-6));
        let s = StateSpace::siso(&[0.0], &[1.0], &[1.0], 0.0).unwrap();
        assert_eq!(hurwitz_margin(&s).unwrap(), 0.0);
        assert!(!s.is_hurwitz().unwrap());
    }

    #[test]
    fn margin_is_deterministic() {
        let s = StateSpace::siso(&[0.0, 1.0, -3.0, -0.4], &[0.0, 1.0], &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(hurwitz_margin(&s).unwrap(), hurwitz_margin(&s).unwrap());
    }

    #[test]
    fn derivative_of_lags() {
        let d = derivative_compose(&lag()).unwrap();
        assert_eq!(d, StateSpace::siso(&[-10.0], &[1.0], &[-100.0], 10.0).unwrap());
        let f = StateSpace::siso(&[-1.0], &[1.0], &[1.0], 0.0).unwrap();
        let d = derivative_compose(&f).unwrap();
        assert_eq!(d, StateSpace::siso(&[-1.0], &[1.0], &[-1.0], 1.0).unwrap());
        let bad = StateSpace::siso(&[-1.0], &[1.0], &[1.0], 0.5).unwrap();
        assert!(matches!(derivative_compose(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn frequency_response_examples() {
        assert!(close(lag().eval_siso(0.0).unwrap().re, 1.0, 1e-15));
        let g = StateSpace::from_tf(&[1.0, 0.0], &[0.1, 1.0, 1.0]).unwrap();
        assert!(close(g.eval_siso(10f64.sqrt()).unwrap().norm(), 1.0, 1e-12));
        let h = StateSpace::siso(&[-2.0], &[1.0], &[1.0], 0.25).unwrap();
        assert_eq!(h.eval_siso(f64::INFINITY).unwrap(), Complex64::new(0.25, 0.0));
    }

    #[test]
    fn pole_on_axis_is_reported() {
        let integ = StateSpace::siso(&[0.0], &[1.0], &[1.0], 0.0).unwrap();
        assert!(matches!(freq_response(&integ, 0.0), Err(Error::PoleOnAxis { .. })));
    }

    #[test]
    fn tf_conversion_matches_rational_evaluation() {
        let num = [0.9 * 0.05, -0.9];
        let den = [1.0, 2.0, 1.0];
        let g = StateSpace::from_tf(&num, &den).unwrap();
        for &w in &[0.0, 0.3, 1.0, 7.0] {
            let s = Complex64::new(0.0, w);
            let expect = (s * num[0] + num[1]) / (s * s * den[0] + s * den[1] + den[2]);
            assert!((g.eval_siso(w).unwrap() - expect).norm() < 1e-14);
        }
        let biproper = StateSpace::from_tf(&[2.0, 3.0], &[1.0, 4.0]).unwrap();
        assert_eq!(biproper.d[(0, 0)], 2.0);
        assert!(StateSpace::from_tf(&[1.0, 0.0, 0.0], &[1.0, 1.0]).is_err());
        let gain = StateSpace::from_tf(&[3.0], &[2.0]).unwrap();
        assert_eq!(gain.n_states(), 0);
        assert_eq!(gain.d[(0, 0)], 1.5);
    }

    #[test]
    fn hinf_examples() {
        let n = hinf_norm(&lag()).unwrap();
        assert!(close(n.norm, 1.0, 1e-6));
        assert_eq!(n.peak_omega, 0.0);
        let g = StateSpace::from_tf(&[1.0, 0.0], &[0.1, 1.0, 1.0]).unwrap();
        let n = hinf_norm(&g).unwrap();
        assert!(close(n.norm, 1.0, 1e-6));
        assert!(close(n.peak_omega, 10f64.sqrt(), 1e-2));
        let integ = StateSpace::siso(&[0.0], &[1.0], &[1.0], 0.0).unwrap();
        assert!(matches!(hinf_norm(&integ), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn hinf_of_resonant_system() {
        // 1 / (s^2 + 0.2 s + 1): peak 1/(2 zeta sqrt(1 - zeta^2)) at sqrt(1 - 2 zeta^2)
        let g = StateSpace::from_tf(&[1.0], &[1.0, 0.2, 1.0]).unwrap();
        let zeta: f64 = 0.1;
        let n = hinf_norm(&g).unwrap();
        let expect = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        assert!((n.norm - expect).abs() / expect < 1e-6);
        assert!(close(n.peak_omega, (1.0 - 2.0 * zeta * zeta).sqrt(), 1e-3));
    }

    #[test]
    fn example_one_plant() {
        let p = StateSpace::from_tf(&[1.0], &[1.0, 0.0]).unwrap();
        let f = StateSpace::from_tf(&[1.0], &[0.1, 1.0]).unwrap();
        let g = assemble_g(&p, &f, &f).unwrap();
        assert!(hurwitz_margin(&g.g).unwrap() < 0.0);
        let target = StateSpace::from_tf(&[1.0, 0.0], &[0.1, 1.0, 1.0]).unwrap();
        for k in 0..50 {
            let w = 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
            let a = g.g_vw().eval_siso(w).unwrap();
            let b = target.eval_siso(w).unwrap();
            assert!((a - b).norm() < TOL_TF, "w = {w}: {a} vs {b}");
        }
        assert!(close(hinf_norm(&g.g_vw()).unwrap().norm, 1.0, 1e-6));
    }

    #[test]
    fn unstable_nominal_loop_is_rejected() {
        let p = StateSpace::from_tf(&[1.0], &[1.0, 0.0]).unwrap();
        let f = StateSpace::from_tf(&[-1.0], &[0.1, 1.0]).unwrap();
        assert!(matches!(assemble_g(&p, &f, &f), Err(Error::NominalUnstable { .. })));
    }

    #[test]
    fn biproper_filter_is_an_algebraic_loop() {
        let p = StateSpace::from_tf(&[1.0], &[1.0, 0.0]).unwrap();
        let f = StateSpace::from_tf(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(matches!(assemble_g(&p, &f, &f), Err(Error::AlgebraicLoop(_))));
    }
}
