//! No-jump propagation, click rates and equal-time joint detection densities.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::operators::{CascadeModel, Detector, SectorOperator, SystemParams};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Fixed-step integrator used for no-jump evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta.
    Rk4,
    /// Exact step exp(−iH dt), precomputed once per sector.
    Expm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "expm" => Ok(Method::Expm),
            other => Err(Error::InvalidParams(format!("unknown integrator '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// Step in units of κ⁻¹.
    pub dt: f64,
    pub method: Method,
    /// Allowed relative growth of the squared norm per step.
    pub tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            dt: 0.1,
            method: Method::Expm,
            tol: 1e-9,
        }
    }
}

impl PropagatorConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// exp(−iH t) by scaling and squaring.
pub fn evolution_operator(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    (h * (MINUS_I * t)).exp()
}

/// One RK4 step of ψ' = −iHψ. For an autonomous linear system the four
/// stages collapse to the degree-4 Taylor polynomial of exp(−iH dt).
fn rk4_step_operator(h: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let a = h * (MINUS_I * dt);
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=4 {
        term = &term * &a / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    sum
}

/// exp(−iHτ)·v without forming the matrix exponential: Taylor series in
/// substeps with ‖Hτ‖₁ ≤ 1 each.
pub fn evolve_vector(h: &DMatrix<Complex64>, v: &DVector<Complex64>, tau: f64) -> DVector<Complex64> {
    if tau == 0.0 {
        return v.clone();
    }
    let norm1 = (0..h.ncols())
        .map(|c| h.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let substeps = (norm1 * tau.abs()).ceil().max(1.0) as usize;
    let a = h * (MINUS_I * (tau / substeps as f64));
    let mut out = v.clone();
    let mut term = DVector::zeros(v.len());
    let mut next = DVector::zeros(v.len());
    for _ in 0..substeps {
        term.copy_from(&out);
        let scale = out.norm().max(f64::MIN_POSITIVE);
        for k in 1..40 {
            next.gemv(Complex64::new(1.0 / k as f64, 0.0), &a, &term, ZERO);
            std::mem::swap(&mut term, &mut next);
            out += &term;
            if term.norm() <= 1e-17 * scale {
                break;
            }
        }
    }
    out
}

/// Precomputed fixed-step no-jump propagator for one sector.
#[derive(Clone, Debug)]
pub struct Propagator {
    h: DMatrix<Complex64>,
    step: DMatrix<Complex64>,
    cfg: PropagatorConfig,
}

impl Propagator {
    pub fn new(h: &DMatrix<Complex64>, cfg: &PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        if !h.is_square() {
            return Err(Error::InvalidParams("generator must be square".into()));
        }
        Ok(Propagator {
            h: h.clone(),
            step: Self::step_matrix(h, cfg.method, cfg.dt),
            cfg: *cfg,
        })
    }

    fn step_matrix(h: &DMatrix<Complex64>, method: Method, dt: f64) -> DMatrix<Complex64> {
        match method {
            Method::Rk4 => rk4_step_operator(h, dt),
            Method::Expm => evolution_operator(h, dt),
        }
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    pub fn generator(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn step_operator(&self) -> &DMatrix<Complex64> {
        &self.step
    }

    /// Advances `v` by one step, using `scratch` as workspace. `t` is only
    /// used to label a failure.
    pub fn step(&self, v: &mut DVector<Complex64>, scratch: &mut DVector<Complex64>, t: f64) -> Result<()> {
        let before = v.norm_squared();
        scratch.gemv(ONE, &self.step, v, ZERO);
        std::mem::swap(v, scratch);
        self.check_growth(before, v.norm_squared(), t)
    }

    fn check_growth(&self, before: f64, after: f64, t: f64) -> Result<()> {
        if !after.is_finite() || after > before * (1.0 + self.cfg.tol) + f64::EPSILON * 1e-3 {
            return Err(Error::IntegratorFailure {
                time: t,
                reason: format!(
                    "squared norm grew from {before:.6e} to {after:.6e}; reduce dt (currently {})",
                    self.cfg.dt
                ),
            });
        }
        Ok(())
    }

    /// Advances `v` by an arbitrary duration: whole steps, then one partial step.
    pub fn advance(&self, v: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParams(format!("duration must be >= 0, got {t}")));
        }
        let whole = (t / self.cfg.dt).floor();
        let mut out = v.clone();
        let mut scratch = DVector::zeros(v.len());
        let mut elapsed = 0.0;
        for _ in 0..whole as u64 {
            self.step(&mut out, &mut scratch, elapsed)?;
            elapsed += self.cfg.dt;
        }
        let rest = t - whole * self.cfg.dt;
        if rest > 1e-15 * t.max(1.0) {
            let before = out.norm_squared();
            out = Self::step_matrix(&self.h, self.cfg.method, rest) * out;
            self.check_growth(before, out.norm_squared(), t)?;
        }
        Ok(out)
    }
}

/// Approximates exp(−iHt)·v for a no-jump generator H.
pub fn propagate(h: &SectorOperator, v: &StateVector, t: f64, cfg: &PropagatorConfig) -> Result<StateVector> {
    if h.source() != h.target() || h.source() != v.sector() {
        return Err(Error::SectorMismatch {
            expected: h.source(),
            found: v.sector(),
        });
    }
    let prop = Propagator::new(h.matrix(), cfg)?;
    StateVector::new(v.sector(), prop.advance(v.amplitudes(), t)?)
}

/// ‖J v‖² for a raw amplitude vector.
pub(crate) fn rate(j: &DMatrix<Complex64>, v: &DVector<Complex64>) -> f64 {
    let mut acc = 0.0;
    for r in 0..j.nrows() {
        let mut z = ZERO;
        for c in 0..j.ncols() {
            z += j[(r, c)] * v[c];
        }
        acc += z.norm_sqr();
    }
    acc
}

/// Click rates (Π_a, Π_b) = (⟨v|J_a†J_a|v⟩, ⟨v|J_b†J_b|v⟩). Zero on the vacuum.
pub fn detection_rates(model: &CascadeModel, v: &StateVector) -> (f64, f64) {
    if v.sector() == 0 {
        return (0.0, 0.0);
    }
    let k = v.sector();
    let ja = model.jump(Detector::A, k).expect("sector 1 or 2");
    let jb = model.jump(Detector::B, k).expect("sector 1 or 2");
    (rate(ja, v.amplitudes()), rate(jb, v.amplitudes()))
}

/// Equal-time joint detection rates (same detector, different detectors)
/// per unit time², from ⟨J_a†²J_a²⟩ and ⟨J_b†J_a†J_aJ_b⟩.
pub fn equal_time_rates(model: &CascadeModel, v2: &StateVector) -> Result<(f64, f64)> {
    if v2.sector() != 2 {
        return Err(Error::SectorMismatch {
            expected: 2,
            found: v2.sector(),
        });
    }
    let ja2 = model.jump(Detector::A, 2)?;
    let jb2 = model.jump(Detector::B, 2)?;
    let ja1 = model.jump(Detector::A, 1)?;
    let after_a = ja2 * v2.amplitudes();
    let after_b = jb2 * v2.amplitudes();
    Ok((rate(ja1, &after_a), rate(ja1, &after_b)))
}

/// (P2, P11): equal-time joint densities multiplied by the reporting
/// interval δT.
pub fn equal_time_densities(model: &CascadeModel, v2: &StateVector, delta_t: f64) -> Result<(f64, f64)> {
    let (p2, p11) = equal_time_rates(model, v2)?;
    Ok((p2 * delta_t, p11 * delta_t))
}

/// Equal-time densities along the pure no-jump branch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityTrace {
    pub times: Vec<f64>,
    /// Same-detector (aa) rate per unit time.
    pub p2: Vec<f64>,
    /// Different-detector (ab) rate per unit time.
    pub p11: Vec<f64>,
    /// Reporting interval δT (κ⁻¹).
    pub delta_t: f64,
}

impl DensityTrace {
    /// P2(t)·δT.
    pub fn p2_scaled(&self) -> Vec<f64> {
        self.p2.iter().map(|x| x * self.delta_t).collect()
    }

    pub fn p11_scaled(&self) -> Vec<f64> {
        self.p11.iter().map(|x| x * self.delta_t).collect()
    }

    /// Trapezoid integral of the unscaled traces over the grid.
    pub fn integrals(&self) -> (f64, f64) {
        (trapezoid(&self.times, &self.p2), trapezoid(&self.times, &self.p11))
    }

    /// CSV `t,p2,p11`, preceded by optional `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut writer: W, scaled: bool, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        let factor = if scaled { self.delta_t } else { 1.0 };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "p2", "p11"])?;
        for ((t, a), b) in self.times.iter().zip(&self.p2).zip(&self.p11) {
            w.write_record(&[format!("{t:.6}"), format!("{:.12e}", a * factor), format!("{:.12e}", b * factor)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// P2(t), P11(t) on the grid 0, dt, 2dt, … ≤ t_max starting from |e₁00,e₂00⟩
/// with no jumps applied.
pub fn density_scan(p: &SystemParams, cfg: &PropagatorConfig, t_max: f64, delta_t: f64) -> Result<DensityTrace> {
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParams(format!("t_max must be >= 0, got {t_max}")));
    }
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(Error::InvalidParams(format!("delta_T must be > 0, got {delta_t}")));
    }
    let model = CascadeModel::new(*p)?;
    let prop = Propagator::new(model.h_nh(2), cfg)?;
    let n = (t_max / cfg.dt + 1e-9).floor() as usize;
    let mut psi = StateVector::initial();
    let mut scratch = DVector::zeros(psi.dim());
    let mut trace = DensityTrace {
        times: Vec::with_capacity(n + 1),
        p2: Vec::with_capacity(n + 1),
        p11: Vec::with_capacity(n + 1),
        delta_t,
    };
    for i in 0..=n {
        let t = i as f64 * cfg.dt;
        let (p2, p11) = equal_time_rates(&model, &psi)?;
        trace.times.push(t);
        trace.p2.push(p2);
        trace.p11.push(p11);
        if i < n {
            prop.step(psi.amplitudes_mut(), &mut scratch, t)?;
        }
    }
    Ok(trace)
}

/// Step for fine quadrature of sector dynamics: resolves both the cavity
/// scale κ and vacuum Rabi oscillations at |g|.
pub fn resolving_step(p: &SystemParams, base: f64) -> f64 {
    base / p.coupling_ratio().max(1.0)
}

/// Conditional sector-1 density matrix S(t) (summed over which detector
/// clicked first) alongside the sector-2 no-jump state.
///
/// The probability of having seen fewer than two clicks by t is
/// ‖ψ(t)‖² + Tr S(t).
pub struct SectorMassTracker<'a> {
    model: &'a CascadeModel,
    h: f64,
    u2_half: DMatrix<Complex64>,
    u1: DMatrix<Complex64>,
    u1_half: DMatrix<Complex64>,
    psi: DVector<Complex64>,
    s: DMatrix<Complex64>,
    steps: u64,
}

impl<'a> SectorMassTracker<'a> {
    pub fn new(model: &'a CascadeModel, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParams(format!("step must be > 0, got {h}")));
        }
        Ok(SectorMassTracker {
            model,
            h,
            u2_half: evolution_operator(model.h_nh(2), h / 2.0),
            u1: evolution_operator(model.h_nh(1), h),
            u1_half: evolution_operator(model.h_nh(1), h / 2.0),
            psi: StateVector::initial().into_amplitudes(),
            s: DMatrix::zeros(6, 6),
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.h
    }

    pub fn no_jump_norm2(&self) -> f64 {
        self.psi.norm_squared()
    }

    pub fn single_click_mass(&self) -> f64 {
        self.s.trace().re
    }

    /// Probability of fewer than two clicks so far.
    pub fn undetected_mass(&self) -> f64 {
        self.no_jump_norm2() + self.single_click_mass()
    }

    fn add_source(&self, target: &mut DMatrix<Complex64>, psi: &DVector<Complex64>, u: Option<&DMatrix<Complex64>>, w: f64) {
        for d in Detector::BOTH {
            let j = self.model.jump(d, 2).expect("sector 2");
            let mut phi = j * psi;
            if let Some(u) = u {
                phi = u * phi;
            }
            target.ger(Complex64::new(w, 0.0), &phi, &phi.conjugate(), ONE);
        }
    }

    /// Simpson step of the sector-1 source, exact propagation otherwise.
    pub fn step(&mut self) {
        let h = self.h;
        let psi_mid = &self.u2_half * &self.psi;
        let psi_end = &self.u2_half * &psi_mid;
        let mut acc = self.s.clone();
        self.add_source(&mut acc, &self.psi.clone(), None, h / 6.0);
        let mut next = &self.u1 * acc * self.u1.adjoint();
        self.add_source(&mut next, &psi_mid, Some(&self.u1_half), 4.0 * h / 6.0);
        self.add_source(&mut next, &psi_end, None, h / 6.0);
        self.s = next;
        self.psi = psi_end;
        self.steps += 1;
    }
}

/// First time at which the probability of fewer than two clicks is below
/// `threshold`, capped at `cap`.
///
/// Sector mass is tracked with fine steps until the no-jump norm² falls
/// under threshold/2; beyond that the remaining source can add at most
/// ‖ψ‖², so the horizon is bracketed by propagating S alone with doubling
/// steps.
pub fn completion_horizon(model: &CascadeModel, threshold: f64, cap: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParams(format!("threshold must lie in (0,1), got {threshold}")));
    }
    let h = resolving_step(model.params(), 0.05);
    let mut tracker = SectorMassTracker::new(model, h)?;
    while tracker.no_jump_norm2() >= threshold / 2.0 {
        if tracker.undetected_mass() < threshold {
            return Ok(tracker.time());
        }
        if tracker.time() >= cap {
            return Ok(cap);
        }
        tracker.step();
    }
    let t0 = tracker.time();
    let slack = tracker.no_jump_norm2();
    let s0 = tracker.s.clone();
    let h1 = model.h_nh(1);
    let bound = |tau: f64| {
        let u = evolution_operator(h1, tau);
        (&u * &s0 * u.adjoint()).trace().re + slack
    };
    if bound(0.0) < threshold {
        return Ok(t0);
    }
    let mut hi = 1.0;
    while bound(hi) >= threshold {
        if t0 + hi >= cap {
            return Ok(cap);
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 0.5 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) < threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((t0 + hi).min(cap))
}

/// First time at which the no-jump norm² drops below `threshold`, scanned
/// in steps of `step`, capped at `cap`.
pub fn no_jump_horizon(model: &CascadeModel, threshold: f64, step: f64, cap: f64) -> Result<f64> {
    let u = evolution_operator(model.h_nh(2), step);
    let mut psi = StateVector::initial().into_amplitudes();
    let mut t = 0.0;
    while psi.norm_squared() >= threshold {
        if t >= cap {
            return Ok(cap);
        }
        psi = &u * psi;
        t += step;
    }
    Ok(t)
}
