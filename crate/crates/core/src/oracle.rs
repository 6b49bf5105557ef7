//! Deterministic click statistics computed from the no-jump propagators and
//! jump operators directly, without sampling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolution_operator, no_jump_horizon, Propagator, PropagatorConfig};
use crate::error::{Error, Result};
use crate::hilbert::{sector_dim, StateVector};
use crate::operators::{full_hamiltonian, full_jump, full_space_offset, CascadeModel, Detector, SystemParams, FULL_DIM};
use crate::par::{self, Execution};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// No-jump norm² below which the quadrature domain is cut.
pub const ORACLE_NORM_THRESHOLD: f64 = 1e-6;
/// Upper bound on the quadrature domain (κ⁻¹).
pub const ORACLE_CAP: f64 = 1e4;

fn first_click_amplitude(model: &CascadeModel, j: Detector, t: f64) -> Result<DVector<Complex64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!("click time must be >= 0, got {t}")));
    }
    let psi = evolution_operator(model.h_nh(2), t) * StateVector::initial().amplitudes();
    Ok(model.jump(j, 2)? * psi)
}

/// ‖J_j U(t)ψ₀‖², the density of the first click on `j` at `t` (units κ).
pub fn first_click_density(model: &CascadeModel, j: Detector, t: f64) -> Result<f64> {
    Ok(first_click_amplitude(model, j, t)?.norm_squared())
}

/// ‖J_{j2} U(t2−t1) J_{j1} U(t1)ψ₀‖² (units κ²).
pub fn joint_click_density(model: &CascadeModel, j1: Detector, j2: Detector, t1: f64, t2: f64) -> Result<f64> {
    if t2 < t1 || t1.is_nan() || t2.is_nan() {
        return Err(Error::InvalidParams(format!("need t1 <= t2, got t1={t1}, t2={t2}")));
    }
    let phi = first_click_amplitude(model, j1, t1)?;
    let v = model.jump(j2, 1)? * (evolution_operator(model.h_nh(1), t2 - t1) * phi);
    Ok(v.norm_squared())
}

fn simpson_weights(n: usize, h: f64) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| {
        let c = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        c * h / 3.0
    })
}

/// Probabilities of the four ordered click records.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProbabilities {
    pub p_aa: f64,
    pub p_ab: f64,
    pub p_ba: f64,
    pub p_bb: f64,
    /// Probability of no click by `t_max`.
    pub residual_no_jump: f64,
    /// Probability of a first click before `t_max` and no second click
    /// within `s_max` after it.
    pub residual_single: f64,
    pub t_max: f64,
    pub s_max: f64,
    /// Quadrature step; 0 for the closed form.
    pub step: f64,
}

impl PairProbabilities {
    pub fn get(&self, j1: Detector, j2: Detector) -> f64 {
        match (j1, j2) {
            (Detector::A, Detector::A) => self.p_aa,
            (Detector::A, Detector::B) => self.p_ab,
            (Detector::B, Detector::A) => self.p_ba,
            (Detector::B, Detector::B) => self.p_bb,
        }
    }

    pub fn p_same(&self) -> f64 {
        self.p_aa + self.p_bb
    }

    pub fn p_diff(&self) -> f64 {
        self.p_ab + self.p_ba
    }

    pub fn total(&self) -> f64 {
        self.p_same() + self.p_diff()
    }

    /// P_same / (P_same + P_diff).
    pub fn same_fraction(&self) -> f64 {
        self.p_same() / self.total()
    }

    pub fn deficit(&self) -> f64 {
        self.residual_no_jump + self.residual_single
    }

    /// Pair probabilities plus deficit; 1 up to quadrature error.
    pub fn completeness(&self) -> f64 {
        self.total() + self.deficit()
    }
}

/// Quadrature settings for [`pair_probabilities`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Range of both t1 and t2 − t1. `None`: t1 runs until the no-jump
    /// norm² falls below [`ORACLE_NORM_THRESHOLD`] and t2 − t1 until
    /// ‖U₁‖²_F does, each capped at [`ORACLE_CAP`].
    pub t_max: Option<f64>,
    /// `None`: 0.05κ⁻¹, or 0.01κ⁻¹ when |g|/κ ≥ 1.
    pub step: Option<f64>,
}

pub fn default_step(p: &SystemParams) -> f64 {
    if p.g_l.norm().max(p.g_r.norm()) >= p.kappa {
        0.01 / p.kappa
    } else {
        0.05 / p.kappa
    }
}

/// First time the sector-1 propagator has ‖U₁(s)‖²_F < `threshold`,
/// resolved to 0.5κ⁻¹ and capped at `cap`.
pub fn one_click_horizon(model: &CascadeModel, threshold: f64, cap: f64) -> f64 {
    let h1 = model.h_nh(1);
    let small = |s: f64| evolution_operator(h1, s).norm_squared() < threshold;
    let mut hi = 1.0 / model.kappa();
    while !small(hi) {
        if hi >= cap {
            return cap;
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 0.5 / model.kappa() {
        let mid = 0.5 * (lo + hi);
        if small(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.min(cap)
}

impl OracleConfig {
    /// (t1 range, t2 − t1 range, step).
    pub fn resolve(&self, model: &CascadeModel) -> Result<(f64, f64, f64)> {
        let step = self.step.unwrap_or_else(|| default_step(model.params()));
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParams(format!("oracle step must be > 0, got {step}")));
        }
        let (t_max, s_max) = match self.t_max {
            Some(t) => (t, t),
            None => (
                no_jump_horizon(model, ORACLE_NORM_THRESHOLD, 1.0 / model.kappa(), ORACLE_CAP)?,
                one_click_horizon(model, ORACLE_NORM_THRESHOLD, ORACLE_CAP),
            ),
        };
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidParams(format!("oracle t_max must be > 0, got {t_max}")));
        }
        Ok((t_max, s_max, step))
    }
}

/// Pair probabilities by composite Simpson quadrature over
/// (t1, s = t2 − t1) ∈ [0, t_max] × [0, s_max].
///
/// The double integral separates: with Q_j(T) = ∫₀ᵀ U₁(s)†J_j†J_j U₁(s) ds,
/// P(j1, j2) = ∫₀ᵀ φ(t1)† Q_{j2}(T) φ(t1) dt1, φ = J_{j1} U₂(t1) ψ₀.
pub fn pair_probabilities(model: &CascadeModel, cfg: &OracleConfig) -> Result<PairProbabilities> {
    let (t_max, s_max, step) = cfg.resolve(model)?;
    let intervals = |range: f64| {
        let n = (range / step).ceil() as usize;
        (n + n % 2).max(2)
    };
    let (n, ns) = (intervals(t_max), intervals(s_max));
    let h = t_max / n as f64;
    let hs = s_max / ns as f64;

    let u1 = evolution_operator(model.h_nh(1), hs);
    let u2 = evolution_operator(model.h_nh(2), h);
    let jj: Vec<DMatrix<Complex64>> = Detector::BOTH
        .iter()
        .map(|&d| {
            let j = model.jump(d, 1).expect("sector 1");
            j.adjoint() * j
        })
        .collect();

    let mut q = [DMatrix::<Complex64>::zeros(6, 6), DMatrix::zeros(6, 6)];
    let mut m = DMatrix::<Complex64>::identity(6, 6);
    let mut tmp = DMatrix::<Complex64>::zeros(6, 6);
    for (i, w) in simpson_weights(ns, hs).enumerate() {
        for (qj, a) in q.iter_mut().zip(&jj) {
            tmp.gemm(ONE, a, &m, ZERO);
            qj.gemm_ad(Complex64::new(w, 0.0), &m, &tmp, ONE);
        }
        if i < ns {
            m = &u1 * &m;
        }
    }
    let u1_t = m;

    let j2 = [model.jump(Detector::A, 2)?, model.jump(Detector::B, 2)?];
    let mut psi = StateVector::initial().into_amplitudes();
    let mut p = [[0.0f64; 2]; 2];
    let mut single = 0.0;
    for (i, w) in simpson_weights(n, h).enumerate() {
        for (a, j) in j2.iter().enumerate() {
            let phi = *j * &psi;
            for (b, qj) in q.iter().enumerate() {
                p[a][b] += w * (phi.adjoint() * qj * &phi)[(0, 0)].re;
            }
            single += w * (&u1_t * &phi).norm_squared();
        }
        if i < n {
            psi = &u2 * psi;
        }
    }
    Ok(PairProbabilities {
        p_aa: p[0][0],
        p_ab: p[0][1],
        p_ba: p[1][0],
        p_bb: p[1][1],
        residual_no_jump: psi.norm_squared(),
        residual_single: single,
        t_max,
        s_max,
        step: h,
    })
}

/// Solves A X − X B = C for square A, B via the vectorized Kronecker form.
fn solve_sylvester(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, c: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (n, m) = (a.nrows(), b.nrows());
    let lhs = DMatrix::<Complex64>::identity(m, m).kronecker(a) - b.transpose().kronecker(&DMatrix::identity(n, n));
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = lhs.lu().solve(&rhs).ok_or_else(|| Error::IntegratorFailure {
        time: f64::INFINITY,
        reason: "singular Sylvester system (undamped mode)".into(),
    })?;
    Ok(DMatrix::from_column_slice(n, m, x.as_slice()))
}

/// Pair probabilities integrated to t = ∞ in closed form.
///
/// Q_j = ∫₀^∞ U₁†J_j†J_j U₁ ds solves H₁†Q − QH₁ = iJ_j†J_j, and likewise
/// for the outer integral over the first click time.
pub fn pair_probabilities_closed_form(model: &CascadeModel) -> Result<PairProbabilities> {
    let h1 = model.h_nh(1);
    let h2 = model.h_nh(2);
    let psi0 = StateVector::initial().into_amplitudes();
    let mut p = [[0.0f64; 2]; 2];
    for (b, &d2) in Detector::BOTH.iter().enumerate() {
        let j = model.jump(d2, 1)?;
        let q = solve_sylvester(&h1.adjoint(), h1, &((j.adjoint() * j) * I))?;
        for (a, &d1) in Detector::BOTH.iter().enumerate() {
            let j1 = model.jump(d1, 2)?;
            let r = solve_sylvester(&h2.adjoint(), h2, &((j1.adjoint() * &q * j1) * I))?;
            p[a][b] = (psi0.adjoint() * r * &psi0)[(0, 0)].re;
        }
    }
    Ok(PairProbabilities {
        p_aa: p[0][0],
        p_ab: p[0][1],
        p_ba: p[1][0],
        p_bb: p[1][1],
        residual_no_jump: 0.0,
        residual_single: 0.0,
        t_max: f64::INFINITY,
        s_max: f64::INFINITY,
        step: 0.0,
    })
}

/// Joint click densities on a square time grid; entries with t2 < t1 are
/// zero.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDensityGrid {
    pub times: Vec<f64>,
    /// Indexed `[j1.index()][j2.index()][i1][i2]`.
    pub densities: [[Vec<Vec<f64>>; 2]; 2],
}

impl JointDensityGrid {
    /// Grid 0, h, ..., n·h. Rows are computed independently.
    pub fn compute(model: &CascadeModel, h: f64, n: usize, exec: Execution) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParams(format!("grid step must be > 0, got {h}")));
        }
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let u1 = evolution_operator(model.h_nh(1), h);
        let jumps1 = [model.jump(Detector::A, 1)?, model.jump(Detector::B, 1)?];
        let rows = par::map_indexed(n + 1, exec, |i| -> Result<[[Vec<f64>; 2]; 2]> {
            let mut out: [[Vec<f64>; 2]; 2] = Default::default();
            for d1 in Detector::BOTH {
                let mut phi = first_click_amplitude(model, d1, times[i])?;
                let mut cols = [vec![0.0; n + 1], vec![0.0; n + 1]];
                for k in i..=n {
                    for (col, j) in cols.iter_mut().zip(&jumps1) {
                        col[k] = (*j * &phi).norm_squared();
                    }
                    phi = &u1 * phi;
                }
                let [ca, cb] = cols;
                out[d1.index()] = [ca, cb];
            }
            Ok(out)
        });
        let mut densities: [[Vec<Vec<f64>>; 2]; 2] = Default::default();
        for row in rows {
            let row = row?;
            for (a, r) in row.into_iter().enumerate() {
                for (b, v) in r.into_iter().enumerate() {
                    densities[a][b].push(v);
                }
            }
        }
        Ok(JointDensityGrid { times, densities })
    }

    pub fn density(&self, j1: Detector, j2: Detector) -> &[Vec<f64>] {
        &self.densities[j1.index()][j2.index()]
    }

    /// CSV `t1,t2,p_aa,p_ab,p_ba,p_bb` over t1 ≤ t2, preceded by optional
    /// `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut writer: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t1", "t2", "p_aa", "p_ab", "p_ba", "p_bb"])?;
        let n = self.times.len();
        for i in 0..n {
            for k in i..n {
                let d = &self.densities;
                w.write_record(&[
                    format!("{}", self.times[i]),
                    format!("{}", self.times[k]),
                    format!("{:e}", d[0][0][i][k]),
                    format!("{:e}", d[0][1][i][k]),
                    format!("{:e}", d[1][0][i][k]),
                    format!("{:e}", d[1][1][i][k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Right-hand side of the master equation on the full 26-dimensional space:
/// −i[H, ρ] + Σ_j (J_j ρ J_j† − ½{J_j†J_j, ρ}).
#[derive(Clone, Debug)]
pub struct Lindbladian {
    h: DMatrix<Complex64>,
    jumps: Vec<DMatrix<Complex64>>,
    // −iH − ½ΣJ†J
    h_eff: DMatrix<Complex64>,
}

impl Lindbladian {
    pub fn new(p: &SystemParams) -> Result<Self> {
        let h = full_hamiltonian(p)?;
        let jumps = vec![full_jump(p, Detector::A)?, full_jump(p, Detector::B)?];
        let mut h_eff = &h * Complex64::new(0.0, -1.0);
        for j in &jumps {
            h_eff -= (j.adjoint() * j) * Complex64::new(0.5, 0.0);
        }
        Ok(Lindbladian { h, jumps, h_eff })
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn jumps(&self) -> &[DMatrix<Complex64>] {
        &self.jumps
    }

    /// dρ/dt.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = &self.h_eff * rho;
        out += out.adjoint();
        for j in &self.jumps {
            out += j * rho * j.adjoint();
        }
        out
    }

    /// Heisenberg-picture generator: d⟨X⟩/dt = ⟨L†(X)⟩.
    pub fn apply_adjoint(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = self.h_eff.adjoint() * x + x * &self.h_eff;
        for j in &self.jumps {
            out += j.adjoint() * x * j;
        }
        out
    }
}

fn sector_populations(rho: &DMatrix<Complex64>) -> [f64; 3] {
    let mut pops = [0.0; 3];
    for (k, pop) in pops.iter_mut().enumerate() {
        let off = full_space_offset(k);
        let dim = sector_dim(k).expect("sector 0..=2");
        *pop = (off..off + dim).map(|i| rho[(i, i)].re).sum();
    }
    pops
}

/// Master-equation evolution sampled alongside the no-jump norm².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladReport {
    pub times: Vec<f64>,
    pub trace: Vec<f64>,
    /// Population of sectors 0, 1, 2.
    pub sectors: Vec<[f64; 3]>,
    pub no_jump_norm2: Vec<f64>,
    pub step: f64,
}

impl LindbladReport {
    pub fn max_trace_error(&self) -> f64 {
        self.trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |ρ₂₂ population − ‖ψ̃‖²| over the samples.
    pub fn max_sector2_error(&self) -> f64 {
        self.sectors
            .iter()
            .zip(&self.no_jump_norm2)
            .map(|(s, n)| (s[2] - n).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates the master equation from |e₁00,e₂00⟩ to `t_max` with RK4,
/// sampling every `sample_every` steps.
///
/// Fails if the trace leaves 1 by more than 1e−8.
pub fn lindblad_check(p: &SystemParams, t_max: f64, samples: usize) -> Result<LindbladReport> {
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParams(format!("t_max must be >= 0, got {t_max}")));
    }
    let lind = Lindbladian::new(p)?;
    let model = CascadeModel::new(*p)?;
    let g = p.g_l.norm().max(p.g_r.norm()) / p.kappa;
    let base = 0.01 / (p.kappa * (1.0 + g).max(1.0 + p.delta.abs() / p.kappa));
    let samples = samples.max(1);
    let steps_per_sample = ((t_max / samples as f64) / base).ceil().max(1.0) as usize;
    let h = if t_max == 0.0 { base } else { t_max / (samples * steps_per_sample) as f64 };

    let pcfg = PropagatorConfig::default().with_dt(h * steps_per_sample as f64);
    let prop = Propagator::new(model.h_nh(2), &pcfg)?;
    let mut psi = StateVector::initial().into_amplitudes();
    let mut scratch = DVector::zeros(psi.len());

    let mut rho = DMatrix::<Complex64>::zeros(FULL_DIM, FULL_DIM);
    let i0 = full_space_offset(2);
    rho[(i0, i0)] = ONE;

    let mut report = LindbladReport {
        times: Vec::with_capacity(samples + 1),
        trace: Vec::with_capacity(samples + 1),
        sectors: Vec::with_capacity(samples + 1),
        no_jump_norm2: Vec::with_capacity(samples + 1),
        step: h,
    };
    let hc = Complex64::new(h, 0.0);
    for s in 0..=samples {
        let t = s as f64 * h * steps_per_sample as f64;
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::IntegratorFailure {
                time: t,
                reason: format!("master-equation trace drifted to {tr}"),
            });
        }
        report.times.push(t);
        report.trace.push(tr);
        report.sectors.push(sector_populations(&rho));
        report.no_jump_norm2.push(psi.norm_squared());
        if s == samples || t_max == 0.0 {
            break;
        }
        for _ in 0..steps_per_sample {
            let k1 = lind.apply(&rho);
            let k2 = lind.apply(&(&rho + &k1 * (hc * 0.5)));
            let k3 = lind.apply(&(&rho + &k2 * (hc * 0.5)));
            let k4 = lind.apply(&(&rho + &k3 * hc));
            rho += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * (hc / 6.0);
        }
        prop.step(&mut psi, &mut scratch, t)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::detection_rates;
    use approx::assert_abs_diff_eq;

    fn model(g: f64) -> CascadeModel {
        CascadeModel::new(SystemParams::symmetric(g, 0.5)).unwrap()
    }

    #[test]
    fn densities_vanish_at_origin() {
        let m = model(0.7);
        for j1 in Detector::BOTH {
            assert_eq!(first_click_density(&m, j1, 0.0).unwrap(), 0.0);
            for j2 in Detector::BOTH {
                assert_eq!(joint_click_density(&m, j1, j2, 0.0, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn joint_density_rejects_reversed_times() {
        assert!(matches!(
            joint_click_density(&model(0.7), Detector::A, Detector::B, 2.0, 1.0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn first_click_density_matches_rates() {
        let m = model(0.4);
        let cfg = PropagatorConfig::default();
        let prop = Propagator::new(m.h_nh(2), &cfg).unwrap();
        let mut psi = StateVector::initial();
        let mut scratch = DVector::zeros(19);
        for i in 0..50 {
            let t = i as f64 * 0.1;
            let (pa, pb) = detection_rates(&m, &psi);
            assert_abs_diff_eq!(first_click_density(&m, Detector::A, t).unwrap(), pa, epsilon = 1e-12);
            assert_abs_diff_eq!(first_click_density(&m, Detector::B, t).unwrap(), pb, epsilon = 1e-12);
            prop.step(psi.amplitudes_mut(), &mut scratch, t).unwrap();
        }
    }

    #[test]
    fn first_click_density_integrates_to_one() {
        let m = model(0.4);
        let n = 4000;
        let h = 0.05;
        let total: f64 = simpson_weights(n, h)
            .enumerate()
            .map(|(i, w)| {
                let t = i as f64 * h;
                w * (first_click_density(&m, Detector::A, t).unwrap() + first_click_density(&m, Detector::B, t).unwrap())
            })
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.25;
        let s: f64 = simpson_weights(8, h)
            .enumerate()
            .map(|(i, w)| {
                let x = i as f64 * h;
                w * (x * x * x - 2.0 * x + 1.0)
            })
            .sum();
        assert_abs_diff_eq!(s, 4.0 - 4.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sylvester_solution_satisfies_equation() {
        let m = model(0.6);
        let h1 = m.h_nh(1);
        let c = DMatrix::from_fn(6, 6, |i, j| Complex64::new((i + 2 * j) as f64, (i as f64) - 0.5 * j as f64));
        let x = solve_sylvester(&h1.adjoint(), h1, &c).unwrap();
        assert!((h1.adjoint() * &x - &x * h1 - c).norm() < 1e-10);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let m = model(0.25);
        let quad = pair_probabilities(&m, &OracleConfig::default()).unwrap();
        let exact = pair_probabilities_closed_form(&m).unwrap();
        assert_abs_diff_eq!(exact.total(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(quad.completeness(), 1.0, epsilon = 1e-4);
        for j1 in Detector::BOTH {
            for j2 in Detector::BOTH {
                assert_abs_diff_eq!(quad.get(j1, j2), exact.get(j1, j2), epsilon = 1e-4);
            }
        }
        assert_abs_diff_eq!(quad.p_aa, quad.p_bb, epsilon = 1e-10);
        assert_abs_diff_eq!(quad.p_ab, quad.p_ba, epsilon = 1e-10);
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let m = model(0.25);
        let coarse = pair_probabilities(&m, &OracleConfig { t_max: None, step: Some(0.1) }).unwrap();
        let fine = pair_probabilities(&m, &OracleConfig { t_max: None, step: Some(0.05) }).unwrap();
        for j1 in Detector::BOTH {
            for j2 in Detector::BOTH {
                assert!((coarse.get(j1, j2) - fine.get(j1, j2)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn truncated_domain_reports_deficit() {
        let m = model(0.25);
        let p = pair_probabilities(&m, &OracleConfig { t_max: Some(5.0), step: None }).unwrap();
        assert!(p.deficit() > 0.1);
        assert_abs_diff_eq!(p.completeness(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_matches_pointwise_density() {
        let m = model(0.8);
        let grid = JointDensityGrid::compute(&m, 0.25, 12, Execution::Parallel).unwrap();
        for (i1, i2) in [(0, 0), (2, 5), (4, 12), (11, 11)] {
            for j1 in Detector::BOTH {
                for j2 in Detector::BOTH {
                    let direct = joint_click_density(&m, j1, j2, grid.times[i1], grid.times[i2]).unwrap();
                    assert_abs_diff_eq!(grid.density(j1, j2)[i1][i2], direct, epsilon = 1e-12);
                }
            }
        }
        let seq = JointDensityGrid::compute(&m, 0.25, 12, Execution::Sequential).unwrap();
        assert_eq!(seq, grid);
        let mut buf = Vec::new();
        grid.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t1,t2,p_aa,p_ab,p_ba,p_bb"));
        assert_eq!(text.lines().count(), 1 + 13 * 14 / 2);
    }

    #[test]
    fn lindblad_trace_and_sector_two() {
        let r = lindblad_check(&SystemParams::symmetric(0.8, 0.5), 10.0, 20).unwrap();
        assert_eq!(r.times.len(), 21);
        assert!(r.max_trace_error() < 1e-12);
        assert!(r.max_sector2_error() < 1e-8, "{}", r.max_sector2_error());
    }
}
