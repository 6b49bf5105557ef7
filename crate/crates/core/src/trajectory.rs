//! Quantum-jump sampling of photodetection records.
//!
//! A trajectory starts in |e₁00,e₂00⟩, evolves under the no-jump generator
//! and is interrupted by clicks on detector a or b. Each click applies the
//! matching jump operator and lowers the excitation number; the trajectory
//! ends after the second click or at `t_max`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{completion_horizon, evolve_vector, rate, Method, Propagator, PropagatorConfig};
use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::operators::{CascadeModel, Detector, SystemParams};
use crate::par::{self, Execution};

/// Probability of fewer than two clicks left at the adaptive `t_max`.
pub const HORIZON_THRESHOLD: f64 = 1e-4;
/// Upper bound on the adaptive `t_max` (κ⁻¹).
pub const HORIZON_CAP: f64 = 1e5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub detector: Detector,
    /// Click time in units of κ⁻¹.
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Clicks in time order; at most two.
    pub clicks: Vec<ClickEvent>,
    /// Squared norm of the no-jump state of the segment in progress at
    /// termination (0 once both photons are detected).
    pub residual_norm2: f64,
    /// Click probability consumed during that same segment.
    pub click_mass: f64,
    /// `t_max` was reached before the second click.
    pub censored: bool,
}

impl TrajectoryResult {
    pub fn is_complete(&self) -> bool {
        self.clicks.len() == 2
    }

    /// Both clicks on the same detector (aa or bb). `None` unless complete.
    pub fn same_detector(&self) -> Option<bool> {
        self.is_complete()
            .then(|| self.clicks[0].detector == self.clicks[1].detector)
    }

    /// T₂ − T₁. `None` unless complete.
    pub fn waiting_time(&self) -> Option<f64> {
        self.is_complete()
            .then(|| self.clicks[1].time - self.clicks[0].time)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpSampling {
    /// Bernoulli trial with probability (Π_a+Π_b)·dt per step; click times
    /// are resolved to dt.
    FirstOrder,
    /// Draw u, evolve until ‖ψ̃‖² = u, then jump; continuous click times.
    NormThreshold,
}

impl std::str::FromStr for JumpSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-order" => Ok(JumpSampling::FirstOrder),
            "norm-threshold" => Ok(JumpSampling::NormThreshold),
            other => Err(Error::InvalidParams(format!("unknown jump sampling '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// Step in units of κ⁻¹.
    pub dt: f64,
    /// Cutoff in units of κ⁻¹; `None` picks the time at which fewer than two
    /// clicks has probability below [`HORIZON_THRESHOLD`].
    pub t_max: Option<f64>,
    pub seed: u64,
    pub jump_sampling: JumpSampling,
    pub method: Method,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_traj: 10_000,
            dt: 0.1,
            t_max: None,
            seed: 20_130_801,
            jump_sampling: JumpSampling::FirstOrder,
            method: Method::Expm,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidParams("n_traj must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParams(format!("t_max must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    fn propagator_config(&self) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.dt,
            method: self.method,
            ..PropagatorConfig::default()
        }
    }
}

/// Random stream of trajectory `index`: the same (seed, index) always yields
/// the same numbers regardless of scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Applies the jump of `detector` and renormalizes.
pub fn collapse(model: &CascadeModel, v: &StateVector, detector: Detector) -> Result<StateVector> {
    if v.sector() == 0 {
        return Err(Error::ImpossibleJump {
            detector: detector.label(),
        });
    }
    let j = model.jump(detector, v.sector())?;
    let mut out = StateVector::new(v.sector() - 1, j * v.amplitudes())?;
    let pi = out.normalize();
    if pi <= 0.0 || !pi.is_finite() {
        return Err(Error::ImpossibleJump {
            detector: detector.label(),
        });
    }
    Ok(out)
}

/// Prebuilt operators and step propagators for one parameter set.
#[derive(Clone, Debug)]
pub struct TrajectorySimulator {
    model: CascadeModel,
    // index k-1 for sectors 1, 2
    props: [Propagator; 2],
    cfg: EnsembleConfig,
    t_max: f64,
}

struct Segment {
    psi: StateVector,
    weight: f64,
    consumed: f64,
}

impl Segment {
    fn new(psi: StateVector) -> Self {
        Segment {
            psi,
            weight: 1.0,
            consumed: 0.0,
        }
    }
}

impl TrajectorySimulator {
    pub fn new(params: &SystemParams, cfg: &EnsembleConfig) -> Result<Self> {
        cfg.validate()?;
        let model = CascadeModel::new(*params)?;
        let pcfg = cfg.propagator_config();
        let props = [
            Propagator::new(model.h_nh(1), &pcfg)?,
            Propagator::new(model.h_nh(2), &pcfg)?,
        ];
        let t_max = match cfg.t_max {
            Some(t) => t,
            None => completion_horizon(&model, HORIZON_THRESHOLD, HORIZON_CAP)?.max(cfg.dt),
        };
        Ok(TrajectorySimulator {
            model,
            props,
            cfg: *cfg,
            t_max,
        })
    }

    pub fn model(&self) -> &CascadeModel {
        &self.model
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    fn rates(&self, v: &DVector<Complex64>, k: usize) -> (f64, f64) {
        let ja = self.model.jump(Detector::A, k).expect("sector 1 or 2");
        let jb = self.model.jump(Detector::B, k).expect("sector 1 or 2");
        (rate(ja, v), rate(jb, v))
    }

    /// Trajectory number `index` of the ensemble.
    pub fn run_index(&self, index: u64) -> Result<TrajectoryResult> {
        self.run(&mut trajectory_rng(self.cfg.seed, index))
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrajectoryResult> {
        match self.cfg.jump_sampling {
            JumpSampling::FirstOrder => self.run_first_order(rng),
            JumpSampling::NormThreshold => self.run_norm_threshold(rng),
        }
    }

    fn finish(clicks: Vec<ClickEvent>, seg: Option<&Segment>) -> TrajectoryResult {
        let censored = clicks.len() < 2;
        let (residual_norm2, click_mass) = match seg {
            Some(s) if censored => (s.weight, s.consumed),
            _ => (0.0, 0.0),
        };
        TrajectoryResult {
            clicks,
            residual_norm2,
            click_mass,
            censored,
        }
    }

    fn run_first_order<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrajectoryResult> {
        let dt = self.cfg.dt;
        let max_steps = (self.t_max / dt - 1e-9).ceil() as u64;
        let mut seg = Segment::new(StateVector::initial());
        let mut scratch = DVector::zeros(19);
        let mut clicks = Vec::with_capacity(2);
        let mut n = 0u64;
        while clicks.len() < 2 {
            if n >= max_steps {
                return Ok(Self::finish(clicks, Some(&seg)));
            }
            let k = seg.psi.sector();
            let t = n as f64 * dt;
            let (pa, pb) = self.rates(seg.psi.amplitudes(), k);
            let p = (pa + pb) * dt;
            if p > 1.0 {
                return Err(Error::IntegratorFailure {
                    time: t,
                    reason: format!("click probability per step (Π_a+Π_b)·dt = {p:.3} exceeds 1; reduce dt"),
                });
            }
            let u: f64 = rng.random();
            seg.consumed += p * seg.weight;
            n += 1;
            if u < p {
                let detector = if u < pa * dt { Detector::A } else { Detector::B };
                let next = collapse(&self.model, &seg.psi, detector)?;
                clicks.push(ClickEvent {
                    detector,
                    time: n as f64 * dt,
                });
                seg = Segment::new(next);
                scratch = DVector::zeros(seg.psi.dim());
            } else {
                self.props[k - 1].step(seg.psi.amplitudes_mut(), &mut scratch, t)?;
                let n2 = seg.psi.normalize();
                seg.weight *= n2;
            }
        }
        Ok(Self::finish(clicks, None))
    }

    fn run_norm_threshold<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrajectoryResult> {
        let dt = self.cfg.dt;
        let mut psi = StateVector::initial();
        let mut scratch = DVector::zeros(19);
        let mut clicks = Vec::with_capacity(2);
        let mut t = 0.0;
        // Sub-normalized state of the current segment; the jump fires when
        // its squared norm reaches `u`.
        let mut u: f64 = 1.0 - rng.random::<f64>();
        while clicks.len() < 2 {
            let k = psi.sector();
            let remaining = self.t_max - t;
            if remaining <= 1e-12 * self.t_max {
                let n2 = psi.norm_squared();
                let seg = Segment {
                    psi,
                    weight: n2,
                    consumed: 1.0 - n2,
                };
                return Ok(Self::finish(clicks, Some(&seg)));
            }
            let h_step = dt.min(remaining);
            let h = self.model.h_nh(k);
            let before = psi.amplitudes().clone();
            if h_step == dt {
                self.props[k - 1].step(psi.amplitudes_mut(), &mut scratch, t)?;
            } else {
                *psi.amplitudes_mut() = evolve_vector(h, &before, h_step);
            }
            if psi.norm_squared() > u {
                t += h_step;
                continue;
            }
            let tau = self.crossing_time(h, &before, k, u, h_step);
            let at_jump = StateVector::new(k, evolve_vector(h, &before, tau))?;
            t += tau;
            let (pa, pb) = self.rates(at_jump.amplitudes(), k);
            let detector = if rng.random::<f64>() * (pa + pb) < pa {
                Detector::A
            } else {
                Detector::B
            };
            psi = collapse(&self.model, &at_jump, detector)?;
            clicks.push(ClickEvent { detector, time: t });
            scratch = DVector::zeros(psi.dim());
            u = 1.0 - rng.random::<f64>();
        }
        Ok(Self::finish(clicks, None))
    }

    /// τ ∈ (0, h] with ‖exp(−iHτ)ψ‖² = u, by Newton's method safeguarded
    /// with bisection. d‖ψ‖²/dτ = −(Π_a+Π_b).
    fn crossing_time(&self, h: &DMatrix<Complex64>, psi: &DVector<Complex64>, k: usize, u: f64, h_step: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, h_step);
        let f_lo = psi.norm_squared() - u;
        let mut f_hi = evolve_vector(h, psi, h_step).norm_squared() - u;
        if f_hi >= 0.0 {
            return h_step;
        }
        let mut tau = h_step * f_lo / (f_lo - f_hi);
        for _ in 0..60 {
            let v = evolve_vector(h, psi, tau);
            let f = v.norm_squared() - u;
            if f.abs() <= 1e-15 || hi - lo <= 1e-14 {
                break;
            }
            if f > 0.0 {
                lo = tau;
            } else {
                hi = tau;
                f_hi = f;
            }
            let (pa, pb) = self.rates(&v, k);
            let slope = -(pa + pb);
            let newton = if slope < 0.0 { tau - f / slope } else { f64::NAN };
            tau = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        let _ = f_hi;
        tau
    }
}

/// Samples one trajectory with the given random source.
pub fn run_trajectory<R: Rng + ?Sized>(p: &SystemParams, cfg: &EnsembleConfig, rng: &mut R) -> Result<TrajectoryResult> {
    TrajectorySimulator::new(p, cfg)?.run(rng)
}

/// Results of `n_traj` independent trajectories, in index order.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub params: SystemParams,
    pub config: EnsembleConfig,
    /// Cutoff actually used.
    pub t_max: f64,
    pub results: Vec<TrajectoryResult>,
}

impl Ensemble {
    pub fn censored_count(&self) -> usize {
        self.results.iter().filter(|r| r.censored).count()
    }

    /// Raw record CSV `traj_id,click_index,detector,time` preceded by
    /// optional `#` comment lines.
    pub fn write_clicks_csv<W: Write>(&self, mut writer: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["traj_id", "click_index", "detector", "time"])?;
        for (id, r) in self.results.iter().enumerate() {
            for (i, c) in r.clicks.iter().enumerate() {
                w.write_record(&[
                    id.to_string(),
                    (i + 1).to_string(),
                    c.detector.label().to_string(),
                    format!("{}", c.time),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the ensemble on the rayon pool.
pub fn run_ensemble(p: &SystemParams, cfg: &EnsembleConfig) -> Result<Ensemble> {
    run_ensemble_with(p, cfg, Execution::Parallel)
}

/// Runs the ensemble; trajectory i always consumes random stream i.
pub fn run_ensemble_with(p: &SystemParams, cfg: &EnsembleConfig, exec: Execution) -> Result<Ensemble> {
    let sim = TrajectorySimulator::new(p, cfg)?;
    let results = par::map_indexed(cfg.n_traj, exec, |i| sim.run_index(i as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        params: *p,
        config: *cfg,
        t_max: sim.t_max(),
        results,
    })
}

/// Reads a raw click CSV back into per-trajectory click lists. Comment
/// lines starting with `#` are skipped; trajectories without clicks do not
/// appear.
pub fn read_clicks_csv<R: std::io::Read>(reader: R) -> Result<Vec<(usize, Vec<ClickEvent>)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out: Vec<(usize, Vec<ClickEvent>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_err = |what: &str| Error::InvalidParams(format!("bad {what} in click CSV: {rec:?}"));
        let id: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("traj_id"))?;
        let detector: Detector = rec.get(2).ok_or_else(|| parse_err("detector"))?.parse()?;
        let time: f64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("time"))?;
        match out.last_mut() {
            Some((last, clicks)) if *last == id => clicks.push(ClickEvent { detector, time }),
            _ => out.push((id, vec![ClickEvent { detector, time }])),
        }
    }
    Ok(out)
}
