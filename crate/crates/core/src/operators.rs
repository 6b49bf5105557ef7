//! Sector operators: ladder operators, the atom–cavity Hamiltonian, the
//! cascade coupling between the two cavities and the photodetection jump
//! operators.
//!
//! Units: κ sets the rate scale. Detuning is Δ = ω_eg − ω_c. In the rotating
//! frame (at ω_c) the bare energies reduce to Δ per excited atom; the lab
//! frame keeps −ω_eg per ground-state atom and ω_c per photon, so the
//! initial state |e₁00,e₂00⟩ sits at zero energy. The two frames differ by a
//! constant per sector, which drops out of every detection statistic.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{enumerate_sector, sector_dim, Atom, Mode, StateVector, MAX_EXCITATION};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Energy reference for the bare Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Rotating at the cavity frequency ω_c.
    Rotating,
    /// Explicit ω_c; the atomic frequency is ω_eg = ω_c + Δ.
    Lab { omega_c: f64 },
}

/// Physical parameters, in units where κ is the rate scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub g_l: Complex64,
    pub g_r: Complex64,
    pub kappa: f64,
    pub delta: f64,
    pub frame: Frame,
    /// Include the Hermitian cascade correction in the no-jump Hamiltonian.
    /// Off reproduces H_NH = H_s − (i/2)ΣJ†J literally.
    pub cascade: bool,
}

impl SystemParams {
    /// Mirror-symmetric system with real coupling `g` (in units of κ = 1).
    pub fn symmetric(g: f64, delta: f64) -> Self {
        SystemParams {
            g_l: re(g),
            g_r: re(g),
            kappa: 1.0,
            delta,
            frame: Frame::Rotating,
            cascade: true,
        }
    }

    pub fn with_cascade(mut self, cascade: bool) -> Self {
        self.cascade = cascade;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        let finite = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        if !finite(self.g_l) || !finite(self.g_r) {
            return Err(Error::InvalidParams("coupling constants must be finite".into()));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams("detuning must be finite".into()));
        }
        if let Frame::Lab { omega_c } = self.frame {
            if !omega_c.is_finite() {
                return Err(Error::InvalidParams("omega_c must be finite".into()));
            }
        }
        Ok(())
    }

    /// Equal coupling magnitudes on both sides.
    pub fn is_mirror_symmetric(&self) -> bool {
        (self.g_l.norm() - self.g_r.norm()).abs() <= 1e-14 * self.g_l.norm().max(1.0)
    }

    /// Largest coupling magnitude in units of κ.
    pub fn coupling_ratio(&self) -> f64 {
        self.g_l.norm().max(self.g_r.norm()) / self.kappa
    }
}

/// One of the two photodetectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    A,
    B,
}

impl Detector {
    pub const BOTH: [Detector; 2] = [Detector::A, Detector::B];

    pub fn label(self) -> char {
        match self {
            Detector::A => 'a',
            Detector::B => 'b',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Detector::A => 0,
            Detector::B => 1,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Detector::A),
            "b" | "B" => Ok(Detector::B),
            other => Err(Error::InvalidParams(format!("unknown detector '{other}'"))),
        }
    }
}

/// Matrix mapping excitation sector `source` to sector `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorOperator {
    source: usize,
    target: usize,
    matrix: DMatrix<Complex64>,
}

impl SectorOperator {
    pub fn new(source: usize, target: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != sector_dim(target)? || cols != sector_dim(source)? {
            return Err(Error::InvalidParams(format!(
                "{rows}x{cols} matrix does not map sector {source} to sector {target}"
            )));
        }
        Ok(SectorOperator {
            source,
            target,
            matrix,
        })
    }

    pub fn zeros(source: usize, target: usize) -> Result<Self> {
        let m = DMatrix::zeros(sector_dim(target)?, sector_dim(source)?);
        Self::new(source, target, m)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.sector() != self.source {
            return Err(Error::SectorMismatch {
                expected: self.source,
                found: v.sector(),
            });
        }
        StateVector::new(self.target, &self.matrix * v.amplitudes())
    }

    pub fn adjoint(&self) -> SectorOperator {
        SectorOperator {
            source: self.target,
            target: self.source,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &SectorOperator) -> Result<SectorOperator> {
        if first.target != self.source {
            return Err(Error::SectorMismatch {
                expected: self.source,
                found: first.target,
            });
        }
        Ok(SectorOperator {
            source: first.source,
            target: self.target,
            matrix: &self.matrix * &first.matrix,
        })
    }

    pub fn scaled(mut self, c: Complex64) -> SectorOperator {
        self.matrix *= c;
        self
    }

    pub fn plus(mut self, other: &SectorOperator) -> Result<SectorOperator> {
        if (self.source, self.target) != (other.source, other.target) {
            return Err(Error::SectorMismatch {
                expected: self.source,
                found: other.source,
            });
        }
        self.matrix += &other.matrix;
        Ok(self)
    }

    /// Largest |A − A†| entry relative to the largest |A| entry.
    pub fn hermiticity_error(&self) -> f64 {
        if self.source != self.target {
            return f64::INFINITY;
        }
        let scale = self.matrix.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let diff = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Nonzero entries as CSV triplets `row,col,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "col", "re", "im"])?;
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                let z = self.matrix[(r, c)];
                if z != Complex64::new(0.0, 0.0) {
                    w.write_record(&[
                        r.to_string(),
                        c.to_string(),
                        format!("{:e}", z.re),
                        format!("{:e}", z.im),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn lowering_sector(k: usize) -> Result<()> {
    match k {
        0 => Err(Error::EmptySector(0)),
        k if k > MAX_EXCITATION => Err(Error::InvalidSector(k)),
        _ => Ok(()),
    }
}

/// Bosonic lowering operator of `mode`, sector k → k−1.
pub fn annihilation(mode: Mode, k: usize) -> Result<SectorOperator> {
    lowering_sector(k)?;
    let src = enumerate_sector(k)?;
    let dst = enumerate_sector(k - 1)?;
    let mut m = DMatrix::zeros(dst.dim(), src.dim());
    for (col, s) in src.states().iter().enumerate() {
        if let Some((lowered, amp)) = s.lower_mode(mode) {
            let row = dst.position(&lowered).expect("lowered state lies in sector k-1");
            m[(row, col)] = re(amp);
        }
    }
    SectorOperator::new(k, k - 1, m)
}

/// Bosonic raising operator of `mode`, sector k → k+1.
pub fn creation(mode: Mode, k: usize) -> Result<SectorOperator> {
    if k >= MAX_EXCITATION {
        return Err(Error::InvalidSector(k + 1));
    }
    Ok(annihilation(mode, k + 1)?.adjoint())
}

/// Atomic lowering operator σ₋ of `atom`, sector k → k−1.
pub fn sigma_minus(atom: Atom, k: usize) -> Result<SectorOperator> {
    lowering_sector(k)?;
    let src = enumerate_sector(k)?;
    let dst = enumerate_sector(k - 1)?;
    let mut m = DMatrix::zeros(dst.dim(), src.dim());
    for (col, s) in src.states().iter().enumerate() {
        if let Some(lowered) = s.lower_atom(atom) {
            let row = dst.position(&lowered).expect("lowered state lies in sector k-1");
            m[(row, col)] = re(1.0);
        }
    }
    SectorOperator::new(k, k - 1, m)
}

/// Atomic raising operator σ₊ of `atom`, sector k → k+1.
pub fn sigma_plus(atom: Atom, k: usize) -> Result<SectorOperator> {
    if k >= MAX_EXCITATION {
        return Err(Error::InvalidSector(k + 1));
    }
    Ok(sigma_minus(atom, k + 1)?.adjoint())
}

fn square(k: usize) -> Result<DMatrix<Complex64>> {
    let d = sector_dim(k)?;
    Ok(DMatrix::zeros(d, d))
}

/// `a_out† a_in` restricted to sector k (zero on the vacuum).
fn hop(to: Mode, from: Mode, k: usize) -> Result<DMatrix<Complex64>> {
    if k == 0 {
        return square(0);
    }
    Ok(creation(to, k - 1)?.matrix() * annihilation(from, k)?.matrix())
}

/// Atom–cavity Hamiltonian H_s on sector k (Hermitian).
pub fn system_hamiltonian(p: &SystemParams, k: usize) -> Result<SectorOperator> {
    p.validate()?;
    let basis = enumerate_sector(k)?;
    let mut h = square(k)?;
    for (i, s) in basis.states().iter().enumerate() {
        let e = match p.frame {
            Frame::Rotating => p.delta * s.excited_atoms() as f64,
            Frame::Lab { omega_c } => {
                let omega_eg = omega_c + p.delta;
                let ground = 2 - s.excited_atoms();
                -omega_eg * ground as f64 + omega_c * s.photon_count() as f64
            }
        };
        h[(i, i)] = re(e);
    }
    if k > 0 {
        let couplings = [
            (Mode::A1, Atom::Left, p.g_l),
            (Mode::A2, Atom::Left, p.g_l.conj()),
            (Mode::A3, Atom::Right, p.g_r),
            (Mode::A4, Atom::Right, p.g_r.conj()),
        ];
        for (mode, atom, g) in couplings {
            // g a† σ₋ + h.c.
            let emit = creation(mode, k - 1)?.matrix() * sigma_minus(atom, k)?.matrix() * g;
            h += &emit;
            h += emit.adjoint();
        }
    }
    SectorOperator::new(k, k, h)
}

/// Hermitian cascade correction (iκ/2)[(a₁†a₃ − a₃†a₁) + (a₄†a₂ − a₂†a₄)].
///
/// Together with the jump operators this makes the a₁ output drive a₃ and
/// the a₄ output drive a₂, with no reverse drive.
pub fn cascade_hamiltonian(p: &SystemParams, k: usize) -> Result<SectorOperator> {
    p.validate()?;
    let mut h = hop(Mode::A1, Mode::A3, k)? - hop(Mode::A3, Mode::A1, k)?;
    h += hop(Mode::A4, Mode::A2, k)? - hop(Mode::A2, Mode::A4, k)?;
    h *= I * (p.kappa / 2.0);
    SectorOperator::new(k, k, h)
}

/// Output-field operator seen by `detector`: J_a = √κ(a₁+a₃), J_b = √κ(a₂+a₄).
pub fn jump_operator(p: &SystemParams, detector: Detector, k: usize) -> Result<SectorOperator> {
    p.validate()?;
    let (m1, m2) = match detector {
        Detector::A => (Mode::A1, Mode::A3),
        Detector::B => (Mode::A2, Mode::A4),
    };
    let sum = annihilation(m1, k)?.plus(&annihilation(m2, k)?)?;
    Ok(sum.scaled(re(p.kappa.sqrt())))
}

/// Σ_j J_j†J_j on sector k.
fn total_click_rate_operator(p: &SystemParams, k: usize) -> Result<DMatrix<Complex64>> {
    let mut rate = square(k)?;
    if k > 0 {
        for d in Detector::BOTH {
            let j = jump_operator(p, d, k)?;
            rate += j.matrix().adjoint() * j.matrix();
        }
    }
    Ok(rate)
}

/// No-jump generator H_s [+ H_casc] − (i/2)Σ_j J_j†J_j.
pub fn non_hermitian_hamiltonian(p: &SystemParams, k: usize) -> Result<SectorOperator> {
    let mut h = system_hamiltonian(p, k)?.into_matrix();
    if p.cascade {
        h += cascade_hamiltonian(p, k)?.matrix();
    }
    h -= total_click_rate_operator(p, k)? * (I * 0.5);
    SectorOperator::new(k, k, h)
}

/// All operators needed for propagation, built once per parameter set.
#[derive(Clone, Debug)]
pub struct CascadeModel {
    params: SystemParams,
    h_nh: Vec<DMatrix<Complex64>>,
    // jumps[k-1][detector]
    jumps: Vec<[DMatrix<Complex64>; 2]>,
}

impl CascadeModel {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let h_nh = (0..=MAX_EXCITATION)
            .map(|k| non_hermitian_hamiltonian(&params, k).map(SectorOperator::into_matrix))
            .collect::<Result<Vec<_>>>()?;
        let jumps = (1..=MAX_EXCITATION)
            .map(|k| {
                Ok([
                    jump_operator(&params, Detector::A, k)?.into_matrix(),
                    jump_operator(&params, Detector::B, k)?.into_matrix(),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CascadeModel {
            params,
            h_nh,
            jumps,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    /// No-jump generator on sector k.
    pub fn h_nh(&self, k: usize) -> &DMatrix<Complex64> {
        &self.h_nh[k]
    }

    /// Jump operator of `detector` on sector k ∈ {1, 2}.
    pub fn jump(&self, detector: Detector, k: usize) -> Result<&DMatrix<Complex64>> {
        match k {
            0 => Err(Error::EmptySector(0)),
            1 | 2 => Ok(&self.jumps[k - 1][detector.index()]),
            _ => Err(Error::InvalidSector(k)),
        }
    }
}

/// Offset of sector k inside the 26-dimensional direct sum 0 ⊕ 1 ⊕ 2.
pub fn full_space_offset(k: usize) -> usize {
    match k {
        0 => 0,
        1 => 1,
        _ => 7,
    }
}

/// Dimension of the full truncated space.
pub const FULL_DIM: usize = 26;

/// Embeds sector operators into the 26-dimensional space.
pub fn embed(ops: &[SectorOperator]) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(FULL_DIM, FULL_DIM);
    for op in ops {
        let r0 = full_space_offset(op.target());
        let c0 = full_space_offset(op.source());
        m.view_mut((r0, c0), op.matrix().shape())
            .copy_from(op.matrix());
    }
    m
}

/// Mode lowering operator on the full space.
pub fn full_annihilation(mode: Mode) -> Result<DMatrix<Complex64>> {
    Ok(embed(&[annihilation(mode, 1)?, annihilation(mode, 2)?]))
}

/// H_s [+ H_casc] on the full space (Hermitian).
pub fn full_hamiltonian(p: &SystemParams) -> Result<DMatrix<Complex64>> {
    let mut blocks = Vec::new();
    for k in 0..=MAX_EXCITATION {
        let mut h = system_hamiltonian(p, k)?;
        if p.cascade {
            h = h.plus(&cascade_hamiltonian(p, k)?)?;
        }
        blocks.push(h);
    }
    Ok(embed(&blocks))
}

/// Jump operator on the full space.
pub fn full_jump(p: &SystemParams, detector: Detector) -> Result<DMatrix<Complex64>> {
    Ok(embed(&[jump_operator(p, detector, 1)?, jump_operator(p, detector, 2)?]))
}
