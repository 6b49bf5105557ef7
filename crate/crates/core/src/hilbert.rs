//! Truncated Fock space of two two-level atoms and four cavity modes.
//!
//! Total excitation number is conserved by the Hamiltonian and lowered by
//! one at each photodetection, so the two-excitation initial state only ever
//! visits sectors 2, 1 and 0. States are stored per sector.
//!
//! Ket order follows `|atom_L n1 n2, atom_R n3 n4⟩`: modes a₁, a₂ belong to
//! the left cavity and a₃, a₄ to the right one. a₁ and a₄ face the central
//! fiber segment between the cavities.

use std::fmt;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest excitation sector represented.
pub const MAX_EXCITATION: usize = 2;

/// One of the four cavity modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    A1,
    A2,
    A3,
    A4,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::A1, Mode::A2, Mode::A3, Mode::A4];

    /// Position of the mode occupation in the ket.
    fn slot(self) -> usize {
        match self {
            Mode::A1 => 1,
            Mode::A2 => 2,
            Mode::A3 => 4,
            Mode::A4 => 5,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Mode::A1 => 1,
            Mode::A2 => 2,
            Mode::A3 => 3,
            Mode::A4 => 4,
        }
    }
}

impl TryFrom<u8> for Mode {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Mode::A1),
            2 => Ok(Mode::A2),
            3 => Ok(Mode::A3),
            4 => Ok(Mode::A4),
            _ => Err(Error::InvalidParams(format!("cavity mode {n} does not exist (1..=4)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Left,
    Right,
}

impl Atom {
    fn slot(self) -> usize {
        match self {
            Atom::Left => 0,
            Atom::Right => 3,
        }
    }
}

/// Occupation configuration `[atom_L, n1, n2, atom_R, n3, n4]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState([u8; 6]);

impl BasisState {
    pub fn new(atom_l: u8, n1: u8, n2: u8, atom_r: u8, n3: u8, n4: u8) -> Result<Self> {
        Self::from_occupations([atom_l, n1, n2, atom_r, n3, n4])
    }

    pub fn from_occupations(occ: [u8; 6]) -> Result<Self> {
        let state = BasisState(occ);
        if occ[0] > 1 || occ[3] > 1 {
            return Err(Error::InvalidState(format!("{state}: atomic occupation must be 0 or 1")));
        }
        if Mode::ALL.iter().any(|m| occ[m.slot()] > 2) {
            return Err(Error::InvalidState(format!("{state}: mode occupation above 2")));
        }
        if state.excitation() > MAX_EXCITATION {
            return Err(Error::InvalidState(format!(
                "{state}: total excitation {} exceeds {MAX_EXCITATION}",
                state.excitation()
            )));
        }
        Ok(state)
    }

    /// The global ground state: both atoms in g, all modes empty.
    pub fn vacuum() -> Self {
        BasisState([0; 6])
    }

    pub fn occupations(&self) -> [u8; 6] {
        self.0
    }

    pub fn excitation(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn photons(&self, mode: Mode) -> u8 {
        self.0[mode.slot()]
    }

    pub fn is_excited(&self, atom: Atom) -> bool {
        self.0[atom.slot()] == 1
    }

    pub fn excited_atoms(&self) -> usize {
        (self.0[0] + self.0[3]) as usize
    }

    pub fn photon_count(&self) -> usize {
        Mode::ALL.iter().map(|&m| self.photons(m) as usize).sum()
    }

    /// Removes one photon from `mode`, returning the lowered state and √n.
    pub fn lower_mode(&self, mode: Mode) -> Option<(BasisState, f64)> {
        let n = self.photons(mode);
        (n > 0).then(|| {
            let mut occ = self.0;
            occ[mode.slot()] -= 1;
            (BasisState(occ), (n as f64).sqrt())
        })
    }

    /// De-excites `atom`, or `None` if it is already in the ground state.
    pub fn lower_atom(&self, atom: Atom) -> Option<BasisState> {
        self.is_excited(atom).then(|| {
            let mut occ = self.0;
            occ[atom.slot()] = 0;
            BasisState(occ)
        })
    }

    /// Mirror image through the centre of the fiber: L ↔ R, a₁ ↔ a₄, a₂ ↔ a₃.
    pub fn mirror(&self) -> BasisState {
        let [al, n1, n2, ar, n3, n4] = self.0;
        BasisState([ar, n4, n3, al, n2, n1])
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = |x: u8| if x == 1 { 'e' } else { 'g' };
        let [al, n1, n2, ar, n3, n4] = self.0;
        write!(f, "|{}₁{n1}{n2},{}₂{n3}{n4}⟩", atom(al), atom(ar))
    }
}

impl fmt::Debug for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

const SECTOR_0: [[u8; 6]; 1] = [[0, 0, 0, 0, 0, 0]];

const SECTOR_1: [[u8; 6]; 6] = [
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 1],
];

// Coefficients c₁ … c₁₉ of the two-excitation no-jump state, in order.
const SECTOR_2: [[u8; 6]; 19] = [
    [1, 0, 0, 1, 0, 0],
    [1, 1, 0, 0, 0, 0],
    [1, 0, 1, 0, 0, 0],
    [1, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0, 1],
    [0, 1, 0, 1, 0, 0],
    [0, 0, 1, 1, 0, 0],
    [0, 0, 0, 1, 1, 0],
    [0, 0, 0, 1, 0, 1],
    [0, 2, 0, 0, 0, 0],
    [0, 0, 2, 0, 0, 0],
    [0, 0, 0, 0, 2, 0],
    [0, 0, 0, 0, 0, 2],
    [0, 1, 1, 0, 0, 0],
    [0, 1, 0, 0, 1, 0],
    [0, 1, 0, 0, 0, 1],
    [0, 0, 1, 0, 1, 0],
    [0, 0, 1, 0, 0, 1],
    [0, 0, 0, 0, 1, 1],
];

/// Ordered basis of one excitation sector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    k: usize,
    states: Vec<BasisState>,
}

impl SectorBasis {
    pub fn sector(&self) -> usize {
        self.k
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, index: usize) -> Option<BasisState> {
        self.states.get(index).copied()
    }

    pub fn position(&self, state: &BasisState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// `perm[i]` is the index of the mirror image of basis state `i`.
    pub fn mirror_permutation(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|s| {
                self.position(&s.mirror())
                    .expect("sector basis is closed under the mirror map")
            })
            .collect()
    }
}

/// Canonical basis of excitation sector `k`.
pub fn enumerate_sector(k: usize) -> Result<SectorBasis> {
    let table: &[[u8; 6]] = match k {
        0 => &SECTOR_0,
        1 => &SECTOR_1,
        2 => &SECTOR_2,
        _ => return Err(Error::InvalidSector(k)),
    };
    Ok(SectorBasis {
        k,
        states: table.iter().map(|&occ| BasisState(occ)).collect(),
    })
}

/// Dimension of sector `k` (1, 6, 19).
pub fn sector_dim(k: usize) -> Result<usize> {
    match k {
        0 => Ok(SECTOR_0.len()),
        1 => Ok(SECTOR_1.len()),
        2 => Ok(SECTOR_2.len()),
        _ => Err(Error::InvalidSector(k)),
    }
}

/// Sector and ordinal of a basis state.
pub fn index_of(state: &BasisState) -> Result<(usize, usize)> {
    let k = state.excitation();
    let basis = enumerate_sector(k)?;
    let idx = basis
        .position(state)
        .ok_or_else(|| Error::InvalidState(format!("{state} missing from sector {k}")))?;
    Ok((k, idx))
}

/// Complex amplitudes over one excitation sector.
///
/// No-jump states are sub-normalized; the squared norm is the probability
/// that no photon has been detected since the last reset.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    sector: usize,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(sector: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        let dim = sector_dim(sector)?;
        if amplitudes.len() != dim {
            return Err(Error::InvalidState(format!(
                "sector {sector} has dimension {dim}, got {} amplitudes",
                amplitudes.len()
            )));
        }
        Ok(StateVector { sector, amplitudes })
    }

    pub fn zeros(sector: usize) -> Result<Self> {
        let dim = sector_dim(sector)?;
        Ok(StateVector {
            sector,
            amplitudes: DVector::zeros(dim),
        })
    }

    /// Unit-amplitude basis ket.
    pub fn basis(state: &BasisState) -> Result<Self> {
        let (k, idx) = index_of(state)?;
        let mut v = Self::zeros(k)?;
        v.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    /// Both atoms excited, all cavity modes empty.
    pub fn initial() -> Self {
        let mut v = Self::zeros(2).expect("sector 2 exists");
        v.amplitudes[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, state: &BasisState) -> Result<Complex64> {
        let (k, idx) = index_of(state)?;
        if k != self.sector {
            return Err(Error::SectorMismatch {
                expected: self.sector,
                found: k,
            });
        }
        Ok(self.amplitudes[idx])
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(self)
    }

    /// Rescales to unit norm. Returns the previous squared norm.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_squared();
        if n2 > 0.0 {
            self.amplitudes.unscale_mut(n2.sqrt());
        }
        n2
    }

    /// Applies the mirror permutation of the basis.
    pub fn mirrored(&self) -> StateVector {
        let basis = enumerate_sector(self.sector).expect("valid sector");
        let perm = basis.mirror_permutation();
        let mut out = DVector::zeros(self.dim());
        for (i, &j) in perm.iter().enumerate() {
            out[j] = self.amplitudes[i];
        }
        StateVector {
            sector: self.sector,
            amplitudes: out,
        }
    }
}

/// Sum of squared amplitude magnitudes.
pub fn norm_squared(v: &StateVector) -> f64 {
    v.amplitudes.iter().map(|c| c.norm_sqr()).sum()
}

/// Writes the full basis listing as CSV:
/// `sector,index,atom_L,n1,n2,atom_R,n3,n4`.
pub fn write_basis_csv<W: Write>(writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sector", "index", "atom_L", "n1", "n2", "atom_R", "n3", "n4"])?;
    for k in 0..=MAX_EXCITATION {
        for (i, s) in enumerate_sector(k)?.states().iter().enumerate() {
            let mut row = vec![k.to_string(), i.to_string()];
            row.extend(s.occupations().iter().map(|n| n.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn all_tuples_with_sum(k: usize) -> HashSet<[u8; 6]> {
        let mut out = HashSet::new();
        for al in 0..=1u8 {
            for ar in 0..=1u8 {
                for n1 in 0..=2u8 {
                    for n2 in 0..=2u8 {
                        for n3 in 0..=2u8 {
                            for n4 in 0..=2u8 {
                                let occ = [al, n1, n2, ar, n3, n4];
                                if occ.iter().map(|&x| x as usize).sum::<usize>() == k {
                                    out.insert(occ);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(enumerate_sector(0).unwrap().dim(), 1);
        assert_eq!(enumerate_sector(1).unwrap().dim(), 6);
        assert_eq!(enumerate_sector(2).unwrap().dim(), 19);
        assert!(matches!(enumerate_sector(3), Err(Error::InvalidSector(3))));
    }

    #[test]
    fn sectors_match_brute_force_enumeration() {
        for k in 0..=2 {
            let basis = enumerate_sector(k).unwrap();
            let listed: HashSet<[u8; 6]> = basis.states().iter().map(|s| s.occupations()).collect();
            assert_eq!(listed.len(), basis.dim(), "duplicates in sector {k}");
            assert_eq!(listed, all_tuples_with_sum(k));
        }
    }

    #[test]
    fn two_excitation_ordering_endpoints() {
        let b = enumerate_sector(2).unwrap();
        assert_eq!(b.states()[0], BasisState::new(1, 0, 0, 1, 0, 0).unwrap());
        assert_eq!(b.states()[18], BasisState::new(0, 0, 0, 0, 1, 1).unwrap());
    }

    #[test]
    fn index_examples() {
        let ee = BasisState::new(1, 0, 0, 1, 0, 0).unwrap();
        assert_eq!(index_of(&ee).unwrap(), (2, 0));
        let c15 = BasisState::new(0, 1, 0, 0, 1, 0).unwrap();
        assert_eq!(index_of(&c15).unwrap(), (2, 14));
        assert_eq!(index_of(&BasisState::vacuum()).unwrap(), (0, 0));
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(matches!(BasisState::new(2, 0, 0, 0, 0, 0), Err(Error::InvalidState(_))));
        assert!(matches!(BasisState::new(0, 3, 0, 0, 0, 0), Err(Error::InvalidState(_))));
        assert!(matches!(BasisState::new(1, 1, 0, 1, 0, 0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn index_round_trips() {
        for k in 0..=2 {
            for (i, s) in enumerate_sector(k).unwrap().states().iter().enumerate() {
                assert_eq!(index_of(s).unwrap(), (k, i));
            }
        }
    }

    #[test]
    fn mirror_is_involutive_permutation() {
        for k in 0..=2 {
            let b = enumerate_sector(k).unwrap();
            let perm = b.mirror_permutation();
            let set: HashSet<usize> = perm.iter().copied().collect();
            assert_eq!(set.len(), b.dim());
            for i in 0..b.dim() {
                assert_eq!(perm[perm[i]], i);
            }
        }
        // c₁₀ = |g₁20,g₂00⟩ ↔ c₁₃ = |g₁00,g₂02⟩
        let p2 = enumerate_sector(2).unwrap().mirror_permutation();
        assert_eq!(p2[9], 12);
        assert_eq!(p2[0], 0);
    }

    #[test]
    fn norm_examples() {
        let mut v = StateVector::zeros(2).unwrap();
        assert_eq!(v.norm_squared(), 0.0);
        v.amplitudes_mut()[0] = Complex64::new(1.0, 0.0);
        assert_eq!(v.norm_squared(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        v.amplitudes_mut()[0] = Complex64::new(s, 0.0);
        v.amplitudes_mut()[1] = Complex64::new(0.0, s);
        assert!((v.norm_squared() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_csv_has_26_rows() {
        let mut buf = Vec::new();
        write_basis_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 27);
        assert_eq!(lines[0], "sector,index,atom_L,n1,n2,atom_R,n3,n4");
        assert_eq!(lines[1], "0,0,0,0,0,0,0,0");
        assert_eq!(lines[8 + 14], "2,14,0,1,0,0,1,0");
    }
}
