//! Basis enumeration for the one-electron and hard-core two-electron sectors.
//!
//! Dots are numbered from 1. In the two-electron sector a basis state is an
//! ordered pair `(i, j)` with `i < j`, meaning the electron with the first spin
//! label sits on dot `i` and the one with the second label on dot `j`. Pairs
//! are flattened row-major: `(1,2), (1,3), ..., (1,N), (2,3), ...`.

use std::fmt;
use std::io::Write;

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Up => "up",
            Spin::Down => "down",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorKind {
    OneElectron,
    TwoElectron,
}

impl SectorKind {
    pub fn electrons(self) -> usize {
        match self {
            SectorKind::OneElectron => 1,
            SectorKind::TwoElectron => 2,
        }
    }
}

/// Spin label carried by a state. Transport never changes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinLabel {
    One(Spin),
    /// Spin of the electron on the lower-numbered dot, then the higher one.
    Pair(Spin, Spin),
}

impl SpinLabel {
    pub fn kind(self) -> SectorKind {
        match self {
            SpinLabel::One(_) => SectorKind::OneElectron,
            SpinLabel::Pair(..) => SectorKind::TwoElectron,
        }
    }
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpinLabel::One(s) => write!(f, "{s}"),
            SpinLabel::Pair(a, b) => write!(f, "{a},{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectorBasis {
    pub kind: SectorKind,
    pub n: usize,
}

impl SectorBasis {
    pub fn one_electron(n: usize) -> Self {
        SectorBasis {
            kind: SectorKind::OneElectron,
            n,
        }
    }

    pub fn two_electron(n: usize) -> Self {
        SectorBasis {
            kind: SectorKind::TwoElectron,
            n,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SectorKind::OneElectron => self.n,
            SectorKind::TwoElectron => self.n * self.n.saturating_sub(1) / 2,
        }
    }

    /// Dots occupied by basis state `index`.
    pub fn dots(&self, index: usize) -> Result<Vec<usize>> {
        match self.kind {
            SectorKind::OneElectron if index < self.n => Ok(vec![index + 1]),
            SectorKind::OneElectron => invalid(format!("index {index} out of range")),
            SectorKind::TwoElectron => pair_2e(index, self.n).map(|(i, j)| vec![i, j]),
        }
    }

    /// Whether basis state `index` has an electron on the last dot.
    pub fn occupies_last(&self, index: usize) -> bool {
        match self.kind {
            SectorKind::OneElectron => index + 1 == self.n,
            // The pairs (i, N) are the last entry of every row.
            SectorKind::TwoElectron => pair_2e(index, self.n)
                .map(|(_, j)| j == self.n)
                .unwrap_or(false),
        }
    }
}

/// Flat index of the pair `(i, j)`, `1 <= i < j <= n`.
pub fn index_2e(i: usize, j: usize, n: usize) -> Result<usize> {
    if !(1 <= i && i < j && j <= n) {
        return invalid(format!("pair ({i}, {j}) is not 1 <= i < j <= {n}"));
    }
    // Rows 1..i-1 hold (n - 1) + (n - 2) + ... + (n - i + 1) entries.
    let before = (i - 1) * n - (i - 1) * i / 2;
    Ok(before + (j - i - 1))
}

/// Inverse of [`index_2e`].
pub fn pair_2e(index: usize, n: usize) -> Result<(usize, usize)> {
    let dim = n * n.saturating_sub(1) / 2;
    if index >= dim {
        return invalid(format!("pair index {index} out of range for n = {n}"));
    }
    let mut rest = index;
    let mut i = 1;
    while rest >= n - i {
        rest -= n - i;
        i += 1;
    }
    Ok((i, i + 1 + rest))
}

/// Complex amplitudes over one spin sector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub basis: SectorBasis,
    pub spins: SpinLabel,
    pub amps: DVector<C64>,
}

impl StateVector {
    pub fn new(basis: SectorBasis, spins: SpinLabel, amps: DVector<C64>) -> Result<Self> {
        if spins.kind() != basis.kind {
            return invalid("spin label does not match sector");
        }
        if amps.len() != basis.dim() {
            return invalid(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amps.len()
            ));
        }
        Ok(StateVector { basis, spins, amps })
    }

    /// `|dot, spin>` in a chain of `n` dots.
    pub fn one_electron(n: usize, dot: usize, spin: Spin) -> Result<Self> {
        if dot == 0 || dot > n {
            return invalid(format!("dot {dot} outside 1..={n}"));
        }
        let mut amps = DVector::zeros(n);
        amps[dot - 1] = C64::new(1.0, 0.0);
        StateVector::new(SectorBasis::one_electron(n), SpinLabel::One(spin), amps)
    }

    /// `|i alpha, j beta>` with `i < j`.
    pub fn two_electron(n: usize, i: usize, j: usize, spins: (Spin, Spin)) -> Result<Self> {
        let basis = SectorBasis::two_electron(n);
        let mut amps = DVector::zeros(basis.dim());
        amps[index_2e(i, j, n)?] = C64::new(1.0, 0.0);
        StateVector::new(basis, SpinLabel::Pair(spins.0, spins.1), amps)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn normalized(&self) -> StateVector {
        let norm = self.amps.norm();
        let mut out = self.clone();
        if norm > 0.0 {
            out.amps.unscale_mut(norm);
        }
        out
    }

    pub fn with_amps(&self, amps: DVector<C64>) -> StateVector {
        StateVector {
            basis: self.basis,
            spins: self.spins,
            amps,
        }
    }

    /// Per-dot occupation probabilities, whichever the sector.
    pub fn occupations(&self) -> Vec<f64> {
        match self.basis.kind {
            SectorKind::OneElectron => self.amps.iter().map(|a| a.norm_sqr()).collect(),
            SectorKind::TwoElectron => {
                let n = self.basis.n;
                let mut occ = vec![0.0; n];
                let mut k = 0;
                for i in 1..=n {
                    for j in i + 1..=n {
                        let p = self.amps[k].norm_sqr();
                        occ[i - 1] += p;
                        occ[j - 1] += p;
                        k += 1;
                    }
                }
                occ
            }
        }
    }

    /// Writes `index,re,im` rows preceded by a `#` line naming the sector.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let kind = match self.basis.kind {
            SectorKind::OneElectron => "one-electron",
            SectorKind::TwoElectron => "two-electron",
        };
        writeln!(out, "# sector={kind} n={} spins={}", self.basis.n, self.spins)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "re", "im"])?;
        for (k, a) in self.amps.iter().enumerate() {
            w.serialize((k, a.re, a.im))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|A_j|^2` per dot; the state must be in the one-electron sector.
pub fn occupation_1e(state: &StateVector) -> Result<Vec<f64>> {
    if state.basis.kind != SectorKind::OneElectron {
        return invalid("occupation_1e needs a one-electron state");
    }
    Ok(state.occupations())
}

/// `P(k) = sum over pairs containing k of |B_ij|^2`; two-electron sector only.
pub fn occupation_2e(state: &StateVector) -> Result<Vec<f64>> {
    if state.basis.kind != SectorKind::TwoElectron {
        return invalid("occupation_2e needs a two-electron state");
    }
    Ok(state.occupations())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_basics() {
        assert_eq!(index_2e(1, 2, 2).unwrap(), 0);
        assert_eq!(SectorBasis::two_electron(2).dim(), 1);
        assert_eq!(SectorBasis::two_electron(10).dim(), 45);
        assert_eq!(SectorBasis::two_electron(20).dim(), 190);
        assert_eq!(index_2e(1, 20, 20).unwrap(), 18);
        assert_eq!(index_2e(19, 20, 20).unwrap(), 189);
        assert!(index_2e(2, 2, 5).is_err());
        assert!(index_2e(3, 2, 5).is_err());
        assert!(index_2e(0, 2, 5).is_err());
        assert!(index_2e(1, 6, 5).is_err());
        assert!(pair_2e(10, 5).is_err());
    }

    #[test]
    fn pair_index_round_trip_is_row_major() {
        for n in 2..=30 {
            let mut expected = 0;
            for i in 1..=n {
                for j in i + 1..=n {
                    let k = index_2e(i, j, n).unwrap();
                    assert_eq!(k, expected);
                    assert_eq!(pair_2e(k, n).unwrap(), (i, j));
                    expected += 1;
                }
            }
            assert_eq!(expected, SectorBasis::two_electron(n).dim());
        }
    }

    #[test]
    fn occupations_of_basis_states() {
        let s = StateVector::one_electron(5, 1, Spin::Up).unwrap();
        assert_eq!(occupation_1e(&s).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(occupation_2e(&s).is_err());

        let amps = DVector::from_element(4, C64::new(0.5, 0.0));
        let s = StateVector::new(SectorBasis::one_electron(4), SpinLabel::One(Spin::Up), amps).unwrap();
        assert_eq!(occupation_1e(&s).unwrap(), vec![0.25; 4]);

        let s = StateVector::two_electron(6, 1, 2, (Spin::Up, Spin::Down)).unwrap();
        assert_eq!(occupation_2e(&s).unwrap(), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(occupation_1e(&s).is_err());
        let s = StateVector::two_electron(6, 1, 6, (Spin::Up, Spin::Down)).unwrap();
        assert_eq!(occupation_2e(&s).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn last_dot_flags() {
        let b = SectorBasis::two_electron(4);
        let flagged: Vec<_> = (0..b.dim()).filter(|&k| b.occupies_last(k)).collect();
        let expected: Vec<_> = (1..4).map(|i| index_2e(i, 4, 4).unwrap()).collect();
        assert_eq!(flagged, expected);
        let b = SectorBasis::one_electron(4);
        assert!(b.occupies_last(3) && !b.occupies_last(2));
    }

    #[test]
    fn csv_has_sector_header() {
        let s = StateVector::two_electron(3, 1, 3, (Spin::Up, Spin::Down)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# sector=two-electron n=3 spins=up,down");
        assert_eq!(lines[1], "index,re,im");
        assert_eq!(lines[3], "1,1.0,0.0");
        assert_eq!(lines.len(), 5);
    }
}
