//! Effective Hamiltonians for the one- and two-electron sectors.
//!
//! The detector on the last dot enters as `H_eff = H - (i/2) gamma n_N`. Since
//! double occupancy is excluded, `n_N` is 1 on every basis state with an
//! electron on dot N and 0 elsewhere, so the decay is a diagonal term.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::hilbert::{index_2e, SectorBasis, SectorKind, C64};
use crate::model::ChainParams;

/// Compressed-row complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != C64::new(0.0, 0.0));

        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            dim,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()]
            .binary_search(&col)
            .map(|k| self.values[range.start + k])
            .unwrap_or_default()
    }

    /// Non-zero entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    pub fn mul_vec_into(&self, x: &DVector<C64>, y: &mut DVector<C64>) {
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// MatrixMarket `coordinate complex general`, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorHamiltonian {
    pub basis: SectorBasis,
    pub matrix: CsrMatrix,
    /// Detector coupling that produced the anti-Hermitian diagonal.
    pub gamma: f64,
}

impl SectorHamiltonian {
    /// True when there is no detector term; the matrix is then real symmetric.
    pub fn is_hermitian(&self) -> bool {
        self.gamma == 0.0
    }

    /// The Hermitian part `H` as a dense real symmetric matrix.
    pub fn hermitian_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.basis.dim(), self.basis.dim());
        for (r, c, v) in self.matrix.triplets() {
            m[(r, c)] = v.re;
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// Sorted eigenvalues of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.hermitian_dense().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        self.matrix.mul_vec(x)
    }
}

/// Tridiagonal one-electron Hamiltonian with open ends.
pub fn build_1e(params: &ChainParams) -> Result<SectorHamiltonian> {
    params.validate()?;
    let n = params.n;
    let mut triplets = Vec::with_capacity(3 * n);
    for j in 0..n {
        triplets.push((j, j, C64::new(params.eps[j], 0.0)));
    }
    for (j, &t) in params.couplings.iter().enumerate() {
        triplets.push((j, j + 1, C64::new(t, 0.0)));
        triplets.push((j + 1, j, C64::new(t, 0.0)));
    }
    triplets.push((n - 1, n - 1, C64::new(0.0, -0.5 * params.gamma)));
    Ok(SectorHamiltonian {
        basis: SectorBasis::one_electron(n),
        matrix: CsrMatrix::from_triplets(n, triplets),
        gamma: params.gamma,
    })
}

/// Hard-core two-electron Hamiltonian over the pair basis `i < j`.
///
/// Hops move one electron by one dot and never produce `i == j`; pairs on
/// adjacent dots pick up the interdot repulsion `V`.
pub fn build_2e(params: &ChainParams) -> Result<SectorHamiltonian> {
    params.validate()?;
    let n = params.n;
    if n < 2 {
        return invalid(format!("two electrons need n >= 2, got {n}"));
    }
    let basis = SectorBasis::two_electron(n);
    let mut triplets = Vec::with_capacity(5 * basis.dim());
    for i in 1..=n {
        for j in i + 1..=n {
            let k = index_2e(i, j, n)?;
            let mut diag = params.eps[i - 1] + params.eps[j - 1];
            if j - i == 1 {
                diag += params.v;
            }
            let decay = if j == n { -0.5 * params.gamma } else { 0.0 };
            triplets.push((k, k, C64::new(diag, decay)));
            // Right neighbours of (i, j); the Hermitian partner is pushed too.
            if i + 1 < j {
                let t = params.bond(i);
                let m = index_2e(i + 1, j, n)?;
                triplets.push((k, m, C64::new(t, 0.0)));
                triplets.push((m, k, C64::new(t, 0.0)));
            }
            if j < n {
                let t = params.bond(j);
                let m = index_2e(i, j + 1, n)?;
                triplets.push((k, m, C64::new(t, 0.0)));
                triplets.push((m, k, C64::new(t, 0.0)));
            }
        }
    }
    Ok(SectorHamiltonian {
        basis,
        matrix: CsrMatrix::from_triplets(basis.dim(), triplets),
        gamma: params.gamma,
    })
}

/// Builds the Hamiltonian for whichever sector `kind` names.
pub fn build(params: &ChainParams, kind: SectorKind) -> Result<SectorHamiltonian> {
    match kind {
        SectorKind::OneElectron => build_1e(params),
        SectorKind::TwoElectron => build_2e(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::pair_2e;
    use nalgebra::SymmetricEigen;

    fn sorted_eigs(h: &SectorHamiltonian) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(h.hermitian_dense()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn two_dot_spectrum() {
        let h = build_1e(&ChainParams::uniform(2, 1.0).unwrap()).unwrap();
        let e = sorted_eigs(&h);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_electron_structure() {
        let mut p = ChainParams::uniform(5, 1.0).unwrap().with_gamma(0.4).unwrap();
        p.eps = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        p.couplings = vec![1.0, 2.0, 3.0, 4.0];
        let h = build_1e(&p).unwrap();
        let d = h.to_dense();
        for r in 0..5 {
            for c in 0..5 {
                let expected = if r == c {
                    C64::new(p.eps[r], if r == 4 { -0.2 } else { 0.0 })
                } else if c == r + 1 {
                    C64::new(p.couplings[r], 0.0)
                } else if r == c + 1 {
                    C64::new(p.couplings[c], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert_eq!(d[(r, c)], expected);
            }
        }
        assert!(!h.is_hermitian());
    }

    #[test]
    fn two_electron_minimal_chain() {
        let mut p = ChainParams::uniform(2, 1.0).unwrap().with_v(0.7).unwrap();
        p.eps = vec![0.3, -0.1];
        let h = build_2e(&p).unwrap();
        assert_eq!(h.basis.dim(), 1);
        assert_eq!(h.matrix.nnz(), 1);
        assert!((h.matrix.get(0, 0).re - 0.9).abs() < 1e-15);
        assert!(build_2e(&ChainParams::uniform(1, 1.0).unwrap()).is_err());
    }

    /// Independent dense construction of the pair equations of motion, written
    /// out term by term from the amplitude equations.
    fn dense_pair_hamiltonian(p: &ChainParams) -> DMatrix<f64> {
        let n = p.n;
        let pairs: Vec<(usize, usize)> = (1..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .collect();
        let pos = |i: usize, j: usize| pairs.iter().position(|&q| q == (i, j));
        let t = |a: usize, b: usize| -> f64 {
            // t_{a,b} for |a - b| = 1 inside the chain, zero otherwise.
            if a == 0 || b == 0 || a > n || b > n {
                0.0
            } else {
                p.couplings[a.min(b) - 1]
            }
        };
        let mut m = DMatrix::zeros(pairs.len(), pairs.len());
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let v = if j - i == 1 { p.v } else { 0.0 };
            m[(row, row)] = p.eps[i - 1] + p.eps[j - 1] + v;
            let terms = [
                (i.wrapping_sub(1), j, t(i.wrapping_sub(1), i)),
                (i + 1, j, t(i, i + 1)),
                (i, j - 1, t(j - 1, j)),
                (i, j + 1, t(j, j + 1)),
            ];
            for (a, b, coeff) in terms {
                if let Some(col) = (a >= 1 && a < b && b <= n).then(|| pos(a, b)).flatten() {
                    m[(row, col)] += coeff;
                }
            }
        }
        m
    }

    #[test]
    fn two_electron_matches_hand_construction() {
        let p = ChainParams::uniform(4, 1.0).unwrap().with_v(2.5).unwrap();
        let h = build_2e(&p).unwrap();
        let reference = dense_pair_hamiltonian(&p);
        assert_eq!(h.hermitian_dense(), reference);

        let mut e_ref: Vec<f64> = SymmetricEigen::new(reference).eigenvalues.iter().copied().collect();
        e_ref.sort_by(f64::total_cmp);
        let e = sorted_eigs(&h);
        for (a, b) in e.iter().zip(&e_ref) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut q = ChainParams::optimal(7, 1.0).unwrap().with_v(0.3).unwrap();
        q.eps = (0..7).map(|k| 0.01 * k as f64).collect();
        assert_eq!(build_2e(&q).unwrap().hermitian_dense(), dense_pair_hamiltonian(&q));
    }

    #[test]
    fn two_electron_decay_sits_on_last_dot_pairs() {
        let p = ChainParams::uniform(5, 1.0).unwrap().with_gamma(0.3).unwrap();
        let h = build_2e(&p).unwrap();
        for k in 0..h.basis.dim() {
            let (_, j) = pair_2e(k, 5).unwrap();
            let im = h.matrix.get(k, k).im;
            assert_eq!(im, if j == 5 { -0.15 } else { 0.0 });
        }
        let dense = h.to_dense();
        for r in 0..dense.nrows() {
            for c in 0..dense.ncols() {
                if r != c {
                    assert_eq!(dense[(r, c)], dense[(c, r)]);
                    assert_eq!(dense[(r, c)].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn matrix_market_dump() {
        let h = build_1e(&ChainParams::uniform(3, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        h.matrix.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate complex general");
        assert_eq!(lines[1], "3 3 4");
        assert_eq!(lines.len(), 6);
    }
}
