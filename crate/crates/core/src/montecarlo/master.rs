//! Lindblad master equation for one electron and a vacuum level, used as an
//! independent check of the trajectory ensemble.
//!
//! `d rho / d tau = -i (H_eff rho - rho H_eff^dag)` on the chain, and the
//! vacuum population grows at `gamma * rho_NN`. Integrated with fixed-step RK4,
//! which conserves the linear invariant `tr rho + p_vac` to round-off.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::build_1e;
use crate::hilbert::{SectorKind, StateVector, C64};
use crate::model::ChainParams;

/// Largest chain the dense density-matrix oracle accepts.
pub const MAX_ORACLE_DOTS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MasterEquationSolution {
    pub taus: Vec<f64>,
    /// `populations[k][j]`: `rho_jj` at `taus[k]`.
    pub populations: Vec<Vec<f64>>,
    pub vacuum: Vec<f64>,
    /// Detector click rate `gamma * rho_NN`.
    pub flux: Vec<f64>,
}

impl MasterEquationSolution {
    /// `tr rho + p_vac` at every sample; stays at the initial norm.
    pub fn total_probability(&self) -> Vec<f64> {
        self.populations
            .iter()
            .zip(&self.vacuum)
            .map(|(p, v)| p.iter().sum::<f64>() + v)
            .collect()
    }
}

struct Rhs {
    h: DMatrix<C64>,
    h_dag: DMatrix<C64>,
    gamma: f64,
}

impl Rhs {
    fn eval(&self, rho: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
        let minus_i = C64::new(0.0, -1.0);
        let d = (&self.h * rho - rho * &self.h_dag) * minus_i;
        let n = rho.nrows();
        (d, self.gamma * rho[(n - 1, n - 1)].re)
    }
}

/// Solves the one-electron master equation from the pure state `psi0` and
/// samples it on `t_grid` (increasing, starting at or after zero).
pub fn master_equation_oracle(
    params: &ChainParams,
    psi0: &StateVector,
    t_grid: &[f64],
) -> Result<MasterEquationSolution> {
    if params.n > MAX_ORACLE_DOTS {
        return Err(Error::SizeLimit(format!(
            "density-matrix oracle supports at most {MAX_ORACLE_DOTS} dots, got {}",
            params.n
        )));
    }
    if psi0.basis.kind != SectorKind::OneElectron || psi0.basis.n != params.n {
        return invalid("oracle needs a one-electron state on the same chain");
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("time grid must be increasing and non-negative");
    }
    let h = build_1e(params)?.to_dense();
    let rhs = Rhs {
        h_dag: h.adjoint(),
        h,
        gamma: params.gamma,
    };
    let scale = rhs.h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(params.gamma);
    let h_max = if scale > 0.0 { 0.005 / scale } else { f64::INFINITY };

    let psi: &DVector<C64> = &psi0.amps;
    let mut rho = psi * psi.adjoint();
    let mut vac = 0.0;
    let mut tau = 0.0;
    let mut out = MasterEquationSolution {
        taus: Vec::with_capacity(t_grid.len()),
        populations: Vec::with_capacity(t_grid.len()),
        vacuum: Vec::with_capacity(t_grid.len()),
        flux: Vec::with_capacity(t_grid.len()),
    };
    for &target in t_grid {
        let span = target - tau;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                let (k1, v1) = rhs.eval(&rho);
                let (k2, v2) = rhs.eval(&(&rho + &k1 * C64::from(0.5 * dt)));
                let (k3, v3) = rhs.eval(&(&rho + &k2 * C64::from(0.5 * dt)));
                let (k4, v4) = rhs.eval(&(&rho + &k3 * C64::from(dt)));
                rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
                vac += dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
            }
            tau = target;
        }
        let n = params.n;
        out.taus.push(target);
        out.populations.push((0..n).map(|j| rho[(j, j)].re).collect());
        out.vacuum.push(vac);
        out.flux.push(params.gamma * rho[(n - 1, n - 1)].re);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Spin;

    #[test]
    fn probability_is_conserved() {
        let p = ChainParams::uniform(3, 1.0).unwrap().with_gamma(0.2).unwrap();
        let psi = StateVector::one_electron(3, 1, Spin::Up).unwrap();
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
        let sol = master_equation_oracle(&p, &psi, &grid).unwrap();
        for total in sol.total_probability() {
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(sol.vacuum.last().unwrap() > &0.5);
    }

    #[test]
    fn single_dot_decays_exponentially() {
        let p = ChainParams::uniform(1, 1.0).unwrap().with_gamma(0.7).unwrap();
        let psi = StateVector::one_electron(1, 1, Spin::Up).unwrap();
        let sol = master_equation_oracle(&p, &psi, &[0.0, 1.0, 3.0]).unwrap();
        for (tau, pop) in sol.taus.iter().zip(&sol.populations) {
            assert!((pop[0] - (-0.7 * tau).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_chain_matches_rabi() {
        let p = ChainParams::uniform(2, 1.0).unwrap();
        let psi = StateVector::one_electron(2, 1, Spin::Up).unwrap();
        let sol = master_equation_oracle(&p, &psi, &[0.4, 1.1]).unwrap();
        for (tau, pop) in sol.taus.iter().zip(&sol.populations) {
            assert!((pop[1] - tau.sin().powi(2)).abs() < 1e-10);
        }
        assert!(sol.vacuum.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn refuses_large_chains() {
        let p = ChainParams::uniform(33, 1.0).unwrap();
        let psi = StateVector::one_electron(33, 1, Spin::Up).unwrap();
        let err = master_equation_oracle(&p, &psi, &[1.0]).unwrap_err();
        assert_eq!(err.kind(), "size-limit");
    }
}
