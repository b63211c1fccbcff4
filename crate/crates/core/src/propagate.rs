//! Deterministic time evolution under a sector Hamiltonian.
//!
//! Two routes are available. The spectral route diagonalizes `H_eff` once and
//! evaluates `exp(-i H tau)` exactly; for `gamma = 0` this is a real symmetric
//! eigendecomposition, otherwise a complex Schur form followed by
//! back-substitution for the eigenvectors. When that eigenvector basis is
//! ill-conditioned the propagator falls back to adaptive Dormand-Prince
//! stepping, which is also available directly as a cross-check.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{CsrMatrix, SectorHamiltonian};
use crate::hilbert::{SectorBasis, StateVector, C64};

/// Eigenvector bases with a larger condition number are not trusted.
pub const MAX_EIGENBASIS_CONDITION: f64 = 1e8;

/// Largest dimension handled by dense diagonalization.
pub const MAX_SPECTRAL_DIM: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Stepping,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionPlan {
    pub method: Method,
    /// Output times, strictly increasing and non-negative.
    pub t_grid: Vec<f64>,
    /// Local error tolerance of the stepping route.
    pub tol: f64,
}

impl EvolutionPlan {
    pub fn new(method: Method, t_grid: Vec<f64>, tol: f64) -> Result<Self> {
        if t_grid.is_empty() {
            return invalid("time grid is empty");
        }
        if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("time grid must be non-negative and strictly increasing");
        }
        if !(tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {tol}"));
        }
        Ok(EvolutionPlan {
            method,
            t_grid,
            tol,
        })
    }

    /// Grid `0, dt, 2 dt, ...` up to and including `tau_end`.
    pub fn uniform(method: Method, tau_end: f64, dt: f64) -> Result<Self> {
        EvolutionPlan::new(method, uniform_grid(tau_end, dt)?, 1e-10)
    }
}

pub fn uniform_grid(tau_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && tau_end >= 0.0) {
        return invalid("need dt > 0 and tau_end >= 0");
    }
    let steps = (tau_end / dt + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if tau_end - grid[steps] > 1e-9 * dt {
        grid.push(tau_end);
    }
    Ok(grid)
}

#[derive(Clone, Debug)]
enum Route {
    /// `H = V diag(values) V^T` with `V` real orthogonal (stored complex).
    Hermitian {
        vectors: DMatrix<C64>,
        values: DVector<f64>,
    },
    /// `H = V diag(values) V^-1`.
    Diagonalized {
        vectors: DMatrix<C64>,
        inverse: DMatrix<C64>,
        values: DVector<C64>,
    },
    Stepping {
        matrix: CsrMatrix,
        tol: f64,
    },
}

/// Time-evolution operator for one sector Hamiltonian.
#[derive(Clone, Debug)]
pub struct Propagator {
    basis: SectorBasis,
    route: Route,
}

impl Propagator {
    /// Prepares a propagator. `Method::Spectral` silently degrades to stepping
    /// when the non-Hermitian eigenbasis is ill-conditioned or the sector is
    /// too large; [`Propagator::method`] reports what was used.
    pub fn new(h: &SectorHamiltonian, method: Method, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {tol}"));
        }
        let stepping = || Route::Stepping {
            matrix: h.matrix.clone(),
            tol,
        };
        let route = match method {
            Method::Stepping => stepping(),
            Method::Spectral if h.basis.dim() > MAX_SPECTRAL_DIM => stepping(),
            Method::Spectral if h.is_hermitian() => {
                let eig = SymmetricEigen::new(h.hermitian_dense());
                Route::Hermitian {
                    vectors: eig.eigenvectors.map(|x| C64::new(x, 0.0)),
                    values: eig.eigenvalues,
                }
            }
            Method::Spectral => diagonalize(&h.to_dense()).unwrap_or_else(stepping),
        };
        Ok(Propagator {
            basis: h.basis,
            route,
        })
    }

    pub fn basis(&self) -> SectorBasis {
        self.basis
    }

    pub fn method(&self) -> Method {
        match self.route {
            Route::Stepping { .. } => Method::Stepping,
            _ => Method::Spectral,
        }
    }

    /// Eigenvalues of `H_eff`, if the spectral route is in use.
    pub fn eigenvalues(&self) -> Option<Vec<C64>> {
        match &self.route {
            Route::Hermitian { values, .. } => Some(values.iter().map(|&v| C64::new(v, 0.0)).collect()),
            Route::Diagonalized { values, .. } => Some(values.iter().copied().collect()),
            Route::Stepping { .. } => None,
        }
    }

    /// Typical interval between norm checks when hunting for a jump.
    pub fn preferred_chunk(&self) -> f64 {
        match self.route {
            Route::Stepping { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// `exp(-i H dt) psi`; `tau` is only used to label integration failures.
    pub fn advance(&self, psi: &DVector<C64>, tau: f64, dt: f64) -> Result<DVector<C64>> {
        if psi.len() != self.basis.dim() {
            return invalid("state dimension does not match propagator");
        }
        if dt == 0.0 {
            return Ok(psi.clone());
        }
        match &self.route {
            Route::Hermitian { vectors, values } => {
                let mut c = vectors.tr_mul(psi);
                for (ck, &e) in c.iter_mut().zip(values.iter()) {
                    *ck *= C64::from_polar(1.0, -e * dt);
                }
                Ok(vectors * c)
            }
            Route::Diagonalized {
                vectors,
                inverse,
                values,
            } => {
                let mut c = inverse * psi;
                for (ck, &e) in c.iter_mut().zip(values.iter()) {
                    *ck *= (C64::new(0.0, -dt) * e).exp();
                }
                Ok(vectors * c)
            }
            Route::Stepping { matrix, tol } => {
                let mut h0 = 0.0;
                dopri5(matrix, psi, tau, tau + dt, *tol, &mut h0)
            }
        }
    }

    /// Full matrix `exp(-i H dt)`.
    pub fn matrix(&self, dt: f64) -> Result<DMatrix<C64>> {
        match &self.route {
            Route::Hermitian { vectors, values } => {
                let phases = values.map(|e| C64::from_polar(1.0, -e * dt));
                Ok(scale_columns(vectors, &phases) * vectors.transpose())
            }
            Route::Diagonalized {
                vectors,
                inverse,
                values,
            } => {
                let phases = values.map(|e| (C64::new(0.0, -dt) * e).exp());
                Ok(scale_columns(vectors, &phases) * inverse)
            }
            Route::Stepping { .. } => {
                let dim = self.basis.dim();
                let mut out = DMatrix::zeros(dim, dim);
                for k in 0..dim {
                    let mut e = DVector::zeros(dim);
                    e[k] = C64::new(1.0, 0.0);
                    out.set_column(k, &self.advance(&e, 0.0, dt)?);
                }
                Ok(out)
            }
        }
    }

    /// Finds the time in `(lo, hi]` where the squared norm drops to `level`,
    /// given `psi` at `lo` and a squared norm at `hi` already at or below it.
    ///
    /// Relies on the norm being non-increasing under `H_eff`.
    pub fn bisect_norm(
        &self,
        psi: &DVector<C64>,
        lo: f64,
        hi: f64,
        level: f64,
        tau_tol: f64,
    ) -> Result<(f64, DVector<C64>)> {
        let (mut a, mut b) = (lo, hi);
        let mut at_b = self.advance(psi, lo, hi - lo)?;
        while b - a > tau_tol {
            let mid = 0.5 * (a + b);
            let state = self.advance(psi, lo, mid - lo)?;
            if state.norm_squared() > level {
                a = mid;
            } else {
                b = mid;
                at_b = state;
            }
        }
        Ok((b, at_b))
    }
}

fn scale_columns(m: &DMatrix<C64>, factors: &DVector<C64>) -> DMatrix<C64> {
    let mut out = m.clone();
    for (k, f) in factors.iter().enumerate() {
        for x in out.column_mut(k).iter_mut() {
            *x *= *f;
        }
    }
    out
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a general complex matrix through its Schur form.
/// Returns `None` when the eigenvector basis is too ill-conditioned to use.
fn diagonalize(h: &DMatrix<C64>) -> Option<Route> {
    let dim = h.nrows();
    let scale = norm1(h).max(f64::MIN_POSITIVE);
    let (q, t) = Schur::try_new(h.clone(), f64::EPSILON, 10_000)?.unpack();
    let values: DVector<C64> = t.diagonal();
    let small = f64::EPSILON * scale;

    // Eigenvectors of the triangular factor, column k solving (T - t_kk) y = 0
    // with y_k = 1 and y_i = 0 below k.
    let mut y = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..dim {
        let lambda = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for m in i + 1..=k {
                acc += t[(i, m)] * y[(m, k)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let n = col.norm();
        if !(n.is_finite() && n > 0.0) {
            return None;
        }
        col.unscale_mut(n);
    }
    let inverse = vectors.clone().try_inverse()?;
    let condition = norm1(&vectors) * norm1(&inverse);
    if !(condition.is_finite() && condition <= MAX_EIGENBASIS_CONDITION) {
        return None;
    }
    // Reject decompositions that do not reproduce H.
    let residual = h * &vectors - scale_columns(&vectors, &values);
    if norm1(&residual) > 1e-9 * scale {
        return None;
    }
    Some(Route::Diagonalized {
        vectors,
        inverse,
        values,
    })
}

/// Dormand-Prince 5(4) for `dy/dt = -i H y` from `t0` to `t1`.
///
/// `h_step` carries the step size between calls; zero means "pick one".
fn dopri5(
    h: &CsrMatrix,
    y0: &DVector<C64>,
    t0: f64,
    t1: f64,
    tol: f64,
    h_step: &mut f64,
) -> Result<DVector<C64>> {
    const A2: [f64; 1] = [1.0 / 5.0];
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    const B: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    // Fifth- minus fourth-order weights.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let dim = y0.len();
    let rhs = |y: &DVector<C64>, out: &mut DVector<C64>| {
        h.mul_vec_into(y, out);
        for x in out.iter_mut() {
            *x = C64::new(x.im, -x.re);
        }
    };
    let combine = |y: &DVector<C64>, dt: f64, ks: &[&DVector<C64>], w: &[f64]| {
        let mut out = y.clone();
        for (k, &wi) in ks.iter().zip(w) {
            if wi != 0.0 {
                out.axpy(C64::new(dt * wi, 0.0), k, C64::new(1.0, 0.0));
            }
        }
        out
    };

    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y0.clone());
    }
    if *h_step <= 0.0 {
        *h_step = (0.01 / (1.0 + h.norm_inf())).min(span);
    }
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = DVector::zeros(dim);
    rhs(&y, &mut k1);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
    );
    while t < t1 {
        let last = t + *h_step >= t1;
        let dt = if last { t1 - t } else { *h_step };
        if dt < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                tau: t,
                reason: "step size underflow".into(),
            });
        }
        rhs(&combine(&y, dt, &[&k1], &A2), &mut k2);
        rhs(&combine(&y, dt, &[&k1, &k2], &A3), &mut k3);
        rhs(&combine(&y, dt, &[&k1, &k2, &k3], &A4), &mut k4);
        rhs(&combine(&y, dt, &[&k1, &k2, &k3, &k4], &A5), &mut k5);
        rhs(&combine(&y, dt, &[&k1, &k2, &k3, &k4, &k5], &A6), &mut k6);
        let y_new = combine(&y, dt, &[&k1, &k2, &k3, &k4, &k5, &k6], &B);
        rhs(&y_new, &mut k7);

        let err = combine(&DVector::zeros(dim), dt, &[&k1, &k2, &k3, &k4, &k5, &k6, &k7], &E);
        let mut acc = 0.0;
        for i in 0..dim {
            let sc = tol + tol * y[i].norm().max(y_new[i].norm());
            acc += (err[i].norm() / sc).powi(2);
        }
        let err_norm = (acc / dim as f64).sqrt();
        if !err_norm.is_finite() {
            return Err(Error::IntegrationFailure {
                tau: t,
                reason: "non-finite error estimate".into(),
            });
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err_norm <= 1.0 {
            t = if last { t1 } else { t + dt };
            y = y_new;
            std::mem::swap(&mut k1, &mut k7);
            if !last {
                *h_step = dt * factor;
            }
        } else {
            *h_step = dt * factor.min(1.0);
        }
    }
    Ok(y)
}

/// States sampled on a time grid by [`evolve`].
#[derive(Clone, Debug)]
pub struct Samples {
    pub taus: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Samples {
    /// Per-dot occupations, one row per sample.
    pub fn occupations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.occupations()).collect()
    }

    /// Writes `tau,dot_1,...,dot_N,norm2`.
    pub fn write_occupations_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states.first().map(|s| s.basis.n).unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["tau".to_string()];
        header.extend((1..=n).map(|j| format!("dot_{j}")));
        header.push("norm2".into());
        w.write_record(&header)?;
        for (tau, state) in self.taus.iter().zip(&self.states) {
            let mut row = vec![tau.to_string()];
            row.extend(state.occupations().iter().map(|p| p.to_string()));
            row.push(state.norm_sqr().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evolves `psi0` (given at `tau = 0`) and samples it on `plan.t_grid`.
pub fn evolve(h: &SectorHamiltonian, psi0: &StateVector, plan: &EvolutionPlan) -> Result<Samples> {
    if h.basis != psi0.basis {
        return invalid("state and Hamiltonian live in different sectors");
    }
    let propagator = Propagator::new(h, plan.method, plan.tol)?;
    evolve_with(&propagator, psi0, &plan.t_grid)
}

/// Same as [`evolve`] with a prepared propagator.
pub fn evolve_with(propagator: &Propagator, psi0: &StateVector, t_grid: &[f64]) -> Result<Samples> {
    if propagator.basis() != psi0.basis {
        return invalid("state and propagator live in different sectors");
    }
    let mut states = Vec::with_capacity(t_grid.len());
    match propagator.method() {
        // Exact from the start every time: no accumulated error.
        Method::Spectral => {
            for &tau in t_grid {
                states.push(psi0.with_amps(propagator.advance(&psi0.amps, 0.0, tau)?));
            }
        }
        Method::Stepping => {
            let (mut t, mut amps) = (0.0, psi0.amps.clone());
            for &tau in t_grid {
                amps = propagator.advance(&amps, t, tau - t)?;
                t = tau;
                states.push(psi0.with_amps(amps.clone()));
            }
        }
    }
    Ok(Samples {
        taus: t_grid.to_vec(),
        states,
    })
}

/// `||psi(tau)||^2` for each sample.
pub fn survival_probability(samples: &Samples) -> Vec<f64> {
    samples.states.iter().map(|s| s.norm_sqr()).collect()
}
