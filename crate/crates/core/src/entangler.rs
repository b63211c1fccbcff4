//! Three-step generation of a spin-entangled electron pair.
//!
//! Two electrons start at the ends of the chain. The bond between the
//! entangler dots `L` and `R = L + 1` is closed, so each electron travels
//! along its own half-chain with optimal couplings and arrives at `L` or `R`
//! after `pi / (2 t0)`. A sech-shaped tunneling pulse then produces the
//! exchange rotation `exchange_unitary(theta)` while the orbitals stay frozen,
//! and a second transfer carries the electrons back to dots 1 and N.
//!
//! The Hamiltonian does not act on spin, so the state is always a spin-pair
//! vector times one orbital matrix `C[i][j]`, the amplitude for the left
//! electron on dot `i` and the right one on dot `R + j`. Transfer steps act as
//! `C -> U_L C U_R^T` with the two half-chain propagators.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::hamiltonian::build_1e;
use crate::hilbert::{index_2e, SectorBasis, Spin, SpinLabel, StateVector, C64};
use crate::model::{optimal_couplings, ChainParams, DisorderSpec, RegimeWarning, Severity};
use crate::montecarlo::{disorder_for, trajectory_rng};
use crate::propagate::{Method, Propagator};

/// Spin-pair sectors `(left, right)` in storage order.
pub const SECTORS: [(Spin, Spin); 4] = [
    (Spin::Up, Spin::Up),
    (Spin::Up, Spin::Down),
    (Spin::Down, Spin::Up),
    (Spin::Down, Spin::Down),
];

pub type SpinAmplitudes = Vector4<C64>;

pub fn sector_index(left: Spin, right: Spin) -> usize {
    match (left, right) {
        (Spin::Up, Spin::Up) => 0,
        (Spin::Up, Spin::Down) => 1,
        (Spin::Down, Spin::Up) => 2,
        (Spin::Down, Spin::Down) => 3,
    }
}

/// Unit vector on one spin-pair sector.
pub fn spin_basis(left: Spin, right: Spin) -> SpinAmplitudes {
    let mut v = SpinAmplitudes::zeros();
    v[sector_index(left, right)] = C64::new(1.0, 0.0);
    v
}

/// `(|up,down> + i |down,up>) / sqrt 2`.
pub fn entangled_spins() -> SpinAmplitudes {
    let mut v = SpinAmplitudes::zeros();
    v[1] = C64::new(FRAC_1_SQRT_2, 0.0);
    v[2] = C64::new(0.0, FRAC_1_SQRT_2);
    v
}

/// `cos(theta/2) I + i sin(theta/2) SWAP` on the sectors in [`SECTORS`] order.
///
/// Equal-spin sectors pick up `exp(i theta/2)`; `theta = pi/2` is the square
/// root of SWAP and `theta = pi` maps `|up,down>` to `i |down,up>`.
pub fn exchange_unitary(theta: f64) -> Matrix4<C64> {
    let c = C64::new((0.5 * theta).cos(), 0.0);
    let s = C64::new(0.0, (0.5 * theta).sin());
    let z = C64::new(0.0, 0.0);
    Matrix4::new(
        c + s, z, z, z, //
        z, c, s, z, //
        z, s, c, z, //
        z, z, z, c + s,
    )
}

/// Tunneling pulse `t_e(tau) = t_e_max sech((tau - tau_max) / delta_tau)`
/// between the entangler dots, giving the exchange `J = 4 t_e^2 / U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExchangePulse {
    pub t_e_max: f64,
    pub delta_tau: f64,
    pub tau_max: f64,
    pub u: f64,
}

impl ExchangePulse {
    pub fn new(t_e_max: f64, delta_tau: f64, tau_max: f64, u: f64) -> Result<Self> {
        if !(t_e_max >= 0.0 && t_e_max.is_finite()) {
            return invalid(format!("t_e_max must be finite and >= 0, got {t_e_max}"));
        }
        if !(delta_tau > 0.0 && delta_tau.is_finite() && u > 0.0 && u.is_finite()) {
            return invalid("pulse width and U must be positive");
        }
        if !tau_max.is_finite() {
            return invalid("pulse center must be finite");
        }
        Ok(ExchangePulse { t_e_max, delta_tau, tau_max, u })
    }

    /// Pulse of peak `t_e_max` whose width is chosen to give area `theta`.
    pub fn from_area(theta: f64, t_e_max: f64, u: f64, tau_max: f64) -> Result<Self> {
        if !(theta > 0.0 && t_e_max > 0.0) {
            return invalid("area and peak amplitude must be positive");
        }
        ExchangePulse::new(t_e_max, theta * u / (8.0 * t_e_max * t_e_max), tau_max, u)
    }

    pub fn tunneling(&self, tau: f64) -> f64 {
        self.t_e_max / ((tau - self.tau_max) / self.delta_tau).cosh()
    }

    pub fn exchange(&self, tau: f64) -> f64 {
        4.0 * self.tunneling(tau).powi(2) / self.u
    }

    /// Total area `8 t_e_max^2 delta_tau / U` over the whole real line.
    pub fn area(&self) -> f64 {
        8.0 * self.t_e_max * self.t_e_max * self.delta_tau / self.u
    }

    /// `int_a^b J dtau` by numerical quadrature, in pieces no wider than two
    /// pulse widths so the peak is always resolved.
    pub fn area_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let pieces = ((b - a) / (2.0 * self.delta_tau)).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + k as f64 * h;
                quadrature::double_exponential::integrate(|t| self.exchange(t), lo, lo + h, 1e-15).integral
            })
            .sum()
    }

    /// Warnings when `1/delta_tau` or `t_e_max` is not well below `U`.
    pub fn adiabaticity_warnings(&self) -> Vec<RegimeWarning> {
        let mut out = Vec::new();
        for (what, x) in [("1/delta_tau << U", 1.0 / self.delta_tau), ("t_e_max << U", self.t_e_max)] {
            let severity = if x >= self.u {
                Severity::Violated
            } else if 10.0 * x > self.u {
                Severity::Marginal
            } else {
                continue;
            };
            out.push(RegimeWarning {
                severity,
                message: format!("{what}: {x} vs {}", self.u),
            });
        }
        out
    }
}

/// Chain with optimal couplings on dots `1..=left` and `left+1..=n` and a
/// closed bond between them.
pub fn entangler_chain(n: usize, left: usize, t0: f64) -> Result<ChainParams> {
    if left == 0 || left >= n {
        return invalid(format!("entangler dot {left} must lie in 1..{n}"));
    }
    let half = |len: usize| if len > 1 { optimal_couplings(len, t0) } else { Ok(Vec::new()) };
    let mut couplings = half(left)?;
    couplings.push(0.0);
    couplings.extend(half(n - left)?);
    ChainParams::new(vec![0.0; n], couplings, 0.0, None, 0.0)
}

/// Timeline of the protocol. Step 1 runs on `[0, step1_end]`, the exchange
/// window on `[step1_end, exchange_end]`, step 3 from there to `end`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolSchedule {
    pub n: usize,
    pub left: usize,
    pub right: usize,
    pub step1_duration: f64,
    pub pulse: ExchangePulse,
    pub exchange_duration: f64,
    pub step3_duration: f64,
}

/// State of the barriers around the entangler dots during a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Barriers {
    /// L-R bond closed, outer bonds open: the halves carry the electrons.
    Transfer,
    /// Outer bonds closed, L-R tunneling pulsed.
    Exchange,
}

/// Pulse window extends this many widths on either side of the peak.
pub const PULSE_HALF_WINDOW: f64 = 12.0;

impl ProtocolSchedule {
    /// Standard schedule: transfers of `pi / (2 t0)` and a pulse of area
    /// `theta` centered in a window of `2 * PULSE_HALF_WINDOW` widths.
    pub fn new(n: usize, left: usize, t0: f64, t_e_max: f64, u: f64, theta: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return invalid("t0 must be positive");
        }
        let transfer = FRAC_PI_2 / t0;
        let width = theta * u / (8.0 * t_e_max * t_e_max);
        let pulse = ExchangePulse::from_area(theta, t_e_max, u, transfer + PULSE_HALF_WINDOW * width)?;
        ProtocolSchedule::with_pulse(n, left, transfer, pulse, 2.0 * PULSE_HALF_WINDOW * width)
    }

    /// Symmetric layout: `n = 2M`, entangler on `(M, M+1)`.
    pub fn symmetric(n: usize, t0: f64, t_e_max: f64, u: f64, theta: f64) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return invalid(format!("symmetric entangler needs an even chain, got {n}"));
        }
        ProtocolSchedule::new(n, n / 2, t0, t_e_max, u, theta)
    }

    pub fn with_pulse(
        n: usize,
        left: usize,
        transfer: f64,
        pulse: ExchangePulse,
        exchange_duration: f64,
    ) -> Result<Self> {
        if left == 0 || left >= n {
            return invalid(format!("entangler dot {left} must lie in 1..{n}"));
        }
        if !(transfer > 0.0 && exchange_duration >= 0.0) {
            return invalid("step durations must be positive");
        }
        Ok(ProtocolSchedule {
            n,
            left,
            right: left + 1,
            step1_duration: transfer,
            pulse,
            exchange_duration,
            step3_duration: transfer,
        })
    }

    pub fn step1_end(&self) -> f64 {
        self.step1_duration
    }

    pub fn exchange_end(&self) -> f64 {
        self.step1_duration + self.exchange_duration
    }

    pub fn end(&self) -> f64 {
        self.exchange_end() + self.step3_duration
    }

    /// Barrier configuration of steps 1, 2 and 3.
    pub fn barriers(&self) -> [Barriers; 3] {
        [Barriers::Transfer, Barriers::Exchange, Barriers::Transfer]
    }

    /// Exchange area actually applied, integrated over the window.
    pub fn applied_area(&self) -> f64 {
        self.pulse.area_between(self.step1_end(), self.exchange_end())
    }

    /// Sample times covering all three steps, at most `dt` apart, with every
    /// step boundary included once.
    pub fn sample_times(&self, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) {
            return invalid("sample spacing must be positive");
        }
        let bounds = [0.0, self.step1_end(), self.exchange_end(), self.end()];
        let mut out = vec![0.0];
        for w in bounds.windows(2) {
            let span = w[1] - w[0];
            if span <= 0.0 {
                continue;
            }
            let steps = (span / dt).ceil() as usize;
            out.extend((1..=steps).map(|k| w[0] + span * k as f64 / steps as f64));
        }
        Ok(out)
    }

    fn validate_for(&self, params: &ChainParams) -> Result<()> {
        if params.n != self.n {
            return invalid(format!("schedule is for {} dots, chain has {}", self.n, params.n));
        }
        if params.bond(self.left) != 0.0 {
            return invalid(format!(
                "bond {}-{} must be closed during transfer, got {}",
                self.left,
                self.right,
                params.bond(self.left)
            ));
        }
        if params.v != 0.0 {
            return invalid("entangler transfer assumes V = 0");
        }
        Ok(())
    }
}

/// Two electrons with four spin-pair sectors, each carrying an orbital vector
/// in the two-electron basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinPairState {
    pub sectors: Vec<StateVector>,
}

impl SpinPairState {
    /// `spins` tensored with one orbital two-electron vector.
    pub fn product(spins: &SpinAmplitudes, orbital: &DVector<C64>, n: usize) -> Result<Self> {
        let basis = SectorBasis::two_electron(n);
        let sectors = SECTORS
            .iter()
            .zip(spins.iter())
            .map(|(&(l, r), a)| StateVector::new(basis, SpinLabel::Pair(l, r), orbital * *a))
            .collect::<Result<_>>()?;
        Ok(SpinPairState { sectors })
    }

    /// `spins` with the electrons on dots `i < j`.
    pub fn localized(spins: &SpinAmplitudes, n: usize, i: usize, j: usize) -> Result<Self> {
        let mut orbital = DVector::zeros(SectorBasis::two_electron(n).dim());
        orbital[index_2e(i, j, n)?] = C64::new(1.0, 0.0);
        SpinPairState::product(spins, &orbital, n)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sectors.iter().map(StateVector::norm_sqr).sum()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &SpinPairState) -> C64 {
        self.sectors
            .iter()
            .zip(&other.sectors)
            .map(|(a, b)| a.amps.dotc(&b.amps))
            .sum()
    }

    /// `|<target|self>|^2` with both states normalized.
    pub fn fidelity(&self, target: &SpinPairState) -> f64 {
        target.overlap(self).norm_sqr() / (self.norm_sqr() * target.norm_sqr())
    }
}

/// The four reference states of the protocol for a `|1 a, N b>` start.
#[derive(Clone, Copy, Debug)]
struct References {
    /// Spin vectors of phi_0..phi_3.
    spins: [SpinAmplitudes; 4],
    /// Whether phi_k sits at the ends (true) or on the entangler (false).
    at_ends: [bool; 4],
}

impl References {
    fn standard() -> Self {
        let start = spin_basis(Spin::Up, Spin::Down);
        References {
            spins: [start, start, entangled_spins(), entangled_spins()],
            at_ends: [true, false, false, true],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOptions {
    pub trajectories: u64,
    /// Largest spacing of the overlap traces.
    pub sample_dt: f64,
    pub redraw_disorder: bool,
    /// Precision of jump times.
    pub tau_tol: f64,
    /// Spin state of the electrons starting on dots 1 and N.
    pub initial_spins: SpinAmplitudes,
}

impl ProtocolOptions {
    pub fn new(trajectories: u64) -> Self {
        ProtocolOptions {
            trajectories,
            sample_dt: 0.01,
            redraw_disorder: true,
            tau_tol: 1e-6,
            initial_spins: spin_basis(Spin::Up, Spin::Down),
        }
    }
}

/// One protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolTrajectory {
    pub index: u64,
    /// Detector click, if any; the pair is lost from then on.
    pub jump_time: Option<f64>,
    /// Weight of the pair on `(L, R)` at the end of step 1.
    pub trapped_population: f64,
    /// `|<phi_k|psi(tau)>|^2` on the sample grid, zero after a click.
    pub traces: Vec<[f64; 4]>,
    /// Normalized final state if no click happened.
    pub final_state: Option<SpinPairState>,
}

impl ProtocolTrajectory {
    /// Final `|<phi_3|psi>|^2`; zero for a trajectory that lost an electron.
    pub fn fidelity(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t[3])
    }
}

/// Prepared half-chain propagators for one disorder realization.
struct HalfChains {
    left: Propagator,
    right: Propagator,
    left_len: usize,
    right_len: usize,
}

impl HalfChains {
    fn new(draw: &ChainParams, schedule: &ProtocolSchedule) -> Result<Self> {
        let left = draw.subchain(1, schedule.left)?;
        let right = draw.subchain(schedule.right, schedule.n)?;
        Ok(HalfChains {
            left: Propagator::new(&build_1e(&left)?, Method::Spectral, 1e-10)?,
            right: Propagator::new(&build_1e(&right)?, Method::Spectral, 1e-10)?,
            left_len: left.n,
            right_len: right.n,
        })
    }

    fn evolve(&self, c: &DMatrix<C64>, dt: f64) -> Result<DMatrix<C64>> {
        if dt == 0.0 {
            return Ok(c.clone());
        }
        Ok(self.left.matrix(dt)? * c * self.right.matrix(dt)?.transpose())
    }
}

/// Runs one trajectory on an already drawn chain. `level` supplies the random
/// norm threshold of the detector.
fn run_on_chain(
    draw: &ChainParams,
    schedule: &ProtocolSchedule,
    opts: &ProtocolOptions,
    area: &AreaTable,
    level: f64,
    index: u64,
) -> Result<ProtocolTrajectory> {
    let chains = HalfChains::new(draw, schedule)?;
    let (ll, rl) = (chains.left_len, chains.right_len);
    let refs = References::standard();
    let a0 = opts.initial_spins.normalize();

    let mut c0 = DMatrix::zeros(ll, rl);
    c0[(0, rl - 1)] = C64::new(1.0, 0.0);

    let t1 = schedule.step1_end();
    let t2 = schedule.exchange_end();
    // Orbital and spin state at any time, given the state at the end of step 1.
    let orbital_at = |tau: f64, c1: Option<&DMatrix<C64>>| -> Result<DMatrix<C64>> {
        match c1 {
            None => chains.evolve(&c0, tau),
            Some(c1) if tau <= t2 => Ok(c1.clone()),
            Some(c1) => chains.evolve(c1, tau - t2),
        }
    };
    let spins_at = |k: usize| exchange_unitary(area.cumulative[k]) * a0;

    let mut traces = Vec::with_capacity(area.taus.len());
    let mut c1: Option<DMatrix<C64>> = None;
    let mut trapped = 0.0;
    let mut jump_time = None;
    let mut last_tau = 0.0f64;
    let mut final_state = None;
    for (k, &tau) in area.taus.iter().enumerate() {
        let c = orbital_at(tau, if tau > t1 { c1.as_ref() } else { None })?;
        let norm_sqr = c.norm_squared();
        if norm_sqr <= level {
            // The norm only falls during transfers; bisect on that segment.
            let (base, offset) = match &c1 {
                Some(c1) => (c1, t2),
                None => (&c0, 0.0),
            };
            let (mut a, mut b) = (last_tau.max(offset), tau);
            while b - a > opts.tau_tol {
                let mid = 0.5 * (a + b);
                if chains.evolve(base, mid - offset)?.norm_squared() > level {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            jump_time = Some(b);
            traces.resize(area.taus.len(), [0.0; 4]);
            break;
        }
        let spins = spins_at(k);
        let scale = 1.0 / norm_sqr;
        let mut row = [0.0; 4];
        for (slot, (ref_spins, at_ends)) in row.iter_mut().zip(refs.spins.iter().zip(refs.at_ends)) {
            let amp = if at_ends { c[(0, rl - 1)] } else { c[(ll - 1, 0)] };
            *slot = (ref_spins.dotc(&spins) * amp).norm_sqr() * scale;
        }
        traces.push(row);
        if tau == t1 {
            trapped = c[(ll - 1, 0)].norm_sqr() * scale;
            c1 = Some(c.clone());
        }
        if k + 1 == area.taus.len() {
            final_state = Some(embed(&c.unscale(norm_sqr.sqrt()), &spins, schedule)?);
        }
        last_tau = tau;
    }
    Ok(ProtocolTrajectory {
        index,
        jump_time,
        trapped_population: trapped,
        traces,
        final_state,
    })
}

/// Orbital matrix and spins as a [`SpinPairState`] on the full chain.
fn embed(c: &DMatrix<C64>, spins: &SpinAmplitudes, schedule: &ProtocolSchedule) -> Result<SpinPairState> {
    let n = schedule.n;
    let mut orbital = DVector::zeros(SectorBasis::two_electron(n).dim());
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            orbital[index_2e(i + 1, schedule.right + j, n)?] = c[(i, j)];
        }
    }
    SpinPairState::product(spins, &orbital, n)
}

/// Sample times with the exchange area accumulated up to each of them.
struct AreaTable {
    taus: Vec<f64>,
    cumulative: Vec<f64>,
}

impl AreaTable {
    fn new(schedule: &ProtocolSchedule, dt: f64) -> Result<Self> {
        let taus = schedule.sample_times(dt)?;
        let (t1, t2) = (schedule.step1_end(), schedule.exchange_end());
        let total = schedule.applied_area();
        let cumulative = taus
            .iter()
            .map(|&t| {
                if t <= t1 {
                    0.0
                } else if t >= t2 {
                    total
                } else {
                    schedule.pulse.area_between(t1, t)
                }
            })
            .collect();
        Ok(AreaTable { taus, cumulative })
    }
}

/// Ensemble result of [`run_protocol`].
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub taus: Vec<f64>,
    /// Trajectory average of the overlaps, lost pairs counting as zero.
    pub traces: Vec<[f64; 4]>,
    /// Average over trajectories without a detector click.
    pub no_jump_traces: Option<Vec<[f64; 4]>>,
    pub trajectories: Vec<ProtocolTrajectory>,
    pub applied_area: f64,
    pub warnings: Vec<String>,
}

impl ProtocolOutcome {
    /// Mean final fidelity, lost pairs counting as zero.
    pub fn fidelity(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t[3])
    }

    /// Mean final fidelity of the trajectories that kept both electrons.
    pub fn no_jump_fidelity(&self) -> Option<f64> {
        self.no_jump_traces.as_ref().and_then(|t| t.last()).map(|t| t[3])
    }

    pub fn no_jump_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.jump_time.is_none()).count()
    }

    /// Writes `tau,phi0,phi1,phi2,phi3`; `no_jump` selects the conditioned
    /// average.
    pub fn write_csv<W: Write>(&self, out: W, no_jump: bool) -> Result<()> {
        let rows = match (no_jump, &self.no_jump_traces) {
            (false, _) => &self.traces,
            (true, Some(t)) => t,
            (true, None) => return invalid("every trajectory lost an electron"),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "phi0", "phi1", "phi2", "phi3"])?;
        for (tau, r) in self.taus.iter().zip(rows) {
            w.serialize((tau, r[0], r[1], r[2], r[3]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs trajectory `index`: disorder draw and detector thresholds come from
/// the same per-trajectory stream as in [`crate::montecarlo`].
pub fn run_protocol_trajectory(
    params: &ChainParams,
    disorder: &DisorderSpec,
    schedule: &ProtocolSchedule,
    opts: &ProtocolOptions,
    index: u64,
) -> Result<ProtocolTrajectory> {
    let area = AreaTable::new(schedule, opts.sample_dt)?;
    trajectory_with(params, disorder, schedule, opts, &area, index)
}

fn trajectory_with(
    params: &ChainParams,
    disorder: &DisorderSpec,
    schedule: &ProtocolSchedule,
    opts: &ProtocolOptions,
    area: &AreaTable,
    index: u64,
) -> Result<ProtocolTrajectory> {
    schedule.validate_for(params)?;
    let mut rng = trajectory_rng(disorder.seed, index);
    let draw = disorder_for(params, disorder, opts.redraw_disorder, &mut rng);
    let level: f64 = rng.sample(Open01);
    run_on_chain(&draw, schedule, opts, area, level, index)
}

/// Runs the protocol for `opts.trajectories` independent trajectories.
pub fn run_protocol(
    params: &ChainParams,
    disorder: &DisorderSpec,
    schedule: &ProtocolSchedule,
    opts: &ProtocolOptions,
) -> Result<ProtocolOutcome> {
    params.validate()?;
    schedule.validate_for(params)?;
    if opts.trajectories == 0 {
        return invalid("need at least one trajectory");
    }
    if !(opts.initial_spins.norm() > 0.0) {
        return invalid("initial spin state is zero");
    }
    let area = AreaTable::new(schedule, opts.sample_dt)?;
    let trajectories: Vec<ProtocolTrajectory> = (0..opts.trajectories)
        .into_par_iter()
        .map(|k| trajectory_with(params, disorder, schedule, opts, &area, k))
        .collect::<Result<_>>()?;

    let samples = area.taus.len();
    let average = |filter: &dyn Fn(&ProtocolTrajectory) -> bool| -> Option<Vec<[f64; 4]>> {
        let chosen: Vec<_> = trajectories.iter().filter(|t| filter(t)).collect();
        if chosen.is_empty() {
            return None;
        }
        let mut acc = vec![[0.0; 4]; samples];
        for t in &chosen {
            for (a, r) in acc.iter_mut().zip(&t.traces) {
                for (x, y) in a.iter_mut().zip(r) {
                    *x += y;
                }
            }
        }
        let n = chosen.len() as f64;
        acc.iter_mut().flatten().for_each(|x| *x /= n);
        Some(acc)
    };
    let traces = average(&|_| true).unwrap_or_default();
    let no_jump_traces = average(&|t| t.jump_time.is_none());

    let mut warnings: Vec<String> = schedule
        .pulse
        .adiabaticity_warnings()
        .iter()
        .map(ToString::to_string)
        .collect();
    let poorly_trapped = trajectories
        .iter()
        .filter(|t| t.jump_time.is_none_or(|j| j > schedule.step1_end()) && t.trapped_population < 1.0 - 1e-3)
        .count();
    if poorly_trapped > 0 {
        warnings.push(format!(
            "{poorly_trapped} of {} trajectories trapped less than 0.999 of the pair on the entangler",
            trajectories.len()
        ));
    }
    Ok(ProtocolOutcome {
        taus: area.taus,
        traces,
        no_jump_traces,
        applied_area: area.cumulative.last().copied().unwrap_or(0.0),
        trajectories,
        warnings,
    })
}
