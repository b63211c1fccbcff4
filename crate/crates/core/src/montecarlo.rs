//! Quantum-jump trajectories with a single-electron detector on the last dot.
//!
//! A trajectory evolves under `H_eff` until its squared norm falls to a
//! uniform random level `r`. At that instant the detector clicks: the electron
//! on dot N is removed, the state is renormalized and demoted one sector
//! (two electrons to one, one to vacuum), and a fresh `r` is drawn.
//!
//! Every trajectory owns a ChaCha stream selected by its index from the master
//! seed, so ensembles are bit-identical whatever the thread count.

mod master;

pub use master::{master_equation_oracle, MasterEquationSolution, MAX_ORACLE_DOTS};

use std::io::Write;

use nalgebra::DVector;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hamiltonian::build;
use crate::hilbert::{index_2e, SectorBasis, SectorKind, Spin, SpinLabel, StateVector, C64};
use crate::model::{sample_disorder, ChainParams, DisorderSpec};
use crate::propagate::{Method, Propagator};

/// Stream reserved for a disorder draw shared by the whole ensemble.
const SHARED_DISORDER_STREAM: u64 = u64::MAX;

/// Initial basis state, as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    OneElectron {
        dot: usize,
        #[serde(default = "up")]
        spin: Spin,
    },
    TwoElectron {
        dots: (usize, usize),
        #[serde(default = "up_down")]
        spins: (Spin, Spin),
    },
}

fn up() -> Spin {
    Spin::Up
}

fn up_down() -> (Spin, Spin) {
    (Spin::Up, Spin::Down)
}

impl InitialState {
    pub fn state(&self, n: usize) -> Result<StateVector> {
        match *self {
            InitialState::OneElectron { dot, spin } => StateVector::one_electron(n, dot, spin),
            InitialState::TwoElectron { dots: (i, j), spins } => {
                if i < j {
                    StateVector::two_electron(n, i, j, spins)
                } else {
                    StateVector::two_electron(n, j, i, (spins.1, spins.0))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOptions {
    pub tau_end: f64,
    pub method: Method,
    pub tol: f64,
    /// Precision of the jump-time search.
    pub tau_tol: f64,
    /// Fresh disorder draw per trajectory (default) or one draw for all.
    pub redraw_disorder: bool,
    /// Times at which to record per-dot occupations of the normalized state.
    pub sample_grid: Option<Vec<f64>>,
}

impl TrajectoryOptions {
    pub fn new(tau_end: f64) -> Self {
        TrajectoryOptions {
            tau_end,
            method: Method::Spectral,
            tol: 1e-10,
            tau_tol: 1e-6,
            redraw_disorder: true,
            sample_grid: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau_end >= 0.0 && self.tau_end.is_finite()) {
            return invalid("tau_end must be finite and >= 0");
        }
        if !(self.tau_tol > 0.0 && self.tol > 0.0) {
            return invalid("tolerances must be positive");
        }
        if let Some(grid) = &self.sample_grid {
            if grid.windows(2).any(|w| !(w[1] > w[0]))
                || grid.first().is_some_and(|&t| t < 0.0)
                || grid.last().is_some_and(|&t| t > self.tau_end)
            {
                return invalid("sample grid must be increasing within [0, tau_end]");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub seed: u64,
    /// Detector clicks, strictly increasing.
    pub jump_times: Vec<f64>,
    /// Sector after each click: `Some(kind)` or `None` for the empty chain.
    pub sectors_after: Vec<Option<SectorKind>>,
    pub disorder_draw: ChainParams,
    /// Occupations on the sample grid, if one was requested.
    pub samples: Option<Vec<Vec<f64>>>,
}

/// RNG stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Disorder realization for trajectory `index`, drawn first from its stream.
pub fn disorder_for<R: Rng>(
    params: &ChainParams,
    spec: &DisorderSpec,
    redraw: bool,
    rng: &mut R,
) -> ChainParams {
    if redraw {
        sample_disorder(params, spec, rng)
    } else {
        shared_disorder(params, spec)
    }
}

/// The single realization used when disorder is not redrawn per trajectory.
pub fn shared_disorder(params: &ChainParams, spec: &DisorderSpec) -> ChainParams {
    sample_disorder(params, spec, &mut trajectory_rng(spec.seed, SHARED_DISORDER_STREAM))
}

/// Applies a detector click: removes the electron on dot N and renormalizes.
///
/// Two electrons `(i, N)` leave one electron on dot `i`, keeping the spin it
/// carried. Returns `None` when the chain is emptied.
pub fn project_jump(state: &StateVector) -> Result<Option<StateVector>> {
    let n = state.basis.n;
    match (state.basis.kind, state.spins) {
        (SectorKind::OneElectron, _) => Ok(None),
        (SectorKind::TwoElectron, SpinLabel::Pair(alpha, _)) => {
            let mut amps = DVector::<C64>::zeros(n);
            for i in 1..n {
                amps[i - 1] = state.amps[index_2e(i, n, n)?];
            }
            let norm = amps.norm();
            if norm == 0.0 {
                return invalid("no amplitude on the detector dot to project");
            }
            amps.unscale_mut(norm);
            StateVector::new(SectorBasis::one_electron(n), SpinLabel::One(alpha), amps).map(Some)
        }
        _ => invalid("inconsistent sector and spin label"),
    }
}

/// Runs trajectory number `index` of an ensemble.
pub fn run_trajectory(
    params: &ChainParams,
    disorder: &DisorderSpec,
    initial: &StateVector,
    index: u64,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    opts.validate()?;
    params.validate()?;
    if initial.basis.n != params.n {
        return invalid("initial state and chain have different sizes");
    }
    let mut rng = trajectory_rng(disorder.seed, index);
    let draw = disorder_for(params, disorder, opts.redraw_disorder, &mut rng);

    let grid: &[f64] = opts.sample_grid.as_deref().unwrap_or(&[]);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut record = TrajectoryRecord {
        index,
        seed: disorder.seed,
        jump_times: Vec::new(),
        sectors_after: Vec::new(),
        disorder_draw: draw.clone(),
        samples: None,
    };

    let mut state = Some(initial.normalized());
    let mut tau = 0.0;
    let mut level: f64 = rng.sample(Open01);
    let mut propagator = Propagator::new(&build(&draw, initial.basis.kind)?, opts.method, opts.tol)?;

    // Checkpoints: every sample time, then the end of the run.
    let checkpoints = grid.iter().copied().chain(std::iter::once(opts.tau_end));
    for (k, target) in checkpoints.enumerate() {
        let is_sample = k < grid.len();
        while let Some(current) = state.as_ref() {
            if tau >= target {
                break;
            }
            let stop = (tau + propagator.preferred_chunk()).min(target);
            let next = propagator.advance(&current.amps, tau, stop - tau)?;
            if next.norm_squared() > level {
                state = Some(current.with_amps(next));
                tau = stop;
                continue;
            }
            let (t_jump, at_jump) =
                propagator.bisect_norm(&current.amps, tau, stop, level, opts.tau_tol)?;
            let projected = project_jump(&current.with_amps(at_jump))?;
            record.jump_times.push(t_jump);
            record.sectors_after.push(projected.as_ref().map(|s| s.basis.kind));
            tau = t_jump;
            level = rng.sample(Open01);
            if let Some(s) = &projected {
                propagator = Propagator::new(&build(&draw, s.basis.kind)?, opts.method, opts.tol)?;
            }
            state = projected;
        }
        if is_sample {
            samples.push(match &state {
                Some(s) => s.normalized().occupations(),
                None => vec![0.0; params.n],
            });
        }
    }
    if opts.sample_grid.is_some() {
        record.samples = Some(samples);
    }
    Ok(record)
}

/// Runs trajectories `0..count` in parallel; output is ordered by index.
pub fn run_ensemble(
    params: &ChainParams,
    disorder: &DisorderSpec,
    initial: &StateVector,
    count: u64,
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count)
        .into_par_iter()
        .map(|k| run_trajectory(params, disorder, initial, k, opts))
        .collect()
}

/// Ensemble mean of the recorded occupation snapshots.
pub fn mean_occupations(records: &[TrajectoryRecord]) -> Result<Vec<Vec<f64>>> {
    let first = records
        .first()
        .and_then(|r| r.samples.as_ref())
        .ok_or_else(|| crate::Error::InvalidArgument("records carry no samples".into()))?;
    let mut mean = vec![vec![0.0; first.first().map_or(0, Vec::len)]; first.len()];
    for r in records {
        let samples = r
            .samples
            .as_ref()
            .filter(|s| s.len() == mean.len())
            .ok_or_else(|| crate::Error::InvalidArgument("records sampled on different grids".into()))?;
        for (acc, row) in mean.iter_mut().zip(samples) {
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p;
            }
        }
    }
    let n = records.len() as f64;
    mean.iter_mut().flatten().for_each(|a| *a /= n);
    Ok(mean)
}

/// Click rate per unit time per trajectory, histogrammed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorSignal {
    pub bin_edges: Vec<f64>,
    pub signal: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_trajectories: usize,
}

impl DetectorSignal {
    pub fn bin_mids(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Writes `tau_mid,signal,stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_mid", "signal", "stderr"])?;
        for ((mid, s), e) in self.bin_mids().iter().zip(&self.signal).zip(&self.stderr) {
            w.serialize((mid, s, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` equal bins on `[0, tau_end]`.
pub fn equal_bins(tau_end: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| tau_end * k as f64 / count as f64).collect()
}

/// Histogram of all jump times divided by `n_trajectories * bin_width`, with
/// binomial standard errors.
pub fn detector_signal(records: &[TrajectoryRecord], bin_edges: &[f64]) -> Result<DetectorSignal> {
    if records.is_empty() {
        return invalid("no trajectories to histogram");
    }
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("bin edges must be strictly increasing, at least two");
    }
    let bins = bin_edges.len() - 1;
    let last = bin_edges[bins];
    let mut counts = vec![0usize; bins];
    for t in records.iter().flat_map(|r| &r.jump_times) {
        if *t < bin_edges[0] || *t > last {
            continue;
        }
        // First edge strictly above t, minus one; the last edge closes the last bin.
        let k = bin_edges.partition_point(|e| e <= t).saturating_sub(1).min(bins - 1);
        counts[k] += 1;
    }
    let n = records.len() as f64;
    let (mut signal, mut stderr) = (Vec::with_capacity(bins), Vec::with_capacity(bins));
    for (k, &c) in counts.iter().enumerate() {
        let width = bin_edges[k + 1] - bin_edges[k];
        let p = (c as f64 / n).min(1.0);
        signal.push(c as f64 / n / width);
        stderr.push((p * (1.0 - p) / n).sqrt() / width);
    }
    Ok(DetectorSignal {
        bin_edges: bin_edges.to_vec(),
        signal,
        stderr,
        n_trajectories: records.len(),
    })
}
