//! Experiment descriptions and the runner behind the `qdchain` tool.
//!
//! Every run writes its CSV files plus `<kind>.meta.json`, which holds the
//! fully resolved configuration, the seed and the crate version. Feeding that
//! sidecar back as a config reproduces the run bit for bit.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic::{
    optimal_1e_amplitude, optimal_2e_amplitude, spectrum, uniform_1e_amplitude, SpectrumKind, SpectrumSpec,
};
use crate::entangler::{entangler_chain, run_protocol, ProtocolOptions, ProtocolSchedule};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::build;
use crate::hilbert::{pair_2e, SectorKind, Spin, StateVector, C64};
use crate::model::{validate_regime, ChainConfig, ChainParams, CouplingProfile, DisorderSpec, ProfileName};
use crate::montecarlo::{
    detector_signal, equal_bins, mean_occupations, run_ensemble, shared_disorder, InitialState, TrajectoryOptions,
};
use crate::propagate::{evolve, uniform_grid, EvolutionPlan, Method};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest sector dimension for which Monte Carlo runs default to the
/// spectral route; above it one diagonalization per trajectory costs more
/// than stepping.
pub const AUTO_SPECTRAL_MAX_DIM: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "transport-1e")]
    Transport1e,
    #[serde(rename = "transport-2e")]
    Transport2e,
    #[serde(rename = "mc-1e")]
    Mc1e,
    #[serde(rename = "mc-2e")]
    Mc2e,
    Entangle,
    OracleCheck,
    Spectra,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Transport1e,
        ExperimentKind::Transport2e,
        ExperimentKind::Mc1e,
        ExperimentKind::Mc2e,
        ExperimentKind::Entangle,
        ExperimentKind::OracleCheck,
        ExperimentKind::Spectra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Transport1e => "transport-1e",
            ExperimentKind::Transport2e => "transport-2e",
            ExperimentKind::Mc1e => "mc-1e",
            ExperimentKind::Mc2e => "mc-2e",
            ExperimentKind::Entangle => "entangle",
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::Spectra => "spectra",
        }
    }

    fn sector(self) -> Option<SectorKind> {
        match self {
            ExperimentKind::Transport1e | ExperimentKind::Mc1e => Some(SectorKind::OneElectron),
            ExperimentKind::Transport2e | ExperimentKind::Mc2e => Some(SectorKind::TwoElectron),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment kind {s:?}")))
    }
}

fn spectral() -> Method {
    Method::Spectral
}

fn yes() -> bool {
    true
}

/// Coherent evolution under `H_eff` without detector clicks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub chain: ChainConfig,
    pub initial: InitialState,
    pub tau_end: f64,
    pub dt: f64,
    #[serde(default = "spectral")]
    pub method: Method,
}

/// Quantum-jump ensemble with a detector on the last dot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub chain: ChainConfig,
    pub initial: InitialState,
    pub tau_end: f64,
    pub bins: usize,
    pub trajectories: u64,
    #[serde(default = "yes")]
    pub redraw_disorder: bool,
    /// Unset: spectral for small sectors, stepping above
    /// [`AUTO_SPECTRAL_MAX_DIM`].
    #[serde(default)]
    pub method: Option<Method>,
    /// Also write ensemble-averaged occupations at this spacing.
    #[serde(default)]
    pub sample_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntangleConfig {
    pub n: usize,
    /// Left entangler dot; the middle of the chain when unset.
    #[serde(default)]
    pub left: Option<usize>,
    pub t0: f64,
    pub t_e_max: f64,
    pub u: f64,
    pub theta: f64,
    pub gamma: f64,
    pub disorder: DisorderSpec,
    pub trajectories: u64,
    pub sample_dt: f64,
    #[serde(default = "yes")]
    pub redraw_disorder: bool,
    /// Write the traces averaged over trajectories without a click.
    #[serde(default)]
    pub post_select: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub sizes: Vec<usize>,
    pub t0: f64,
    pub tau_end: f64,
    pub dt: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub family: SpectrumKind,
    pub n: usize,
    pub t0: f64,
}

/// A complete experiment, tagged by `kind` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Experiment {
    #[serde(rename = "transport-1e")]
    Transport1e(TransportConfig),
    #[serde(rename = "transport-2e")]
    Transport2e(TransportConfig),
    #[serde(rename = "mc-1e")]
    Mc1e(MonteCarloConfig),
    #[serde(rename = "mc-2e")]
    Mc2e(MonteCarloConfig),
    #[serde(rename = "entangle")]
    Entangle(EntangleConfig),
    #[serde(rename = "oracle-check")]
    OracleCheck(OracleConfig),
    #[serde(rename = "spectra")]
    Spectra(SpectraConfig),
}

fn chain(n: usize, profile: ProfileName, gamma: f64, disorder: Option<DisorderSpec>) -> ChainConfig {
    ChainConfig {
        n,
        eps0: 0.0,
        t0: 1.0,
        coupling_profile: CouplingProfile::Named(profile),
        v: 0.0,
        u: None,
        gamma,
        disorder,
    }
}

impl Experiment {
    /// Desk-scale defaults for each kind: 20 dots, 5000 trajectories.
    pub fn default_for(kind: ExperimentKind) -> Experiment {
        let one = InitialState::OneElectron { dot: 1, spin: Spin::Up };
        let two = InitialState::TwoElectron {
            dots: (1, 2),
            spins: (Spin::Up, Spin::Down),
        };
        let noisy = DisorderSpec {
            delta_eps: 0.1,
            delta_t: 0.05,
            seed: 1,
        };
        match kind {
            ExperimentKind::Transport1e => Experiment::Transport1e(TransportConfig {
                chain: chain(20, ProfileName::Uniform, 0.0, None),
                initial: one,
                tau_end: 40.0,
                dt: 0.05,
                method: Method::Spectral,
            }),
            ExperimentKind::Transport2e => Experiment::Transport2e(TransportConfig {
                chain: chain(20, ProfileName::Uniform, 0.0, None),
                initial: two,
                tau_end: 200.0,
                dt: 0.1,
                method: Method::Spectral,
            }),
            ExperimentKind::Mc1e => Experiment::Mc1e(MonteCarloConfig {
                chain: chain(20, ProfileName::Uniform, 0.2, Some(noisy)),
                initial: one,
                tau_end: 100.0,
                bins: 100,
                trajectories: 5000,
                redraw_disorder: true,
                method: None,
                sample_dt: None,
            }),
            ExperimentKind::Mc2e => Experiment::Mc2e(MonteCarloConfig {
                chain: chain(20, ProfileName::Uniform, 0.2, Some(noisy)),
                initial: two,
                tau_end: 200.0,
                bins: 100,
                trajectories: 5000,
                redraw_disorder: true,
                method: None,
                sample_dt: None,
            }),
            ExperimentKind::Entangle => Experiment::Entangle(EntangleConfig {
                n: 20,
                left: None,
                t0: 1.0,
                t_e_max: 6.0,
                u: 100.0,
                theta: FRAC_PI_2,
                gamma: 0.2,
                disorder: noisy,
                trajectories: 5000,
                sample_dt: 0.01,
                redraw_disorder: true,
                post_select: false,
            }),
            ExperimentKind::OracleCheck => Experiment::OracleCheck(OracleConfig {
                sizes: vec![2, 5, 20],
                t0: 1.0,
                tau_end: 30.0,
                dt: 0.05,
                tolerance: 1e-8,
            }),
            ExperimentKind::Spectra => Experiment::Spectra(SpectraConfig {
                family: SpectrumKind::Optimal2e,
                n: 20,
                t0: 1.0,
            }),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::Transport1e(_) => ExperimentKind::Transport1e,
            Experiment::Transport2e(_) => ExperimentKind::Transport2e,
            Experiment::Mc1e(_) => ExperimentKind::Mc1e,
            Experiment::Mc2e(_) => ExperimentKind::Mc2e,
            Experiment::Entangle(_) => ExperimentKind::Entangle,
            Experiment::OracleCheck(_) => ExperimentKind::OracleCheck,
            Experiment::Spectra(_) => ExperimentKind::Spectra,
        }
    }

    /// Reads a config for `kind` from JSON. Accepts a full experiment, a
    /// metadata sidecar written by [`run`], or a bare chain description that
    /// replaces the chain of the default experiment.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Experiment> {
        let value: Value = serde_json::from_str(text)?;
        let exp = if let Some(config) = value.get("config") {
            serde_json::from_value(config.clone())?
        } else if value.get("kind").is_some() {
            serde_json::from_value(value)?
        } else {
            let mut exp = Experiment::default_for(kind);
            let chain: ChainConfig = serde_json::from_value(value)?;
            match exp.chain_mut() {
                Some(slot) => *slot = chain,
                None => return invalid(format!("{kind} takes no chain description")),
            }
            exp
        };
        if exp.kind() != kind {
            return invalid(format!("config is for {}, not {kind}", exp.kind()));
        }
        Ok(exp)
    }

    pub fn load(kind: ExperimentKind, path: impl AsRef<Path>) -> Result<Experiment> {
        Experiment::from_json(kind, &std::fs::read_to_string(path)?)
    }

    pub fn chain_mut(&mut self) -> Option<&mut ChainConfig> {
        match self {
            Experiment::Transport1e(c) | Experiment::Transport2e(c) => Some(&mut c.chain),
            Experiment::Mc1e(c) | Experiment::Mc2e(c) => Some(&mut c.chain),
            _ => None,
        }
    }

    /// Master seed of the run, if it uses randomness.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Experiment::Transport1e(c) | Experiment::Transport2e(c) => c.chain.disorder.as_ref().map(|d| d.seed),
            Experiment::Mc1e(c) | Experiment::Mc2e(c) => Some(c.chain.disorder.as_ref().map_or(0, |d| d.seed)),
            Experiment::Entangle(c) => Some(c.disorder.seed),
            _ => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Experiment::Entangle(c) => c.disorder.seed = seed,
            other => {
                if let Some(chain) = other.chain_mut() {
                    chain.disorder.get_or_insert_with(|| DisorderSpec::none(seed)).seed = seed;
                }
            }
        }
    }

    pub fn set_trajectories(&mut self, count: u64) {
        match self {
            Experiment::Mc1e(c) | Experiment::Mc2e(c) => c.trajectories = count,
            Experiment::Entangle(c) => c.trajectories = count,
            _ => {}
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub warnings: Vec<String>,
    /// False when a check experiment found a mismatch.
    pub passed: bool,
}

/// Contents of `<kind>.meta.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub config: Experiment,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub warnings: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn create(&mut self, name: String) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }
}

/// Runs `exp`, writing its outputs and sidecar into `out_dir`.
pub fn run(exp: &Experiment, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir)?;
    let kind = exp.kind();
    let mut out = Outputs {
        dir: out_dir,
        files: Vec::new(),
    };
    let (summary, warnings, passed) = match exp {
        Experiment::Transport1e(c) | Experiment::Transport2e(c) => run_transport(kind, c, &mut out)?,
        Experiment::Mc1e(c) | Experiment::Mc2e(c) => run_monte_carlo(kind, c, &mut out)?,
        Experiment::Entangle(c) => run_entangle(c, &mut out)?,
        Experiment::OracleCheck(c) => {
            let report = oracle_check(c)?;
            serde_json::to_writer_pretty(out.create(format!("{kind}.json"))?, &report)?;
            (serde_json::to_value(&report)?, Vec::new(), report.pass)
        }
        Experiment::Spectra(c) => run_spectra(c, &mut out)?,
    };
    let sidecar = Sidecar {
        version: VERSION.to_string(),
        kind,
        seed: exp.seed(),
        config: exp.clone(),
        outputs: out
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        summary: summary.clone(),
        warnings: warnings.clone(),
    };
    let meta = out_dir.join(format!("{kind}.meta.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&meta)?), &sidecar)?;
    out.files.push(meta);
    Ok(RunReport {
        kind,
        outputs: out.files,
        summary,
        warnings,
        passed,
    })
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return invalid(format!("{what} must be positive, got {x}"));
    }
    Ok(())
}

fn initial_for(kind: ExperimentKind, initial: &InitialState, n: usize) -> Result<StateVector> {
    let psi = initial.state(n)?;
    if Some(psi.basis.kind) != kind.sector() {
        return invalid(format!("{kind} needs a {:?} initial state", kind.sector()));
    }
    Ok(psi)
}

fn regime_messages(params: &ChainParams, tau_end: f64) -> Vec<String> {
    validate_regime(params, tau_end).iter().map(ToString::to_string).collect()
}

type Outcome = (Value, Vec<String>, bool);

fn run_transport(kind: ExperimentKind, c: &TransportConfig, out: &mut Outputs) -> Result<Outcome> {
    check_positive("tau_end", c.tau_end)?;
    let params = c.chain.params()?;
    let spec = c.chain.disorder()?;
    let draw = if spec.is_trivial() { params.clone() } else { shared_disorder(&params, &spec) };
    let psi = initial_for(kind, &c.initial, params.n)?;
    let plan = EvolutionPlan::uniform(c.method, c.tau_end, c.dt)?;
    let samples = evolve(&build(&draw, psi.basis.kind)?, &psi, &plan)?;
    samples.write_occupations_csv(out.create(format!("{kind}.csv"))?)?;

    let last = params.n - 1;
    let (peak_k, peak) = samples
        .states
        .iter()
        .map(|s| s.occupations()[last])
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, p)| if p > best.1 { (k, p) } else { best });
    let summary = json!({
        "samples": samples.taus.len(),
        "final_norm2": samples.states.last().map(StateVector::norm_sqr),
        "peak_last_dot": { "tau": samples.taus[peak_k], "occupation": peak },
    });
    Ok((summary, regime_messages(&params, c.tau_end), true))
}

fn run_monte_carlo(kind: ExperimentKind, c: &MonteCarloConfig, out: &mut Outputs) -> Result<Outcome> {
    check_positive("tau_end", c.tau_end)?;
    if c.bins == 0 || c.trajectories == 0 {
        return invalid("bins and trajectories must be at least 1");
    }
    let params = c.chain.params()?;
    let spec = c.chain.disorder()?;
    let psi = initial_for(kind, &c.initial, params.n)?;
    let mut opts = TrajectoryOptions::new(c.tau_end);
    opts.redraw_disorder = c.redraw_disorder;
    opts.method = c.method.unwrap_or(if psi.basis.dim() <= AUTO_SPECTRAL_MAX_DIM {
        Method::Spectral
    } else {
        Method::Stepping
    });
    if let Some(dt) = c.sample_dt {
        opts.sample_grid = Some(uniform_grid(c.tau_end, dt)?);
    }
    let records = run_ensemble(&params, &spec, &psi, c.trajectories, &opts)?;
    let signal = detector_signal(&records, &equal_bins(c.tau_end, c.bins))?;
    signal.write_csv(out.create(format!("{kind}.csv"))?)?;

    let mut jumps = csv::Writer::from_writer(out.create(format!("{kind}-jumps.csv"))?);
    jumps.write_record(["trajectory", "jump", "tau"])?;
    for r in &records {
        for (k, t) in r.jump_times.iter().enumerate() {
            jumps.serialize((r.index, k + 1, t))?;
        }
    }
    jumps.flush()?;

    if let Some(grid) = &opts.sample_grid {
        let mean = mean_occupations(&records)?;
        let mut w = csv::Writer::from_writer(out.create(format!("{kind}-occupations.csv"))?);
        let mut header = vec!["tau".to_string()];
        header.extend((1..=params.n).map(|j| format!("dot_{j}")));
        w.write_record(&header)?;
        for (tau, row) in grid.iter().zip(&mean) {
            let mut fields = vec![tau.to_string()];
            fields.extend(row.iter().map(f64::to_string));
            w.write_record(&fields)?;
        }
        w.flush()?;
    }

    let clicks: usize = records.iter().map(|r| r.jump_times.len()).sum();
    let emptied = records.iter().filter(|r| r.sectors_after.last() == Some(&None)).count();
    let summary = json!({
        "trajectories": records.len(),
        "method": opts.method,
        "clicks": clicks,
        "mean_clicks": clicks as f64 / records.len() as f64,
        "emptied_fraction": emptied as f64 / records.len() as f64,
    });
    Ok((summary, regime_messages(&params, c.tau_end), true))
}

fn run_entangle(c: &EntangleConfig, out: &mut Outputs) -> Result<Outcome> {
    let left = c.left.unwrap_or(c.n / 2);
    let schedule = match c.left {
        None => ProtocolSchedule::symmetric(c.n, c.t0, c.t_e_max, c.u, c.theta)?,
        Some(l) => ProtocolSchedule::new(c.n, l, c.t0, c.t_e_max, c.u, c.theta)?,
    };
    let params = entangler_chain(c.n, left, c.t0)?.with_u(Some(c.u))?.with_gamma(c.gamma)?;
    c.disorder.validate()?;
    let mut opts = ProtocolOptions::new(c.trajectories);
    opts.sample_dt = c.sample_dt;
    opts.redraw_disorder = c.redraw_disorder;
    let outcome = run_protocol(&params, &c.disorder, &schedule, &opts)?;
    outcome.write_csv(out.create("entangle.csv".into())?, c.post_select)?;
    let summary = json!({
        "trajectories": outcome.trajectories.len(),
        "fidelity": outcome.fidelity(),
        "no_jump_fidelity": outcome.no_jump_fidelity(),
        "no_jump_count": outcome.no_jump_count(),
        "delta_tau": schedule.pulse.delta_tau,
        "applied_area": outcome.applied_area,
        "end": schedule.end(),
        "traces": if c.post_select { "no-jump" } else { "all" },
    });
    Ok((summary, outcome.warnings, true))
}

/// Closed-form against numeric eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumComparison {
    pub family: SpectrumKind,
    pub n: usize,
    pub closed_form: Vec<f64>,
    /// Distinct eigenvalues of the Hermitian Hamiltonian, sorted.
    pub numeric: Vec<f64>,
    /// Infinite when the two lists differ in length.
    pub max_deviation: f64,
}

/// Sorted distinct eigenvalues of the clean, detector-free chain behind `spec`.
pub fn numeric_spectrum(spec: SpectrumSpec) -> Result<Vec<f64>> {
    let (params, sector) = match spec.kind {
        SpectrumKind::Uniform1e => (ChainParams::uniform(spec.n, spec.t0)?, SectorKind::OneElectron),
        SpectrumKind::Optimal1e => (ChainParams::optimal(spec.n, spec.t0)?, SectorKind::OneElectron),
        SpectrumKind::Optimal2e => (ChainParams::optimal(spec.n, spec.t0)?, SectorKind::TwoElectron),
    };
    let values = build(&params, sector)?.hermitian_eigenvalues();
    let tol = 1e-6 * spec.t0.abs().max(1.0);
    let mut distinct: Vec<f64> = Vec::with_capacity(values.len());
    let mut cluster = (0.0, 0usize);
    for v in values {
        if let Some(&last) = distinct.last() {
            if v - last < tol {
                // Running mean of the degenerate cluster.
                cluster.1 += 1;
                cluster.0 += v;
                *distinct.last_mut().unwrap() = cluster.0 / cluster.1 as f64;
                continue;
            }
        }
        cluster = (v, 1);
        distinct.push(v);
    }
    Ok(distinct)
}

pub fn compare_spectrum(spec: SpectrumSpec) -> Result<SpectrumComparison> {
    let closed_form = spectrum(spec)?;
    let numeric = numeric_spectrum(spec)?;
    let max_deviation = if closed_form.len() == numeric.len() {
        closed_form.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(SpectrumComparison {
        family: spec.kind,
        n: spec.n,
        closed_form,
        numeric,
        max_deviation,
    })
}

fn run_spectra(c: &SpectraConfig, out: &mut Outputs) -> Result<Outcome> {
    let cmp = compare_spectrum(SpectrumSpec {
        kind: c.family,
        n: c.n,
        t0: c.t0,
    })?;
    let mut w = csv::Writer::from_writer(out.create("spectra.csv".into())?);
    w.write_record(["k", "closed_form", "numeric"])?;
    for k in 0..cmp.closed_form.len().max(cmp.numeric.len()) {
        let cell = |v: Option<&f64>| v.map(f64::to_string).unwrap_or_default();
        w.write_record([(k + 1).to_string(), cell(cmp.closed_form.get(k)), cell(cmp.numeric.get(k))])?;
    }
    w.flush()?;
    let summary = json!({
        "family": c.family,
        "n": c.n,
        "distinct_closed_form": cmp.closed_form.len(),
        "distinct_numeric": cmp.numeric.len(),
        "max_deviation": if cmp.max_deviation.is_finite() { json!(cmp.max_deviation) } else { Value::Null },
    });
    Ok((summary, Vec::new(), cmp.max_deviation < 1e-9))
}

/// One analytic-against-numeric comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCase {
    pub family: SpectrumKind,
    pub n: usize,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub tolerance: f64,
    pub tau_end: f64,
    pub amplitudes: Vec<OracleCase>,
    pub spectra: Vec<OracleCase>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Largest `|numeric - closed form|` amplitude of a clean chain started on
/// its leftmost basis state, over `t_grid`.
pub fn amplitude_deviation(family: SpectrumKind, n: usize, t0: f64, t_grid: &[f64]) -> Result<f64> {
    let (params, psi) = match family {
        SpectrumKind::Uniform1e => (ChainParams::uniform(n, t0)?, StateVector::one_electron(n, 1, Spin::Up)?),
        SpectrumKind::Optimal1e => (ChainParams::optimal(n, t0)?, StateVector::one_electron(n, 1, Spin::Up)?),
        SpectrumKind::Optimal2e => (
            ChainParams::optimal(n, t0)?,
            StateVector::two_electron(n, 1, 2, (Spin::Up, Spin::Down))?,
        ),
    };
    let plan = EvolutionPlan::new(Method::Spectral, t_grid.to_vec(), 1e-12)?;
    let samples = evolve(&build(&params, psi.basis.kind)?, &psi, &plan)?;
    let mut worst = 0.0f64;
    for (&tau, state) in samples.taus.iter().zip(&samples.states) {
        for (k, amp) in state.amps.iter().enumerate() {
            let exact: C64 = match family {
                SpectrumKind::Uniform1e => uniform_1e_amplitude(n, t0, tau, k + 1)?,
                SpectrumKind::Optimal1e => optimal_1e_amplitude(n, t0, tau, k + 1)?,
                SpectrumKind::Optimal2e => {
                    let (i, j) = pair_2e(k, n)?;
                    optimal_2e_amplitude(n, t0, tau, i, j)?
                }
            };
            worst = worst.max((amp - exact).norm());
        }
    }
    Ok(worst)
}

/// Compares every closed-form amplitude and spectrum with numerics for each
/// chain size in `c.sizes`.
pub fn oracle_check(c: &OracleConfig) -> Result<OracleReport> {
    check_positive("tau_end", c.tau_end)?;
    check_positive("tolerance", c.tolerance)?;
    if c.sizes.is_empty() {
        return invalid("no chain sizes to check");
    }
    let grid = uniform_grid(c.tau_end, c.dt)?;
    let mut amplitudes = Vec::new();
    let mut spectra = Vec::new();
    for &n in &c.sizes {
        for family in SpectrumKind::ALL {
            if n >= 2 {
                amplitudes.push(OracleCase {
                    family,
                    n,
                    max_deviation: amplitude_deviation(family, n, c.t0, &grid)?,
                });
            }
            let min_n = if family == SpectrumKind::Optimal2e { 3 } else { 2 };
            if n >= min_n {
                let cmp = compare_spectrum(SpectrumSpec { kind: family, n, t0: c.t0 })?;
                spectra.push(OracleCase {
                    family,
                    n,
                    max_deviation: cmp.max_deviation,
                });
            }
        }
    }
    let max_deviation = amplitudes.iter().chain(&spectra).map(|c| c.max_deviation).fold(0.0, f64::max);
    Ok(OracleReport {
        tolerance: c.tolerance,
        tau_end: c.tau_end,
        amplitudes,
        spectra,
        max_deviation,
        pass: max_deviation < c.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        for kind in ExperimentKind::ALL {
            let exp = Experiment::default_for(kind);
            assert_eq!(exp.kind(), kind);
            let text = serde_json::to_string(&exp).unwrap();
            assert!(text.contains(&format!("\"kind\":\"{kind}\"")));
            assert_eq!(Experiment::from_json(kind, &text).unwrap(), exp);
        }
    }

    #[test]
    fn bare_chain_config_replaces_the_chain() {
        let exp = Experiment::from_json(ExperimentKind::Transport1e, r#"{"n": 7, "coupling_profile": "optimal"}"#).unwrap();
        let Experiment::Transport1e(c) = exp else { panic!() };
        assert_eq!(c.chain.n, 7);
        assert!(Experiment::from_json(ExperimentKind::Spectra, r#"{"n": 7}"#).is_err());
        let err = Experiment::from_json(ExperimentKind::Mc1e, r#"{"kind": "spectra", "family": "uniform-1e", "n": 3, "t0": 1}"#)
            .unwrap_err();
        assert_eq!(err.kind(), "invalid-argument");
        let err = Experiment::from_json(ExperimentKind::Mc1e, r#"{"n": 4, "bogus": 1}"#).unwrap_err();
        assert_eq!(err.kind(), "json");
    }

    #[test]
    fn seed_override() {
        let mut exp = Experiment::default_for(ExperimentKind::Transport1e);
        assert_eq!(exp.seed(), None);
        exp.set_seed(42);
        assert_eq!(exp.seed(), Some(42));
        let mut exp = Experiment::default_for(ExperimentKind::Entangle);
        exp.set_seed(7);
        exp.set_trajectories(3);
        let Experiment::Entangle(c) = &exp else { panic!() };
        assert_eq!((c.disorder.seed, c.trajectories), (7, 3));
    }

    #[test]
    fn optimal_2e_spectrum_has_2n_minus_3_levels() {
        let cmp = compare_spectrum(SpectrumSpec {
            kind: SpectrumKind::Optimal2e,
            n: 6,
            t0: 1.0,
        })
        .unwrap();
        assert_eq!(cmp.numeric.len(), 9);
        assert!(cmp.max_deviation < 1e-9);
    }

    #[test]
    fn oracle_check_small() {
        let report = oracle_check(&OracleConfig {
            sizes: vec![1, 2, 4],
            t0: 1.0,
            tau_end: 5.0,
            dt: 0.25,
            tolerance: 1e-8,
        })
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.amplitudes.len(), 6);
        assert_eq!(report.spectra.len(), 2 + 3);
    }

    #[test]
    fn wrong_initial_sector_is_rejected() {
        let mut exp = Experiment::default_for(ExperimentKind::Transport2e);
        if let Experiment::Transport2e(c) = &mut exp {
            c.initial = InitialState::OneElectron { dot: 1, spin: Spin::Up };
        }
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&exp, dir.path()).unwrap_err().kind(), "invalid-argument");
    }
}
