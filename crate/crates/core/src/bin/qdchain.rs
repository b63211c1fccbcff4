//! Command-line front end: one subcommand per experiment kind.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qdchain::analytic::SpectrumKind;
use qdchain::experiment::{run, Experiment, ExperimentKind};
use qdchain::hilbert::Spin;
use qdchain::model::{ChainConfig, CouplingProfile, DisorderSpec, ProfileName};
use qdchain::montecarlo::InitialState;
use qdchain::propagate::Method;
use qdchain::{Error, Result};

#[derive(Parser)]
#[command(name = "qdchain", version, about = "Electron transport and entanglement in quantum-dot chains")]
struct Cli {
    /// JSON config: a full experiment, a previous run's .meta.json, or a chain.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for disorder draws and detector clicks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo trajectories [default: 5000].
    #[arg(long, global = true)]
    trajectories: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherent one-electron evolution; writes per-dot occupations.
    #[command(name = "transport-1e")]
    Transport1e(TransportArgs),
    /// Coherent two-electron evolution; writes per-dot occupations.
    #[command(name = "transport-2e")]
    Transport2e(TransportArgs),
    /// One-electron quantum-jump ensemble; writes the detector signal.
    #[command(name = "mc-1e")]
    Mc1e(MonteCarloArgs),
    /// Two-electron quantum-jump ensemble; writes the detector signal.
    #[command(name = "mc-2e")]
    Mc2e(MonteCarloArgs),
    /// Three-step entangler; writes the four overlap traces.
    Entangle(EntangleArgs),
    /// Closed-form amplitudes and spectra against numerics.
    OracleCheck(OracleArgs),
    /// Closed-form and numeric eigenvalues.
    Spectra(SpectraArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Uniform,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Spectral,
    Stepping,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Stepping => Method::Stepping,
        }
    }
}

#[derive(Args)]
struct ChainArgs {
    /// Number of dots.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Coupling scale.
    #[arg(long)]
    t0: Option<f64>,
    /// Common on-site energy.
    #[arg(long)]
    eps0: Option<f64>,
    /// Nearest-neighbor repulsion.
    #[arg(long)]
    v: Option<f64>,
    /// On-site repulsion, used for regime checks.
    #[arg(long)]
    u: Option<f64>,
    /// Detector coupling on the last dot.
    #[arg(long)]
    gamma: Option<f64>,
    /// Standard deviation of on-site energies.
    #[arg(long)]
    delta_eps: Option<f64>,
    /// Standard deviation of couplings.
    #[arg(long)]
    delta_t: Option<f64>,
    /// Starting dot, or two comma-separated dots for two electrons.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct TransportArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    tau_end: Option<f64>,
    /// Output spacing.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    tau_end: Option<f64>,
    /// Histogram bins on [0, tau_end].
    #[arg(long)]
    bins: Option<usize>,
    /// One disorder draw for all trajectories.
    #[arg(long)]
    shared_disorder: bool,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Also write ensemble-averaged occupations at this spacing.
    #[arg(long)]
    sample_dt: Option<f64>,
}

#[derive(Args)]
struct EntangleArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Left entangler dot [default: n/2].
    #[arg(long)]
    left: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    /// Peak tunneling of the exchange pulse.
    #[arg(long)]
    t_e_max: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    /// Exchange pulse area.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta_eps: Option<f64>,
    #[arg(long)]
    delta_t: Option<f64>,
    /// Trace spacing.
    #[arg(long)]
    sample_dt: Option<f64>,
    /// Average the traces over trajectories without a detector click.
    #[arg(long)]
    post_select: bool,
    #[arg(long)]
    shared_disorder: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Chain sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    tau_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct SpectraArgs {
    /// uniform-1e, optimal-1e or optimal-2e.
    #[arg(long)]
    kind: Option<SpectrumKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
}

fn parse_start(text: &str) -> Result<InitialState> {
    let dots: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad dot {s:?} in --start"))))
        .collect::<Result<_>>()?;
    match dots[..] {
        [dot] => Ok(InitialState::OneElectron { dot, spin: Spin::Up }),
        [i, j] => Ok(InitialState::TwoElectron {
            dots: (i, j),
            spins: (Spin::Up, Spin::Down),
        }),
        _ => Err(Error::InvalidArgument("--start takes one or two dots".into())),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_disorder(slot: &mut DisorderSpec, delta_eps: Option<f64>, delta_t: Option<f64>) {
    set(&mut slot.delta_eps, delta_eps);
    set(&mut slot.delta_t, delta_t);
}

fn apply_chain(chain: &mut ChainConfig, initial: &mut InitialState, args: &ChainArgs) -> Result<()> {
    set(&mut chain.n, args.n);
    set(&mut chain.t0, args.t0);
    set(&mut chain.eps0, args.eps0);
    set(&mut chain.v, args.v);
    set(&mut chain.gamma, args.gamma);
    if args.u.is_some() {
        chain.u = args.u;
    }
    if let Some(p) = args.profile {
        chain.coupling_profile = CouplingProfile::Named(match p {
            Profile::Uniform => ProfileName::Uniform,
            Profile::Optimal => ProfileName::Optimal,
        });
    }
    if args.delta_eps.is_some() || args.delta_t.is_some() {
        let spec = chain.disorder.get_or_insert_with(|| DisorderSpec::none(0));
        set_disorder(spec, args.delta_eps, args.delta_t);
    }
    if let Some(s) = &args.start {
        *initial = parse_start(s)?;
    }
    Ok(())
}

fn resolve(cli: &Cli) -> Result<Experiment> {
    let kind = match &cli.command {
        Command::Transport1e(_) => ExperimentKind::Transport1e,
        Command::Transport2e(_) => ExperimentKind::Transport2e,
        Command::Mc1e(_) => ExperimentKind::Mc1e,
        Command::Mc2e(_) => ExperimentKind::Mc2e,
        Command::Entangle(_) => ExperimentKind::Entangle,
        Command::OracleCheck(_) => ExperimentKind::OracleCheck,
        Command::Spectra(_) => ExperimentKind::Spectra,
    };
    let mut exp = match &cli.config {
        Some(path) => Experiment::load(kind, path)?,
        None => Experiment::default_for(kind),
    };
    match (&mut exp, &cli.command) {
        (Experiment::Transport1e(c), Command::Transport1e(a))
        | (Experiment::Transport2e(c), Command::Transport2e(a)) => {
            apply_chain(&mut c.chain, &mut c.initial, &a.chain)?;
            set(&mut c.tau_end, a.tau_end);
            set(&mut c.dt, a.dt);
            set(&mut c.method, a.method.map(Method::from));
        }
        (Experiment::Mc1e(c), Command::Mc1e(a)) | (Experiment::Mc2e(c), Command::Mc2e(a)) => {
            apply_chain(&mut c.chain, &mut c.initial, &a.chain)?;
            set(&mut c.tau_end, a.tau_end);
            set(&mut c.bins, a.bins);
            if a.shared_disorder {
                c.redraw_disorder = false;
            }
            if a.method.is_some() {
                c.method = a.method.map(Method::from);
            }
            if a.sample_dt.is_some() {
                c.sample_dt = a.sample_dt;
            }
        }
        (Experiment::Entangle(c), Command::Entangle(a)) => {
            set(&mut c.n, a.n);
            if a.left.is_some() {
                c.left = a.left;
            }
            set(&mut c.t0, a.t0);
            set(&mut c.t_e_max, a.t_e_max);
            set(&mut c.u, a.u);
            set(&mut c.theta, a.theta);
            set(&mut c.gamma, a.gamma);
            set_disorder(&mut c.disorder, a.delta_eps, a.delta_t);
            set(&mut c.sample_dt, a.sample_dt);
            c.post_select |= a.post_select;
            if a.shared_disorder {
                c.redraw_disorder = false;
            }
        }
        (Experiment::OracleCheck(c), Command::OracleCheck(a)) => {
            if !a.n.is_empty() {
                c.sizes = a.n.clone();
            }
            set(&mut c.tau_end, a.tau_end);
            set(&mut c.dt, a.dt);
            set(&mut c.tolerance, a.tolerance);
        }
        (Experiment::Spectra(c), Command::Spectra(a)) => {
            set(&mut c.family, a.kind);
            set(&mut c.n, a.n);
            set(&mut c.t0, a.t0);
        }
        _ => unreachable!("config kind checked on load"),
    }
    if let Some(seed) = cli.seed {
        exp.set_seed(seed);
    }
    if let Some(count) = cli.trajectories {
        exp.set_trajectories(count);
    }
    Ok(exp)
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let exp = resolve(cli)?;
    let report = run(&exp, &cli.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", json!({"error": {"kind": "check-failed", "message": "deviation above tolerance"}}));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::from(2)
        }
    }
}
