//! Quantum-jump trajectories against the master equation for a three-dot
//! chain with a charge detector on the last dot.
//!
//!     cargo run --release --example detector_signal -- [trajectories]

use qdchain::hilbert::{Spin, StateVector};
use qdchain::model::{ChainParams, DisorderSpec};
use qdchain::montecarlo::{detector_signal, equal_bins, master_equation_oracle, run_ensemble, TrajectoryOptions};

fn main() -> qdchain::Result<()> {
    let trajectories = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let p = ChainParams::uniform(3, 1.0)?.with_gamma(0.2)?;
    let psi = StateVector::one_electron(3, 1, Spin::Up)?;
    let tau_end = 60.0;
    let records = run_ensemble(&p, &DisorderSpec::none(7), &psi, trajectories, &TrajectoryOptions::new(tau_end))?;
    let edges = equal_bins(tau_end, 12);
    let signal = detector_signal(&records, &edges)?;
    let exact = master_equation_oracle(&p, &psi, &edges)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "tau", "jumps", "stderr", "master");
    for (k, mid) in signal.bin_mids().iter().enumerate() {
        let flux = (exact.vacuum[k + 1] - exact.vacuum[k]) / (edges[k + 1] - edges[k]);
        println!("{mid:6.1} {:10.5} {:10.5} {flux:10.5}", signal.signal[k], signal.stderr[k]);
    }
    Ok(())
}
