//! Three-step EPR pair generation on a 20-dot chain.
//!
//! Runs the ideal protocol once, then a disordered ensemble with a detector
//! on the last dot, and prints the final fidelities.
//!
//!     cargo run --release --example entangler -- [trajectories]

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use qdchain::entangler::{entangler_chain, run_protocol, ProtocolOptions, ProtocolSchedule};
use qdchain::model::DisorderSpec;

fn main() -> qdchain::Result<()> {
    let trajectories = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let n = 20;
    let schedule = ProtocolSchedule::symmetric(n, 1.0, 6.0, 100.0, FRAC_PI_2)?;
    println!(
        "pulse width {:.4}, applied area {:.9} (pi/2 = {:.9})",
        schedule.pulse.delta_tau,
        schedule.applied_area(),
        FRAC_PI_2
    );

    let chain = entangler_chain(n, n / 2, 1.0)?.with_u(Some(100.0))?;
    let ideal = run_protocol(&chain, &DisorderSpec::none(0), &schedule, &ProtocolOptions::new(1))?;
    println!("ideal fidelity {:.12}", ideal.fidelity());

    let noisy = chain.with_gamma(0.2)?;
    let disorder = DisorderSpec::new(0.1, 0.05, 2024)?;
    let start = Instant::now();
    let out = run_protocol(&noisy, &disorder, &schedule, &ProtocolOptions::new(trajectories))?;
    println!(
        "{trajectories} trajectories in {:.1?}: mean fidelity {:.4}, without clicks {:.4} ({} kept both electrons)",
        start.elapsed(),
        out.fidelity(),
        out.no_jump_fidelity().unwrap_or(f64::NAN),
        out.no_jump_count()
    );
    for w in &out.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
