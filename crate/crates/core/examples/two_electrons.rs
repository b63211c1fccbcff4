//! Two electrons: perfect pair transfer, and a bound pair when the
//! nearest-neighbour repulsion V is large.
//!
//!     cargo run --release --example two_electrons

use std::f64::consts::FRAC_PI_2;

use qdchain::analytic::pair_shift_frequency_n4;
use qdchain::hamiltonian::build;
use qdchain::hilbert::{index_2e, SectorKind, Spin, StateVector};
use qdchain::model::ChainParams;
use qdchain::propagate::{evolve, EvolutionPlan, Method};

fn main() -> qdchain::Result<()> {
    let n = 20;
    let spins = (Spin::Up, Spin::Down);
    let psi = StateVector::two_electron(n, 1, 2, spins)?;
    let h = build(&ChainParams::optimal(n, 1.0)?, SectorKind::TwoElectron)?;
    let at = evolve(&h, &psi, &EvolutionPlan::new(Method::Spectral, vec![FRAC_PI_2], 1e-12)?)?;
    let occ = at.states[0].occupations();
    println!("optimal N={n}: n_19 + n_20 at pi/2 = {:.10}", occ[n - 2] + occ[n - 1]);

    // Bound pair on four dots: from |2,3> the pair shuttles into |3,4>.
    let (n, v) = (4, 10.0);
    let h = build(&ChainParams::uniform(n, 1.0)?.with_v(v)?, SectorKind::TwoElectron)?;
    let psi = StateVector::two_electron(n, 2, 3, spins)?;
    let samples = evolve(&h, &psi, &EvolutionPlan::uniform(Method::Spectral, 25.0, 2.5)?)?;
    let k34 = index_2e(3, 4, n)?;
    println!("uniform N=4, V={v}: pair oscillates at {:.3}", pair_shift_frequency_n4(1.0, v)?);
    for (tau, s) in samples.taus.iter().zip(&samples.states) {
        println!("  tau = {tau:5.1}: P(3,4) = {:.4}", s.amps[k34].norm_sqr());
    }
    Ok(())
}
