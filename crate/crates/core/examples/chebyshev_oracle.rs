//! Closed-form amplitudes against numerical propagation.
//!
//! The uniform chain has Chebyshev eigenvectors and the engineered chain a
//! closed form in `sin` and `cos`. Both are checked on a grid.
//!
//!     cargo run --release --example chebyshev_oracle

use qdchain::analytic::{optimal_1e_amplitude, uniform_1e_amplitude, SpectrumKind};
use qdchain::experiment::amplitude_deviation;
use qdchain::hamiltonian::build;
use qdchain::hilbert::{SectorKind, Spin, StateVector};
use qdchain::model::ChainParams;
use qdchain::propagate::{uniform_grid, Method, Propagator};

fn main() -> qdchain::Result<()> {
    let n = 5;
    let tau = 2.5;
    let p = ChainParams::uniform(n, 1.0)?;
    let prop = Propagator::new(&build(&p, SectorKind::OneElectron)?, Method::Spectral, 1e-12)?;
    let numeric = prop.advance(&StateVector::one_electron(n, 1, Spin::Up)?.amps, 0.0, tau)?;
    println!("uniform N={n}, tau={tau}");
    for j in 1..=n {
        let exact = uniform_1e_amplitude(n, 1.0, tau, j)?;
        println!("  dot {j}: closed form {exact:.8}, numeric {:.8}", numeric[j - 1]);
    }
    println!("optimal N=20 amplitude on the last dot at tau=1: {:.8}", optimal_1e_amplitude(20, 1.0, 1.0, 20)?);

    let grid = uniform_grid(30.0, 0.05)?;
    for family in [SpectrumKind::Uniform1e, SpectrumKind::Optimal1e] {
        for n in [2, 5, 20, 50] {
            println!("{family} N={n:>2}: max deviation {:.2e}", amplitude_deviation(family, n, 1.0, &grid)?);
        }
    }
    Ok(())
}
