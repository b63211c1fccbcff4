//! Closed-form spectra against diagonalization.
//!
//!     cargo run --release --example spectra -- [N]

use qdchain::analytic::{SpectrumKind, SpectrumSpec};
use qdchain::experiment::compare_spectrum;

fn main() -> qdchain::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    for kind in SpectrumKind::ALL {
        let cmp = compare_spectrum(SpectrumSpec { kind, n, t0: 1.0 })?;
        println!(
            "{kind:>11}: {} distinct levels, from {:.4} to {:.4}, max deviation {:.2e}",
            cmp.numeric.len(),
            cmp.numeric.first().unwrap(),
            cmp.numeric.last().unwrap(),
            cmp.max_deviation
        );
    }
    Ok(())
}
