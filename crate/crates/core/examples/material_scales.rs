//! Charging energy and level spacing of GaAs disk dots, and what `t0 = 1`
//! means in laboratory units.
//!
//!     cargo run --example material_scales

use qdchain::model::{estimate_parameters, MaterialParams, UnitScale};

fn main() -> qdchain::Result<()> {
    for radius_nm in [20.0, 50.0, 100.0] {
        let e = estimate_parameters(&MaterialParams::gaas(radius_nm * 1e-9))?;
        println!(
            "R = {radius_nm:>5} nm: U = {:8.1} ueV, level spacing = {:7.1} ueV",
            e.u_microev, e.level_spacing_microev
        );
    }
    let scale = UnitScale { t0_microev: 10.0 };
    println!(
        "t0 = 10 ueV: t0/h = {:.3} GHz, tau = pi/2 is {:.3} ns",
        scale.rate_ghz(1.0),
        scale.time_ns(std::f64::consts::FRAC_PI_2)
    );
    Ok(())
}
