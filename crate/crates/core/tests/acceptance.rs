//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any fails.
//!
//!     cargo test --release --test acceptance

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use qdchain::analytic::{pair_shift_frequency_n4, SpectrumKind, SpectrumSpec};
use qdchain::entangler::{entangler_chain, run_protocol, ExchangePulse, ProtocolOptions, ProtocolSchedule};
use qdchain::experiment::{amplitude_deviation, compare_spectrum};
use qdchain::hamiltonian::build;
use qdchain::hilbert::{index_2e, SectorKind, Spin, StateVector};
use qdchain::model::{ChainParams, DisorderSpec};
use qdchain::montecarlo::{
    detector_signal, equal_bins, master_equation_oracle, run_ensemble, TrajectoryOptions,
};
use qdchain::propagate::{evolve, uniform_grid, EvolutionPlan, Method, Propagator};
use qdchain::stats::{ks_p_value, ks_statistic, linear_fit};

type Check = qdchain::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn perfect_transfer() -> Check {
    let start = Instant::now();
    let n = 20;
    let p = ChainParams::optimal(n, 1.0)?;
    let psi = StateVector::one_electron(n, 1, Spin::Up)?;
    let prop = Propagator::new(&build(&p, SectorKind::OneElectron)?, Method::Spectral, 1e-12)?;
    let arrival = prop.advance(&psi.amps, 0.0, FRAC_PI_2)?[n - 1].norm_sqr();
    let revival = prop.advance(&psi.amps, 0.0, PI)?[0].norm_sqr();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = arrival >= 1.0 - 1e-9 && revival >= 1.0 - 1e-9 && elapsed < 1.0;
    Ok((ok, format!("|A_N(pi/2)|^2 = {arrival:.12}, |A_1(pi)|^2 = {revival:.12}, {elapsed:.3} s")))
}

fn oracle_equivalence() -> Check {
    let grid = uniform_grid(30.0, 0.01)?;
    let mut worst = 0.0f64;
    for n in [2, 5, 20] {
        for family in [SpectrumKind::Uniform1e, SpectrumKind::Optimal1e] {
            worst = worst.max(amplitude_deviation(family, n, 1.0, &grid)?);
        }
    }
    Ok((worst < 1e-8, format!("max amplitude deviation {worst:.2e} over tau in [0, 30], N in {{2, 5, 20}}")))
}

fn spectra() -> Check {
    let mut worst = 0.0f64;
    let mut levels = 0;
    for kind in SpectrumKind::ALL {
        let cmp = compare_spectrum(SpectrumSpec { kind, n: 20, t0: 1.0 })?;
        worst = worst.max(cmp.max_deviation);
        if kind == SpectrumKind::Optimal2e {
            levels = cmp.numeric.len();
        }
    }
    Ok((
        worst < 1e-9 && levels == 37,
        format!("max eigenvalue deviation {worst:.2e}, optimal two-electron levels {levels}"),
    ))
}

fn two_electron_transfer() -> Check {
    let n = 20;
    let p = ChainParams::optimal(n, 1.0)?;
    let psi = StateVector::two_electron(n, 1, 2, (Spin::Up, Spin::Down))?;
    let plan = EvolutionPlan::new(Method::Spectral, vec![FRAC_PI_2], 1e-12)?;
    let occ = evolve(&build(&p, SectorKind::TwoElectron)?, &psi, &plan)?.states[0].occupations();
    let ends = occ[n - 2] + occ[n - 1];
    Ok((ends >= 2.0 - 1e-7, format!("n_19 + n_20 at pi/2 = {ends:.12}")))
}

/// Angular frequency of the strongest component of `signal` in `[lo, hi]`,
/// refined by golden-section search on the periodogram.
fn dominant_frequency(taus: &[f64], signal: &[f64], lo: f64, hi: f64) -> f64 {
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let power = |w: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, s) in taus.iter().zip(signal) {
            re += (s - mean) * (w * t).cos();
            im += (s - mean) * (w * t).sin();
        }
        re * re + im * im
    };
    let steps = 2000;
    let coarse = (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .max_by(|a, b| power(*a).total_cmp(&power(*b)))
        .unwrap();
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (coarse - h, coarse + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-9 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// First local maximum of the end-pair probability `|B_{N-1,N}|^2` that
/// reaches 0.01.
fn pair_arrival(v: f64) -> qdchain::Result<f64> {
    let n = 20;
    let p = ChainParams::uniform(n, 1.0)?.with_v(v)?;
    let psi = StateVector::two_electron(n, 1, 2, (Spin::Up, Spin::Down))?;
    let plan = EvolutionPlan::uniform(Method::Spectral, 150.0, 0.01)?;
    let samples = evolve(&build(&p, SectorKind::TwoElectron)?, &psi, &plan)?;
    let end = index_2e(n - 1, n, n)?;
    let pair: Vec<f64> = samples.states.iter().map(|s| s.amps[end].norm_sqr()).collect();
    (1..pair.len() - 1)
        .find(|&k| pair[k] >= 0.01 && pair[k] >= pair[k - 1] && pair[k] > pair[k + 1])
        .map(|k| samples.taus[k])
        .ok_or_else(|| qdchain::Error::InvalidArgument(format!("pair never reached the end at V = {v}")))
}

fn bonding() -> Check {
    let (n, v) = (4, 10.0);
    let p = ChainParams::uniform(n, 1.0)?.with_v(v)?;
    let psi = StateVector::two_electron(n, 2, 3, (Spin::Up, Spin::Down))?;
    let plan = EvolutionPlan::uniform(Method::Spectral, 1000.0, 0.05)?;
    let samples = evolve(&build(&p, SectorKind::TwoElectron)?, &psi, &plan)?;
    let k34 = index_2e(3, 4, n)?;
    let shifted: Vec<f64> = samples.states.iter().map(|s| s.amps[k34].norm_sqr()).collect();
    let predicted = pair_shift_frequency_n4(1.0, v)?;
    let measured = dominant_frequency(&samples.taus, &shifted, 0.05, 1.5);
    let rel = (measured / predicted - 1.0).abs();

    let slow = pair_arrival(2.5)?;
    let fast = pair_arrival(0.0)?;
    let ratio = slow / fast;
    Ok((
        rel < 0.10 && (1.8..=3.2).contains(&ratio),
        format!(
            "N=4 pair-shift frequency {measured:.4} vs {predicted:.4} ({:.1}% off); \
             N=20 pair arrival {slow:.2} (V=2.5) / {fast:.2} (V=0) = {ratio:.2}",
            100.0 * rel
        ),
    ))
}

fn monte_carlo() -> Check {
    let gamma = 0.2;
    let p = ChainParams::uniform(3, 1.0)?.with_gamma(gamma)?;
    let psi = StateVector::one_electron(3, 1, Spin::Up)?;
    let tau_end = 60.0;
    let records = run_ensemble(&p, &DisorderSpec::none(11), &psi, 5000, &TrajectoryOptions::new(tau_end))?;
    let edges = equal_bins(tau_end, 20);
    let signal = detector_signal(&records, &edges)?;
    let oracle = master_equation_oracle(&p, &psi, &edges)?;
    let mut worst = 0.0f64;
    for (k, w) in edges.windows(2).enumerate() {
        let exact = (oracle.vacuum[k + 1] - oracle.vacuum[k]) / (w[1] - w[0]);
        let z = (signal.signal[k] - exact).abs() / signal.stderr[k].max(1e-300);
        worst = worst.max(z);
    }

    let single = ChainParams::uniform(1, 1.0)?.with_gamma(gamma)?;
    let psi1 = StateVector::one_electron(1, 1, Spin::Up)?;
    let records = run_ensemble(&single, &DisorderSpec::none(12), &psi1, 5000, &TrajectoryOptions::new(200.0))?;
    let times: Vec<f64> = records.iter().filter_map(|r| r.jump_times.first().copied()).collect();
    let d = ks_statistic(&times, |t| 1.0 - (-gamma * t).exp());
    let pval = ks_p_value(d, times.len());
    Ok((
        worst <= 3.0 && pval > 0.01 && times.len() == 5000,
        format!("worst bin {worst:.2} standard errors from the master equation; single-dot KS p = {pval:.3}"),
    ))
}

fn decay_envelope() -> Check {
    let (n, gamma) = (10, 0.2);
    let p = ChainParams::uniform(n, 1.0)?.with_gamma(gamma)?;
    let psi = StateVector::one_electron(n, 1, Spin::Up)?;
    let window = n as f64 / gamma;
    let plan = EvolutionPlan::uniform(Method::Spectral, window, 0.1)?;
    let samples = evolve(&build(&p, SectorKind::OneElectron)?, &psi, &plan)?;
    let logs: Vec<f64> = samples.states.iter().map(|s| s.norm_sqr().ln()).collect();
    let (slope, _) = linear_fit(&samples.taus, &logs);
    let expected = -gamma / n as f64;
    let rel = (slope / expected - 1.0).abs();
    Ok((
        rel <= 0.20,
        format!("log-survival slope {slope:.5} over [0, {window}] vs {expected:.5} ({:.1}% off)", 100.0 * rel),
    ))
}

fn entangler() -> Check {
    let start = Instant::now();
    let n = 20;
    let schedule = ProtocolSchedule::symmetric(n, 1.0, 6.0, 100.0, FRAC_PI_2)?;
    let chain = entangler_chain(n, n / 2, 1.0)?.with_u(Some(100.0))?;
    let ideal = run_protocol(&chain, &DisorderSpec::none(0), &schedule, &ProtocolOptions::new(1))?.fidelity();

    let noisy = chain.with_gamma(0.2)?;
    let disorder = DisorderSpec::new(0.1, 0.05, 2024)?;
    let out = run_protocol(&noisy, &disorder, &schedule, &ProtocolOptions::new(1000))?;
    let kept = out.no_jump_fidelity().unwrap_or(0.0);
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        ideal >= 1.0 - 1e-6 && (0.96..=1.0).contains(&kept) && elapsed < 300.0,
        format!(
            "ideal {ideal:.9}; 1000 noisy trajectories: {kept:.4} over the {} without a click, \
             {:.4} counting lost pairs as zero; {elapsed:.1} s",
            out.no_jump_count(),
            out.fidelity()
        ),
    ))
}

fn pulse_area() -> Check {
    let pulse = ExchangePulse::from_area(FRAC_PI_2, 6.0, 100.0, 0.0)?;
    let span = 40.0 * pulse.delta_tau;
    let numeric = pulse.area_between(-span, span);
    let err = (numeric - FRAC_PI_2).abs();
    let dtau = pulse.delta_tau;
    Ok((
        err < 1e-6 && (dtau - 0.545).abs() <= 0.01,
        format!("quadrature area {numeric:.10} ({err:.1e} from pi/2), delta_tau = {dtau:.4}"),
    ))
}

fn no_revival() -> Check {
    let n = 20;
    let p = ChainParams::uniform(n, 1.0)?;
    let psi = StateVector::one_electron(n, 1, Spin::Up)?;
    let grid: Vec<f64> = (101..=100_000).map(|k| k as f64 * 1e-3).collect();
    let plan = EvolutionPlan::new(Method::Spectral, grid, 1e-12)?;
    let samples = evolve(&build(&p, SectorKind::OneElectron)?, &psi, &plan)?;
    let (tau, best) = samples
        .taus
        .iter()
        .zip(&samples.states)
        .map(|(t, s)| (*t, s.amps[0].norm_sqr()))
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Ok((best < 1.0 - 1e-6, format!("max |A_1|^2 on (0.1, 100] = {best:.6} at tau = {tau:.3}")))
}

fn main() -> ExitCode {
    let checks: [Criterion; 10] = [
        ("perfect transfer", perfect_transfer),
        ("oracle equivalence", oracle_equivalence),
        ("spectra", spectra),
        ("two-electron transfer", two_electron_transfer),
        ("bonding", bonding),
        ("monte carlo", monte_carlo),
        ("decay envelope", decay_envelope),
        ("entangler", entangler),
        ("pulse area", pulse_area),
        ("no revival", no_revival),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!("{:>2} {} {name}: {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
