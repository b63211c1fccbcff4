//! Closed-form amplitudes and spectra for disorder-free, detector-free chains.
//!
//! All amplitudes start from the leftmost basis state (`|1>` or `|1,2>`) and
//! are given in the frame where a uniform on-site energy has been removed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::C64;

fn check_dot(n: usize, j: usize) -> Result<()> {
    if j == 0 || j > n {
        return invalid(format!("dot {j} outside 1..={n}"));
    }
    Ok(())
}

/// Amplitude on dot `j` of a uniform chain started on dot 1, by expansion in
/// the standing-wave eigenmodes `sin(j k pi / (N+1))` with energies
/// `2 t0 cos(k pi / (N+1))`.
///
/// The prefactor is fixed by requiring `A_j(0) = delta_{1j}`, which gives
/// `2 / (N + 1)`.
pub fn uniform_1e_amplitude(n: usize, t0: f64, tau: f64, j: usize) -> Result<C64> {
    check_dot(n, j)?;
    let q = PI / (n + 1) as f64;
    let norm: f64 = (1..=n).map(|k| (k as f64 * q).sin().powi(2)).sum();
    let sum: C64 = (1..=n)
        .map(|k| {
            let k = k as f64;
            let phase = C64::from_polar(1.0, -2.0 * t0 * tau * (k * q).cos());
            phase * ((j as f64) * k * q).sin() * (k * q).sin()
        })
        .sum();
    Ok(sum / norm)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `x^p` returned as `(ln|x^p|, sign)`, with `x^0 = 1` even for `x = 0`.
fn signed_power(x: f64, p: usize) -> (f64, f64) {
    if p == 0 {
        return (0.0, 1.0);
    }
    let sign = if x < 0.0 && p % 2 == 1 { -1.0 } else { 1.0 };
    (p as f64 * x.abs().ln(), sign)
}

/// `(-i)^p`.
fn minus_i_pow(p: usize) -> C64 {
    match p % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Binomial amplitude for the perfect-transfer profile:
/// `sqrt(C(N-1, j-1)) (-i sin t0 tau)^(j-1) cos(t0 tau)^(N-j)`.
///
/// Evaluated in log space so it stays finite for large `N`.
pub fn optimal_1e_amplitude(n: usize, t0: f64, tau: f64, j: usize) -> Result<C64> {
    check_dot(n, j)?;
    let (s, c) = (t0 * tau).sin_cos();
    let (ls, ss) = signed_power(s, j - 1);
    let (lc, sc) = signed_power(c, n - j);
    let magnitude = (0.5 * ln_binomial(n - 1, j - 1) + ls + lc).exp();
    Ok(minus_i_pow(j - 1) * (ss * sc * magnitude))
}

/// Two-electron amplitude `B_ij` for the perfect-transfer profile, started
/// from `|1,2>` with `V = 0`:
///
/// `sqrt((j-i)^2 (N-1)! (N-2)! / ((i-1)! (j-1)! (N-i)! (N-j)!))
///   (-i sin t0 tau)^(i+j-3) cos(t0 tau)^(2N-4-(i+j-3))`.
///
/// With `s = i + j - 2` this is the `s`-th amplitude of a `2N-3` dot chain,
/// shared between the pairs on the same anti-diagonal.
pub fn optimal_2e_amplitude(n: usize, t0: f64, tau: f64, i: usize, j: usize) -> Result<C64> {
    if !(1 <= i && i < j && j <= n) {
        return invalid(format!("pair ({i}, {j}) is not 1 <= i < j <= {n}"));
    }
    let ln_weight = 2.0 * ((j - i) as f64).ln() + ln_factorial(n - 1) + ln_factorial(n - 2)
        - ln_factorial(i - 1)
        - ln_factorial(j - 1)
        - ln_factorial(n - i)
        - ln_factorial(n - j);
    let p = i + j - 3;
    let (s, c) = (t0 * tau).sin_cos();
    let (ls, ss) = signed_power(s, p);
    let (lc, sc) = signed_power(c, 2 * (n - 2) - p);
    let magnitude = (0.5 * ln_weight + ls + lc).exp();
    Ok(minus_i_pow(p) * (ss * sc * magnitude))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    #[serde(rename = "uniform-1e")]
    Uniform1e,
    #[serde(rename = "optimal-1e")]
    Optimal1e,
    #[serde(rename = "optimal-2e")]
    Optimal2e,
}

impl SpectrumKind {
    pub const ALL: [SpectrumKind; 3] = [SpectrumKind::Uniform1e, SpectrumKind::Optimal1e, SpectrumKind::Optimal2e];

    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::Uniform1e => "uniform-1e",
            SpectrumKind::Optimal1e => "optimal-1e",
            SpectrumKind::Optimal2e => "optimal-2e",
        }
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpectrumKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown spectrum kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub n: usize,
    pub t0: f64,
}

/// Sorted closed-form eigenvalues. For the two-electron case these are the
/// `2N-3` distinct levels, not the full multiset.
pub fn spectrum(spec: SpectrumSpec) -> Result<Vec<f64>> {
    let SpectrumSpec { kind, n, t0 } = spec;
    let min_n = if kind == SpectrumKind::Optimal2e { 3 } else { 2 };
    if n < min_n {
        return invalid(format!("spectrum needs n >= {min_n}, got {n}"));
    }
    let mut values: Vec<f64> = match kind {
        SpectrumKind::Uniform1e => (1..=n)
            .map(|k| 2.0 * t0 * (k as f64 * PI / (n + 1) as f64).cos())
            .collect(),
        SpectrumKind::Optimal1e => (1..=n)
            .map(|k| t0 * (2.0 * k as f64 - n as f64 - 1.0))
            .collect(),
        SpectrumKind::Optimal2e => (1..=2 * n - 3)
            .map(|k| t0 * (2.0 * k as f64 - 2.0 * n as f64 + 2.0))
            .collect(),
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Second-order hopping of a bound pair, `t0^2 / V`.
pub fn effective_pair_coupling(t0: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return invalid(format!("pair coupling needs V > 0, got {v}"));
    }
    Ok(t0 * t0 / v)
}

/// Angular frequency at which a bound pair started on the middle of a
/// four-dot chain, `|2,3>`, shuttles into `|3,4>` (and `|1,2>`).
///
/// In second order the adjacent pairs `|1,2>, |2,3>, |3,4>` form a three-level
/// system with hopping `t_eff` and shifts `(t_eff, 2 t_eff, t_eff)`. The start
/// state overlaps the levels `0` and `3 t_eff`, so
/// `P_34(tau) = (4/9) sin^2(3 t_eff tau / 2)`, an oscillation at `3 t_eff`.
pub fn pair_shift_frequency_n4(t0: f64, v: f64) -> Result<f64> {
    Ok(3.0 * effective_pair_coupling(t0, v)?)
}
