//! Chain configuration, coupling profiles, disorder, regime checks and
//! material-parameter estimates.
//!
//! All dynamical quantities are expressed in units of the reference coupling
//! `t0` with `hbar = 1`; times are therefore in units of `1/t0`. Only
//! [`estimate_parameters`] and [`UnitScale`] deal in SI units.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Full physical description of a chain run.
///
/// Dots are numbered `1..=n`; `couplings[j - 1]` is the tunnelling amplitude
/// of the bond between dots `j` and `j + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub eps: Vec<f64>,
    pub couplings: Vec<f64>,
    /// Nearest-neighbour interdot repulsion.
    pub v: f64,
    /// On-site repulsion. `None` stands for the hard-core limit `U = inf`.
    pub u: Option<f64>,
    /// Detector coupling on the last dot.
    pub gamma: f64,
}

impl ChainParams {
    pub fn new(
        eps: Vec<f64>,
        couplings: Vec<f64>,
        v: f64,
        u: Option<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let params = ChainParams {
            n: eps.len(),
            eps,
            couplings,
            v,
            u,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    /// Uniform chain: all on-site energies zero, all couplings `t0`.
    pub fn uniform(n: usize, t0: f64) -> Result<Self> {
        ChainParams::new(vec![0.0; n], vec![t0; n.saturating_sub(1)], 0.0, None, 0.0)
    }

    /// Chain with the perfect-transfer profile from [`optimal_couplings`].
    pub fn optimal(n: usize, t0: f64) -> Result<Self> {
        ChainParams::new(vec![0.0; n], optimal_couplings(n, t0)?, 0.0, None, 0.0)
    }

    pub fn with_v(mut self, v: f64) -> Result<Self> {
        self.v = v;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_u(mut self, u: Option<f64>) -> Result<Self> {
        self.u = u;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps.iter_mut().for_each(|e| *e = eps0);
        self
    }

    /// Checks the structural invariants. Sampled couplings may be negative
    /// (a sign is a physical phase), so only finiteness is required of them.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("chain needs at least one dot");
        }
        if self.eps.len() != self.n {
            return invalid(format!(
                "expected {} on-site energies, got {}",
                self.n,
                self.eps.len()
            ));
        }
        if self.couplings.len() != self.n - 1 {
            return invalid(format!(
                "expected {} couplings for {} dots, got {}",
                self.n - 1,
                self.n,
                self.couplings.len()
            ));
        }
        if self.eps.iter().chain(&self.couplings).any(|x| !x.is_finite()) {
            return invalid("energies and couplings must be finite");
        }
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return invalid(format!("V must be finite and >= 0, got {}", self.v));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return invalid(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if let Some(u) = self.u {
            if !(u > 0.0) {
                return invalid(format!("U must be positive, got {u}"));
            }
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but also rejects negative couplings,
    /// for parameters supplied by a user rather than drawn from a distribution.
    pub fn validate_nominal(&self) -> Result<()> {
        self.validate()?;
        if let Some(c) = self.couplings.iter().find(|c| **c < 0.0) {
            return invalid(format!("couplings must be >= 0, got {c}"));
        }
        Ok(())
    }

    /// Coupling of the bond between dots `j` and `j + 1` (1-based).
    pub fn bond(&self, j: usize) -> f64 {
        self.couplings[j - 1]
    }

    pub fn max_coupling(&self) -> f64 {
        self.couplings.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Sub-chain made of dots `first..=last`, keeping V, U and the detector
    /// only if the sub-chain still contains the last dot.
    pub fn subchain(&self, first: usize, last: usize) -> Result<ChainParams> {
        if first == 0 || first > last || last > self.n {
            return invalid(format!("bad sub-chain {first}..={last} of {} dots", self.n));
        }
        let gamma = if last == self.n { self.gamma } else { 0.0 };
        ChainParams::new(
            self.eps[first - 1..last].to_vec(),
            self.couplings[first - 1..last - 1].to_vec(),
            self.v,
            self.u,
            gamma,
        )
    }
}

/// Perfect-transfer coupling profile `t0 * sqrt((n - j) j)`, `j = 1..n-1`.
pub fn optimal_couplings(n: usize, t0: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return invalid(format!("optimal couplings need n >= 2, got {n}"));
    }
    if !(t0 > 0.0) {
        return invalid(format!("t0 must be positive, got {t0}"));
    }
    Ok((1..n)
        .map(|j| t0 * (((n - j) * j) as f64).sqrt())
        .collect())
}

/// Gaussian fluctuation magnitudes (standard deviations) and the master seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(default)]
    pub delta_eps: f64,
    #[serde(default)]
    pub delta_t: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(delta_eps: f64, delta_t: f64, seed: u64) -> Result<Self> {
        let spec = DisorderSpec {
            delta_eps,
            delta_t,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none(seed: u64) -> Self {
        DisorderSpec {
            delta_eps: 0.0,
            delta_t: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_eps >= 0.0 && self.delta_t >= 0.0) {
            return invalid("disorder magnitudes must be >= 0");
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.delta_eps == 0.0 && self.delta_t == 0.0
    }
}

/// Draws one static disorder realization around `params`.
///
/// Each energy is drawn from `Normal(eps_j, delta_eps)` and each coupling from
/// `Normal(t_j, delta_t)`. Bonds whose nominal coupling is exactly zero are
/// closed barriers and stay closed. Negative draws are kept.
pub fn sample_disorder<R: Rng + ?Sized>(
    params: &ChainParams,
    spec: &DisorderSpec,
    rng: &mut R,
) -> ChainParams {
    let mut out = params.clone();
    // Normal::new only fails for negative or non-finite deviations,
    // which DisorderSpec rules out.
    let energy = Normal::new(0.0, spec.delta_eps).expect("valid delta_eps");
    let coupling = Normal::new(0.0, spec.delta_t).expect("valid delta_t");
    for e in out.eps.iter_mut() {
        *e += energy.sample(rng);
    }
    for t in out.couplings.iter_mut() {
        let shift = coupling.sample(rng);
        if *t != 0.0 {
            *t += shift;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Severity {
    /// The inequality holds but not by an order of magnitude.
    Marginal,
    /// The inequality is violated outright.
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeWarning {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Marginal => "marginal",
            Severity::Violated => "violated",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// "Much greater than" threshold used by the advisory checks.
const MUCH_GREATER: f64 = 10.0;

/// Advisory checks of the Coulomb-blockade / tight-binding assumptions.
///
/// Checks `U >> t_max`, `U >> 4 t_max^2 tau_max` (spin exchange negligible over
/// the run) and `gamma << t_max` (detector weak compared to tunnelling).
/// Never fails; an infinite `U` skips the two U checks.
pub fn validate_regime(params: &ChainParams, tau_max: f64) -> Vec<RegimeWarning> {
    let mut warnings = Vec::new();
    let t_max = params.max_coupling();
    let mut check = |lhs: f64, rhs: f64, what: &str| {
        if lhs < rhs {
            warnings.push(RegimeWarning {
                severity: Severity::Violated,
                message: format!("{what}: {lhs} vs {rhs}"),
            });
        } else if lhs < MUCH_GREATER * rhs {
            warnings.push(RegimeWarning {
                severity: Severity::Marginal,
                message: format!("{what}: {lhs} vs {rhs}"),
            });
        }
    };
    if let Some(u) = params.u {
        check(u, t_max, "U >> t_max");
        check(u, 4.0 * t_max * t_max * tau_max, "U >> 4 t^2 tau");
    }
    if params.gamma > 0.0 && t_max > 0.0 {
        check(t_max, params.gamma, "t_max >> gamma");
    }
    warnings
}

/// Bulk material and geometry of a disk-shaped dot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Relative permittivity.
    pub eps_r: f64,
    /// Effective mass as a fraction of the free electron mass.
    pub m_star: f64,
    /// Dot radius in metres.
    pub radius: f64,
}

impl MaterialParams {
    pub const GAAS_EPS_R: f64 = 13.0;
    pub const GAAS_M_STAR: f64 = 0.067;

    pub fn gaas(radius: f64) -> Self {
        MaterialParams {
            eps_r: Self::GAAS_EPS_R,
            m_star: Self::GAAS_M_STAR,
            radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub u_joule: f64,
    pub u_microev: f64,
    pub level_spacing_joule: f64,
    pub level_spacing_microev: f64,
}

pub mod constants {
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const MICROEV: f64 = 1e-6 * ELEMENTARY_CHARGE;
}

/// Charging energy `e^2 / C_g` with `C_g = 8 eps_r eps_0 R`, and level spacing
/// `hbar^2 pi / (m* R^2)`.
pub fn estimate_parameters(mat: &MaterialParams) -> Result<EnergyEstimate> {
    use constants::*;
    if !(mat.radius > 0.0) {
        return invalid(format!("dot radius must be positive, got {}", mat.radius));
    }
    if !(mat.eps_r > 0.0 && mat.m_star > 0.0) {
        return invalid("eps_r and m_star must be positive");
    }
    let c_g = 8.0 * mat.eps_r * VACUUM_PERMITTIVITY * mat.radius;
    let u = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / c_g;
    let m = mat.m_star * ELECTRON_MASS;
    let spacing = HBAR * HBAR * std::f64::consts::PI / (m * mat.radius * mat.radius);
    Ok(EnergyEstimate {
        u_joule: u,
        u_microev: u / MICROEV,
        level_spacing_joule: spacing,
        level_spacing_microev: spacing / MICROEV,
    })
}

/// Conversion from `t0` units to laboratory units for a given `t0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitScale {
    pub t0_microev: f64,
}

impl UnitScale {
    pub fn energy_microev(&self, x: f64) -> f64 {
        x * self.t0_microev
    }

    /// Rate `x * t0 / h` in GHz.
    pub fn rate_ghz(&self, x: f64) -> f64 {
        x * self.t0_microev * constants::MICROEV / constants::PLANCK * 1e-9
    }

    /// Time `tau * hbar / t0` in nanoseconds.
    pub fn time_ns(&self, tau: f64) -> f64 {
        tau * constants::HBAR / (self.t0_microev * constants::MICROEV) * 1e9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingProfile {
    Named(ProfileName),
    /// Explicit per-bond couplings, used as given.
    Explicit(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Uniform,
    Optimal,
}

impl Default for CouplingProfile {
    fn default() -> Self {
        CouplingProfile::Named(ProfileName::Uniform)
    }
}

fn one() -> f64 {
    1.0
}

/// JSON form of a chain description.
///
/// ```json
/// {"n": 20, "eps0": 0.0, "t0": 1.0, "coupling_profile": "optimal",
///  "v": 0.0, "u": null, "gamma": 0.2,
///  "disorder": {"delta_eps": 0.1, "delta_t": 0.05, "seed": 7}}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default = "one")]
    pub t0: f64,
    #[serde(default)]
    pub coupling_profile: CouplingProfile,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub disorder: Option<DisorderSpec>,
}

impl ChainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Nominal (disorder-free) parameters.
    pub fn params(&self) -> Result<ChainParams> {
        if !(self.t0 > 0.0) {
            return invalid(format!("t0 must be positive, got {}", self.t0));
        }
        let couplings = match &self.coupling_profile {
            CouplingProfile::Named(ProfileName::Uniform) => vec![self.t0; self.n.saturating_sub(1)],
            CouplingProfile::Named(ProfileName::Optimal) => optimal_couplings(self.n, self.t0)?,
            CouplingProfile::Explicit(values) => values.clone(),
        };
        let params = ChainParams::new(vec![self.eps0; self.n], couplings, self.v, self.u, self.gamma)?;
        params.validate_nominal()?;
        Ok(params)
    }

    pub fn disorder(&self) -> Result<DisorderSpec> {
        let spec = self.disorder.clone().unwrap_or_default();
        spec.validate()?;
        Ok(spec)
    }
}
