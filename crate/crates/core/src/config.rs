//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::domain::DomainKind;
use crate::duhamel::{ForcingSpec, KSParams, Scheme};
use crate::error::{Error, Result};
use crate::hyperbolic::Propagator;
use crate::periodic::{BoundConstants, CesaroSummation, FixedPointMode, FixedPointOptions, PeriodicOptions};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub forcing: ForcingSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKindName {
    Torus,
    HyperbolicRadial,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorName {
    #[default]
    CrankNicolson,
    Modal,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKindName,
    pub n: usize,
    /// Torus points per axis.
    pub points: Option<usize>,
    /// Torus side length.
    pub length: Option<f64>,
    /// Radial node count.
    pub nodes: Option<usize>,
    pub tau_max: Option<f64>,
    /// Radial working-norm exponent `p`, norms are `L^{p/2}`.
    pub norm_exponent: Option<f64>,
    #[serde(default)]
    pub propagator: PropagatorName,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default = "one")]
    pub chi: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub delta_n: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            chi: 1.0,
            kappa: 1.0,
            gamma: 1.0,
            delta_n: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default = "one")]
    pub period: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub window_rate: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            period: 1.0,
            amplitude: 0.0,
            phase: 0.0,
            width: 1.0,
            window_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Etd1,
    #[default]
    Etd2rk,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointName {
    #[default]
    Cesaro,
    Plain,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default = "default_tol_outer")]
    pub tol_outer: f64,
    #[serde(default = "default_tol_inner")]
    pub tol_inner: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_max_cesaro")]
    pub max_cesaro: u64,
    #[serde(default)]
    pub fixed_point: FixedPointName,
    pub rho: Option<f64>,
}

fn default_tol_outer() -> f64 {
    1e-8
}

fn default_tol_inner() -> f64 {
    1e-10
}

fn default_max_outer() -> usize {
    50
}

fn default_max_cesaro() -> u64 {
    1 << 40
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FitName {
    Power,
    Exponential,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "one")]
    pub horizon: f64,
    pub fit_window: Option<[f64; 2]>,
    pub fit: Option<FitName>,
    #[serde(default)]
    pub seed: u64,
    /// Amplitude of the Gaussian initial datum (0 gives `u0 = 0`).
    #[serde(default)]
    pub initial_amplitude: f64,
    #[serde(default = "one")]
    pub initial_width: f64,
    /// Periods replayed by `replay`.
    #[serde(default = "default_periods")]
    pub periods: usize,
    /// Exponents `p` tabulated by `sigma`.
    #[serde(default)]
    pub sigma_p: Vec<f64>,
    /// Steps between CSV rows.
    #[serde(default = "default_every")]
    pub output_every: usize,
    /// Largest relative periodicity residual `find-periodic` accepts.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    /// `fit-decay` fits the maxima over each forcing period instead of the raw series.
    #[serde(default)]
    pub envelope: bool,
    /// Empirical constants for the a-priori bound in the periodic report.
    pub k_hat: Option<f64>,
    pub c_tilde: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: default_name(),
            horizon: 1.0,
            fit_window: None,
            fit: None,
            seed: 0,
            initial_amplitude: 0.0,
            initial_width: 1.0,
            periods: default_periods(),
            sigma_p: Vec::new(),
            output_every: default_every(),
            residual_tol: default_residual_tol(),
            envelope: false,
            k_hat: None,
            c_tilde: None,
        }
    }
}

fn default_name() -> String {
    "run".into()
}

fn default_periods() -> usize {
    3
}

fn default_every() -> usize {
    1
}

fn default_residual_tol() -> f64 {
    1e-6
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        match d.kind {
            DomainKindName::Torus => {
                if !(1..=4).contains(&d.n) {
                    return Err(Error::Config(format!("torus dimension must be 1..=4, got {}", d.n)));
                }
                let points = d
                    .points
                    .ok_or_else(|| Error::Config("torus needs domain.points".into()))?;
                if points < 8 || !points.is_power_of_two() {
                    return Err(Error::Config(format!(
                        "domain.points must be a power of two ≥ 8, got {points}"
                    )));
                }
                positive(
                    "domain.length",
                    d.length
                        .ok_or_else(|| Error::Config("torus needs domain.length".into()))?,
                )?;
                if d.nodes.is_some() || d.tau_max.is_some() || d.norm_exponent.is_some() {
                    return Err(Error::Config(
                        "nodes, tau_max and norm_exponent apply to hyperbolic-radial only".into(),
                    ));
                }
            }
            DomainKindName::HyperbolicRadial => {
                if d.n < 2 {
                    return Err(Error::Config(format!("hyperbolic dimension must be ≥ 2, got {}", d.n)));
                }
                let nodes = d
                    .nodes
                    .ok_or_else(|| Error::Config("hyperbolic-radial needs domain.nodes".into()))?;
                if nodes < 16 {
                    return Err(Error::Config(format!("domain.nodes must be ≥ 16, got {nodes}")));
                }
                let tau = d
                    .tau_max
                    .ok_or_else(|| Error::Config("hyperbolic-radial needs domain.tau_max".into()))?;
                if !(tau >= 10.0) || !tau.is_finite() {
                    return Err(Error::Config(format!("domain.tau_max must be ≥ 10, got {tau}")));
                }
                if let Some(p) = d.norm_exponent {
                    let n = d.n as f64;
                    if !(p > n && p < 2.0 * n) {
                        return Err(Error::Config(format!(
                            "domain.norm_exponent must lie in (n, 2n), got {p}"
                        )));
                    }
                }
                if d.points.is_some() || d.length.is_some() {
                    return Err(Error::Config("points and length apply to torus only".into()));
                }
            }
        }
        let p = &self.params;
        if !p.chi.is_finite() {
            return Err(Error::Config("params.chi must be finite".into()));
        }
        if !(p.kappa >= 0.0) || !(p.gamma >= 0.0) || !(p.delta_n >= 0.0) {
            return Err(Error::Config("params.kappa, gamma and delta_n must be ≥ 0".into()));
        }
        let f = &self.forcing;
        positive("forcing.period", f.period)?;
        positive("forcing.width", f.width)?;
        if !(f.window_rate >= 0.0) || !f.amplitude.is_finite() || !f.phase.is_finite() {
            return Err(Error::Config(
                "forcing amplitude/phase must be finite and window_rate ≥ 0".into(),
            ));
        }
        let s = &self.solver;
        positive("solver.dt", s.dt)?;
        positive("solver.tol_outer", s.tol_outer)?;
        positive("solver.tol_inner", s.tol_inner)?;
        if let Some(r) = s.rho {
            positive("solver.rho", r)?;
        }
        let e = &self.experiment;
        positive("experiment.horizon", e.horizon)?;
        positive("experiment.initial_width", e.initial_width)?;
        if !e.initial_amplitude.is_finite() {
            return Err(Error::Config("experiment.initial_amplitude must be finite".into()));
        }
        if let Some([a, b]) = e.fit_window {
            if !(a < b) || !(a >= 0.0) {
                return Err(Error::Config(format!("experiment.fit_window [{a}, {b}] is empty")));
            }
        }
        positive("experiment.residual_tol", e.residual_tol)?;
        if e.k_hat.is_some() != e.c_tilde.is_some() {
            return Err(Error::Config(
                "experiment.k_hat and c_tilde must be given together".into(),
            ));
        }
        if e.output_every == 0 {
            return Err(Error::Config("experiment.output_every must be ≥ 1".into()));
        }
        if e.name.is_empty() || e.name.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "experiment.name {:?} is not a plain file stem",
                e.name
            )));
        }
        Ok(())
    }

    pub fn domain_kind(&self) -> DomainKind {
        match self.domain.kind {
            DomainKindName::Torus => DomainKind::Torus,
            DomainKindName::HyperbolicRadial => DomainKind::HyperbolicRadial,
        }
    }

    pub fn ks_params(&self) -> Result<KSParams> {
        KSParams::new(
            self.params.chi,
            self.params.kappa,
            self.params.gamma,
            self.domain.n,
            self.domain_kind(),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn forcing_spec(&self) -> ForcingSpec {
        let f = &self.forcing;
        ForcingSpec {
            period: f.period,
            amplitude: f.amplitude,
            phase: f.phase,
            width: f.width,
            window_rate: f.window_rate,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.solver.scheme {
            SchemeName::Etd1 => Scheme::Etd1,
            SchemeName::Etd2rk => Scheme::Etd2rk,
        }
    }

    pub fn propagator(&self) -> Propagator {
        match self.domain.propagator {
            PropagatorName::CrankNicolson => Propagator::CrankNicolson,
            PropagatorName::Modal => Propagator::Modal,
        }
    }

    pub fn bound_constants(&self) -> Option<BoundConstants> {
        match (self.experiment.k_hat, self.experiment.c_tilde) {
            (Some(k_hat), Some(c_tilde)) => Some(BoundConstants { k_hat, c_tilde }),
            _ => None,
        }
    }

    pub fn periodic_options(&self) -> PeriodicOptions {
        let s = &self.solver;
        PeriodicOptions {
            dt: s.dt,
            tol_outer: s.tol_outer,
            max_outer: s.max_outer,
            inner: FixedPointOptions {
                tol: s.tol_inner,
                max_n: s.max_cesaro,
                mode: match s.fixed_point {
                    FixedPointName::Cesaro => FixedPointMode::Cesaro,
                    FixedPointName::Plain => FixedPointMode::Plain,
                },
                summation: CesaroSummation::Geometric,
            },
            rho: s.rho,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = r#"
[domain]
kind = "torus"
n = 2
points = 32
length = 10.0

[solver]
dt = 0.01
"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::parse(TORUS).unwrap();
        assert_eq!(c.domain.points, Some(32));
        assert_eq!(c.params.kappa, 1.0);
        assert_eq!(c.experiment.name, "run");
        assert_eq!(c.scheme(), Scheme::Etd2rk);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = TORUS.replace("dt = 0.01", "dt = 0.01\ndtt = 3");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_))));
        let text = format!("{TORUS}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn ranges_checked() {
        assert!(ExperimentConfig::parse(&TORUS.replace("points = 32", "points = 30")).is_err());
        assert!(ExperimentConfig::parse(&TORUS.replace("dt = 0.01", "dt = -1.0")).is_err());
        let radial = r#"
[domain]
kind = "hyperbolic-radial"
n = 3
nodes = 401
tau_max = 20.0
norm_exponent = 7.0

[solver]
dt = 0.01
"#;
        assert!(ExperimentConfig::parse(radial).is_err());
        assert!(ExperimentConfig::parse(&radial.replace("7.0", "4.0")).is_ok());
    }
}
