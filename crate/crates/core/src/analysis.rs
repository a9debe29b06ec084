//! Decay-rate fits, the rate σ on `H^n`, and the stability, uniqueness and
//! scaling experiments.

use crate::domain::{Domain, Field};
use crate::duhamel::{picard_iterate, DuhamelQuadrature, KSParams, KellerSegel};
use crate::error::{Error, Result};
use crate::spectral::{TorusDomain, TorusField, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Power,
    Exponential,
}

impl FitKind {
    pub fn name(self) -> &'static str {
        match self {
            FitKind::Power => "power",
            FitKind::Exponential => "exponential",
        }
    }
}

/// Least-squares fit of `log y` against `log t` (power) or `t` (exponential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub kind: FitKind,
    /// Slope of `log y` vs `log t` for a power law; e-folding rate (`−slope`)
    /// for an exponential.
    pub rate: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

fn fit(series: &[(f64, f64)], window: (f64, f64), kind: FitKind) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::domain(format!("empty fit window [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < 8 {
        return Err(Error::domain(format!(
            "fit window [{lo}, {hi}] holds {} points, need at least 8",
            pts.len()
        )));
    }
    if let Some(&(t, y)) = pts.iter().find(|&&(_, y)| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::domain(format!("non-positive value {y} at t = {t}")));
    }
    if kind == FitKind::Power {
        if let Some(&(t, _)) = pts.iter().find(|&&(t, _)| !(t > 0.0)) {
            return Err(Error::domain(format!("power fit needs t > 0, got {t}")));
        }
    }
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, y)| {
            let x = match kind {
                FitKind::Power => t.ln(),
                FitKind::Exponential => t,
            };
            (x, y.ln())
        })
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit window holds a single abscissa"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy <= 1e-24 * n * (1.0 + my * my) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        kind,
        rate: match kind {
            FitKind::Power => slope,
            FitKind::Exponential => -slope,
        },
        prefactor: intercept.exp(),
        r2,
        window,
        points: pts.len(),
    })
}

pub fn fit_power(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    fit(series, window, FitKind::Power)
}

pub fn fit_exponential(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    fit(series, window, FitKind::Exponential)
}

pub fn fit_kind(series: &[(f64, f64)], window: (f64, f64), kind: FitKind) -> Result<DecayFit> {
    fit(series, window, kind)
}

/// Fit window that skips the first 20% of the horizon.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.2 * horizon, horizon)
}

/// `γ_{p,q} = (δ/2)[(1/p − 1/q) + (8/q)(1 − 1/p)]`.
pub fn gamma_pq(p: f64, q: f64, delta: f64) -> f64 {
    0.5 * delta * ((1.0 / p - 1.0 / q) + 8.0 / q * (1.0 - 1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma {
    pub sigma: f64,
    /// `γ_{p/2,p/2}`, `(γ_{p/2,p/2} + γ_{pn/(4n−p),p/2})/2`,
    /// `(γ_{p/2,p/2} + γ_{p/3,p/2})/2`.
    pub candidates: [f64; 3],
}

/// Exponential rate of the periodic orbit on `H^n` for `n < p < 2n`.
pub fn compute_sigma(p: f64, n: usize, delta: f64) -> Result<Sigma> {
    let nf = n as f64;
    if !(p > nf && p < 2.0 * nf) {
        return Err(Error::domain(format!("need n < p < 2n, got p = {p}, n = {n}")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("δ must be finite and non-negative, got {delta}")));
    }
    let h = p / 2.0;
    let base = gamma_pq(h, h, delta);
    let candidates = [
        base,
        0.5 * (base + gamma_pq(p * nf / (4.0 * nf - p), h, delta)),
        0.5 * (base + gamma_pq(p / 3.0, h, delta)),
    ];
    Ok(Sigma {
        sigma: candidates.iter().copied().fold(f64::INFINITY, f64::min),
        candidates,
    })
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    pub series: Vec<(f64, f64)>,
    pub fit: Option<DecayFit>,
}

/// Runs the orbit from `base` and the perturbed orbit from `base + perturbation`
/// side by side and records `norm(u − û)` at every step.
#[allow(clippy::too_many_arguments)]
pub fn stability_experiment<D: Domain>(
    model: &KellerSegel<'_, D>,
    base: &D::Field,
    perturbation: &D::Field,
    horizon: f64,
    dt: f64,
    norm: impl Fn(&D::Field) -> f64,
    fit_window: Option<(f64, f64)>,
    kind: FitKind,
) -> Result<StabilityResult> {
    let reference = model.solve_mild(base, horizon, dt)?;
    let perturbed = model.solve_mild(&base.add(perturbation), horizon, dt)?;
    let series: Vec<(f64, f64)> = reference
        .times
        .iter()
        .zip(reference.snapshots.iter().zip(&perturbed.snapshots))
        .map(|(&t, (a, b))| (t, norm(&b.sub(a))))
        .collect();
    let fit = match fit_window {
        Some(w) => Some(fit(&series, w, kind)?),
        None => None,
    };
    Ok(StabilityResult { series, fit })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// `max_t ‖u_step(t) − u_picard(t)‖` in the working norm.
    pub absolute: f64,
    /// The same divided by `max_t ‖u_step(t)‖`.
    pub relative: f64,
    pub picard_iterations: usize,
}

/// Time stepping against Picard iteration on the quadrature of the Duhamel
/// formula, from the same initial datum.
pub fn uniqueness_experiment<D: Domain>(
    model: &KellerSegel<'_, D>,
    u0: &D::Field,
    horizon: f64,
    dt: f64,
    picard_tol: f64,
) -> Result<Divergence> {
    let dom = model.domain();
    let stepped = model.solve_mild(u0, horizon, dt)?;
    let picard = picard_iterate(
        model,
        u0,
        horizon,
        dt,
        100,
        picard_tol,
        DuhamelQuadrature::new(dt / 2.0)?,
    )?;
    if !picard.converged {
        return Err(Error::ContractionFailure { ratios: picard.ratios });
    }
    let absolute = stepped
        .snapshots
        .iter()
        .zip(&picard.trajectory.snapshots)
        .map(|(a, b)| dom.working_norm(&a.sub(b)))
        .fold(0.0, f64::max);
    let scale = stepped.norms.iter().copied().fold(0.0, f64::max);
    Ok(Divergence {
        absolute,
        relative: if scale > 0.0 { absolute / scale } else { absolute },
        picard_iterations: picard.iterations(),
    })
}

/// Solves the unforced `γ = 0` problem from `u0` on the box of side `L` and
/// from `λ²u0(λ·)` on the box of side `L/λ` with time step `dt/λ²`; returns
/// `max |λ²u(λ²t, λx) − u_λ(t, x)| / max |u_λ|` at the final time.
pub fn scaling_check(
    points: usize,
    length: f64,
    lambda: f64,
    kappa: f64,
    u0: impl Fn(&[f64]) -> f64 + Sync,
    t_final: f64,
    dt: f64,
) -> Result<f64> {
    use crate::domain::DomainKind;
    use crate::duhamel::ForcingSpec;
    let big = TorusDomain::new(TorusGrid::new(2, points, length)?);
    let small = TorusDomain::new(TorusGrid::new(2, points, length / lambda)?);
    let p = KSParams::new(1.0, kappa, 0.0, 2, DomainKind::Torus)?;
    let zero_mean = |d: &TorusDomain, f: TorusField| d.zero_mode_policy(&f);
    let a0 = zero_mean(&big, TorusField::from_fn(*big.grid(), &u0));
    let b0 = zero_mean(
        &small,
        TorusField::from_fn(*small.grid(), |x| {
            let y: Vec<f64> = x.iter().map(|c| c * lambda).collect();
            lambda * lambda * u0(&y)
        }),
    );
    let ma = KellerSegel::new(&big, p, ForcingSpec::zero(1.0))?;
    let mb = KellerSegel::new(&small, p, ForcingSpec::zero(1.0))?;
    let l2 = lambda * lambda;
    let a = ma.solve_mild(&a0, t_final, dt)?;
    let b = mb.solve_mild(&b0, t_final / l2, dt / l2)?;
    let mapped = a.last().scaled(l2);
    let scale = b.last().max_abs();
    Ok(mapped.sub(b.last()).max_abs() / scale.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (1..=100).map(|k| k as f64 * 0.1).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_laws() {
        let p = fit_power(&series(|t| 3.0 * t.powf(-0.5)), (0.5, 10.0)).unwrap();
        assert!((p.rate + 0.5).abs() < 1e-6);
        assert!(p.r2 > 1.0 - 1e-9);
        let e = fit_exponential(&series(|t| (-2.0 * t).exp()), (0.0, 10.0)).unwrap();
        assert!((e.rate - 2.0).abs() < 1e-6);
        let c = fit_power(&series(|_| 4.0), (1.0, 10.0)).unwrap();
        assert!(c.rate.abs() < 1e-9);
        assert_eq!(c.r2, 1.0);
    }

    #[test]
    fn power_law_is_poor_exponential() {
        let e = fit_exponential(&series(|t| t.powf(-2.0)), (0.1, 10.0)).unwrap();
        assert!(e.r2 < 0.99, "{}", e.r2);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_power(&series(|t| t - 5.0), (0.1, 10.0)).is_err());
        assert!(fit_power(&series(|t| t), (0.1, 0.5)).is_err());
        assert!(fit_power(&series(|t| t), (2.0, 1.0)).is_err());
    }

    #[test]
    fn sigma_table() {
        let s = compute_sigma(4.0, 3, 1.0).unwrap();
        assert_eq!(s.candidates, [1.0, 0.875, 0.8125]);
        assert_eq!(s.sigma, 0.8125);
        assert_eq!(compute_sigma(4.5, 3, 0.0).unwrap().sigma, 0.0);
        for &p in &[3.2, 4.0, 5.5] {
            let a = compute_sigma(p, 3, 1.0).unwrap();
            let b = compute_sigma(p, 3, 2.0).unwrap();
            assert!((b.sigma - 2.0 * a.sigma).abs() < 1e-15);
            assert!(a.candidates.iter().all(|&c| a.sigma <= c));
        }
        assert!(compute_sigma(3.0, 3, 1.0).is_err());
        assert!(compute_sigma(6.0, 3, 1.0).is_err());
    }

    #[test]
    fn scaling_identity() {
        let err = scaling_check(
            32,
            16.0,
            2.0,
            1.0,
            |x| 0.5 * (-(x[0] * x[0] + x[1] * x[1])).exp(),
            0.2,
            0.01,
        )
        .unwrap();
        assert!(err < 1e-10, "{err}");
    }
}
