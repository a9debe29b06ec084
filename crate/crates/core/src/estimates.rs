//! Numerical probes of the linear, bilinear and dispersive estimates. Each
//! harness returns measured ratios; the constants in the estimates are not
//! known in closed form, so callers compare suprema across corpora and grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::analysis::{fit_exponential, DecayFit};
use crate::domain::{Domain, Field};
use crate::duhamel::{bilinear_b, linear_l, DuhamelQuadrature, Forcing, ForcingSpec, Trajectory};
use crate::error::{Error, Result};
use crate::hyperbolic::{RadialDomain, RadialField};
use crate::lorentz::{self, check_holder, HolderExponents, HolderOutcome, LorentzParams, Measured};
use crate::spectral::{TorusDomain, TorusField, TorusGrid, TorusVectorField};

/// `‖f‖_{L^{p,q}}`, falling back to the rearrangement quasi-norm where the
/// maximal-function norm is undefined or degenerates (`p ≤ 1`).
pub fn lorentz<F: Measured + ?Sized>(f: &F, p: f64, q: f64) -> Result<f64> {
    match LorentzParams::new(p, q) {
        Ok(params) if p > 1.0 => lorentz::lorentz_norm(f, params),
        _ => lorentz::lorentz_quasinorm(f, p, q),
    }
}

pub fn weak<F: Measured + ?Sized>(f: &F, p: f64) -> Result<f64> {
    lorentz(f, p, f64::INFINITY)
}

/// An anisotropic Gaussian bump.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    pub amplitude: f64,
}

impl Bump {
    pub fn sample(&self, grid: TorusGrid) -> TorusField {
        TorusField::from_fn(grid, |x| {
            let e: f64 = x
                .iter()
                .zip(&self.center)
                .zip(&self.widths)
                .map(|((x, c), w)| ((x - c) / w).powi(2))
                .sum();
            self.amplitude * (-0.5 * e).exp()
        })
    }
}

/// Deterministic corpus of bumps with widths in `[w/2, 2w]`, centres within
/// `spread` of the origin and amplitudes in `[0.5, 2]`.
pub fn random_bumps(dim: usize, count: usize, width: f64, spread: f64, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Bump {
            center: (0..dim).map(|_| rng.gen_range(-spread..=spread)).collect(),
            widths: (0..dim).map(|_| width * 2f64.powf(rng.gen_range(-1.0..=1.0))).collect(),
            amplitude: rng.gen_range(0.5..=2.0),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSummary {
    pub max: f64,
    pub min: f64,
    pub count: usize,
}

impl CorpusSummary {
    pub fn of(ratios: &[f64]) -> Self {
        Self {
            max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            count: ratios.len(),
        }
    }

    pub fn spread(&self) -> f64 {
        self.max / self.min
    }

    pub fn is_finite(&self) -> bool {
        self.max.is_finite() && self.min.is_finite() && self.min > 0.0
    }
}

/// Relative change `|a − b| / max(|a|, |b|)`.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// `(t, ‖e^{tΔ}φ‖_{L^2})` at the given times, from one forward transform.
pub fn heat_l2_series(domain: &TorusDomain, phi: &TorusField, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let modes = domain.forward(phi)?;
    let k2 = domain.k_squared();
    times
        .iter()
        .map(|&t| {
            let m: Vec<Complex64> = modes.iter().zip(k2).map(|(c, &l)| c * (-t * l).exp()).collect();
            Ok((t, lorentz::lp_norm(&domain.inverse(m), 2.0)))
        })
        .collect()
}

/// `n`-point geometric sequence from `a` to `b`.
pub fn log_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// `|∇e^{sΔ}φ|` as a scalar field.
fn heat_gradient_magnitude(domain: &TorusDomain, phi: &TorusField, s: f64) -> Result<TorusField> {
    let comps = (0..domain.grid().dim())
        .map(|a| domain.heat_apply(phi, s, 1, Some(a)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TorusVectorField::new(comps)?.magnitude())
}

/// `sup_t t^{m/2 + (n/2)(1/r − 1/p)} ‖∇^m e^{tΔ}φ‖_{L^{p,∞}} / ‖φ‖_{L^{r,∞}}`
/// over the sample times.
pub fn dispersive_sup(domain: &TorusDomain, phi: &TorusField, m: u32, r: f64, p: f64, times: &[f64]) -> Result<f64> {
    if m > 1 {
        return Err(Error::Unsupported(format!("derivative order {m} > 1")));
    }
    let n = domain.grid().dim() as f64;
    let expo = 0.5 * m as f64 + 0.5 * n * (1.0 / r - 1.0 / p);
    let denom = weak(phi, r)?;
    let vals = times
        .par_iter()
        .map(|&t| {
            let f = if m == 0 {
                domain.heat_apply(phi, t, 0, None)?
            } else {
                heat_gradient_magnitude(domain, phi, t)?
            };
            Ok(t.powf(expo) * weak(&f, p)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YamazakiResult {
    /// `∫_0^S s^{a} ‖∇e^{sΔ}φ‖_{L^{p,1}} ds` with `a = (n/2)(1/r − 1/p) − 1/2`.
    pub integral: f64,
    /// Bound on the neglected `∫_S^∞` from the spectral gap of the box.
    pub tail_bound: f64,
    pub s_max: f64,
    pub ratio: f64,
}

/// Truncated Yamazaki integral over `‖φ‖_{L^{r,1}}`, integrated in `ln s`
/// with the trapezoidal rule; `S` grows until the tail bound is below
/// `tail_fraction` of the integral.
pub fn yamazaki_ratio(
    domain: &TorusDomain,
    phi: &TorusField,
    r: f64,
    p: f64,
    s_min: f64,
    tail_fraction: f64,
) -> Result<YamazakiResult> {
    if !(1.0 < r && r < p) {
        return Err(Error::domain(format!("need 1 < r < p, got r = {r}, p = {p}")));
    }
    let grid = domain.grid();
    let n = grid.dim() as f64;
    let a = 0.5 * n * (1.0 / r - 1.0 / p) - 0.5;
    let lambda1 = (2.0 * std::f64::consts::PI / grid.length()).powi(2);
    let norm_at = |s: f64| -> Result<f64> { lorentz(&heat_gradient_magnitude(domain, phi, s)?, p, 1.0) };
    let dx = 0.25;
    let head = norm_at(0.0)? * s_min.powf(a + 1.0) / (a + 1.0);
    let mut integral = head;
    let mut x = s_min.ln();
    let mut prev = s_min.powf(a + 1.0) * norm_at(s_min)?;
    loop {
        // a batch of one e-fold at a time
        let xs: Vec<f64> = (1..=4).map(|k| x + k as f64 * dx).collect();
        let vals = xs
            .par_iter()
            .map(|&x| {
                let s = x.exp();
                let raw = norm_at(s)?;
                Ok((s, s.powf(a + 1.0) * raw, raw))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut last = (0.0, 0.0);
        for &(s, v, raw) in &vals {
            integral += 0.5 * dx * (prev + v);
            prev = v;
            last = (s, raw);
        }
        x += 4.0 * dx;
        let (s, raw) = last;
        // ∫_S^∞ s^a e^{−(s−S)λ₁} ds · ‖∇e^{SΔ}φ‖ with s^a ≤ S^a for a ≤ 0
        let tail = if a <= 0.0 {
            s.powf(a) * raw / lambda1
        } else if s * lambda1 < a + 1.0 {
            f64::INFINITY
        } else {
            raw * lambda1.powf(-a - 1.0) * upper_gamma_scaled(a + 1.0, s * lambda1)
        };
        if tail < tail_fraction * integral || s > 1e8 {
            let denom = lorentz(phi, r, 1.0)?;
            return Ok(YamazakiResult {
                integral,
                tail_bound: tail,
                s_max: s,
                ratio: integral / denom,
            });
        }
    }
}

/// `e^x Γ(a, x)` by the Legendre continued fraction, for `x > a − 1`.
fn upper_gamma_scaled(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / f64::MIN_POSITIVE;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < f64::MIN_POSITIVE {
            d = f64::MIN_POSITIVE;
        }
        c = b + an / c;
        if c.abs() < f64::MIN_POSITIVE {
            c = f64::MIN_POSITIVE;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (a * x.ln()).exp() * h
}

/// `‖L_j f‖_{L^{q,∞}} / ‖f‖_{L^{p,∞}}` with `1/q = 1/p − 1/n`.
pub fn lj_ratio(domain: &TorusDomain, f: &TorusField, j: usize, gamma: f64, p: f64) -> Result<f64> {
    let n = domain.grid().dim() as f64;
    let inv_q = 1.0 / p - 1.0 / n;
    if !(inv_q > 0.0) {
        return Err(Error::domain(format!("need p < n, got p = {p}, n = {n}")));
    }
    let lf = domain.lj_apply(f, j, gamma, 1.0)?;
    Ok(weak(&lf, 1.0 / inv_q)? / weak(f, p)?)
}

/// `e^{tΔ}u0` recorded on `0, dt, …, horizon`.
pub fn heat_trajectory<D: Domain>(domain: &D, u0: &D::Field, horizon: f64, dt: f64) -> Result<Trajectory<D::Field>> {
    let steps = crate::duhamel::step_count(horizon, dt)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let snapshots = times
        .par_iter()
        .map(|&t| domain.semigroup(u0, t))
        .collect::<Result<Vec<_>>>()?;
    let norms = snapshots.iter().map(|s| domain.working_norm(s)).collect();
    Ok(Trajectory {
        times,
        snapshots,
        norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearSample {
    pub b_norm: f64,
    pub u_norm: f64,
    pub w_norm: f64,
    /// `sup_t ‖B(u,ω)(t)‖ / (g(γ) sup_t ‖u‖ sup_t ‖ω‖)` in the working norm.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BilinearSetup {
    pub gamma: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Times at which `B` is evaluated, as multiples of `dt`.
    pub sample_every: usize,
    pub tau_step: f64,
}

/// Bilinear ratio for the heat trajectories from `u0` and `w0` (`κ = 1`).
pub fn bilinear_ratio<D: Domain>(
    domain: &D,
    u0: &D::Field,
    w0: &D::Field,
    setup: BilinearSetup,
) -> Result<BilinearSample> {
    let u = heat_trajectory(domain, u0, setup.horizon, setup.dt)?;
    let w = heat_trajectory(domain, w0, setup.horizon, setup.dt)?;
    let quad = DuhamelQuadrature::new(setup.tau_step)?;
    let samples: Vec<f64> = u
        .times
        .iter()
        .copied()
        .step_by(setup.sample_every.max(1))
        .skip(1)
        .collect();
    let b_norm = samples
        .iter()
        .map(|&t| Ok(domain.working_norm(&bilinear_b(domain, &u, &w, setup.gamma, 1.0, t, quad)?)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let u_norm = u.norms.iter().copied().fold(0.0, f64::max);
    let w_norm = w.norms.iter().copied().fold(0.0, f64::max);
    let g = if setup.gamma == 0.0 {
        1.0
    } else {
        setup.gamma.powi(-(domain.dim() as i32 - 1))
    };
    Ok(BilinearSample {
        b_norm,
        u_norm,
        w_norm,
        ratio: b_norm / (g * u_norm * w_norm),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSample {
    pub l_norm: f64,
    pub f_norm: f64,
    pub ratio: f64,
}

/// `sup_t ‖L(f)(t)‖ / sup_t ‖f(t)‖`, numerator in the working norm and the
/// denominator in the forcing norm, at multiples of `sample_dt`.
pub fn linear_ratio<D: Domain>(
    domain: &D,
    spec: ForcingSpec,
    horizon: f64,
    sample_dt: f64,
    tau_step: f64,
) -> Result<LinearSample> {
    let forcing = Forcing::prepare(domain, spec)?;
    let quad = DuhamelQuadrature::new(tau_step)?;
    let k = crate::duhamel::step_count(horizon, sample_dt)?;
    let l_norm = (1..=k)
        .into_par_iter()
        .map(|j| Ok(domain.working_norm(&linear_l(domain, &forcing, j as f64 * sample_dt, quad)?)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let fine = 64 * k.max(1);
    let peak = (0..=fine)
        .map(|j| spec.time_factor(j as f64 * horizon / fine as f64).abs())
        .fold(0.0, f64::max);
    let f_norm = domain.forcing_norm(forcing.magnitude_profile()) * peak;
    Ok(LinearSample {
        l_norm,
        f_norm,
        ratio: l_norm / f_norm,
    })
}

/// Exponential fit of `‖e^{tΔ}u0‖_{L^q} / ‖u0‖_{L^p}` on `H^n`; `q = ∞`
/// uses the sup norm.
pub fn pierfelice_fit(
    domain: &RadialDomain,
    u0: &RadialField,
    p: f64,
    q: f64,
    times: &[f64],
    window: (f64, f64),
) -> Result<DecayFit> {
    let norm = |f: &RadialField, e: f64| {
        if e.is_infinite() {
            f.max_abs()
        } else {
            lorentz::lp_norm(f, e)
        }
    };
    let denom = norm(u0, p);
    let series = times
        .par_iter()
        .map(|&t| Ok((t, norm(&domain.semigroup(u0, t)?, q) / denom)))
        .collect::<Result<Vec<_>>>()?;
    fit_exponential(&series, window)
}

/// `‖∂_τ v‖_{L^{pn/(2n−p)}} / ‖f‖_{L^{p/2}}` with `v = κ(−Δ+γ)^{-1} f` on `H^n`.
pub fn elliptic_gradient_ratio(domain: &RadialDomain, f: &RadialField, gamma: f64, kappa: f64, p: f64) -> Result<f64> {
    let n = domain.grid().dim() as f64;
    if !(p > n && p < 2.0 * n) {
        return Err(Error::domain(format!("need n < p < 2n, got p = {p}")));
    }
    let v = domain.elliptic_inverse_radial(f, gamma, kappa)?;
    let dv = domain.radial_derivative(&v)?;
    Ok(lorentz::lp_norm(&dv, p * n / (2.0 * n - p)) / lorentz::lp_norm(f, 0.5 * p))
}

/// Hölder ratios of bump pairs drawn from `seed`, sampled on `grid`.
pub fn holder_corpus(grid: TorusGrid, pairs: usize, e: HolderExponents, seed: u64) -> Result<Vec<f64>> {
    let width = grid.length() / 16.0;
    let spread = grid.length() / 8.0;
    let a = random_bumps(grid.dim(), pairs, width, spread, seed);
    let b = random_bumps(grid.dim(), pairs, width, spread, seed ^ 0x9e37_79b9_7f4a_7c15);
    a.par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| match check_holder(&x.sample(grid), &y.sample(grid), e)? {
            HolderOutcome::Ratio(r) => Ok(r),
            HolderOutcome::DegenerateDenominator => Err(Error::Internal("degenerate bump in Hölder corpus".into())),
        })
        .collect()
}
