//! Mild solutions: the nonlinear term, exponential time differencing of the
//! Duhamel formula, direct quadrature of the Duhamel integrals and Picard
//! iteration.
//!
//! The evolution is `u_t = Δu + N(u, t)` with
//!
//! ```text
//!   N(u, t) = −χ ∇·(u ∇ κ(−Δ+γ)^{-1} u) + ∇·f(t, ·).
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::domain::{Domain, DomainKind, Field};
use crate::error::{Error, Result};

/// Coefficients of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSParams {
    pub chi: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub n: usize,
    pub domain: DomainKind,
}

impl KSParams {
    pub fn new(chi: f64, kappa: f64, gamma: f64, n: usize, domain: DomainKind) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!("κ must be non-negative, got {kappa}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!("γ must be non-negative, got {gamma}")));
        }
        if !chi.is_finite() {
            return Err(Error::domain("χ must be finite"));
        }
        Ok(Self {
            chi,
            kappa,
            gamma,
            n,
            domain,
        })
    }

    /// `g(γ)`: 1 at `γ = 0`, `γ^{−(n−1)}` otherwise.
    pub fn g_gamma(&self) -> f64 {
        if self.gamma == 0.0 {
            1.0
        } else {
            self.gamma.powi(-(self.n as i32 - 1))
        }
    }

    fn coupling(&self) -> f64 {
        self.chi * self.kappa
    }
}

/// `f(t, x) = A sin(2πt/T + φ₀) e^{−λ t} g(x) ê` with a Gaussian profile `g`
/// of width `w` (torus, `ê` the first axis) or the radial field
/// `(τ/w) e^{−τ²/2w²} ∂_τ` (hyperbolic). `λ = 0` gives a `T`-periodic forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSpec {
    pub period: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub width: f64,
    pub window_rate: f64,
}

impl ForcingSpec {
    pub fn new(period: f64, amplitude: f64, phase: f64, width: f64) -> Result<Self> {
        let spec = Self {
            period,
            amplitude,
            phase,
            width,
            window_rate: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(period: f64) -> Self {
        Self {
            period,
            amplitude: 0.0,
            phase: 0.0,
            width: 1.0,
            window_rate: 0.0,
        }
    }

    pub fn with_window(mut self, rate: f64) -> Self {
        self.window_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::domain(format!("period must be positive, got {}", self.period)));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::domain(format!(
                "profile width must be positive, got {}",
                self.width
            )));
        }
        if !self.amplitude.is_finite() || !self.phase.is_finite() {
            return Err(Error::domain("forcing amplitude and phase must be finite"));
        }
        if !(self.window_rate >= 0.0) {
            return Err(Error::domain(format!(
                "window rate must be ≥ 0, got {}",
                self.window_rate
            )));
        }
        Ok(())
    }

    pub fn is_periodic(&self) -> bool {
        self.window_rate == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * t / self.period + self.phase).sin() * (-self.window_rate * t).exp()
    }

    /// `∫_0^t e^{−λ(t−s)} time_factor(s) ds` in closed form.
    pub fn heat_convolution(&self, lambda: f64, t: f64) -> f64 {
        // Im ∫ e^{−λ(t−s)} e^{(iω−μ)s + iφ} ds with a = λ − μ + iω
        let w = 2.0 * PI / self.period;
        let a = Complex64::new(lambda - self.window_rate, w);
        let phase = Complex64::new(0.0, self.phase).exp();
        let end = Complex64::new(-self.window_rate * t, w * t).exp();
        let start = Complex64::new(-lambda * t, 0.0).exp();
        // for a → 0 the integral tends to t·e^{iφ}
        let value = if a.norm() * t < 1e-8 {
            Complex64::new(t, 0.0) * phase * start
        } else {
            phase * (end - start) / a
        };
        self.amplitude * value.im
    }
}

/// A forcing specification evaluated on a domain.
#[derive(Debug, Clone)]
pub struct Forcing<F> {
    pub spec: ForcingSpec,
    magnitude: F,
    divergence: F,
}

impl<F: Field> Forcing<F> {
    pub fn prepare<D: Domain<Field = F>>(domain: &D, spec: ForcingSpec) -> Result<Self> {
        spec.validate()?;
        let (magnitude, divergence) = domain.forcing_profile(spec.width)?;
        Ok(Self {
            spec,
            magnitude,
            divergence,
        })
    }

    /// `∇·f(t)`.
    pub fn divergence_at(&self, t: f64) -> F {
        self.divergence.scaled(self.spec.time_factor(t))
    }

    /// `|f(t)|`.
    pub fn magnitude_at(&self, t: f64) -> F {
        self.magnitude.scaled(self.spec.time_factor(t).abs())
    }

    /// Spatial profile of `∇·f`, without the time factor.
    pub fn divergence_profile(&self) -> &F {
        &self.divergence
    }

    pub fn magnitude_profile(&self) -> &F {
        &self.magnitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Etd1,
    #[default]
    Etd2rk,
}

/// Stage sources of one step: value at `t_k` and, for two-stage schemes, at `t_{k+1}`.
pub type StageSources<F> = (F, Option<F>);

/// Snapshots on a uniform time grid with their working norms.
#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    pub times: Vec<f64>,
    pub snapshots: Vec<F>,
    pub norms: Vec<f64>,
}

impl<F: Field> Trajectory<F> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last(&self) -> &F {
        self.snapshots.last().expect("trajectory is never empty")
    }

    /// Snapshot recorded at time `t`, if `t` is on the grid.
    pub fn at(&self, t: f64) -> Option<&F> {
        let dt = self.dt();
        if dt == 0.0 {
            return (t == self.times[0]).then(|| &self.snapshots[0]);
        }
        let k = ((t - self.times[0]) / dt).round();
        if k < 0.0 || (t - self.times[0] - k * dt).abs() > 1e-9 * dt.max(1.0) {
            return None;
        }
        self.snapshots.get(k as usize)
    }

    /// `sup_k ‖u_k − v_k‖_∞`.
    pub fn sup_difference(&self, other: &Self) -> f64 {
        self.snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a.sub(b).max_abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.snapshots.iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }
}

/// Number of whole steps of size `dt` in `t`, or an error when `t` is not a
/// multiple of `dt`.
pub fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::domain(format!("need dt > 0 and t ≥ 0, got dt = {dt}, t = {t}")));
    }
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::domain(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

/// The system on a fixed domain with a fixed forcing.
pub struct KellerSegel<'d, D: Domain> {
    domain: &'d D,
    params: KSParams,
    forcing: Forcing<D::Field>,
    scheme: Scheme,
}

impl<'d, D: Domain> KellerSegel<'d, D> {
    pub fn new(domain: &'d D, params: KSParams, forcing: ForcingSpec) -> Result<Self> {
        if params.n != domain.dim() || params.domain != domain.kind() {
            return Err(Error::domain(format!(
                "parameters describe a {}-dimensional {} problem but the domain is a {}-dimensional {}",
                params.n,
                params.domain.name(),
                domain.dim(),
                domain.kind().name()
            )));
        }
        Ok(Self {
            domain,
            params,
            forcing: Forcing::prepare(domain, forcing)?,
            scheme: Scheme::default(),
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn domain(&self) -> &'d D {
        self.domain
    }

    pub fn params(&self) -> &KSParams {
        &self.params
    }

    pub fn forcing(&self) -> &Forcing<D::Field> {
        &self.forcing
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `−χ ∇·(u ∇ κ(−Δ+γ)^{-1} u) + ∇·f(t)`.
    pub fn nonlinear_term(&self, u: &D::Field, t: f64) -> Result<D::Field> {
        self.domain.check(u)?;
        let mut out = if self.params.coupling() != 0.0 {
            self.domain
                .chemotactic_divergence(u, u, self.params.gamma, self.params.kappa)?
                .scaled(-self.params.chi)
        } else {
            u.zeros_like()
        };
        if !self.forcing.spec.is_zero() {
            out.axpy(self.forcing.spec.time_factor(t), &self.forcing.divergence);
        }
        Ok(out)
    }

    /// One exponential-integrator step. Returns the new state and the
    /// predictor `e^{hΔ}u + hφ₁N(u)`.
    pub fn step_with_stage(&self, u: &D::Field, t: f64, dt: f64) -> Result<(D::Field, D::Field)> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let n0 = self.nonlinear_term(u, t)?;
        let mut a = self.domain.phi(u, dt, 0)?;
        a.axpy(dt, &self.domain.phi(&n0, dt, 1)?);
        let next = match self.scheme {
            Scheme::Etd1 => a.clone(),
            Scheme::Etd2rk => {
                let n1 = self.nonlinear_term(&a, t + dt)?;
                let mut next = a.clone();
                next.axpy(dt, &self.domain.phi(&n1.sub(&n0), dt, 2)?);
                next
            }
        };
        if !next.is_finite() {
            return Err(Error::BlowUp { t: t + dt });
        }
        Ok((next, a))
    }

    pub fn step(&self, u: &D::Field, t: f64, dt: f64) -> Result<D::Field> {
        Ok(self.step_with_stage(u, t, dt)?.0)
    }

    /// Steps from `u0` at `t0` to `t0 + t_final`, recording every step.
    pub fn solve_mild_from(&self, u0: &D::Field, t0: f64, t_final: f64, dt: f64) -> Result<Trajectory<D::Field>> {
        let steps = step_count(t_final, dt)?;
        self.domain.check(u0)?;
        let mut times = Vec::with_capacity(steps + 1);
        let mut snapshots = Vec::with_capacity(steps + 1);
        let mut norms = Vec::with_capacity(steps + 1);
        let mut u = u0.clone();
        for k in 0..=steps {
            let t = t0 + k as f64 * dt;
            times.push(t);
            norms.push(self.domain.working_norm(&u));
            if k < steps {
                let next = self.step(&u, t, dt)?;
                snapshots.push(std::mem::replace(&mut u, next));
            }
        }
        snapshots.push(u);
        Ok(Trajectory {
            times,
            snapshots,
            norms,
        })
    }

    pub fn solve_mild(&self, u0: &D::Field, t_final: f64, dt: f64) -> Result<Trajectory<D::Field>> {
        self.solve_mild_from(u0, 0.0, t_final, dt)
    }

    /// Sources `N(ω_k, t_k)` and `N(a_k, t_{k+1})` of the linear system with
    /// frozen `ω`, where `a_k` is the predictor built from `ω_k`. At a fixed
    /// point `ω = u` the linear step reproduces the nonlinear one.
    pub fn frozen_sources(&self, omega: &Trajectory<D::Field>) -> Result<Vec<StageSources<D::Field>>> {
        let dt = omega.dt();
        let k = omega.len().saturating_sub(1);
        (0..k)
            .into_par_iter()
            .map(|i| {
                let t = omega.times[i];
                let w = &omega.snapshots[i];
                let s0 = self.nonlinear_term(w, t)?;
                let s1 = match self.scheme {
                    Scheme::Etd1 => None,
                    Scheme::Etd2rk => {
                        let mut a = self.domain.phi(w, dt, 0)?;
                        a.axpy(dt, &self.domain.phi(&s0, dt, 1)?);
                        Some(self.nonlinear_term(&a, t + dt)?)
                    }
                };
                Ok((s0, s1))
            })
            .collect()
    }

    /// Step of the linear system `u_t = Δu + S(t)` with precomputed sources.
    pub fn linear_step(&self, u: &D::Field, dt: f64, s0: &D::Field, s1: Option<&D::Field>) -> Result<D::Field> {
        let mut a = self.domain.phi(u, dt, 0)?;
        a.axpy(dt, &self.domain.phi(s0, dt, 1)?);
        if let Some(s1) = s1 {
            a.axpy(dt, &self.domain.phi(&s1.sub(s0), dt, 2)?);
        }
        Ok(a)
    }
}

/// Graded quadrature of Duhamel integrals `∫_0^t e^{(t−s)Δ} D(s) ds` in the
/// modal basis: `s = t − τ²`, midpoint rule in `τ`.
#[derive(Debug, Clone, Copy)]
pub struct DuhamelQuadrature {
    /// Target spacing in `τ = √(t−s)`.
    pub tau_step: f64,
}

impl DuhamelQuadrature {
    pub fn new(tau_step: f64) -> Result<Self> {
        if !(tau_step > 0.0) {
            return Err(Error::domain(format!("τ spacing must be positive, got {tau_step}")));
        }
        Ok(Self { tau_step })
    }

    /// `Σ_q 2τ_qΔτ e^{−τ_q²λ} D̂(t − τ_q²)`; `source(s, out)` fills `D̂(s)`.
    pub fn integrate<D: Domain>(
        &self,
        domain: &D,
        t: f64,
        source: impl Fn(f64, &mut [Complex64]) + Sync,
    ) -> Vec<Complex64> {
        let lambda = domain.eigenvalues();
        let m = lambda.len();
        if t <= 0.0 {
            return vec![Complex64::new(0.0, 0.0); m];
        }
        let root = t.sqrt();
        let q = (root / self.tau_step).ceil().max(1.0) as usize;
        let dtau = root / q as f64;
        // fixed chunks summed in order keep the result independent of scheduling
        const CHUNK: usize = 16;
        let partials: Vec<Vec<Complex64>> = (0..q.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![Complex64::new(0.0, 0.0); m];
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                for j in c * CHUNK..((c + 1) * CHUNK).min(q) {
                    let tau = (j as f64 + 0.5) * dtau;
                    source(t - tau * tau, &mut buf);
                    let w = 2.0 * tau * dtau;
                    for ((a, b), l) in acc.iter_mut().zip(&buf).zip(lambda) {
                        *a += b * (w * (-tau * tau * l).exp());
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![Complex64::new(0.0, 0.0); m];
        for p in partials {
            total.iter_mut().zip(&p).for_each(|(x, y)| *x += y);
        }
        total
    }
}

/// Cubic Lagrange interpolation of modal samples on a uniform time grid.
pub struct SampledSource {
    t0: f64,
    dt: f64,
    modes: Vec<Vec<Complex64>>,
}

impl SampledSource {
    pub fn new(t0: f64, dt: f64, modes: Vec<Vec<Complex64>>) -> Self {
        Self { t0, dt, modes }
    }

    pub fn eval(&self, s: f64, out: &mut [Complex64]) {
        let k = self.modes.len();
        if k == 1 || self.dt == 0.0 {
            out.copy_from_slice(&self.modes[0]);
            return;
        }
        let width = k.min(4);
        let x = (s - self.t0) / self.dt;
        let base = (x.floor() as isize - (width as isize / 2 - 1)).clamp(0, (k - width) as isize) as usize;
        let mut weights = [0.0; 4];
        for (a, w) in weights.iter_mut().enumerate().take(width) {
            let xa = (base + a) as f64;
            *w = (0..width)
                .filter(|&b| b != a)
                .map(|b| {
                    let xb = (base + b) as f64;
                    (x - xb) / (xa - xb)
                })
                .product();
        }
        out.iter_mut().enumerate().for_each(|(i, o)| {
            *o = (0..width).map(|a| self.modes[base + a][i] * weights[a]).sum();
        });
    }
}

/// `B(u, ω)(t) = ∫_0^t ∇·e^{(t−s)Δ}[u ∇ κ(−Δ+γ)^{-1} ω](s) ds` by graded
/// quadrature over the recorded trajectories.
pub fn bilinear_b<D: Domain>(
    domain: &D,
    u: &Trajectory<D::Field>,
    omega: &Trajectory<D::Field>,
    gamma: f64,
    kappa: f64,
    t: f64,
    quad: DuhamelQuadrature,
) -> Result<D::Field> {
    let source = bilinear_source(domain, u, omega, gamma, kappa)?;
    check_coverage(u, t)?;
    Ok(domain.from_modes(quad.integrate(domain, t, |s, out| source.eval(s, out))))
}

fn check_coverage<F: Field>(traj: &Trajectory<F>, t: f64) -> Result<()> {
    let last = *traj.times.last().unwrap_or(&f64::NEG_INFINITY);
    if traj.is_empty() || traj.times[0] > 0.0 || t > last + 1e-9 * last.max(1.0) {
        return Err(Error::domain(format!(
            "trajectory covers [{}, {}] but the integral needs [0, {t}]",
            traj.times.first().copied().unwrap_or(f64::NAN),
            last
        )));
    }
    Ok(())
}

/// Modal samples of `∇·[u ∇ κ(−Δ+γ)^{-1} ω]` at the recorded times.
pub fn bilinear_source<D: Domain>(
    domain: &D,
    u: &Trajectory<D::Field>,
    omega: &Trajectory<D::Field>,
    gamma: f64,
    kappa: f64,
) -> Result<SampledSource> {
    if u.len() != omega.len() || u.is_empty() {
        return Err(Error::domain(
            "bilinear operator needs two trajectories on one time grid",
        ));
    }
    let modes = u
        .snapshots
        .par_iter()
        .zip(omega.snapshots.par_iter())
        .map(|(a, b)| {
            if kappa == 0.0 {
                domain.to_modes(&a.zeros_like())
            } else {
                domain.to_modes(&domain.chemotactic_divergence(a, b, gamma, kappa)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledSource::new(u.times[0], u.dt(), modes))
}

/// `L(f)(t) = ∫_0^t e^{(t−s)Δ} ∇·f(s) ds` by graded quadrature with the
/// exact time profile of the forcing.
pub fn linear_l<D: Domain>(
    domain: &D,
    forcing: &Forcing<D::Field>,
    t: f64,
    quad: DuhamelQuadrature,
) -> Result<D::Field> {
    let profile = domain.to_modes(forcing.divergence_profile())?;
    let spec = forcing.spec;
    Ok(domain.from_modes(quad.integrate(domain, t, |s, out| {
        let c = spec.time_factor(s);
        out.iter_mut().zip(&profile).for_each(|(o, p)| *o = p * c);
    })))
}

#[derive(Debug, Clone)]
pub struct PicardReport<F> {
    pub trajectory: Trajectory<F>,
    /// `sup_t ‖u^{(k+1)} − u^{(k)}‖_∞` per iteration.
    pub differences: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl<F> PicardReport<F> {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }
}

/// Picard iteration `u^{(k+1)} = e^{tΔ}u₀ − χB(u^{(k)}, u^{(k)}) + L(f)` on
/// the uniform grid `0, dt, …, horizon`, started from zero.
pub fn picard_iterate<D: Domain>(
    model: &KellerSegel<'_, D>,
    u0: &D::Field,
    horizon: f64,
    dt: f64,
    max_iterations: usize,
    tol: f64,
    quad: DuhamelQuadrature,
) -> Result<PicardReport<D::Field>> {
    let domain = model.domain();
    let params = model.params();
    let steps = step_count(horizon, dt)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let lambda = domain.eigenvalues();

    let u0_modes = domain.to_modes(u0)?;
    let profile = domain.to_modes(model.forcing().divergence_profile())?;
    let spec = model.forcing().spec;
    let base: Vec<Vec<Complex64>> = times
        .iter()
        .map(|&t| {
            let mut m: Vec<Complex64> = u0_modes.iter().zip(lambda).map(|(c, l)| c * (-t * l).exp()).collect();
            if !spec.is_zero() {
                let lf = quad.integrate(domain, t, |s, out| {
                    let c = spec.time_factor(s);
                    out.iter_mut().zip(&profile).for_each(|(o, p)| *o = p * c);
                });
                m.iter_mut().zip(&lf).for_each(|(a, b)| *a += b);
            }
            m
        })
        .collect();

    let mut current = Trajectory {
        times: times.clone(),
        snapshots: vec![domain.zeros(); steps + 1],
        norms: vec![0.0; steps + 1],
    };
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    let mut converged = false;
    for _ in 0..max_iterations {
        let coupling = params.chi * params.kappa;
        let source = if coupling != 0.0 {
            Some(bilinear_source(domain, &current, &current, params.gamma, params.kappa)?)
        } else {
            None
        };
        let snapshots: Vec<D::Field> = times
            .par_iter()
            .zip(base.par_iter())
            .map(|(&t, b)| {
                let mut m = b.clone();
                if let Some(src) = &source {
                    let bm = quad.integrate(domain, t, |s, out| src.eval(s, out));
                    m.iter_mut().zip(&bm).for_each(|(a, x)| *a -= x * params.chi);
                }
                domain.from_modes(m)
            })
            .collect();
        let next = Trajectory {
            norms: snapshots.iter().map(|s| domain.working_norm(s)).collect(),
            times: times.clone(),
            snapshots,
        };
        if next.snapshots.iter().any(|s| !s.is_finite()) {
            return Err(Error::BlowUp { t: horizon });
        }
        let diff = next.sup_difference(&current);
        if let Some(&prev) = differences.last() {
            let r: f64 = if prev == 0.0 { 0.0 } else { diff / prev };
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::ContractionFailure { ratios });
            }
        }
        differences.push(diff);
        current = next;
        if diff <= tol * current.sup_abs().max(1e-14) {
            converged = true;
            break;
        }
    }
    Ok(PicardReport {
        trajectory: current,
        differences,
        ratios,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::{Propagator, RadialDomain, RadialField, RadialGrid};
    use crate::spectral::{TorusDomain, TorusField, TorusGrid};

    fn torus(n: usize, l: f64) -> TorusDomain {
        TorusDomain::new(TorusGrid::new(2, n, l).unwrap())
    }

    fn bump(g: TorusGrid, amp: f64) -> TorusField {
        TorusField::from_fn(g, |x| amp * (-(x[0] * x[0] + x[1] * x[1])).exp())
    }

    #[test]
    fn heat_convolution_matches_quadrature() {
        let spec = ForcingSpec::new(1.5, 0.7, 0.4, 1.0).unwrap().with_window(0.3);
        for &lambda in &[0.0, 0.3, 2.0, 15.0] {
            let t = 2.3;
            let k = 200_000;
            let h = t / k as f64;
            let num: f64 = (0..k)
                .map(|i| {
                    let s = (i as f64 + 0.5) * h;
                    (-(t - s) * lambda).exp() * spec.time_factor(s)
                })
                .sum::<f64>()
                * h;
            assert!((num - spec.heat_convolution(lambda, t)).abs() < 1e-9, "λ={lambda}");
        }
    }

    #[test]
    fn forcing_is_periodic() {
        let spec = ForcingSpec::new(0.8, 1.3, 0.2, 1.0).unwrap();
        for &t in &[0.0, 0.13, 0.5] {
            assert!((spec.time_factor(t) - spec.time_factor(t + 0.8)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_nonlinearity() {
        let d = torus(32, 10.0);
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).unwrap();
        let z = d.zeros();
        assert_eq!(m.nonlinear_term(&z, 0.3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pure_forcing_term_is_divergence() {
        let d = torus(64, 16.0);
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(1.0, 0.5, 0.3, 1.0).unwrap()).unwrap();
        let out = m.nonlinear_term(&d.zeros(), 0.2).unwrap();
        assert!(out.max_abs() > 1e-3);
        assert!(out.integral().abs() < 1e-12);
        let u = bump(*d.grid(), 0.4);
        let chem = m.nonlinear_term(&u, 0.2).unwrap();
        assert!(chem.integral().abs() < 1e-12 * u.max_abs());
    }

    #[test]
    fn mismatched_parameters_rejected() {
        let d = torus(16, 10.0);
        let p = KSParams::new(1.0, 1.0, 1.0, 3, DomainKind::Torus).unwrap();
        assert!(KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).is_err());
        assert!(KSParams::new(1.0, -1.0, 1.0, 2, DomainKind::Torus).is_err());
        let p = KSParams::new(1.0, 1.0, 2.0, 3, DomainKind::Torus).unwrap();
        assert_eq!(p.g_gamma(), 0.25);
    }

    #[test]
    fn linear_step_is_pure_semigroup() {
        let d = torus(32, 10.0);
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).unwrap();
        let u = bump(*d.grid(), 1.0);
        let a = m.step(&u, 0.0, 0.05).unwrap();
        let b = d.semigroup(&u, 0.05).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12);
    }

    #[test]
    fn etd2rk_order_with_forcing_only() {
        let d = torus(32, 10.0);
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(0.5, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let u0 = bump(*d.grid(), 0.1);
        let reference = m.solve_mild(&u0, 0.5, 0.5 / 2048.0).unwrap();
        let err = |k: usize| {
            let tr = m.solve_mild(&u0, 0.5, 0.5 / k as f64).unwrap();
            tr.last().sub(reference.last()).max_abs()
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn mass_is_conserved_on_the_torus() {
        let d = torus(32, 12.0);
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(1.0, 0.2, 0.0, 1.0).unwrap()).unwrap();
        let u0 = bump(*d.grid(), 0.3);
        let tr = m.solve_mild(&u0, 0.5, 0.01).unwrap();
        let m0 = u0.mean();
        assert!(tr.snapshots.iter().all(|s| (s.mean() - m0).abs() < 1e-12));
        assert_eq!(tr.norms.len(), 51);
        assert!(step_count(0.5, 0.03).is_err());
    }

    #[test]
    fn sampled_source_is_exact_on_cubics() {
        let dt = 0.1;
        let modes: Vec<Vec<Complex64>> = (0..7)
            .map(|k| {
                let t = k as f64 * dt;
                vec![Complex64::new(t * t * t - t, 2.0 * t * t)]
            })
            .collect();
        let s = SampledSource::new(0.0, dt, modes);
        let mut out = [Complex64::new(0.0, 0.0)];
        for &t in &[0.0, 0.031, 0.25, 0.57, 0.6] {
            s.eval(t, &mut out);
            assert!((out[0].re - (t * t * t - t)).abs() < 1e-13);
            assert!((out[0].im - 2.0 * t * t).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_l_matches_closed_form() {
        let d = torus(32, 10.0);
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let spec = ForcingSpec::new(0.7, 1.0, 0.3, 1.0).unwrap();
        let m = KellerSegel::new(&d, p, spec).unwrap();
        let t = 0.9;
        let approx = linear_l(&d, m.forcing(), t, DuhamelQuadrature::new(1e-3).unwrap()).unwrap();
        let prof = d.to_modes(m.forcing().divergence_profile()).unwrap();
        let exact_modes: Vec<Complex64> = prof
            .iter()
            .zip(d.k_squared())
            .map(|(c, &l)| c * spec.heat_convolution(l, t))
            .collect();
        let exact = d.from_modes(exact_modes);
        let err = approx.sub(&exact).max_abs();
        assert!(err < 1e-5 * exact.max_abs(), "{err} vs {}", exact.max_abs());
    }

    #[test]
    fn bilinear_vanishes_on_zero_argument() {
        let d = torus(16, 8.0);
        let g = *d.grid();
        let u = Trajectory {
            times: vec![0.0, 0.1, 0.2],
            snapshots: vec![bump(g, 1.0); 3],
            norms: vec![0.0; 3],
        };
        let z = Trajectory {
            times: u.times.clone(),
            snapshots: vec![d.zeros(); 3],
            norms: vec![0.0; 3],
        };
        let q = DuhamelQuadrature::new(0.01).unwrap();
        assert_eq!(bilinear_b(&d, &z, &u, 1.0, 1.0, 0.2, q).unwrap().max_abs(), 0.0);
        assert_eq!(bilinear_b(&d, &u, &z, 1.0, 1.0, 0.2, q).unwrap().max_abs(), 0.0);
        assert!(bilinear_b(&d, &u, &u, 1.0, 1.0, 0.5, q).is_err());
    }

    #[test]
    fn picard_trivial_cases() {
        let d = torus(16, 8.0);
        let q = DuhamelQuadrature::new(0.02).unwrap();
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).unwrap();
        let r = picard_iterate(&m, &d.zeros(), 0.2, 0.05, 10, 1e-12, q).unwrap();
        assert_eq!(r.iterations(), 1);
        assert!(r.converged);

        let p0 = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m0 = KellerSegel::new(&d, p0, ForcingSpec::new(0.5, 0.2, 0.0, 1.0).unwrap()).unwrap();
        let r = picard_iterate(&m0, &bump(*d.grid(), 0.5), 0.2, 0.05, 10, 1e-12, q).unwrap();
        assert_eq!(r.iterations(), 2);
    }

    #[test]
    fn picard_matches_stepper_on_hyperbolic_space() {
        let g = RadialGrid::with_spacing(3, 0.1, 12.0).unwrap();
        let d = RadialDomain::new(g.clone()).with_propagator(Propagator::Modal);
        let p = KSParams::new(1.0, 1.0, 1.0, 3, DomainKind::HyperbolicRadial).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(1.0, 0.05, 0.0, 1.0).unwrap()).unwrap();
        let u0 = RadialField::from_fn(g, |t| 0.2 * (-t * t).exp());
        let dt = 0.01;
        let step = m.solve_mild(&u0, 0.4, dt).unwrap();
        let pic = picard_iterate(&m, &u0, 0.4, dt, 30, 1e-13, DuhamelQuadrature::new(dt / 2.0).unwrap()).unwrap();
        assert!(pic.converged);
        let diff = step.last().sub(pic.trajectory.last()).max_abs();
        assert!(diff < 2e-4 * step.last().max_abs(), "{diff}");
    }
}
