//! Periodic mild solutions: the Poincaré map of the linear system with a
//! frozen coefficient trajectory, Cesàro means of its iterates and the outer
//! Φ iteration for the nonlinear problem.
//!
//! The linear system `u_t = Δu − χ∇·(ω∇κ(−Δ+γ)^{-1}ω) + ∇·f` is stepped with
//! the same exponential integrator as [`KellerSegel`]. Its period map is
//! affine, `P(ξ) = Gξ + c`, and diagonal in the modal basis, which is where
//! the Cesàro means are accumulated.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::domain::{Domain, Field};
use crate::duhamel::{step_count, KellerSegel, Scheme, Trajectory};
use crate::error::{Error, Result};

/// Relative residual floor.
pub const EPSILON: f64 = 1e-14;

const BLOCK: usize = 256;

/// Coefficient trajectory the linear system is frozen at.
#[derive(Debug, Clone, Copy)]
pub enum Frozen<'a, F> {
    Zero,
    Trajectory(&'a Trajectory<F>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedPointMode {
    #[default]
    Cesaro,
    /// Plain iteration `ξ ← P(ξ)`, kept for cross-checks.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CesaroSummation {
    /// Partial sums of the per-mode geometric series.
    #[default]
    Geometric,
    /// Accumulate every iterate.
    Explicit,
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    /// Relative tolerance on `‖P(ξ) − ξ‖_∞ / max(‖ξ‖_∞, ε)`.
    pub tol: f64,
    pub max_n: u64,
    pub mode: FixedPointMode,
    pub summation: CesaroSummation,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_n: 1 << 40,
            mode: FixedPointMode::Cesaro,
            summation: CesaroSummation::Geometric,
        }
    }
}

/// One period of the linear system in modal form.
#[derive(Debug, Clone)]
pub struct LinearPeriod {
    pub steps: usize,
    pub dt: f64,
    /// One-step propagator per mode.
    pub g0: Vec<f64>,
    /// Period propagator `G = g0^K`.
    pub g: Vec<f64>,
    /// `P(0)`.
    pub c: Vec<Complex64>,
    /// Per-step increments, kept when a trajectory will be reconstructed.
    increments: Option<Vec<Vec<Complex64>>>,
}

impl LinearPeriod {
    pub fn apply(&self, xi: &[Complex64]) -> Vec<Complex64> {
        xi.iter()
            .zip(&self.g)
            .zip(&self.c)
            .map(|((x, g), c)| x * g + c)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub modes: Vec<Complex64>,
    pub iterations: u64,
    pub residual: f64,
    pub residual_history: Vec<(u64, f64)>,
}

/// The linear periodic problem with frozen `ω`.
pub struct LinearProblem<'a, 'd, D: Domain> {
    model: &'a KellerSegel<'d, D>,
    frozen: Frozen<'a, D::Field>,
    period: f64,
    steps: usize,
}

impl<'a, 'd, D: Domain> LinearProblem<'a, 'd, D> {
    pub fn new(model: &'a KellerSegel<'d, D>, frozen: Frozen<'a, D::Field>, period: f64, dt: f64) -> Result<Self> {
        let steps = step_count(period, dt)?;
        if steps == 0 {
            return Err(Error::domain("period must contain at least one step"));
        }
        let spec = model.forcing().spec;
        if !spec.is_periodic() || (spec.period - period).abs() > 1e-12 * period {
            return Err(Error::domain(format!(
                "forcing is not {period}-periodic (period {}, window rate {})",
                spec.period, spec.window_rate
            )));
        }
        for j in 0..4 {
            let t = j as f64 * period / 4.0 + 0.1;
            let (a, b) = (spec.time_factor(t), spec.time_factor(t + period));
            if (a - b).abs() > 1e-12 * spec.amplitude.abs().max(1e-300) {
                return Err(Error::domain("forcing failed the periodicity sample check"));
            }
        }
        if let Frozen::Trajectory(w) = frozen {
            if w.len() != steps + 1 || (w.dt() - period / steps as f64).abs() > 1e-12 * w.dt() {
                return Err(Error::domain(format!(
                    "frozen trajectory has {} samples at dt = {}, need {} at dt = {}",
                    w.len(),
                    w.dt(),
                    steps + 1,
                    period / steps as f64
                )));
            }
            let gap = w.snapshots[0].sub(&w.snapshots[steps]).max_abs();
            if gap > 1e-3 * w.sup_abs().max(EPSILON) {
                return Err(Error::domain(format!(
                    "frozen trajectory is not periodic (gap {gap:e})"
                )));
            }
        }
        Ok(Self {
            model,
            frozen,
            period,
            steps,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps as f64
    }

    pub fn model(&self) -> &KellerSegel<'d, D> {
        self.model
    }

    fn omega(&self, k: usize) -> D::Field {
        match self.frozen {
            Frozen::Zero => self.model.domain().zeros(),
            Frozen::Trajectory(w) => w.snapshots[k].clone(),
        }
    }

    /// Physical sources of step `k`: `N(ω_k, t_k)` and, for ETD2RK,
    /// `N(a_k, t_{k+1})` with the predictor `a_k` built from `ω_k`.
    pub fn sources(&self, k: usize) -> Result<(D::Field, Option<D::Field>)> {
        let model = self.model;
        let dom = model.domain();
        let h = self.dt();
        let t = k as f64 * h;
        let coupled = model.params().chi * model.params().kappa != 0.0;
        let w = self.omega(k);
        let s0 = model.nonlinear_term(&w, t)?;
        let s1 = match model.scheme() {
            Scheme::Etd1 => None,
            Scheme::Etd2rk if !coupled => Some(model.nonlinear_term(&w, t + h)?),
            Scheme::Etd2rk => {
                let mut a = dom.phi(&w, h, 0)?;
                a.axpy(h, &dom.phi(&s0, h, 1)?);
                Some(model.nonlinear_term(&a, t + h)?)
            }
        };
        Ok((s0, s1))
    }

    /// `P(ξ)` by stepping the linear system in physical space.
    pub fn poincare_map(&self, xi: &D::Field) -> Result<D::Field> {
        let mut u = xi.clone();
        let h = self.dt();
        for start in (0..self.steps).step_by(BLOCK) {
            let end = (start + BLOCK).min(self.steps);
            let src = (start..end)
                .into_par_iter()
                .map(|k| self.sources(k))
                .collect::<Result<Vec<_>>>()?;
            for (s0, s1) in &src {
                u = self.model.linear_step(&u, h, s0, s1.as_ref())?;
            }
        }
        if !u.is_finite() {
            return Err(Error::BlowUp { t: self.period });
        }
        Ok(u)
    }

    /// Modal form `P(ξ) = Gξ + c`.
    pub fn assemble(&self, keep_increments: bool) -> Result<LinearPeriod> {
        let dom = self.model.domain();
        let h = self.dt();
        let lambda = dom.eigenvalues();
        let g0: Vec<f64> = lambda.iter().map(|&l| dom.step_factor(l, h, 0)).collect();
        let f1: Vec<f64> = lambda.iter().map(|&l| h * dom.step_factor(l, h, 1)).collect();
        let f2: Vec<f64> = lambda.iter().map(|&l| h * dom.step_factor(l, h, 2)).collect();
        let zero = zero_modes(dom);
        let m = lambda.len();
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        let mut kept = keep_increments.then(|| Vec::with_capacity(self.steps));
        for start in (0..self.steps).step_by(BLOCK) {
            let end = (start + BLOCK).min(self.steps);
            let incs = (start..end)
                .into_par_iter()
                .map(|k| {
                    let (s0, s1) = self.sources(k)?;
                    let s0 = dom.to_modes(&s0)?;
                    let mut inc: Vec<Complex64> = s0.iter().zip(&f1).map(|(s, f)| s * f).collect();
                    if let Some(s1) = s1 {
                        let s1 = dom.to_modes(&s1)?;
                        for (((i, a), b), f) in inc.iter_mut().zip(&s1).zip(&s0).zip(&f2) {
                            *i += (a - b) * f;
                        }
                    }
                    for &z in &zero {
                        inc[z] = Complex64::new(0.0, 0.0);
                    }
                    Ok(inc)
                })
                .collect::<Result<Vec<_>>>()?;
            for inc in incs {
                c.iter_mut().zip(&g0).zip(&inc).for_each(|((x, g), i)| *x = *x * g + i);
                if let Some(k) = kept.as_mut() {
                    k.push(inc);
                }
            }
        }
        let g = g0.iter().map(|&x| x.powi(self.steps as i32)).collect();
        Ok(LinearPeriod {
            steps: self.steps,
            dt: h,
            g0,
            g,
            c,
            increments: kept,
        })
    }

    /// The linear trajectory over one period started at `xi` (modal).
    pub fn trajectory(&self, period: &LinearPeriod, xi: &[Complex64]) -> Result<Trajectory<D::Field>> {
        let dom = self.model.domain();
        let incs = period
            .increments
            .as_ref()
            .ok_or_else(|| Error::Internal("linear period assembled without increments".into()))?;
        let mut states = Vec::with_capacity(self.steps + 1);
        let mut x = xi.to_vec();
        states.push(x.clone());
        for inc in incs {
            x.iter_mut()
                .zip(&period.g0)
                .zip(inc)
                .for_each(|((x, g), i)| *x = *x * g + i);
            states.push(x.clone());
        }
        let snapshots: Vec<D::Field> = states.into_par_iter().map(|s| dom.from_modes(s)).collect();
        let norms = snapshots.par_iter().map(|s| dom.working_norm(s)).collect();
        Ok(Trajectory {
            times: (0..=self.steps).map(|k| k as f64 * period.dt).collect(),
            snapshots,
            norms,
        })
    }
}

fn zero_modes<D: Domain>(dom: &D) -> Vec<usize> {
    dom.eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn project(x: &mut [Complex64], zero: &[usize]) {
    for &z in zero {
        x[z] = Complex64::new(0.0, 0.0);
    }
}

/// Fixed point of `P(ξ) = Gξ + c` from `start`, by Cesàro means
/// `(1/n)Σ_{k=1}^{n} P^k(start)` or by plain iteration.
pub fn cesaro_fixed_point<D: Domain>(
    domain: &D,
    period: &LinearPeriod,
    start: &[Complex64],
    options: FixedPointOptions,
) -> Result<FixedPoint> {
    let zero = zero_modes(domain);
    let mut x0 = start.to_vec();
    project(&mut x0, &zero);
    let residual = |x: &[Complex64]| -> f64 {
        let mut px = period.apply(x);
        project(&mut px, &zero);
        px.iter_mut().zip(x).for_each(|(p, x)| *p -= x);
        let r = domain.from_modes(px).max_abs();
        let scale = domain.from_modes(x.to_vec()).max_abs().max(EPSILON);
        r / scale
    };
    let mut history = Vec::new();
    let done = |n: u64, r: f64, x: Vec<Complex64>, history: Vec<(u64, f64)>| FixedPoint {
        modes: x,
        iterations: n,
        residual: r,
        residual_history: history,
    };

    match options.mode {
        FixedPointMode::Plain => {
            let mut x = x0;
            for n in 1..=options.max_n {
                x = period.apply(&x);
                project(&mut x, &zero);
                let r = residual(&x);
                history.push((n, r));
                if r < options.tol || r == 0.0 {
                    return Ok(done(n, r, x, history));
                }
            }
        }
        FixedPointMode::Cesaro => {
            let mut explicit_x = x0.clone();
            let mut explicit_sum = vec![Complex64::new(0.0, 0.0); x0.len()];
            let mut explicit_n = 0u64;
            let mut n = 1u64;
            while n <= options.max_n {
                let mean = match options.summation {
                    CesaroSummation::Geometric => geometric_mean(period, &x0, n, &zero),
                    CesaroSummation::Explicit => {
                        while explicit_n < n {
                            explicit_x = period.apply(&explicit_x);
                            project(&mut explicit_x, &zero);
                            explicit_sum.iter_mut().zip(&explicit_x).for_each(|(s, x)| *s += x);
                            explicit_n += 1;
                        }
                        explicit_sum.iter().map(|s| s / n as f64).collect()
                    }
                };
                let r = residual(&mean);
                history.push((n, r));
                if r < options.tol || r == 0.0 {
                    return Ok(done(n, r, mean, history));
                }
                n = if n < 16 { n + 1 } else { n.saturating_mul(2) };
            }
        }
    }
    let last = history.last().map(|h| h.1).unwrap_or(f64::NAN);
    Err(Error::CesaroNonConvergence {
        iterations: history.last().map(|h| h.0 as usize).unwrap_or(0),
        last_residual: last,
        residual_history: history.into_iter().map(|h| h.1).collect(),
    })
}

/// `(1/n)Σ_{k=1}^{n} (G^k x₀ + c(1−G^k)/(1−G))` per mode.
fn geometric_mean(period: &LinearPeriod, x0: &[Complex64], n: u64, zero: &[usize]) -> Vec<Complex64> {
    let nf = n as f64;
    let mut out: Vec<Complex64> = x0
        .iter()
        .zip(&period.g)
        .zip(&period.c)
        .map(|((&x, &g), &c)| {
            if g == 1.0 {
                // undamped mode: P^k(x) = x + k c
                return x + c * ((nf + 1.0) / 2.0);
            }
            // Σ_{k=1}^{n} g^k = g(1−g^n)/(1−g)
            let gn = if g == 0.0 { 0.0 } else { (nf * g.ln()).exp() };
            let s = g * (1.0 - gn) / (1.0 - g);
            let star = c / (1.0 - g);
            star + (x - star) * (s / nf)
        })
        .collect();
    project(&mut out, zero);
    out
}

/// Linear periodic solve with frozen `ω`.
pub fn linear_periodic<D: Domain>(
    problem: &LinearProblem<'_, '_, D>,
    start: Option<&[Complex64]>,
    options: FixedPointOptions,
) -> Result<(FixedPoint, LinearPeriod)> {
    let period = problem.assemble(true)?;
    let zeros = vec![Complex64::new(0.0, 0.0); period.c.len()];
    let fp = cesaro_fixed_point(problem.model().domain(), &period, start.unwrap_or(&zeros), options)?;
    Ok((fp, period))
}

#[derive(Debug, Clone, Copy)]
pub struct PeriodicOptions {
    pub dt: f64,
    pub tol_outer: f64,
    pub max_outer: usize,
    pub inner: FixedPointOptions,
    /// Ball radius in the working norm; the data are rejected when the
    /// forcing pushes the iterates beyond it.
    pub rho: Option<f64>,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tol_outer: 1e-8,
            max_outer: 50,
            inner: FixedPointOptions::default(),
            rho: None,
        }
    }
}

/// Empirical constants of the bound `‖ξ̂‖ ≤ κK̂g(γ)‖ω‖² + C̃‖f‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub k_hat: f64,
    pub c_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodicSolveReport<F> {
    pub xi_hat: F,
    /// The periodic orbit over one period.
    pub orbit: Trajectory<F>,
    /// `‖u(T) − u(0)‖` in the working norm after a nonlinear replay of one period.
    pub residual: f64,
    pub relative_residual: f64,
    /// The same in the sup norm.
    pub sup_residual: f64,
    pub cesaro_iters: Vec<u64>,
    pub outer_iters: usize,
    /// `sup_t ‖ω^{(j)}‖_∞` per outer iteration.
    pub norm_history: Vec<f64>,
    pub outer_differences: Vec<f64>,
    pub outer_ratios: Vec<f64>,
    pub xi_norm: f64,
    pub forcing_norm: f64,
    pub orbit_norm: f64,
    /// Right-hand side `κK̂g(γ)‖û‖² + C̃‖f‖` when constants are supplied.
    pub bound_check: Option<f64>,
    pub period: f64,
    pub dt: f64,
    pub domain: &'static str,
}

impl<F: Field> PeriodicSolveReport<F> {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "domain: {}", self.domain);
        let _ = writeln!(s, "period: {:.16e}", self.period);
        let _ = writeln!(s, "dt: {:.16e}", self.dt);
        let _ = writeln!(s, "residual: {:.16e}", self.residual);
        let _ = writeln!(s, "relative_residual: {:.16e}", self.relative_residual);
        let _ = writeln!(s, "sup_residual: {:.16e}", self.sup_residual);
        let _ = writeln!(s, "outer_iters: {}", self.outer_iters);
        let _ = writeln!(
            s,
            "cesaro_iters: {}",
            self.cesaro_iters
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "norm_history: {}", list(&self.norm_history));
        let _ = writeln!(s, "outer_differences: {}", list(&self.outer_differences));
        let _ = writeln!(s, "outer_ratios: {}", list(&self.outer_ratios));
        let _ = writeln!(s, "xi_norm: {:.16e}", self.xi_norm);
        let _ = writeln!(s, "orbit_norm: {:.16e}", self.orbit_norm);
        let _ = writeln!(s, "forcing_norm: {:.16e}", self.forcing_norm);
        match self.bound_check {
            Some(b) => {
                let _ = writeln!(s, "bound_check: {b:.16e}");
            }
            None => {
                let _ = writeln!(s, "bound_check: none");
            }
        }
        if self.domain == "torus" {
            let _ = writeln!(s, "uniqueness_class: zero-mean");
        }
        s
    }
}

/// Sup over one period (sampled) of the forcing norm of `|f(t)|`.
pub fn forcing_norm_sup<D: Domain>(model: &KellerSegel<'_, D>, samples: usize) -> f64 {
    let spec = model.forcing().spec;
    let base = model.domain().forcing_norm(model.forcing().magnitude_profile());
    let peak = (0..samples.max(1))
        .map(|j| spec.time_factor(j as f64 * spec.period / samples.max(1) as f64).abs())
        .fold(0.0, f64::max);
    base * peak
}

/// Nonlinear periodic mild solution by the outer iteration
/// `ω^{(j+1)} = Φ(ω^{(j)})`, each step a linear periodic solve.
pub fn find_periodic_nonlinear<D: Domain>(
    model: &KellerSegel<'_, D>,
    options: PeriodicOptions,
    constants: Option<BoundConstants>,
) -> Result<PeriodicSolveReport<D::Field>> {
    let dom = model.domain();
    let period = model.forcing().spec.period;
    let mut omega: Option<Trajectory<D::Field>> = None;
    let mut start: Option<Vec<Complex64>> = None;
    let mut cesaro_iters = Vec::new();
    let mut norm_history = Vec::new();
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    let mut converged = false;
    for _ in 0..options.max_outer {
        let frozen = match &omega {
            None => Frozen::Zero,
            Some(w) => Frozen::Trajectory(w),
        };
        let problem = LinearProblem::new(model, frozen, period, options.dt)?;
        let (fp, lin) = linear_periodic(&problem, start.as_deref(), options.inner)?;
        cesaro_iters.push(fp.iterations);
        let next = problem.trajectory(&lin, &fp.modes)?;
        let sup = next.sup_abs();
        if !sup.is_finite() {
            return Err(Error::BlowUp { t: period });
        }
        if let Some(rho) = options.rho {
            let biggest = next.norms.iter().copied().fold(0.0, f64::max);
            if biggest > rho {
                return Err(Error::OutsideSmallData(format!(
                    "iterate left the ball: working norm {biggest:e} > ρ = {rho:e}"
                )));
            }
        }
        norm_history.push(sup);
        let diff = match &omega {
            None => sup,
            Some(w) => next.sup_difference(w),
        };
        if let Some(&prev) = differences.last() {
            let r: f64 = if prev == 0.0 { 0.0 } else { diff / prev };
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::OutsideSmallData(format!("outer Φ ratios {ratios:?}")));
            }
        }
        differences.push(diff);
        start = Some(fp.modes);
        omega = Some(next);
        if diff <= options.tol_outer * sup.max(EPSILON) || diff == 0.0 {
            converged = true;
            break;
        }
    }
    let orbit = omega.expect("at least one outer iteration");
    if !converged {
        return Err(Error::OutsideSmallData(format!(
            "outer iteration did not converge in {} steps (differences {differences:?})",
            options.max_outer
        )));
    }
    let xi = orbit.snapshots[0].clone();
    let replay = model.solve_mild(&xi, period, options.dt)?;
    let end = replay.last();
    let gap = end.sub(&xi);
    let residual = dom.working_norm(&gap);
    let xi_norm = dom.working_norm(&xi);
    let orbit_norm = orbit.norms.iter().copied().fold(0.0, f64::max);
    let forcing_norm = forcing_norm_sup(model, 64);
    let p = model.params();
    let bound_check =
        constants.map(|c| p.kappa * c.k_hat * p.g_gamma() * orbit_norm * orbit_norm + c.c_tilde * forcing_norm);
    Ok(PeriodicSolveReport {
        relative_residual: residual / xi_norm.max(EPSILON),
        sup_residual: gap.max_abs(),
        residual,
        xi_hat: xi,
        orbit,
        cesaro_iters,
        outer_iters: differences.len(),
        norm_history,
        outer_differences: differences,
        outer_ratios: ratios,
        xi_norm,
        forcing_norm,
        orbit_norm,
        bound_check,
        period,
        dt: options.dt,
        domain: dom.kind().name(),
    })
}

/// Nonlinear replay of `periods` periods from `xi`; returns the working-norm
/// distance `‖u(kT) − ξ‖` after each period.
pub fn replay<D: Domain>(model: &KellerSegel<'_, D>, xi: &D::Field, periods: usize, dt: f64) -> Result<Vec<f64>> {
    let period = model.forcing().spec.period;
    let mut u = xi.clone();
    let mut out = Vec::with_capacity(periods);
    for j in 0..periods {
        let tr = model.solve_mild_from(&u, j as f64 * period, period, dt)?;
        u = tr.last().clone();
        out.push(model.domain().working_norm(&u.sub(xi)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainKind;
    use crate::duhamel::{ForcingSpec, KSParams};
    use crate::hyperbolic::{RadialDomain, RadialGrid};
    use crate::spectral::{TorusDomain, TorusField, TorusGrid};

    fn torus() -> TorusDomain {
        TorusDomain::new(TorusGrid::new(2, 16, 8.0).unwrap())
    }

    fn bump(d: &TorusDomain, amp: f64) -> TorusField {
        let f = TorusField::from_fn(*d.grid(), |x| amp * (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        d.zero_mode_policy(&f)
    }

    #[test]
    fn zero_data_zero_map() {
        let d = torus();
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).unwrap();
        let lp = LinearProblem::new(&m, Frozen::Zero, 1.0, 0.05).unwrap();
        assert_eq!(lp.poincare_map(&d.zeros()).unwrap().max_abs(), 0.0);
        let xi = bump(&d, 1.0);
        let exact = d.semigroup(&xi, 1.0).unwrap();
        assert!(lp.poincare_map(&xi).unwrap().sub(&exact).max_abs() < 1e-10);
        let (fp, _) = linear_periodic(&lp, None, FixedPointOptions::default()).unwrap();
        assert_eq!(fp.iterations, 1);
        assert!(fp.modes.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn poincare_map_is_affine() {
        let d = torus();
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(1.0, 0.3, 0.1, 1.0).unwrap()).unwrap();
        let w = m.solve_mild(&bump(&d, 0.1), 1.0, 0.05).unwrap();
        // the frozen trajectory only needs to be roughly periodic here
        let mut w = w;
        let first = w.snapshots[0].clone();
        *w.snapshots.last_mut().unwrap() = first;
        let lp = LinearProblem::new(&m, Frozen::Trajectory(&w), 1.0, 0.05).unwrap();
        let a = bump(&d, 0.7);
        let b = bump(&d, -0.2);
        let lhs = lp.poincare_map(&a).unwrap().sub(&lp.poincare_map(&b).unwrap());
        let rhs = d.semigroup(&a.sub(&b), 1.0).unwrap();
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
        // modal assembly reproduces the physical map
        let lin = lp.assemble(false).unwrap();
        let modal = d.from_modes(lin.apply(&d.to_modes(&a).unwrap()));
        assert!(modal.sub(&lp.poincare_map(&a).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn summations_agree() {
        let d = torus();
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(0.5, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let lp = LinearProblem::new(&m, Frozen::Zero, 0.5, 0.01).unwrap();
        let lin = lp.assemble(false).unwrap();
        let start = d.to_modes(&bump(&d, 0.3)).unwrap();
        let opts = |summation| FixedPointOptions {
            tol: 1e-5,
            summation,
            ..Default::default()
        };
        let a = cesaro_fixed_point(&d, &lin, &start, opts(CesaroSummation::Geometric)).unwrap();
        let b = cesaro_fixed_point(&d, &lin, &start, opts(CesaroSummation::Explicit)).unwrap();
        assert_eq!(a.iterations, b.iterations);
        let diff = d.from_modes(a.modes.clone()).sub(&d.from_modes(b.modes)).max_abs();
        assert!(
            diff < 1e-9 * d.from_modes(a.modes).max_abs(),
            "{diff} after {}",
            b.iterations
        );
        let plain = FixedPointOptions {
            tol: 1e-12,
            mode: FixedPointMode::Plain,
            ..Default::default()
        };
        let c = cesaro_fixed_point(&d, &lin, &start, plain).unwrap();
        assert!(c.iterations < 200);
    }

    #[test]
    fn cesaro_budget_exhaustion_reports_history() {
        let d = torus();
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(0.5, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let lin = LinearProblem::new(&m, Frozen::Zero, 0.5, 0.01)
            .unwrap()
            .assemble(false)
            .unwrap();
        let start = vec![Complex64::new(0.0, 0.0); lin.c.len()];
        let err = cesaro_fixed_point(
            &d,
            &lin,
            &start,
            FixedPointOptions {
                tol: 1e-12,
                max_n: 8,
                ..Default::default()
            },
        )
        .unwrap_err();
        match err {
            Error::CesaroNonConvergence {
                iterations,
                residual_history,
                ..
            } => {
                assert_eq!(iterations, 8);
                assert_eq!(residual_history.len(), 8);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn nonperiodic_forcing_rejected() {
        let d = torus();
        let p = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus).unwrap();
        let spec = ForcingSpec::new(0.5, 1.0, 0.0, 1.0).unwrap().with_window(0.1);
        let m = KellerSegel::new(&d, p, spec).unwrap();
        assert!(LinearProblem::new(&m, Frozen::Zero, 0.5, 0.01).is_err());
    }

    #[test]
    fn zero_forcing_gives_zero_orbit() {
        let d = torus();
        let p = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::zero(1.0)).unwrap();
        let r = find_periodic_nonlinear(
            &m,
            PeriodicOptions {
                dt: 0.05,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(r.xi_hat.max_abs(), 0.0);
        assert_eq!(r.outer_iters, 1);
        assert!(r.to_text().contains("residual: 0.0"));
    }

    #[test]
    fn small_forcing_orbit_on_hyperbolic_space() {
        let g = RadialGrid::with_spacing(3, 0.1, 12.0).unwrap();
        let d = RadialDomain::new(g.clone());
        let p = KSParams::new(1.0, 1.0, 1.0, 3, DomainKind::HyperbolicRadial).unwrap();
        let m = KellerSegel::new(&d, p, ForcingSpec::new(1.0, 0.2, 0.0, 1.0).unwrap()).unwrap();
        let r = find_periodic_nonlinear(
            &m,
            PeriodicOptions {
                dt: 0.02,
                tol_outer: 1e-10,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(r.relative_residual < 1e-7, "{}", r.relative_residual);
        assert!(r.outer_ratios.iter().all(|&x| x < 1.0));
        let drift = replay(&m, &r.xi_hat, 2, 0.02).unwrap();
        assert!(drift.iter().all(|&x| x < 1e-6 * r.xi_norm));
    }
}
