//! The common interface the time-dependent solvers use for both geometries.

use rustfft::num_complex::Complex64;

use crate::error::Result;
use crate::hyperbolic::{Propagator, RadialDomain, RadialField};
use crate::lorentz::{self, LorentzParams, Measured};
use crate::spectral::{TorusDomain, TorusField};

/// A scalar grid function with vector-space operations on its samples.
pub trait Field: Clone + Send + Sync + Measured + std::fmt::Debug {
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];
    fn zeros_like(&self) -> Self;
    fn same_grid(&self, other: &Self) -> bool;

    fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// `self += a·x`.
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.values_mut().iter_mut().zip(x.values()) {
            *s += a * v;
        }
    }

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values_mut().iter_mut().for_each(|v| *v *= a);
        out
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Torus,
    HyperbolicRadial,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Torus => "torus",
            DomainKind::HyperbolicRadial => "hyperbolic-radial",
        }
    }
}

/// Geometry-specific operators. The linear part of every evolution is `Δ`,
/// diagonalized by a modal basis with eigenvalues `λ ≥ 0` of `−Δ`.
pub trait Domain: Send + Sync {
    type Field: Field;

    fn kind(&self) -> DomainKind;
    fn dim(&self) -> usize;
    fn zeros(&self) -> Self::Field;
    fn check(&self, f: &Self::Field) -> Result<()>;

    /// `∇·(u ∇ κ(−Δ+γ)^{-1} w)`.
    fn chemotactic_divergence(&self, u: &Self::Field, w: &Self::Field, gamma: f64, kappa: f64) -> Result<Self::Field>;

    /// Magnitude and divergence of the unit-amplitude forcing profile of
    /// width `width`.
    fn forcing_profile(&self, width: f64) -> Result<(Self::Field, Self::Field)>;

    /// Heat semigroup `e^{tΔ}` of the spatial discretization.
    fn semigroup(&self, f: &Self::Field, t: f64) -> Result<Self::Field>;

    /// `φ_k(dt·Δ) f` as used by the time stepper; `φ_0` is the one-step
    /// propagator.
    fn phi(&self, f: &Self::Field, dt: f64, k: u32) -> Result<Self::Field>;

    /// Scalar form of [`Domain::phi`] at eigenvalue `λ` of `−Δ`.
    fn step_factor(&self, lambda: f64, dt: f64, k: u32) -> f64;

    fn eigenvalues(&self) -> &[f64];
    fn to_modes(&self, f: &Self::Field) -> Result<Vec<Complex64>>;
    #[allow(clippy::wrong_self_convention)]
    fn from_modes(&self, modes: Vec<Complex64>) -> Self::Field;

    /// Norm in which solutions are measured: `L^{n/2,∞}` on the torus,
    /// `L^{p/2}` on `H^n`.
    fn working_norm(&self, f: &Self::Field) -> f64;

    /// Norm of the forcing magnitude: `L^{n/3,∞}` on the torus, `L^{p/3}` on `H^n`.
    fn forcing_norm(&self, f: &Self::Field) -> f64;

    /// Removes the component of `f` the heat flow does not damp.
    fn zero_mode_policy(&self, f: &Self::Field) -> Self::Field;
}

/// `(e^z − 1)/z`.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z − 1 − z)/z²`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

fn weak_or_quasi<F: Measured + ?Sized>(f: &F, p: f64) -> f64 {
    let prof = match lorentz::rearrange(f) {
        Ok(p) => p,
        Err(_) => return f64::NAN,
    };
    // at p = 1 the f** functional is the L¹ norm, not weak L¹
    match LorentzParams::weak(p) {
        Ok(params) if p > 1.0 => prof.lorentz_norm(params),
        _ => prof.lorentz_quasinorm(p, f64::INFINITY),
    }
}

impl Domain for TorusDomain {
    type Field = TorusField;

    fn kind(&self) -> DomainKind {
        DomainKind::Torus
    }

    fn dim(&self) -> usize {
        self.grid().dim()
    }

    fn zeros(&self) -> TorusField {
        TorusField::zeros(*self.grid())
    }

    fn check(&self, f: &TorusField) -> Result<()> {
        if f.grid() != self.grid() {
            return Err(crate::error::Error::domain("field grid does not match domain grid"));
        }
        Ok(())
    }

    fn chemotactic_divergence(&self, u: &TorusField, w: &TorusField, gamma: f64, kappa: f64) -> Result<TorusField> {
        TorusDomain::chemotactic_divergence(self, u, w, gamma, kappa)
    }

    fn forcing_profile(&self, width: f64) -> Result<(TorusField, TorusField)> {
        let g = TorusField::from_fn(*self.grid(), |x| {
            (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp()
        });
        let div = self.apply_multiplier(&g, |i| self.ik(i, 0))?;
        Ok((g, div))
    }

    fn semigroup(&self, f: &TorusField, t: f64) -> Result<TorusField> {
        self.heat_apply(f, t, 0, None)
    }

    fn phi(&self, f: &TorusField, dt: f64, k: u32) -> Result<TorusField> {
        let k2 = self.k_squared();
        self.apply_multiplier(f, |i| Complex64::new(self.step_factor(k2[i], dt, k), 0.0))
    }

    fn step_factor(&self, lambda: f64, dt: f64, k: u32) -> f64 {
        let z = -dt * lambda;
        match k {
            0 => z.exp(),
            1 => phi1(z),
            _ => phi2(z),
        }
    }

    fn eigenvalues(&self) -> &[f64] {
        self.k_squared()
    }

    fn to_modes(&self, f: &TorusField) -> Result<Vec<Complex64>> {
        self.forward(f)
    }

    fn from_modes(&self, modes: Vec<Complex64>) -> TorusField {
        self.inverse(modes)
    }

    fn working_norm(&self, f: &TorusField) -> f64 {
        weak_or_quasi(f, 0.5 * self.dim() as f64)
    }

    fn forcing_norm(&self, f: &TorusField) -> f64 {
        weak_or_quasi(f, self.dim() as f64 / 3.0)
    }

    fn zero_mode_policy(&self, f: &TorusField) -> TorusField {
        let m = f.mean();
        let mut out = f.clone();
        out.values_mut().iter_mut().for_each(|v| *v -= m);
        out
    }
}

impl Domain for RadialDomain {
    type Field = RadialField;

    fn kind(&self) -> DomainKind {
        DomainKind::HyperbolicRadial
    }

    fn dim(&self) -> usize {
        self.grid().dim()
    }

    fn zeros(&self) -> RadialField {
        RadialField::zeros(self.grid().clone())
    }

    fn check(&self, f: &RadialField) -> Result<()> {
        RadialDomain::check(self, f)
    }

    fn chemotactic_divergence(&self, u: &RadialField, w: &RadialField, gamma: f64, kappa: f64) -> Result<RadialField> {
        RadialDomain::chemotactic_divergence(self, u, w, gamma, kappa)
    }

    fn forcing_profile(&self, width: f64) -> Result<(RadialField, RadialField)> {
        let g = move |t: f64| t / width * (-t * t / (2.0 * width * width)).exp();
        let mag = RadialField::from_fn(self.grid().clone(), g);
        Ok((mag, self.divergence_of_profile(g)))
    }

    fn semigroup(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        RadialDomain::semigroup(self, f, t)
    }

    fn phi(&self, f: &RadialField, dt: f64, k: u32) -> Result<RadialField> {
        match (self.propagator(), k) {
            (Propagator::CrankNicolson, 0) => self.cn_apply(f, dt),
            (Propagator::CrankNicolson, 1) => self.resolvent_half(f, dt),
            (Propagator::CrankNicolson, _) => Ok(self.resolvent_half(f, dt)?.scaled(0.5)),
            (Propagator::Modal, _) => {
                RadialDomain::check(self, f)?;
                let c: Vec<f64> = RadialDomain::to_modes(self, f)
                    .iter()
                    .zip(self.modes().eigenvalues())
                    .map(|(c, &l)| c * self.step_factor(l, dt, k))
                    .collect();
                Ok(RadialDomain::from_modes(self, &c))
            }
        }
    }

    /// Crank–Nicolson rational forms `R(z) = (1+z/2)/(1−z/2)` with the
    /// matching `(R−1)/z` and `(R−1−z)/z²`, or the exact φ-functions.
    fn step_factor(&self, lambda: f64, dt: f64, k: u32) -> f64 {
        let z = -dt * lambda;
        match self.propagator() {
            Propagator::CrankNicolson => {
                let d = 1.0 / (1.0 - 0.5 * z);
                match k {
                    0 => (1.0 + 0.5 * z) * d,
                    1 => d,
                    _ => 0.5 * d,
                }
            }
            Propagator::Modal => match k {
                0 => z.exp(),
                1 => phi1(z),
                _ => phi2(z),
            },
        }
    }

    fn eigenvalues(&self) -> &[f64] {
        self.modes().eigenvalues()
    }

    fn to_modes(&self, f: &RadialField) -> Result<Vec<Complex64>> {
        RadialDomain::check(self, f)?;
        Ok(RadialDomain::to_modes(self, f)
            .into_iter()
            .map(|c| Complex64::new(c, 0.0))
            .collect())
    }

    fn from_modes(&self, modes: Vec<Complex64>) -> RadialField {
        let re: Vec<f64> = modes.iter().map(|c| c.re).collect();
        RadialDomain::from_modes(self, &re)
    }

    fn working_norm(&self, f: &RadialField) -> f64 {
        lorentz::lp_norm(f, 0.5 * self.norm_exponent())
    }

    fn forcing_norm(&self, f: &RadialField) -> f64 {
        lorentz::lp_norm(f, self.norm_exponent() / 3.0)
    }

    fn zero_mode_policy(&self, f: &RadialField) -> RadialField {
        f.clone()
    }
}
