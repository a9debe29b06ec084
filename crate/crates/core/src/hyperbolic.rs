//! Radially symmetric calculus on hyperbolic space `H^n`.
//!
//! Functions of the geodesic radius `τ` are sampled at nodes `τ_i = i h`,
//! `i = 0..M`, with `τ_{M-1} = τ_max` a homogeneous Dirichlet node. Each node
//! owns the cell `[τ_i − h/2, τ_i + h/2] ∩ [0, τ_max]`; the Laplace–Beltrami
//! operator is discretized in conservative form
//!
//! ```text
//!   (Δf)_i = [A_{i+½}(f_{i+1} − f_i) − A_{i−½}(f_i − f_{i−1})] / (h V_i)
//! ```
//!
//! with face areas `A = ω_{n−1} sinh^{n−1} τ` and cell volumes `V_i`. At the
//! pole `A_{−½} = 0` and the stencil reduces to `n f''(0)` as `h → 0`.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::Field;
use crate::error::{Error, Result};
use crate::lorentz::Measured;
use crate::tridiag::Tridiagonal;

/// Surface area of the unit sphere `S^{d}` in `R^{d+1}`: `2π^{(d+1)/2}/Γ((d+1)/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let n = d + 1;
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// `Γ(n/2)` for a positive integer `n`.
fn gamma_half(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + ½) = √π (2k−1)!! / 2^k
        let k = (n - 1) / 2;
        PI.sqrt() * (0..k).map(|j| (2 * j + 1) as f64 / 2.0).product::<f64>()
    }
}

#[derive(Clone)]
pub struct RadialGrid {
    dim: usize,
    nodes: usize,
    tau_max: f64,
    weights: Arc<[f64]>,
    faces: Arc<[f64]>,
}

impl std::fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialGrid")
            .field("dim", &self.dim)
            .field("nodes", &self.nodes)
            .field("tau_max", &self.tau_max)
            .finish()
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.nodes == other.nodes && self.tau_max.to_bits() == other.tau_max.to_bits()
    }
}

impl RadialGrid {
    pub fn new(dim: usize, nodes: usize, tau_max: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(format!("hyperbolic dimension must be ≥ 2, got {dim}")));
        }
        if nodes < 16 {
            return Err(Error::domain(format!("radial grid needs ≥ 16 nodes, got {nodes}")));
        }
        if !(tau_max >= 10.0) || !tau_max.is_finite() {
            return Err(Error::domain(format!("τ_max must be ≥ 10, got {tau_max}")));
        }
        let h = tau_max / (nodes - 1) as f64;
        let omega = unit_sphere_area(dim - 1);
        let area = |t: f64| omega * t.sinh().powi(dim as i32 - 1);
        let g = 0.5 / 3f64.sqrt();
        let cell = |a: f64, b: f64| {
            let (mid, w) = (0.5 * (a + b), b - a);
            0.5 * w * (area(mid - g * w) + area(mid + g * w))
        };
        let weights: Vec<f64> = (0..nodes)
            .map(|i| {
                let t = i as f64 * h;
                let a = (t - 0.5 * h).max(0.0);
                let b = (t + 0.5 * h).min(tau_max);
                cell(a, b)
            })
            .collect();
        let faces: Vec<f64> = (0..nodes - 1).map(|i| area((i as f64 + 0.5) * h)).collect();
        Ok(Self {
            dim,
            nodes,
            tau_max,
            weights: weights.into(),
            faces: faces.into(),
        })
    }

    /// Grid with spacing as close to `h` as divides `τ_max`.
    pub fn with_spacing(dim: usize, h: f64, tau_max: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::domain(format!("grid spacing must be positive, got {h}")));
        }
        let cells = (tau_max / h).round().max(1.0) as usize;
        Self::new(dim, cells + 1, tau_max)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn spacing(&self) -> f64 {
        self.tau_max / (self.nodes - 1) as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.tau_max
        } else {
            i as f64 * self.spacing()
        }
    }

    /// Hyperbolic volume of each node's cell.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `A_{i+½}`, area of the geodesic sphere between nodes `i` and `i+1`.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn area(&self, tau: f64) -> f64 {
        unit_sphere_area(self.dim - 1) * tau.sinh().powi(self.dim as i32 - 1)
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Bottom of the `L²` spectrum of `−Δ` on `H^n`.
    pub fn spectral_gap(&self) -> f64 {
        let m = (self.dim - 1) as f64;
        0.25 * m * m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes {
            return Err(Error::domain(format!(
                "radial field needs {} samples, got {}",
                grid.nodes,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("radial sample {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        let values = vec![0.0; grid.nodes];
        Self { grid, values }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.nodes).map(|i| f(grid.tau(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights.iter())
            .map(|(v, w)| v * w)
            .sum()
    }
}

impl Measured for RadialField {
    fn samples(&self) -> &[f64] {
        &self.values
    }

    fn cell_measure(&self, index: usize) -> f64 {
        self.grid.weights[index]
    }
}

impl Field for RadialField {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.grid.clone())
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }
}

/// `(Σ w_i |f_i|^p)^{1/p}`.
pub fn lp_norm_radial(f: &RadialField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p exponent must be ≥ 1, got {p}")));
    }
    Ok(crate::lorentz::lp_norm(f, p))
}

/// Closed-form heat kernel of `H³` at geodesic distance `τ`.
pub fn h3_heat_kernel(t: f64, tau: f64) -> f64 {
    let ratio = if tau.abs() < 1e-8 { 1.0 } else { tau / tau.sinh() };
    (4.0 * PI * t).powf(-1.5) * (-t).exp() * ratio * (-tau * tau / (4.0 * t)).exp()
}

/// Eigen-decomposition of the discrete `−Δ` on the free nodes, in the
/// `W`-orthonormal form `−Δ = W^{-1/2} Q Λ Qᵀ W^{1/2}`.
#[derive(Debug)]
pub struct RadialModes {
    eigenvalues: Vec<f64>,
    // column-major Q, size free × free
    vectors: DMatrix<f64>,
    sqrt_w: Vec<f64>,
}

impl RadialModes {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Linear propagator used by the time stepper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagator {
    /// Crank–Nicolson rational approximation, tridiagonal solves.
    #[default]
    CrankNicolson,
    /// Exact exponential of the discrete Laplacian via its eigenbasis.
    Modal,
}

/// Operators for one radial grid: stiffness matrix, cached Crank–Nicolson
/// factorizations and (lazily) the modal basis.
pub struct RadialDomain {
    grid: RadialGrid,
    // stiffness K on the free nodes 0..M-1: (Kf)_i = Σ A (f_i − f_j)/h
    k_diag: Vec<f64>,
    k_off: Vec<f64>,
    norm_p: f64,
    propagator: Propagator,
    cn_cache: Mutex<Vec<(u64, Arc<Tridiagonal>)>>,
    modes: OnceLock<RadialModes>,
}

impl std::fmt::Debug for RadialDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialDomain")
            .field("grid", &self.grid)
            .field("norm_p", &self.norm_p)
            .finish()
    }
}

impl RadialDomain {
    pub fn new(grid: RadialGrid) -> Self {
        let free = grid.nodes - 1;
        let h = grid.spacing();
        let mut k_diag = vec![0.0; free];
        let mut k_off = vec![0.0; free];
        for i in 0..free {
            // face i+½ always exists for i < free (node i+1 ≤ M−1)
            let right = grid.faces[i] / h;
            k_diag[i] += right;
            if i + 1 < free {
                k_diag[i + 1] += right;
                k_off[i] = -right;
            }
        }
        let norm_p = 1.5 * grid.dim as f64;
        Self {
            grid,
            k_diag,
            k_off,
            norm_p,
            propagator: Propagator::default(),
            cn_cache: Mutex::new(Vec::new()),
            modes: OnceLock::new(),
        }
    }

    /// Sets the exponent `p` of the working norm `L^{p/2}` (default `3n/2`).
    pub fn with_norm_exponent(mut self, p: f64) -> Self {
        self.norm_p = p;
        self
    }

    pub fn with_propagator(mut self, propagator: Propagator) -> Self {
        self.propagator = propagator;
        self
    }

    pub fn propagator(&self) -> Propagator {
        self.propagator
    }

    pub fn norm_exponent(&self) -> f64 {
        self.norm_p
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    fn free(&self) -> usize {
        self.grid.nodes - 1
    }

    pub(crate) fn check(&self, f: &RadialField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::domain(format!(
                "field grid {:?} does not match domain grid {:?}",
                f.grid, self.grid
            )));
        }
        Ok(())
    }

    /// `K f` on the free nodes, with `f_{M−1}` taken from the field.
    fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing();
        let free = self.free();
        (0..free)
            .map(|i| {
                let mut y = self.grid.faces[i] * (f[i] - f[i + 1]) / h;
                if i > 0 {
                    y += self.grid.faces[i - 1] * (f[i] - f[i - 1]) / h;
                }
                y
            })
            .collect()
    }

    /// Conservative `Δ_H f`; zero at the Dirichlet node.
    pub fn radial_laplacian(&self, f: &RadialField) -> Result<RadialField> {
        self.check(f)?;
        let kf = self.stiffness_apply(&f.values);
        let mut out = vec![0.0; self.grid.nodes];
        for (i, k) in kf.iter().enumerate() {
            out[i] = -k / self.grid.weights[i];
        }
        Ok(RadialField {
            grid: self.grid.clone(),
            values: out,
        })
    }

    /// `f^T K f`, the discrete Dirichlet energy `∫|∂_τ f|²`.
    pub fn dirichlet_energy(&self, f: &RadialField) -> Result<f64> {
        self.check(f)?;
        let kf = self.stiffness_apply(&f.values);
        Ok(kf.iter().zip(&f.values).map(|(a, b)| a * b).sum())
    }

    /// Factorization of `W + (dt/2) K`, i.e. of `I − (dt/2)Δ` scaled by `W`.
    fn cn_factor(&self, dt: f64) -> Result<Arc<Tridiagonal>> {
        let key = dt.to_bits();
        let mut cache = self.cn_cache.lock().expect("factor cache poisoned");
        if let Some((_, f)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(f.clone());
        }
        let free = self.free();
        let diag: Vec<f64> = (0..free)
            .map(|i| self.grid.weights[i] + 0.5 * dt * self.k_diag[i])
            .collect();
        let upper: Vec<f64> = self.k_off.iter().map(|k| 0.5 * dt * k).collect();
        let mut lower = vec![0.0; free];
        lower[1..].copy_from_slice(&upper[..free - 1]);
        let f = Arc::new(Tridiagonal::factor(&lower, &diag, &upper)?);
        if cache.len() > 16 {
            cache.remove(0);
        }
        cache.push((key, f.clone()));
        Ok(f)
    }

    /// `(I − (dt/2)Δ)^{-1} f` with the Dirichlet node held at zero.
    pub fn resolvent_half(&self, f: &RadialField, dt: f64) -> Result<RadialField> {
        self.check(f)?;
        let fac = self.cn_factor(dt)?;
        let free = self.free();
        let mut rhs: Vec<f64> = (0..free).map(|i| self.grid.weights[i] * f.values[i]).collect();
        fac.solve_in_place(&mut rhs);
        rhs.push(0.0);
        Ok(RadialField {
            grid: self.grid.clone(),
            values: rhs,
        })
    }

    /// One Crank–Nicolson step `(I − dt/2 Δ)u⁺ = (I + dt/2 Δ)u`.
    pub fn heat_step(&self, f: &RadialField, dt: f64) -> Result<RadialField> {
        let h = self.grid.spacing();
        if !(dt > 0.0) || dt > 0.5 * h * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "heat step needs 0 < dt ≤ h/2 = {}, got {dt}",
                0.5 * h
            )));
        }
        self.cn_apply(f, dt)
    }

    /// `R(dtΔ) f = (I − dt/2 Δ)^{-1}(I + dt/2 Δ) f` without the step-size budget.
    pub fn cn_apply(&self, f: &RadialField, dt: f64) -> Result<RadialField> {
        self.check(f)?;
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let fac = self.cn_factor(dt)?;
        let mut values = f.values.clone();
        values[self.free()] = 0.0;
        let kf = self.stiffness_apply(&values);
        let mut rhs: Vec<f64> = (0..self.free())
            .map(|i| self.grid.weights[i] * values[i] - 0.5 * dt * kf[i])
            .collect();
        fac.solve_in_place(&mut rhs);
        rhs.push(0.0);
        Ok(RadialField {
            grid: self.grid.clone(),
            values: rhs,
        })
    }

    /// `κ(−Δ_H + γ)^{-1} f` with the Dirichlet condition at `τ_max`.
    pub fn elliptic_inverse_radial(&self, f: &RadialField, gamma: f64, kappa: f64) -> Result<RadialField> {
        self.check(f)?;
        if !(gamma >= 0.0) || !(kappa > 0.0) {
            return Err(Error::domain(format!(
                "elliptic inverse needs γ ≥ 0 and κ > 0, got γ = {gamma}, κ = {kappa}"
            )));
        }
        let free = self.free();
        let w = &self.grid.weights;
        let diag: Vec<f64> = (0..free).map(|i| self.k_diag[i] + gamma * w[i]).collect();
        let upper = self.k_off.clone();
        let mut lower = vec![0.0; free];
        lower[1..].copy_from_slice(&upper[..free - 1]);
        let fac = Tridiagonal::factor(&lower, &diag, &upper)?;
        let rhs: Vec<f64> = (0..free).map(|i| kappa * w[i] * f.values[i]).collect();
        let mut v = fac.solve(&rhs);
        v.push(0.0);

        // forward check of (−Δ + γ)v = κ f on the free nodes
        let kv = self.stiffness_apply(&v);
        let (mut res, mut scale) = (0.0f64, 0.0f64);
        for i in 0..free {
            let lhs = kv[i] / w[i] + gamma * v[i];
            res = res.max((lhs - kappa * f.values[i]).abs());
            scale = scale.max((kappa * f.values[i]).abs());
        }
        if res > 1e-9 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
            return Err(Error::Internal(format!(
                "elliptic residual {res:e} exceeds 1e-9 relative to {scale:e}"
            )));
        }
        Ok(RadialField {
            grid: self.grid.clone(),
            values: v,
        })
    }

    /// Finite-volume divergence of a radial vector field given by its
    /// node values; face fluxes are averages of neighbouring nodes.
    pub fn divergence_radial(&self, field: &RadialField) -> Result<RadialField> {
        self.check(field)?;
        let f = &field.values;
        if f[0].abs() > 1e-8 * field.max_abs() {
            return Err(Error::domain(format!(
                "radial vector field must vanish at the pole, got F(0) = {}",
                f[0]
            )));
        }
        let m = self.grid.nodes;
        let flux: Vec<f64> = (0..m - 1)
            .map(|i| self.grid.faces[i] * 0.5 * (f[i] + f[i + 1]))
            .collect();
        let mut out = self.divergence_of_face_fluxes(&flux);
        // outer half-cell closes with the boundary flux
        out[m - 1] = (self.grid.area(self.grid.tau_max) * f[m - 1] - flux[m - 2]) / self.grid.weights[m - 1];
        Ok(RadialField {
            grid: self.grid.clone(),
            values: out,
        })
    }

    /// `(Φ_{i+½} − Φ_{i−½}) / V_i` for area-weighted face fluxes `Φ`;
    /// zero at the Dirichlet node.
    pub(crate) fn divergence_of_face_fluxes(&self, flux: &[f64]) -> Vec<f64> {
        let m = self.grid.nodes;
        let mut out = vec![0.0; m];
        for i in 0..m - 1 {
            let left = if i == 0 { 0.0 } else { flux[i - 1] };
            out[i] = (flux[i] - left) / self.grid.weights[i];
        }
        out
    }

    /// Centered `∂_τ f`, zero at the pole, one-sided at `τ_max`.
    pub fn radial_derivative(&self, f: &RadialField) -> Result<RadialField> {
        self.check(f)?;
        let h = self.grid.spacing();
        let v = &f.values;
        let m = v.len();
        let values = (0..m)
            .map(|i| match i {
                0 => 0.0,
                i if i + 1 == m => (v[i] - v[i - 1]) / h,
                i => (v[i + 1] - v[i - 1]) / (2.0 * h),
            })
            .collect();
        Ok(RadialField {
            grid: self.grid.clone(),
            values,
        })
    }

    /// `∇·(u ∇ κ(−Δ+γ)^{-1} w)` with face fluxes `ū_{i+½}(v_{i+1}−v_i)/h`.
    pub fn chemotactic_divergence(
        &self,
        u: &RadialField,
        w: &RadialField,
        gamma: f64,
        kappa: f64,
    ) -> Result<RadialField> {
        self.check(u)?;
        let v = self.elliptic_inverse_radial(w, gamma, kappa)?;
        let h = self.grid.spacing();
        let flux: Vec<f64> = (0..self.grid.nodes - 1)
            .map(|i| {
                let ubar = 0.5 * (u.values[i] + u.values[i + 1]);
                self.grid.faces[i] * ubar * (v.values[i + 1] - v.values[i]) / h
            })
            .collect();
        Ok(RadialField {
            grid: self.grid.clone(),
            values: self.divergence_of_face_fluxes(&flux),
        })
    }

    /// Divergence of the radial vector field `g(τ) ∂_τ`, with `g` evaluated
    /// exactly on the faces.
    pub fn divergence_of_profile(&self, g: impl Fn(f64) -> f64) -> RadialField {
        let h = self.grid.spacing();
        let flux: Vec<f64> = (0..self.grid.nodes - 1)
            .map(|i| self.grid.faces[i] * g((i as f64 + 0.5) * h))
            .collect();
        RadialField {
            grid: self.grid.clone(),
            values: self.divergence_of_face_fluxes(&flux),
        }
    }

    pub fn modes(&self) -> &RadialModes {
        self.modes.get_or_init(|| {
            let free = self.free();
            let sqrt_w: Vec<f64> = self.grid.weights[..free].iter().map(|w| w.sqrt()).collect();
            let mut s = DMatrix::<f64>::zeros(free, free);
            for i in 0..free {
                s[(i, i)] = self.k_diag[i] / self.grid.weights[i];
                if i + 1 < free {
                    let x = self.k_off[i] / (sqrt_w[i] * sqrt_w[i + 1]);
                    s[(i, i + 1)] = x;
                    s[(i + 1, i)] = x;
                }
            }
            let eig = SymmetricEigen::new(s);
            let mut order: Vec<usize> = (0..free).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j]).collect();
            let mut vectors = DMatrix::<f64>::zeros(free, free);
            for (c, &j) in order.iter().enumerate() {
                vectors.set_column(c, &eig.eigenvectors.column(j));
            }
            RadialModes {
                eigenvalues,
                vectors,
                sqrt_w,
            }
        })
    }

    /// Coefficients of `f` in the `W`-orthonormal eigenbasis of `−Δ`.
    pub fn to_modes(&self, f: &RadialField) -> Vec<f64> {
        let m = self.modes();
        let free = self.free();
        let x = nalgebra::DVector::from_iterator(free, (0..free).map(|i| m.sqrt_w[i] * f.values[i]));
        (m.vectors.transpose() * x).iter().copied().collect()
    }

    pub fn from_modes(&self, c: &[f64]) -> RadialField {
        let m = self.modes();
        let free = self.free();
        let y = &m.vectors * nalgebra::DVector::from_column_slice(c);
        let mut values: Vec<f64> = (0..free).map(|i| y[i] / m.sqrt_w[i]).collect();
        values.push(0.0);
        RadialField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `e^{tΔ} f` of the discrete Laplacian, evaluated in the modal basis.
    pub fn semigroup(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        self.check(f)?;
        if !(t >= 0.0) {
            return Err(Error::domain(format!("heat time must be non-negative, got {t}")));
        }
        let lam = self.modes().eigenvalues.clone();
        let c: Vec<f64> = self
            .to_modes(f)
            .iter()
            .zip(&lam)
            .map(|(c, l)| c * (-t * l).exp())
            .collect();
        Ok(self.from_modes(&c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3(h: f64, tau_max: f64) -> RadialGrid {
        RadialGrid::with_spacing(3, h, tau_max).unwrap()
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(1, 100, 20.0).is_err());
        assert!(RadialGrid::new(3, 10, 20.0).is_err());
        assert!(RadialGrid::new(3, 100, 5.0).is_err());
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        for &(n, h) in &[(2usize, 0.05), (3, 0.05), (4, 0.05), (3, 0.02)] {
            let g = RadialGrid::with_spacing(n, h, 20.0).unwrap();
            let omega = unit_sphere_area(n - 1);
            // ∫_0^T sinh^{n−1} by composite Simpson on a fine mesh
            let k = 200_000;
            let dt = 20.0 / k as f64;
            let s: f64 = (0..=k)
                .map(|i| {
                    let c = if i == 0 || i == k {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * (i as f64 * dt).sinh().powi(n as i32 - 1)
                })
                .sum::<f64>()
                * dt
                / 3.0;
            let exact = omega * s;
            assert!(
                (g.volume() - exact).abs() < 1e-6 * exact,
                "n={n}: {} vs {exact}",
                g.volume()
            );
        }
    }

    #[test]
    fn ball_of_radius_one_in_h3() {
        // τ = 1 falls on a cell boundary with h = 1/10.5
        let g = RadialGrid::new(3, 211, 20.0).unwrap();
        let ind = RadialField::from_fn(g, |t| if t < 1.0 { 1.0 } else { 0.0 });
        let vol = lp_norm_radial(&ind, 1.0).unwrap();
        let exact = PI * (2f64).sinh() - 2.0 * PI;
        assert!((vol - exact).abs() < 1e-4, "{vol} vs {exact}");
    }

    #[test]
    fn laplacian_of_constant_and_cosh() {
        let g = grid3(0.01, 12.0);
        let d = RadialDomain::new(g.clone());
        let c = RadialField::from_fn(g.clone(), |_| 2.0);
        let lap = d.radial_laplacian(&c).unwrap();
        assert!(lap.max_abs() < 1e-10);

        let f = RadialField::from_fn(g.clone(), f64::cosh);
        let lap = d.radial_laplacian(&f).unwrap();
        for i in 0..200 {
            let t = g.tau(i);
            let exact = 3.0 * t.cosh();
            assert!((lap.values()[i] - exact).abs() < 1e-3 * exact, "i={i}");
        }
    }

    #[test]
    fn laplacian_is_second_order() {
        let err = |h: f64| {
            let g = grid3(h, 10.0);
            let d = RadialDomain::new(g.clone());
            let f = RadialField::from_fn(g.clone(), |t| (-t * t).exp());
            let lap = d.radial_laplacian(&f).unwrap();
            (0..g.nodes() - 1)
                .map(|i| {
                    let t = g.tau(i);
                    let e = (-t * t).exp();
                    let exact = if t == 0.0 {
                        -6.0
                    } else {
                        (4.0 * t * t - 2.0) * e - 2.0 * 2.0 * t * e / t.tanh()
                    };
                    (lap.values()[i] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(0.04) / err(0.02)).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn divergence_identities() {
        let g = grid3(0.01, 12.0);
        let d = RadialDomain::new(g.clone());
        let f = RadialField::from_fn(g.clone(), f64::sinh);
        let div = d.divergence_radial(&f).unwrap();
        for i in 0..300 {
            let exact = 3.0 * g.tau(i).cosh();
            assert!((div.values()[i] - exact).abs() < 1e-3 * exact, "i={i}");
        }
        let zero = d.divergence_radial(&RadialField::zeros(g.clone())).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let bump = RadialField::from_fn(g.clone(), |t| t * (-(t - 3.0).powi(2)).exp());
        let div = d.divergence_radial(&bump).unwrap();
        assert!(div.integral().abs() < 1e-10 * bump.max_abs());

        let bad = RadialField::from_fn(g, |t| 1.0 + t);
        assert!(d.divergence_radial(&bad).is_err());
    }

    #[test]
    fn elliptic_forward_check() {
        let g = grid3(0.05, 20.0);
        let d = RadialDomain::new(g.clone());
        let z = d
            .elliptic_inverse_radial(&RadialField::zeros(g.clone()), 0.0, 1.0)
            .unwrap();
        assert_eq!(z.max_abs(), 0.0);
        for gamma in [0.0, 0.5, 2.0] {
            let f = RadialField::from_fn(g.clone(), |t| (-(t * t) / 2.0).exp());
            let v = d.elliptic_inverse_radial(&f, gamma, 1.5).unwrap();
            let lap = d.radial_laplacian(&v).unwrap();
            for i in 0..g.nodes() - 1 {
                let lhs = -lap.values()[i] + gamma * v.values()[i];
                assert!((lhs - 1.5 * f.values()[i]).abs() < 1e-9 * 1.5);
            }
        }
    }

    #[test]
    fn heat_step_preserves_constant_interior() {
        let g = grid3(0.05, 20.0);
        let d = RadialDomain::new(g.clone());
        let mut c = RadialField::from_fn(g.clone(), |_| 1.0);
        for _ in 0..10 {
            c = d.heat_step(&c, 0.02).unwrap();
        }
        // the Dirichlet node pulls the far field down, the core stays put
        for i in 0..100 {
            assert!((c.values()[i] - 1.0).abs() < 1e-10);
        }
        assert!(d.heat_step(&c, 1.0).is_err());
    }

    #[test]
    fn cn_is_second_order_in_time() {
        let g = grid3(0.05, 20.0);
        let d = RadialDomain::new(g.clone());
        let f = RadialField::from_fn(g.clone(), |t| (-(t * t)).exp());
        let exact = d.semigroup(&f, 1.0).unwrap();
        let run = |dt: f64| {
            let mut u = f.clone();
            for _ in 0..(1.0 / dt).round() as usize {
                u = d.heat_step(&u, dt).unwrap();
            }
            u.sub(&exact).max_abs()
        };
        let order = (run(0.02) / run(0.01)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn modal_round_trip_and_semigroup() {
        let g = RadialGrid::with_spacing(3, 0.1, 12.0).unwrap();
        let d = RadialDomain::new(g.clone());
        let f = RadialField::from_fn(g.clone(), |t| (-(t * t)).exp() * (1.0 + t));
        let c = d.to_modes(&f);
        let back = d.from_modes(&c);
        let mut f0 = f.clone();
        let last = f0.values().len() - 1;
        f0.values_mut()[last] = 0.0;
        assert!(back.sub(&f0).max_abs() < 1e-12);
        let a = d.semigroup(&d.semigroup(&f, 0.3).unwrap(), 0.4).unwrap();
        let b = d.semigroup(&f, 0.7).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12);
        assert!(d.modes().eigenvalues()[0] > 0.0);
    }

    #[test]
    fn kernel_formula_integrates_to_decaying_mass() {
        // total mass of the H³ kernel is 1 (stochastic completeness)
        let t = 1.0;
        let k = 100_000;
        let dt = 30.0 / k as f64;
        let m: f64 = (1..k)
            .map(|i| {
                let r = i as f64 * dt;
                4.0 * PI * r.sinh().powi(2) * h3_heat_kernel(t, r)
            })
            .sum::<f64>()
            * dt;
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }
}
