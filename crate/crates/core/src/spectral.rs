//! Pseudospectral calculus on the periodic box `[-L/2, L/2)^n`, used as a
//! stand-in for `R^n`. Every operator is a Fourier multiplier.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::Field;
use crate::error::{Error, Result};
use crate::lorentz::Measured;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    points: usize,
    length: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        if !(1..=4).contains(&dim) {
            return Err(Error::domain(format!("torus dimension {dim} outside 1..=4")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::domain(format!(
                "points per axis must be a power of two ≥ 8, got {points}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::domain(format!("box side must be positive, got {length}")));
        }
        Ok(Self { dim, points, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Physical coordinates of the sample at a flat (row-major) index.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = self.coordinate(rest % self.points);
            rest /= self.points;
        }
    }

    /// Index along `axis` of a flat index.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.points.pow((self.dim - 1 - axis) as u32)) % self.points
    }

    /// Signed wavenumber of FFT index `i`: `2π/L · {0, …, N/2−1, −N/2, …, −1}`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let n = self.points as isize;
        let i = i as isize;
        let m = if i < n / 2 { i } else { i - n };
        2.0 * std::f64::consts::PI / self.length * m as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl TorusField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "torus field needs {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("torus sample {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |x, i| {
                    grid.position(i, x);
                    f(x)
                },
            )
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }
}

impl Measured for TorusField {
    fn samples(&self) -> &[f64] {
        &self.values
    }

    fn cell_measure(&self, _index: usize) -> f64 {
        self.grid.cell_measure()
    }

    fn total_measure(&self) -> f64 {
        self.grid.volume()
    }
}

impl Field for TorusField {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.grid)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusVectorField {
    components: Vec<TorusField>,
}

impl TorusVectorField {
    pub fn new(components: Vec<TorusField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::domain("vector field needs at least one component"));
        };
        if components.len() != first.grid.dim() {
            return Err(Error::domain(format!(
                "{}-dimensional grid needs {} components, got {}",
                first.grid.dim(),
                first.grid.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.grid != first.grid) {
            return Err(Error::domain("vector field components live on different grids"));
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.components[0].grid
    }

    pub fn components(&self) -> &[TorusField] {
        &self.components
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> TorusField {
        let grid = *self.grid();
        let values = (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values[i] * c.values[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        TorusField { grid, values }
    }
}

/// FFT plans and wavenumber tables for one grid.
pub struct TorusDomain {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl std::fmt::Debug for TorusDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusDomain").field("grid", &self.grid).finish()
    }
}

impl TorusDomain {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points());
        let inverse = planner.plan_fft_inverse(grid.points());
        let k2 = (0..grid.len())
            .map(|flat| {
                (0..grid.dim())
                    .map(|a| grid.wavenumber(grid.axis_index(flat, a)).powi(2))
                    .sum()
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            k2,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `|k|²` for each mode, in FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    fn check(&self, f: &TorusField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::domain(format!(
                "field grid {:?} does not match domain grid {:?}",
                f.grid, self.grid
            )));
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points();
        let d = self.grid.dim();
        let zero = Complex64::new(0.0, 0.0);
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                let batch = n * 64;
                data.par_chunks_mut(batch).for_each(|chunk| {
                    let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(chunk, &mut scratch);
                });
            } else {
                data.par_chunks_mut(stride * n).for_each(|block| {
                    let mut line = vec![zero; n];
                    let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
                    for j in 0..stride {
                        for (i, x) in line.iter_mut().enumerate() {
                            *x = block[j + i * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (i, x) in line.iter().enumerate() {
                            block[j + i * stride] = *x;
                        }
                    }
                });
            }
        }
    }

    /// Unnormalized forward DFT.
    pub fn forward(&self, f: &TorusField) -> Result<Vec<Complex64>> {
        self.check(f)?;
        let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        Ok(data)
    }

    /// Inverse DFT with `1/N^n` normalization; keeps the real part, which is
    /// the Hermitian projection of the spectrum.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> TorusField {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        TorusField {
            grid: self.grid,
            values: data.iter().map(|c| c.re * scale).collect(),
        }
    }

    /// Applies a multiplier given as a function of the flat mode index.
    pub fn apply_multiplier(&self, f: &TorusField, m: impl Fn(usize) -> Complex64 + Sync) -> Result<TorusField> {
        let mut data = self.forward(f)?;
        data.par_iter_mut().enumerate().for_each(|(i, c)| *c *= m(i));
        Ok(self.inverse(data))
    }

    /// `i k_axis` for mode `flat`, zero on the unpaired Nyquist index.
    pub fn ik(&self, flat: usize, axis: usize) -> Complex64 {
        let i = self.grid.axis_index(flat, axis);
        if i == self.grid.points() / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.grid.wavenumber(i))
        }
    }

    /// `∇^m e^{tΔ} f`, with `m = 1` differentiating along `axis`.
    pub fn heat_apply(&self, f: &TorusField, t: f64, m: u32, axis: Option<usize>) -> Result<TorusField> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("heat time must be non-negative, got {t}")));
        }
        match (m, axis) {
            (0, _) => {
                if t == 0.0 {
                    self.check(f)?;
                    return Ok(f.clone());
                }
                self.apply_multiplier(f, |i| Complex64::new((-t * self.k2[i]).exp(), 0.0))
            }
            (1, Some(a)) if a < self.grid.dim() => {
                self.apply_multiplier(f, |i| self.ik(i, a) * (-t * self.k2[i]).exp())
            }
            (1, _) => Err(Error::domain("first derivative needs an axis below the dimension")),
            _ => Err(Error::Unsupported(format!("derivative order {m} > 1"))),
        }
    }

    fn check_elliptic(&self, f: &TorusField, gamma: f64, kappa: f64) -> Result<()> {
        self.check(f)?;
        if !(gamma >= 0.0) || !(kappa > 0.0) {
            return Err(Error::domain(format!(
                "elliptic inverse needs γ ≥ 0 and κ > 0, got γ = {gamma}, κ = {kappa}"
            )));
        }
        if gamma == 0.0 && f.mean().abs() > 1e-10 * f.max_abs() {
            return Err(Error::domain("elliptic inverse undefined on nonzero-mean input at γ=0"));
        }
        Ok(())
    }

    /// `1/(|k|²+γ)`, with the zero mode dropped when `γ = 0`.
    fn resolvent(&self, i: usize, gamma: f64) -> f64 {
        let d = self.k2[i] + gamma;
        if d == 0.0 {
            0.0
        } else {
            1.0 / d
        }
    }

    /// `κ(−Δ+γ)^{-1} f`.
    pub fn elliptic_inverse(&self, f: &TorusField, gamma: f64, kappa: f64) -> Result<TorusField> {
        self.check_elliptic(f, gamma, kappa)?;
        self.apply_multiplier(f, |i| Complex64::new(kappa * self.resolvent(i, gamma), 0.0))
    }

    /// `κ ∂_j (−Δ+γ)^{-1} f`.
    pub fn lj_apply(&self, f: &TorusField, j: usize, gamma: f64, kappa: f64) -> Result<TorusField> {
        if j >= self.grid.dim() {
            return Err(Error::domain(format!("axis {j} out of range")));
        }
        self.check_elliptic(f, gamma, kappa)?;
        self.apply_multiplier(f, |i| self.ik(i, j) * (kappa * self.resolvent(i, gamma)))
    }

    /// `(−Δ+γ) f`, the forward operator of the elliptic problem.
    pub fn helmholtz(&self, f: &TorusField, gamma: f64) -> Result<TorusField> {
        self.apply_multiplier(f, |i| Complex64::new(self.k2[i] + gamma, 0.0))
    }

    pub fn laplacian(&self, f: &TorusField) -> Result<TorusField> {
        self.apply_multiplier(f, |i| Complex64::new(-self.k2[i], 0.0))
    }

    pub fn gradient(&self, f: &TorusField) -> Result<TorusVectorField> {
        let spectrum = self.forward(f)?;
        let components = (0..self.grid.dim())
            .map(|a| {
                let d: Vec<Complex64> = spectrum
                    .par_iter()
                    .enumerate()
                    .map(|(i, c)| c * self.ik(i, a))
                    .collect();
                self.inverse(d)
            })
            .collect();
        TorusVectorField::new(components)
    }

    pub fn divergence(&self, vf: &TorusVectorField) -> Result<TorusField> {
        if *vf.grid() != self.grid {
            return Err(Error::domain("vector field grid does not match domain grid"));
        }
        let mut total = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (a, c) in vf.components.iter().enumerate() {
            let s = self.forward(c)?;
            total
                .par_iter_mut()
                .zip(s.par_iter())
                .enumerate()
                .for_each(|(i, (t, x))| *t += x * self.ik(i, a));
        }
        Ok(self.inverse(total))
    }

    fn keeps_mode(&self, flat: usize) -> bool {
        let n = self.grid.points();
        (0..self.grid.dim()).all(|a| {
            let i = self.grid.axis_index(flat, a);
            let m = if i < n / 2 { i } else { n - i };
            3 * m < n
        })
    }

    /// Zeroes every mode with `|m| ≥ N/3` on some axis (2/3 rule).
    pub fn dealias(&self, f: &TorusField) -> Result<TorusField> {
        self.apply_multiplier(f, |i| Complex64::new(if self.keeps_mode(i) { 1.0 } else { 0.0 }, 0.0))
    }

    pub(crate) fn truncate_spectrum(&self, data: &mut [Complex64]) {
        data.par_iter_mut().enumerate().for_each(|(i, c)| {
            if !self.keeps_mode(i) {
                *c = Complex64::new(0.0, 0.0);
            }
        });
    }

    /// Dealiased pointwise product.
    pub fn product(&self, a: &TorusField, b: &TorusField) -> Result<TorusField> {
        let a = self.dealias(a)?;
        let b = self.dealias(b)?;
        let raw = TorusField {
            grid: self.grid,
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        };
        self.dealias(&raw)
    }

    /// `∇·(u ∇ κ(−Δ+γ)^{-1} w)`, dealiased.
    pub fn chemotactic_divergence(&self, u: &TorusField, w: &TorusField, gamma: f64, kappa: f64) -> Result<TorusField> {
        self.check(u)?;
        self.check_elliptic(w, gamma, kappa)?;
        let mut u_hat = self.forward(u)?;
        self.truncate_spectrum(&mut u_hat);
        let u_phys = self.inverse(u_hat);
        let w_hat = self.forward(w)?;
        let mut total = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for a in 0..self.grid.dim() {
            let grad: Vec<Complex64> = w_hat
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    if self.keeps_mode(i) {
                        c * self.ik(i, a) * (kappa * self.resolvent(i, gamma))
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let mut flux = self.inverse(grad);
            flux.values
                .par_iter_mut()
                .zip(u_phys.values.par_iter())
                .for_each(|(g, u)| *g *= u);
            let flux_hat = self.forward(&flux)?;
            total
                .par_iter_mut()
                .zip(flux_hat.par_iter())
                .enumerate()
                .for_each(|(i, (t, x))| {
                    if self.keeps_mode(i) {
                        *t += x * self.ik(i, a);
                    }
                });
        }
        Ok(self.inverse(total))
    }

    /// Fraction of `∫ f²` inside the ball of radius `r` about the box centre.
    pub fn energy_fraction_within(&self, f: &TorusField, r: f64) -> Result<f64> {
        self.check(f)?;
        let mut x = vec![0.0; self.grid.dim()];
        let (mut inside, mut total) = (0.0, 0.0);
        for (i, v) in f.values.iter().enumerate() {
            self.grid.position(i, &mut x);
            let e = v * v;
            total += e;
            if x.iter().map(|c| c * c).sum::<f64>() < r * r {
                inside += e;
            }
        }
        Ok(if total == 0.0 { 1.0 } else { inside / total })
    }
}

/// Isotropic Gaussian `mass · (2π s)^{-n/2} exp(−|x|²/2s)` sampled on the grid.
pub fn gaussian(grid: TorusGrid, variance: f64, mass: f64) -> TorusField {
    let n = grid.dim() as f64;
    let norm = mass * (2.0 * std::f64::consts::PI * variance).powf(-0.5 * n);
    TorusField::from_fn(grid, |x| {
        norm * (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * variance)).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2(n: usize, l: f64) -> TorusGrid {
        TorusGrid::new(2, n, l).unwrap()
    }

    fn max_diff(a: &TorusField, b: &TorusField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(0, 16, 1.0).is_err());
        assert!(TorusGrid::new(5, 16, 1.0).is_err());
        assert!(TorusGrid::new(2, 12, 1.0).is_err());
        assert!(TorusGrid::new(2, 4, 1.0).is_err());
        assert!(TorusGrid::new(2, 16, -1.0).is_err());
        let g = TorusGrid::new(3, 16, 8.0).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.wavenumber(8), -2.0 * PI / 8.0 * 8.0);
        assert_eq!(g.wavenumber(15), -2.0 * PI / 8.0);
    }

    #[test]
    fn heat_preserves_constants() {
        let g = grid2(16, 5.0);
        let d = TorusDomain::new(g);
        let f = TorusField::constant(g, 3.25);
        let out = d.heat_apply(&f, 1.7, 0, None).unwrap();
        assert!(max_diff(&out, &f) < 1e-13);
    }

    #[test]
    fn heat_identity_at_zero_time() {
        let g = grid2(32, 10.0);
        let d = TorusDomain::new(g);
        let f = TorusField::from_fn(g, |x| (x[0]).sin() + x[1] * 0.01);
        let out = d.heat_apply(&f, 0.0, 0, None).unwrap();
        assert_eq!(out, f);
        assert!(d.heat_apply(&f, -1.0, 0, None).is_err());
        assert!(matches!(d.heat_apply(&f, 1.0, 2, Some(0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn heat_evolves_gaussian_variance() {
        let g = grid2(128, 30.0);
        let d = TorusDomain::new(g);
        let f = gaussian(g, 1.0, 1.0);
        let t = 0.7;
        let out = d.heat_apply(&f, t, 0, None).unwrap();
        let exact = gaussian(g, 1.0 + 2.0 * t, 1.0);
        assert!(max_diff(&out, &exact) < 1e-10 * exact.max_abs());
    }

    #[test]
    fn heat_gradient_of_gaussian() {
        let g = grid2(128, 30.0);
        let d = TorusDomain::new(g);
        let f = gaussian(g, 1.0, 1.0);
        let t = 0.5;
        let s = 1.0 + 2.0 * t;
        let out = d.heat_apply(&f, t, 1, Some(1)).unwrap();
        let base = gaussian(g, s, 1.0);
        let mut x = vec![0.0; 2];
        let values = (0..g.len())
            .map(|i| {
                g.position(i, &mut x);
                -x[1] / s * base.values()[i]
            })
            .collect();
        let exact = TorusField::new(g, values).unwrap();
        assert!(max_diff(&out, &exact) < 1e-10);
    }

    #[test]
    fn semigroup_composition() {
        let g = grid2(64, 20.0);
        let d = TorusDomain::new(g);
        let f = TorusField::from_fn(g, |x| (-(x[0] - 1.0).powi(2) - 0.5 * x[1] * x[1]).exp());
        let a = d
            .heat_apply(&d.heat_apply(&f, 0.3, 0, None).unwrap(), 0.45, 0, None)
            .unwrap();
        let b = d.heat_apply(&f, 0.75, 0, None).unwrap();
        assert!(max_diff(&a, &b) < 1e-13);
        assert!((a.mean() - f.mean()).abs() < 1e-15);
    }

    #[test]
    fn elliptic_of_constant_and_mode() {
        let g = grid2(32, 10.0);
        let d = TorusDomain::new(g);
        let c = TorusField::constant(g, 1.5);
        let v = d.elliptic_inverse(&c, 1.0, 2.0).unwrap();
        assert!(max_diff(&v, &TorusField::constant(g, 3.0)) < 1e-13);

        let k = 2.0 * PI / 10.0;
        let mode = TorusField::from_fn(g, |x| (k * x[0]).cos());
        let v = d.elliptic_inverse(&mode, 1.0, 2.0).unwrap();
        let expected = TorusField::from_fn(g, |x| 2.0 / (k * k + 1.0) * (k * x[0]).cos());
        assert!(max_diff(&v, &expected) < 1e-13);
        let back = d.helmholtz(&v, 1.0).unwrap();
        let scaled = TorusField::from_fn(g, |x| 2.0 * (k * x[0]).cos());
        assert!(max_diff(&back, &scaled) < 1e-12);
    }

    #[test]
    fn elliptic_zero_gamma_needs_zero_mean() {
        let g = grid2(32, 10.0);
        let d = TorusDomain::new(g);
        let bump = TorusField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let err = d.elliptic_inverse(&bump, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("nonzero-mean"));
        let m = bump.mean();
        let zero_mean = TorusField::new(g, bump.values().iter().map(|v| v - m).collect()).unwrap();
        let v = d.elliptic_inverse(&zero_mean, 0.0, 1.0).unwrap();
        assert!(v.mean().abs() < 1e-15);
        let back = d.helmholtz(&v, 0.0).unwrap();
        assert!(max_diff(&back, &zero_mean) < 1e-10);
    }

    #[test]
    fn lj_of_mode_is_phase_shifted() {
        let g = grid2(32, 10.0);
        let d = TorusDomain::new(g);
        let k = 2.0 * PI / 10.0;
        let mode = TorusField::from_fn(g, |x| (k * x[0]).cos());
        let out = d.lj_apply(&mode, 0, 0.5, 1.0).unwrap();
        let expected = TorusField::from_fn(g, |x| -k / (k * k + 0.5) * (k * x[0]).sin());
        assert!(max_diff(&out, &expected) < 1e-13);
        let c = d.lj_apply(&TorusField::constant(g, 2.0), 1, 0.5, 1.0).unwrap();
        assert!(c.max_abs() < 1e-14);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = grid2(128, 16.0);
        let d = TorusDomain::new(g);
        let f = TorusField::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        let grad = d.gradient(&f).unwrap();
        let div = d.divergence(&grad).unwrap();
        let lap = d.laplacian(&f).unwrap();
        assert!(max_diff(&div, &lap) < 1e-12 * lap.max_abs().max(1.0));
        assert!(div.integral().abs() < 1e-12);
        let zero = d.gradient(&TorusField::constant(g, 4.0)).unwrap();
        assert!(zero.components().iter().all(|c| c.max_abs() < 1e-14));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let d = TorusDomain::new(grid2(16, 4.0));
        let f = TorusField::zeros(grid2(32, 4.0));
        assert!(d.heat_apply(&f, 1.0, 0, None).is_err());
        let a = TorusField::zeros(grid2(16, 4.0));
        assert!(TorusVectorField::new(vec![a, f]).is_err());
    }

    #[test]
    fn dealiasing_removes_high_modes() {
        let g = TorusGrid::new(1, 32, 2.0 * PI).unwrap();
        let d = TorusDomain::new(g);
        let f = TorusField::from_fn(g, |x| (3.0 * x[0]).cos() + (12.0 * x[0]).cos());
        let out = d.dealias(&f).unwrap();
        let expected = TorusField::from_fn(g, |x| (3.0 * x[0]).cos());
        assert!(max_diff(&out, &expected) < 1e-13);
    }

    #[test]
    fn chemotactic_divergence_is_mass_neutral() {
        let g = grid2(64, 16.0);
        let d = TorusDomain::new(g);
        let u = TorusField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let out = d.chemotactic_divergence(&u, &u, 1.0, 1.0).unwrap();
        assert!(out.integral().abs() < 1e-12 * u.max_abs());
        assert!(out.max_abs() > 1e-3);
    }

    #[test]
    fn four_dimensional_smoke() {
        let g = TorusGrid::new(4, 16, 10.0).unwrap();
        let d = TorusDomain::new(g);
        let f = gaussian(g, 1.0, 1.0);
        let out = d.heat_apply(&f, 0.2, 0, None).unwrap();
        assert!(out.is_finite());
        assert!((out.integral() - f.integral()).abs() < 1e-12);
    }
}
