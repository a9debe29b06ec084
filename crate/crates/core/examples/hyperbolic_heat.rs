//! Radial heat flow on H³: Crank–Nicolson against the closed-form kernel and
//! the exponential decay set by the spectral gap.

use kslab::domain::Field;
use kslab::estimates::pierfelice_fit;
use kslab::hyperbolic::h3_heat_kernel;
use kslab::{RadialDomain, RadialField, RadialGrid};

fn main() -> kslab::Result<()> {
    let grid = RadialGrid::with_spacing(3, 0.01, 25.0)?;
    let d = RadialDomain::new(grid.clone());
    let mut u = RadialField::from_fn(grid.clone(), |r| h3_heat_kernel(0.5, r));
    let h = 1e-3;
    for _ in 0..1000 {
        u = d.cn_apply(&u, h)?;
    }
    let exact = RadialField::from_fn(grid, |r| h3_heat_kernel(1.5, r));
    println!(
        "kernel error at t = 1.5: {:.3e}",
        u.sub(&exact).max_abs() / exact.max_abs()
    );

    let wide = RadialGrid::with_spacing(3, 0.1, 60.0)?;
    let dw = RadialDomain::new(wide.clone());
    let bump = RadialField::from_fn(wide.clone(), |t| (-t * t).exp());
    let times: Vec<f64> = (0..=24).map(|k| 15.0 + 2.5 * k as f64).collect();
    let fit = pierfelice_fit(&dw, &bump, 2.0, 2.0, &times, (15.0, 75.0))?;
    println!(
        "L² e-folding rate {:.4}, spectral gap {}",
        fit.rate,
        wide.spectral_gap()
    );
    Ok(())
}
