//! Linear periodic problem: the Cesàro fixed point of the period map against
//! the per-mode closed form, with both summation modes.

use std::f64::consts::PI;

use kslab::domain::{Domain, DomainKind};
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::periodic::{cesaro_fixed_point, CesaroSummation, FixedPointOptions, Frozen, LinearProblem};
use kslab::{TorusDomain, TorusGrid};

fn main() -> kslab::Result<()> {
    let d = TorusDomain::new(TorusGrid::new(2, 32, 10.0)?);
    let spec = ForcingSpec::new(1.0, 0.5, 0.3, 1.0)?;
    let params = KSParams::new(1.0, 0.0, 1.0, 2, DomainKind::Torus)?;
    let model = KellerSegel::new(&d, params, spec)?;
    let problem = LinearProblem::new(&model, Frozen::Zero, 1.0, 1e-4)?;
    let period = problem.assemble(false)?;
    let zeros = vec![Default::default(); period.c.len()];

    let geometric = cesaro_fixed_point(
        &d,
        &period,
        &zeros,
        FixedPointOptions {
            tol: 1e-10,
            ..Default::default()
        },
    )?;
    let explicit = cesaro_fixed_point(
        &d,
        &period,
        &zeros,
        FixedPointOptions {
            tol: 1e-4,
            summation: CesaroSummation::Explicit,
            ..Default::default()
        },
    )?;
    println!(
        "geometric: {} iterations, residual {:.2e}",
        geometric.iterations, geometric.residual
    );
    println!(
        "explicit:  {} iterations, residual {:.2e}",
        explicit.iterations, explicit.residual
    );

    let w = 2.0 * PI;
    let profile = d.to_modes(model.forcing().divergence_profile())?;
    let err = geometric
        .modes
        .iter()
        .zip(&profile)
        .zip(d.eigenvalues())
        .filter(|(_, &l)| l > 0.0)
        .map(|((c, p), &l)| (c - p * (0.5 * (l * 0.3f64.sin() - w * 0.3f64.cos()) / (l * l + w * w))).norm())
        .fold(0.0, f64::max);
    println!("largest modal deviation from the closed form: {err:.2e}");
    Ok(())
}
