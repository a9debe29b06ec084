//! Time stepping against Picard iteration on the Duhamel quadrature, under
//! refinement of the time step.

use kslab::analysis::uniqueness_experiment;
use kslab::domain::DomainKind;
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::hyperbolic::Propagator;
use kslab::{RadialDomain, RadialField, RadialGrid};

fn main() -> kslab::Result<()> {
    let g = RadialGrid::with_spacing(3, 0.1, 12.0)?;
    let d = RadialDomain::new(g.clone())
        .with_propagator(Propagator::Modal)
        .with_norm_exponent(4.0);
    let params = KSParams::new(1.0, 1.0, 1.0, 3, DomainKind::HyperbolicRadial)?;
    let model = KellerSegel::new(&d, params, ForcingSpec::new(1.0, 0.05, 0.0, 1.0)?)?;
    let u0 = RadialField::from_fn(g, |t| 0.2 * (-t * t).exp());
    let mut prev: Option<f64> = None;
    for dt in [0.02, 0.01, 0.005, 0.0025] {
        let div = uniqueness_experiment(&model, &u0, 0.4, dt, 1e-13)?;
        let order = prev.map(|p| (p / div.relative).log2());
        println!(
            "dt = {dt:<7} relative divergence {:.3e}  Picard iterations {:2}  order {}",
            div.relative,
            div.picard_iterations,
            order.map_or("-".into(), |o| format!("{o:.2}"))
        );
        prev = Some(div.relative);
    }
    Ok(())
}
