//! Decay of a perturbation of the periodic orbit on a large torus, fitted to
//! a power law in weak L².

use kslab::analysis::{default_window, stability_experiment, FitKind};
use kslab::domain::DomainKind;
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::estimates::weak;
use kslab::periodic::{find_periodic_nonlinear, PeriodicOptions};
use kslab::spectral::gaussian;
use kslab::{TorusDomain, TorusField, TorusGrid};

fn main() -> kslab::Result<()> {
    let d = TorusDomain::new(TorusGrid::new(2, 64, 32.0)?);
    let params = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus)?;
    let model = KellerSegel::new(&d, params, ForcingSpec::new(1.0, 0.2, 0.0, 1.0)?)?;
    let dt = 0.02;
    let orbit = find_periodic_nonlinear(
        &model,
        PeriodicOptions {
            dt,
            ..Default::default()
        },
        None,
    )?;
    let horizon = 8.0;
    for eps in [1e-3, 5e-4] {
        let kick = gaussian(*d.grid(), 1.0, eps);
        let r = stability_experiment(
            &model,
            &orbit.xi_hat,
            &kick,
            horizon,
            dt,
            |f: &TorusField| weak(f, 2.0).unwrap_or(f64::NAN),
            Some(default_window(horizon)),
            FitKind::Power,
        )?;
        let fit = r.fit.expect("window given");
        println!("ε = {eps:.0e}: power {:.4}, r² {:.6}", fit.rate, fit.r2);
    }
    Ok(())
}
