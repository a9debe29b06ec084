//! Periodic orbit of the forced system by the outer Φ iteration, then a
//! three-period replay.

use kslab::domain::DomainKind;
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::periodic::{find_periodic_nonlinear, replay, PeriodicOptions};
use kslab::{TorusDomain, TorusGrid};

fn main() -> kslab::Result<()> {
    let d = TorusDomain::new(TorusGrid::new(2, 32, 10.0)?);
    let params = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus)?;
    let model = KellerSegel::new(&d, params, ForcingSpec::new(1.0, 0.2, 0.0, 1.0)?)?;
    let options = PeriodicOptions {
        dt: 0.01,
        tol_outer: 1e-10,
        ..Default::default()
    };
    let report = find_periodic_nonlinear(&model, options, None)?;
    print!("{}", report.to_text());
    let drift = replay(&model, &report.xi_hat, 3, options.dt)?;
    for (k, x) in drift.iter().enumerate() {
        println!("after period {}: distance {x:.3e}", k + 1);
    }
    Ok(())
}
