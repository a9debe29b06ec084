//! Forced Keller–Segel run on the torus with the ETD2RK stepper.

use kslab::domain::{DomainKind, Field};
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::{TorusDomain, TorusField, TorusGrid};

fn main() -> kslab::Result<()> {
    let d = TorusDomain::new(TorusGrid::new(2, 64, 12.0)?);
    let params = KSParams::new(1.0, 1.0, 1.0, 2, DomainKind::Torus)?;
    let model = KellerSegel::new(&d, params, ForcingSpec::new(1.0, 0.2, 0.0, 1.0)?)?;
    let u0 = TorusField::from_fn(*d.grid(), |x| 0.5 * (-(x[0] * x[0] + x[1] * x[1])).exp());
    let tr = model.solve_mild(&u0, 3.0, 0.01)?;
    for k in (0..tr.len()).step_by(25) {
        println!(
            "t = {:5.2}  ‖u‖ = {:.6e}  max|u| = {:.6e}",
            tr.times[k],
            tr.norms[k],
            tr.snapshots[k].max_abs()
        );
    }
    println!("mass drift {:.2e}", tr.last().integral() - u0.integral());
    Ok(())
}
