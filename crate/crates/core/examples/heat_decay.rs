//! Heat flow on a large periodic box and the `t^{-n/4}` decay of the L² norm.

use kslab::analysis::fit_power;
use kslab::estimates::{heat_l2_series, log_times};
use kslab::spectral::gaussian;
use kslab::{TorusDomain, TorusGrid};

fn main() -> kslab::Result<()> {
    let times = log_times(40.0, 120.0, 12);
    for n in 1..=3 {
        let d = TorusDomain::new(TorusGrid::new(n, 128, 96.0)?);
        let phi = gaussian(*d.grid(), 1.0, 1.0);
        let series = heat_l2_series(&d, &phi, &times)?;
        let fit = fit_power(&series, (40.0, 120.0))?;
        println!(
            "n = {n}: exponent {:.4} (free space −{}), r² {:.8}",
            fit.rate,
            0.25 * n as f64,
            fit.r2
        );
    }
    Ok(())
}
