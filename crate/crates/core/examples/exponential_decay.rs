//! Exponentially windowed forcing on H³ and the σ table.

use kslab::analysis::{compute_sigma, fit_exponential};
use kslab::domain::DomainKind;
use kslab::duhamel::{ForcingSpec, KSParams, KellerSegel};
use kslab::{RadialDomain, RadialField, RadialGrid};

fn main() -> kslab::Result<()> {
    let g = RadialGrid::with_spacing(3, 0.1, 30.0)?;
    let d = RadialDomain::new(g.clone()).with_norm_exponent(4.0);
    let params = KSParams::new(1.0, 1.0, 1.0, 3, DomainKind::HyperbolicRadial)?;
    for rate in [0.25, 0.5, 2.0] {
        let spec = ForcingSpec::new(1.0, 0.2, 0.0, 1.0)?.with_window(rate);
        let model = KellerSegel::new(&d, params, spec)?;
        let u0 = RadialField::from_fn(g.clone(), |t| 0.1 * (-t * t).exp());
        let tr = model.solve_mild(&u0, 20.0, 0.01)?;
        let peaks: Vec<(f64, f64)> = tr.norms[1..]
            .chunks(100)
            .enumerate()
            .map(|(k, c)| ((k + 1) as f64, c.iter().copied().fold(0.0, f64::max)))
            .collect();
        let fit = fit_exponential(&peaks, (4.0, 20.0))?;
        println!("window rate {rate}: fitted decay {:.4} (r² {:.6})", fit.rate, fit.r2);
    }
    for p in [3.5, 4.0, 5.0] {
        let s = compute_sigma(p, 3, 1.0)?;
        println!("p = {p}: σ = {:.6}  candidates {:?}", s.sigma, s.candidates);
    }
    Ok(())
}
