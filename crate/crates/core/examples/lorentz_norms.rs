//! Weak and Lorentz norms of sampled fields.

use kslab::lorentz::{lorentz_norm, lorentz_quasinorm, lp_norm, rearrange, LorentzParams};
use kslab::spectral::gaussian;
use kslab::{TorusField, TorusGrid};

fn main() -> kslab::Result<()> {
    let grid = TorusGrid::new(2, 128, 16.0)?;
    let g = gaussian(grid, 1.0, 1.0);

    for p in [1.0, 1.5, 2.0, 4.0] {
        let weak = lorentz_quasinorm(&g, p, f64::INFINITY)?;
        let strong = lp_norm(&g, p);
        println!("p = {p:3}: ‖g‖_(p,∞) = {weak:.6}  ‖g‖_p = {strong:.6}");
    }
    // the f**-based norm is equivalent but larger
    let p = 2.0;
    let a = lorentz_norm(&g, LorentzParams::new(p, p)?)?;
    println!("f** norm for (2,2): {a:.6}, ratio to L² {:.4}", a / lp_norm(&g, p));

    // indicator of the disc of radius 2
    let disc = TorusField::from_fn(grid, |x| if x[0] * x[0] + x[1] * x[1] < 4.0 { 1.0 } else { 0.0 });
    let profile = rearrange(&disc)?;
    println!(
        "disc: measure {:.4} (π·4 = {:.4}), weak L³ norm {:.6}",
        profile.distribution(0.5),
        std::f64::consts::PI * 4.0,
        lorentz_quasinorm(&disc, 3.0, f64::INFINITY)?
    );
    Ok(())
}
