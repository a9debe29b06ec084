//! Empirical constants of the smoothing, Yamazaki, bilinear and linear
//! estimates on a corpus of random bumps.

use kslab::domain::Domain;
use kslab::duhamel::ForcingSpec;
use kslab::estimates::{self, BilinearSetup, CorpusSummary};
use kslab::{TorusDomain, TorusGrid};

fn main() -> kslab::Result<()> {
    let d = TorusDomain::new(TorusGrid::new(2, 64, 16.0)?);
    let bumps: Vec<_> = estimates::random_bumps(2, 8, 1.0, 2.0, 4)
        .iter()
        .map(|b| b.sample(*d.grid()))
        .collect();

    let times = estimates::log_times(0.01, 10.0, 16);
    let disp = bumps
        .iter()
        .map(|b| estimates::dispersive_sup(&d, b, 1, 2.0, 4.0, &times))
        .collect::<kslab::Result<Vec<_>>>()?;
    let s = CorpusSummary::of(&disp);
    println!("gradient smoothing: {:.4e} .. {:.4e}", s.min, s.max);

    let y = bumps
        .iter()
        .map(|b| estimates::yamazaki_ratio(&d, b, 4.0 / 3.0, 2.0, 1e-4, 0.01).map(|r| r.ratio))
        .collect::<kslab::Result<Vec<_>>>()?;
    let s = CorpusSummary::of(&y);
    println!(
        "Yamazaki ratios: {:.4e} .. {:.4e}, spread {:.3}",
        s.min,
        s.max,
        s.spread()
    );

    let setup = BilinearSetup {
        gamma: 1.0,
        horizon: 0.5,
        dt: 0.01,
        sample_every: 10,
        tau_step: 0.005,
    };
    let u0 = d.zero_mode_policy(&bumps[0]);
    let w0 = d.zero_mode_policy(&bumps[1]);
    let b = estimates::bilinear_ratio(&d, &u0, &w0, setup)?;
    println!("bilinear: ‖B‖ = {:.4e}, K̂ ≈ {:.4e}", b.b_norm, b.ratio);
    let l = estimates::linear_ratio(&d, ForcingSpec::new(1.0, 1.0, 0.3, 1.5)?, 1.0, 0.125, 0.005)?;
    println!("linear: ‖L(f)‖ = {:.4e}, C̃ ≈ {:.4e}", l.l_norm, l.ratio);
    Ok(())
}
