//! Command-line front end: one experiment per invocation, driven by a TOML
//! config. Exit status is 0 on success, 1 when a numerical check fails and 2
//! for bad input (config, snapshot or I/O).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{compute_sigma, default_window, fit_kind, FitKind};
use crate::config::{DomainKindName, ExperimentConfig, FitName};
use crate::domain::{Domain, Field};
use crate::duhamel::{ForcingSpec, KellerSegel};
use crate::error::{Error, Result};
use crate::estimates::{self, BilinearSetup, CorpusSummary};
use crate::hyperbolic::{RadialDomain, RadialField, RadialGrid};
use crate::lorentz::HolderExponents;
use crate::periodic::{find_periodic_nonlinear, replay};
use crate::snapshot::{self, SnapshotField};
use crate::spectral::{TorusDomain, TorusField, TorusGrid};

#[derive(Debug, Parser)]
#[command(
    name = "kslab",
    version,
    about = "Forced Keller-Segel experiments on the torus and on H^n"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-step the mild formulation and write `(t, norm, sup)` rows.
    Simulate(Common),
    /// Construct the periodic orbit; writes a report, an orbit CSV and the
    /// initial value as a snapshot.
    FindPeriodic(Common),
    /// Run the estimate harnesses and write a summary table.
    VerifyEstimates(Common),
    /// Fit a power or exponential law to the `norm` column of a CSV.
    FitDecay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Tabulate the exponential rate σ over the configured exponents.
    Sigma(Common),
    /// Replay a stored initial value over several periods.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/<name>_xi.ksfd`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Success,
    /// A numerical check did not hold; the message names it.
    CheckFailed(String),
}

pub fn exit_code(result: &Result<Status>) -> i32 {
    match result {
        Ok(Status::Success) => 0,
        Ok(Status::CheckFailed(_)) => 1,
        Err(Error::Config(_) | Error::Snapshot(_) | Error::Io(_) | Error::Csv(_)) => 2,
        Err(_) => 1,
    }
}

/// Parses the process arguments, runs, prints diagnostics and returns the
/// exit status.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = run(&cli);
    match &result {
        Ok(Status::Success) => {}
        Ok(Status::CheckFailed(msg)) => eprintln!("check failed: {msg}"),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

pub fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Simulate(c) => with_domain(c, Job::Simulate),
        Command::FindPeriodic(c) => with_domain(c, Job::FindPeriodic),
        Command::VerifyEstimates(c) => {
            let (cfg, out) = prepare(c)?;
            match build(&cfg)? {
                Built::Torus(d) => verify_torus(&cfg, &d, &out),
                Built::Radial(d) => verify_radial(&cfg, &d, &out),
            }
        }
        Command::FitDecay { common, csv } => {
            let (cfg, out) = prepare(common)?;
            fit_decay(&cfg, csv, &out)
        }
        Command::Sigma(c) => {
            let (cfg, out) = prepare(c)?;
            sigma_table(&cfg, &out)
        }
        Command::Replay { common, snapshot } => {
            let path = snapshot.clone();
            with_domain(common, Job::Replay(path))
        }
    }
}

fn prepare(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&c.config)?;
    std::fs::create_dir_all(&c.out)?;
    Ok((cfg, c.out.clone()))
}

enum Built {
    Torus(TorusDomain),
    Radial(RadialDomain),
}

fn build(cfg: &ExperimentConfig) -> Result<Built> {
    let d = &cfg.domain;
    let bad = |e: Error| Error::Config(e.to_string());
    Ok(match d.kind {
        DomainKindName::Torus => {
            let grid = TorusGrid::new(d.n, d.points.unwrap_or(0), d.length.unwrap_or(0.0)).map_err(bad)?;
            Built::Torus(TorusDomain::new(grid))
        }
        DomainKindName::HyperbolicRadial => {
            let grid = RadialGrid::new(d.n, d.nodes.unwrap_or(0), d.tau_max.unwrap_or(0.0)).map_err(bad)?;
            let mut dom = RadialDomain::new(grid).with_propagator(cfg.propagator());
            if let Some(p) = d.norm_exponent {
                dom = dom.with_norm_exponent(p);
            }
            Built::Radial(dom)
        }
    })
}

/// Per-geometry pieces the generic jobs need.
trait CliDomain: Domain<Field: SnapshotField> {
    /// `a · exp(−|x|²/2w²)` centred at the origin (pole).
    fn bump(&self, amplitude: f64, width: f64) -> Self::Field;
}

impl CliDomain for TorusDomain {
    fn bump(&self, amplitude: f64, width: f64) -> TorusField {
        TorusField::from_fn(*self.grid(), |x| {
            amplitude * (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp()
        })
    }
}

impl CliDomain for RadialDomain {
    fn bump(&self, amplitude: f64, width: f64) -> RadialField {
        RadialField::from_fn(self.grid().clone(), |t| {
            amplitude * (-t * t / (2.0 * width * width)).exp()
        })
    }
}

enum Job {
    Simulate,
    FindPeriodic,
    Replay(Option<PathBuf>),
}

fn with_domain(c: &Common, job: Job) -> Result<Status> {
    let (cfg, out) = prepare(c)?;
    match build(&cfg)? {
        Built::Torus(d) => dispatch(&cfg, &d, &out, job),
        Built::Radial(d) => dispatch(&cfg, &d, &out, job),
    }
}

fn dispatch<D: CliDomain>(cfg: &ExperimentConfig, dom: &D, out: &Path, job: Job) -> Result<Status> {
    let model = KellerSegel::new(dom, cfg.ks_params()?, cfg.forcing_spec())
        .map_err(|e| Error::Config(e.to_string()))?
        .with_scheme(cfg.scheme());
    match job {
        Job::Simulate => simulate(cfg, &model, out),
        Job::FindPeriodic => find_periodic(cfg, &model, out),
        Job::Replay(path) => replay_snapshot(cfg, &model, out, path),
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn out_file(out: &Path, cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
    out.join(format!("{}{suffix}", cfg.experiment.name))
}

fn simulate<D: CliDomain>(cfg: &ExperimentConfig, model: &KellerSegel<'_, D>, out: &Path) -> Result<Status> {
    let e = &cfg.experiment;
    let u0 = model.domain().bump(e.initial_amplitude, e.initial_width);
    let tr = model.solve_mild(&u0, e.horizon, cfg.solver.dt)?;
    let rows = tr
        .times
        .iter()
        .zip(&tr.norms)
        .zip(&tr.snapshots)
        .step_by(e.output_every)
        .map(|((&t, &n), u)| vec![fmt(t), fmt(n), fmt(u.max_abs())]);
    let path = out_file(out, cfg, ".csv");
    write_csv(&path, &["t", "norm", "sup"], rows)?;
    snapshot::save(tr.last(), &out_file(out, cfg, "_final.ksfd"))?;
    println!("wrote {}", path.display());
    Ok(Status::Success)
}

fn find_periodic<D: CliDomain>(cfg: &ExperimentConfig, model: &KellerSegel<'_, D>, out: &Path) -> Result<Status> {
    let report = find_periodic_nonlinear(model, cfg.periodic_options(), cfg.bound_constants())?;
    let text = report.to_text();
    std::fs::write(out_file(out, cfg, "_report.txt"), &text)?;
    snapshot::save(&report.xi_hat, &out_file(out, cfg, "_xi.ksfd"))?;
    let o = &report.orbit;
    let rows = o
        .times
        .iter()
        .zip(&o.norms)
        .zip(&o.snapshots)
        .step_by(cfg.experiment.output_every)
        .map(|((&t, &n), u)| vec![fmt(t), fmt(n), fmt(u.max_abs())]);
    write_csv(&out_file(out, cfg, "_orbit.csv"), &["t", "norm", "sup"], rows)?;
    print!("{text}");
    let tol = cfg.experiment.residual_tol;
    if !(report.relative_residual <= tol) {
        return Ok(Status::CheckFailed(format!(
            "periodicity residual {:e} exceeds {tol:e}",
            report.relative_residual
        )));
    }
    if let Some(b) = report.bound_check {
        if !(report.xi_norm <= b) {
            return Ok(Status::CheckFailed(format!(
                "a-priori bound violated: ‖ξ̂‖ = {:e} > {b:e}",
                report.xi_norm
            )));
        }
    }
    Ok(Status::Success)
}

fn replay_snapshot<D: CliDomain>(
    cfg: &ExperimentConfig,
    model: &KellerSegel<'_, D>,
    out: &Path,
    path: Option<PathBuf>,
) -> Result<Status> {
    let path = path.unwrap_or_else(|| out_file(out, cfg, "_xi.ksfd"));
    let xi: D::Field = snapshot::load(&path)?;
    model
        .domain()
        .check(&xi)
        .map_err(|e| Error::Config(format!("snapshot does not fit the configured grid: {e}")))?;
    let dist = replay(model, &xi, cfg.experiment.periods, cfg.solver.dt)?;
    let rows = dist.iter().enumerate().map(|(k, &d)| vec![(k + 1).to_string(), fmt(d)]);
    write_csv(&out_file(out, cfg, "_replay.csv"), &["period", "distance"], rows)?;
    let drift = dist.iter().copied().fold(0.0, f64::max);
    println!("residual: {}", fmt(dist.first().copied().unwrap_or(0.0)));
    println!("drift: {}", fmt(drift));
    if !drift.is_finite() {
        return Ok(Status::CheckFailed("replay diverged".into()));
    }
    Ok(Status::Success)
}

/// Reads `(t, norm)` pairs; columns are found by header name, falling back
/// to the first two columns.
pub fn read_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str, fallback: usize| headers.iter().position(|h| h.trim() == name).unwrap_or(fallback);
    let (it, iv) = (find("t", 0), find("norm", 1));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let field = rec
                .get(i)
                .ok_or_else(|| Error::Config(format!("row with fewer than {} columns", i + 1)))?;
            field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number {field:?}: {e}")))
        };
        out.push((num(it)?, num(iv)?));
    }
    Ok(out)
}

/// Maxima of `series` over consecutive intervals `((k−1)T, kT]`, placed at `kT`.
pub fn period_maxima(series: &[(f64, f64)], period: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(t, v) in series {
        if t <= 0.0 {
            continue;
        }
        let k = (t / period - 1e-9).ceil().max(1.0);
        match out.last_mut() {
            Some(last) if last.0 == k * period => last.1 = last.1.max(v),
            _ => out.push((k * period, v)),
        }
    }
    out
}

fn fit_decay(cfg: &ExperimentConfig, csv: &Path, out: &Path) -> Result<Status> {
    let mut series = read_series(csv)?;
    if cfg.experiment.envelope {
        series = period_maxima(&series, cfg.forcing.period);
    }
    let t_max = series.iter().map(|p| p.0).fold(0.0, f64::max);
    let window = cfg
        .experiment
        .fit_window
        .map(|[a, b]| (a, b))
        .unwrap_or_else(|| default_window(t_max));
    let kind = match cfg.experiment.fit {
        Some(FitName::Power) => FitKind::Power,
        Some(FitName::Exponential) => FitKind::Exponential,
        None => match cfg.domain.kind {
            DomainKindName::Torus => FitKind::Power,
            DomainKindName::HyperbolicRadial => FitKind::Exponential,
        },
    };
    let fit = match fit_kind(&series, window, kind) {
        Ok(f) => f,
        Err(Error::Domain(msg)) => return Ok(Status::CheckFailed(msg)),
        Err(e) => return Err(e),
    };
    let text = format!(
        "kind: {}\nrate: {}\nprefactor: {}\nr2: {}\nwindow: {},{}\npoints: {}\n",
        kind.name(),
        fmt(fit.rate),
        fmt(fit.prefactor),
        fmt(fit.r2),
        fmt(fit.window.0),
        fmt(fit.window.1),
        fit.points
    );
    std::fs::write(out_file(out, cfg, "_fit.txt"), &text)?;
    print!("{text}");
    Ok(Status::Success)
}

fn sigma_table(cfg: &ExperimentConfig, out: &Path) -> Result<Status> {
    let n = cfg.domain.n;
    let ps: Vec<f64> = if cfg.experiment.sigma_p.is_empty() {
        (1..8).map(|k| n as f64 * (1.0 + k as f64 / 8.0)).collect()
    } else {
        cfg.experiment.sigma_p.clone()
    };
    let mut rows = Vec::with_capacity(ps.len());
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "p", "sigma", "c1", "c2", "c3");
    for &p in &ps {
        let s = compute_sigma(p, n, cfg.params.delta_n).map_err(|e| Error::Config(e.to_string()))?;
        println!(
            "{p:>8.4} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            s.sigma, s.candidates[0], s.candidates[1], s.candidates[2]
        );
        let mut row = vec![fmt(p), fmt(s.sigma)];
        row.extend(s.candidates.iter().map(|&c| fmt(c)));
        rows.push(row);
    }
    write_csv(
        &out_file(out, cfg, "_sigma.csv"),
        &["p", "sigma", "candidate_1", "candidate_2", "candidate_3"],
        rows,
    )?;
    Ok(Status::Success)
}

struct Row {
    name: &'static str,
    summary: CorpusSummary,
}

fn write_summary(cfg: &ExperimentConfig, out: &Path, rows: &[Row]) -> Result<Status> {
    println!(
        "{:<20} {:>6} {:>14} {:>14} {:>10}",
        "harness", "count", "min", "max", "spread"
    );
    for r in rows {
        let s = r.summary;
        println!(
            "{:<20} {:>6} {:>14.6e} {:>14.6e} {:>10.4}",
            r.name,
            s.count,
            s.min,
            s.max,
            s.spread()
        );
    }
    write_csv(
        &out_file(out, cfg, "_estimates.csv"),
        &["harness", "count", "min", "max", "spread"],
        rows.iter().map(|r| {
            let s = r.summary;
            vec![
                r.name.to_string(),
                s.count.to_string(),
                fmt(s.min),
                fmt(s.max),
                fmt(s.spread()),
            ]
        }),
    )?;
    match rows.iter().find(|r| !r.summary.is_finite()) {
        Some(r) => Ok(Status::CheckFailed(format!(
            "{} ratios are not finite and positive",
            r.name
        ))),
        None => Ok(Status::Success),
    }
}

const CORPUS: usize = 8;

fn verify_torus(cfg: &ExperimentConfig, dom: &TorusDomain, out: &Path) -> Result<Status> {
    let grid = *dom.grid();
    let n = grid.dim() as f64;
    let seed = cfg.experiment.seed;
    let bumps: Vec<TorusField> =
        estimates::random_bumps(grid.dim(), CORPUS, grid.length() / 16.0, grid.length() / 8.0, seed)
            .iter()
            .map(|b| b.sample(grid))
            .collect();
    let mut rows = Vec::new();

    let holder = HolderExponents {
        p1: 4.0,
        r1: 2.0,
        p2: 4.0,
        r2: 2.0,
        p3: 2.0,
        r3: 1.0,
    };
    let h = estimates::holder_corpus(grid, CORPUS, holder, seed)?;
    rows.push(Row {
        name: "holder",
        summary: CorpusSummary::of(&h),
    });

    let times = estimates::log_times(1e-3 * grid.length().powi(2), 0.05 * grid.length().powi(2), 12);
    for (name, m) in [("dispersive_m0", 0), ("dispersive_m1", 1)] {
        let v = bumps
            .iter()
            .map(|b| estimates::dispersive_sup(dom, b, m, 2.0, 4.0, &times))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            name,
            summary: CorpusSummary::of(&v),
        });
    }

    let y = bumps
        .iter()
        .map(|b| estimates::yamazaki_ratio(dom, b, 4.0 / 3.0, 2.0, 1e-4, 0.01).map(|y| y.ratio))
        .collect::<Result<Vec<_>>>()?;
    rows.push(Row {
        name: "yamazaki",
        summary: CorpusSummary::of(&y),
    });

    let lj = bumps
        .iter()
        .map(|b| estimates::lj_ratio(dom, &dom.zero_mode_policy(b), 0, cfg.params.gamma, 0.5 * n))
        .collect::<Result<Vec<_>>>();
    if let Ok(lj) = lj {
        rows.push(Row {
            name: "elliptic_lj",
            summary: CorpusSummary::of(&lj),
        });
    }

    let dt = cfg.solver.dt;
    let setup = BilinearSetup {
        gamma: cfg.params.gamma,
        horizon: cfg.experiment.horizon,
        dt,
        sample_every: estimates_sample_every(cfg),
        tau_step: 0.5 * dt,
    };
    let b: Vec<f64> = (0..CORPUS / 2)
        .map(|k| {
            let u0 = dom.zero_mode_policy(&bumps[2 * k]);
            let w0 = dom.zero_mode_policy(&bumps[2 * k + 1]);
            estimates::bilinear_ratio(dom, &u0, &w0, setup).map(|s| s.ratio)
        })
        .collect::<Result<_>>()?;
    rows.push(Row {
        name: "bilinear",
        summary: CorpusSummary::of(&b),
    });
    rows.push(linear_row(cfg, dom)?);
    write_summary(cfg, out, &rows)
}

fn estimates_sample_every(cfg: &ExperimentConfig) -> usize {
    let steps = (cfg.experiment.horizon / cfg.solver.dt).round().max(1.0) as usize;
    (steps / 8).max(1)
}

fn linear_row<D: Domain>(cfg: &ExperimentConfig, dom: &D) -> Result<Row> {
    let spec = cfg.forcing_spec();
    let spec = if spec.is_zero() {
        ForcingSpec { amplitude: 1.0, ..spec }
    } else {
        spec
    };
    let h = cfg.experiment.horizon;
    let l = estimates::linear_ratio(dom, spec, h, h / 8.0, 0.5 * cfg.solver.dt)?;
    Ok(Row {
        name: "linear",
        summary: CorpusSummary::of(&[l.ratio]),
    })
}

fn verify_radial(cfg: &ExperimentConfig, dom: &RadialDomain, out: &Path) -> Result<Status> {
    let grid = dom.grid().clone();
    let p = dom.norm_exponent();
    let widths: Vec<f64> = (0..CORPUS).map(|k| 0.5 + 0.25 * k as f64).collect();
    let corpus: Vec<RadialField> = widths.iter().map(|&w| dom.bump(1.0, w)).collect();
    let mut rows = Vec::new();

    let e = corpus
        .iter()
        .map(|f| estimates::elliptic_gradient_ratio(dom, f, cfg.params.gamma, 1.0, p))
        .collect::<Result<Vec<_>>>()?;
    rows.push(Row {
        name: "elliptic_gradient",
        summary: CorpusSummary::of(&e),
    });

    let gap = grid.spectral_gap();
    let times: Vec<f64> = (1..=16).map(|k| k as f64 * 0.5 / gap.max(0.05)).collect();
    let window = (times[3], times[15]);
    let rates = corpus
        .iter()
        .map(|f| estimates::pierfelice_fit(dom, f, 2.0, 2.0, &times, window).map(|fit| fit.rate / gap))
        .collect::<Result<Vec<_>>>()?;
    rows.push(Row {
        name: "l2_decay_over_gap",
        summary: CorpusSummary::of(&rates),
    });

    let dt = cfg.solver.dt;
    let setup = BilinearSetup {
        gamma: cfg.params.gamma,
        horizon: cfg.experiment.horizon,
        dt,
        sample_every: estimates_sample_every(cfg),
        tau_step: 0.5 * dt,
    };
    let b: Vec<f64> = (0..CORPUS / 2)
        .map(|k| estimates::bilinear_ratio(dom, &corpus[2 * k], &corpus[2 * k + 1], setup).map(|s| s.ratio))
        .collect::<Result<_>>()?;
    rows.push(Row {
        name: "bilinear",
        summary: CorpusSummary::of(&b),
    });
    rows.push(linear_row(cfg, dom)?);
    write_summary(cfg, out, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_maxima_bins_by_period() {
        let s: Vec<(f64, f64)> = (0..=8)
            .map(|k| (0.25 * k as f64, [0.0, 1.0, 3.0, 2.0, 0.5, 0.1, 0.7, 0.2, 0.4][k]))
            .collect();
        assert_eq!(period_maxima(&s, 1.0), vec![(1.0, 3.0), (2.0, 0.7)]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(Status::Success)), 0);
        assert_eq!(exit_code(&Ok(Status::CheckFailed("x".into()))), 1);
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 2);
        assert_eq!(exit_code(&Err(Error::BlowUp { t: 1.0 })), 1);
    }
}
