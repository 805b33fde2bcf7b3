//! `aoc`: command-line front end for spectra, gamma routes, overlap metrics,
//! thermodynamic sweeps and inequality audits.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use aoc_core::metrics::{analyze, metrics_grid};
use aoc_core::operators::{contour_anderson, ContourOptions};
use aoc_core::perturbed::{minimal_bargmann_constant, perturbed_spectrum};
use aoc_core::sweep::{gamma_report, resolve_workers, run_sweep_with_workers, write_outputs, SweepSection};
use aoc_core::{
    bargmann_upper_bound, bounds_audit, count_below, counting_lower_bound, free_eigenvalue, DetBoundReport, Error,
    GridParams, Potential, PotentialSpec, PruferOptions, SmallnessReport, SweepConfig, SystemConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "aoc",
    version,
    about = "Orthogonality-catastrophe laboratory for 1D Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Free and perturbed Dirichlet eigenvalues with counting bounds at the Fermi energy.
    Spectrum(InstanceArgs),
    /// gamma(nu) by the scattering, trace and matrix routes.
    Gamma(GammaArgs),
    /// Overlap metrics for one (N, rho), optionally cross-checked by the contour route.
    Anderson(AndersonArgs),
    /// Thermodynamic-limit sweep over N with a slope fit.
    Sweep(SweepArgs),
    /// Operator and determinant inequalities on the Fermi parabola.
    Audit(AuditArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
#[value(rename_all = "snake_case")]
enum Family {
    SquareWell,
    GaussianTruncated,
    Table,
}

/// Potential, grid and solver settings shared by all subcommands. Flags
/// override values read from `--config`.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Potential family.
    #[arg(long, value_enum)]
    potential: Option<Family>,
    /// Amplitude (square well, gaussian); negative is attractive.
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Support half-width.
    #[arg(long)]
    a: Option<f64>,
    /// Gaussian width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Table abscissae, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    abscissae: Option<Vec<f64>>,
    /// Table values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Quadrature panels per local wavelength (default 16, at least 8).
    #[arg(long)]
    nodes_per_wavelength: Option<usize>,
    /// Gauss-Legendre nodes per panel (default 12).
    #[arg(long)]
    nodes_per_panel: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    #[command(flatten)]
    common: Common,
    /// Particle number.
    #[arg(long = "N", alias = "n")]
    n: usize,
    /// Density; `L = (N + 1/2) / (2 rho)`.
    #[arg(long)]
    rho: Option<f64>,
    /// Box half-length, instead of `--rho`.
    #[arg(long = "L", conflicts_with = "rho")]
    l: Option<f64>,
}

#[derive(Args, Debug)]
struct GammaArgs {
    #[command(flatten)]
    common: Common,
    /// Energy; defaults to `pi^2 rho^2`.
    #[arg(long)]
    nu: Option<f64>,
    /// Density; sets `nu = pi^2 rho^2`.
    #[arg(long, conflicts_with = "nu")]
    rho: Option<f64>,
}

#[derive(Args, Debug)]
struct AndersonArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Also evaluate the Anderson integral by the contour route.
    #[arg(long)]
    contour: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Density; `L = (N + 1/2) / (2 rho)` for every N.
    #[arg(long)]
    rho: Option<f64>,
    /// Particle numbers, comma separated and increasing.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Smallest N in the fit window.
    #[arg(long)]
    fit_min_n: Option<usize>,
    /// Worker threads; overrides AOC_WORKERS and the config file.
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path; the CSV goes to stdout when no path is configured.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Contour parameters `s` to audit, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-2,-0.5,0,0.5,2"
    )]
    samples: Vec<f64>,
}

type CliResult<T> = Result<T, Error>;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outp {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// Configuration file contents; every section optional.
#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    potential: Option<PotentialSpec>,
    sweep: Option<SweepSection>,
    grid: Option<GridParams>,
    tolerances: Option<PruferOptions>,
    output: Option<aoc_core::sweep::OutputSection>,
}

impl Common {
    fn file(&self) -> CliResult<FileConfig> {
        match &self.config {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    fn spec(&self, file: &FileConfig) -> CliResult<PotentialSpec> {
        let base = file.potential.clone();
        let family = match (self.potential, &base) {
            (Some(f), _) => f,
            (None, Some(PotentialSpec::SquareWell { .. })) => Family::SquareWell,
            (None, Some(PotentialSpec::GaussianTruncated { .. })) => Family::GaussianTruncated,
            (None, Some(PotentialSpec::Table { .. })) => Family::Table,
            (None, None) => return Err(Error::Config("no potential: pass --potential or --config".into())),
        };
        let need = |flag: Option<f64>, from: Option<f64>, name: &str| {
            flag.or(from)
                .ok_or_else(|| Error::Config(format!("--{name} is required for this potential")))
        };
        Ok(match family {
            Family::SquareWell => {
                let (v0, a) = match base {
                    Some(PotentialSpec::SquareWell { v0, a }) => (Some(v0), Some(a)),
                    _ => (None, None),
                };
                PotentialSpec::SquareWell {
                    v0: need(self.v0, v0, "v0")?,
                    a: need(self.a, a, "a")?,
                }
            }
            Family::GaussianTruncated => {
                let (v0, sigma, a) = match base {
                    Some(PotentialSpec::GaussianTruncated { v0, sigma, a }) => (Some(v0), Some(sigma), Some(a)),
                    _ => (None, None, None),
                };
                PotentialSpec::GaussianTruncated {
                    v0: need(self.v0, v0, "v0")?,
                    sigma: need(self.sigma, sigma, "sigma")?,
                    a: need(self.a, a, "a")?,
                }
            }
            Family::Table => {
                let (xs, vs) = match base {
                    Some(PotentialSpec::Table { abscissae, values }) => (Some(abscissae), Some(values)),
                    _ => (None, None),
                };
                PotentialSpec::Table {
                    abscissae: self
                        .abscissae
                        .clone()
                        .or(xs)
                        .ok_or_else(|| Error::Config("--abscissae is required for a table".into()))?,
                    values: self
                        .values
                        .clone()
                        .or(vs)
                        .ok_or_else(|| Error::Config("--values is required for a table".into()))?,
                }
            }
        })
    }

    fn grid(&self, file: &FileConfig) -> GridParams {
        let mut g = file.grid.unwrap_or_default();
        if let Some(n) = self.nodes_per_wavelength {
            g.nodes_per_wavelength = n;
        }
        if let Some(n) = self.nodes_per_panel {
            g.nodes_per_panel = n;
        }
        g
    }

    fn tolerances(&self, file: &FileConfig) -> CliResult<PruferOptions> {
        let t = file.tolerances.unwrap_or_default();
        t.validate()?;
        Ok(t)
    }
}

/// Potential, grid, tolerances and system size of a single-instance command.
struct Instance {
    v: Potential,
    grid: GridParams,
    opts: PruferOptions,
    sys: SystemConfig,
}

impl InstanceArgs {
    fn resolve(&self) -> CliResult<Instance> {
        let file = self.common.file()?;
        let v = Potential::new(self.common.spec(&file)?)?;
        let sys = match (self.l, self.rho, file.sweep.as_ref().map(|s| s.rho)) {
            (Some(l), _, _) => SystemConfig::from_box(self.n, l)?,
            (None, Some(rho), _) | (None, None, Some(rho)) => SystemConfig::thermodynamic(rho, self.n)?,
            (None, None, None) => return Err(Error::Config("pass --rho or --L".into())),
        };
        if sys.n == 0 {
            return Err(Error::Config("N must be >= 1".into()));
        }
        if sys.l <= v.support_half_width() {
            return Err(Error::Config(format!(
                "box half-length {} does not contain the support [-{a}, {a}]",
                sys.l,
                a = v.support_half_width()
            )));
        }
        Ok(Instance {
            v,
            grid: self.common.grid(&file),
            opts: self.common.tolerances(&file)?,
            sys,
        })
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Invariant(e.to_string()))?;
    out!("{s}");
    Ok(())
}

fn spectrum(args: &InstanceArgs) -> CliResult<ExitCode> {
    let inst = args.resolve()?;
    let SystemConfig { n, l, nu, .. } = inst.sys;
    let mu = perturbed_spectrum(n, &inst.v, l, &inst.opts)?;
    let m = count_below(nu, &inst.v, l, &inst.opts)?;
    let c = minimal_bargmann_constant(&inst.v, 1.0);
    let upper = bargmann_upper_bound(nu, &inst.v, 1.0, c, l)?;
    let lower = counting_lower_bound(nu, &inst.v, l).ok();
    if args.common.json {
        let rows: Vec<_> = mu
            .iter()
            .enumerate()
            .map(|(i, &x)| serde_json::json!({"k": i + 1, "lambda": free_eigenvalue(i + 1, l), "mu": x}))
            .collect();
        print_json(&serde_json::json!({
            "system": inst.sys,
            "eigenvalues": rows,
            "count_below_nu": m,
            "counting_lower_bound": lower,
            "bargmann_upper_bound": upper,
        }))?;
    } else {
        out!("N = {n}, L = {l}, nu = {nu}");
        out!("{:>5} {:>22} {:>22} {:>14}", "k", "lambda_k", "mu_k", "mu_k-lambda_k");
        for (i, &x) in mu.iter().enumerate() {
            let lam = free_eigenvalue(i + 1, l);
            out!("{:>5} {:>22.15e} {:>22.15e} {:>14.6e}", i + 1, lam, x, x - lam);
        }
        let lo = lower.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        out!("count below nu: M = {m}; bounds [{lo}, {upper:.6}]");
    }
    Ok(ExitCode::SUCCESS)
}

fn gamma(args: &GammaArgs) -> CliResult<ExitCode> {
    let file = args.common.file()?;
    let v = Potential::new(args.common.spec(&file)?)?;
    let nu = match (args.nu, args.rho, file.sweep.as_ref().map(|s| s.rho)) {
        (Some(nu), _, _) => nu,
        (None, Some(rho), _) | (None, None, Some(rho)) => std::f64::consts::PI.powi(2) * rho * rho,
        (None, None, None) => return Err(Error::Config("pass --nu or --rho".into())),
    };
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Config(format!("nu must be > 0, got {nu}")));
    }
    let g = gamma_report(&v, nu, args.common.grid(&file))?;
    if args.common.json {
        print_json(&g)?;
    } else {
        out!("nu                   = {}", g.nu);
        out!("gamma_scattering     = {:.15e}", g.gamma_scattering);
        out!("gamma_gkm            = {:.15e}", g.gamma_gkm);
        out!("gamma_matrix         = {:.15e}", g.gamma_matrix);
        out!("gamma_matrix_refined = {:.15e}", g.gamma_matrix_refined);
        out!("|gkm - scattering|   = {:.3e}", g.diff_gkm_scattering);
        out!("|matrix - scattering|= {:.3e}", g.diff_matrix_scattering);
        out!("|matrix - gkm|       = {:.3e}", g.diff_matrix_gkm);
        out!("matrix self-conv.    = {:.3e}", g.matrix_self_convergence);
        out!("unitarity defect     = {:.3e}", g.unitarity_defect);
        if g.matrix_flag {
            eprintln!("warning: matrix route deviates by more than 10x its self-convergence estimate");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn anderson(args: &AndersonArgs) -> CliResult<ExitCode> {
    let inst = args.instance.resolve()?;
    let SystemConfig { n, l, .. } = inst.sys;
    let grid = metrics_grid(&inst.v, n, l, inst.grid)?;
    let r = analyze(n, &inst.v, l, &grid, &inst.opts)?;
    let bounds = DetBoundReport::new(&r, inst.v.norms().l1);
    let contour = if args.contour {
        Some(contour_anderson(n, &inst.v, l, &grid, ContourOptions::default())?)
    } else {
        None
    };
    if args.instance.common.json {
        let mut c = contour.clone();
        if let Some(c) = c.as_mut() {
            c.samples.clear();
        }
        print_json(&serde_json::json!({"result": r, "bounds": bounds, "contour": c}))?;
    } else {
        out!("N = {n}, L = {l}, nu = {}", r.nu);
        out!("I          = {:.15e}", r.anderson_integral);
        out!("lnD        = {:.15e}", r.ln_d);
        out!("D          = {:.15e}", r.transition_probability);
        out!("defect     = {:.6e}", r.defect_norm);
        out!("M          = {}", r.m);
        out!("D <= e^-I  : {}", bounds.upper_holds);
        if let Some(s) = bounds.sandwich_holds {
            out!("sandwich   : {s}");
        }
        if let Some(c) = &contour {
            out!(
                "I contour  = {:.15e} (|diff| {:.3e}, s_cut {}, J_max {})",
                c.value,
                (c.value - r.anderson_integral).abs(),
                c.s_cut,
                c.j_max
            );
            if r.m != n {
                eprintln!(
                    "warning: M = {} differs from N = {n}; the contour route targets P_N vs Pi_M",
                    r.m
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &SweepArgs) -> CliResult<ExitCode> {
    let file = args.common.file()?;
    let spec = args.common.spec(&file)?;
    let mut section = file.sweep.clone().unwrap_or(SweepSection {
        rho: f64::NAN,
        n_list: Vec::new(),
        fit_min_n: None,
        workers: None,
    });
    if let Some(rho) = args.rho {
        section.rho = rho;
    }
    if let Some(list) = &args.n_list {
        section.n_list = list.clone();
    }
    if args.fit_min_n.is_some() {
        section.fit_min_n = args.fit_min_n;
    }
    if section.n_list.is_empty() {
        return Err(Error::Config(
            "no particle numbers: pass --n-list or a [sweep] section".into(),
        ));
    }
    let mut output = file.output.clone().unwrap_or_default();
    if args.csv.is_some() {
        output.csv = args.csv.clone();
    }
    if args.json_out.is_some() {
        output.json = args.json_out.clone();
    }
    let config = SweepConfig {
        potential: spec,
        sweep: section,
        grid: args.common.grid(&file),
        tolerances: args.common.tolerances(&file)?,
        output,
    };
    config.validate()?;
    let workers = match args.workers {
        Some(0) => return Err(Error::Config("--workers must be >= 1".into())),
        Some(w) => w,
        None => resolve_workers(config.sweep.workers)?,
    };
    let result = run_sweep_with_workers(&config, workers)?;
    write_outputs(&config, &result)?;
    if config.output.csv.is_none() {
        outp!("{}", result.to_csv());
    }
    if args.common.json && config.output.json.is_none() {
        out!("{}", result.to_json());
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match &result.fit {
        Some(f) => {
            eprintln!(
                "gamma_fit = {:.6e} over N in {:?}; gamma_scattering = {:.6e}; relative error {:.3e}",
                f.gamma_fit, f.window, result.gamma.gamma_scattering, f.relative_error
            );
            Ok(ExitCode::SUCCESS)
        }
        None => {
            eprintln!("error: slope fit unavailable");
            Ok(ExitCode::from(1))
        }
    }
}

fn audit(args: &AuditArgs) -> CliResult<ExitCode> {
    let inst = args.instance.resolve()?;
    let SystemConfig { n, l, nu, .. } = inst.sys;
    let grid = metrics_grid(&inst.v, n, l, inst.grid)?;
    let report = bounds_audit(&inst.v, n, l, &grid, &args.samples)?;
    if args.instance.common.json {
        print_json(&report)?;
    } else {
        let small = SmallnessReport::new(report.norms.l1, nu);
        for w in small.warnings() {
            eprintln!("warning: {w}");
        }
        for it in &report.items {
            let s = it.s.map_or(String::new(), |s| format!(" s={s}"));
            out!(
                "{} {}{s}: {:.6e} <= {:.6e} (margin {:.3e})",
                if it.pass { "PASS" } else { "FAIL" },
                it.name,
                it.lhs,
                it.rhs,
                it.margin
            );
        }
    }
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Gamma(a) => gamma(a),
        Command::Anderson(a) => anderson(a),
        Command::Sweep(a) => sweep(a),
        Command::Audit(a) => audit(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
