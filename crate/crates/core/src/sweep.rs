//! Thermodynamic-limit sweeps at fixed density, the three-route `gamma`
//! report and the CSV/JSON outputs.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{analyze, metrics_grid};
use crate::model::{GridParams, Potential, PotentialSpec, SystemConfig};
use crate::operators::{gamma_matrix_estimate, SmallnessReport};
use crate::perturbed::PruferOptions;
use crate::scattering::{default_scattering_ode, gkm_trace, scattering_coefficients};
use crate::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "AOC_WORKERS";

/// Exact CSV header.
pub const CSV_HEADER: &str = "N,L,I,lnD,defect_norm,M,status";

/// `[sweep]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rho: f64,
    pub n_list: Vec<usize>,
    /// Smallest `N` in the fit window; default: upper half of `n_list`.
    #[serde(default)]
    pub fit_min_n: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// `[output]` section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Sweep configuration, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub potential: PotentialSpec,
    pub sweep: SweepSection,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub tolerances: PruferOptions,
    #[serde(default)]
    pub output: OutputSection,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        Potential::new(self.potential.clone())?;
        let s = &self.sweep;
        if !(s.rho.is_finite() && s.rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {}", s.rho)));
        }
        if s.n_list.is_empty() || s.n_list[0] == 0 {
            return Err(Error::Config("n_list must be non-empty with N >= 1".into()));
        }
        if s.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        if s.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.grid.nodes_per_wavelength < 8 || self.grid.nodes_per_panel == 0 {
            return Err(Error::Config(
                "grid: nodes_per_wavelength >= 8 and nodes_per_panel >= 1 required".into(),
            ));
        }
        self.tolerances.validate()
    }

    /// SHA-256 over the parts of the configuration that determine results
    /// (everything except output paths and worker count).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.sweep.workers = None;
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        let digest = Sha256::digest(&bytes);
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Smallest `N` of the fit window.
    pub fn fit_min_n(&self) -> usize {
        let l = &self.sweep.n_list;
        self.sweep.fit_min_n.unwrap_or(l[l.len() / 2])
    }
}

/// Worker count: `AOC_WORKERS` if set, else `configured`, else all cores.
pub fn resolve_workers(configured: Option<usize>) -> Result<usize> {
    if let Ok(s) = std::env::var(WORKERS_ENV) {
        let w: usize = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {s:?}")))?;
        if w == 0 {
            return Err(Error::Config(format!("{WORKERS_ENV} must be >= 1")));
        }
        return Ok(w);
    }
    Ok(configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// `gamma(nu)` by the three routes and their discrepancies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaReport {
    pub nu: f64,
    pub gamma_scattering: f64,
    pub gamma_gkm: f64,
    pub gamma_matrix: f64,
    /// Matrix route at doubled node density.
    pub gamma_matrix_refined: f64,
    pub matrix_self_convergence: f64,
    pub diff_gkm_scattering: f64,
    pub diff_matrix_scattering: f64,
    pub diff_matrix_gkm: f64,
    /// `|gamma_matrix - gamma_scattering| > 10 * matrix_self_convergence`
    pub matrix_flag: bool,
    pub unitarity_defect: f64,
    pub transmission_re: f64,
    pub transmission_im: f64,
}

pub fn gamma_report(v: &Potential, nu: f64, grid: GridParams) -> Result<GammaReport> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("gamma needs nu > 0, got {nu}")));
    }
    let data = scattering_coefficients(v, nu.sqrt(), default_scattering_ode())?;
    let gs = (1.0 - data.t.re) / (PI * PI);
    if gs < -1e-12 {
        return Err(Error::Invariant(format!("gamma_scattering = {gs} < 0")));
    }
    let gk = gkm_trace(&data) / (4.0 * PI * PI);
    let m = gamma_matrix_estimate(nu, v, grid)?;
    let dm = (m.value - gs).abs();
    Ok(GammaReport {
        nu,
        gamma_scattering: gs,
        gamma_gkm: gk,
        gamma_matrix: m.value,
        gamma_matrix_refined: m.refined,
        matrix_self_convergence: m.self_convergence,
        diff_gkm_scattering: (gk - gs).abs(),
        diff_matrix_scattering: dm,
        diff_matrix_gkm: (m.value - gk).abs(),
        matrix_flag: dm > 10.0 * m.self_convergence + 1e-12,
        unitarity_defect: data.unitarity_defect,
        transmission_re: data.t.re,
        transmission_im: data.t.im,
    })
}

/// One row of a sweep; numeric fields are NaN for failed rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub l: f64,
    pub anderson_integral: f64,
    pub ln_d: f64,
    pub defect_norm: f64,
    pub m: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Least-squares fit `I ~ gamma_fit ln N + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub gamma_fit: f64,
    pub intercept: f64,
    pub window: Vec<usize>,
    /// `|gamma_fit - gamma_scattering| / gamma_scattering` (NaN if `gamma = 0`).
    pub relative_error: f64,
}

/// Output of [`run_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub rho: f64,
    pub nu: f64,
    pub grid: GridParams,
    pub smallness: SmallnessReport,
    pub rows: Vec<SweepRow>,
    pub fit: Option<FitResult>,
    pub gamma: GammaReport,
    /// `(N, I_N - gamma_scattering ln N)` for successful rows.
    pub residuals: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    /// Spread `max - min` of the residuals with `N >= n_min`.
    pub fn residual_spread(&self, n_min: usize) -> f64 {
        let r: Vec<f64> = self
            .residuals
            .iter()
            .filter(|(n, _)| *n >= n_min)
            .map(|x| x.1)
            .collect();
        if r.is_empty() {
            return f64::NAN;
        }
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max) - r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV text with the fixed header; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let m = r.m.map_or_else(|| "NaN".to_string(), |m| m.to_string());
            let status = if r.ok() { "ok" } else { "failed" };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.n,
                fmt_float(r.l),
                fmt_float(r.anderson_integral),
                fmt_float(r.ln_d),
                fmt_float(r.defect_norm),
                m,
                status
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialises")
    }
}

/// Shortest round-trip decimal; `NaN`, `inf` and `-inf` spelled out.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

fn sweep_row(n: usize, rho: f64, v: &Potential, config: &SweepConfig) -> SweepRow {
    let sys = match SystemConfig::thermodynamic(rho, n) {
        Ok(s) => s,
        Err(e) => return failed_row(n, f64::NAN, e),
    };
    let run = || -> Result<_> {
        let grid = metrics_grid(v, n, sys.l, config.grid)?;
        analyze(n, v, sys.l, &grid, &config.tolerances)
    };
    match run() {
        Ok(r) => SweepRow {
            n,
            l: sys.l,
            anderson_integral: r.anderson_integral,
            ln_d: r.ln_d,
            defect_norm: r.defect_norm,
            m: Some(r.m),
            error: None,
        },
        Err(e) => failed_row(n, sys.l, e),
    }
}

fn failed_row(n: usize, l: f64, e: Error) -> SweepRow {
    SweepRow {
        n,
        l,
        anderson_integral: f64::NAN,
        ln_d: f64::NAN,
        defect_norm: f64::NAN,
        m: None,
        error: Some(e.to_string()),
    }
}

/// Least-squares line through `(x_i, y_i)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Run the sweep with the worker count from [`resolve_workers`].
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    let workers = resolve_workers(config.sweep.workers)?;
    run_sweep_with_workers(config, workers)
}

/// Run the sweep on a pool of `workers` threads. Rows are computed in
/// parallel and returned in `n_list` order; all reductions are sequential.
pub fn run_sweep_with_workers(config: &SweepConfig, workers: usize) -> Result<SweepResult> {
    config.validate()?;
    let v = Potential::new(config.potential.clone())?;
    let rho = config.sweep.rho;
    let nu = PI * PI * rho * rho;
    let smallness = SmallnessReport::new(v.norms().l1, nu);
    let mut warnings = smallness.warnings();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (rows, gamma) = pool.install(|| {
        let rows: Vec<SweepRow> = config
            .sweep
            .n_list
            .par_iter()
            .map(|&n| sweep_row(n, rho, &v, config))
            .collect();
        (rows, gamma_report(&v, nu, config.grid))
    });
    let gamma = gamma?;
    for r in rows.iter().filter(|r| !r.ok()) {
        warnings.push(format!("N = {} failed: {}", r.n, r.error.as_deref().unwrap_or("")));
    }
    if gamma.matrix_flag {
        warnings.push(format!(
            "|gamma_matrix - gamma_scattering| = {:.3e} exceeds 10x the Nystrom self-convergence estimate {:.3e}",
            gamma.diff_matrix_scattering, gamma.matrix_self_convergence
        ));
    }

    let n_min = config.fit_min_n();
    let window: Vec<&SweepRow> = rows.iter().filter(|r| r.ok() && r.n >= n_min).collect();
    let fit = if window.len() >= 3 {
        let x: Vec<f64> = window.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = window.iter().map(|r| r.anderson_integral).collect();
        let (gamma_fit, intercept) = least_squares(&x, &y);
        let relative_error = if gamma.gamma_scattering > 0.0 {
            (gamma_fit - gamma.gamma_scattering).abs() / gamma.gamma_scattering
        } else {
            f64::NAN
        };
        Some(FitResult {
            gamma_fit,
            intercept,
            window: window.iter().map(|r| r.n).collect(),
            relative_error,
        })
    } else {
        warnings.push(format!(
            "fit needs >= 3 successful rows with N >= {n_min}, have {}",
            window.len()
        ));
        None
    };
    let residuals = rows
        .iter()
        .filter(|r| r.ok())
        .map(|r| (r.n, r.anderson_integral - gamma.gamma_scattering * (r.n as f64).ln()))
        .collect();
    Ok(SweepResult {
        config_hash: config.hash(),
        rho,
        nu,
        grid: config.grid,
        smallness,
        rows,
        fit,
        gamma,
        residuals,
        warnings,
    })
}

/// Write the CSV and JSON files named in `config.output`.
pub fn write_outputs(config: &SweepConfig, result: &SweepResult) -> Result<()> {
    if let Some(p) = &config.output.csv {
        std::fs::write(p, result.to_csv())?;
    }
    if let Some(p) = &config.output.json {
        std::fs::write(p, result.to_json())?;
    }
    Ok(())
}
