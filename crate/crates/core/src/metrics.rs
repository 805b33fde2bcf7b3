//! Overlap matrix `A_jk = (phi_j, psi_k)`, Anderson integral, transition
//! probability and the determinant bounds.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::free::{fermi_energy, free_eigenfunction, free_sign};
use crate::model::{Grid, GridParams, Potential};
use crate::operators::SmallnessReport;
use crate::perturbed::{count_below, perturbed_spectrum, EigenfunctionModel, PruferOptions};
use crate::{Error, Result};

/// Grid on `[-L, L]` used for the metrics at particle number `n`: panels
/// resolve the local Fermi wavenumber `sqrt(nu + sup V_-)`.
pub fn metrics_grid(v: &Potential, n: usize, l: f64, params: GridParams) -> Result<Grid> {
    let nu = fermi_energy(n, l);
    let hint = (nu + v.sup_negative()).sqrt();
    Grid::for_potential(l, params, hint, v)
}

/// `A_jk = (phi_j, psi_k)` for `j <= N`, `k <= K`.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix {
    pub n: usize,
    pub entries: DMatrix<f64>,
    /// Perturbed eigenvalues `mu_1..mu_K`.
    pub mu: Vec<f64>,
    /// Largest relative mismatch when joining an eigenfunction to its right
    /// exterior.
    pub max_matching_residual: f64,
}

impl OverlapMatrix {
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// `sum_k A_jk^2` for each row.
    pub fn row_bessel_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.iter().map(|a| a * a).sum()).collect()
    }

    /// Square `N x N` block.
    pub fn square(&self) -> DMatrix<f64> {
        self.entries.columns(0, self.n).into_owned()
    }
}

/// Eigenfunction models `psi_1..psi_K` on the support part of `grid`.
pub fn perturbed_models(
    k_count: usize,
    v: &Potential,
    l: f64,
    grid: &Grid,
    opts: &PruferOptions,
) -> Result<Vec<EigenfunctionModel>> {
    let mu = perturbed_spectrum(k_count, v, l, opts)?;
    let support = support_part(v, grid)?;
    mu.par_iter()
        .enumerate()
        .map(|(i, &m)| EigenfunctionModel::build(i + 1, m, v, l, &support, opts))
        .collect()
}

fn support_part(v: &Potential, grid: &Grid) -> Result<Grid> {
    if v.support_half_width() > 0.0 {
        grid.restrict(v.support())
    } else {
        grid.restrict(crate::model::Interval::new(0.0, 0.0))
    }
}

/// Overlaps against the first `k_count >= n` perturbed eigenfunctions. The
/// exterior parts are integrated in closed form, the support part by the
/// quadrature of `grid`. Column `k` uses `sigma_k psi_k`, whose slope at
/// `-L` has the sign of `phi_k'(-L)`, so that `V = 0` gives the identity.
pub fn overlap_matrix_with(
    n: usize,
    k_count: usize,
    v: &Potential,
    l: f64,
    grid: &Grid,
    opts: &PruferOptions,
) -> Result<OverlapMatrix> {
    if k_count < n {
        return Err(Error::Config(format!("overlap: K = {k_count} < N = {n}")));
    }
    if (grid.half_length() - l).abs() > 1e-12 * l {
        return Err(Error::Config(format!(
            "overlap: grid half-length {} differs from L = {l}",
            grid.half_length()
        )));
    }
    let models = perturbed_models(k_count, v, l, grid, opts)?;
    let support = support_part(v, grid)?;
    let rows: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|j| {
            let phi_w: Vec<f64> = support
                .nodes
                .iter()
                .zip(&support.weights)
                .map(|(&x, w)| w * free_eigenfunction(j, l, x))
                .collect();
            models
                .iter()
                .map(|m| {
                    let interior: f64 = phi_w.iter().zip(&m.support_values).map(|(a, b)| a * b).sum();
                    free_sign(m.k) * (m.exterior_overlap(j) + interior)
                })
                .collect()
        })
        .collect();
    let entries = DMatrix::from_fn(n, k_count, |j, k| rows[j][k]);
    Ok(OverlapMatrix {
        n,
        entries,
        mu: models.iter().map(|m| m.mu).collect(),
        max_matching_residual: models.iter().map(|m| m.matching_residual).fold(0.0, f64::max),
    })
}

/// Square overlap matrix with default solver options.
pub fn overlap_matrix(n: usize, v: &Potential, l: f64, grid: &Grid) -> Result<OverlapMatrix> {
    overlap_matrix_with(n, n, v, l, grid, &PruferOptions::default())
}

/// Overlap metrics for one `(N, L)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AndersonResult {
    pub n: usize,
    pub l: f64,
    pub nu: f64,
    /// `N - ||A||_F^2`
    pub anderson_integral: f64,
    /// `tr(1 - A A^T)` from the eigenvalues of `A A^T`.
    pub anderson_integral_spectral: f64,
    /// `D = det(A)^2`
    pub transition_probability: f64,
    /// `ln D` from the LU factors.
    pub ln_d: f64,
    /// `ln D` from the eigenvalues of `A A^T`.
    pub ln_d_spectral: f64,
    /// `||1 - A A^T||` (spectral norm)
    pub defect_norm: f64,
    /// Number of perturbed eigenvalues below `nu`.
    pub m: usize,
    pub max_row_bessel: f64,
    pub max_matching_residual: f64,
}

/// Log-determinant and spectral data of a square overlap matrix.
fn determinant_data(a: &DMatrix<f64>) -> (f64, f64, f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let ln_d = 2.0 * u.diagonal().iter().map(|x| x.abs().ln()).sum::<f64>();
    let aat = a * a.transpose();
    let eig = aat.symmetric_eigen().eigenvalues;
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let ln_spec = ev.iter().map(|e| e.max(0.0).ln()).sum();
    let i_spec = ev.iter().map(|e| 1.0 - e).sum();
    let defect = ev.iter().map(|e| (1.0 - e).abs()).fold(0.0, f64::max);
    (ln_d, ln_spec, i_spec, defect)
}

/// Metrics from an already computed overlap matrix.
pub fn metrics_from_overlap(a: &OverlapMatrix, l: f64, m: usize) -> AndersonResult {
    let sq = a.square();
    let n = a.n;
    let frob: f64 = sq.iter().map(|x| x * x).sum();
    let (ln_d, ln_d_spectral, anderson_integral_spectral, defect_norm) = determinant_data(&sq);
    let max_row_bessel = a.row_bessel_sums().into_iter().fold(0.0, f64::max);
    AndersonResult {
        n,
        l,
        nu: fermi_energy(n, l),
        anderson_integral: n as f64 - frob,
        anderson_integral_spectral,
        transition_probability: ln_d.exp(),
        ln_d,
        ln_d_spectral,
        defect_norm,
        m,
        max_row_bessel,
        max_matching_residual: a.max_matching_residual,
    }
}

/// Overlap matrix, Anderson integral, `ln D`, defect norm and `M`.
pub fn analyze(n: usize, v: &Potential, l: f64, grid: &Grid, opts: &PruferOptions) -> Result<AndersonResult> {
    let a = overlap_matrix_with(n, n, v, l, grid, opts)?;
    let m = count_below(fermi_energy(n, l), v, l, opts)?;
    Ok(metrics_from_overlap(&a, l, m))
}

/// `I = N - sum_{j,k <= N} (phi_j, psi_k)^2`.
pub fn anderson_integral(n: usize, v: &Potential, l: f64, grid: &Grid) -> Result<f64> {
    Ok(analyze(n, v, l, grid, &PruferOptions::default())?.anderson_integral)
}

/// `D = det(A)^2`.
pub fn transition_probability(n: usize, v: &Potential, l: f64, grid: &Grid) -> Result<f64> {
    Ok(analyze(n, v, l, grid, &PruferOptions::default())?.transition_probability)
}

/// Determinant sandwich `exp[-I / (1 - defect)] <= D <= exp(-I)` and the
/// defect bound `16 C_Omega ||V||_1 / sqrt nu`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetBoundReport {
    pub value: f64,
    pub ln_value: f64,
    /// Undefined when `defect_norm >= 1`.
    pub lower: Option<f64>,
    pub ln_lower: Option<f64>,
    pub upper: f64,
    pub ln_upper: f64,
    pub defect_norm: f64,
    /// Defined when `q_omega < 1`.
    pub theorem_bound: Option<f64>,
    /// `D <= e^{-I}` up to `1e-10` in `ln D`.
    pub upper_holds: bool,
    /// `lower <= D <= upper` (in log space, `1e-10` slack), when defined.
    pub sandwich_holds: Option<bool>,
    /// Both inequalities strict, when defined.
    pub sandwich_strict: Option<bool>,
    pub theorem_holds: Option<bool>,
}

impl DetBoundReport {
    pub fn new(r: &AndersonResult, l1: f64) -> Self {
        let i = r.anderson_integral;
        let ln_upper = -i;
        let ln_lower = (r.defect_norm < 1.0).then(|| -i / (1.0 - r.defect_norm));
        let small = SmallnessReport::new(l1, r.nu);
        let theorem_bound = small.c_omega.map(|c| 16.0 * c * l1 / r.nu.sqrt());
        let slack = 1e-10;
        let upper_holds = r.ln_d <= ln_upper + slack;
        Self {
            value: r.transition_probability,
            ln_value: r.ln_d,
            lower: ln_lower.map(f64::exp),
            ln_lower,
            upper: ln_upper.exp(),
            ln_upper,
            defect_norm: r.defect_norm,
            theorem_bound,
            upper_holds,
            sandwich_holds: ln_lower.map(|lo| lo <= r.ln_d + slack && upper_holds),
            sandwich_strict: ln_lower.map(|lo| lo < r.ln_d && r.ln_d < ln_upper),
            theorem_holds: theorem_bound.map(|b| r.defect_norm <= b),
        }
    }
}

pub fn det_bounds(n: usize, v: &Potential, l: f64, grid: &Grid) -> Result<DetBoundReport> {
    let r = analyze(n, v, l, grid, &PruferOptions::default())?;
    Ok(DetBoundReport::new(&r, v.norms().l1))
}
