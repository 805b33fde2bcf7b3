//! Nystrom discretisation of the sandwiched operator calculus on `supp V`:
//! Birman-Schwinger operator, `Omega(z)`, `Phi(nu)`, the `2 x 2` matrix
//! `Phi_hat(nu)`, the matrix route to `gamma(nu)`, the contour representation
//! of the Anderson integral and the inequality audit.
//!
//! All matrices live in the symmetrised basis `f_i -> sqrt(w_i) f(x_i)`: the
//! kernel `k(x, y)` sandwiched by `sqrt|V|` becomes
//! `S_ij = g_i k(x_i, x_j) g_j` with `g_i = sqrt(w_i |V(x_i)|)`. This is a
//! similarity transform of the plain `w_j`-weighted Nystrom matrix, so solves
//! are equivalent and spectral norms approximate `L^2` operator norms.
//! Entries within a panel are corrected by product integration across the
//! kink of `k` at `x = y` (see [`SupportNodes::kernel_matrix`]).

use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::free::{
    commutator_kernel_k, free_eigenfunction, free_eigenvalue, g_kernel_k, green_kernel_k, sin_scaled,
    truncated_resolvent_direct,
};
use crate::metrics::analyze;
use crate::model::{potential_norms, v_transform, Grid, GridParams, Potential, PotentialNorms};
use crate::perturbed::PruferOptions;
use crate::quadrature::{kronrod15_nodes, GaussRule};
use crate::{Complex, Error, Result};

/// Condition number above which a Nystrom system counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e13;

/// Diagonal of `J = sign(V)` at the support nodes, with `sign(0) = +1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignOperator {
    pub signs: Vec<f64>,
}

impl SignOperator {
    pub fn from_values(values: &[f64]) -> Self {
        Self {
            signs: values.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `J^2 = 1`.
    pub fn is_involution(&self) -> bool {
        self.signs.iter().all(|s| s * s == 1.0)
    }
}

/// Quadrature nodes on `supp V` with the sandwich factors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportNodes {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub sqrt_abs_v: Vec<f64>,
    pub sign: SignOperator,
    /// `sqrt(w_i |V(x_i)|)`
    pub g: Vec<f64>,
    /// Gauss-Legendre panels `(lo, hi)`, each holding `panel_size`
    /// consecutive nodes.
    pub panels: Vec<(f64, f64)>,
    pub panel_size: usize,
}

impl SupportNodes {
    /// Nodes of `grid` inside `supp V`. The support endpoints must be panel
    /// boundaries of `grid`.
    pub fn new(v: &Potential, grid: &Grid) -> Result<Self> {
        let panel_size = grid.params().nodes_per_panel;
        let (nodes, weights, panels) = if v.support_half_width() > 0.0 {
            let sub = grid.restrict(v.support())?;
            let panels: Vec<(f64, f64)> = sub.panel_boundaries.windows(2).map(|w| (w[0], w[1])).collect();
            if panels.len() * panel_size != sub.nodes.len() {
                return Err(Error::Invariant(format!(
                    "support grid: {} nodes do not fill {} panels of {panel_size}",
                    sub.nodes.len(),
                    panels.len()
                )));
            }
            (sub.nodes, sub.weights, panels)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        let values: Vec<f64> = nodes.iter().map(|&x| v.evaluate(x)).collect();
        let sqrt_abs_v: Vec<f64> = values.iter().map(|x| x.abs().sqrt()).collect();
        let g = weights.iter().zip(&sqrt_abs_v).map(|(w, s)| w.sqrt() * s).collect();
        Ok(Self {
            nodes,
            weights,
            sqrt_abs_v,
            sign: SignOperator::from_values(&values),
            g,
            panels,
            panel_size,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `S_ij = g_i k(x_i, x_j) g_j` for a symmetric kernel.
    pub fn sandwich<F>(&self, kernel: F) -> Result<DMatrix<Complex>>
    where
        F: FnMut(f64, f64) -> Result<Complex>,
    {
        self.kernel_matrix(kernel)
    }

    /// Locally corrected Nystrom matrix of a symmetric kernel that may have a
    /// derivative jump at `x = y`. Off-panel entries are `g_i k(x_i, x_j) g_j`.
    /// Within the panel of `x_i` the row uses product integration: the panel
    /// is split at `x_i`, each half gets its own Gauss rule, and the smooth
    /// factor `sqrt|V| f` is Lagrange-interpolated from the panel nodes. This
    /// lifts the `O(h^2)` error of the plain rule to the Gauss order. The
    /// result is symmetric up to that quadrature error.
    pub fn kernel_matrix<T, F>(&self, mut kernel: F) -> Result<DMatrix<T>>
    where
        T: ComplexField<RealField = f64> + Copy,
        F: FnMut(f64, f64) -> Result<T>,
    {
        let n = self.len();
        let m = self.panel_size;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i - i % m {
                let v = kernel(self.nodes[i], self.nodes[j])? * T::from_real(self.g[i] * self.g[j]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        let rule = GaussRule::new(m);
        let mut basis = vec![0.0; m];
        for (p, &(lo, hi)) in self.panels.iter().enumerate() {
            let first = p * m;
            let xs = &self.nodes[first..first + m];
            let lambda = barycentric_weights(xs);
            for i in first..first + m {
                let xi = self.nodes[i];
                let mut q = vec![T::zero(); m];
                for (a, b) in [(lo, xi), (xi, hi)] {
                    for (y, w) in rule.mapped(a, b) {
                        lagrange_basis(xs, &lambda, y, &mut basis);
                        let kw = kernel(xi, y)? * T::from_real(w);
                        for (qj, lj) in q.iter_mut().zip(&basis) {
                            *qj += kw * T::from_real(*lj);
                        }
                    }
                }
                for (jj, qj) in q.into_iter().enumerate() {
                    let j = first + jj;
                    out[(i, j)] = qj * T::from_real(self.g[i] * self.g[j] / self.weights[j]);
                }
            }
        }
        Ok(out)
    }

    /// `g_i f(x_i)`: a function sandwiched once, in the symmetrised basis.
    pub fn weighted<F: FnMut(f64) -> f64>(&self, mut f: F) -> Vec<f64> {
        self.nodes.iter().zip(&self.g).map(|(&x, g)| g * f(x)).collect()
    }

    /// `1 - S J`.
    fn one_minus_sj(&self, s: &DMatrix<Complex>) -> DMatrix<Complex> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            Complex::from(d) - s[(i, j)] * self.sign.signs[j]
        })
    }
}

/// Barycentric weights `1 / prod_{l != j} (x_j - x_l)`, up to a common
/// factor.
fn barycentric_weights(xs: &[f64]) -> Vec<f64> {
    let scale = 2.0 / (xs[xs.len() - 1] - xs[0]).abs().max(f64::MIN_POSITIVE);
    (0..xs.len())
        .map(|j| {
            let prod: f64 = (0..xs.len())
                .filter(|&l| l != j)
                .map(|l| scale * (xs[j] - xs[l]))
                .product();
            1.0 / prod
        })
        .collect()
}

/// Lagrange basis polynomials on `xs` evaluated at `y`.
fn lagrange_basis(xs: &[f64], lambda: &[f64], y: f64, out: &mut [f64]) {
    if let Some(hit) = xs.iter().position(|&x| x == y) {
        out.iter_mut()
            .enumerate()
            .for_each(|(j, o)| *o = if j == hit { 1.0 } else { 0.0 });
        return;
    }
    let mut total = 0.0;
    for ((o, &x), &l) in out.iter_mut().zip(xs).zip(lambda) {
        *o = l / (y - x);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Largest singular value; `0` for empty matrices.
pub fn spectral_norm(m: &DMatrix<Complex>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn condition_number(m: &DMatrix<Complex>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.max() / sv.min()
}

/// Sandwiched integral operator on the support nodes.
#[derive(Clone, Debug)]
pub struct NystromOperator {
    pub support: SupportNodes,
    /// Symmetrised matrix `D_sqrt(w) sqrt|V| K sqrt|V| D_sqrt(w)`.
    pub matrix: DMatrix<Complex>,
    /// Condition number of the system that produced the matrix, if any.
    pub condition: Option<f64>,
}

impl NystromOperator {
    pub fn dim(&self) -> usize {
        self.support.len()
    }

    /// Spectral norm, i.e. the discretised `L^2` operator norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }

    /// Plain form `sqrt|V(x_i)| K(x_i, x_j) sqrt|V(x_j)| w_j`.
    pub fn plain(&self) -> DMatrix<Complex> {
        let w = &self.support.weights;
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.matrix[(i, j)] * (w[j].sqrt() / w[i].sqrt())
        })
    }
}

/// `sqrt|V| R(z) sqrt|V|` on the support nodes of `grid`.
pub fn birman_schwinger(z: Complex, v: &Potential, grid: &Grid, l: f64) -> Result<NystromOperator> {
    birman_schwinger_k(z.sqrt(), v, grid, l)
}

/// [`birman_schwinger`] for a given root `k = sqrt z`.
pub fn birman_schwinger_k(k: Complex, v: &Potential, grid: &Grid, l: f64) -> Result<NystromOperator> {
    let support = SupportNodes::new(v, grid)?;
    let matrix = support.sandwich(|x, y| green_kernel_k(k, x, y, l))?;
    Ok(NystromOperator {
        support,
        matrix,
        condition: None,
    })
}

fn invert(a: DMatrix<Complex>, what: &str) -> Result<(DMatrix<Complex>, f64)> {
    if a.is_empty() {
        return Ok((a, 1.0));
    }
    let cond = condition_number(&a);
    if !(cond.is_finite() && cond < SINGULAR_CONDITION) {
        return Err(Error::Singular(format!("{what}: condition number {cond:.3e}")));
    }
    let inv = a
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what}: LU breakdown")))?;
    Ok((inv, cond))
}

/// `Omega(z) = (1 - sqrt|V| R(z) sqrt|V| J)^{-1}`.
pub fn omega_operator(z: Complex, v: &Potential, grid: &Grid, l: f64) -> Result<NystromOperator> {
    omega_operator_k(z.sqrt(), v, grid, l)
}

/// [`omega_operator`] for a given root `k = sqrt z`.
pub fn omega_operator_k(k: Complex, v: &Potential, grid: &Grid, l: f64) -> Result<NystromOperator> {
    let bs = birman_schwinger_k(k, v, grid, l)?;
    let (matrix, cond) = invert(
        bs.support.one_minus_sj(&bs.matrix),
        &format!("Omega(z) at z = {}", k * k),
    )?;
    Ok(NystromOperator {
        support: bs.support,
        matrix,
        condition: Some(cond),
    })
}

/// Neumann-series smallness parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallnessReport {
    pub l1: f64,
    pub nu: f64,
    /// `4 ||V||_1 / sqrt nu`
    pub q_omega: f64,
    /// `(3/2) ||V||_1 / sqrt nu`
    pub q_inf: f64,
    /// `(1/2) ||V||_1 / sqrt nu`
    pub q_phi: f64,
    /// `1 / (1 - q_omega)` when `q_omega < 1`
    pub c_omega: Option<f64>,
    /// `1 / (1 - q_inf)` when `q_inf < 1`
    pub c_omega_inf: Option<f64>,
    /// `1 / (1 - q_phi)` when `q_phi < 1`
    pub c_phi: Option<f64>,
    /// `||V||_1 C_Phi / sqrt nu` when `C_Phi` exists
    pub z_cond: Option<f64>,
    /// All four conditions hold.
    pub all_satisfied: bool,
}

impl SmallnessReport {
    pub fn new(l1: f64, nu: f64) -> Self {
        let r = l1 / nu.sqrt();
        let inv = |q: f64| if q < 1.0 { Some(1.0 / (1.0 - q)) } else { None };
        let (q_omega, q_inf, q_phi) = (4.0 * r, 1.5 * r, 0.5 * r);
        let c_phi = inv(q_phi);
        let z_cond = c_phi.map(|c| r * c);
        Self {
            l1,
            nu,
            q_omega,
            q_inf,
            q_phi,
            c_omega: inv(q_omega),
            c_omega_inf: inv(q_inf),
            c_phi,
            z_cond,
            all_satisfied: q_omega < 1.0 && q_inf < 1.0 && q_phi < 1.0 && z_cond.is_some_and(|z| z < 1.0),
        }
    }

    pub fn for_potential(v: &Potential, nu: f64) -> Self {
        Self::new(v.norms().l1, nu)
    }

    /// Human-readable warnings for violated conditions.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, q) in [("q_omega", self.q_omega), ("q_inf", self.q_inf), ("q_phi", self.q_phi)] {
            if q >= 1.0 {
                w.push(format!("{name} = {q:.4} >= 1: Neumann-series bound not guaranteed"));
            }
        }
        match self.z_cond {
            Some(z) if z >= 1.0 => w.push(format!("z_cond = {z:.4} >= 1")),
            None => w.push("z_cond undefined (q_phi >= 1)".into()),
            _ => {}
        }
        w
    }
}

/// Grid on `[-a, a]` for the `L`-independent objects `Phi(nu)` and
/// `Phi_hat(nu)`, resolving the local wavenumber `sqrt(nu + sup V_-)`.
pub fn operator_grid(v: &Potential, nu: f64, params: GridParams) -> Result<Grid> {
    let a = v.support_half_width();
    let l = if a > 0.0 { a } else { 1.0 };
    let hint = (nu.max(0.0) + v.sup_negative()).sqrt().max(1e-3);
    Grid::new(l, params, hint, v.support(), v.breakpoints())
}

/// `Phi_hat(nu)` with diagnostics. All ingredients are real at real `nu`, so
/// the entries are stored as reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiHat {
    pub nu: f64,
    /// `(omega_a, J Phi omega_b)` with `a, b` in `{s, c}`.
    pub entries: [[f64; 2]; 2],
    /// `|Phi_hat_sc - Phi_hat_cs|`
    pub asymmetry: f64,
    /// Spectral norm of the discretised `Phi(nu)`.
    pub phi_norm: f64,
    pub condition: f64,
    /// Number of support nodes.
    pub nodes: usize,
}

/// `Phi_hat(nu)` from `Phi(nu) = (1 - sqrt|V| K(nu) sqrt|V| J)^{-1}`,
/// `K(nu; x, y) = sin(sqrt nu |x - y|) / (2 sqrt nu)`.
pub fn phi_hat(nu: f64, v: &Potential, grid: &Grid) -> Result<PhiHat> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("Phi_hat needs nu > 0, got {nu}")));
    }
    let sup = SupportNodes::new(v, grid)?;
    let n = sup.len();
    let k = nu.sqrt();
    let omega = [sup.weighted(|x| (k * x).sin()), sup.weighted(|x| (k * x).cos())];
    if n == 0 {
        return Ok(PhiHat {
            nu,
            entries: [[0.0; 2]; 2],
            asymmetry: 0.0,
            phi_norm: 1.0,
            condition: 1.0,
            nodes: 0,
        });
    }
    // real at real nu: 1 - S J with S the sandwiched sin(k|x - y|) / 2k
    let s = sup.kernel_matrix(|x, y| Ok((k * (x - y).abs()).sin() / (2.0 * k)))?;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - s[(i, j)] * sup.sign.signs[j]
    });
    let sv = a.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = smax / smin;
    if !(cond.is_finite() && cond < SINGULAR_CONDITION) {
        return Err(Error::Singular(format!(
            "Phi(nu) at nu = {nu}: condition number {cond:.3e}"
        )));
    }
    let rhs = DMatrix::from_fn(n, 2, |i, b| omega[b][i]);
    let u = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("Phi(nu) at nu = {nu}: LU breakdown")))?;
    let mut entries = [[0.0; 2]; 2];
    for b in 0..2 {
        for (a_idx, oa) in omega.iter().enumerate() {
            entries[a_idx][b] = (0..n).map(|i| oa[i] * sup.sign.signs[i] * u[(i, b)]).sum();
        }
    }
    Ok(PhiHat {
        nu,
        entries,
        asymmetry: (entries[0][1] - entries[1][0]).abs(),
        phi_norm: 1.0 / smin,
        condition: cond,
        nodes: n,
    })
}

/// First Born term of `Phi_hat(nu)`: `(omega_a, J omega_b)`.
pub fn phi_hat_born(nu: f64, v: &Potential, grid: &Grid) -> Result<[[f64; 2]; 2]> {
    let sup = SupportNodes::new(v, grid)?;
    let k = nu.sqrt();
    let omega = [sup.weighted(|x| (k * x).sin()), sup.weighted(|x| (k * x).cos())];
    let mut e = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            e[a][b] = (0..sup.len())
                .map(|i| omega[a][i] * sup.sign.signs[i] * omega[b][i])
                .sum();
        }
    }
    Ok(e)
}

fn mat2_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `tr[(1 + P^2 / 4 nu)^{-1} P^2] / (4 pi^2 nu)`.
pub fn gamma_from_entries(p: &[[f64; 2]; 2], nu: f64) -> Result<f64> {
    let p2 = mat2_mul(p, p);
    let m = [
        [1.0 + p2[0][0] / (4.0 * nu), p2[0][1] / (4.0 * nu)],
        [p2[1][0] / (4.0 * nu), 1.0 + p2[1][1] / (4.0 * nu)],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.is_finite() && det.abs() > 1e-300) {
        return Err(Error::Singular(format!("1 + Phi_hat^2 / 4 nu has determinant {det}")));
    }
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let q = mat2_mul(&inv, &p2);
    let g = (q[0][0] + q[1][1]) / (4.0 * PI * PI * nu);
    if g < -1e-14 {
        return Err(Error::Invariant(format!("gamma_matrix = {g} < 0")));
    }
    Ok(g.max(0.0))
}

/// Matrix route: `gamma(nu)` from `Phi_hat(nu)`.
pub fn gamma_matrix(nu: f64, v: &Potential, grid: &Grid) -> Result<f64> {
    let p = phi_hat(nu, v, grid)?;
    gamma_from_entries(&p.entries, nu)
}

/// Matrix-route `gamma` at the default grid and its change under one
/// doubling of the node density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaMatrixEstimate {
    pub value: f64,
    pub refined: f64,
    /// `|value - refined|`
    pub self_convergence: f64,
    pub nodes: usize,
}

pub fn gamma_matrix_estimate(nu: f64, v: &Potential, params: GridParams) -> Result<GammaMatrixEstimate> {
    let g0 = operator_grid(v, nu, params)?;
    let g1 = operator_grid(v, nu, params.refined(2))?;
    let value = gamma_matrix(nu, v, &g0)?;
    let refined = gamma_matrix(nu, v, &g1)?;
    Ok(GammaMatrixEstimate {
        value,
        refined,
        self_convergence: (value - refined).abs(),
        nodes: SupportNodes::new(v, &g0)?.len(),
    })
}

/// Contour integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContourOptions {
    /// Truncation `|s| <= s_cut`; default `max(10 / L, 5)`.
    pub s_cut: Option<f64>,
    /// Tail tolerance for the `R^2` mode sum and the `s`-quadrature.
    pub tol: f64,
    pub max_refinements: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            s_cut: None,
            tol: 1e-10,
            max_refinements: 3,
        }
    }
}

/// Sample of the contour integrand against its analytic envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContourSample {
    pub s: f64,
    pub integrand_abs: f64,
    /// `e^{-2L|s|} V_L(2|s|) / sqrt(nu + s^2)`
    pub envelope: f64,
}

/// Anderson integral by the contour representation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContourResult {
    /// Integral over the whole parabola.
    pub value: f64,
    /// Contribution of `|s| <= s_cut`.
    pub truncated_value: f64,
    /// Contribution of `|s| > s_cut`, integrated after `s = s_cut / t`.
    pub tail: f64,
    pub quadrature_error: f64,
    pub s_cut: f64,
    pub j_max: usize,
    /// Bound on `(1/L) sum_{m > J_max} |z - lambda_m|^{-2}`.
    pub mode_tail_bound: f64,
    pub evaluations: usize,
    pub samples: Vec<ContourSample>,
}

/// Smallest `J` with `(1/L)(2L/pi)^4 / ((J + M)^2 (J - M)) < tol`,
/// `M = N + 1/2`, which bounds `(1/L) sum_{m > J} |z - lambda_m|^{-2}` on
/// the Fermi parabola.
pub fn mode_cutoff(n: usize, l: f64, tol: f64) -> Result<(usize, f64)> {
    let m = n as f64 + 0.5;
    let c = (2.0 * l / PI).powi(4) / l;
    let bound = |j: usize| {
        let j = j as f64;
        c / ((j + m).powi(2) * (j - m))
    };
    let mut hi = n + 1;
    while bound(hi) >= tol {
        hi *= 2;
        if hi > 1 << 26 {
            return Err(Error::Refinement(format!(
                "R^2 mode sum needs more than 2^26 terms for tol {tol:e}"
            )));
        }
    }
    let mut lo = n + 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bound(mid) < tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((hi, bound(hi)))
}

/// Geometric `s`-panels `[0, h], [h, 2h], [2h, 4h], ...` up to `s_cut`.
fn contour_panels(h: f64, s_cut: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    let mut e = h.min(s_cut);
    edges.push(e);
    while e < s_cut {
        e = (2.0 * e).min(s_cut);
        edges.push(e);
    }
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `(1/2 pi i) int_{Gamma_N} tr[P_N R T R^2 T] dz` with
/// `T = sqrt|V| J Omega sqrt|V|`, `z = (sqrt nu_N + i s)^2`.
///
/// With `p_m = sqrt|V| phi_m` and `W = P^T (J Omega) P_N` the trace is
/// `sum_{j <= N} (z - lambda_j)^{-1} sum_{m <= J_max} W_mj^2 / (z - lambda_m)^2`.
/// The integrand is conjugate-symmetric in `s`, so only `s >= 0` is
/// integrated.
pub fn contour_anderson(n: usize, v: &Potential, l: f64, grid: &Grid, opts: ContourOptions) -> Result<ContourResult> {
    let nu = crate::free::fermi_energy(n, l);
    let kf = nu.sqrt();
    let s_cut = opts.s_cut.unwrap_or((10.0 / l).max(5.0));
    let sup = SupportNodes::new(v, grid)?;
    let (j_max, mode_tail_bound) = mode_cutoff(n, l, opts.tol)?;
    if sup.is_empty() || n == 0 || v.is_zero() {
        return Ok(ContourResult {
            value: 0.0,
            truncated_value: 0.0,
            tail: 0.0,
            quadrature_error: 0.0,
            s_cut,
            j_max,
            mode_tail_bound,
            evaluations: 0,
            samples: Vec::new(),
        });
    }
    let ns = sup.len();
    // p_m = g phi_m(x_i), rows m = 1..J_max
    let p_all = DMatrix::<f64>::from_fn(j_max, ns, |m, i| sup.g[i] * free_eigenfunction(m + 1, l, sup.nodes[i]));
    let p_n_t = p_all.rows(0, n).transpose().map(Complex::from);
    let lambdas: Vec<f64> = (1..=j_max).map(|m| free_eigenvalue(m, l)).collect();

    let integrand = |s: f64| -> Result<Complex> {
        let k = Complex::new(kf, s);
        let z = k * k;
        let bs = sup.sandwich(|x, y| green_kernel_k(k, x, y, l))?;
        let a = sup.one_minus_sj(&bs);
        let x = a
            .lu()
            .solve(&p_n_t)
            .ok_or_else(|| Error::Singular(format!("Omega(z) at s = {s}")))?;
        let jx_re = DMatrix::from_fn(ns, n, |i, j| sup.sign.signs[i] * x[(i, j)].re);
        let jx_im = DMatrix::from_fn(ns, n, |i, j| sup.sign.signs[i] * x[(i, j)].im);
        let w_re = &p_all * jx_re;
        let w_im = &p_all * jx_im;
        let d2: Vec<Complex> = lambdas.iter().map(|&lm| (z - lm).powi(-2)).collect();
        let mut g = Complex::from(0.0);
        for j in 0..n {
            let mut q = Complex::from(0.0);
            for (m, d) in d2.iter().enumerate() {
                let w = Complex::new(w_re[(m, j)], w_im[(m, j)]);
                q += w * w * d;
            }
            g += q / (z - lambdas[j]);
        }
        Ok(g * k)
    };

    // body on [0, s_cut]; tail on [s_cut, inf) via s = s_cut / t, t in (0, 1]
    let body_panels = contour_panels(1.0 / (8.0 * l), s_cut);
    let tail_panels = contour_panels(1.0 / 64.0, 1.0);
    let eval = |panels: &[(f64, f64)], tail: bool| -> Result<(f64, Vec<f64>)> {
        let nodes: Vec<(usize, (f64, f64, f64))> = panels
            .iter()
            .enumerate()
            .flat_map(|(p, &(a, b))| kronrod15_nodes(a, b).into_iter().map(move |nd| (p, nd)))
            .collect();
        let vals: Vec<Result<Complex>> = nodes
            .par_iter()
            .map(|(_, nd)| {
                if tail {
                    let t = nd.0;
                    Ok(integrand(s_cut / t)? * (s_cut / (t * t)))
                } else {
                    integrand(nd.0)
                }
            })
            .collect();
        let mut pk = vec![0.0; panels.len()];
        let mut pg = vec![0.0; panels.len()];
        for ((p, nd), val) in nodes.iter().zip(vals) {
            let re = val?.re;
            pk[*p] += nd.1 * re;
            pg[*p] += nd.2 * re;
        }
        let scale = 2.0 / PI;
        let errs = pk.iter().zip(&pg).map(|(k, g)| scale * (k - g).abs()).collect();
        Ok((scale * pk.iter().sum::<f64>(), errs))
    };
    let mut evaluations = 0;
    let mut integrate = |mut panels: Vec<(f64, f64)>, tail: bool| -> Result<(f64, f64)> {
        let mut refinements = 0;
        loop {
            let (value, errs) = eval(&panels, tail)?;
            evaluations += 15 * panels.len();
            let err: f64 = errs.iter().sum();
            if err <= opts.tol.max(1e-9 * value.abs()) || refinements >= opts.max_refinements {
                return Ok((value, err));
            }
            refinements += 1;
            let thresh = err / panels.len() as f64;
            panels = panels
                .iter()
                .zip(&errs)
                .flat_map(|(&(a, b), &e)| {
                    if e >= thresh {
                        let m = 0.5 * (a + b);
                        vec![(a, m), (m, b)]
                    } else {
                        vec![(a, b)]
                    }
                })
                .collect();
        }
    };
    let (body, body_err) = integrate(body_panels, false)?;
    let (tail, tail_err) = integrate(tail_panels, true)?;

    let full = Grid::for_potential(l, grid.params(), grid.wavenumber_hint(), v)?;
    let sample_s: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|f| f / l)
        .chain([s_cut])
        .collect();
    let mut samples = Vec::new();
    for &s in &sample_s {
        let h = integrand(s)?;
        let envelope = (-2.0 * l * s).exp() * v_transform(v, l, 2.0 * s, &full) / (nu + s * s).sqrt();
        samples.push(ContourSample {
            s,
            integrand_abs: h.norm(),
            envelope,
        });
    }
    Ok(ContourResult {
        value: body + tail,
        truncated_value: body,
        tail,
        quadrature_error: body_err + tail_err,
        s_cut,
        j_max,
        mode_tail_bound,
        evaluations,
        samples,
    })
}

/// One audited inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditItem {
    pub name: String,
    pub s: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// `rhs - lhs`
    pub margin: f64,
}

impl AuditItem {
    fn new(name: &str, s: Option<f64>, lhs: f64, rhs: f64) -> Self {
        let pass = lhs.is_finite() && lhs <= rhs * (1.0 + 1e-12) + 1e-14;
        Self {
            name: name.to_string(),
            s,
            lhs,
            rhs,
            pass,
            margin: rhs - lhs,
        }
    }
}

/// Result of [`bounds_audit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub l: f64,
    pub nu: f64,
    pub norms: PotentialNorms,
    pub smallness: SmallnessReport,
    pub items: Vec<AuditItem>,
    pub all_pass: bool,
}

/// `sum_{j=1}^N 1 / (N + 1/2 - j)`.
pub fn fermi_sum(n: usize) -> f64 {
    (1..=n).map(|j| 1.0 / (n as f64 + 0.5 - j as f64)).sum()
}

/// Check the operator inequalities on the Fermi parabola at the sampled `s`,
/// the sum estimate and `D <= e^{-I}`.
pub fn bounds_audit(v: &Potential, n: usize, l: f64, grid: &Grid, samples: &[f64]) -> Result<AuditReport> {
    let nu = crate::free::fermi_energy(n, l);
    let kf = nu.sqrt();
    let norms = potential_norms(v, &v.support_grid());
    let small = SmallnessReport::new(norms.l1, nu);
    let sup = SupportNodes::new(v, grid)?;
    let mut items = Vec::new();
    for &s in samples {
        let k = Complex::new(kf, s);
        let z = k * k;
        let (m, e) = sin_scaled(k * l);
        let inv_sin2 = (-2.0 * e).exp() / m.norm_sqr();
        items.push(AuditItem::new(
            "fermi_sine",
            Some(s),
            inv_sin2,
            4.0 * (-2.0 * l * s.abs()).exp(),
        ));

        let rs = (nu + s * s).sqrt();
        let bs = sup.sandwich(|x, y| green_kernel_k(k, x, y, l))?;
        items.push(AuditItem::new(
            "birman_schwinger",
            Some(s),
            spectral_norm(&bs),
            4.0 * norms.l1 / rs,
        ));

        let sn = sup.sandwich(|x, y| Ok(truncated_resolvent_direct(n, z, x, y, l)))?;
        items.push(AuditItem::new(
            "truncated_resolvent",
            Some(s),
            spectral_norm(&sn),
            8.0 / PI * norms.l1 * ((n + 1) as f64).ln() / rs,
        ));

        let c = sup.sandwich(|x, y| commutator_kernel_k(k, x, y, l))?;
        items.push(AuditItem::new(
            "commutator",
            Some(s),
            spectral_norm(&c),
            8.0 * norms.x2_l1.sqrt() * norms.l1.sqrt(),
        ));

        if let Some(c_omega) = small.c_omega {
            let (om, _) = invert(sup.one_minus_sj(&bs), "Omega(z)")?;
            items.push(AuditItem::new("omega", Some(s), spectral_norm(&om), c_omega));
        }
    }
    let gm = sup.sandwich(|x, y| Ok(g_kernel_k(Complex::from(kf), x, y)))?;
    items.push(AuditItem::new("g_kernel", None, spectral_norm(&gm), norms.l1));
    items.push(AuditItem::new(
        "sum_estimate",
        None,
        fermi_sum(n),
        4.0 * ((n + 1) as f64).ln(),
    ));

    let res = analyze(n, v, l, grid, &PruferOptions::default())?;
    items.push(AuditItem::new(
        "anderson_inequality",
        None,
        res.ln_d,
        -res.anderson_integral + 1e-10,
    ));
    let all_pass = items.iter().all(|i| i.pass);
    Ok(AuditReport {
        n,
        l,
        nu,
        norms,
        smallness: small,
        items,
        all_pass,
    })
}
