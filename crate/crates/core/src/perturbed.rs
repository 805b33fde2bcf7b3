//! Dirichlet eigenproblem `-psi'' + V psi = mu psi` on `[-L, L]` via
//! modified Prufer variables, and eigenvalue-counting bounds.
//!
//! Outside `supp V = [-a, a]` the solutions are free and are written down
//! exactly, so only the support is integrated numerically. The phase is kept
//! as an integer number of half-turns plus a remainder in `[0, pi)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::free::free_eigenvalue;
use crate::model::{Grid, Potential};
use crate::ode::{DormandPrince, OdeOptions, OdeStats};
use crate::roots::brent;
use crate::{Error, Result};

/// Solver settings for the Prufer phase, eigenvalue search and
/// eigenfunction construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruferOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Tolerances for the `(psi, psi')` integration of eigenfunctions.
    pub eigenfunction_rtol: f64,
    pub eigenfunction_atol: f64,
    /// Distance of `theta(L)` from `pi Z` below which counting is ambiguous.
    pub count_tol: f64,
    /// Relative widening of the min-max bracket `[lambda_k - |V_-|, lambda_k + |V_+|]`.
    pub bracket_margin: f64,
    /// Number of geometric bracket expansions before giving up.
    pub max_bracket_expansions: usize,
    pub max_root_iterations: usize,
}

impl Default for PruferOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            eigenfunction_rtol: 1e-12,
            eigenfunction_atol: 1e-14,
            count_tol: 1e-9,
            bracket_margin: 1e-8,
            max_bracket_expansions: 60,
            max_root_iterations: 300,
        }
    }
}

impl PruferOptions {
    /// All tolerances in `(0, 1)` and iteration limits positive.
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("eigenfunction_rtol", self.eigenfunction_rtol),
            ("eigenfunction_atol", self.eigenfunction_atol),
            ("count_tol", self.count_tol),
            ("bracket_margin", self.bracket_margin),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("tolerance {name} must lie in (0, 1), got {t}")));
            }
        }
        if self.max_bracket_expansions == 0 || self.max_root_iterations == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }

    fn phase_ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }

    fn eigenfunction_ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.eigenfunction_rtol,
            atol: self.eigenfunction_atol,
            ..OdeOptions::default()
        }
    }
}

/// Result of a Prufer phase integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PruferTrajectory {
    pub mu: f64,
    /// `theta(L, mu)`
    pub theta_final: f64,
    /// `floor(theta(L) / pi)`
    pub half_turns: i64,
    /// `theta(L) - pi half_turns`, in `[0, pi)`
    pub remainder: f64,
    pub solver_stats: OdeStats,
}

#[derive(Clone, Copy, Debug)]
struct Phase {
    turns: i64,
    rem: f64,
}

impl Phase {
    fn from_angle(turns: i64, theta: f64) -> Self {
        let q = (theta / PI).floor();
        let mut rem = theta - q * PI;
        let mut turns = turns + q as i64;
        if rem >= PI {
            rem -= PI;
            turns += 1;
        }
        Self {
            turns,
            rem: rem.max(0.0),
        }
    }

    fn offset_from(&self, k: usize) -> f64 {
        (self.turns - k as i64) as f64 * PI + self.rem
    }
}

/// Angle of the direction `(y, x)` modulo `pi`, in `[0, pi)`.
fn angle_mod_pi(y: f64, x: f64) -> f64 {
    let (y, x) = if y < 0.0 { (-y, -x) } else { (y, x) };
    let a = y.atan2(x);
    if a >= PI {
        0.0
    } else {
        a.max(0.0)
    }
}

/// `1 - sin(y)/y`, accurate for small `y`.
fn one_minus_sinc(y: f64) -> f64 {
    if y.abs() < 0.5 {
        let y2 = y * y;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..20 {
            term *= -y2 / ((2 * n) as f64 * (2 * n + 1) as f64);
            sum -= term;
        }
        sum
    } else {
        1.0 - y.sin() / y
    }
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// Free solution vanishing at the wall, as a function of the distance `u`
/// from the wall. Exponential solutions are normalised to one at `u = d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exterior {
    /// `sin(k u)`
    Oscillatory { k: f64 },
    /// `sinh(kappa u) / sinh(kappa d)`
    Exponential { kappa: f64 },
    /// `u / d`
    Linear,
}

impl Exterior {
    fn new(mu: f64) -> Self {
        if mu > 0.0 {
            Exterior::Oscillatory { k: mu.sqrt() }
        } else if mu < 0.0 {
            Exterior::Exponential { kappa: (-mu).sqrt() }
        } else {
            Exterior::Linear
        }
    }

    fn value(&self, u: f64, d: f64) -> f64 {
        match *self {
            Exterior::Oscillatory { k } => (k * u).sin(),
            Exterior::Exponential { kappa } => {
                (kappa * (u - d)).exp() * (-2.0 * kappa * u).exp_m1() / (-2.0 * kappa * d).exp_m1()
            }
            Exterior::Linear => u / d,
        }
    }

    /// `(e(d), e'(d))`.
    fn end_state(&self, d: f64) -> (f64, f64) {
        match *self {
            Exterior::Oscillatory { k } => ((k * d).sin(), k * (k * d).cos()),
            Exterior::Exponential { kappa } => (1.0, kappa / (kappa * d).tanh()),
            Exterior::Linear => (1.0, 1.0 / d),
        }
    }

    fn scale(&self, d: f64) -> f64 {
        match *self {
            Exterior::Oscillatory { k } => k,
            Exterior::Exponential { kappa } => kappa,
            Exterior::Linear => 1.0 / d,
        }
    }

    /// `int_0^d e(u)^2 du`.
    fn norm2(&self, d: f64) -> f64 {
        match *self {
            Exterior::Oscillatory { k } => 0.5 * d * one_minus_sinc(2.0 * k * d),
            Exterior::Exponential { kappa } => {
                let x = kappa * d;
                let g = if x < 0.5 {
                    let y2 = 4.0 * x * x;
                    let mut term = 1.0;
                    let mut sum = 0.0;
                    for n in 1..25 {
                        term *= y2 / ((2 * n) as f64 * (2 * n + 1) as f64);
                        sum += term;
                    }
                    sum / (2.0 * x.sinh().powi(2))
                } else {
                    let q = (-2.0 * x).exp();
                    let inv_sinh2 = 4.0 * q / ((1.0 - q) * (1.0 - q));
                    1.0 / (2.0 * x * x.tanh()) - 0.5 * inv_sinh2
                };
                d * g
            }
            Exterior::Linear => d / 3.0,
        }
    }

    /// `int_0^d sin(p u) e(u) du`.
    fn overlap_sin(&self, p: f64, d: f64) -> f64 {
        match *self {
            Exterior::Oscillatory { k } => 0.5 * d * (sinc((p - k) * d) - sinc((p + k) * d)),
            Exterior::Exponential { kappa } => {
                let (s, c) = (p * d).sin_cos();
                (kappa / (kappa * d).tanh() * s - p * c) / (p * p + kappa * kappa)
            }
            Exterior::Linear => {
                let (s, c) = (p * d).sin_cos();
                (s / d - p * c) / (p * p)
            }
        }
    }
}

fn scale_floor(v: &Potential, l: f64) -> f64 {
    (1e-2 * v.sup_abs()).max(1e-2 * free_eigenvalue(1, l))
}

fn interior_segments(v: &Potential) -> Vec<(f64, f64)> {
    v.breakpoints()
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect()
}

fn check_box(v: &Potential, l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Config(format!("L must be > 0, got {l}")));
    }
    if v.support_half_width() > l {
        return Err(Error::Config(format!(
            "potential support [-{a}, {a}] exceeds the box [-{l}, {l}]",
            a = v.support_half_width()
        )));
    }
    Ok(())
}

fn phase(mu: f64, v: &Potential, l: f64, opts: &PruferOptions, stats: &mut OdeStats) -> Result<Phase> {
    check_box(v, l)?;
    let a = v.support_half_width();
    let d = l - a;
    let floor = scale_floor(v, l);
    let c = mu.max(floor).sqrt();
    let exact = mu >= floor;
    let ext = Exterior::new(mu);

    let mut ph = if d <= 0.0 {
        Phase { turns: 0, rem: 0.0 }
    } else {
        match ext {
            Exterior::Oscillatory { k } if exact => Phase::from_angle(0, k * d),
            Exterior::Oscillatory { k } => {
                let t = (k * d / PI).floor();
                let beta = k * d - t * PI;
                Phase {
                    turns: t as i64,
                    rem: angle_mod_pi(beta.sin(), k / c * beta.cos()),
                }
            }
            Exterior::Exponential { kappa } => Phase {
                turns: 0,
                rem: angle_mod_pi((kappa * d).tanh(), kappa / c),
            },
            Exterior::Linear => Phase {
                turns: 0,
                rem: angle_mod_pi(d, 1.0 / c),
            },
        }
    };

    let mut dp = DormandPrince::new(opts.phase_ode());
    for (lo, hi) in interior_segments(v) {
        let mut f = |x: f64, th: &[f64; 1]| {
            let (s, co) = th[0].sin_cos();
            [c * co * co + (mu - v.evaluate_within(x, lo, hi)) / c * s * s]
        };
        let th = dp.integrate(&mut f, lo, [ph.rem], hi)?;
        ph = Phase::from_angle(ph.turns, th[0]);
    }
    stats.merge(&dp.stats);

    if d > 0.0 {
        if let (Exterior::Oscillatory { k }, true) = (ext, exact) {
            ph = Phase::from_angle(ph.turns, ph.rem + k * d);
        } else {
            let (psi, dpsi) = (ph.rem.sin(), c * ph.rem.cos());
            match ext {
                Exterior::Oscillatory { k } => {
                    let phi0 = psi.atan2(dpsi / k);
                    let total = k * d + phi0;
                    let cnt = (total / PI).floor();
                    let beta = total - cnt * PI;
                    ph = Phase {
                        turns: ph.turns + cnt as i64,
                        rem: angle_mod_pi(beta.sin(), k / c * beta.cos()),
                    };
                }
                Exterior::Exponential { kappa } => {
                    let t = (kappa * d).tanh();
                    let pe = psi + dpsi / kappa * t;
                    let dpe = psi * kappa * t + dpsi;
                    ph = Phase {
                        turns: ph.turns + i64::from(pe <= 0.0),
                        rem: angle_mod_pi(pe, dpe / c),
                    };
                }
                Exterior::Linear => {
                    let pe = psi + dpsi * d;
                    ph = Phase {
                        turns: ph.turns + i64::from(pe <= 0.0),
                        rem: angle_mod_pi(pe, dpsi / c),
                    };
                }
            }
        }
    }
    Ok(ph)
}

/// Prufer phase `theta(L, mu)` of the solution with `theta(-L) = 0`.
///
/// For `mu` above a small floor this is the solution of
/// `theta' = sqrt(mu) - (V / sqrt(mu)) sin^2(theta)`; below the floor a fixed
/// scale replaces `sqrt(mu)`, which leaves the zeros of `psi` (the points
/// where `theta` crosses `pi Z`) unchanged.
pub fn prufer_phase(mu: f64, v: &Potential, l: f64, opts: &PruferOptions) -> Result<PruferTrajectory> {
    let mut stats = OdeStats::default();
    let ph = phase(mu, v, l, opts, &mut stats)?;
    Ok(PruferTrajectory {
        mu,
        theta_final: ph.turns as f64 * PI + ph.rem,
        half_turns: ph.turns,
        remainder: ph.rem,
        solver_stats: stats,
    })
}

/// `mu_k`, the unique root of `theta(L, mu) = k pi`.
pub fn perturbed_eigenvalue(k: usize, v: &Potential, l: f64, opts: &PruferOptions) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("eigen index k must be >= 1".into()));
    }
    let lam = free_eigenvalue(k, l);
    let margin = opts.bracket_margin * (lam + v.sup_abs()).max(f64::MIN_POSITIVE);
    let mut lo = lam - v.sup_negative() - margin;
    let mut hi = lam + v.sup_positive() + margin;
    let mut stats = OdeStats::default();
    let mut g = |mu: f64| -> Result<f64> { Ok(phase(mu, v, l, opts, &mut stats)?.offset_from(k)) };
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    let width = hi - lo;
    let mut expansions = 0;
    while glo > 0.0 || ghi < 0.0 {
        if expansions >= opts.max_bracket_expansions {
            return Err(Error::Bracket {
                k,
                detail: format!("no sign change on [{lo}, {hi}] after {expansions} expansions"),
            });
        }
        let step = width * 2f64.powi(expansions as i32);
        if glo > 0.0 {
            hi = lo;
            ghi = glo;
            lo -= step;
            glo = g(lo)?;
        } else {
            lo = hi;
            glo = ghi;
            hi += step;
            ghi = g(hi)?;
        }
        expansions += 1;
    }
    let xtol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
    brent(g, lo, hi, glo, ghi, xtol, opts.max_root_iterations)
}

/// `mu_1 < ... < mu_n`, solved in parallel.
pub fn perturbed_spectrum(n: usize, v: &Potential, l: f64, opts: &PruferOptions) -> Result<Vec<f64>> {
    (1..=n)
        .into_par_iter()
        .map(|k| perturbed_eigenvalue(k, v, l, opts))
        .collect()
}

/// Number of eigenvalues of `H_V` below `e`: `floor(theta(L, e) / pi)`.
pub fn count_below(e: f64, v: &Potential, l: f64, opts: &PruferOptions) -> Result<usize> {
    let mut stats = OdeStats::default();
    let ph = phase(e, v, l, opts, &mut stats)?;
    if ph.rem < opts.count_tol || PI - ph.rem < opts.count_tol {
        return Err(Error::Ambiguous {
            energy: e,
            tol: opts.count_tol,
        });
    }
    Ok(ph.turns.max(0) as usize)
}

/// Eigenfunction of `H_V` in closed form on the exteriors plus samples on
/// the support nodes, normalised with `psi'(-L) > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenfunctionModel {
    pub k: usize,
    pub mu: f64,
    pub l: f64,
    pub a: f64,
    pub exterior: Exterior,
    /// `psi(x) = left_amplitude e(x + L)` for `x < -a`
    pub left_amplitude: f64,
    /// `psi(x) = right_amplitude e(L - x)` for `x > a`
    pub right_amplitude: f64,
    pub support_nodes: Vec<f64>,
    pub support_values: Vec<f64>,
    /// Relative mismatch of `(psi, psi'/s)` when joining the right exterior.
    pub matching_residual: f64,
}

impl EigenfunctionModel {
    /// Build from an accepted eigenvalue. `support` must be the part of a grid
    /// covering exactly `[-a, a]`.
    pub fn build(k: usize, mu: f64, v: &Potential, l: f64, support: &Grid, opts: &PruferOptions) -> Result<Self> {
        check_box(v, l)?;
        let a = v.support_half_width();
        let d = l - a;
        let ext = Exterior::new(mu);
        let (mut psi, mut dpsi) = if d > 0.0 { ext.end_state(d) } else { (0.0, 1.0) };

        let mut dp = DormandPrince::new(opts.eigenfunction_ode());
        let mut values = Vec::with_capacity(support.len());
        let nodes = &support.nodes;
        let mut idx = 0;
        for (lo, hi) in interior_segments(v) {
            let mut f = |x: f64, y: &[f64; 2]| [y[1], (v.evaluate_within(x, lo, hi) - mu) * y[0]];
            let mut x = lo;
            while idx < nodes.len() && nodes[idx] < hi {
                let y = dp.integrate(&mut f, x, [psi, dpsi], nodes[idx])?;
                psi = y[0];
                dpsi = y[1];
                values.push(psi);
                x = nodes[idx];
                idx += 1;
            }
            let y = dp.integrate(&mut f, x, [psi, dpsi], hi)?;
            psi = y[0];
            dpsi = y[1];
        }
        if values.len() != nodes.len() {
            return Err(Error::Config(
                "support grid does not match the potential's support".into(),
            ));
        }

        let s = ext.scale(d.max(f64::MIN_POSITIVE));
        let (b, residual) = if d > 0.0 {
            let (f, fd) = ext.end_state(d);
            let fx = -fd;
            let den = f * f + fx * fx / (s * s);
            let b = (psi * f + dpsi * fx / (s * s)) / den;
            let r = ((psi - b * f).powi(2) + ((dpsi - b * fx) / s).powi(2)).sqrt()
                / (psi * psi + dpsi * dpsi / (s * s)).sqrt();
            (b, r)
        } else {
            (0.0, psi.abs() / (psi * psi + dpsi * dpsi / (s * s)).sqrt())
        };

        let interior: f64 = values.iter().zip(&support.weights).map(|(p, w)| w * p * p).sum();
        let ext_norm = if d > 0.0 { ext.norm2(d) } else { 0.0 };
        let norm = (ext_norm * (1.0 + b * b) + interior).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Invariant(format!("eigenfunction {k} has norm {norm}")));
        }
        values.iter_mut().for_each(|p| *p /= norm);
        Ok(Self {
            k,
            mu,
            l,
            a,
            exterior: ext,
            left_amplitude: 1.0 / norm,
            right_amplitude: b / norm,
            support_nodes: nodes.clone(),
            support_values: values,
            matching_residual: residual,
        })
    }

    fn d(&self) -> f64 {
        self.l - self.a
    }

    /// `psi(x)` for `x` outside the support.
    pub fn exterior_value(&self, x: f64) -> Option<f64> {
        let d = self.d();
        if x < -self.a {
            Some(self.left_amplitude * self.exterior.value(x + self.l, d))
        } else if x > self.a {
            Some(self.right_amplitude * self.exterior.value(self.l - x, d))
        } else {
            None
        }
    }

    /// Exterior part of `(phi_j, psi)`: integrals over `[-L, -a]` and `[a, L]`.
    pub fn exterior_overlap(&self, j: usize) -> f64 {
        let d = self.d();
        if d <= 0.0 {
            return 0.0;
        }
        let p = crate::free::free_wavenumber(j, self.l);
        let sigma = crate::free::free_sign(j);
        let right_sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let i = self.exterior.overlap_sin(p, d);
        sigma / self.l.sqrt() * i * (self.left_amplitude + right_sign * self.right_amplitude)
    }

    /// `||psi||^2` on the exteriors.
    pub fn exterior_norm2(&self) -> f64 {
        let d = self.d();
        if d <= 0.0 {
            return 0.0;
        }
        self.exterior.norm2(d) * (self.left_amplitude.powi(2) + self.right_amplitude.powi(2))
    }
}

/// Normalised eigenpair sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedEigenpair {
    pub k: usize,
    pub mu: f64,
    pub psi: Vec<f64>,
    /// Sign of `psi'(-L)`; `+1` by convention.
    pub boundary_sign: f64,
    pub matching_residual: f64,
}

/// Eigenfunction for an accepted eigenvalue `mu_k`, sampled on `grid`.
pub fn perturbed_eigenfunction(
    k: usize,
    mu_k: f64,
    v: &Potential,
    grid: &Grid,
    opts: &PruferOptions,
) -> Result<PerturbedEigenpair> {
    let l = grid.half_length();
    let range = grid.range_within(v.support())?;
    let support = grid.restrict(v.support())?;
    let model = EigenfunctionModel::build(k, mu_k, v, l, &support, opts)?;
    let psi = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if range.contains(&i) {
                model.support_values[i - range.start]
            } else {
                model.exterior_value(x).unwrap_or(0.0)
            }
        })
        .collect();
    Ok(PerturbedEigenpair {
        k,
        mu: mu_k,
        psi,
        boundary_sign: 1.0,
        matching_residual: model.matching_residual,
    })
}

/// Smallest `c_alpha` with `|V_-(x)| <= c_alpha (1 + |x|)^{-alpha-1}` on the
/// sampled support.
pub fn minimal_bargmann_constant(v: &Potential, alpha: f64) -> f64 {
    majorant_samples(v)
        .into_iter()
        .map(|x| (-v.evaluate(x)).max(0.0) * (1.0 + x.abs()).powf(alpha + 1.0))
        .fold(0.0, f64::max)
}

fn majorant_samples(v: &Potential) -> Vec<f64> {
    let g = v.support_grid();
    let mut xs: Vec<f64> = g.nodes.clone();
    for w in g.panel_boundaries.windows(2) {
        for i in 0..=48 {
            xs.push(w[0] + (w[1] - w[0]) * i as f64 / 48.0);
        }
    }
    xs
}

/// Bargmann-type upper bound `(2L/pi) sqrt(E) + C_E` on the number of
/// eigenvalues below `E`, with
/// `C_E = [(2 c_alpha / alpha pi)(|V_-|_inf + E)^{1/2} + |V_-|_inf] / 2E`.
pub fn bargmann_upper_bound(e: f64, v: &Potential, alpha: f64, c_alpha: f64, l: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("Bargmann bound needs E > 0, got {e}")));
    }
    if !(alpha > 0.0) || !(c_alpha >= 0.0) {
        return Err(Error::Precondition(format!(
            "need alpha > 0 and c_alpha >= 0, got {alpha}, {c_alpha}"
        )));
    }
    let needed = minimal_bargmann_constant(v, alpha);
    if needed > c_alpha * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "|V_-| is not dominated by c_alpha / (1+|x|)^(alpha+1): need c_alpha >= {needed}"
        )));
    }
    let vm = v.norms().linf_minus;
    let c_e = (2.0 * c_alpha / (alpha * PI) * (vm + e).sqrt() + vm) / (2.0 * e);
    Ok(2.0 * l / PI * e.sqrt() + c_e)
}

/// Lower bound `(2L/pi) sqrt(E) - (2 |V_+|_1 / pi) / sqrt(E) - 1`, valid for
/// `E >= 2 |V_+|_1 / L`.
pub fn counting_lower_bound(e: f64, v: &Potential, l: f64) -> Result<f64> {
    let vp = v.norms().l1_plus;
    if !(e > 0.0) || e < 2.0 * vp / l {
        return Err(Error::Domain(format!(
            "lower counting bound needs E >= 2 |V_+|_1 / L = {}, got {e}",
            2.0 * vp / l
        )));
    }
    Ok(2.0 * l / PI * e.sqrt() - 2.0 * vp / PI / e.sqrt() - 1.0)
}
