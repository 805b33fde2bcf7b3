//! Potentials, quadrature grids, system configuration and basic integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::GaussRule;
use crate::{Complex, Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(a: f64) -> Self {
        Self { lo: -a, hi: a }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Parameters of a potential family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `v0` on `[-a, a]`.
    SquareWell { v0: f64, a: f64 },
    /// `v0 exp(-x^2 / 2 sigma^2)` cut off outside `[-a, a]`.
    GaussianTruncated { v0: f64, sigma: f64, a: f64 },
    /// Linear interpolation of `values` at increasing `abscissae`, zero outside.
    Table { abscissae: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Part {
    Full,
    Positive,
    Negative,
}

/// A real potential with compact support `[-a, a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    spec: PotentialSpec,
    scale: f64,
    part: Part,
    a: f64,
    breakpoints: Vec<f64>,
}

impl Potential {
    pub fn new(spec: PotentialSpec) -> Result<Self> {
        let a = match &spec {
            PotentialSpec::SquareWell { v0, a } => {
                check_finite("v0", *v0)?;
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::Config(format!("square_well: a must be >= 0, got {a}")));
                }
                *a
            }
            PotentialSpec::GaussianTruncated { v0, sigma, a } => {
                check_finite("v0", *v0)?;
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::Config(format!(
                        "gaussian_truncated: sigma must be > 0, got {sigma}"
                    )));
                }
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::Config(format!("gaussian_truncated: a must be >= 0, got {a}")));
                }
                *a
            }
            PotentialSpec::Table { abscissae, values } => {
                if abscissae.len() < 2 || abscissae.len() != values.len() {
                    return Err(Error::Config(format!(
                        "table: need >= 2 abscissae and as many values (got {} and {})",
                        abscissae.len(),
                        values.len()
                    )));
                }
                if abscissae.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::Config("table: non-finite entry".into()));
                }
                if abscissae.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("table: abscissae must be strictly increasing".into()));
                }
                abscissae[0].abs().max(abscissae[abscissae.len() - 1].abs())
            }
        };
        let mut pot = Self {
            spec,
            scale: 1.0,
            part: Part::Full,
            a,
            breakpoints: Vec::new(),
        };
        pot.breakpoints = pot.compute_breakpoints();
        Ok(pot)
    }

    pub fn square_well(v0: f64, a: f64) -> Result<Self> {
        Self::new(PotentialSpec::SquareWell { v0, a })
    }

    pub fn gaussian_truncated(v0: f64, sigma: f64, a: f64) -> Result<Self> {
        Self::new(PotentialSpec::GaussianTruncated { v0, sigma, a })
    }

    pub fn table(abscissae: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(PotentialSpec::Table { abscissae, values })
    }

    /// The zero potential (support shrunk to the origin).
    pub fn zero() -> Self {
        Self::square_well(0.0, 0.0).expect("zero potential is valid")
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn family_tag(&self) -> &'static str {
        match self.spec {
            PotentialSpec::SquareWell { .. } => "square_well",
            PotentialSpec::GaussianTruncated { .. } => "gaussian_truncated",
            PotentialSpec::Table { .. } => "table",
        }
    }

    /// Half width `a` of the support `[-a, a]`.
    pub fn support_half_width(&self) -> f64 {
        self.a
    }

    pub fn support(&self) -> Interval {
        Interval::symmetric(self.a)
    }

    /// True when `V` vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.a == 0.0 || self.scale == 0.0 || (self.sup_positive() == 0.0 && self.sup_negative() == 0.0)
    }

    /// Positions in `[-a, a]` where `V` or its derivative may jump, sorted,
    /// always including `±a`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `c V`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut p = self.clone();
        p.scale *= c;
        p.breakpoints = p.compute_breakpoints();
        p
    }

    /// `V_+ = max(V, 0)`.
    pub fn positive_part(&self) -> Self {
        self.with_part(Part::Positive)
    }

    /// `V_- = min(V, 0)`.
    pub fn negative_part(&self) -> Self {
        self.with_part(Part::Negative)
    }

    fn with_part(&self, part: Part) -> Self {
        let mut p = self.clone();
        if p.part == Part::Full || p.part == part {
            p.part = part;
        } else {
            p.scale = 0.0;
        }
        p.breakpoints = p.compute_breakpoints();
        p
    }

    fn raw(&self, x: f64) -> f64 {
        match &self.spec {
            PotentialSpec::SquareWell { v0, a } => {
                if x.abs() <= *a {
                    *v0
                } else {
                    0.0
                }
            }
            PotentialSpec::GaussianTruncated { v0, sigma, a } => {
                if x.abs() <= *a {
                    v0 * (-x * x / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            }
            PotentialSpec::Table { abscissae, values } => {
                let n = abscissae.len();
                if x < abscissae[0] || x > abscissae[n - 1] {
                    return 0.0;
                }
                let i = abscissae.partition_point(|&t| t <= x).clamp(1, n - 1);
                let (x0, x1) = (abscissae[i - 1], abscissae[i]);
                let t = (x - x0) / (x1 - x0);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }

    /// `V(x)`; exactly zero for `|x| > a`.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x.abs() > self.a {
            return 0.0;
        }
        let v = self.scale * self.raw(x);
        match self.part {
            Part::Full => v,
            Part::Positive => v.max(0.0),
            Part::Negative => v.min(0.0),
        }
    }

    /// `V(x)` with `x` pulled into the open segment `(lo, hi)`, so that
    /// one-sided values are used at jumps.
    pub fn evaluate_within(&self, x: f64, lo: f64, hi: f64) -> f64 {
        let eps = 1e-12 * (hi - lo);
        self.evaluate(x.clamp(lo + eps, hi - eps))
    }

    fn extreme_samples(&self) -> Vec<f64> {
        match &self.spec {
            PotentialSpec::SquareWell { v0, .. } => vec![*v0],
            PotentialSpec::GaussianTruncated { v0, .. } => vec![*v0],
            PotentialSpec::Table { values, .. } => values.clone(),
        }
    }

    /// Exact `sup V_+`.
    pub fn sup_positive(&self) -> f64 {
        if self.a == 0.0 || self.part == Part::Negative {
            return 0.0;
        }
        self.extreme_samples()
            .iter()
            .map(|v| (self.scale * v).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Exact `sup |V_-|`.
    pub fn sup_negative(&self) -> f64 {
        if self.a == 0.0 || self.part == Part::Positive {
            return 0.0;
        }
        self.extreme_samples()
            .iter()
            .map(|v| (-self.scale * v).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Exact `sup |V|`.
    pub fn sup_abs(&self) -> f64 {
        self.sup_positive().max(self.sup_negative())
    }

    fn compute_breakpoints(&self) -> Vec<f64> {
        let mut b = vec![-self.a, self.a];
        if let PotentialSpec::Table { abscissae, values } = &self.spec {
            b.extend(abscissae.iter().copied());
            if self.part != Part::Full {
                for i in 1..values.len() {
                    let (v0, v1) = (values[i - 1], values[i]);
                    if v0 * v1 < 0.0 {
                        let t = v0 / (v0 - v1);
                        b.push(abscissae[i - 1] + t * (abscissae[i] - abscissae[i - 1]));
                    }
                }
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + x.abs()));
        b
    }

    /// A fine grid on the support alone, used for norms and sampling.
    pub fn support_grid(&self) -> Grid {
        if self.a == 0.0 {
            return Grid::empty();
        }
        let mut h: f64 = 0.0625f64.min(self.a / 4.0);
        if let PotentialSpec::GaussianTruncated { sigma, .. } = self.spec {
            h = h.min(sigma / 4.0);
        }
        let params = GridParams::default();
        let k_hint = 2.0 * PI / (h * params.nodes_per_wavelength as f64);
        Grid::new(self.a, params, k_hint, self.support(), self.breakpoints())
            .expect("support grid of a valid potential")
    }

    /// Norms computed on [`Potential::support_grid`].
    pub fn norms(&self) -> PotentialNorms {
        potential_norms(self, &self.support_grid())
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

/// Discretisation parameters for [`Grid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    pub nodes_per_wavelength: usize,
    pub nodes_per_panel: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            nodes_per_wavelength: 16,
            nodes_per_panel: 12,
        }
    }
}

impl GridParams {
    /// The same parameters with `factor` times the panel density.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nodes_per_wavelength: self.nodes_per_wavelength * factor,
            ..*self
        }
    }
}

/// Composite Gauss-Legendre quadrature on `[-L, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panel_boundaries: Vec<f64>,
    half_length: f64,
    params: GridParams,
    wavenumber_hint: f64,
}

impl Grid {
    fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            weights: Vec::new(),
            panel_boundaries: vec![0.0],
            half_length: 0.0,
            params: GridParams::default(),
            wavenumber_hint: 1.0,
        }
    }

    /// Grid on `[-l, l]` with panel boundaries at `±support`, `0`, and every
    /// point of `breaks` inside `[-l, l]`.
    pub fn new(l: f64, params: GridParams, wavenumber_hint: f64, support: Interval, breaks: &[f64]) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("grid: L must be > 0, got {l}")));
        }
        if params.nodes_per_wavelength < 8 {
            return Err(Error::Config(format!(
                "grid: nodes_per_wavelength must be >= 8, got {}",
                params.nodes_per_wavelength
            )));
        }
        if params.nodes_per_panel < 1 {
            return Err(Error::Config("grid: nodes_per_panel must be >= 1".into()));
        }
        if !(wavenumber_hint.is_finite() && wavenumber_hint > 0.0) {
            return Err(Error::Config(format!(
                "grid: wavenumber hint must be > 0, got {wavenumber_hint}"
            )));
        }
        let slack = 1e-12 * l;
        if support.lo < -l - slack || support.hi > l + slack || support.lo > support.hi {
            return Err(Error::Config(format!(
                "grid: support [{}, {}] exceeds [-{l}, {l}]",
                support.lo, support.hi
            )));
        }
        let mut cuts = vec![-l, l, 0.0, support.lo.max(-l), support.hi.min(l)];
        cuts.extend(breaks.iter().copied().filter(|b| b.abs() < l));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-13 * l);
        let h_max = 2.0 * PI / wavenumber_hint / params.nodes_per_wavelength as f64;
        let rule = GaussRule::new(params.nodes_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut panel_boundaries = vec![cuts[0]];
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let m = ((hi - lo) / h_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            for p in 0..m {
                let a = lo + (hi - lo) * p as f64 / m as f64;
                let b = if p + 1 == m {
                    hi
                } else {
                    lo + (hi - lo) * (p + 1) as f64 / m as f64
                };
                for (x, wt) in rule.mapped(a, b) {
                    nodes.push(x);
                    weights.push(wt);
                }
                panel_boundaries.push(b);
            }
        }
        Ok(Self {
            nodes,
            weights,
            panel_boundaries,
            half_length: l,
            params,
            wavenumber_hint,
        })
    }

    /// Grid on `[-l, l]` resolving `V`'s breakpoints.
    pub fn for_potential(l: f64, params: GridParams, wavenumber_hint: f64, v: &Potential) -> Result<Self> {
        Self::new(l, params, wavenumber_hint, v.support(), v.breakpoints())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn params(&self) -> GridParams {
        self.params
    }

    pub fn wavenumber_hint(&self) -> f64 {
        self.wavenumber_hint
    }

    /// Whether `x` coincides with a panel boundary.
    pub fn has_boundary(&self, x: f64) -> bool {
        let tol = 1e-12 * self.half_length.max(1.0);
        self.panel_boundaries.iter().any(|b| (b - x).abs() <= tol)
    }

    /// Index range of the nodes inside `iv`. `iv`'s endpoints must be panel
    /// boundaries so that the sub-rule is itself a composite rule.
    pub fn range_within(&self, iv: Interval) -> Result<std::ops::Range<usize>> {
        if iv.len() <= 0.0 {
            return Ok(0..0);
        }
        if !self.has_boundary(iv.lo) || !self.has_boundary(iv.hi) {
            return Err(Error::Config(format!(
                "grid: [{}, {}] is not aligned with panel boundaries",
                iv.lo, iv.hi
            )));
        }
        let start = self.nodes.partition_point(|&x| x < iv.lo);
        let end = self.nodes.partition_point(|&x| x <= iv.hi);
        Ok(start..end)
    }

    /// Sub-grid of the nodes inside `iv`.
    pub fn restrict(&self, iv: Interval) -> Result<Grid> {
        let r = self.range_within(iv)?;
        let tol = 1e-12 * self.half_length.max(1.0);
        let mut pb: Vec<f64> = self
            .panel_boundaries
            .iter()
            .copied()
            .filter(|&b| b >= iv.lo - tol && b <= iv.hi + tol)
            .collect();
        if pb.is_empty() {
            pb.push(iv.lo);
        }
        Ok(Grid {
            nodes: self.nodes[r.clone()].to_vec(),
            weights: self.weights[r].to_vec(),
            panel_boundaries: pb,
            half_length: self.half_length,
            params: self.params,
            wavenumber_hint: self.wavenumber_hint,
        })
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Gauss-Legendre grid on `[-l, l]` with panel width at most
/// `(2 pi / wavenumber_hint) / nodes_per_wavelength` and breakpoints at the
/// support endpoints and the origin.
pub fn build_grid(l: f64, nodes_per_wavelength: usize, wavenumber_hint: f64, support: Interval) -> Result<Grid> {
    let params = GridParams {
        nodes_per_wavelength,
        ..GridParams::default()
    };
    Grid::new(l, params, wavenumber_hint, support, &[])
}

/// Norms of a potential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialNorms {
    /// `||V||_1`
    pub l1: f64,
    /// `||V||_inf`
    pub linf: f64,
    /// `||X V||_1`
    pub x1_l1: f64,
    /// `||X^2 V||_1`
    pub x2_l1: f64,
    /// `||V_+||_1`
    pub l1_plus: f64,
    /// `||V_-||_inf`
    pub linf_minus: f64,
}

/// Norms of `V` by quadrature on `grid`; sup norms by sampling every panel on
/// the support at four times the node density, combined with the exact family
/// maxima.
pub fn potential_norms(v: &Potential, grid: &Grid) -> PotentialNorms {
    let mut n = PotentialNorms::default();
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let val = v.evaluate(x);
        n.l1 += w * val.abs();
        n.x1_l1 += w * (x * val).abs();
        n.x2_l1 += w * (x * x * val).abs();
        n.l1_plus += w * val.max(0.0);
    }
    let a = v.support_half_width();
    let per_panel = 4 * grid.params.nodes_per_panel;
    let mut sup = 0.0f64;
    let mut sup_minus = 0.0f64;
    for w in grid.panel_boundaries.windows(2) {
        let (lo, hi) = (w[0].max(-a), w[1].min(a));
        if lo >= hi {
            continue;
        }
        for i in 0..=per_panel {
            let x = lo + (hi - lo) * i as f64 / per_panel as f64;
            let val = v.evaluate_within(x, w[0], w[1]);
            sup = sup.max(val.abs());
            sup_minus = sup_minus.max(-val);
        }
    }
    n.linf = sup.max(v.sup_abs());
    n.linf_minus = sup_minus.max(v.sup_negative());
    n
}

/// `V_L(s) = int_{-L}^{L} |V(x)| e^{s|x|} dx`.
pub fn v_transform(v: &Potential, l: f64, s: f64, grid: &Grid) -> f64 {
    assert!(s >= 0.0, "v_transform needs s >= 0");
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .filter(|(x, _)| x.abs() <= l)
        .map(|(&x, &w)| w * v.evaluate(x).abs() * (s * x.abs()).exp())
        .sum()
}

/// `(f, g) = sum_i w_i conj(f_i) g_i`.
pub fn inner_product(f: &[Complex], g: &[Complex], grid: &Grid) -> Complex {
    assert_eq!(f.len(), grid.len(), "inner_product: f has wrong length");
    assert_eq!(g.len(), grid.len(), "inner_product: g has wrong length");
    f.iter()
        .zip(g)
        .zip(&grid.weights)
        .map(|((a, b), &w)| a.conj() * b * w)
        .sum()
}

/// Real version of [`inner_product`].
pub fn inner_product_real(f: &[f64], g: &[f64], grid: &Grid) -> f64 {
    assert_eq!(f.len(), grid.len(), "inner_product: f has wrong length");
    assert_eq!(g.len(), grid.len(), "inner_product: g has wrong length");
    f.iter().zip(g).zip(&grid.weights).map(|((a, b), w)| a * b * w).sum()
}

/// Particle number, box size, density and Fermi energy of one instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub rho: f64,
    pub n: usize,
    pub l: f64,
    pub nu: f64,
}

impl SystemConfig {
    /// Thermodynamic convention `L = (N + 1/2) / (2 rho)`, `nu = pi^2 rho^2`.
    pub fn thermodynamic(rho: f64, n: usize) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {rho}")));
        }
        if n == 0 {
            return Err(Error::Config("N must be >= 1".into()));
        }
        let l = (n as f64 + 0.5) / (2.0 * rho);
        Ok(Self {
            rho,
            n,
            l,
            nu: crate::free::fermi_energy(n, l),
        })
    }

    /// Fixed box `[-L, L]` with `N` particles.
    pub fn from_box(n: usize, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("L must be > 0, got {l}")));
        }
        Ok(Self {
            rho: (n as f64 + 0.5) / (2.0 * l),
            n,
            l,
            nu: crate::free::fermi_energy(n, l),
        })
    }

    pub fn fermi_wavenumber(&self) -> f64 {
        self.nu.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(v0: f64, a: f64) -> Potential {
        Potential::square_well(v0, a).unwrap()
    }

    #[test]
    fn grid_weights_sum_to_box_length() {
        let g = build_grid(1.0, 16, PI / 2.0, Interval::symmetric(1.0)).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.has_boundary(0.0) && g.has_boundary(1.0) && g.has_boundary(-1.0));
    }

    #[test]
    fn grid_integrates_odd_and_trig() {
        let g = build_grid(1.0, 16, PI / 2.0, Interval::symmetric(0.5)).unwrap();
        assert!(g.integrate(|x| x).abs() < 1e-12);
        let s = g.integrate(|x| (PI * x / 2.0).sin().powi(2));
        assert!((s - 1.0).abs() < 1e-12);
        assert!(g.has_boundary(0.5) && g.has_boundary(-0.5));
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(1.0, 16, 1.0, Interval::symmetric(2.0)).is_err());
        assert!(build_grid(-1.0, 16, 1.0, Interval::symmetric(0.5)).is_err());
        assert!(build_grid(1.0, 4, 1.0, Interval::symmetric(0.5)).is_err());
    }

    #[test]
    fn panel_width_respects_wavelength() {
        let k = 7.0;
        let g = build_grid(3.0, 16, k, Interval::symmetric(1.0)).unwrap();
        let hmax = 2.0 * PI / k / 16.0;
        assert!(g
            .panel_boundaries
            .windows(2)
            .all(|w| w[1] - w[0] <= hmax * (1.0 + 1e-12)));
    }

    #[test]
    fn square_well_norms() {
        let v = sq(-0.5, 1.0);
        let n = v.norms();
        assert!((n.l1 - 1.0).abs() < 1e-13);
        assert!((n.linf - 0.5).abs() < 1e-15);
        assert_eq!(n.l1_plus, 0.0);
        assert!((n.x2_l1 - 1.0 / 3.0).abs() < 1e-13);
        assert!((n.x1_l1 - 0.5).abs() < 1e-13);
        assert!((n.linf_minus - 0.5).abs() < 1e-15);
    }

    #[test]
    fn evaluate_is_zero_outside_support() {
        let v = Potential::gaussian_truncated(1.0, 0.5, 1.0).unwrap();
        assert_eq!(v.evaluate(1.0 + 1e-15), 0.0);
        assert_eq!(v.evaluate(-3.0), 0.0);
        assert!(v.evaluate(1.0) > 0.0);
        let t = Potential::table(vec![-1.0, 0.0, 0.5], vec![1.0, -1.0, 2.0]).unwrap();
        assert_eq!(t.support_half_width(), 1.0);
        assert!((t.evaluate(-0.5) - 0.0).abs() < 1e-15);
        assert!((t.evaluate(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(t.evaluate(0.75), 0.0);
    }

    #[test]
    fn parts_of_sign_changing_table() {
        let t = Potential::table(vec![-1.0, 1.0], vec![1.0, -1.0]).unwrap();
        let p = t.positive_part();
        let m = t.negative_part();
        for x in [-0.9, -0.2, 0.0, 0.3, 0.95] {
            assert_eq!(p.evaluate(x) + m.evaluate(x), t.evaluate(x));
        }
        assert!(p.breakpoints().iter().any(|b| b.abs() < 1e-15));
        let n = t.norms();
        assert!((n.l1_plus - 0.5).abs() < 1e-13);
        assert!((n.l1 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn v_transform_values() {
        let v = sq(-0.5, 1.0);
        let g = Grid::for_potential(2.0, GridParams::default(), 4.0, &v).unwrap();
        assert!((v_transform(&v, 2.0, 0.0, &g) - 1.0).abs() < 1e-13);
        let want = 0.5 * 2.0 * (1f64.exp() - 1.0);
        assert!((v_transform(&v, 2.0, 1.0, &g) - want).abs() < 1e-12);
        assert_eq!(v_transform(&Potential::zero(), 2.0, 3.0, &g), 0.0);
    }

    #[test]
    fn thermodynamic_convention() {
        let c = SystemConfig::thermodynamic(1.0, 10).unwrap();
        assert_eq!(c.l, 5.25);
        assert!((c.nu - PI * PI).abs() < 1e-12);
        let c = SystemConfig::thermodynamic(0.7, 33).unwrap();
        assert!((c.nu - (PI * 0.7).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn restrict_to_support() {
        let v = sq(1.0, 0.5);
        let g = Grid::for_potential(3.0, GridParams::default(), 3.0, &v).unwrap();
        let s = g.restrict(v.support()).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(g.restrict(Interval::symmetric(0.3)).is_err());
    }
}
