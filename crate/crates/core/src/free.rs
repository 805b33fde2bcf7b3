//! Closed-form objects of the free Dirichlet problem on `[-L, L]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::quadrature::{adaptive_gk, GaussRule};
use crate::{Complex, Error, Result};

/// Relative tolerance below which `sin(2L sqrt z)` counts as zero.
pub const NEAR_SPECTRUM_TOL: f64 = 1e-14;

/// `lambda_j = (pi j / 2L)^2`.
pub fn free_eigenvalue(j: usize, l: f64) -> f64 {
    let p = free_wavenumber(j, l);
    p * p
}

/// `p_j = pi j / 2L`.
pub fn free_wavenumber(j: usize, l: f64) -> f64 {
    PI * j as f64 / (2.0 * l)
}

/// Normalised eigenfunction: `cos(pi j x / 2L) / sqrt L` for odd `j`,
/// `sin(pi j x / 2L) / sqrt L` for even `j`.
pub fn free_eigenfunction(j: usize, l: f64, x: f64) -> f64 {
    let arg = free_wavenumber(j, l) * x;
    let v = if j % 2 == 1 { arg.cos() } else { arg.sin() };
    v / l.sqrt()
}

/// Sign `sigma_j` in `phi_j(x) = sigma_j sin(p_j (x + L)) / sqrt L`.
pub fn free_sign(j: usize) -> f64 {
    if (j / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Fermi energy `nu_N = (pi (N + 1/2) / 2L)^2`.
pub fn fermi_energy(n: usize, l: f64) -> f64 {
    let k = PI * (n as f64 + 0.5) / (2.0 * l);
    k * k
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Index, eigenvalue and parity of a free Dirichlet eigenpair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeEigenpair {
    pub j: usize,
    pub lambda: f64,
    /// Parity of the index `j`: odd indices carry cosines, even ones sines.
    pub parity: Parity,
}

impl FreeEigenpair {
    pub fn new(j: usize, l: f64) -> Self {
        assert!(j >= 1, "eigen index starts at 1");
        Self {
            j,
            lambda: free_eigenvalue(j, l),
            parity: if j.is_multiple_of(2) { Parity::Even } else { Parity::Odd },
        }
    }
}

/// A point `z(s) = (sqrt nu + i s)^2` on the Fermi parabola.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FermiContourPoint {
    pub s: f64,
    pub z: Complex,
    pub sqrt_z: Complex,
    pub dz_ds: Complex,
}

impl FermiContourPoint {
    pub fn new(nu: f64, s: f64) -> Self {
        let sqrt_z = Complex::new(nu.sqrt(), s);
        Self {
            s,
            z: sqrt_z * sqrt_z,
            sqrt_z,
            dz_ds: Complex::new(0.0, 2.0) * sqrt_z,
        }
    }
}

/// `sin(w) = m e^{e}` with `e = |Im w|`; the mantissa stays bounded.
pub(crate) fn sin_scaled(w: Complex) -> (Complex, f64) {
    let (b, e) = (w.im, w.im.abs());
    let ch = 0.5 * (1.0 + (-2.0 * e).exp());
    let sh = -0.5 * (-2.0 * e).exp_m1() * b.signum();
    let (sa, ca) = w.re.sin_cos();
    (Complex::new(sa * ch, ca * sh), e)
}

/// `cos(w) = m e^{e}` with `e = |Im w|`.
pub(crate) fn cos_scaled(w: Complex) -> (Complex, f64) {
    let (b, e) = (w.im, w.im.abs());
    let ch = 0.5 * (1.0 + (-2.0 * e).exp());
    let sh = -0.5 * (-2.0 * e).exp_m1() * b.signum();
    let (sa, ca) = w.re.sin_cos();
    (Complex::new(ca * ch, -sa * sh), e)
}

fn check_nonzero(m: Complex, e: f64, what: &str, z: Complex) -> Result<()> {
    let nm = m.norm();
    if nm >= NEAR_SPECTRUM_TOL || nm.ln() + e >= NEAR_SPECTRUM_TOL.ln() {
        Ok(())
    } else {
        Err(Error::NearSpectrum(format!("{what} vanishes at z = {z}")))
    }
}

fn principal_sqrt(z: Complex) -> Complex {
    z.sqrt()
}

/// Green function `R(z; x, y)` of the Dirichlet Laplacian.
pub fn green_kernel(z: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    green_kernel_k(principal_sqrt(z), x, y, l)
}

/// [`green_kernel`] for a given root `k = sqrt z` (either branch).
pub fn green_kernel_k(k: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if k.norm() * l < 1e-9 {
        return Ok(Complex::from((lo + l) * (hi - l) / (2.0 * l)));
    }
    let (m3, e3) = sin_scaled(2.0 * l * k);
    check_nonzero(m3, e3, "W(z)", k * k)?;
    let (m1, e1) = sin_scaled(k * (lo + l));
    let (m2, e2) = sin_scaled(k * (hi - l));
    Ok(m1 * m2 / (k * m3) * (e1 + e2 - e3).exp())
}

/// Kernel of `C(z) = X R(z) + R(z) X` written as `x d_x R + y d_y R`.
pub fn commutator_kernel(z: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    commutator_kernel_k(principal_sqrt(z), x, y, l)
}

/// [`commutator_kernel`] for a given root `k = sqrt z`.
pub fn commutator_kernel_k(k: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let (m3, e3) = sin_scaled(2.0 * l * k);
    check_nonzero(m3, e3, "W(z)", k * k)?;
    let (sl, el) = sin_scaled(k * (lo + l));
    let (cl, _) = cos_scaled(k * (lo + l));
    let (sh, eh) = sin_scaled(k * (hi - l));
    let (ch, _) = cos_scaled(k * (hi - l));
    let num = ch * sl * hi + sh * cl * lo;
    Ok(num / m3 * (el + eh - e3).exp())
}

/// Delta term `D(z; x, y) = (L/4)[P_s / sin^2(sqrt z L) + P_c / cos^2(sqrt z L)]`.
pub fn delta_term_kernel(z: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    delta_term_kernel_k(principal_sqrt(z), x, y, l)
}

/// [`delta_term_kernel`] for a given root `k = sqrt z`.
pub fn delta_term_kernel_k(k: Complex, x: f64, y: f64, l: f64) -> Result<Complex> {
    let (sl, el) = sin_scaled(k * l);
    let (cl, _) = cos_scaled(k * l);
    check_nonzero(sl, el, "sin(sqrt(z) L)", k * k)?;
    check_nonzero(cl, el, "cos(sqrt(z) L)", k * k)?;
    let (sx, ex) = sin_scaled(k * x);
    let (sy, ey) = sin_scaled(k * y);
    let (cx, _) = cos_scaled(k * x);
    let (cy, _) = cos_scaled(k * y);
    let f = (ex + ey - 2.0 * el).exp();
    Ok(0.25 * l * f * (sx * sy / (sl * sl) + cx * cy / (cl * cl)))
}

/// `G(z; x, y) = sin(sqrt z |x - y|)`.
pub fn g_kernel_k(k: Complex, x: f64, y: f64) -> Complex {
    (k * (x - y).abs()).sin()
}

/// `S_N(z; x, y) = sum_{j <= N} phi_j(x) phi_j(y) / (z - lambda_j)`.
pub fn truncated_resolvent_direct(n: usize, z: Complex, x: f64, y: f64, l: f64) -> Complex {
    (1..=n)
        .map(|j| free_eigenfunction(j, l, x) * free_eigenfunction(j, l, y) / (z - free_eigenvalue(j, l)))
        .sum()
}

/// Pieces of the Laplace-transform decomposition of the truncated resolvent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncatedResolventParts {
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub s0: f64,
    pub s0_tilde: f64,
    pub s1: f64,
    pub s1_tilde: f64,
    /// `kappa S0 - S1 - (-1)^N (kappa~ S0~ - S1~)`
    pub value: f64,
}

/// Decomposed truncated resolvent at real `z` with `sqrt z > pi N / 2L`.
pub fn truncated_resolvent_decomposed(n: usize, z: f64, x: f64, y: f64, l: f64) -> Result<TruncatedResolventParts> {
    let k = if z > 0.0 { z.sqrt() } else { 0.0 };
    if !(k > PI * n as f64 / (2.0 * l)) {
        return Err(Error::Domain(format!(
            "decomposition needs sqrt(z) > pi N / 2L; got z = {z}, N = {n}, L = {l}"
        )));
    }
    let w = 2.0 * l * k / PI;
    let kappa = kappa_integral(w, n);
    let kappa_tilde = kappa_tilde_integral(w, n);
    let pref = 1.0 / (2.0 * PI * k);
    let s0 = pref * (k * (x - y)).cos();
    let s0_tilde = pref * (k * (x + y)).cos();
    let s1 = pref * s1_integral(w, n, PI * (x - y) / (2.0 * l), false);
    let s1_tilde = pref * s1_integral(w, n, PI * (x + y) / (2.0 * l), true);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let value = kappa * s0 - s1 - sign * (kappa_tilde * s0_tilde - s1_tilde);
    Ok(TruncatedResolventParts {
        kappa,
        kappa_tilde,
        s0,
        s0_tilde,
        s1,
        s1_tilde,
        value,
    })
}

/// `sin(M u) / sin(u/2)` with `M = N + 1/2`.
fn dirichlet_kernel(n: usize, u: f64) -> f64 {
    let d = (0.5 * u).sin();
    if d.abs() > 1e-2 {
        ((n as f64 + 0.5) * u).sin() / d
    } else {
        1.0 + 2.0 * (1..=n).map(|j| (j as f64 * u).cos()).sum::<f64>()
    }
}

/// `cos(M u) / cos(u/2)` with `M = N + 1/2`.
fn conjugate_dirichlet_kernel(n: usize, u: f64) -> f64 {
    let d = (0.5 * u).cos();
    if d.abs() > 1e-2 {
        ((n as f64 + 0.5) * u).cos() / d
    } else {
        let s: f64 = (1..=n)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * (j as f64 * u).cos())
            .sum();
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (1.0 + 2.0 * s)
    }
}

fn s1_integral(w: f64, n: usize, end: f64, tilde: bool) -> f64 {
    if end == 0.0 {
        return 0.0;
    }
    let h = PI / (2.0 * (w + n as f64));
    let panels = (end.abs() / h).ceil().max(1.0) as usize;
    let rule = GaussRule::new(12);
    let mut total = 0.0;
    for p in 0..panels {
        let a = end * p as f64 / panels as f64;
        let b = end * (p + 1) as f64 / panels as f64;
        total += rule.integrate(a, b, |u| {
            let kern = if tilde {
                conjugate_dirichlet_kernel(n, u)
            } else {
                dirichlet_kernel(n, u)
            };
            (w * (u - end)).sin() * kern
        });
    }
    total
}

fn laplace_breaks(rate: f64, m: f64) -> Vec<f64> {
    // tail after T is at most e^{-rate T} / (rate (1 - e^{-T}))
    let mut t_end = 40.0 / rate;
    while (-rate * t_end).exp() / (rate * (1.0 - (-t_end).exp())) > 1e-17 {
        t_end *= 1.25;
    }
    let mut breaks = vec![0.0];
    let mut t = 1.0 / m;
    while t < t_end {
        breaks.push(t);
        t *= 2.0;
    }
    breaks.push(t_end);
    breaks
}

/// `int_0^inf e^{-w t} sinh(M t) / sinh(t/2) dt`, `M = N + 1/2`, for `w > N`.
pub fn kappa_integral(w: f64, n: usize) -> f64 {
    let m = n as f64 + 0.5;
    let rate = w - m + 0.5;
    assert!(rate > 0.0, "kappa integral diverges for w <= N");
    let f = |t: f64| {
        if t == 0.0 {
            return 2.0 * m;
        }
        (-rate * t).exp() * (-2.0 * m * t).exp_m1() / (-t).exp_m1()
    };
    adaptive_gk(f, &laplace_breaks(rate, m), 1e-15, 1e-15, 4000).value
}

/// `int_0^inf e^{-w t} cosh(M t) / cosh(t/2) dt`, `M = N + 1/2`, for `w > N`.
pub fn kappa_tilde_integral(w: f64, n: usize) -> f64 {
    let m = n as f64 + 0.5;
    let rate = w - m + 0.5;
    assert!(rate > 0.0, "kappa integral diverges for w <= N");
    let f = |t: f64| (-rate * t).exp() * (1.0 + (-2.0 * m * t).exp()) / (1.0 + (-t).exp());
    adaptive_gk(f, &laplace_breaks(rate, m), 1e-15, 1e-15, 4000).value
}

/// `kappa_N = int_0^inf e^{-(N+1/2) t} sinh((N+1/2) t) / sinh(t/2) dt`.
pub fn kappa_n(n: usize) -> f64 {
    kappa_integral(n as f64 + 0.5, n)
}

/// `kappa~_N`, the cosh analogue of [`kappa_n`].
pub fn kappa_tilde_n(n: usize) -> f64 {
    kappa_tilde_integral(n as f64 + 0.5, n)
}

/// `tau(s) = (cosh s - i sinh s) / (cosh s + i sinh s)`.
pub fn tau(s: f64) -> Complex {
    let t = s.tanh();
    Complex::new(1.0, -t) / Complex::new(1.0, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_and_boundary() {
        assert!((free_eigenvalue(1, 1.0) - 2.467_401_100_272_339_5).abs() < 1e-15);
        assert_eq!(free_eigenvalue(2, PI / 2.0), 4.0);
        for j in 1..=30 {
            assert!(free_eigenfunction(j, 2.0, 2.0).abs() < 1e-12);
            assert!(free_eigenfunction(j, 2.0, -2.0).abs() < 1e-12);
        }
        assert_eq!(free_eigenfunction(1, 1.0, 0.0), 1.0);
    }

    #[test]
    fn sign_form_matches_parity_form() {
        let l = 1.7;
        for j in 1..=12 {
            for &x in &[-1.3, -0.2, 0.0, 0.9, 1.6] {
                let alt = free_sign(j) * (free_wavenumber(j, l) * (x + l)).sin() / l.sqrt();
                assert!((alt - free_eigenfunction(j, l, x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn green_kernel_known_value() {
        let g = green_kernel(Complex::from(-1.0), 0.0, 0.0, 1.0).unwrap();
        assert!((g.re + 1f64.tanh() / 2.0).abs() < 1e-14 && g.im.abs() < 1e-15);
        assert_eq!(
            green_kernel(Complex::new(3.0, 1.0), 1.0, 0.3, 1.0).unwrap(),
            Complex::from(0.0)
        );
    }

    #[test]
    fn green_kernel_rejects_eigenvalues() {
        let z = Complex::from(free_eigenvalue(3, 1.0));
        assert!(matches!(green_kernel(z, 0.1, 0.2, 1.0), Err(Error::NearSpectrum(_))));
    }

    #[test]
    fn scaled_trig_is_overflow_free() {
        let k = Complex::new(3.0, 5.0);
        let g = green_kernel_k(k, 0.2, -0.1, 400.0).unwrap();
        assert!(g.is_finite());
        let want = (Complex::i() * k * 0.3).exp() / (2.0 * Complex::i() * k);
        assert!((g - want).norm() < 1e-14);
    }

    #[test]
    fn tau_limits() {
        assert_eq!(tau(0.0), Complex::from(1.0));
        assert!((tau(20.0) + Complex::i()).norm() < 1e-10);
        for s in [-3.0, 0.4, 2.0] {
            assert!((tau(s).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_kernels_match_finite_sums() {
        for n in [0, 1, 4, 7] {
            for &u in &[0.3, 1.1, -2.0, 2.9] {
                let direct = 1.0 + 2.0 * (1..=n).map(|j| (j as f64 * u).cos()).sum::<f64>();
                assert!((dirichlet_kernel(n, u) - direct).abs() < 1e-12);
                let s: f64 = (1..=n).map(|j| (-1f64).powi(j as i32) * (j as f64 * u).cos()).sum();
                let alt = (-1f64).powi(n as i32) * (1.0 + 2.0 * s);
                assert!((conjugate_dirichlet_kernel(n, u) - alt).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_domain() {
        assert!(truncated_resolvent_decomposed(5, 1.0, 0.0, 0.0, 1.0).is_err());
        let z = fermi_energy(5, 1.0);
        let p = truncated_resolvent_decomposed(5, z, 0.2, 0.2, 1.0).unwrap();
        assert_eq!(p.s1, 0.0);
    }
}
