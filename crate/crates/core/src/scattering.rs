//! Transmission and reflection at fixed energy for compactly supported `V`,
//! and the scattering and S-matrix forms of `gamma(nu)`.
//!
//! Conventions: for incidence from the left the solution is
//! `e^{ikx} + r1 e^{-ikx}` left of the support and `t e^{ikx}` right of it;
//! for incidence from the right it is `e^{-ikx} + r2 e^{ikx}` and
//! `t' e^{-ikx}`. The S-matrix is `[[t, r2], [r1, t]]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::model::Potential;
use crate::ode::{DormandPrince, OdeOptions};
use crate::{Complex, Error, Result};

/// Default integration tolerances for the transfer matrix.
pub fn default_scattering_ode() -> OdeOptions {
    OdeOptions {
        rtol: 1e-13,
        atol: 1e-15,
        ..OdeOptions::default()
    }
}

/// Scattering amplitudes at wavenumber `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatteringData {
    pub k: f64,
    pub t: Complex,
    /// Transmission for incidence from the right; equals `t` by reciprocity.
    pub t_right: Complex,
    pub r1: Complex,
    pub r2: Complex,
    /// `max |S* S - 1|` over the entries.
    pub unitarity_defect: f64,
}

impl ScatteringData {
    /// `[[t, r2], [r1, t]]`
    pub fn s_matrix(&self) -> [[Complex; 2]; 2] {
        [[self.t, self.r2], [self.r1, self.t]]
    }
}

/// Fundamental matrix `[[u1, u2], [u1', u2']]` of `-u'' + V u = k^2 u`
/// across `[-a, a]`, with `u1(-a) = 1, u1'(-a) = 0, u2(-a) = 0, u2'(-a) = 1`.
pub fn transfer_matrix(v: &Potential, k: f64, opts: OdeOptions) -> Result<[[f64; 2]; 2]> {
    let e = k * k;
    let mut y = [1.0, 0.0, 0.0, 1.0];
    let mut dp = DormandPrince::new(opts);
    for w in v.breakpoints().windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mut f = |x: f64, y: &[f64; 4]| {
            let q = v.evaluate_within(x, lo, hi) - e;
            [y[1], q * y[0], y[3], q * y[2]]
        };
        y = dp.integrate(&mut f, lo, y, hi)?;
    }
    Ok([[y[0], y[2]], [y[1], y[3]]])
}

fn solve2(m: [[Complex; 2]; 2], rhs: [Complex; 2]) -> Result<[Complex; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-300 {
        return Err(Error::Singular("2x2 plane-wave matching".into()));
    }
    Ok([
        (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

/// Scattering amplitudes of `V` at wavenumber `k > 0`.
pub fn scattering_coefficients(v: &Potential, k: f64, opts: OdeOptions) -> Result<ScatteringData> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("scattering needs k > 0, got {k}")));
    }
    let a = v.support_half_width();
    let m = transfer_matrix(v, k, opts)?;
    let ik = Complex::new(0.0, k);
    let ep = (ik * a).exp();
    let em = (-ik * a).exp();
    let apply =
        |s: [Complex; 2]| -> [Complex; 2] { [s[0] * m[0][0] + s[1] * m[0][1], s[0] * m[1][0] + s[1] * m[1][1]] };
    // left incidence: M (e^{-ika} + r1 e^{ika}, ik(e^{-ika} - r1 e^{ika})) = t (e^{ika}, ik e^{ika})
    let inc = apply([em, ik * em]);
    let refl = apply([ep, -ik * ep]);
    let [r1, t] = solve2([[refl[0], -ep], [refl[1], -ik * ep]], [-inc[0], -inc[1]])?;
    // right incidence: M (t' e^{ika}, -ik t' e^{ika}) = (e^{-ika} + r2 e^{ika}, -ik e^{-ika} + ik r2 e^{ika})
    let tr = apply([ep, -ik * ep]);
    let [t_right, r2] = solve2([[tr[0], -ep], [tr[1], -ik * ep]], [em, -ik * em])?;
    let s = [[t, r2], [r1, t]];
    let mut defect = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut acc: Complex = s.iter().map(|row| row[i].conj() * row[j]).sum();
            if i == j {
                acc -= 1.0;
            }
            defect = defect.max(acc.norm());
        }
    }
    Ok(ScatteringData {
        k,
        t,
        t_right,
        r1,
        r2,
        unitarity_defect: defect,
    })
}

/// `gamma(nu) = (1 - Re t(sqrt nu)) / pi^2`.
pub fn gamma_scattering(v: &Potential, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("gamma needs nu > 0, got {nu}")));
    }
    let data = scattering_coefficients(v, nu.sqrt(), default_scattering_ode())?;
    let g = (1.0 - data.t.re) / (PI * PI);
    if g < -1e-12 {
        return Err(Error::Invariant(format!(
            "gamma_scattering = {g} < 0 (Re t = {})",
            data.t.re
        )));
    }
    Ok(g)
}

/// `gamma'(nu) = tr[(S - 1)* (S - 1)] / (4 pi^2)`.
pub fn gamma_gkm(v: &Potential, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("gamma needs nu > 0, got {nu}")));
    }
    let data = scattering_coefficients(v, nu.sqrt(), default_scattering_ode())?;
    Ok(gkm_trace(&data) / (4.0 * PI * PI))
}

/// `tr[(S - 1)* (S - 1)]`.
pub fn gkm_trace(data: &ScatteringData) -> f64 {
    let s = data.s_matrix();
    let mut tr = 0.0;
    for (i, row) in s.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            let d = if i == j { e - 1.0 } else { e };
            tr += d.norm_sqr();
        }
    }
    tr
}

/// Closed-form transmission amplitude of the square well `v0` on `[-a, a]`.
pub fn square_well_transmission(v0: f64, a: f64, k: f64) -> Complex {
    let kap = Complex::from(k * k - v0).sqrt();
    let i = Complex::i();
    let den = (2.0 * kap * a).cos() - i * (k * k + kap * kap) / (2.0 * k * kap) * (2.0 * kap * a).sin();
    (-2.0 * i * k * a).exp() / den
}
