//! Adaptive Dormand-Prince 5(4) integrator for small real systems.

use serde::Serialize;

use crate::{Error, Result};

/// Tolerances and limits for the adaptive stepper.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

/// Counters accumulated over one or more integrations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl OdeStats {
    pub fn merge(&mut self, other: &OdeStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += c * k[i];
        }
    }
    out
}

/// Dormand-Prince stepper that remembers its last accepted step size, so that
/// consecutive calls over adjacent intervals do not restart from scratch.
#[derive(Clone, Debug)]
pub struct DormandPrince {
    opts: OdeOptions,
    h: Option<f64>,
    pub stats: OdeStats,
}

impl DormandPrince {
    pub fn new(opts: OdeOptions) -> Self {
        Self {
            opts,
            h: None,
            stats: OdeStats::default(),
        }
    }

    /// Integrate `y' = f(x, y)` from `x0` to `x1` (either direction).
    pub fn integrate<const D: usize, F>(&mut self, f: &mut F, x0: f64, y0: [f64; D], x1: f64) -> Result<[f64; D]>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        let span = x1 - x0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let mut h = self.h.map(|h| h.abs()).unwrap_or(span.abs()).min(span.abs());
        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        self.stats.evaluations += 1;
        let mut steps = 0usize;
        loop {
            let remaining = (x1 - x) * dir;
            if remaining <= 0.0 {
                break;
            }
            let last = h >= remaining;
            let hs = if last { remaining } else { h } * dir;
            let k2 = f(x + C2 * hs, &axpy(&y, &[(A21 * hs, &k1)]));
            let k3 = f(x + C3 * hs, &axpy(&y, &[(A31 * hs, &k1), (A32 * hs, &k2)]));
            let k4 = f(
                x + C4 * hs,
                &axpy(&y, &[(A41 * hs, &k1), (A42 * hs, &k2), (A43 * hs, &k3)]),
            );
            let k5 = f(
                x + C5 * hs,
                &axpy(
                    &y,
                    &[(A51 * hs, &k1), (A52 * hs, &k2), (A53 * hs, &k3), (A54 * hs, &k4)],
                ),
            );
            let xn = if last { x1 } else { x + hs };
            let k6 = f(
                xn,
                &axpy(
                    &y,
                    &[
                        (A61 * hs, &k1),
                        (A62 * hs, &k2),
                        (A63 * hs, &k3),
                        (A64 * hs, &k4),
                        (A65 * hs, &k5),
                    ],
                ),
            );
            let yn = axpy(
                &y,
                &[
                    (B1 * hs, &k1),
                    (B3 * hs, &k3),
                    (B4 * hs, &k4),
                    (B5 * hs, &k5),
                    (B6 * hs, &k6),
                ],
            );
            let k7 = f(xn, &yn);
            self.stats.evaluations += 6;
            let mut err = 0.0;
            for i in 0..D {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(yn[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / D as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                self.stats.rejected += 1;
            } else if err <= 1.0 {
                x = xn;
                y = yn;
                k1 = k7;
                self.stats.accepted += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h *= fac;
                    self.h = Some(h);
                } else {
                    self.h = Some((h * fac).max(self.h.unwrap_or(0.0)));
                }
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                self.stats.rejected += 1;
            }
            steps += 1;
            if h <= 1e-14 * x.abs().max(span.abs()) || steps > self.opts.max_steps {
                return Err(Error::SolverFailure { x, h, steps });
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_returns_to_start() {
        let mut dp = DormandPrince::new(OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        });
        let mut f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y = dp
            .integrate(&mut f, 0.0, [0.0, 1.0], 2.0 * std::f64::consts::PI)
            .unwrap();
        assert!(y[0].abs() < 1e-10 && (y[1] - 1.0).abs() < 1e-10, "{y:?}");
    }

    #[test]
    fn backward_integration_of_exponential() {
        let mut dp = DormandPrince::new(OdeOptions::default());
        let mut f = |_x: f64, y: &[f64; 1]| [y[0]];
        let y = dp.integrate(&mut f, 1.0, [1f64.exp()], 0.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn piecewise_calls_reuse_step_size() {
        let mut dp = DormandPrince::new(OdeOptions::default());
        let mut f = |_x: f64, y: &[f64; 1]| [-2.0 * y[0]];
        let mut y = [1.0];
        for i in 0..100 {
            y = dp.integrate(&mut f, i as f64 * 0.01, y, (i + 1) as f64 * 0.01).unwrap();
        }
        assert!((y[0] - (-2f64).exp()).abs() < 1e-10);
    }
}
