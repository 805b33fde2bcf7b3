//! Perturbed Dirichlet spectrum and whole-line scattering.

use std::f64::consts::PI;

use aoc_core::model::inner_product_real;
use aoc_core::perturbed::{minimal_bargmann_constant, perturbed_spectrum, EigenfunctionModel};
use aoc_core::scattering::{default_scattering_ode, square_well_transmission, transfer_matrix};
use aoc_core::*;

fn opts() -> PruferOptions {
    PruferOptions::default()
}

/// Lowest `count` eigenvalues of the second-order finite-difference Dirichlet
/// operator on `[-L, L]` with `m` interior points, by Sturm-sequence bisection.
fn fd_eigenvalues(v: &Potential, l: f64, m: usize, count: usize) -> Vec<f64> {
    let h = 2.0 * l / (m + 1) as f64;
    let off = 1.0 / (h * h);
    let diag: Vec<f64> = (0..m)
        .map(|i| 2.0 * off + v.evaluate(-l + h * (i + 1) as f64))
        .collect();
    let below = |e: f64| -> usize {
        let mut q = 1.0;
        let mut n = 0;
        for (i, d) in diag.iter().enumerate() {
            q = d - e - if i == 0 { 0.0 } else { off * off / q };
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                n += 1;
            }
        }
        n
    };
    let lo0 = diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * off;
    let hi0 = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off;
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Richardson-extrapolated finite-difference eigenvalues, accurate for smooth `V`.
fn fd_oracle(v: &Potential, l: f64, count: usize) -> Vec<f64> {
    let m = 3999;
    let c = fd_eigenvalues(v, l, m, count);
    let f = fd_eigenvalues(v, l, 2 * m + 1, count);
    c.iter().zip(&f).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

#[test]
fn eigenvalues_match_finite_difference_oracle() {
    let v = Potential::gaussian_truncated(-1.5, 0.5, 2.0).unwrap();
    let l = 3.0;
    let mu = perturbed_spectrum(6, &v, l, &opts()).unwrap();
    let fd = fd_oracle(&v, l, 6);
    for (k, (a, b)) in mu.iter().zip(&fd).enumerate() {
        assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "k={} {a} vs {b}", k + 1);
    }
}

#[test]
fn phase_is_monotone_in_energy() {
    let v = Potential::square_well(-2.0, 0.7).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..40 {
        let mu = -1.9 + 0.5 * i as f64;
        let t = prufer_phase(mu, &v, 2.0, &opts()).unwrap();
        assert!(t.theta_final > prev, "mu={mu}");
        prev = t.theta_final;
    }
}

#[test]
fn comparison_with_free_levels() {
    let l = 4.0;
    let vp = Potential::square_well(0.8, 1.0).unwrap();
    let vm = Potential::square_well(-0.8, 1.0).unwrap();
    let up = perturbed_spectrum(12, &vp, l, &opts()).unwrap();
    let dn = perturbed_spectrum(12, &vm, l, &opts()).unwrap();
    for k in 1..=12 {
        let lam = free_eigenvalue(k, l);
        assert!(up[k - 1] >= lam - 1e-10 && up[k - 1] <= lam + 0.8 + 1e-10);
        assert!(dn[k - 1] <= lam + 1e-10 && dn[k - 1] >= lam - 0.8 - 1e-10);
        // first-order shift is at most |V|_1 max phi^2 = |V|_1 / L
        assert!(up[k - 1] - lam <= 1.6 / l + 1e-10);
        let kp = k as f64 * PI;
        assert!(up[k - 1].sqrt() <= kp / (2.0 * l) + vp.norms().l1_plus / kp + 1e-12);
        assert!(dn[k - 1].max(0.0).sqrt() <= kp / (2.0 * l) + 1e-12);
    }
    for w in up.windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn eigenfunctions_orthonormal_with_dirichlet_ends() {
    let v = Potential::gaussian_truncated(-1.0, 0.6, 2.0).unwrap();
    let l = 5.0;
    let mu = perturbed_spectrum(8, &v, l, &opts()).unwrap();
    let hint = (mu[7] + v.sup_negative()).sqrt();
    let grid = Grid::for_potential(l, GridParams::default(), hint, &v).unwrap();
    let support = grid.restrict(v.support()).unwrap();
    let psi: Vec<_> = mu
        .iter()
        .enumerate()
        .map(|(i, &m)| perturbed_eigenfunction(i + 1, m, &v, &grid, &opts()).unwrap())
        .collect();
    for i in 0..8 {
        let model = EigenfunctionModel::build(i + 1, mu[i], &v, l, &support, &opts()).unwrap();
        for x in [-l, l] {
            assert!(model.exterior_value(x).unwrap().abs() < 1e-14);
            let near = model.exterior_value(x * (1.0 - 1e-9)).unwrap().abs();
            assert!(near < 1e-7, "psi near the wall {near}");
        }
        assert!(psi[i].matching_residual < 1e-6);
        for j in 0..8 {
            let ip = inner_product_real(&psi[i].psi, &psi[j].psi, &grid);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-7, "<{i},{j}> = {ip}");
        }
    }
}

#[test]
fn eigenfunction_solves_the_equation() {
    let v = Potential::gaussian_truncated(-1.0, 0.6, 2.0).unwrap();
    let l = 3.0;
    let mu = perturbed_eigenvalue(3, &v, l, &opts()).unwrap();
    let grid = Grid::for_potential(l, GridParams::default(), (mu + 1.0).sqrt(), &v).unwrap();
    let p = perturbed_eigenfunction(3, mu, &v, &grid, &opts()).unwrap();
    // node count of the k-th eigenfunction is k - 1
    let signs: Vec<f64> = p.psi.iter().copied().filter(|x| x.abs() > 1e-6).collect();
    let changes = signs.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    assert_eq!(changes, 2);
}

#[test]
fn counting_bounds_hold() {
    let l = 20.0;
    let v = Potential::gaussian_truncated(-0.7, 1.0, 4.0).unwrap();
    let alpha = 1.0;
    let c = minimal_bargmann_constant(&v, alpha);
    for e in [0.5, 1.0, 3.0, 8.0] {
        let m = count_below(e, &v, l, &opts()).unwrap() as f64;
        let hi = bargmann_upper_bound(e, &v, alpha, c, l).unwrap();
        let lo = counting_lower_bound(e, &v, l).unwrap();
        assert!(lo <= m && m <= hi, "E={e}: {lo} <= {m} <= {hi}");
    }
    let vp = Potential::square_well(0.5, 1.0).unwrap();
    for e in [0.5, 2.0, 6.0] {
        let m = count_below(e, &vp, l, &opts()).unwrap() as f64;
        assert!(counting_lower_bound(e, &vp, l).unwrap() <= m);
        assert!(m <= 2.0 * l / PI * e.sqrt() + 1e-12);
    }
    assert!(counting_lower_bound(1e-3, &vp, l).is_err());
    assert!(bargmann_upper_bound(1.0, &v, alpha, 0.5 * c, l).is_err());
}

#[test]
fn counting_is_monotone_in_the_potential() {
    let l = 10.0;
    let tab = Potential::table(vec![-2.0, -1.0, 0.0, 1.0, 2.0], vec![0.0, 1.2, -0.3, -1.1, 0.0]).unwrap();
    for e in [0.2, 1.0, 4.0] {
        let m = count_below(e, &tab, l, &opts()).unwrap();
        let mm = count_below(e, &tab.negative_part(), l, &opts()).unwrap();
        let mp = count_below(e, &tab.positive_part(), l, &opts()).unwrap();
        assert!(mm >= m && m >= mp, "E={e}: {mm} >= {m} >= {mp}");
    }
}

#[test]
fn square_well_transmission_formula() {
    let (v0, a) = (0.8, 1.0);
    let v = Potential::square_well(v0, a).unwrap();
    for k in [0.3, 0.8, 1.3, 2.5, 6.0] {
        let d = scattering_coefficients(&v, k, default_scattering_ode()).unwrap();
        // |t|^{-2} = 1 + V0^2 sin^2(2 q a) / (4 E (E - V0)), q^2 = E - V0, analytic continuation for E < V0
        let e = k * k;
        let q2 = e - v0;
        let s2 = if q2 >= 0.0 {
            (2.0 * a * q2.sqrt()).sin().powi(2) / q2
        } else {
            -(2.0 * a * (-q2).sqrt()).sinh().powi(2) / q2
        };
        let want = 1.0 / (1.0 + v0 * v0 * s2 / (4.0 * e));
        assert!((d.t.norm_sqr() - want).abs() < 1e-10, "k={k}");
        assert!((d.t - square_well_transmission(v0, a, k)).norm() < 1e-9);
        assert!((d.t.norm_sqr() + d.r1.norm_sqr() - 1.0).abs() < 1e-10);
        // symmetric potential: equal reflection from both sides
        assert!((d.r1 - d.r2).norm() < 1e-9);
        assert!((d.t - d.t_right).norm() < 1e-10);
        assert!(d.unitarity_defect < 1e-9);
    }
}

#[test]
fn transfer_matrix_is_unimodular() {
    let v = Potential::table(vec![-1.0, -0.2, 0.5, 1.5], vec![0.3, -1.0, 2.0, 0.0]).unwrap();
    for k in [0.4, 1.0, 3.0] {
        let m = transfer_matrix(&v, k, default_scattering_ode()).unwrap();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - 1.0).abs() < 1e-10);
        let d = scattering_coefficients(&v, k, default_scattering_ode()).unwrap();
        assert!(d.unitarity_defect < 1e-9);
        assert!((d.t - d.t_right).norm() < 1e-10);
        assert!((d.r1.norm() - d.r2.norm()).abs() < 1e-10);
    }
}

#[test]
fn born_scaling_of_reflection_and_gamma() {
    let (v0, a, k) = (1.0f64, 1.0f64, 1.1f64);
    // first Born: r = (1/2ik) int V e^{2ikx} dx = V0 sin(2ka) / (2 i k^2)
    let born = (v0 * (2.0 * k * a).sin() / (2.0 * k * k)).powi(2);
    let mut prev = f64::INFINITY;
    for c in [1e-1, 1e-2, 1e-3] {
        let v = Potential::square_well(c * v0, a).unwrap();
        let d = scattering_coefficients(&v, k, default_scattering_ode()).unwrap();
        let err = (d.r1.norm_sqr() / (c * c) / born - 1.0).abs();
        assert!(err < 10.0 * c, "c={c}: {err}");
        assert!(err < prev);
        prev = err;
        let g = gamma_scattering(&v, k * k).unwrap();
        let g1 = gamma_scattering(&Potential::square_well(v0, a).unwrap().scaled(c * 0.5), k * k).unwrap();
        // quadratic in the coupling to leading order
        assert!((g / g1 / 4.0 - 1.0).abs() < 20.0 * c, "c={c}");
    }
}

#[test]
fn gamma_routes_agree_and_vanish_for_zero() {
    assert_eq!(gamma_scattering(&Potential::zero(), 1.0).unwrap(), 0.0);
    for v in [
        Potential::square_well(-0.5, 1.0).unwrap(),
        Potential::gaussian_truncated(0.7, 0.5, 2.0).unwrap(),
    ] {
        for nu in [0.5, PI * PI, 10.0] {
            let a = gamma_scattering(&v, nu).unwrap();
            let b = gamma_gkm(&v, nu).unwrap();
            assert!(a >= 0.0);
            assert!((a - b).abs() < 1e-10 * a.max(1e-12), "{a} vs {b}");
        }
    }
}
