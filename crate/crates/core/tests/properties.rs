//! Property tests for the structural invariants.

use std::f64::consts::PI;

use aoc_core::metrics::{analyze, metrics_grid};
use aoc_core::operators::{operator_grid, SignOperator};
use aoc_core::perturbed::perturbed_spectrum;
use aoc_core::quadrature::GaussRule;
use aoc_core::scattering::{default_scattering_ode, gkm_trace};
use aoc_core::sweep::SweepConfig;
use aoc_core::*;
use proptest::prelude::*;

fn square_well() -> impl Strategy<Value = Potential> {
    (prop_oneof![-1.0..-0.05f64, 0.05..1.0f64], 0.2..1.5f64).prop_map(|(v0, a)| Potential::square_well(v0, a).unwrap())
}

fn table() -> impl Strategy<Value = Potential> {
    (0.3..1.5f64, prop::collection::vec(-1.0..1.0f64, 3..6)).prop_map(|(a, mut vals)| {
        let n = vals.len();
        let xs = (0..n).map(|i| -a + 2.0 * a * i as f64 / (n - 1) as f64).collect();
        vals[n - 1] = 0.0;
        vals[0] = 0.0;
        Potential::table(xs, vals).unwrap()
    })
}

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![
        square_well(),
        table(),
        (-1.0..1.0f64, 0.2..0.8f64, 0.5..2.0f64)
            .prop_map(|(v0, s, a)| Potential::gaussian_truncated(v0, s, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_panels_exact_for_polynomials(a in -2.0..0.0f64, w in 0.1..3.0f64, d in 0u32..24) {
        let b = a + w;
        let got = GaussRule::new(12).integrate(a, b, |x| x.powi(d as i32));
        let exact = (b.powi(d as i32 + 1) - a.powi(d as i32 + 1)) / (d + 1) as f64;
        let scale = (a.abs().max(b.abs())).powi(d as i32) * w;
        prop_assert!((got - exact).abs() <= 1e-12 * scale.max(exact.abs()));
    }

    #[test]
    fn v_transform_nondecreasing(v in potential(), s1 in 0.0..5.0f64, ds in 0.0..5.0f64) {
        let g = v.support_grid();
        let a = v_transform(&v, 10.0, s1, &g);
        let b = v_transform(&v, 10.0, s1 + ds, &g);
        prop_assert!(a >= 0.0 && a <= b * (1.0 + 1e-14));
    }

    #[test]
    fn norms_scale_linearly(v in potential(), c in -3.0..3.0f64) {
        let n = v.norms();
        let m = v.scaled(c).norms();
        for (x, y) in [(n.l1, m.l1), (n.linf, m.linf), (n.x2_l1, m.x2_l1)] {
            prop_assert!((y - c.abs() * x).abs() <= 1e-12 * x.max(1e-300));
        }
        prop_assert!(n.l1 >= 0.0 && n.linf >= 0.0 && n.l1_plus >= 0.0);
        prop_assert!(n.l1 <= 2.0 * v.support_half_width() * n.linf * (1.0 + 1e-12));
    }

    #[test]
    fn fermi_level_geometry(n in 1usize..500, l in 0.5..200.0f64) {
        let kf = fermi_energy(n, l).sqrt();
        let q = PI / (4.0 * l);
        prop_assert!((kf - free_eigenvalue(n, l).sqrt() - q).abs() < 1e-12 * kf);
        prop_assert!((free_eigenvalue(n + 1, l).sqrt() - kf - q).abs() < 1e-12 * kf);
        prop_assert!(((kf * l).sin().powi(2) - 0.5).abs() < 1e-9);
        prop_assert!(free_eigenvalue(n + 1, l) > free_eigenvalue(n, l));
    }

    #[test]
    fn contour_point_branch(nu in 0.01..50.0f64, s in -20.0..20.0f64) {
        let p = FermiContourPoint::new(nu, s);
        prop_assert!((p.sqrt_z - Complex::new(nu.sqrt(), s)).norm() < 1e-15 * (1.0 + s.abs()));
        prop_assert!((p.z - p.sqrt_z * p.sqrt_z).norm() < 1e-12 * (nu + s * s));
    }

    #[test]
    fn green_bound_on_fermi_parabola(
        n in 1usize..40, l in 1.0..20.0f64, s in -5.0..5.0f64, u in -1.0..1.0f64, w in -1.0..1.0f64,
    ) {
        let nu = fermi_energy(n, l);
        let p = FermiContourPoint::new(nu, s);
        let (x, y) = (u * l, w * l);
        let r = green_kernel(p.z, x, y, l).unwrap();
        let bound = 2.0 * (-s.abs() * (x - y).abs()).exp() / (nu + s * s).sqrt();
        prop_assert!(r.norm() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn truncated_parts_bounded(n in 1usize..12, u in -1.0..1.0f64, w in -1.0..1.0f64) {
        let l = 1.0;
        let nu = fermi_energy(n, l);
        let p = truncated_resolvent_decomposed(n, nu, u, w, l).unwrap();
        let b0 = 1.0 / (2.0 * PI * nu.sqrt());
        prop_assert!(p.s0.abs() <= b0 * (1.0 + 1e-12));
        prop_assert!(p.s0_tilde.abs() <= b0 * (1.0 + 1e-12));
        prop_assert!(p.s1.abs() <= (n as f64 + 0.5) * (u - w).abs() / (2.0 * l * nu.sqrt()) * (1.0 + 1e-9) + 1e-14);
        prop_assert!(p.kappa_tilde <= 4.0);
        let d = truncated_resolvent_direct(n, Complex::from(nu), u, w, l);
        prop_assert!((p.value - d.re).abs() < 1e-8);
    }

    #[test]
    fn tau_unimodular(s in -50.0..50.0f64) {
        prop_assert!((tau(s).norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sign_operator_is_involution(vals in prop::collection::vec(-2.0..2.0f64, 0..40)) {
        let j = SignOperator::from_values(&vals);
        prop_assert!(j.is_involution());
        prop_assert_eq!(j.len(), vals.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prufer_phase_monotone(v in potential(), mu in -1.0..30.0f64, dmu in 0.01..5.0f64) {
        let o = PruferOptions::default();
        let a = prufer_phase(mu, &v, 3.0, &o).unwrap();
        let b = prufer_phase(mu + dmu, &v, 3.0, &o).unwrap();
        prop_assert!(b.theta_final > a.theta_final);
    }

    #[test]
    fn phase_counting_equals_direct_counting(v in potential(), e in 0.5..20.0f64) {
        let o = PruferOptions::default();
        let l = 2.5;
        let m = count_below(e, &v, l, &o).unwrap();
        let mu = perturbed_spectrum(m + 2, &v, l, &o).unwrap();
        prop_assert_eq!(mu.iter().filter(|&&x| x < e).count(), m);
        for w in mu.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn interlacing_for_nonnegative_potential(v0 in 0.05..2.0f64, a in 0.2..1.5f64) {
        let v = Potential::square_well(v0, a).unwrap();
        let l = 3.0;
        let mu = perturbed_spectrum(8, &v, l, &PruferOptions::default()).unwrap();
        for (k, m) in mu.iter().enumerate() {
            let lam = free_eigenvalue(k + 1, l);
            prop_assert!(lam - 1e-10 <= *m && *m <= lam + v0 + 1e-10);
        }
    }

    #[test]
    fn scattering_unitarity(v in potential(), k in 0.2..6.0f64) {
        let d = scattering_coefficients(&v, k, default_scattering_ode()).unwrap();
        prop_assert!((d.t.norm_sqr() + d.r1.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!((d.t.norm_sqr() + d.r2.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!(d.t.norm() <= 1.0 + 1e-12);
        let via_trace = gkm_trace(&d) / (4.0 * PI * PI);
        let via_t = (1.0 - d.t.re) / (PI * PI);
        prop_assert!((via_trace - via_t).abs() < 1e-10);
    }

    #[test]
    fn phi_hat_self_adjoint_and_positive(v in potential(), nu in 0.5..20.0f64) {
        let grid = operator_grid(&v, nu, GridParams::default()).unwrap();
        let p = phi_hat(nu, &v, &grid).unwrap();
        prop_assert!(p.asymmetry <= 1e-8 * (1.0 + p.entries[0][0].abs() + p.entries[1][1].abs()));
        // eigenvalues of 1 + P^2 / 4 nu are 1 + e^2 / 4 nu for the symmetric part
        let e = p.entries;
        let sym = 0.5 * (e[0][1] + e[1][0]);
        let tr = e[0][0] + e[1][1];
        let det = e[0][0] * e[1][1] - sym * sym;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        for ev in [tr / 2.0 + disc, tr / 2.0 - disc] {
            prop_assert!(1.0 + ev * ev / (4.0 * nu) >= 1.0);
        }
        prop_assert!(gamma_matrix(nu, &v, &grid).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn overlap_metrics_invariants(v in potential(), n in 1usize..12, rho in 0.5..2.0f64) {
        let l = (n as f64 + 0.5) / (2.0 * rho);
        prop_assume!(l > v.support_half_width() + 0.05);
        let grid = metrics_grid(&v, n, l, GridParams::default()).unwrap();
        let a = aoc_core::metrics::overlap_matrix(n, &v, l, &grid).unwrap();
        for s in a.row_bessel_sums() {
            prop_assert!(s <= 1.0 + 1e-8);
        }
        prop_assert!(a.entries.iter().all(|x| x.abs() <= 1.0 + 1e-8));
        let r = analyze(n, &v, l, &grid, &PruferOptions::default()).unwrap();
        prop_assert!(r.ln_d <= -r.anderson_integral + 1e-10);
        prop_assert!(r.defect_norm >= 0.0);
        prop_assert!((r.anderson_integral - r.anderson_integral_spectral).abs() < 1e-10);
        prop_assert!((r.ln_d - r.ln_d_spectral).abs() <= 1e-8 * r.ln_d.abs().max(1.0));
    }

    #[test]
    fn config_validation(rho in -2.0..2.0f64, n_list in prop::collection::vec(0usize..50, 0..6), tol in -0.5..1.5f64) {
        let text = format!(
            "[potential]\nfamily = \"square_well\"\nv0 = 0.1\na = 1.0\n\n[sweep]\nrho = {rho:?}\nn_list = {n_list:?}\n\n[tolerances]\nrtol = {tol:?}\n"
        );
        let ok = rho > 0.0
            && !n_list.is_empty()
            && n_list[0] >= 1
            && n_list.windows(2).all(|w| w[1] > w[0])
            && tol > 0.0
            && tol < 1.0;
        let parsed = SweepConfig::from_toml_str(&text);
        prop_assert_eq!(parsed.is_ok(), ok, "{}", text);
        if let Err(e) = parsed {
            prop_assert!(e.is_config());
        }
    }
}
