use dihedral_core::periods::*;
use dihedral_core::{Complex64, TorusModulus};
use proptest::prelude::*;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn unit() -> TorusModulus {
    TorusModulus::imaginary(1.0).unwrap()
}

/// Trapezoid rule on `[0, 120]` for an integrand already written in
/// `t = cosh w`; even and smooth in `w`, so the rule converges spectrally.
fn trapezoid_cosh(f: impl Fn(f64) -> f64) -> f64 {
    let (h, n) = (1e-2, 12_000);
    h * (0.5 * f(0.0) + (1..n).map(|k| f(k as f64 * h)).sum::<f64>())
}

#[test]
fn de_quadrature_matches_closed_form_at_alpha_zero() {
    for (a, b) in [(2.0, 3.0), (1.7, 2.4), (2.5, 4.0)] {
        let r = de_residual(a, b, 0.0).unwrap();
        assert!(dist(r.r, de_residual_limit(a, b)) < 1e-10, "({a}, {b}): {:?}", r.r);
    }
}

#[test]
fn de_rational_value() {
    let r = de_residual_limit(2.0, 3.0);
    assert!((r[0] + 0.2).abs() < 1e-15 && (r[1] + 0.4).abs() < 1e-15);
}

#[test]
fn dccw_quadrature_matches_rationals() {
    let r = dccw_residual(2.0, 3.0, 4.0, 0.0).unwrap();
    assert!(dist(r.r, [-7.0 / 120.0, 7.0 / 80.0]) < 1e-10, "{:?}", r.r);
}

#[test]
fn dccw_limit_determinant() {
    let p = dccw_limit_root();
    assert!((dccw_jacobian_limit(p.a, p.b) - 0.000151467).abs() < 1e-6);
    let f = |x: [f64; 2]| Ok(dccw_residual_limit(x[0], x[1], x[1] * x[1] / x[0]));
    let j = fd_jacobian(&f, [p.a, p.b], 1e-6).unwrap();
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    assert!((det - dccw_jacobian_limit(p.a, p.b)).abs() < 1e-9);
}

#[test]
fn small_alpha_approaches_the_limit() {
    let (a, b) = de_limit_root();
    let limit = de_residual_limit(a, b);
    let r = |h: f64| de_residual(a + 0.05, b - 0.05, h).unwrap().r;
    let base = de_residual_limit(a + 0.05, b - 0.05);
    assert!(dist(r(1e-4), base) < 1e-2);
    // first order in alpha: 2 r(h) - r(2h) removes the linear term
    let (r1, r2) = (r(1e-4), r(2e-4));
    let extrapolated = [2.0 * r1[0] - r2[0], 2.0 * r1[1] - r2[1]];
    assert!(dist(extrapolated, base) < 1e-6, "{extrapolated:?} vs {base:?}");
    assert!(dist(de_residual(a, b, 1e-4).unwrap().r, limit) < 1e-2);
}

#[test]
fn dccw_small_alpha_approaches_the_limit() {
    let p = DccwParams::equal_growth(1.9, 5.7, 0.0);
    let base = dccw_residual_limit(p.a, p.b, p.c);
    let r = |h: f64| dccw_residual(p.a, p.b, p.c, h).unwrap().r;
    let (r1, r2) = (r(1e-4), r(2e-4));
    let extrapolated = [2.0 * r1[0] - r2[0], 2.0 * r1[1] - r2[1]];
    assert!(dist(r(1e-4), base) < 1e-2);
    assert!(dist(extrapolated, base) < 1e-6, "{extrapolated:?} vs {base:?}");
}

#[test]
fn psi_integrals_match_trapezoid() {
    for (x, y) in [(0.3, 0.3), (0.5, 0.2), (-0.4, -0.6)] {
        let p1 = trapezoid_cosh(|w| {
            let t = w.cosh();
            w.sinh().powi(2) / (t.sqrt() * (t + x) * (t - y))
        });
        let p2 = trapezoid_cosh(|w| {
            let t = w.cosh();
            t.sqrt() / ((t + x) * (t - y))
        });
        assert!((psi1(x, y).unwrap() - p1).abs() < 1e-10, "psi1({x},{y})");
        assert!((psi2(x, y).unwrap() - p2).abs() < 1e-10, "psi2({x},{y})");
    }
}

#[test]
fn tilde_p_jacobian_matches_differences() {
    for at in [0.2, 0.5, 0.7] {
        let j = tilde_p_jacobian(at, at + 0.05).unwrap();
        let f = |x: [f64; 2]| tilde_p(x[0], x[1]);
        let fd = fd_jacobian(&f, [at, at + 0.05], 1e-6).unwrap();
        for r in 0..2 {
            for k in 0..2 {
                assert!((j[r][k] - fd[r][k]).abs() < 1e-6 * j[r][k].abs().max(1.0), "{at}: {j:?} vs {fd:?}");
            }
        }
    }
}

#[test]
fn symmetric_dks_root() {
    let a0 = a0_tilde();
    assert!(tilde_p(a0, a0).unwrap().iter().all(|v| v.abs() < 1e-10));
    let a = a0_torus();
    assert!((a - 0.5 + t_map(Complex64::new(a0, 0.0)).unwrap().re).abs() < 1e-14);
    assert!(dks_residual(a, a, unit(), 0.0).unwrap().norm < 1e-7);
    let rec = solve_family(Family::Dks, 0.0, None, &FamilyParams::Dks(DksParams { a: 0.25, c: 0.18, tau: unit(), alpha: 0.0 }), &SolveOptions::default()).unwrap();
    let [ra, rc] = rec.params.unknowns();
    assert!((ra - rc).abs() < 1e-7, "{ra} {rc}");
    assert!((ra - a).abs() < 1e-7);
}

#[test]
fn t_map_sends_corners() {
    let pts = [(-1.0, Complex64::new(0.0, 0.5)), (0.0, Complex64::new(0.0, 0.0)), (1.0, Complex64::new(0.5, 0.0))];
    for (x, w) in pts {
        let got = t_map(Complex64::new(x, 0.0)).unwrap();
        assert!((got - w).norm() < 1e-10, "T({x}) = {got}");
        assert!((t_inverse(w).unwrap() - Complex64::new(x, 0.0)).norm() < 1e-8);
    }
}

#[test]
fn solves_de_from_a_rough_start() {
    let init = FamilyParams::De(DeParams { a: 2.1, b: 3.4, alpha: 0.0, rho: 1.0 });
    let rec = solve_family(Family::De, 0.0, None, &init, &SolveOptions::default()).unwrap();
    let (a, b) = de_limit_root();
    let [ra, rb] = rec.params.unknowns();
    assert!((ra - a).abs() < 1e-8 && (rb - b).abs() < 1e-8);
    assert!(rec.residual.norm < SOLVE_TOL);
    let FamilyParams::De(p) = rec.params else { unreachable!() };
    assert!(p.rho > 0.0);
}

#[test]
fn perturbed_root_is_far_from_closing() {
    let (a, b) = de_limit_root();
    let r = de_residual(a + 0.1, b, 0.0).unwrap();
    assert!(r.norm > 1e3 * SOLVE_TOL, "{}", r.norm);
}

#[test]
fn wrong_family_and_bad_schedule_are_rejected() {
    let opts = SolveOptions::default();
    let de = FamilyParams::De(DeParams { a: 2.3, b: 3.1, alpha: 0.0, rho: 1.0 });
    assert!(matches!(solve_family(Family::Dccw, 0.0, None, &de, &opts), Err(PeriodError::InvalidParams(_))));
    assert!(matches!(solve_family(Family::De, 0.0, Some(unit()), &de, &opts), Err(PeriodError::InvalidParams(_))));
    assert!(continuation(Family::De, &[0.1, 0.2], None, &de, &opts).is_err());
    assert!(continuation(Family::De, &[0.0, 0.2, 0.1], None, &de, &opts).is_err());
    assert!(DeParams { a: 3.0, b: 2.0, alpha: 0.0, rho: 1.0 }.validate().is_err());
}

#[test]
fn de_branch_to_one_fifth() {
    let schedule = [0.0, 1.0 / 50.0, 1.0 / 40.0, 1.0 / 30.0, 1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0];
    let init = FamilyParams::De(DeParams { a: 2.3, b: 3.1, alpha: 0.0, rho: 1.0 });
    let out = continuation(Family::De, &schedule, None, &init, &SolveOptions::default()).unwrap();
    assert!(out.failure.is_none());
    assert_eq!(out.records.len(), 7);
    assert_eq!(out.last_solved(), Some(0.2));
    let last = out.records.last().unwrap();
    let [a, b] = last.params.unknowns();
    assert!((a - 2.33090228).abs() < 1e-7 && (b - 3.12355424).abs() < 1e-7, "{a} {b}");
    assert!(out.records.iter().all(|r| r.residual.norm < SOLVE_TOL));
}

#[test]
fn dks_tau_sweep_is_sorted() {
    let init = DksParams { a: 0.2, c: 0.2, tau: unit(), alpha: 0.0 };
    let out = tau_continuation(0.0, &[0.9, 1.0, 1.1], &init, &SolveOptions::default()).unwrap();
    let ts: Vec<f64> = out.records.iter().map(|r| r.step.unwrap().parameter).collect();
    assert_eq!(ts, vec![0.9, 1.0, 1.1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn residual_is_independent_of_contour_radius(da in -0.2f64..0.2, db in -0.2f64..0.2, alpha in 0.0f64..0.3) {
        let (a, b) = (2.33 + da, 3.14 + db);
        let at = |f: f64| de_residual_with(a, b, alpha, &PeriodConfig { radius_fraction: f, ..PeriodConfig::default() }).unwrap().r;
        prop_assert!(dist(at(0.25), at(0.75)) < 1e-10);
    }

    #[test]
    fn residual_norm_is_euclidean(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let r = PeriodResidual::new([x, y]);
        prop_assert!((r.norm - x.hypot(y)).abs() <= 1e-15 * r.norm.max(1.0));
    }
}
