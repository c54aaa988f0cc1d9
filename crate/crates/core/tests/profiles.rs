use std::f64::consts::PI;

use nsk_core::profile::{
    check_admissibility, default_tolerance, equilibrium_pressure, make_analytic_profile, make_linear_profile,
    make_tabulated_profile, parse_tabulated, write_tabulated,
};
use nsk_core::{AnalyticProfile, NskError, SlabConfig};
use proptest::prelude::*;

fn unit() -> SlabConfig {
    SlabConfig::new(1.0, 0.1, 0.0, 1.0, 1.0).unwrap()
}

#[test]
fn config_rejects_nonpositive_parameters() {
    assert!(SlabConfig::new(0.0, 0.1, 0.0, 1.0, 1.0).is_err());
    assert!(SlabConfig::new(1.0, -0.1, 0.0, 1.0, 1.0).is_err());
    assert!(SlabConfig::new(1.0, 0.1, -1e-3, 1.0, 1.0).is_err());
    assert!(SlabConfig::new(1.0, 0.1, 0.0, f64::NAN, 1.0).is_err());
    let c = unit();
    assert!((c.width() - 2.0 * PI).abs() < 1e-15);
    assert!((c.poincare_constant() - (PI * PI + 1.0)).abs() < 1e-14);
}

#[test]
fn linear_profile_vacuum_is_reported() {
    let cfg = unit();
    match make_linear_profile(0.5, -1.0, &cfg, 16) {
        Err(NskError::Vacuum { min, y }) => {
            assert!((min + 0.5).abs() < 1e-15);
            assert_eq!(y, 1.0);
        }
        other => panic!("expected vacuum, got {other:?}"),
    }
}

#[test]
fn admissibility_flags() {
    let cfg = unit();
    let lin = make_linear_profile(1.0, 1.0, &cfg, 32).unwrap();
    let r = check_admissibility(&lin, default_tolerance(&lin));
    assert!(r.rt_condition && r.stabilizing && !r.boundary_flat);

    let cos = make_analytic_profile(AnalyticProfile::Cosine { base: 2.0, amp: 1.0 }, &cfg, 32).unwrap();
    let r = check_admissibility(&cos, default_tolerance(&cos));
    assert!(r.rt_condition && !r.stabilizing && r.boundary_flat);

    let heavy_below = make_linear_profile(2.0, -1.0, &cfg, 32).unwrap();
    assert!(!check_admissibility(&heavy_below, 1e-12).rt_condition);
}

#[test]
fn equilibrium_pressure_of_linear_profile() {
    // P̄′ = −gρ̄ for κρ̄‴ = 0, so P̄(y) = −g(y + y²/2) for ρ̄ = 1 + y
    let cfg = SlabConfig { g: 2.0, kappa: 0.3, ..unit() };
    let p = make_linear_profile(1.0, 1.0, &cfg, 40).unwrap();
    let pb = equilibrium_pressure(&p, &cfg);
    for (y, v) in p.nodes.iter().zip(&pb) {
        assert!((v + 2.0 * (y + 0.5 * y * y)).abs() < 1e-12);
    }
}

#[test]
fn tabulated_round_trip_recovers_derivatives() {
    let cfg = unit();
    let expr = AnalyticProfile::TanhLayer { base: 2.0, amp: 0.5, width: 0.2, center: 0.5, slope: 0.1 };
    let a = make_analytic_profile(expr, &cfg, 200).unwrap();
    let mut buf = Vec::new();
    write_tabulated(&a, &mut buf).unwrap();
    let t = parse_tabulated(std::str::from_utf8(&buf).unwrap(), &cfg).unwrap();
    assert_eq!(t.rho, a.rho);
    let err = t.d1.iter().zip(&a.d1).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err < 1e-5 * a.max_abs_d1(), "d1 error {err}");
}

#[test]
fn nonuniform_samples_are_interpolated() {
    let cfg = unit();
    let ys = [0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0];
    let mut text = String::from("# profile v1\n# comment\n");
    for y in ys {
        text += &format!("{y} {}\n", 1.0 + 2.0 * y);
    }
    let p = parse_tabulated(&text, &cfg).unwrap();
    assert_eq!(p.n(), 7);
    for (y, r) in p.nodes.iter().zip(&p.rho) {
        assert!((r - (1.0 + 2.0 * y)).abs() < 1e-12);
    }
}

#[test]
fn malformed_files_are_rejected() {
    let cfg = unit();
    let good: String = (0..=8).map(|j| format!("{} 1.{j}\n", j as f64 / 8.0)).collect();
    assert!(parse_tabulated(&format!("# profile v1\n{good}"), &cfg).is_ok());
    assert!(matches!(parse_tabulated(&good, &cfg), Err(NskError::ProfileFile(_))));
    assert!(parse_tabulated("# profile v1\n0 1\n0.5 2\n1 3\n", &cfg).is_err());
    assert!(parse_tabulated(&format!("# profile v1\n{good}0.9 1 2\n"), &cfg).is_err());
    assert!(parse_tabulated(&format!("# profile v1\n{}", good.replace("1.3", "abc")), &cfg).is_err());
    let short_span: String = (0..=8).map(|j| format!("{} 1.{j}\n", j as f64 / 10.0)).collect();
    assert!(parse_tabulated(&format!("# profile v1\n{short_span}"), &cfg).is_err());
    assert!(make_tabulated_profile(vec![1.0, 0.0, -1.0, 1.0, 1.0, 1.0, 1.0], 1.0).is_err());
}

#[test]
fn linear_profile_examples() {
    let cfg = unit();
    let p = make_linear_profile(2.0, 1.0, &cfg, 64).unwrap();
    assert_eq!(p.rho[0], 2.0);
    assert_eq!(p.rho[64], 3.0);
    assert!(p.d1.iter().all(|&d| d == 1.0));
    assert!(p.d2.iter().chain(&p.d3).all(|&d| d == 0.0));

    let flat = make_linear_profile(1.0, 0.0, &cfg, 16).unwrap();
    assert!(flat.d1.iter().all(|&d| d == 0.0));
    assert!(!check_admissibility(&flat, 1e-12).rt_condition);

    assert!(matches!(make_linear_profile(1.0, -2.0, &cfg, 16), Err(NskError::Vacuum { .. })));
}

#[test]
fn sin_squared_slope_is_flat_at_walls() {
    let cfg = unit();
    let p = make_analytic_profile(AnalyticProfile::SinSquared { base: 1.0, amp: 1.0 }, &cfg, 64).unwrap();
    let r = check_admissibility(&p, default_tolerance(&p));
    assert!(r.rt_condition && !r.stabilizing && r.boundary_flat);
}

#[test]
fn cubic_pressure_converges_at_second_order() {
    // ρ̄ = 1 + y + y³: P̄ = (6κ − g)·(y + y²/2 + y⁴/4)
    let cfg = SlabConfig { g: 1.5, kappa: 0.2, ..unit() };
    let expr = AnalyticProfile::Polynomial { coeffs: vec![1.0, 1.0, 0.0, 1.0] };
    let err = |n: usize| {
        let p = make_analytic_profile(expr.clone(), &cfg, n).unwrap();
        let pb = equilibrium_pressure(&p, &cfg);
        p.nodes
            .iter()
            .zip(&pb)
            .map(|(y, v)| (v - (6.0 * cfg.kappa - cfg.g) * (y + y * y / 2.0 + y.powi(4) / 4.0)).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(32), err(64));
    assert!(e2 < 1e-3);
    assert!(((e1 / e2).log2() - 2.0).abs() < 0.1, "{e1} {e2}");
}

#[test]
fn sampled_density_and_slope_are_consistent() {
    let cfg = unit();
    let expr = AnalyticProfile::TanhLayer { base: 2.0, amp: 0.5, width: 0.2, center: 0.5, slope: 0.1 };
    let err = |n: usize| {
        let p = make_analytic_profile(expr.clone(), &cfg, n).unwrap();
        let dy = p.dy();
        (1..n).map(|j| ((p.rho[j + 1] - p.rho[j - 1]) / (2.0 * dy) - p.d1[j]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(64), err(128));
    assert!(((e1 / e2).log2() - 2.0).abs() < 0.1, "{e1} {e2}");
}

proptest! {
    #[test]
    fn resample_preserves_analytic_values(n in 4usize..300, y in 0.0f64..1.0) {
        let cfg = unit();
        let expr = AnalyticProfile::SinSquared { base: 1.0, amp: 0.7 };
        let p = make_analytic_profile(expr.clone(), &cfg, 16).unwrap().resample(n).unwrap();
        prop_assert_eq!(p.n(), n);
        let a = p.eval(y);
        let b = expr.eval(y, 1.0);
        for i in 0..4 {
            prop_assert!((a[i] - b[i]).abs() < 1e-14 * (1.0 + b[i].abs()));
        }
    }

    #[test]
    fn tabulated_eval_interpolates_nodes(n in 8usize..64, slope in 0.1f64..3.0) {
        let cfg = unit();
        let lin = make_linear_profile(1.0, slope, &cfg, n).unwrap();
        let t = make_tabulated_profile(lin.rho.clone(), 1.0).unwrap();
        for j in 0..=n {
            prop_assert!((t.eval(t.nodes[j])[0] - lin.rho[j]).abs() < 1e-12);
            prop_assert!((t.d1[j] - slope).abs() < 1e-9 * slope);
        }
    }

    #[test]
    fn pressure_without_capillarity_is_hydrostatic(rho0 in 0.5f64..3.0, slope in -0.4f64..2.0, g in 0.1f64..5.0) {
        let cfg = SlabConfig { g, kappa: 0.0, ..unit() };
        let p = make_linear_profile(rho0, slope, &cfg, 32).unwrap();
        let pb = equilibrium_pressure(&p, &cfg);
        let dy = p.dy();
        for j in 0..32 {
            prop_assert!(pb[j + 1] < pb[j]);
            let expected = -g * 0.5 * (p.rho[j] + p.rho[j + 1]) * dy;
            prop_assert!((pb[j + 1] - pb[j] - expected).abs() < 1e-12 * expected.abs());
        }
    }

    #[test]
    fn stabilizing_flag_matches_minimum_slope(amp in 0.0f64..1.0, tol in 1e-6f64..0.5) {
        let cfg = unit();
        let p = make_analytic_profile(AnalyticProfile::Polynomial { coeffs: vec![1.0, amp, -0.25 * amp] }, &cfg, 20).unwrap();
        let r = check_admissibility(&p, tol);
        let min = p.d1.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        prop_assert_eq!(r.stabilizing, min > tol);
        prop_assert_eq!(r.min_abs_d1, min);
    }
}
