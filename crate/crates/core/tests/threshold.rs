mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use nsk_core::profile::{make_analytic_profile, make_linear_profile};
use nsk_core::threshold::{assemble_mode_quotient, compute_kappa_c, mode_threshold, slope_bound};
use nsk_core::{AnalyticProfile, DensityProfile, NskError, SlabConfig};
use proptest::prelude::*;

fn unit() -> SlabConfig {
    SlabConfig::new(1.0, 0.1, 0.0, 1.0, 1.0).unwrap()
}

fn tanh_layer() -> AnalyticProfile {
    AnalyticProfile::TanhLayer { base: 2.0, amp: 0.5, width: 0.2, center: 0.5, slope: 0.1 }
}

fn dense_threshold(p: &DensityProfile, cfg: &SlabConfig, k: usize) -> f64 {
    let n = p.n();
    let dy = p.dy();
    let xi = k as f64 / cfg.l;
    let nodes: Vec<f64> = p.d1[1..n].to_vec();
    let centres: Vec<f64> = (0..n).map(|c| p.eval((c as f64 + 0.5) * dy)[1]).collect();
    let a = common::mass(&nodes.iter().map(|v| cfg.g * v).collect::<Vec<_>>(), dy);
    let b: DMatrix<f64> = common::stiffness(&centres.iter().map(|v| v * v).collect::<Vec<_>>(), dy)
        + common::mass(&nodes.iter().map(|v| v * v).collect::<Vec<_>>(), dy) * (xi * xi);
    common::dense_top(&a, &b).0
}

#[test]
fn linear_profile_matches_dense_oracle() {
    let cfg = unit();
    let p = make_linear_profile(1.0, 1.0, &cfg, 64).unwrap();
    for k in 1..=3 {
        let op = assemble_mode_quotient(&p, &cfg, k).unwrap();
        let (v, _) = mode_threshold(&op).unwrap();
        let d = dense_threshold(&p, &cfg, k);
        assert!((v - d).abs() < 1e-10 * d, "k={k}: {v} vs {d}");
    }
}

#[test]
fn tanh_layer_matches_dense_oracle_and_frozen_value() {
    let cfg = unit();
    let p = make_analytic_profile(tanh_layer(), &cfg, 256).unwrap();
    let r = compute_kappa_c(&p, &cfg, 256, 8).unwrap();
    let d = dense_threshold(&p, &cfg, 1);
    assert!((r.kappa_c - d).abs() < 1e-10 * d);
    assert!((r.kappa_c - 4.181602465883452e-1).abs() < 1e-9);
    assert_eq!(r.k_star, 1);
}

#[test]
fn linear_profile_converges_to_closed_form() {
    let cfg = unit();
    let exact = 1.0 / (PI * PI + 1.0);
    let err = |n| {
        let p = make_linear_profile(1.0, 1.0, &cfg, n).unwrap();
        (compute_kappa_c(&p, &cfg, n, 4).unwrap().kappa_c - exact).abs()
    };
    let (e1, e2) = (err(64), err(128));
    assert!(e2 < 6e-5 * exact);
    assert!(((e1 / e2).log2() - 2.0).abs() < 0.05);
}

#[test]
fn per_mode_values_decrease_and_eigenfunction_is_normalized() {
    let cfg = unit();
    let p = make_analytic_profile(tanh_layer(), &cfg, 128).unwrap();
    let r = compute_kappa_c(&p, &cfg, 128, 6).unwrap();
    for w in r.per_mode.windows(2) {
        assert!(w[1].kappa_c < w[0].kappa_c);
    }
    let dy = p.dy();
    let norm: f64 = r.phi.iter().map(|v| v * v).sum::<f64>() * dy;
    assert!((norm - 1.0).abs() < 1e-12);
    assert_eq!(r.phi[0], 0.0);
    assert_eq!(*r.phi.last().unwrap(), 0.0);
    assert!(r.kappa_c <= r.discrete_bound);
}

#[test]
fn zero_mode_is_rejected() {
    let cfg = unit();
    let p = make_linear_profile(1.0, 1.0, &cfg, 16).unwrap();
    assert!(matches!(assemble_mode_quotient(&p, &cfg, 0), Err(NskError::InvalidConfig(_))));
}

#[test]
fn profiles_with_vanishing_slope_are_degenerate() {
    let cfg = unit();
    let p = make_analytic_profile(AnalyticProfile::SinSquared { base: 1.0, amp: 0.5 }, &cfg, 64).unwrap();
    assert!(matches!(compute_kappa_c(&p, &cfg, 64, 4), Err(NskError::DegenerateThreshold { .. })));
}

#[test]
fn potential_energy_changes_sign_across_threshold() {
    // E(φ) = g∫ρ̄′φ² − κ∫ρ̄′²(φ′² + ξ²φ²) evaluated on the maximizer
    let cfg = unit();
    let p = make_linear_profile(1.0, 1.0, &cfg, 64).unwrap();
    let op = assemble_mode_quotient(&p, &cfg, 1).unwrap();
    let (kc, phi) = mode_threshold(&op).unwrap();
    let dy = p.dy();
    let grav: f64 = phi.iter().map(|v| cfg.g * v * v).sum::<f64>() * dy;
    let cap: f64 = phi.windows(2).map(|w| ((w[1] - w[0]) / dy).powi(2)).sum::<f64>() * dy
        + phi.iter().map(|v| v * v).sum::<f64>() * dy;
    assert!(grav - 0.9 * kc * cap > 0.0);
    assert!(grav - 1.1 * kc * cap < 0.0);
}

#[test]
fn sharp_tanh_layer_matches_dense_oracle_and_frozen_value() {
    let cfg = unit();
    let expr = AnalyticProfile::TanhLayer { base: 2.0, amp: 1.0, width: 0.1, center: 0.5, slope: 0.1 };
    let p = make_analytic_profile(expr, &cfg, 512).unwrap();
    let r = compute_kappa_c(&p, &cfg, 512, 4).unwrap();
    let d = dense_threshold(&p, &cfg, 1);
    assert!((r.kappa_c - d).abs() < 1e-10 * d, "{} vs {d}", r.kappa_c);
    assert!((r.kappa_c - 1.501571824085002e-1).abs() < 1e-9);
    assert_eq!(r.k_star, 1);
}

#[test]
fn wider_cell_and_steeper_slope_follow_closed_form() {
    let wide = SlabConfig::new(1.0, 0.1, 0.0, 2.0, 1.0).unwrap();
    let p = make_linear_profile(1.0, 1.0, &wide, 256).unwrap();
    let kc = compute_kappa_c(&p, &wide, 256, 4).unwrap().kappa_c;
    let exact = 1.0 / (PI * PI + 0.25);
    assert!((kc - exact).abs() < 1e-3 * exact, "{kc} vs {exact}");
    assert!(kc > 1.0 / (PI * PI + 1.0));

    let cfg = unit();
    let steep = make_linear_profile(1.0, 2.0, &cfg, 256).unwrap();
    let kc = compute_kappa_c(&steep, &cfg, 256, 4).unwrap().kappa_c;
    let exact = 0.5 / (PI * PI + 1.0);
    assert!((kc - exact).abs() < 1e-3 * exact);
}

#[test]
fn slope_between_one_and_two_is_bracketed() {
    // ρ̄ = 1 + y + y²/2, so ρ̄′ = 1 + y
    let cfg = unit();
    let expr = AnalyticProfile::Polynomial { coeffs: vec![1.0, 1.0, 0.5] };
    let p = make_analytic_profile(expr, &cfg, 128).unwrap();
    let kc = compute_kappa_c(&p, &cfg, 128, 4).unwrap().kappa_c;
    let lam = PI * PI + 1.0;
    assert!(kc >= 1.0 / (2.0 * lam) && kc <= 2.0 / lam, "{kc}");
}

#[test]
fn linear_eigenfunction_converges_to_sine() {
    let cfg = unit();
    let err = |n: usize| {
        let p = make_linear_profile(1.0, 1.0, &cfg, n).unwrap();
        let r = compute_kappa_c(&p, &cfg, n, 1).unwrap();
        r.phi.iter().zip(&r.nodes).map(|(v, y)| (v - 2f64.sqrt() * (PI * y).sin()).abs()).fold(0.0, f64::max)
    };
    // the sampled sine is an exact discrete eigenvector for constant ρ̄′
    for n in [32, 64, 128, 256] {
        assert!(err(n) < 1e-10, "N={n}: {}", err(n));
    }
}

/// Quotient `g∫ρ̄′w² / ∫ρ̄′²|∇w|²` on an `nx × ny` grid of the periodic slab with
/// `w = 0` on the walls. With `zero_mean` the search space is restricted to fields
/// with vanishing horizontal mean on every row, which is what `div w = 0` and
/// `w₂|walls = 0` impose: `∂₂∫w₂ dx₁ = −∫∂₁w₁ dx₁ = 0` and the row mean vanishes at
/// the wall.
fn quotient_2d(p: &DensityProfile, cfg: &SlabConfig, nx: usize, zero_mean: bool) -> f64 {
    let ny = p.n();
    let dy = p.dy();
    let dx = 2.0 * PI * cfg.l / nx as f64;
    let rows = ny - 1;
    let dof = nx * rows;
    let at = |j: usize, i: usize| (j % nx) * rows + i;
    let mut a = DMatrix::zeros(dof, dof);
    let mut b = DMatrix::zeros(dof, dof);
    for j in 0..nx {
        for i in 0..rows {
            let d = p.d1[i + 1];
            a[(at(j, i), at(j, i))] += cfg.g * d * dx * dy;
            let w = d * d * dy / dx;
            let (u, v) = (at(j, i), at(j + 1, i));
            b[(u, u)] += w;
            b[(v, v)] += w;
            b[(u, v)] -= w;
            b[(v, u)] -= w;
        }
        for c in 0..ny {
            let d = p.eval((c as f64 + 0.5) * dy)[1];
            let w = d * d * dx / dy;
            let lo = c.checked_sub(1).map(|i| at(j, i));
            let hi = (c < rows).then(|| at(j, c));
            for (x, cx) in [(lo, -1.0), (hi, 1.0)] {
                for (y, cy) in [(lo, -1.0), (hi, 1.0)] {
                    if let (Some(x), Some(y)) = (x, y) {
                        b[(x, y)] += w * cx * cy;
                    }
                }
            }
        }
    }
    if !zero_mean {
        return common::dense_top(&a, &b).0;
    }
    let mut t = DMatrix::zeros(dof, (nx - 1) * rows);
    for i in 0..rows {
        for j in 0..nx - 1 {
            let col = i * (nx - 1) + j;
            t[(at(j, i), col)] = 1.0;
            t[(at(j + 1, i), col)] = -1.0;
        }
    }
    common::dense_top(&(t.transpose() * &a * &t), &(t.transpose() * &b * &t)).0
}

#[test]
fn two_dimensional_quotient_reduces_to_first_mode() {
    let cfg = unit();
    let ny = 16;
    let p = make_analytic_profile(tanh_layer(), &cfg, ny).unwrap();
    let (k1, _) = mode_threshold(&assemble_mode_quotient(&p, &cfg, 1).unwrap()).unwrap();
    let constrained = quotient_2d(&p, &cfg, 16, true);
    assert!((constrained - k1).abs() < 1e-2 * k1, "{constrained} vs {k1}");
    let free = quotient_2d(&p, &cfg, 16, false);
    assert!(free > 1.05 * constrained, "{free} vs {constrained}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn threshold_is_linear_in_gravity(g in 0.1f64..10.0) {
        let cfg = unit();
        let p = make_analytic_profile(tanh_layer(), &cfg, 64).unwrap();
        let base = compute_kappa_c(&p, &cfg, 64, 3).unwrap().kappa_c;
        let scaled = compute_kappa_c(&p, &SlabConfig { g, ..cfg }, 64, 3).unwrap().kappa_c;
        prop_assert!((scaled - g * base).abs() < 1e-9 * g * base);
    }

    #[test]
    fn threshold_scales_inversely_with_density_contrast(c in 0.2f64..5.0) {
        let cfg = unit();
        let a = compute_kappa_c(&make_linear_profile(1.0, 1.0, &cfg, 48).unwrap(), &cfg, 48, 3).unwrap().kappa_c;
        let b = compute_kappa_c(&make_linear_profile(1.0, c, &cfg, 48).unwrap(), &cfg, 48, 3).unwrap().kappa_c;
        prop_assert!((b * c - a).abs() < 1e-9 * a);
    }

    #[test]
    fn threshold_never_exceeds_slope_bound(
        amp in 0.05f64..1.0, width in 0.05f64..0.5, center in 0.2f64..0.8, slope in 0.02f64..0.5,
    ) {
        let cfg = unit();
        let expr = AnalyticProfile::TanhLayer { base: 3.0, amp, width, center, slope };
        let p = make_analytic_profile(expr, &cfg, 128).unwrap();
        let r = compute_kappa_c(&p, &cfg, 128, 3).unwrap();
        prop_assert!(r.kappa_c > 0.0);
        prop_assert!(r.kappa_c <= r.discrete_bound * (1.0 + 1e-12));
        prop_assert!(r.kappa_c <= slope_bound(&p, &cfg) * 1.01);
    }
}
