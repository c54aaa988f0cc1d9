//! Critical capillarity `κ_C = sup g∫ρ̄′w₂² / ∫|ρ̄′∇w₂|²` by per-mode generalized
//! eigenvalue problems.
//!
//! Writing `w₂ = Σ_ξ φ_ξ(y) e^{iξx}` with `ξ = k/L`, the quotient decouples into
//! `Q(φ; ξ) = g∫ρ̄′φ² / ∫ρ̄′²(φ′² + ξ²φ²)`. The `ξ = 0` coefficient of `w₂` vanishes:
//! `div w = 0` gives `∂₂ŵ₂(0, y) = 0`, and `w₂ = 0` on the walls then forces
//! `ŵ₂(0, ·) ≡ 0`. Because `ξ²` only enlarges the denominator, the supremum sits
//! at `k = 1`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::banded::{fix_sign, top_eigenpair, SymBanded};
use crate::error::{NskError, Result};
use crate::fd;
use crate::par;
use crate::profile::{check_admissibility, default_tolerance, DensityProfile, SlabConfig};

/// Numerator and denominator forms of `Q(φ; ξ)` on interior nodes.
#[derive(Clone, Debug)]
pub struct ModeQuotientOperator {
    pub k: usize,
    pub xi: f64,
    /// `g Σ ρ̄′_j φ_j² Δy`
    pub a: SymBanded,
    /// `Σ ρ̄′_c² (D₊φ)_c² Δy + ξ² Σ ρ̄′_j² φ_j² Δy`
    pub b: SymBanded,
    pub dy: f64,
    pub n: usize,
}

/// `ρ̄′` sampled at interior nodes and at cell centres.
#[derive(Clone, Debug)]
pub(crate) struct SlopeSamples {
    pub nodes: Vec<f64>,
    pub centres: Vec<f64>,
}

pub(crate) fn slope_samples(p: &DensityProfile) -> SlopeSamples {
    let n = p.n();
    let dy = p.dy();
    SlopeSamples { nodes: p.d1[1..n].to_vec(), centres: (0..n).map(|c| p.eval((c as f64 + 0.5) * dy)[1]).collect() }
}

/// Gravity and capillary forms shared with the growth-rate pencil:
/// `(g Σ ρ̄′φ², Σ ρ̄′²(|D₊φ|² + ξ²φ²))`.
pub(crate) fn potential_forms(s: &SlopeSamples, g: f64, xi: f64, dy: f64) -> (SymBanded, SymBanded) {
    let a = fd::node_mass(&s.nodes.iter().map(|v| g * v).collect::<Vec<_>>(), dy);
    let stiff = fd::centre_stiffness(&s.centres.iter().map(|v| v * v).collect::<Vec<_>>(), dy);
    let mass = fd::node_mass(&s.nodes.iter().map(|v| v * v).collect::<Vec<_>>(), dy);
    let b = SymBanded::combine(&[(1.0, &stiff), (xi * xi, &mass)]);
    (a, b)
}

fn check_nondegenerate(p: &DensityProfile, s: &SlopeSamples) -> Result<()> {
    let report = check_admissibility(p, default_tolerance(p));
    let min_abs_d1 = report.min_abs_d1.min(s.centres.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
    let sign = p.d1[0].signum();
    let same_sign = p.d1.iter().chain(&s.centres).all(|v| v.signum() == sign);
    if !report.stabilizing || !same_sign {
        return Err(NskError::DegenerateThreshold { min_abs_d1 });
    }
    Ok(())
}

pub fn assemble_mode_quotient(p: &DensityProfile, config: &SlabConfig, k: usize) -> Result<ModeQuotientOperator> {
    if k == 0 {
        return Err(NskError::InvalidConfig("mode index k must be >= 1".into()));
    }
    let s = slope_samples(p);
    check_nondegenerate(p, &s)?;
    let xi = k as f64 / config.l;
    let dy = p.dy();
    let (a, b) = potential_forms(&s, config.g, xi, dy);
    if b.cholesky().is_none() {
        return Err(NskError::DegenerateThreshold { min_abs_d1: p.min_abs_d1() });
    }
    Ok(ModeQuotientOperator { k, xi, a, b, dy, n: p.n() })
}

/// Largest `λ` of `Aφ = λBφ` and its eigenfunction on all nodes (walls included),
/// with unit discrete `L²(0,h)` norm and positive largest entry.
pub fn mode_threshold(op: &ModeQuotientOperator) -> Result<(f64, Vec<f64>)> {
    let top = top_eigenpair(&op.a, &op.b, None)?;
    let mut phi = Vec::with_capacity(op.n + 1);
    phi.push(0.0);
    phi.extend_from_slice(&top.vector);
    phi.push(0.0);
    normalize_l2(&mut phi, op.dy);
    fix_sign(&mut phi);
    Ok((top.value, phi))
}

pub(crate) fn normalize_l2(phi: &mut [f64], dy: f64) {
    let s = (phi.iter().map(|v| v * v).sum::<f64>() * dy).sqrt();
    if s > 0.0 {
        phi.iter_mut().for_each(|v| *v /= s);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeThreshold {
    pub k: usize,
    pub xi: f64,
    pub kappa_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    pub kappa_c: f64,
    pub k_star: usize,
    pub per_mode: Vec<ModeThreshold>,
    /// Maximizing eigenfunction at the profile nodes.
    pub phi: Vec<f64>,
    pub nodes: Vec<f64>,
    pub grid_n: usize,
    /// `g·max|ρ̄′|·(min|ρ̄′|)⁻²/(π²h⁻² + L⁻²)`.
    pub slope_bound: f64,
    /// The same bound with the discrete Dirichlet eigenvalue in place of `π²h⁻²`;
    /// it holds exactly for the discrete quotient.
    pub discrete_bound: f64,
}

/// `g·max|ρ̄′|·(min|ρ̄′|)⁻²/(π²h⁻² + L⁻²)`.
pub fn slope_bound(p: &DensityProfile, config: &SlabConfig) -> f64 {
    let min = p.min_abs_d1();
    config.g * p.max_abs_d1() / (min * min * config.poincare_constant())
}

fn discrete_bound(p: &DensityProfile, s: &SlopeSamples, config: &SlabConfig) -> f64 {
    let dy = p.dy();
    let h = config.h;
    let lam_d = 4.0 / (dy * dy) * (PI * dy / (2.0 * h)).sin().powi(2);
    let max_pos = s.nodes.iter().fold(0.0_f64, |m, &v| m.max(v));
    let min_sq = s.nodes.iter().chain(&s.centres).fold(f64::INFINITY, |m, v| m.min(v * v));
    config.g * max_pos / (min_sq * (lam_d + 1.0 / (config.l * config.l)))
}

/// Threshold over modes `k = 1..=k_max` at resolution `n`.
pub fn compute_kappa_c(p: &DensityProfile, config: &SlabConfig, n: usize, k_max: usize) -> Result<ThresholdResult> {
    config.validate()?;
    let p = p.resample(n)?;
    let report = check_admissibility(&p, default_tolerance(&p));
    if !report.rt_condition {
        return Err(NskError::InvalidConfig("profile violates the RT condition (rho' <= 0 everywhere)".into()));
    }
    let k_max = k_max.max(1);
    let solved: Vec<Result<(f64, Vec<f64>, f64)>> = par::map_range(k_max, |i| {
        let op = assemble_mode_quotient(&p, config, i + 1)?;
        let (lam, phi) = mode_threshold(&op)?;
        Ok((lam, phi, op.xi))
    });
    let mut per_mode = Vec::with_capacity(k_max);
    let mut phi_star = Vec::new();
    for (i, r) in solved.into_iter().enumerate() {
        let (lam, phi, xi) = r?;
        if let Some(prev) = per_mode.last().map(|m: &ModeThreshold| m.kappa_c) {
            if !(lam < prev) {
                return Err(NskError::Monotonicity { k: i + 1, value: lam, prev_k: i, prev });
            }
        }
        if i == 0 {
            phi_star = phi;
        }
        per_mode.push(ModeThreshold { k: i + 1, xi, kappa_c: lam });
    }
    let kappa_c = per_mode[0].kappa_c;
    let s = slope_samples(&p);
    let dbound = discrete_bound(&p, &s, config);
    if kappa_c > dbound * (1.0 + 1e-10) {
        return Err(NskError::BoundViolation { kappa_c, bound: dbound });
    }
    Ok(ThresholdResult {
        kappa_c,
        k_star: 1,
        per_mode,
        phi: phi_star,
        nodes: p.nodes.clone(),
        grid_n: n,
        slope_bound: slope_bound(&p, config),
        discrete_bound: dbound,
    })
}

/// `k,xi,kappa_c_k` rows.
pub fn write_modes_csv(r: &ThresholdResult, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "k,xi,kappa_c_k")?;
    for m in &r.per_mode {
        writeln!(w, "{},{:.16e},{:.16e}", m.k, m.xi, m.kappa_c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::make_linear_profile;

    #[test]
    fn linear_profile_matches_discrete_closed_form() {
        // With constant ρ̄′ the pencil is g/ρ̄′ times the inverse Dirichlet Laplacian.
        let cfg = SlabConfig::new(1.0, 0.1, 0.0, 1.0, 1.0).unwrap();
        let n = 64;
        let p = make_linear_profile(1.0, 1.0, &cfg, n).unwrap();
        let op = assemble_mode_quotient(&p, &cfg, 1).unwrap();
        let (lam, _) = mode_threshold(&op).unwrap();
        let dy = 1.0 / n as f64;
        let lam_d = 4.0 / (dy * dy) * (PI * dy / 2.0).sin().powi(2);
        assert!((lam - 1.0 / (lam_d + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn k_zero_is_rejected() {
        let cfg = SlabConfig::new(1.0, 0.1, 0.0, 1.0, 1.0).unwrap();
        let p = make_linear_profile(1.0, 1.0, &cfg, 16).unwrap();
        assert!(assemble_mode_quotient(&p, &cfg, 0).is_err());
    }
}
