//! Growth rate `Λ` of the linearized problem by the modified variational method.
//!
//! For a mode `w₂ = φ(y) cos ξx`, `w₁ = −φ′(y) sin(ξx)/ξ` the kinetic, viscous and
//! potential energies become the real quadratic forms
//!
//! * `M(φ) = ∫ρ̄(φ² + φ′²/ξ²)`
//! * `V(φ) = ∫(2φ′² + φ″²/ξ² + ξ²φ²)`
//! * `E(φ) = g∫ρ̄′φ² − κ∫ρ̄′²(φ′² + ξ²φ²)`
//!
//! and `α(s) = max (E − sμV)/M`. The rate `Λ_ξ` is the positive root of
//! `α(s) = s²`, found by bisection.

use serde::Serialize;

use crate::banded::{fix_sign, top_eigenpair, SymBanded};
use crate::error::{NskError, Result};
use crate::fd;
use crate::par;
use crate::profile::{DensityProfile, SlabConfig};
use crate::threshold::{normalize_l2, potential_forms, slope_samples};

#[derive(Clone, Debug)]
pub struct ModeForms {
    pub k: usize,
    pub xi: f64,
    pub m: SymBanded,
    pub v: SymBanded,
    pub epot: SymBanded,
    pub mu: f64,
    pub dy: f64,
    pub n: usize,
}

pub fn assemble_mode_forms(p: &DensityProfile, config: &SlabConfig, k: usize, n: usize) -> Result<ModeForms> {
    if k == 0 {
        return Err(NskError::InvalidConfig("mode index k must be >= 1".into()));
    }
    let p = p.resample(n)?;
    Ok(forms_on_grid(&p, config, k))
}

impl ModeForms {
    /// `V(φ)` summed as squares of differences, free of the cancellation in `φᵀVφ`.
    pub fn viscous(&self, phi: &[f64]) -> f64 {
        let dy = self.dy;
        let at = |j: isize| if j < 0 || j as usize >= phi.len() { 0.0 } else { phi[j as usize] };
        let n = phi.len() as isize;
        let mut grad = 0.0;
        for c in -1..n {
            grad += (at(c + 1) - at(c)).powi(2);
        }
        let mut curv = 0.0;
        let mut mass = 0.0;
        for i in 0..n {
            curv += (at(i - 1) - 2.0 * at(i) + at(i + 1)).powi(2);
            mass += at(i) * at(i);
        }
        2.0 * grad / dy + curv / (self.xi * self.xi * dy * dy * dy) + self.xi * self.xi * mass * dy
    }
}

fn forms_on_grid(p: &DensityProfile, config: &SlabConfig, k: usize) -> ModeForms {
    let n = p.n();
    let dy = p.dy();
    let xi = k as f64 / config.l;
    let inv_xi2 = 1.0 / (xi * xi);
    let rho_nodes = &p.rho[1..n];
    let rho_centres: Vec<f64> = (0..n).map(|c| p.eval((c as f64 + 0.5) * dy)[0]).collect();
    let m =
        SymBanded::combine(&[(1.0, &fd::node_mass(rho_nodes, dy)), (inv_xi2, &fd::centre_stiffness(&rho_centres, dy))]);
    let ones_c = vec![1.0; n];
    let ones_n = vec![1.0; n - 1];
    let v = SymBanded::combine(&[
        (2.0, &fd::centre_stiffness(&ones_c, dy)),
        (inv_xi2, &fd::curvature(&ones_n, dy)),
        (xi * xi, &fd::node_mass(&ones_n, dy)),
    ]);
    let (a, b) = potential_forms(&slope_samples(p), config.g, xi, dy);
    let epot = SymBanded::combine(&[(1.0, &a), (-config.kappa, &b)]);
    ModeForms { k, xi, m, v, epot, mu: config.mu, dy, n }
}

/// `α(s)` and its maximizer on interior nodes.
pub fn alpha(s: f64, forms: &ModeForms) -> Result<(f64, Vec<f64>)> {
    alpha_seeded(s, forms, None)
}

fn alpha_seeded(s: f64, forms: &ModeForms, guess: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let k = SymBanded::combine(&[(1.0, &forms.epot), (-s * forms.mu, &forms.v)]);
    let top = top_eigenpair(&k, &forms.m, guess)?;
    let phi = top.vector;
    let value = (forms.epot.quad(&phi) - s * forms.mu * forms.viscous(&phi)) / forms.m.quad(&phi);
    Ok((value, phi))
}

/// Solution of one mode's fixed point.
#[derive(Clone, Debug)]
pub struct ModeRate {
    pub lambda: f64,
    pub alpha0: f64,
    /// Maximizer at `s = Λ` (interior nodes).
    pub phi: Vec<f64>,
    /// `|α(Λ) − Λ²|`; zero when `Λ = 0`.
    pub residual: f64,
    pub alpha_at_lambda: f64,
}

/// `Λ_ξ` with `|α(Λ_ξ) − Λ_ξ²| < tol·max(1, Λ_ξ²)`; zero if `α(0) ≤ 0`.
pub fn mode_growth_rate(forms: &ModeForms, tol: f64) -> Result<ModeRate> {
    let (a0, phi0) = alpha(0.0, forms)?;
    if a0 <= 0.0 {
        return Ok(ModeRate { lambda: 0.0, alpha0: a0, phi: phi0, residual: 0.0, alpha_at_lambda: a0 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut guess = phi0;
    let mut doublings = 0;
    loop {
        let (a, ph) = alpha_seeded(hi, forms, Some(&guess))?;
        guess = ph;
        let f = a - hi * hi;
        if f.abs() < tol * (hi * hi).max(1.0) {
            return Ok(ModeRate { lambda: hi, alpha0: a0, phi: guess, residual: f.abs(), alpha_at_lambda: a });
        }
        if f < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(NskError::Bracket(format!("alpha(s) >= s^2 up to s = {hi:.3e}")));
        }
    }
    let mut best: Option<ModeRate> = None;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let (a, ph) = alpha_seeded(mid, forms, Some(&guess))?;
        guess = ph;
        let f = a - mid * mid;
        let cand = ModeRate { lambda: mid, alpha0: a0, phi: guess.clone(), residual: f.abs(), alpha_at_lambda: a };
        if f.abs() < tol * (mid * mid).max(1.0) {
            return Ok(cand);
        }
        if best.as_ref().is_none_or(|b| cand.residual < b.residual) {
            best = Some(cand);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    let best = best.expect("bisection evaluated at least once");
    Err(NskError::NoConvergence(format!(
        "fixed point stalled at s = {:.15e} with residual {:.3e}",
        best.lambda, best.residual
    )))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthOptions {
    pub tol: f64,
    /// Hard cap on the mode sweep.
    pub k_max: usize,
    /// Sweep every mode up to `k_max` instead of stopping after three decreases.
    pub exhaustive: bool,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions { tol: 1e-10, k_max: 64, exhaustive: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeGrowth {
    pub k: usize,
    pub xi: f64,
    pub alpha0: f64,
    pub lambda: f64,
    pub residual: f64,
}

/// Norms of the reconstructed eigenfunction on one periodic cell.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Nontriviality {
    pub weighted_w2: f64,
    pub w1: f64,
    pub d1_w1: f64,
    pub d2_w1: f64,
    pub w2: f64,
    pub d1_w2: f64,
    pub d2_w2: f64,
}

impl Nontriviality {
    pub fn min(&self) -> f64 {
        [self.weighted_w2.abs(), self.w1, self.d1_w1, self.d2_w1, self.w2, self.d1_w2, self.d2_w2]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthResult {
    pub lambda: f64,
    pub k_star: usize,
    pub xi_star: f64,
    pub per_mode: Vec<ModeGrowth>,
    pub nodes: Vec<f64>,
    /// Amplitude of `w₂ = φ(y) cos ξx`, unit `L²(0,h)` norm.
    pub w2: Vec<f64>,
    /// Amplitude of `w₁ = W₁(y) sin ξx`.
    pub w1: Vec<f64>,
    /// Amplitude of `β = B(y) cos ξx`.
    pub beta: Vec<f64>,
    pub residual: f64,
    pub alpha_at_lambda: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub nontriviality: Nontriviality,
}

pub fn compute_growth(p: &DensityProfile, config: &SlabConfig, n: usize) -> Result<GrowthResult> {
    compute_growth_with(p, config, n, &GrowthOptions::default())
}

pub fn compute_growth_with(
    p: &DensityProfile,
    config: &SlabConfig,
    n: usize,
    opts: &GrowthOptions,
) -> Result<GrowthResult> {
    config.validate()?;
    let p = p.resample(n)?;
    let batch = par::current_threads().max(1);
    let mut rates: Vec<(ModeForms, ModeRate)> = Vec::new();
    let mut best_key = f64::NEG_INFINITY;
    let mut below = 0;
    let key = |r: &ModeRate| if r.alpha0 > 0.0 { r.lambda } else { r.alpha0 };
    'sweep: while rates.len() < opts.k_max {
        let start = rates.len() + 1;
        let end = (start + batch).min(opts.k_max + 1);
        let ks: Vec<usize> = (start..end).collect();
        let solved = par::map_slice(&ks, |&k| {
            let forms = forms_on_grid(&p, config, k);
            mode_growth_rate(&forms, opts.tol).map(|r| (forms, r))
        });
        for r in solved {
            let (forms, rate) = r?;
            let kv = key(&rate);
            rates.push((forms, rate));
            if kv > best_key {
                best_key = kv;
                below = 0;
            } else {
                below += 1;
            }
            if !opts.exhaustive && below >= 3 {
                break 'sweep;
            }
        }
    }
    let (star, _) =
        rates
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, (_, r))| if key(r) > acc.1 { (i, key(r)) } else { acc });
    let per_mode = rates
        .iter()
        .map(|(f, r)| ModeGrowth { k: f.k, xi: f.xi, alpha0: r.alpha0, lambda: r.lambda, residual: r.residual })
        .collect();
    let (forms, rate) = &rates[star];
    let (w2, w1, beta) = reconstruct(&p, config, forms, rate);
    let nontriviality = norms(&p, config, forms.xi, &w2, &w1);
    Ok(GrowthResult {
        lambda: rate.lambda,
        k_star: forms.k,
        xi_star: forms.xi,
        per_mode,
        nodes: p.nodes.clone(),
        w2,
        w1,
        beta,
        residual: rate.residual,
        alpha_at_lambda: rate.alpha_at_lambda,
        grid_n: n,
        tol: opts.tol,
        nontriviality,
    })
}

/// `(φ, W₁, B)` at all nodes. `W₁ = −φ′/ξ` from `div w = 0`, and `B` from the
/// horizontal momentum balance `Λρ̄w₁ + ∂₁β − μΔw₁ = 0`.
fn reconstruct(
    p: &DensityProfile,
    config: &SlabConfig,
    forms: &ModeForms,
    rate: &ModeRate,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = forms.n;
    let dy = forms.dy;
    let xi = forms.xi;
    let mut phi = Vec::with_capacity(n + 1);
    phi.push(0.0);
    phi.extend_from_slice(&rate.phi);
    phi.push(0.0);
    normalize_l2(&mut phi, dy);
    fix_sign(&mut phi);
    // odd ghosts: φ″ = 0 at the walls
    let at = |j: isize| -> f64 {
        if j < 0 {
            -phi[(-j) as usize]
        } else if j as usize > n {
            -phi[2 * n - j as usize]
        } else {
            phi[j as usize]
        }
    };
    let w1: Vec<f64> = (0..=n as isize).map(|j| -(at(j + 1) - at(j - 1)) / (2.0 * dy * xi)).collect();
    // even ghosts: ∂₂w₁ = 0 at the walls
    let w1_at = |j: isize| -> f64 {
        if j < 0 {
            w1[(-j) as usize]
        } else if j as usize > n {
            w1[2 * n - j as usize]
        } else {
            w1[j as usize]
        }
    };
    let beta = (0..=n as isize)
        .map(|j| {
            let w = w1[j as usize];
            let lap = (w1_at(j + 1) - 2.0 * w + w1_at(j - 1)) / (dy * dy) - xi * xi * w;
            (rate.lambda * p.rho[j as usize] * w - config.mu * lap) / xi
        })
        .collect();
    (phi, w1, beta)
}

fn norms(p: &DensityProfile, config: &SlabConfig, xi: f64, w2: &[f64], w1: &[f64]) -> Nontriviality {
    let dy = p.dy();
    let cell = std::f64::consts::PI * config.l;
    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        let n = w2.len() - 1;
        (0..=n).map(|j| if j == 0 || j == n { 0.5 * f(j) } else { f(j) }).sum::<f64>() * dy
    };
    let diff = |v: &[f64]| -> f64 { v.windows(2).map(|w| ((w[1] - w[0]) / dy).powi(2)).sum::<f64>() * dy };
    let l2w2 = trap(&|j| w2[j] * w2[j]);
    let l2w1 = trap(&|j| w1[j] * w1[j]);
    Nontriviality {
        weighted_w2: cell * trap(&|j| p.d1[j] * w2[j] * w2[j]),
        w1: (cell * l2w1).sqrt(),
        d1_w1: (cell * xi * xi * l2w1).sqrt(),
        d2_w1: (cell * diff(w1)).sqrt(),
        w2: (cell * l2w2).sqrt(),
        d1_w2: (cell * xi * xi * l2w2).sqrt(),
        d2_w2: (cell * diff(w2)).sqrt(),
    }
}

/// `k,xi,alpha0,Lambda_xi` rows.
pub fn write_growth_csv(r: &GrowthResult, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "k,xi,alpha0,Lambda_xi")?;
    for m in &r.per_mode {
        writeln!(w, "{},{:.16e},{:.16e},{:.16e}", m.k, m.xi, m.alpha0, m.lambda)?;
    }
    Ok(())
}

/// Two-column `y value` text.
pub fn write_profile_columns(nodes: &[f64], values: &[f64], w: &mut impl std::io::Write) -> std::io::Result<()> {
    for (y, v) in nodes.iter().zip(values) {
        writeln!(w, "{y:.16e} {v:.16e}")?;
    }
    Ok(())
}
