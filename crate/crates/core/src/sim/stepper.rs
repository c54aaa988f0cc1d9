//! Low-storage Runge–Kutta/Crank–Nicolson stepping.
//!
//! Explicit terms (transport, advection, gravity, capillarity) use the three-stage
//! low-storage RK3 scheme; the viscous form is treated with the matching
//! trapezoidal weights. Each stage solves
//! `(M + β_k Δt A) δψ = Δt [γ_k f_k + ζ_k M a_{k−1} − (α_k + β_k) A ψ_k]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{NskError, Result};
use crate::growth::{compute_growth, GrowthResult};
use crate::profile::{DensityProfile, SlabConfig};

use super::checkpoint::read_checkpoint;
use super::grid::{SlabGrid, C64};
use super::slab::{Density, Slab};
use super::state::{DtMode, FieldState, InitKind, RunConfig};

const GAMMA: [f64; 3] = [8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0];
const ZETA: [f64; 3] = [0.0, -17.0 / 60.0, -5.0 / 12.0];
const ALPHA: [f64; 3] = [4.0 / 15.0, 1.0 / 15.0, 1.0 / 6.0];
const BETA: [f64; 3] = ALPHA;

/// Solver instance: the discretization plus run settings.
#[derive(Clone)]
pub struct Simulation {
    pub slab: Slab,
    pub rc: RunConfig,
    /// Conjugate-gradient iterations of the most recent step.
    pub last_iterations: usize,
}

impl Simulation {
    pub fn new(rc: &RunConfig, p: &DensityProfile, config: &SlabConfig) -> Result<Self> {
        rc.validate()?;
        let grid = SlabGrid::new(rc.nx, rc.ny, config.l, config.h, rc.dealias)?;
        let mut slab = Slab::new(grid, *config, p, rc.linearized)?;
        slab.rho_closure = rc.rho_wall;
        Ok(Simulation { slab, rc: rc.clone(), last_iterations: 0 })
    }

    pub fn grid(&self) -> &SlabGrid {
        &self.slab.grid
    }

    fn spectral(&self, s: &FieldState) -> (Vec<C64>, Vec<C64>) {
        let mut rho = self.slab.fft.forward(&s.rho_pert);
        self.slab.truncate(&mut rho);
        let psi = self.slab.psi_from_velocity(&s.v1, &s.v2);
        (rho, psi)
    }

    /// Time step for the next step from `s`.
    pub fn choose_dt(&self, s: &FieldState) -> f64 {
        match self.rc.dt_mode {
            DtMode::Fixed { dt } => dt,
            DtMode::Adaptive { cfl_adv, cfl_cap, dt_max } => {
                let g = self.grid();
                let delta = g.dx.min(g.dy);
                let mut dt = dt_max;
                let vmax = s.max_abs_v();
                if vmax > 0.0 {
                    dt = dt.min(cfl_adv * delta / vmax);
                }
                let kappa = self.slab.config.kappa;
                if kappa > 0.0 {
                    let (grad, min_rho) = self.density_bounds(s);
                    let c_cap = grad * (kappa / min_rho).sqrt();
                    if c_cap > 0.0 {
                        dt = dt.min(cfl_cap * delta / c_cap);
                    }
                }
                dt
            }
        }
    }

    /// `(max|∇ρ|, min ρ)` over the cell centres.
    fn density_bounds(&self, s: &FieldState) -> (f64, f64) {
        let g = self.grid();
        let (nx, ny) = (g.nx, g.ny);
        let r = &s.rho_pert;
        let mut grad = 0.0_f64;
        let mut min_rho = f64::INFINITY;
        for c in 0..ny {
            for i in 0..nx {
                let here = r[c * nx + i];
                let gx = (r[c * nx + (i + 1) % nx] - r[c * nx + (i + nx - 1) % nx]) / (2.0 * g.dx);
                let up = if c + 1 < ny { r[(c + 1) * nx + i] } else { -here };
                let down = if c > 0 { r[(c - 1) * nx + i] } else { -here };
                let gy = self.slab.d1_c[c] + (up - down) / (2.0 * g.dy);
                grad = grad.max(gx.hypot(gy));
                min_rho = min_rho.min(self.slab.rho_c[c] + here);
            }
        }
        (grad, min_rho)
    }

    /// Advance `s` by `dt`.
    pub fn step(&mut self, s: &FieldState, dt: f64) -> Result<FieldState> {
        let slab = &self.slab;
        let (mut rho, mut psi) = self.spectral(s);
        let mut disp = s.displacement.as_ref().map(|d| slab.fft.forward(d));
        let tol = self.rc.pcg_tol;
        let mut prev_rho_t: Option<Vec<C64>> = None;
        let mut prev_acc: Option<Vec<C64>> = None;
        let mut prev_v2: Option<Vec<C64>> = None;
        let mut iters = 0;
        for k in 0..3 {
            let (tend, dens): (_, Option<Density>) = if slab.linearized {
                (slab.tendency(&rho, &psi), None)
            } else {
                let (t, d) = slab.tendency_full(&rho, &psi);
                (t, Some(d))
            };
            let a_psi = slab.apply_visc(&psi);
            let mut rhs: Vec<C64> =
                tend.force.iter().zip(&a_psi).map(|(f, a)| (f * GAMMA[k] - a * (ALPHA[k] + BETA[k])) * dt).collect();
            if let Some(acc) = &prev_acc {
                let m_acc = slab.mass_times(acc, dens.as_ref());
                rhs.iter_mut().zip(&m_acc).for_each(|(r, m)| *r += m * (ZETA[k] * dt));
            }
            if k < 2 {
                // explicit acceleration M⁻¹ f for the next stage
                prev_acc = Some(if slab.linearized {
                    slab.solve(&tend.force, 0.0, None, tol)?.0
                } else {
                    let (a, it) = slab.solve(&tend.force, 0.0, dens.as_ref(), tol)?;
                    iters += it;
                    a
                });
            }
            let (delta, it) = slab.solve(&rhs, BETA[k] * dt, dens.as_ref(), tol)?;
            iters += it;
            if let Some(d) = disp.as_mut() {
                let v2 = slab.velocity_hat(&psi).1;
                for (j, x) in d.iter_mut().enumerate() {
                    *x += v2[j] * (GAMMA[k] * dt);
                    if let Some(p) = &prev_v2 {
                        *x += p[j] * (ZETA[k] * dt);
                    }
                }
                prev_v2 = Some(v2);
            }
            for (j, r) in rho.iter_mut().enumerate() {
                *r += tend.rho_t[j] * (GAMMA[k] * dt);
                if let Some(p) = &prev_rho_t {
                    *r += p[j] * (ZETA[k] * dt);
                }
            }
            prev_rho_t = Some(tend.rho_t);
            psi.iter_mut().zip(&delta).for_each(|(p, d)| *p += d);
        }
        self.last_iterations = iters;
        let (v1, v2) = slab.velocity(&psi);
        let next = FieldState {
            nx: s.nx,
            ny: s.ny,
            t: s.t + dt,
            step_index: s.step_index + 1,
            rho_pert: slab.fft.inverse(&rho),
            v1,
            v2,
            pressure: s.pressure.clone(),
            displacement: disp.map(|d| slab.fft.inverse(&d)),
        };
        self.check_state(s, &next)?;
        Ok(next)
    }

    fn check_state(&self, prev: &FieldState, next: &FieldState) -> Result<()> {
        if !next.is_finite() {
            return Err(NskError::Cfl { t: next.t, reason: "non-finite values".into() });
        }
        let (before, after) = (prev.max_abs_v(), next.max_abs_v());
        if before > 0.0 && after > 10.0 * before {
            return Err(NskError::Cfl {
                t: next.t,
                reason: format!("max|v| grew by {:.3e} in one step", after / before),
            });
        }
        if !self.slab.linearized {
            let (_, min_rho) = self.density_bounds(next);
            if !(min_rho > 0.0) {
                let y = self.grid().y_centres[0];
                return Err(NskError::Vacuum { min: min_rho, y });
            }
        }
        Ok(())
    }

    /// Pressure `β` (zero horizontal-and-vertical mean per row set) recovered from the
    /// momentum balance `∇β = F − N + μΔv − ρ vₜ`.
    pub fn pressure(&self, s: &FieldState) -> Result<Vec<f64>> {
        let slab = &self.slab;
        let g = self.grid();
        let (ny, nk) = (g.ny, g.nk);
        let (rho, psi) = self.spectral(s);
        let (tend, dens) = if slab.linearized {
            (slab.tendency(&rho, &psi), None)
        } else {
            let (t, d) = slab.tendency_full(&rho, &psi);
            (t, Some(d))
        };
        let a_psi = slab.apply_visc(&psi);
        let f: Vec<C64> = tend.force.iter().zip(&a_psi).map(|(a, b)| a - b).collect();
        let (acc, _) = slab.solve(&f, 0.0, dens.as_ref(), self.rc.pcg_tol)?;
        let (a1h, a2h) = slab.velocity_hat(&acc);
        let (v1h, v2h) = slab.velocity_hat(&psi);
        let (lap1, lap2) = vector_laplacian(g, &v1h, &v2h);
        let (f1h, f2h) = pointwise_force(slab, &rho, &psi);
        let mu = slab.config.mu;
        let (r1, r2) = match &dens {
            None => {
                let mut r1 = vec![C64::new(0.0, 0.0); ny * nk];
                let mut r2 = vec![C64::new(0.0, 0.0); (ny + 1) * nk];
                for c in 0..ny {
                    for k in 0..nk {
                        r1[c * nk + k] = a1h[c * nk + k] * slab.rho_c[c];
                    }
                }
                for j in 0..=ny {
                    for k in 0..nk {
                        r2[j * nk + k] = a2h[j * nk + k] * slab.rho_n[j];
                    }
                }
                (r1, r2)
            }
            Some(d) => {
                let a1 = slab.fft.inverse(&a1h);
                let a2 = slab.fft.inverse(&a2h);
                let m1: Vec<f64> = a1.iter().zip(&d.centres).map(|(a, b)| a * b).collect();
                let m2: Vec<f64> = a2.iter().zip(&d.nodes).map(|(a, b)| a * b).collect();
                (slab.fft.forward(&m1), slab.fft.forward(&m2))
            }
        };
        let g1: Vec<C64> = (0..ny * nk).map(|i| f1h[i] + lap1[i] * mu - r1[i]).collect();
        let g2: Vec<C64> = (0..(ny + 1) * nk).map(|i| f2h[i] + lap2[i] * mu - r2[i]).collect();
        let beta = neumann_solve(g, &g1, &g2);
        Ok(slab.fft.inverse(&beta))
    }
}

/// Pointwise `F − N` split into centre and node components (spectral).
fn pointwise_force(slab: &Slab, rho: &[C64], psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
    slab.force_components(rho, psi)
}

/// `Δ_h v` with the slip closure for `v₁` and `v₂ = 0` on the walls.
fn vector_laplacian(g: &SlabGrid, v1: &[C64], v2: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let (ny, nk) = (g.ny, g.nk);
    let zero = C64::new(0.0, 0.0);
    let inv = 1.0 / (g.dy * g.dy);
    let mut l1 = vec![zero; ny * nk];
    let mut l2 = vec![zero; (ny + 1) * nk];
    for c in 0..ny {
        for k in 0..nk {
            let here = v1[c * nk + k];
            let below = if c == 0 { here } else { v1[(c - 1) * nk + k] };
            let above = if c + 1 == ny { here } else { v1[(c + 1) * nk + k] };
            l1[c * nk + k] = (above - here * 2.0 + below) * inv - here * (g.xi[k] * g.xi[k]);
        }
    }
    for j in 1..ny {
        for k in 0..nk {
            let here = v2[j * nk + k];
            l2[j * nk + k] =
                (v2[(j + 1) * nk + k] - here * 2.0 + v2[(j - 1) * nk + k]) * inv - here * (g.xi[k] * g.xi[k]);
        }
    }
    (l1, l2)
}

/// Least-squares `β` with `∇_h β ≈ G` (homogeneous Neumann walls, zero mean).
fn neumann_solve(g: &SlabGrid, g1: &[C64], g2: &[C64]) -> Vec<C64> {
    use crate::banded::SymBanded;
    let (ny, nk, dy) = (g.ny, g.nk, g.dy);
    let zero = C64::new(0.0, 0.0);
    let mut beta = vec![zero; ny * nk];
    // mean mode: integrate the vertical component
    let mut acc = 0.0;
    let mut col = vec![0.0; ny];
    for c in 1..ny {
        acc += g2[c * nk].re * dy;
        col[c] = acc;
    }
    let mean = col.iter().sum::<f64>() / ny as f64;
    for c in 0..ny {
        beta[c * nk] = C64::new(col[c] - mean, 0.0);
    }
    for k in 1..=g.kmax {
        let xi = g.xi[k];
        let mut op = SymBanded::zeros(ny, 1);
        let mut rhs_re = vec![0.0; ny];
        let mut rhs_im = vec![0.0; ny];
        for c in 0..ny {
            op.add(c, c, xi * xi * dy);
            // −div G weak form: ⟨∇β, ∇q⟩ = ⟨G, ∇q⟩
            let z = g1[c * nk + k];
            // ∂₁ of test function gives −iξ; conj pairing
            let w = C64::new(xi * z.im, -xi * z.re);
            rhs_re[c] += w.re * dy;
            rhs_im[c] += w.im * dy;
        }
        for j in 1..ny {
            let s = 1.0 / dy;
            op.add(j, j, s);
            op.add(j - 1, j - 1, s);
            op.add(j, j - 1, -s);
            let z = g2[j * nk + k];
            rhs_re[j] += z.re;
            rhs_re[j - 1] -= z.re;
            rhs_im[j] += z.im;
            rhs_im[j - 1] -= z.im;
        }
        let chol = op.cholesky().expect("Neumann operator is SPD for k >= 1");
        chol.solve_in_place(&mut rhs_re);
        chol.solve_in_place(&mut rhs_im);
        for c in 0..ny {
            beta[c * nk + k] = C64::new(rhs_re[c], rhs_im[c]);
        }
    }
    beta
}

/// Initial data for `rc.init`.
pub fn init_state(
    rc: &RunConfig,
    p: &DensityProfile,
    config: &SlabConfig,
    gr: Option<&GrowthResult>,
) -> Result<FieldState> {
    let sim = Simulation::new(rc, p, config)?;
    sim.initial_state(p, gr)
}

impl Simulation {
    pub fn initial_state(&self, p: &DensityProfile, gr: Option<&GrowthResult>) -> Result<FieldState> {
        let g = self.grid().clone();
        let slab = &self.slab;
        let (nx, ny) = (g.nx, g.ny);
        let mut s = FieldState::zeros(nx, ny);
        if self.rc.linearized {
            s.displacement = Some(vec![0.0; g.node_len()]);
        }
        match &self.rc.init {
            InitKind::Eigenfunction { delta } => {
                let owned;
                let gr = match gr {
                    Some(gr) => gr,
                    None => {
                        owned = compute_growth(p, &slab.config, ny)?;
                        &owned
                    }
                };
                if !(gr.lambda > 0.0) {
                    return Err(NskError::InvalidConfig(
                        "eigenfunction initial data needs a growing mode (Lambda > 0)".into(),
                    ));
                }
                let k = gr.k_star;
                if k == 0 || k > g.kmax {
                    return Err(NskError::InvalidConfig(format!(
                        "fastest mode k = {k} is not resolved (retained k <= {})",
                        g.kmax
                    )));
                }
                let phi: Vec<f64> = g.y_nodes.iter().map(|&y| interp(&gr.nodes, &gr.w2, y)).collect();
                let peak = phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let xi = g.xi[k];
                let mut psi = vec![C64::new(0.0, 0.0); (ny + 1) * g.nk];
                if peak > 0.0 {
                    for j in 1..ny {
                        // ψ = −δφ sin(ξx)/ξ  ⇒  v₂ = δφ cos(ξx)
                        psi[j * g.nk + k] = C64::new(0.0, 0.5 * delta * phi[j] / (peak * xi));
                    }
                }
                let (v1h, v2h) = slab.velocity_hat(&psi);
                let lam = gr.lambda;
                let drift = slab.linear_transport(&v1h, &v2h);
                let rho: Vec<C64> = drift.iter().map(|z| z / lam).collect();
                s.rho_pert = slab.fft.inverse(&rho);
                s.v1 = slab.fft.inverse(&v1h);
                s.v2 = slab.fft.inverse(&v2h);
                if let Some(d) = s.displacement.as_mut() {
                    *d = s.v2.iter().map(|v| v / lam).collect();
                }
            }
            InitKind::RandomSmooth { delta, cutoff } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.rc.seed);
                let mut psi_phys = vec![0.0; g.node_len()];
                let kc = (*cutoff).min(g.kmax);
                for k in 1..=kc {
                    for m in 1..=*cutoff {
                        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        let w = 1.0 / ((k * k + m * m) as f64);
                        for j in 0..=ny {
                            let sy = (m as f64 * PI * g.y_nodes[j] / g.h).sin();
                            for i in 0..nx {
                                let th = g.xi[k] * g.x[i];
                                psi_phys[j * nx + i] += w * sy * (a * th.cos() + b * th.sin());
                            }
                        }
                    }
                }
                for i in 0..nx {
                    psi_phys[i] = 0.0;
                    psi_phys[ny * nx + i] = 0.0;
                }
                let mut psi = slab.fft.forward(&psi_phys);
                slab.truncate(&mut psi);
                let (v1, v2) = slab.velocity(&psi);
                let vmax = v1.iter().chain(&v2).fold(0.0_f64, |m, v| m.max(v.abs()));
                let scale = if vmax > 0.0 { delta / vmax } else { 0.0 };
                s.v1 = v1.iter().map(|v| v * scale).collect();
                s.v2 = v2.iter().map(|v| v * scale).collect();
            }
            InitKind::File { path } => {
                s = read_checkpoint(path, nx, ny)?;
                if self.rc.linearized && s.displacement.is_none() {
                    s.displacement = Some(vec![0.0; g.node_len()]);
                }
            }
        }
        if !self.rc.linearized {
            let (_, min_rho) = self.density_bounds(&s);
            if !(min_rho > 0.0) {
                return Err(NskError::Vacuum { min: min_rho, y: 0.0 });
            }
        }
        Ok(s)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x).min(n - 1).max(1);
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// One step of `s` (builds the discretization on every call; use [`Simulation`]
/// for repeated stepping).
pub fn step(s: &FieldState, rc: &RunConfig, p: &DensityProfile, config: &SlabConfig) -> Result<FieldState> {
    let mut sim = Simulation::new(rc, p, config)?;
    let dt = sim.choose_dt(s);
    sim.step(s, dt)
}
