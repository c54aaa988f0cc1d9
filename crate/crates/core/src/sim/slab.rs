//! Spatial discretization of the perturbation system.
//!
//! The velocity is `v = (D₊ψ, −∂₁ψ)` for a streamfunction `ψ` at the nodes with
//! `ψ = 0` on the bottom wall. For `k ≥ 1` also `ψ = 0` on the top wall; for the
//! horizontal mean the top value is free (net horizontal flux). The discrete
//! divergence of such a field vanishes identically and `v₂ = 0` on the walls; the
//! slip condition `∂₂v₁ = 0` is the natural boundary condition of the viscous form.
//!
//! Momentum is solved in weak form on the streamfunction space:
//! `Sᵀ W_ρ S ψₜ = Sᵀ W (F − N) − A ψ`, with `S` the map `ψ ↦ v`, `W_ρ` the
//! density-weighted quadrature, and `A` the viscous form `μ‖∇v‖²`.

use realfft::num_complex::Complex64;

use crate::banded::{BandCholesky, SymBanded};
use crate::diagnostics::Closure;
use crate::error::{NskError, Result};
use crate::par;
use crate::profile::{DensityProfile, SlabConfig};

use super::grid::{RowFft, SlabGrid, C64};

const ZERO: C64 = Complex64 { re: 0.0, im: 0.0 };

#[inline]
fn ixi(xi: f64, z: C64) -> C64 {
    C64::new(-xi * z.im, xi * z.re)
}

/// Full density `ρ̄ + ϱ` at centres and nodes.
#[derive(Clone, Debug)]
pub struct Density {
    pub centres: Vec<f64>,
    pub nodes: Vec<f64>,
}

/// Right-hand sides of one explicit evaluation.
#[derive(Clone, Debug)]
pub struct Tendency {
    /// `ϱₜ` (spectral, centres).
    pub rho_t: Vec<C64>,
    /// `Sᵀ W (F − N)` (spectral, streamfunction rows).
    pub force: Vec<C64>,
}

#[derive(Clone)]
pub struct Slab {
    pub grid: SlabGrid,
    pub fft: RowFft,
    pub config: SlabConfig,
    pub linearized: bool,
    pub rho_c: Vec<f64>,
    pub rho_n: Vec<f64>,
    pub d1_c: Vec<f64>,
    pub d1_n: Vec<f64>,
    /// `ρ̄″` at centres.
    pub d2_c: Vec<f64>,
    /// Centre-to-node difference of `ρ̄″`, zero on the walls.
    pub dd2_n: Vec<f64>,
    /// `Sᵀ W_ρ̄ S` per retained mode.
    pub mass: Vec<SymBanded>,
    /// Viscous form per retained mode.
    pub visc: Vec<SymBanded>,
    /// Wall closure of `ϱ` in the capillary Laplacian.
    pub rho_closure: Closure,
    mass_chol: Vec<BandCholesky>,
}

impl Slab {
    pub fn new(grid: SlabGrid, config: SlabConfig, p: &DensityProfile, linearized: bool) -> Result<Self> {
        config.validate()?;
        if (p.h() - config.h).abs() > 1e-12 * config.h {
            return Err(NskError::InvalidConfig("profile height differs from slab height".into()));
        }
        let ny = grid.ny;
        let ev_c: Vec<[f64; 4]> = grid.y_centres.iter().map(|&y| p.eval(y)).collect();
        let ev_n: Vec<[f64; 4]> = grid.y_nodes.iter().map(|&y| p.eval(y)).collect();
        let rho_c: Vec<f64> = ev_c.iter().map(|e| e[0]).collect();
        let rho_n: Vec<f64> = ev_n.iter().map(|e| e[0]).collect();
        if let Some((i, &m)) = rho_c.iter().chain(&rho_n).enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()) {
            if !(m > 0.0) {
                let y = if i < ny { grid.y_centres[i] } else { grid.y_nodes[i - ny] };
                return Err(NskError::Vacuum { min: m, y });
            }
        }
        let d2_c: Vec<f64> = ev_c.iter().map(|e| e[2]).collect();
        let mut dd2_n = vec![0.0; ny + 1];
        for j in 1..ny {
            dd2_n[j] = (d2_c[j] - d2_c[j - 1]) / grid.dy;
        }
        let forms: Vec<(SymBanded, SymBanded)> =
            (0..=grid.kmax).map(|k| psi_forms(ny, grid.dy, k == 0, &rho_c, &rho_n, grid.xi[k], config.mu)).collect();
        let mass_chol = forms
            .iter()
            .map(|(m, _)| m.cholesky().ok_or_else(|| NskError::InvalidConfig("mass form not SPD".into())))
            .collect::<Result<Vec<_>>>()?;
        let (mass, visc) = forms.into_iter().unzip();
        Ok(Slab {
            fft: RowFft::new(grid.nx),
            grid,
            config,
            linearized,
            rho_c,
            rho_n,
            d1_c: ev_c.iter().map(|e| e[1]).collect(),
            d1_n: ev_n.iter().map(|e| e[1]).collect(),
            d2_c,
            dd2_n,
            mass,
            visc,
            rho_closure: Closure::Odd,
            mass_chol,
        })
    }

    /// Last streamfunction row that is an unknown for mode `k`.
    #[inline]
    pub fn last_row(&self, k: usize) -> usize {
        if k == 0 {
            self.grid.ny
        } else {
            self.grid.ny - 1
        }
    }

    fn gather(&self, a: &[C64], k: usize) -> (Vec<f64>, Vec<f64>) {
        let nk = self.grid.nk;
        let rows = 1..=self.last_row(k);
        (rows.clone().map(|j| a[j * nk + k].re).collect(), rows.map(|j| a[j * nk + k].im).collect())
    }

    /// Assemble a streamfunction array from per-mode (re, im) unknown vectors.
    fn scatter(&self, modes: Vec<(Vec<f64>, Vec<f64>)>) -> Vec<C64> {
        let nk = self.grid.nk;
        let mut out = vec![ZERO; (self.grid.ny + 1) * nk];
        for (k, (re, im)) in modes.into_iter().enumerate() {
            for (r, (a, b)) in re.into_iter().zip(im).enumerate() {
                out[(r + 1) * nk + k] = C64::new(a, b);
            }
        }
        out
    }

    /// Zero the wavenumbers above the retained band.
    pub fn truncate(&self, a: &mut [C64]) {
        let nk = self.grid.nk;
        for row in a.chunks_mut(nk) {
            row[self.grid.kmax + 1..].iter_mut().for_each(|z| *z = ZERO);
        }
    }

    /// Parseval-weighted real inner product of two spectral arrays.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> f64 {
        let nk = self.grid.nk;
        let mut s = 0.0;
        for (ra, rb) in a.chunks(nk).zip(b.chunks(nk)) {
            for k in 0..=self.grid.kmax {
                s += self.grid.mode_weight(k) * (ra[k].re * rb[k].re + ra[k].im * rb[k].im);
            }
        }
        s
    }

    /// `(v̂₁ at centres, v̂₂ at nodes)` from `ψ̂`.
    pub fn velocity_hat(&self, psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let g = &self.grid;
        let nk = g.nk;
        let mut v1 = vec![ZERO; g.ny * nk];
        let mut v2 = vec![ZERO; (g.ny + 1) * nk];
        let inv = 1.0 / g.dy;
        for c in 0..g.ny {
            for k in 0..=g.kmax {
                v1[c * nk + k] = (psi[(c + 1) * nk + k] - psi[c * nk + k]) * inv;
            }
        }
        for j in 1..g.ny {
            for k in 1..=g.kmax {
                v2[j * nk + k] = -ixi(g.xi[k], psi[j * nk + k]);
            }
        }
        (v1, v2)
    }

    pub fn velocity(&self, psi: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.velocity_hat(psi);
        (self.fft.inverse(&a), self.fft.inverse(&b))
    }

    /// `ψ̂` from a discretely solenoidal velocity: `ψ̂ = iv̂₂/ξ` for `k ≥ 1` and the
    /// running integral of the mean of `v₁` for `k = 0`.
    pub fn psi_from_velocity(&self, v1: &[f64], v2: &[f64]) -> Vec<C64> {
        let g = &self.grid;
        let nk = g.nk;
        let v1h = self.fft.forward(v1);
        let v2h = self.fft.forward(v2);
        let mut psi = vec![ZERO; (g.ny + 1) * nk];
        for j in 1..g.ny {
            for k in 1..=g.kmax {
                let z = v2h[j * nk + k];
                psi[j * nk + k] = C64::new(-z.im, z.re) / g.xi[k];
            }
        }
        let mut acc = 0.0;
        for j in 1..=g.ny {
            acc += v1h[(j - 1) * nk].re * g.dy;
            psi[j * nk] = C64::new(acc, 0.0);
        }
        psi
    }

    /// Least-squares solenoidal projection `ψ = argmin ‖Sψ − v‖`.
    pub fn project_velocity(&self, v1: &[f64], v2: &[f64]) -> Result<Vec<C64>> {
        let ones = Density { centres: vec![1.0; v1.len()], nodes: vec![1.0; v2.len()] };
        let f1 = self.fft.forward(v1);
        let f2 = self.fft.forward(v2);
        let rhs = self.st_w(&f1, &f2);
        let (psi, _) = self.solve(&rhs, 0.0, Some(&ones), 1e-14)?;
        Ok(psi)
    }

    /// `Sᵀ W f` for `f̂₁` at centres and `f̂₂` at nodes.
    pub fn st_w(&self, f1: &[C64], f2: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let nk = g.nk;
        let mut out = vec![ZERO; (g.ny + 1) * nk];
        for k in 0..=g.kmax {
            for j in 1..=self.last_row(k) {
                let below = f1[(j - 1) * nk + k];
                let above = if j < g.ny { f1[j * nk + k] } else { ZERO };
                let mut v = below - above;
                if j < g.ny {
                    v += ixi(g.xi[k], f2[j * nk + k]) * g.dy;
                }
                out[j * nk + k] = v;
            }
        }
        out
    }

    pub fn apply_visc(&self, psi: &[C64]) -> Vec<C64> {
        let modes = par::map_range(self.grid.kmax + 1, |k| {
            let (re, im) = self.gather(psi, k);
            (self.visc[k].matvec(&re), self.visc[k].matvec(&im))
        });
        self.scatter(modes)
    }

    /// `Sᵀ W_ρ S ψ̂` for a general density (physical space products).
    pub fn apply_mass(&self, psi: &[C64], rho: &Density) -> Vec<C64> {
        let (v1, v2) = self.velocity(psi);
        let m1: Vec<f64> = v1.iter().zip(&rho.centres).map(|(v, r)| v * r).collect();
        let m2: Vec<f64> = v2.iter().zip(&rho.nodes).map(|(v, r)| v * r).collect();
        self.st_w(&self.fft.forward(&m1), &self.fft.forward(&m2))
    }

    fn apply_mass_bar(&self, psi: &[C64]) -> Vec<C64> {
        let modes = par::map_range(self.grid.kmax + 1, |k| {
            let (re, im) = self.gather(psi, k);
            (self.mass[k].matvec(&re), self.mass[k].matvec(&im))
        });
        self.scatter(modes)
    }

    fn factors(&self, c: f64) -> Result<Vec<BandCholesky>> {
        if c == 0.0 {
            return Ok(self.mass_chol.clone());
        }
        par::map_range(self.grid.kmax + 1, |k| {
            SymBanded::combine(&[(1.0, &self.mass[k]), (c, &self.visc[k])])
                .cholesky()
                .ok_or_else(|| NskError::InvalidConfig("implicit operator not SPD".into()))
        })
        .into_iter()
        .collect()
    }

    fn solve_factored(&self, f: &[BandCholesky], rhs: &[C64]) -> Vec<C64> {
        let modes = par::map_range(self.grid.kmax + 1, |k| {
            let (mut re, mut im) = self.gather(rhs, k);
            f[k].solve_in_place(&mut re);
            f[k].solve_in_place(&mut im);
            (re, im)
        });
        self.scatter(modes)
    }

    /// Solve `(Sᵀ W_ρ S + cA) x = b`. With `rho = None` the equilibrium density is
    /// used and the per-mode systems are solved directly; otherwise by conjugate
    /// gradients preconditioned with the equilibrium-density operator. Returns the
    /// iteration count alongside the solution.
    pub fn solve(&self, b: &[C64], c: f64, rho: Option<&Density>, tol: f64) -> Result<(Vec<C64>, usize)> {
        let f = self.factors(c)?;
        let Some(rho) = rho else {
            return Ok((self.solve_factored(&f, b), 0));
        };
        let op = |x: &[C64]| -> Vec<C64> {
            let mut y = self.apply_mass(x, rho);
            if c != 0.0 {
                let ax = self.apply_visc(x);
                y.iter_mut().zip(&ax).for_each(|(a, b)| *a += b * c);
            }
            y
        };
        let bnorm = self.inner(b, b).sqrt();
        let mut x = self.solve_factored(&f, b);
        if bnorm == 0.0 {
            return Ok((x, 0));
        }
        let ax = op(&x);
        let mut r: Vec<C64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let mut z = self.solve_factored(&f, &r);
        let mut p = z.clone();
        let mut rz = self.inner(&r, &z);
        let mut iters = 0;
        let mut rnorm = self.inner(&r, &r).sqrt();
        while rnorm > tol * bnorm && iters < 300 {
            let ap = op(&p);
            let pap = self.inner(&p, &ap);
            if !(pap > 0.0) {
                return Err(NskError::NoConvergence("mass operator lost definiteness".into()));
            }
            let alpha = rz / pap;
            x.iter_mut().zip(&p).for_each(|(a, b)| *a += b * alpha);
            r.iter_mut().zip(&ap).for_each(|(a, b)| *a -= b * alpha);
            z = self.solve_factored(&f, &r);
            let rz_new = self.inner(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(a, b)| *a = b + *a * beta);
            iters += 1;
            rnorm = self.inner(&r, &r).sqrt();
        }
        if !(rnorm <= 1e-8 * bnorm) {
            return Err(NskError::NoConvergence(format!("mass solve residual {:.3e}", rnorm / bnorm)));
        }
        Ok((x, iters))
    }

    /// `Sᵀ W_ρ S x`, using the per-mode form when `rho` is `None`.
    pub fn mass_times(&self, x: &[C64], rho: Option<&Density>) -> Vec<C64> {
        match rho {
            Some(r) => self.apply_mass(x, r),
            None => self.apply_mass_bar(x),
        }
    }

    /// Laplacian of a centre field with the ghosts of `rho_closure` across the walls.
    pub fn laplacian_d(&self, a: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let nk = g.nk;
        let sign = if self.rho_closure == Closure::Odd { -1.0 } else { 1.0 };
        let inv = 1.0 / (g.dy * g.dy);
        let mut out = vec![ZERO; g.ny * nk];
        for c in 0..g.ny {
            for k in 0..=g.kmax {
                let here = a[c * nk + k];
                let below = if c == 0 { here * sign } else { a[(c - 1) * nk + k] };
                let above = if c + 1 == g.ny { here * sign } else { a[(c + 1) * nk + k] };
                out[c * nk + k] = (above - here * 2.0 + below) * inv - here * (g.xi[k] * g.xi[k]);
            }
        }
        out
    }

    pub fn full_density(&self, rho_pert: &[f64]) -> Density {
        let g = &self.grid;
        let nx = g.nx;
        let mut centres = vec![0.0; g.ny * nx];
        for c in 0..g.ny {
            for i in 0..nx {
                centres[c * nx + i] = self.rho_c[c] + rho_pert[c * nx + i];
            }
        }
        let mut nodes = vec![0.0; (g.ny + 1) * nx];
        for j in 0..=g.ny {
            for i in 0..nx {
                let pert =
                    if j == 0 || j == g.ny { 0.0 } else { 0.5 * (rho_pert[(j - 1) * nx + i] + rho_pert[j * nx + i]) };
                nodes[j * nx + i] = self.rho_n[j] + pert;
            }
        }
        Density { centres, nodes }
    }

    pub fn tendency(&self, rho_hat: &[C64], psi: &[C64]) -> Tendency {
        if self.linearized {
            self.tendency_linear(rho_hat, psi)
        } else {
            self.tendency_full(rho_hat, psi).0
        }
    }

    /// Linear transport `−div(ρ̄ v)` (spectral).
    pub fn linear_transport(&self, v1: &[C64], v2: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let nk = g.nk;
        let mut rho_t = vec![ZERO; g.ny * nk];
        for c in 0..g.ny {
            for k in 0..=g.kmax {
                let flux_y = (v2[(c + 1) * nk + k] * self.rho_n[c + 1] - v2[c * nk + k] * self.rho_n[c]) / g.dy;
                rho_t[c * nk + k] = -(ixi(g.xi[k], v1[c * nk + k]) * self.rho_c[c] + flux_y);
            }
        }
        rho_t
    }

    /// Linearized capillary and gravity forces at centres and nodes (spectral).
    fn linear_force(&self, rho_hat: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let g = &self.grid;
        let nk = g.nk;
        let (kappa, grav) = (self.config.kappa, self.config.g);
        let q = self.laplacian_d(rho_hat);
        let mut f1 = vec![ZERO; g.ny * nk];
        let mut f2 = vec![ZERO; (g.ny + 1) * nk];
        for c in 0..g.ny {
            for k in 0..=g.kmax {
                f1[c * nk + k] = ixi(g.xi[k], q[c * nk + k]) * (kappa * self.rho_c[c]);
            }
        }
        for j in 1..g.ny {
            for k in 0..=g.kmax {
                let rn = (rho_hat[(j - 1) * nk + k] + rho_hat[j * nk + k]) * 0.5;
                let dq = (q[j * nk + k] - q[(j - 1) * nk + k]) / g.dy;
                f2[j * nk + k] = (dq * self.rho_n[j] + rn * self.dd2_n[j]) * kappa - rn * grav;
            }
        }
        (f1, f2)
    }

    fn tendency_linear(&self, rho_hat: &[C64], psi: &[C64]) -> Tendency {
        let (v1, v2) = self.velocity_hat(psi);
        let (f1, f2) = self.linear_force(rho_hat);
        Tendency { rho_t: self.linear_transport(&v1, &v2), force: self.st_w(&f1, &f2) }
    }

    /// Pointwise `F − N` at centres and nodes (spectral); `N = 0` when linearized.
    pub fn force_components(&self, rho_hat: &[C64], psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        if self.linearized {
            self.linear_force(rho_hat)
        } else {
            let (_, g1, g2, _) = self.full_parts(rho_hat, psi);
            (g1, g2)
        }
    }

    /// Full nonlinear right-hand side; also returns the physical density.
    pub fn tendency_full(&self, rho_hat: &[C64], psi: &[C64]) -> (Tendency, Density) {
        let (rho_t, g1, g2, dens) = self.full_parts(rho_hat, psi);
        let mut force = self.st_w(&g1, &g2);
        self.truncate(&mut force);
        (Tendency { rho_t, force }, dens)
    }

    fn full_parts(&self, rho_hat: &[C64], psi: &[C64]) -> (Vec<C64>, Vec<C64>, Vec<C64>, Density) {
        let g = &self.grid;
        let (nx, ny, nk) = (g.nx, g.ny, g.nk);
        let dy = g.dy;
        let (kappa, grav) = (self.config.kappa, self.config.g);
        let fft = &self.fft;
        let deriv = |a: &[C64]| -> Vec<f64> {
            let d: Vec<C64> =
                a.chunks(nk).flat_map(|row| row.iter().enumerate().map(|(k, z)| ixi(g.xi[k], *z))).collect();
            fft.inverse(&d)
        };

        let rho = fft.inverse(rho_hat);
        let q_hat = self.laplacian_d(rho_hat);
        let q = fft.inverse(&q_hat);
        let dq = deriv(&q_hat);
        let (v1h, v2h) = self.velocity_hat(psi);
        let v1 = fft.inverse(&v1h);
        let v2 = fft.inverse(&v2h);
        let dv1 = deriv(&v1h);
        let dv2 = deriv(&v2h);
        let dens = self.full_density(&rho);
        let (rc, rn) = (&dens.centres, &dens.nodes);

        let m1: Vec<f64> = rc.iter().zip(&v1).map(|(a, b)| a * b).collect();
        let m2: Vec<f64> = rn.iter().zip(&v2).map(|(a, b)| a * b).collect();
        let dm1 = deriv(&fft.forward(&m1));
        let mut div = vec![0.0; ny * nx];
        for c in 0..ny {
            for i in 0..nx {
                div[c * nx + i] = dm1[c * nx + i] + (m2[(c + 1) * nx + i] - m2[c * nx + i]) / dy;
            }
        }

        // node-centred fluxes of v₁ and centre-centred fluxes of v₂
        let mut gv1 = vec![0.0; (ny + 1) * nx];
        let mut hv1 = vec![0.0; (ny + 1) * nx];
        let mut m1n = vec![0.0; (ny + 1) * nx];
        for j in 1..ny {
            for i in 0..nx {
                let (lo, hi) = ((j - 1) * nx + i, j * nx + i);
                gv1[hi] = m2[hi] * 0.5 * (v1[lo] + v1[hi]);
                hv1[hi] = m2[hi] * (v1[hi] - v1[lo]) / dy;
                m1n[hi] = 0.5 * (m1[lo] + m1[hi]);
            }
        }
        let mut kv2 = vec![0.0; ny * nx];
        let mut lv2 = vec![0.0; ny * nx];
        for c in 0..ny {
            for i in 0..nx {
                let (lo, hi) = (c * nx + i, (c + 1) * nx + i);
                let m2c = 0.5 * (m2[lo] + m2[hi]);
                kv2[lo] = m2c * 0.5 * (v2[lo] + v2[hi]);
                lv2[lo] = m2c * (v2[hi] - v2[lo]) / dy;
            }
        }

        let mut g1 = vec![0.0; ny * nx];
        for c in 0..ny {
            for i in 0..nx {
                let here = c * nx + i;
                let (lo, hi) = (c * nx + i, (c + 1) * nx + i);
                let adv = 0.5 * m1[here] * dv1[here] - 0.5 * v1[here] * div[here]
                    + 0.5 * ((gv1[hi] - gv1[lo]) / dy + 0.5 * (hv1[lo] + hv1[hi]));
                g1[here] = kappa * rc[here] * dq[here] - adv;
            }
        }
        let mut g2 = vec![0.0; (ny + 1) * nx];
        let mut m1nv2 = vec![0.0; (ny + 1) * nx];
        for j in 1..ny {
            for i in 0..nx {
                let here = j * nx + i;
                let (lo, hi) = ((j - 1) * nx + i, j * nx + i);
                let div_n = 0.5 * (div[lo] + div[hi]);
                let adv = 0.5 * m1n[here] * dv2[here] - 0.5 * v2[here] * div_n
                    + 0.5 * ((kv2[hi] - kv2[lo]) / dy + 0.5 * (lv2[lo] + lv2[hi]));
                let rho_node = 0.5 * (rho[lo] + rho[hi]);
                let cap = kappa * (rn[here] * (q[hi] - q[lo]) / dy + rho_node * self.dd2_n[j]);
                g2[here] = cap - grav * rho_node - adv;
                m1nv2[here] = m1n[here] * v2[here];
            }
        }
        let m1v1: Vec<f64> = m1.iter().zip(&v1).map(|(a, b)| a * b).collect();
        let s1 = fft.forward(&m1v1);
        let s2 = fft.forward(&m1nv2);
        let mut g1h = fft.forward(&g1);
        let mut g2h = fft.forward(&g2);
        for (row_g, row_s) in g1h.chunks_mut(nk).zip(s1.chunks(nk)) {
            for k in 0..nk {
                row_g[k] -= ixi(g.xi[k], row_s[k]) * 0.5;
            }
        }
        for (row_g, row_s) in g2h.chunks_mut(nk).zip(s2.chunks(nk)) {
            for k in 0..nk {
                row_g[k] -= ixi(g.xi[k], row_s[k]) * 0.5;
            }
        }
        let neg_div: Vec<f64> = div.iter().map(|d| -d).collect();
        let mut rho_t = fft.forward(&neg_div);
        self.truncate(&mut rho_t);
        (rho_t, g1h, g2h, dens)
    }

    /// `μ‖∇v‖²` over the cell from the streamfunction.
    pub fn dissipation(&self, psi: &[C64]) -> f64 {
        let av = self.apply_visc(psi);
        self.inner(psi, &av) * self.grid.lx
    }
}

/// Mass and viscous forms on streamfunction unknowns `ψ_1 … ψ_last` for one mode.
fn psi_forms(
    ny: usize,
    dy: f64,
    free_top: bool,
    rho_c: &[f64],
    rho_n: &[f64],
    xi: f64,
    mu: f64,
) -> (SymBanded, SymBanded) {
    let last = if free_top { ny } else { ny - 1 };
    let m = last;
    let unknown = |node: usize| -> Option<usize> {
        if node >= 1 && node <= last {
            Some(node - 1)
        } else {
            None
        }
    };
    let mut mass = SymBanded::zeros(m, 1);
    let mut visc = SymBanded::zeros(m, 2);
    let xi2 = xi * xi;
    // centre terms: ρ_c (D₊ψ)² and 2ξ²(D₊ψ)²
    for c in 0..ny {
        let stencil = [(c, -1.0 / dy), (c + 1, 1.0 / dy)];
        for &(p, cp) in &stencil {
            for &(q, cq) in &stencil {
                if let (Some(a), Some(b)) = (unknown(p), unknown(q)) {
                    if a >= b {
                        mass.add(a, b, rho_c[c] * dy * cp * cq);
                        visc.add(a, b, mu * 2.0 * xi2 * dy * cp * cq);
                    }
                }
            }
        }
    }
    // interior node terms: ξ²ρ_n ψ², ξ⁴ψ², (D₋D₊ψ)²
    for j in 1..ny {
        let a = j - 1;
        mass.add(a, a, xi2 * rho_n[j] * dy);
        visc.add(a, a, mu * xi2 * xi2 * dy);
        let s = 1.0 / (dy * dy);
        let stencil = [(j - 1, s), (j, -2.0 * s), (j + 1, s)];
        for &(p, cp) in &stencil {
            for &(q, cq) in &stencil {
                if let (Some(a), Some(b)) = (unknown(p), unknown(q)) {
                    if a >= b {
                        visc.add(a, b, mu * dy * cp * cq);
                    }
                }
            }
        }
    }
    (mass, visc)
}
