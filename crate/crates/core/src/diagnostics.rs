//! Energy functionals, discrete Sobolev norms, decay functionals and fits.
//!
//! Horizontal derivatives are spectral and vertical derivatives are the staggered
//! differences of the solver, so the discrete energy identities close exactly.
//! Centre fields are extended across the walls evenly (`v₁`) or oddly (`ϱ`); node
//! fields (`v₂`) vanish on the walls.

use serde::Serialize;

use crate::banded::top_eigenpair;
use crate::error::{NskError, Result};
use crate::fd;
use crate::profile::{DensityProfile, SlabConfig};
use crate::sim::grid::{RowFft, SlabGrid, C64};
use crate::sim::slab::Slab;
use crate::sim::state::FieldState;

/// Ghost reflection of a centre field across the walls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    Even,
    #[default]
    Odd,
}

/// Squared `L²`, gradient and Hessian norms of one field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormParts {
    pub l2: f64,
    pub grad: f64,
    pub hess: f64,
}

impl NormParts {
    fn add(self, o: NormParts) -> NormParts {
        NormParts { l2: self.l2 + o.l2, grad: self.grad + o.grad, hess: self.hess + o.hess }
    }
    pub fn h1_sq(&self) -> f64 {
        self.l2 + self.grad
    }
    pub fn h2_sq(&self) -> f64 {
        self.l2 + self.grad + self.hess
    }
}

/// Norms of a centre field given by its row spectra.
pub fn centre_norms(g: &SlabGrid, a: &[C64], closure: Closure) -> NormParts {
    let (ny, nk, dy) = (g.ny, g.nk, g.dy);
    let mut out = NormParts::default();
    for k in 0..nk {
        let w = g.mode_weight(k) * g.lx;
        let xi2 = g.xi[k] * g.xi[k];
        let at = |c: isize| -> C64 {
            if c < 0 {
                ghost(a[k], closure)
            } else if c as usize >= ny {
                ghost(a[(ny - 1) * nk + k], closure)
            } else {
                a[c as usize * nk + k]
            }
        };
        let mut dnode = Vec::with_capacity(ny + 1);
        for j in 0..=ny {
            let d = (at(j as isize) - at(j as isize - 1)) / dy;
            let wy = if j == 0 || j == ny { 0.5 * dy } else { dy };
            dnode.push((d, wy));
        }
        for c in 0..ny {
            let v = a[c * nk + k].norm_sqr();
            out.l2 += w * v * dy;
            out.grad += w * xi2 * v * dy;
            out.hess += w * xi2 * xi2 * v * dy;
            let dyy = (dnode[c + 1].0 - dnode[c].0) / dy;
            out.hess += w * dyy.norm_sqr() * dy;
        }
        for (d, wy) in &dnode {
            out.grad += w * d.norm_sqr() * wy;
            out.hess += 2.0 * w * xi2 * d.norm_sqr() * wy;
        }
    }
    out
}

fn ghost(z: C64, closure: Closure) -> C64 {
    match closure {
        Closure::Even => z,
        Closure::Odd => -z,
    }
}

/// Norms of a node field vanishing on the walls.
pub fn node_norms(g: &SlabGrid, b: &[C64]) -> NormParts {
    let (ny, nk, dy) = (g.ny, g.nk, g.dy);
    let mut out = NormParts::default();
    for k in 0..nk {
        let w = g.mode_weight(k) * g.lx;
        let xi2 = g.xi[k] * g.xi[k];
        let at = |j: usize| if j == 0 || j == ny { C64::new(0.0, 0.0) } else { b[j * nk + k] };
        for j in 1..ny {
            let v = at(j).norm_sqr();
            out.l2 += w * v * dy;
            out.grad += w * xi2 * v * dy;
            out.hess += w * xi2 * xi2 * v * dy;
            let dyy = (at(j + 1) - at(j) * 2.0 + at(j - 1)) / (dy * dy);
            out.hess += w * dyy.norm_sqr() * dy;
        }
        for c in 0..ny {
            let d = ((at(c + 1) - at(c)) / dy).norm_sqr();
            out.grad += w * d * dy;
            out.hess += 2.0 * w * xi2 * d * dy;
        }
    }
    out
}

/// `E(w) = g∫ρ̄′w₂² − κ‖ρ̄′∇w₂‖₀²` for `w₂` on the solver nodes (`(ny+1)·nx`,
/// `y` outer), with the quadrature of the threshold forms.
pub fn potential_energy(w2: &[f64], nx: usize, ny: usize, p: &DensityProfile, config: &SlabConfig) -> Result<f64> {
    let g = SlabGrid::new(nx, ny, config.l, config.h, false)?;
    if w2.len() != g.node_len() {
        return Err(NskError::InvalidConfig(format!("expected {} node values, got {}", g.node_len(), w2.len())));
    }
    let fft = RowFft::new(nx);
    let spec = fft.forward(w2);
    let d1_n: Vec<f64> = g.y_nodes.iter().map(|&y| p.eval(y)[1]).collect();
    let d1_c: Vec<f64> = g.y_centres.iter().map(|&y| p.eval(y)[1]).collect();
    Ok(potential_energy_spec(&g, &spec, &d1_n, &d1_c, config))
}

fn potential_energy_spec(g: &SlabGrid, w: &[C64], d1_n: &[f64], d1_c: &[f64], config: &SlabConfig) -> f64 {
    let (ny, nk, dy) = (g.ny, g.nk, g.dy);
    let mut grav = 0.0;
    let mut cap = 0.0;
    for k in 0..nk {
        let wk = g.mode_weight(k) * g.lx;
        let xi2 = g.xi[k] * g.xi[k];
        let at = |j: usize| if j == 0 || j == ny { C64::new(0.0, 0.0) } else { w[j * nk + k] };
        for j in 1..ny {
            let v = at(j).norm_sqr();
            grav += wk * d1_n[j] * v * dy;
            cap += wk * d1_n[j] * d1_n[j] * xi2 * v * dy;
        }
        for c in 0..ny {
            cap += wk * d1_c[c] * d1_c[c] * ((at(c + 1) - at(c)) / dy).norm_sqr() * dy;
        }
    }
    config.g * grav - config.kappa * cap
}

/// One row of the time series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub l2_v: f64,
    pub l2_rho: f64,
    pub h1_v: f64,
    pub h2_v: f64,
    pub h1_rho: f64,
    pub h2_rho: f64,
    /// `E(v₂)`.
    pub epot: f64,
    /// `½∫ρ|v|²` (with `ρ̄` in linearized runs).
    pub kinetic: f64,
    /// `g∫ϱ y₂`.
    pub gravity_pe: f64,
    /// `½κ‖∇ϱ‖² − κ∫ρ̄″ϱ`, the perturbation part of `½κ‖∇ρ‖²`.
    pub capillary_pe: f64,
    /// `−½E(ς)` for the tracked displacement (linearized runs, else 0).
    pub displacement_pe: f64,
    /// Conserved-up-to-dissipation energy of the run's model.
    pub total: f64,
    pub viscous_diss: f64,
    pub l1_v: f64,
    pub linf_v: f64,
    pub linf_v2: f64,
    pub max_div: f64,
    /// `∫ϱ`.
    pub mass: f64,
    /// `⟨t⟩³‖v‖₀²`.
    pub weighted_l2_v: f64,
    /// `⟨t⟩²‖v‖₁²`.
    pub weighted_h1_v: f64,
    /// `⟨t⟩‖v‖₂²`.
    pub weighted_h2_v: f64,
    /// `⟨t⟩²‖v‖₂² + ⟨t⟩³‖ϱ/ρ̄′‖₀²`, an Eulerian stand-in for the decay energy.
    pub eulerian_proxy_e: f64,
    /// `⟨t⟩²(‖ϱ/ρ̄′‖₀² + ‖v‖₁²)`, an Eulerian stand-in for the decay dissipation.
    pub eulerian_proxy_d: f64,
}

pub const SERIES_FIELDS: [&str; 24] = [
    "t",
    "l2_v",
    "l2_rho",
    "h1_v",
    "h2_v",
    "h1_rho",
    "h2_rho",
    "epot",
    "kinetic",
    "gravity_pe",
    "capillary_pe",
    "displacement_pe",
    "total",
    "viscous_diss",
    "l1_v",
    "linf_v",
    "linf_v2",
    "max_div",
    "mass",
    "weighted_l2_v",
    "weighted_h1_v",
    "weighted_h2_v",
    "eulerian_proxy_e",
    "eulerian_proxy_d",
];

impl EnergyRecord {
    /// Values in [`SERIES_FIELDS`] order.
    pub fn values(&self) -> [f64; 24] {
        [
            self.t,
            self.l2_v,
            self.l2_rho,
            self.h1_v,
            self.h2_v,
            self.h1_rho,
            self.h2_rho,
            self.epot,
            self.kinetic,
            self.gravity_pe,
            self.capillary_pe,
            self.displacement_pe,
            self.total,
            self.viscous_diss,
            self.l1_v,
            self.linf_v,
            self.linf_v2,
            self.max_div,
            self.mass,
            self.weighted_l2_v,
            self.weighted_h1_v,
            self.weighted_h2_v,
            self.eulerian_proxy_e,
            self.eulerian_proxy_d,
        ]
    }
}

/// Diagnostics of `s` on the discretization `slab`.
pub fn record_with(slab: &Slab, s: &FieldState) -> EnergyRecord {
    let g = &slab.grid;
    let cfg = &slab.config;
    let (nx, ny, nk) = (g.nx, g.ny, g.nk);
    let area = g.cell_area();
    let fft = &slab.fft;
    let rho_hat = fft.forward(&s.rho_pert);
    let v1_hat = fft.forward(&s.v1);
    let v2_hat = fft.forward(&s.v2);

    let nv = centre_norms(g, &v1_hat, Closure::Even).add(node_norms(g, &v2_hat));
    let nr = centre_norms(g, &rho_hat, slab.rho_closure);

    let weight = 1.0 + s.t;
    let dens = slab.full_density(&s.rho_pert);
    let (rc, rn): (&[f64], &[f64]) =
        if slab.linearized || s.displacement.is_some() { (&[], &[]) } else { (&dens.centres, &dens.nodes) };
    let mut kinetic = 0.0;
    for c in 0..ny {
        for i in 0..nx {
            let r = if rc.is_empty() { slab.rho_c[c] } else { rc[c * nx + i] };
            kinetic += r * s.v1[c * nx + i].powi(2);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let r = if rn.is_empty() { slab.rho_n[j] } else { rn[j * nx + i] };
            kinetic += r * s.v2[j * nx + i].powi(2);
        }
    }
    kinetic *= 0.5 * area;

    let mut gravity_pe = 0.0;
    let mut curv = 0.0;
    let mut mass = 0.0;
    let mut proxy = 0.0;
    let mut proxy_ok = true;
    for c in 0..ny {
        let row = &s.rho_pert[c * nx..(c + 1) * nx];
        let sum: f64 = row.iter().sum();
        gravity_pe += sum * g.y_centres[c];
        curv += sum * slab.d2_c[c];
        mass += sum;
        let d1 = slab.d1_c[c];
        if d1 == 0.0 {
            proxy_ok = false;
        } else {
            proxy += row.iter().map(|r| (r / d1).powi(2)).sum::<f64>();
        }
    }
    gravity_pe *= cfg.g * area;
    mass *= area;
    let capillary_pe = 0.5 * cfg.kappa * nr.grad - cfg.kappa * curv * area;
    let proxy_rho = if proxy_ok { proxy * area } else { f64::NAN };

    let d1_n: Vec<f64> = slab.d1_n.clone();
    let epot = potential_energy_spec(g, &v2_hat, &d1_n, &slab.d1_c, cfg);
    let displacement_pe = match &s.displacement {
        Some(d) => -0.5 * potential_energy_spec(g, &fft.forward(d), &d1_n, &slab.d1_c, cfg),
        None => 0.0,
    };
    let total = if s.displacement.is_some() { kinetic + displacement_pe } else { kinetic + gravity_pe + capillary_pe };

    // discrete divergence at centres
    let mut div = vec![C64::new(0.0, 0.0); ny * nk];
    for c in 0..ny {
        for k in 0..nk {
            let z = v1_hat[c * nk + k] * C64::new(0.0, g.xi[k]);
            div[c * nk + k] = z + (v2_hat[(c + 1) * nk + k] - v2_hat[c * nk + k]) / g.dy;
        }
    }
    let max_div = fft.inverse(&div).iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let l1_v = (s.v1.iter().map(|v| v.abs()).sum::<f64>() + s.v2.iter().map(|v| v.abs()).sum::<f64>()) * area;
    let l2_v_sq = nv.l2;
    EnergyRecord {
        t: s.t,
        l2_v: l2_v_sq.sqrt(),
        l2_rho: nr.l2.sqrt(),
        h1_v: nv.h1_sq().sqrt(),
        h2_v: nv.h2_sq().sqrt(),
        h1_rho: nr.h1_sq().sqrt(),
        h2_rho: nr.h2_sq().sqrt(),
        epot,
        kinetic,
        gravity_pe,
        capillary_pe,
        displacement_pe,
        total,
        viscous_diss: cfg.mu * nv.grad,
        l1_v,
        linf_v: s.max_abs_v(),
        linf_v2: s.max_abs_v2(),
        max_div,
        mass,
        weighted_l2_v: weight.powi(3) * l2_v_sq,
        weighted_h1_v: weight.powi(2) * nv.h1_sq(),
        weighted_h2_v: weight * nv.h2_sq(),
        eulerian_proxy_e: weight.powi(2) * nv.h2_sq() + weight.powi(3) * proxy_rho,
        eulerian_proxy_d: weight.powi(2) * (proxy_rho + nv.h1_sq()),
    }
}

/// Diagnostics of `s`; builds the discretization for the state's grid. Runs with a
/// displacement field are treated as linearized.
pub fn record(s: &FieldState, p: &DensityProfile, config: &SlabConfig) -> Result<EnergyRecord> {
    let grid = SlabGrid::new(s.nx, s.ny, config.l, config.h, false)?;
    let slab = Slab::new(grid, *config, p, s.displacement.is_some())?;
    Ok(record_with(&slab, s))
}

pub fn write_series_csv(records: &[EnergyRecord], w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "{}", SERIES_FIELDS.join(","))?;
    for r in records {
        let row: Vec<String> = r.values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    ExpGrowth,
    BoundedCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    pub kind: FitKind,
}

/// Which records enter a growth fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindowPolicy {
    All,
    Time {
        t0: f64,
        t1: f64,
    },
    /// Records with `lo ≤ max|v₂| ≤ hi`, from the first entry into the band to the
    /// first exit above it.
    Amplitude {
        lo: f64,
        hi: f64,
    },
}

impl WindowPolicy {
    /// The linear-regime band `[3δ, 0.01·max ρ̄]`.
    pub fn linear_regime(delta: f64, p: &DensityProfile) -> Self {
        WindowPolicy::Amplitude { lo: 3.0 * delta, hi: 0.01 * p.max_rho() }
    }
}

/// Least-squares line `y = a + b x`; returns `(b, a, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(NskError::Fit(format!("need at least two points, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NskError::Fit("abscissae are all equal".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok((b, a, r2))
}

/// Exponential rate of `l2_v` over the selected window (at least 10 records).
pub fn fit_growth(series: &[EnergyRecord], policy: WindowPolicy) -> Result<FitResult> {
    let selected: Vec<&EnergyRecord> = match policy {
        WindowPolicy::All => series.iter().collect(),
        WindowPolicy::Time { t0, t1 } => series.iter().filter(|r| r.t >= t0 && r.t <= t1).collect(),
        WindowPolicy::Amplitude { lo, hi } => {
            let start = series.iter().position(|r| r.linf_v2 >= lo);
            match start {
                None => Vec::new(),
                Some(s) => series[s..].iter().take_while(|r| r.linf_v2 <= hi).collect(),
            }
        }
    };
    if selected.len() < 10 {
        return Err(NskError::Fit(format!("window holds {} records, need at least 10", selected.len())));
    }
    if selected.iter().any(|r| !(r.l2_v > 0.0)) {
        return Err(NskError::Fit("non-positive norm in fit window".into()));
    }
    let ts: Vec<f64> = selected.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = selected.iter().map(|r| r.l2_v.ln()).collect();
    let (rate, intercept, r_squared) = linear_fit(&ts, &ys)?;
    Ok(FitResult {
        rate,
        intercept,
        window: (ts[0], ts[ts.len() - 1]),
        r_squared,
        points: ts.len(),
        kind: FitKind::ExpGrowth,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayCheck {
    /// `sup ⟨t⟩ᵖ‖v‖₀²` over the records.
    pub sup_value: f64,
    pub t_sup: f64,
    /// `‖v‖₀` is non-increasing over the last third of the records.
    pub is_monotone_tail: bool,
}

pub fn bounded_decay_check(series: &[EnergyRecord], p: f64) -> DecayCheck {
    let mut sup_value = f64::NEG_INFINITY;
    let mut t_sup = f64::NAN;
    for r in series {
        let v = (1.0 + r.t).powf(p) * r.l2_v * r.l2_v;
        if v > sup_value {
            sup_value = v;
            t_sup = r.t;
        }
    }
    let tail = &series[series.len() - series.len() / 3..];
    let is_monotone_tail = tail.windows(2).all(|w| w[1].l2_v <= w[0].l2_v * (1.0 + 1e-12));
    DecayCheck { sup_value, t_sup, is_monotone_tail }
}

/// Smallest `‖∇φ₂‖₀²/‖φ₂‖₀²` over the discrete solenoidal fields at `ny` intervals:
/// the lowest eigenvalue of the `k = 1` Dirichlet problem.
pub fn poincare_constant(ny: usize, h: f64, l: f64) -> Result<f64> {
    if ny < 2 {
        return Err(NskError::InvalidConfig("ny must be >= 2".into()));
    }
    let dy = h / ny as f64;
    let xi = 1.0 / l;
    let mass = fd::node_mass(&vec![1.0; ny - 1], dy);
    let stiff = fd::centre_stiffness(&vec![1.0; ny], dy);
    let k = crate::banded::SymBanded::combine(&[(1.0, &stiff), (xi * xi, &mass)]);
    let top = top_eigenpair(&mass, &k, None)?;
    Ok(1.0 / top.value)
}

/// Relative gap between the physical and Parseval `L²` norms of a row-major field.
pub fn parseval_gap(field: &[f64], nx: usize) -> f64 {
    let fft = RowFft::new(nx);
    let spec = fft.forward(field);
    let nk = nx / 2 + 1;
    let phys: f64 = field.iter().map(|v| v * v).sum();
    let mut modal = 0.0;
    for row in spec.chunks(nk) {
        for (k, z) in row.iter().enumerate() {
            let w = if k == 0 || 2 * k == nx { 1.0 } else { 2.0 };
            modal += w * z.norm_sqr() * nx as f64;
        }
    }
    if phys == 0.0 {
        modal
    } else {
        (phys - modal).abs() / phys
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let (b, a, r2) = linear_fit(&xs, &ys).unwrap();
        assert!((b + 0.25).abs() < 1e-15 && (a - 1.5).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poincare_matches_discrete_formula() {
        let ny = 40;
        let dy = 1.0 / ny as f64;
        let exact = 4.0 / (dy * dy) * (std::f64::consts::PI * dy / 2.0).sin().powi(2) + 1.0;
        assert!((poincare_constant(ny, 1.0, 1.0).unwrap() - exact).abs() < 1e-10 * exact);
    }
}
