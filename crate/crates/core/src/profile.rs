//! Slab geometry, equilibrium density profiles, admissibility checks and the
//! hydrostatic pressure.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{NskError, Result};

/// Physical and geometric parameters of the slab `2πL𝕋 × (0, h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlabConfig {
    pub g: f64,
    pub mu: f64,
    pub kappa: f64,
    /// Horizontal period parameter; the cell width is `2πL`.
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
}

impl SlabConfig {
    pub fn new(g: f64, mu: f64, kappa: f64, l: f64, h: f64) -> Result<Self> {
        let c = SlabConfig { g, mu, kappa, l, h };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("mu", self.mu), ("L", self.l), ("h", self.h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NskError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(NskError::InvalidConfig(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn width(&self) -> f64 {
        2.0 * PI * self.l
    }

    /// `π²h⁻² + L⁻²`, the optimal Poincaré constant for the vertical velocity.
    pub fn poincare_constant(&self) -> f64 {
        PI * PI / (self.h * self.h) + 1.0 / (self.l * self.l)
    }
}

/// Closed-form profiles with exact derivative samplers.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "expr", rename_all = "snake_case")]
pub enum AnalyticProfile {
    /// `base + amp·tanh((y − center)/width) + slope·y`
    TanhLayer { base: f64, amp: f64, width: f64, center: f64, slope: f64 },
    /// `base − amp·cos(πy/h)`; `ρ̄′` vanishes at both walls.
    Cosine { base: f64, amp: f64 },
    /// `ρ̄′ = amp·sin²(πy/h)`, `ρ̄(0) = base`.
    SinSquared { base: f64, amp: f64 },
    /// `Σ cᵢ yⁱ`
    Polynomial { coeffs: Vec<f64> },
}

impl AnalyticProfile {
    pub fn id(&self) -> &'static str {
        match self {
            AnalyticProfile::TanhLayer { .. } => "tanh_layer",
            AnalyticProfile::Cosine { .. } => "cosine",
            AnalyticProfile::SinSquared { .. } => "sin_squared",
            AnalyticProfile::Polynomial { .. } => "polynomial",
        }
    }

    /// `[ρ̄, ρ̄′, ρ̄″, ρ̄‴]` at height `y` in a slab of height `h`.
    pub fn eval(&self, y: f64, h: f64) -> [f64; 4] {
        match *self {
            AnalyticProfile::TanhLayer { base, amp, width, center, slope } => {
                let z = (y - center) / width;
                let t = z.tanh();
                let s = 1.0 - t * t;
                [
                    base + amp * t + slope * y,
                    amp * s / width + slope,
                    -2.0 * amp * t * s / (width * width),
                    amp * (4.0 * t * t * s - 2.0 * s * s) / (width * width * width),
                ]
            }
            AnalyticProfile::Cosine { base, amp } => {
                let w = PI / h;
                let (s, c) = (w * y).sin_cos();
                [base - amp * c, amp * w * s, amp * w * w * c, -amp * w * w * w * s]
            }
            AnalyticProfile::SinSquared { base, amp } => {
                let w = 2.0 * PI / h;
                let (s, c) = (w * y).sin_cos();
                [
                    base + amp * (0.5 * y - s / (2.0 * w)),
                    0.5 * amp * (1.0 - c),
                    0.5 * amp * w * s,
                    0.5 * amp * w * w * c,
                ]
            }
            AnalyticProfile::Polynomial { ref coeffs } => {
                let mut out = [0.0; 4];
                for (d, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, &c) in coeffs.iter().enumerate().rev() {
                        if i < d {
                            break;
                        }
                        let fall: f64 = ((i - d + 1)..=i).map(|m| m as f64).product();
                        acc = acc * y + c * fall;
                    }
                    *o = acc;
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Linear { rho0: f64, slope: f64 },
    Analytic(AnalyticProfile),
    Tabulated,
}

/// Equilibrium density sampled on `N + 1` uniform nodes of `[0, h]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile {
    pub nodes: Vec<f64>,
    pub rho: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub kind: ProfileKind,
    h: f64,
}

impl DensityProfile {
    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dy(&self) -> f64 {
        self.h / self.n() as f64
    }

    /// `[ρ̄, ρ̄′, ρ̄″, ρ̄‴]` at any `y ∈ [0, h]`. Exact for linear and analytic kinds,
    /// piecewise cubic Hermite for tabulated ones.
    pub fn eval(&self, y: f64) -> [f64; 4] {
        match &self.kind {
            ProfileKind::Linear { rho0, slope } => [rho0 + slope * y, *slope, 0.0, 0.0],
            ProfileKind::Analytic(a) => a.eval(y, self.h),
            ProfileKind::Tabulated => {
                let n = self.n();
                let dy = self.dy();
                let s = (y / dy).clamp(0.0, n as f64);
                let i = (s.floor() as usize).min(n - 1);
                let t = s - i as f64;
                let herm = |f: &[f64], df: &[f64]| {
                    let (h00, h10, h01, h11) = (
                        (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
                        t * (1.0 - t) * (1.0 - t),
                        t * t * (3.0 - 2.0 * t),
                        t * t * (t - 1.0),
                    );
                    h00 * f[i] + h10 * dy * df[i] + h01 * f[i + 1] + h11 * dy * df[i + 1]
                };
                [
                    herm(&self.rho, &self.d1),
                    herm(&self.d1, &self.d2),
                    herm(&self.d2, &self.d3),
                    (1.0 - t) * self.d3[i] + t * self.d3[i + 1],
                ]
            }
        }
    }

    /// The same profile sampled on `n` intervals.
    pub fn resample(&self, n: usize) -> Result<DensityProfile> {
        if n == self.n() {
            return Ok(self.clone());
        }
        if n < 2 {
            return Err(NskError::InvalidConfig("profile needs at least 2 intervals".into()));
        }
        let dy = self.h / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|j| j as f64 * dy).collect();
        let samples: Vec<[f64; 4]> = nodes.iter().map(|&y| self.eval(y)).collect();
        let p = DensityProfile {
            rho: samples.iter().map(|s| s[0]).collect(),
            d1: samples.iter().map(|s| s[1]).collect(),
            d2: samples.iter().map(|s| s[2]).collect(),
            d3: samples.iter().map(|s| s[3]).collect(),
            nodes,
            kind: self.kind.clone(),
            h: self.h,
        };
        check_vacuum(&p)?;
        Ok(p)
    }

    pub fn max_abs_d1(&self) -> f64 {
        self.d1.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_abs_d1(&self) -> f64 {
        self.d1.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn kind_label(&self) -> String {
        match &self.kind {
            ProfileKind::Linear { .. } => "linear".into(),
            ProfileKind::Analytic(a) => format!("analytic({})", a.id()),
            ProfileKind::Tabulated => "tabulated".into(),
        }
    }
}

fn uniform_nodes(h: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(NskError::InvalidConfig(format!("profile needs at least 2 intervals, got {n}")));
    }
    Ok((0..=n).map(|j| h * j as f64 / n as f64).collect())
}

fn check_vacuum(p: &DensityProfile) -> Result<()> {
    let (j, min) =
        p.rho.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    if !(min > 0.0) {
        return Err(NskError::Vacuum { min, y: p.nodes[j] });
    }
    Ok(())
}

/// `ρ̄ = rho0 + slope·y` on `n` intervals.
pub fn make_linear_profile(rho0: f64, slope: f64, config: &SlabConfig, n: usize) -> Result<DensityProfile> {
    let h = config.h;
    let top = rho0 + slope * h;
    if !(rho0 > 0.0) || !(top > 0.0) {
        let (min, y) = if rho0 <= top { (rho0, 0.0) } else { (top, h) };
        return Err(NskError::Vacuum { min, y });
    }
    let nodes = uniform_nodes(h, n)?;
    Ok(DensityProfile {
        rho: nodes.iter().map(|y| rho0 + slope * y).collect(),
        d1: vec![slope; n + 1],
        d2: vec![0.0; n + 1],
        d3: vec![0.0; n + 1],
        nodes,
        kind: ProfileKind::Linear { rho0, slope },
        h,
    })
}

pub fn make_analytic_profile(expr: AnalyticProfile, config: &SlabConfig, n: usize) -> Result<DensityProfile> {
    let h = config.h;
    if let AnalyticProfile::TanhLayer { width, .. } = expr {
        if !(width > 0.0) {
            return Err(NskError::InvalidConfig("tanh layer width must be positive".into()));
        }
    }
    let nodes = uniform_nodes(h, n)?;
    let samples: Vec<[f64; 4]> = nodes.iter().map(|&y| expr.eval(y, h)).collect();
    let p = DensityProfile {
        rho: samples.iter().map(|s| s[0]).collect(),
        d1: samples.iter().map(|s| s[1]).collect(),
        d2: samples.iter().map(|s| s[2]).collect(),
        d3: samples.iter().map(|s| s[3]).collect(),
        nodes,
        kind: ProfileKind::Analytic(expr),
        h,
    };
    check_vacuum(&p)?;
    Ok(p)
}

/// Build a tabulated profile from uniform samples of `ρ̄` on `[0, h]`.
/// Derivatives use Fornberg finite-difference weights on windows of 5 (first
/// derivative) or 7 points (second and third), centred where possible and
/// one-sided near the walls.
pub fn make_tabulated_profile(rho: Vec<f64>, h: f64) -> Result<DensityProfile> {
    let n = rho.len().saturating_sub(1);
    if n < 6 {
        return Err(NskError::ProfileFile(format!("need at least 7 samples, got {}", rho.len())));
    }
    let nodes = uniform_nodes(h, n)?;
    let deriv = |order: usize, width: usize| -> Vec<f64> {
        (0..=n)
            .map(|j| {
                let half = width / 2;
                let start = j.saturating_sub(half).min(n + 1 - width);
                let xs: Vec<f64> = (start..start + width).map(|i| nodes[i]).collect();
                let w = fornberg_weights(nodes[j], &xs, order);
                w[order].iter().zip(&rho[start..start + width]).map(|(a, b)| a * b).sum()
            })
            .collect()
    };
    let p = DensityProfile {
        d1: deriv(1, 5),
        d2: deriv(2, 7),
        d3: deriv(3, 7),
        rho,
        nodes,
        kind: ProfileKind::Tabulated,
        h,
    };
    check_vacuum(&p)?;
    Ok(p)
}

/// Parse the two-column `# profile v1` text format. Samples that are not
/// uniformly spaced are interpolated (natural cubic spline) onto a uniform grid
/// with the same number of points.
pub fn parse_tabulated(text: &str, config: &SlabConfig) -> Result<DensityProfile> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("# profile v1") => {}
        other => {
            return Err(NskError::ProfileFile(format!(
                "expected header '# profile v1', found {:?}",
                other.unwrap_or("<empty>")
            )))
        }
    }
    let mut ys = Vec::new();
    let mut rs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(NskError::ProfileFile(format!("data line {}: expected 2 columns", lineno + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| NskError::ProfileFile(format!("data line {}: bad number '{s}'", lineno + 1)))
        };
        ys.push(parse(cols[0])?);
        rs.push(parse(cols[1])?);
    }
    if ys.len() < 7 {
        return Err(NskError::ProfileFile(format!("need at least 7 samples, got {}", ys.len())));
    }
    if ys.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NskError::ProfileFile("y column must be strictly increasing".into()));
    }
    let h = config.h;
    let tol = 1e-9 * h;
    if ys[0].abs() > tol || (ys[ys.len() - 1] - h).abs() > tol {
        return Err(NskError::ProfileFile(format!(
            "samples must span [0, {h}], found [{}, {}]",
            ys[0],
            ys[ys.len() - 1]
        )));
    }
    let n = ys.len() - 1;
    let dy = h / n as f64;
    let uniform = ys.iter().enumerate().all(|(j, y)| (y - j as f64 * dy).abs() <= 1e-9 * h);
    let rho = if uniform {
        rs
    } else {
        let spline = NaturalSpline::new(&ys, &rs);
        (0..=n).map(|j| spline.eval(j as f64 * dy)).collect()
    };
    make_tabulated_profile(rho, h)
}

pub fn load_tabulated(path: &Path, config: &SlabConfig) -> Result<DensityProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| NskError::ProfileFile(format!("{}: {e}", path.display())))?;
    parse_tabulated(&text, config)
}

/// Write a profile in the `# profile v1` format.
pub fn write_tabulated(p: &DensityProfile, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "# profile v1")?;
    for (y, r) in p.nodes.iter().zip(&p.rho) {
        writeln!(w, "{y:.17e} {r:.17e}")?;
    }
    Ok(())
}

struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        NaturalSpline { x: x.to_vec(), y: y.to_vec(), m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Finite-difference weights for derivatives `0..=order` at `x0` on nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Qualitative properties of a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// Some node has `ρ̄′ > tol`.
    pub rt_condition: bool,
    /// `min |ρ̄′| > tol` over all nodes.
    pub stabilizing: bool,
    pub min_abs_d1: f64,
    /// `|ρ̄′| ≤ tol` at both walls.
    pub boundary_flat: bool,
    pub tol: f64,
}

/// `1e-12 · max |ρ̄′|`.
pub fn default_tolerance(p: &DensityProfile) -> f64 {
    1e-12 * p.max_abs_d1()
}

pub fn check_admissibility(p: &DensityProfile, tol: f64) -> AdmissibilityReport {
    let min_abs_d1 = p.min_abs_d1();
    let n = p.n();
    AdmissibilityReport {
        rt_condition: p.d1.iter().any(|&v| v > tol),
        stabilizing: min_abs_d1 > tol,
        min_abs_d1,
        boundary_flat: p.d1[0].abs() <= tol && p.d1[n].abs() <= tol,
        tol,
    }
}

/// Hydrostatic pressure `P̄` at the profile nodes from `P̄′ = κρ̄ρ̄‴ − gρ̄`,
/// trapezoid rule, `P̄(0) = 0`.
pub fn equilibrium_pressure(p: &DensityProfile, config: &SlabConfig) -> Vec<f64> {
    let f: Vec<f64> = p.rho.iter().zip(&p.d3).map(|(r, r3)| config.kappa * r * r3 - config.g * r).collect();
    let dy = p.dy();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * dy * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SlabConfig {
        SlabConfig::new(1.0, 0.1, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn fornberg_recovers_classic_stencils() {
        let xs = [-1.0, 0.0, 1.0];
        let w = fornberg_weights(0.0, &xs, 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = AnalyticProfile::Polynomial { coeffs: vec![1.0, 2.0, 3.0, 4.0] };
        let y: f64 = 0.3;
        let v = p.eval(y, 1.0);
        assert!((v[0] - (1.0 + 2.0 * y + 3.0 * y * y + 4.0 * y.powi(3))).abs() < 1e-15);
        assert!((v[1] - (2.0 + 6.0 * y + 12.0 * y * y)).abs() < 1e-14);
        assert!((v[2] - (6.0 + 24.0 * y)).abs() < 1e-14);
        assert!((v[3] - 24.0).abs() < 1e-14);
    }

    #[test]
    fn sin_squared_derivative_matches_definition() {
        let a = AnalyticProfile::SinSquared { base: 1.0, amp: 0.5 };
        for &y in &[0.0, 0.2, 0.5, 0.9] {
            let v = a.eval(y, 1.0);
            assert!((v[1] - 0.5 * (PI * y).sin().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn natural_spline_reproduces_linear_data() {
        let x = [0.0, 0.1, 0.35, 0.6, 1.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let s = NaturalSpline::new(&x, &y);
        assert!((s.eval(0.5) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn tabulated_hermite_eval_hits_nodes() {
        let cfg = unit();
        let lin = make_linear_profile(1.0, 0.5, &cfg, 16).unwrap();
        let tab = make_tabulated_profile(lin.rho.clone(), 1.0).unwrap();
        let v = tab.eval(tab.nodes[5]);
        assert!((v[0] - lin.rho[5]).abs() < 1e-14);
        assert!((v[1] - 0.5).abs() < 1e-10);
    }
}
