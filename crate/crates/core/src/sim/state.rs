use std::path::PathBuf;

use serde::Serialize;

use crate::diagnostics::Closure;
use crate::error::{NskError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DtMode {
    Fixed {
        dt: f64,
    },
    /// `Δt = min(dt_max, CFL_adv·Δ/max|v|, CFL_cap·Δ/c_cap)` with `Δ = min(Δx, Δy)` and
    /// capillary wave speed `c_cap = max|∇ρ|·√(κ/min ρ)`.
    Adaptive {
        cfl_adv: f64,
        cfl_cap: f64,
        dt_max: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// `δ` times the fastest-growing eigenmode, scaled so that `max|v₂| = δ`.
    Eigenfunction { delta: f64 },
    /// Random streamfunction with Fourier modes `1 ≤ k ≤ cutoff` and sine modes up
    /// to `cutoff`, scaled so that `max|v| = δ`; `ϱ = 0`. The horizontal mean is left
    /// out: with slip walls a uniform drift is conserved and never decays.
    RandomSmooth { delta: f64, cutoff: usize },
    /// Checkpoint file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub dt_mode: DtMode,
    pub t_end: f64,
    pub linearized: bool,
    pub dealias: bool,
    pub seed: u64,
    pub init: InitKind,
    pub output_every: usize,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop once `‖v‖_{L¹} ≥` this value.
    pub stop_l1: Option<f64>,
    /// Stop once `max|v₂| ≥` this value.
    pub stop_amplitude: Option<f64>,
    pub max_steps: Option<usize>,
    /// Relative residual of the conjugate-gradient mass solves.
    pub pcg_tol: f64,
    pub rho_wall: Closure,
}

impl RunConfig {
    pub fn new(nx: usize, ny: usize, t_end: f64, init: InitKind) -> Self {
        RunConfig {
            nx,
            ny,
            dt_mode: DtMode::Adaptive { cfl_adv: 0.5, cfl_cap: 0.3, dt_max: 0.05 },
            t_end,
            linearized: false,
            dealias: true,
            seed: 0,
            init,
            output_every: 1,
            checkpoint_every: None,
            checkpoint_dir: None,
            stop_l1: None,
            stop_amplitude: None,
            max_steps: None,
            pcg_tol: 1e-13,
            rho_wall: Closure::Odd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || !self.nx.is_power_of_two() {
            return Err(NskError::InvalidConfig(format!("Nx must be a power of two >= 4, got {}", self.nx)));
        }
        if self.ny < 16 {
            return Err(NskError::InvalidConfig(format!("Ny must be >= 16, got {}", self.ny)));
        }
        match self.init {
            InitKind::Eigenfunction { delta } | InitKind::RandomSmooth { delta, .. } if !(delta >= 0.0) => {
                return Err(NskError::InvalidConfig(format!("delta must be >= 0, got {delta}")));
            }
            InitKind::RandomSmooth { cutoff: 0, .. } => {
                return Err(NskError::InvalidConfig("cutoff must be >= 1".into()));
            }
            _ => {}
        }
        match self.dt_mode {
            DtMode::Fixed { dt } if !(dt > 0.0) => {
                return Err(NskError::InvalidConfig(format!("dt must be positive, got {dt}")));
            }
            DtMode::Adaptive { cfl_adv, cfl_cap, dt_max } if !(cfl_adv > 0.0 && cfl_cap > 0.0 && dt_max > 0.0) => {
                return Err(NskError::InvalidConfig("CFL numbers and dt_max must be positive".into()));
            }
            _ => {}
        }
        if !(self.t_end >= 0.0) {
            return Err(NskError::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.output_every == 0 {
            return Err(NskError::InvalidConfig("output_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Perturbation state in physical space.
///
/// `rho_pert`, `v1` and `pressure` live at cell centres (`ny` rows of `nx`),
/// `v2` and `displacement` at nodes (`ny + 1` rows).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub step_index: usize,
    pub rho_pert: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Accumulated vertical displacement `∂ₜς₂ = v₂`, tracked in linearized runs.
    pub displacement: Option<Vec<f64>>,
}

impl FieldState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        FieldState {
            nx,
            ny,
            t: 0.0,
            step_index: 0,
            rho_pert: vec![0.0; nx * ny],
            v1: vec![0.0; nx * ny],
            v2: vec![0.0; nx * (ny + 1)],
            pressure: vec![0.0; nx * ny],
            displacement: None,
        }
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v1.iter().chain(&self.v2).fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_v2(&self) -> f64 {
        self.v2.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.rho_pert.iter().chain(&self.v1).chain(&self.v2).all(|v| v.is_finite())
    }
}
