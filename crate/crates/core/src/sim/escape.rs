//! Escape-time sweeps over the initial amplitude.

use serde::Serialize;

use crate::diagnostics::linear_fit;
use crate::error::{NskError, Result};
use crate::growth::GrowthResult;
use crate::par;
use crate::profile::{DensityProfile, SlabConfig};

use super::run::run_with;
use super::state::{InitKind, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EscapeSample {
    pub delta: f64,
    /// `None` when `‖v‖_{L¹}` stayed below the threshold up to `t_end`.
    pub t_escape: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EscapeFit {
    /// Slope of `T` against `ln(1/δ)`; compare with `1/Λ`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn with_delta(init: &InitKind, delta: f64) -> Result<InitKind> {
    match init {
        InitKind::Eigenfunction { .. } => Ok(InitKind::Eigenfunction { delta }),
        InitKind::RandomSmooth { cutoff, .. } => Ok(InitKind::RandomSmooth { delta, cutoff: *cutoff }),
        InitKind::File { .. } => Err(NskError::InvalidConfig("escape sweeps need a scalable initial state".into())),
    }
}

/// First time `‖v‖_{L¹} ≥ eps` for each amplitude; runs are independent and
/// executed in parallel, results follow the order of `deltas`.
pub fn escape_time(
    base: &RunConfig,
    p: &DensityProfile,
    config: &SlabConfig,
    deltas: &[f64],
    eps: f64,
    gr: Option<&GrowthResult>,
) -> Result<Vec<EscapeSample>> {
    if !(eps > 0.0) {
        return Err(NskError::InvalidConfig(format!("escape threshold must be positive, got {eps}")));
    }
    let runs = par::map_slice(deltas, |&delta| -> Result<EscapeSample> {
        let mut rc = base.clone();
        rc.init = with_delta(&base.init, delta)?;
        rc.stop_l1 = Some(eps);
        rc.output_every = usize::MAX;
        rc.checkpoint_every = None;
        let out = run_with(&rc, p, config, gr)?;
        Ok(EscapeSample { delta, t_escape: out.escape_time })
    });
    runs.into_iter().collect()
}

/// Least-squares line `T = a + b ln(1/δ)` through the uncensored samples.
pub fn fit_escape(samples: &[EscapeSample]) -> Result<EscapeFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        samples.iter().filter_map(|s| s.t_escape.map(|t| ((1.0 / s.delta).ln(), t))).unzip();
    if xs.len() < 2 {
        return Err(NskError::Fit(format!("{} uncensored escape samples, need at least 2", xs.len())));
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys)?;
    Ok(EscapeFit { slope, intercept, r_squared, points: xs.len() })
}
