//! Time loop, stop criteria and output cadence.

use std::path::PathBuf;

use serde::Serialize;

use crate::diagnostics::{record_with, EnergyRecord};
use crate::error::Result;
use crate::growth::GrowthResult;
use crate::profile::{DensityProfile, SlabConfig};

use super::checkpoint::write_checkpoint;
use super::state::{FieldState, RunConfig};
use super::stepper::Simulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    Escape,
    Amplitude,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: FieldState,
    pub series: Vec<EnergyRecord>,
    pub stop: StopReason,
    pub steps: usize,
    /// First time with `‖v‖_{L¹} ≥ stop_l1`, interpolated log-linearly between steps.
    pub escape_time: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
    pub max_pcg_iterations: usize,
}

/// `‖v‖_{L¹}` as the sum of the component norms.
pub fn l1_velocity(s: &FieldState, cell_area: f64) -> f64 {
    (s.v1.iter().map(|v| v.abs()).sum::<f64>() + s.v2.iter().map(|v| v.abs()).sum::<f64>()) * cell_area
}

pub fn run(rc: &RunConfig, p: &DensityProfile, config: &SlabConfig) -> Result<RunOutcome> {
    run_with(rc, p, config, None)
}

pub fn run_with(
    rc: &RunConfig,
    p: &DensityProfile,
    config: &SlabConfig,
    gr: Option<&GrowthResult>,
) -> Result<RunOutcome> {
    let mut sim = Simulation::new(rc, p, config)?;
    let s0 = sim.initial_state(p, gr)?;
    sim.run_from(s0)
}

impl Simulation {
    /// Advance `s` to `t_end` or the first stop criterion. The pressure of the final
    /// state is filled in.
    pub fn run_from(&mut self, mut s: FieldState) -> Result<RunOutcome> {
        let rc = self.rc.clone();
        let area = self.grid().cell_area();
        let mut series = vec![record_with(&self.slab, &s)];
        let mut steps = 0;
        let mut checkpoints = Vec::new();
        let mut escape_time = None;
        let mut max_iters = 0;
        let mut l1 = l1_velocity(&s, area);
        let t_stop = s.t.max(rc.t_end);
        let slack = 1e-12 * t_stop.max(1.0);
        let mut stop = StopReason::EndTime;
        if let Some(eps) = rc.stop_l1 {
            if l1 >= eps {
                escape_time = Some(s.t);
                stop = StopReason::Escape;
            }
        }
        while stop == StopReason::EndTime && t_stop - s.t > slack {
            if rc.max_steps.is_some_and(|m| steps >= m) {
                stop = StopReason::MaxSteps;
                break;
            }
            let dt = self.choose_dt(&s).min(t_stop - s.t);
            let next = self.step(&s, dt)?;
            max_iters = max_iters.max(self.last_iterations);
            steps += 1;
            let l1_next = l1_velocity(&next, area);
            if let Some(eps) = rc.stop_l1 {
                if l1_next >= eps {
                    let frac = if l1 > 0.0 && l1_next > l1 { (eps / l1).ln() / (l1_next / l1).ln() } else { 1.0 };
                    escape_time = Some(s.t + frac.clamp(0.0, 1.0) * dt);
                    stop = StopReason::Escape;
                }
            }
            if rc.stop_amplitude.is_some_and(|a| next.max_abs_v2() >= a) && stop == StopReason::EndTime {
                stop = StopReason::Amplitude;
            }
            s = next;
            l1 = l1_next;
            let last = stop != StopReason::EndTime || t_stop - s.t <= slack;
            if steps % rc.output_every == 0 || last {
                series.push(record_with(&self.slab, &s));
            }
            if let (Some(every), Some(dir)) = (rc.checkpoint_every, rc.checkpoint_dir.as_ref()) {
                if steps % every == 0 {
                    let path = dir.join(format!("ckpt_{steps:07}.bin"));
                    write_checkpoint(&s, &path)?;
                    checkpoints.push(path);
                }
            }
        }
        s.pressure = self.pressure(&s)?;
        Ok(RunOutcome { final_state: s, series, stop, steps, escape_time, checkpoints, max_pcg_iterations: max_iters })
    }
}
