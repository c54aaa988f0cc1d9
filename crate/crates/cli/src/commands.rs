use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};
use thiserror::Error;

use nsk_core::acceptance::{run_criterion, CriterionOutcome};
use nsk_core::diagnostics::{write_series_csv, Closure};
use nsk_core::growth::{compute_growth_with, write_growth_csv, write_profile_columns, GrowthOptions, GrowthResult};
use nsk_core::profile::{load_tabulated, make_analytic_profile, make_linear_profile};
use nsk_core::sim::{escape_time, fit_escape, run_with, write_checkpoint, DtMode, InitKind, RunConfig};
use nsk_core::threshold::{compute_kappa_c, write_modes_csv};
use nsk_core::{par, AnalyticProfile, DensityProfile, NskError, SlabConfig, VERSION};

use crate::config::{Command, ConfigError, ExperimentSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(#[from] NskError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0} acceptance criteria failed")]
    Acceptance(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::Acceptance(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn missing(key: &str) -> CliError {
    CliError::Config(ConfigError(format!("missing required key `{key}`")))
}

fn req_f64(s: &ExperimentSpec, key: &str) -> Result<f64> {
    s.f64(key).ok_or_else(|| missing(key))
}

fn req_usize(s: &ExperimentSpec, key: &str) -> Result<usize> {
    s.usize(key).ok_or_else(|| missing(key))
}

/// Slab parameters with `κ` left at zero when it is given as a multiple of `κ_C`.
fn base_config(s: &ExperimentSpec) -> Result<SlabConfig> {
    Ok(SlabConfig::new(
        req_f64(s, "slab.g")?,
        req_f64(s, "slab.mu")?,
        s.f64("slab.kappa").unwrap_or(0.0),
        req_f64(s, "slab.L")?,
        req_f64(s, "slab.h")?,
    )?)
}

fn profile(s: &ExperimentSpec, cfg: &SlabConfig) -> Result<DensityProfile> {
    let n = req_usize(s, "profile.n")?;
    let f = |k: &str| req_f64(s, &format!("profile.{k}"));
    let p = match s.str("profile.kind").ok_or_else(|| missing("profile.kind"))? {
        "linear" => make_linear_profile(f("rho0")?, f("slope")?, cfg, n)?,
        "tanh_layer" => make_analytic_profile(
            AnalyticProfile::TanhLayer {
                base: f("base")?,
                amp: f("amp")?,
                width: f("width")?,
                center: f("center")?,
                slope: s.f64("profile.slope").unwrap_or(0.0),
            },
            cfg,
            n,
        )?,
        "cosine" => make_analytic_profile(AnalyticProfile::Cosine { base: f("base")?, amp: f("amp")? }, cfg, n)?,
        "sin_squared" => {
            make_analytic_profile(AnalyticProfile::SinSquared { base: f("base")?, amp: f("amp")? }, cfg, n)?
        }
        "polynomial" => make_analytic_profile(
            AnalyticProfile::Polynomial { coeffs: s.list("profile.coeffs").ok_or_else(|| missing("profile.coeffs"))? },
            cfg,
            n,
        )?,
        "file" => load_tabulated(Path::new(s.str("profile.path").ok_or_else(|| missing("profile.path"))?), cfg)?
            .resample(n)?,
        other => return Err(ConfigError(format!("unknown profile kind `{other}`")).into()),
    };
    Ok(p)
}

/// Problem set-up shared by all physics commands.
struct Setup {
    cfg: SlabConfig,
    profile: DensityProfile,
    kappa_c: Option<f64>,
}

fn setup(s: &ExperimentSpec) -> Result<Setup> {
    let mut cfg = base_config(s)?;
    let p = profile(s, &cfg)?;
    let mut kappa_c = None;
    if let Some(factor) = s.f64("slab.kappa_factor") {
        let kc = compute_kappa_c(&p, &cfg, p.n(), req_usize(s, "profile.k_max")?)?.kappa_c;
        kappa_c = Some(kc);
        cfg = SlabConfig::new(cfg.g, cfg.mu, factor * kc, cfg.l, cfg.h)?;
    }
    Ok(Setup { cfg, profile: p, kappa_c })
}

fn growth(s: &ExperimentSpec, st: &Setup, n: usize) -> Result<GrowthResult> {
    let opts = GrowthOptions {
        tol: req_f64(s, "growth.tol")?,
        k_max: req_usize(s, "profile.k_max")?,
        exhaustive: s.bool("growth.exhaustive").unwrap_or(false),
    };
    Ok(compute_growth_with(&st.profile, &st.cfg, n, &opts)?)
}

fn run_config(s: &ExperimentSpec) -> Result<RunConfig> {
    let init = match s.str("run.init").ok_or_else(|| missing("run.init"))? {
        "eigenfunction" => InitKind::Eigenfunction { delta: s.f64("run.delta").unwrap_or(0.0) },
        "random_smooth" => {
            InitKind::RandomSmooth { delta: s.f64("run.delta").unwrap_or(0.0), cutoff: req_usize(s, "run.cutoff")? }
        }
        "file" => {
            InitKind::File { path: PathBuf::from(s.str("run.init_path").ok_or_else(|| missing("run.init_path"))?) }
        }
        other => return Err(ConfigError(format!("unknown init `{other}`")).into()),
    };
    let mut rc = RunConfig::new(req_usize(s, "run.nx")?, req_usize(s, "run.ny")?, req_f64(s, "run.t_end")?, init);
    rc.dt_mode = match s.f64("run.dt") {
        Some(dt) => DtMode::Fixed { dt },
        None => DtMode::Adaptive {
            cfl_adv: req_f64(s, "run.cfl_adv")?,
            cfl_cap: req_f64(s, "run.cfl_cap")?,
            dt_max: req_f64(s, "run.dt_max")?,
        },
    };
    rc.linearized = s.bool("run.linearized").unwrap_or(false);
    rc.dealias = s.bool("run.dealias").unwrap_or(true);
    rc.seed = s.usize("run.seed").unwrap_or(0) as u64;
    rc.output_every = req_usize(s, "run.output_every")?;
    rc.checkpoint_every = s.usize("run.checkpoint_every");
    rc.stop_amplitude = s.f64("run.stop_amplitude");
    rc.max_steps = s.usize("run.max_steps");
    rc.pcg_tol = req_f64(s, "run.pcg_tol")?;
    rc.rho_wall = if s.str("run.rho_wall") == Some("even") { Closure::Even } else { Closure::Odd };
    rc.validate()?;
    Ok(rc)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn threshold_cmd(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    let cfg = base_config(s)?;
    let p = profile(s, &cfg)?;
    let r = compute_kappa_c(&p, &cfg, p.n(), req_usize(s, "profile.k_max")?)?;
    let mut w = create(dir, "modes.csv")?;
    write_modes_csv(&r, &mut w)?;
    w.flush()?;
    let mut w = create(dir, "eigenfunction.txt")?;
    write_profile_columns(&r.nodes, &r.phi, &mut w)?;
    w.flush()?;
    Ok(json!({
        "kappa_c": r.kappa_c,
        "k_star": r.k_star,
        "slope_bound": r.slope_bound,
        "discrete_bound": r.discrete_bound,
        "per_mode": r.per_mode,
    }))
}

fn growth_cmd(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    let st = setup(s)?;
    let r = growth(s, &st, st.profile.n())?;
    let mut w = create(dir, "growth_modes.csv")?;
    write_growth_csv(&r, &mut w)?;
    w.flush()?;
    for (name, values) in [("w2.txt", &r.w2), ("w1.txt", &r.w1), ("beta.txt", &r.beta)] {
        let mut w = create(dir, name)?;
        write_profile_columns(&r.nodes, values, &mut w)?;
        w.flush()?;
    }
    Ok(json!({
        "kappa": st.cfg.kappa,
        "kappa_c": st.kappa_c,
        "lambda": r.lambda,
        "k_star": r.k_star,
        "xi_star": r.xi_star,
        "residual": r.residual,
        "alpha_at_lambda": r.alpha_at_lambda,
        "nontriviality": r.nontriviality,
        "per_mode": r.per_mode,
    }))
}

fn needs_growth(rc: &RunConfig) -> bool {
    matches!(rc.init, InitKind::Eigenfunction { .. })
}

fn simulate_cmd(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    let st = setup(s)?;
    let mut rc = run_config(s)?;
    if rc.checkpoint_every.is_some() {
        let ck = dir.join("checkpoints");
        fs::create_dir_all(&ck)?;
        rc.checkpoint_dir = Some(ck);
    }
    let gr = if needs_growth(&rc) { Some(growth(s, &st, rc.ny)?) } else { None };
    let out = run_with(&rc, &st.profile, &st.cfg, gr.as_ref())?;
    let mut w = create(dir, "series.csv")?;
    write_series_csv(&out.series, &mut w)?;
    w.flush()?;
    write_checkpoint(&out.final_state, &dir.join("final.bin"))?;
    let last = out.series.last().expect("series holds the initial record");
    Ok(json!({
        "kappa": st.cfg.kappa,
        "kappa_c": st.kappa_c,
        "lambda": gr.as_ref().map(|g| g.lambda),
        "steps": out.steps,
        "t_final": out.final_state.t,
        "stop": out.stop,
        "max_pcg_iterations": out.max_pcg_iterations,
        "final_l2_v": last.l2_v,
        "final": last,
        "initial": out.series[0],
        "checkpoints": out.checkpoints.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn escape_cmd(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    let st = setup(s)?;
    let rc = run_config(s)?;
    let gr = growth(s, &st, rc.ny)?;
    let deltas = s.list("escape.deltas").ok_or_else(|| missing("escape.deltas"))?;
    let eps = req_f64(s, "escape.eps")?;
    let samples = escape_time(&rc, &st.profile, &st.cfg, &deltas, eps, Some(&gr))?;
    let mut w = create(dir, "escape.csv")?;
    writeln!(w, "delta,t_escape")?;
    for smp in &samples {
        match smp.t_escape {
            Some(t) => writeln!(w, "{:.16e},{t:.16e}", smp.delta)?,
            None => writeln!(w, "{:.16e},", smp.delta)?,
        }
    }
    w.flush()?;
    let fit = fit_escape(&samples).ok();
    Ok(json!({
        "kappa": st.cfg.kappa,
        "lambda": gr.lambda,
        "inverse_lambda": if gr.lambda > 0.0 { Some(1.0 / gr.lambda) } else { None },
        "eps": eps,
        "samples": samples,
        "fit": fit,
        "slope_rel_error": fit.filter(|_| gr.lambda > 0.0).map(|f| (f.slope * gr.lambda - 1.0).abs()),
    }))
}

/// Per-value copies of the experiment, in sweep order, and `κ_C` for relative sweeps.
type SweepPlan = (Vec<(f64, ExperimentSpec)>, Option<f64>);

fn sweep_specs(s: &ExperimentSpec) -> Result<SweepPlan> {
    let param = s.str("sweep.parameter").ok_or_else(|| missing("sweep.parameter"))?;
    let values = s.list("sweep.values").ok_or_else(|| missing("sweep.values"))?;
    let sub = match s.str("sweep.command").unwrap_or("growth") {
        "threshold" => Command::Threshold,
        "simulate" => Command::Simulate,
        _ => Command::Growth,
    };
    let kappa_c = if s.bool("sweep.relative") == Some(true) {
        let cfg = base_config(s)?;
        let p = profile(s, &cfg)?;
        Some(compute_kappa_c(&p, &cfg, p.n(), req_usize(s, "profile.k_max")?)?.kappa_c)
    } else {
        None
    };
    let key = match param {
        "kappa" => "slab.kappa",
        "mu" => "slab.mu",
        "g" => "slab.g",
        "L" => "slab.L",
        _ => "run.delta",
    };
    let specs = values
        .iter()
        .map(|&v| {
            let mut c = s.clone();
            c.command = sub;
            let actual = kappa_c.map_or(v, |kc| v * kc);
            if key == "slab.kappa" {
                c.remove("slab.kappa_factor");
            }
            c.set(key, toml::Value::Float(actual));
            (actual, c)
        })
        .collect();
    Ok((specs, kappa_c))
}

fn sweep_cmd(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    let (specs, kappa_c) = sweep_specs(s)?;
    let param = s.str("sweep.parameter").unwrap_or_default().to_string();
    let indexed: Vec<(usize, &(f64, ExperimentSpec))> = specs.iter().enumerate().collect();
    let results = par::map_slice(&indexed, |(i, (_, spec))| -> Result<Json> {
        let sub = dir.join(format!("{param}_{i:03}"));
        fs::create_dir_all(&sub)?;
        let summary = execute(spec, &sub)?;
        Ok(summary["result"].clone())
    });
    let mut w = create(dir, "sweep.csv")?;
    writeln!(w, "index,value,kappa,kappa_c,lambda,k_star,final_l2_v,stop")?;
    let mut rows = Vec::new();
    for ((i, (value, spec)), res) in indexed.iter().zip(results) {
        let res = res?;
        let num = |k: &str| {
            let v = res.get(k).and_then(Json::as_f64).or(if k == "kappa_c" { kappa_c } else { None });
            v.map_or(String::new(), |v| format!("{v:.16e}"))
        };
        let kappa = spec.f64("slab.kappa").map_or(String::new(), |v| format!("{v:.16e}"));
        let k_star = res.get("k_star").and_then(Json::as_u64).map_or(String::new(), |v| v.to_string());
        let stop = res.get("stop").and_then(Json::as_str).unwrap_or_default();
        writeln!(
            w,
            "{i},{value:.16e},{kappa},{},{},{k_star},{},{stop}",
            num("kappa_c"),
            num("lambda"),
            num("final_l2_v")
        )?;
        rows.push(json!({ "index": i, "value": value, "result": res }));
    }
    w.flush()?;
    Ok(json!({ "parameter": param, "kappa_c": kappa_c, "runs": rows }))
}

fn verify_cmd(criteria: &[u8], quiet: bool) -> (Json, usize) {
    let ids: Vec<u8> = if criteria.is_empty() { (1..=10).collect() } else { criteria.to_vec() };
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for id in ids {
        let o = run_criterion(id);
        if !quiet {
            eprintln!(
                "{} [{}] {}: {} ({:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                o.id,
                o.name,
                o.detail,
                o.seconds
            );
        }
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    (json!({ "passed": outcomes.len() - failed, "failed": failed, "criteria": outcomes }), failed)
}

fn tolerances(s: &ExperimentSpec) -> Json {
    json!({
        "growth_fixed_point": s.f64("growth.tol"),
        "pcg_relative_residual": s.f64("run.pcg_tol"),
        "admissibility_relative": 1e-12,
    })
}

fn grid(s: &ExperimentSpec) -> Json {
    let sim = matches!(s.command, Command::Simulate | Command::Escape);
    json!({
        "profile_n": s.usize("profile.n"),
        "k_max": s.usize("profile.k_max"),
        "nx": if sim { s.usize("run.nx") } else { None },
        "ny": if sim { s.usize("run.ny") } else { None },
    })
}

/// Run a physics command and write `summary.json` into `dir`.
pub fn execute(s: &ExperimentSpec, dir: &Path) -> Result<Json> {
    fs::create_dir_all(dir)?;
    let result = match s.command {
        Command::Threshold => threshold_cmd(s, dir)?,
        Command::Growth => growth_cmd(s, dir)?,
        Command::Simulate => simulate_cmd(s, dir)?,
        Command::Escape => escape_cmd(s, dir)?,
        Command::Sweep => sweep_cmd(s, dir)?,
        Command::Verify => unreachable!("verify is dispatched separately"),
    };
    let summary = json!({
        "command": s.command.name(),
        "version": VERSION,
        "spec": s.to_json(),
        "overrides": s.overrides,
        "grid": grid(s),
        "tolerances": tolerances(s),
        "result": result,
    });
    let mut w = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(summary)
}

pub fn verify(s: &ExperimentSpec, criteria: &[u8], quiet: bool) -> Result<Json> {
    let dir = s.out_dir();
    fs::create_dir_all(&dir)?;
    let (result, failed) = verify_cmd(criteria, quiet);
    let summary = json!({
        "command": "verify",
        "version": VERSION,
        "spec": s.to_json(),
        "overrides": s.overrides,
        "result": result,
    });
    let mut w = create(&dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    if failed > 0 {
        return Err(CliError::Acceptance(failed));
    }
    Ok(summary)
}
