//! Experiment files: `key = value` lines under `[slab]`, `[profile]`, `[run]`,
//! `[sweep]`, `[escape]` and `[output]` headers (TOML syntax). Command-line
//! `--set section.key=value` overrides win over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Threshold,
    Growth,
    Simulate,
    Sweep,
    Verify,
    Escape,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::Growth => "growth",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Escape => "escape",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Ty {
    Float,
    Int,
    Bool,
    Str,
    FloatList,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Float => "number",
            Ty::Int => "integer",
            Ty::Bool => "boolean",
            Ty::Str => "string",
            Ty::FloatList => "array of numbers",
        })
    }
}

struct KeyDef {
    name: &'static str,
    ty: Ty,
    default: Option<fn() -> Value>,
}

macro_rules! key {
    ($name:literal, $ty:ident) => {
        KeyDef { name: $name, ty: Ty::$ty, default: None }
    };
    ($name:literal, $ty:ident, $default:expr) => {
        KeyDef { name: $name, ty: Ty::$ty, default: Some(|| Value::from($default)) }
    };
}

const KEYS: &[KeyDef] = &[
    key!("slab.g", Float),
    key!("slab.mu", Float),
    key!("slab.kappa", Float),
    key!("slab.kappa_factor", Float),
    key!("slab.L", Float, 1.0),
    key!("slab.h", Float, 1.0),
    key!("profile.kind", Str),
    key!("profile.rho0", Float),
    key!("profile.slope", Float),
    key!("profile.base", Float),
    key!("profile.amp", Float),
    key!("profile.width", Float),
    key!("profile.center", Float),
    key!("profile.coeffs", FloatList),
    key!("profile.path", Str),
    key!("profile.n", Int, 256),
    key!("profile.k_max", Int, 32),
    key!("run.nx", Int),
    key!("run.ny", Int),
    key!("run.t_end", Float),
    key!("run.init", Str),
    key!("run.delta", Float),
    key!("run.cutoff", Int, 4),
    key!("run.init_path", Str),
    key!("run.dt", Float),
    key!("run.cfl_adv", Float, 0.5),
    key!("run.cfl_cap", Float, 0.3),
    key!("run.dt_max", Float, 0.05),
    key!("run.linearized", Bool, false),
    key!("run.dealias", Bool, true),
    key!("run.seed", Int, 0),
    key!("run.output_every", Int, 1),
    key!("run.checkpoint_every", Int),
    key!("run.stop_amplitude", Float),
    key!("run.max_steps", Int),
    key!("run.pcg_tol", Float, 1e-13),
    key!("run.rho_wall", Str, "odd"),
    key!("sweep.parameter", Str),
    key!("sweep.values", FloatList),
    key!("sweep.relative", Bool, false),
    key!("sweep.command", Str, "growth"),
    key!("escape.deltas", FloatList),
    key!("escape.eps", Float),
    key!("output.dir", Str, "nsk-out"),
    key!("growth.tol", Float, 1e-10),
    key!("growth.exhaustive", Bool, false),
];

pub const SWEEP_PARAMETERS: [&str; 5] = ["kappa", "mu", "g", "L", "delta"];

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn suggest(name: &str) -> String {
    let short = |s: &str| s.split_once('.').map_or(s, |p| p.1).to_string();
    let best = KEYS
        .iter()
        .map(|k| (strsim::jaro_winkler(name, k.name).max(strsim::jaro_winkler(&short(name), &short(k.name))), k.name))
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    if best.0 >= 0.8 {
        format!("; did you mean `{}`?", best.1)
    } else {
        String::new()
    }
}

fn def(name: &str) -> Result<&'static KeyDef, ConfigError> {
    KEYS.iter().find(|k| k.name == name).ok_or_else(|| ConfigError(format!("unknown key `{name}`{}", suggest(name))))
}

fn coerce(name: &str, ty: Ty, v: Value) -> Result<Value, ConfigError> {
    let bad = |v: &Value| ConfigError(format!("`{name}`: expected {ty}, found {} `{v}`", v.type_str()));
    match (ty, v) {
        (Ty::Float, Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Ty::Float, v @ Value::Float(_)) => Ok(v),
        (Ty::Int, v @ Value::Integer(i)) if i >= 0 => Ok(v),
        (Ty::Bool, v @ Value::Boolean(_)) => Ok(v),
        (Ty::Str, v @ Value::String(_)) => Ok(v),
        (Ty::FloatList, Value::Array(a)) => a
            .into_iter()
            .map(|x| match x {
                Value::Integer(i) => Ok(Value::Float(i as f64)),
                x @ Value::Float(_) => Ok(x),
                other => Err(bad(&other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array),
        (_, v) => Err(bad(&v)),
    }
}

/// Fully resolved experiment: every known key that has a value, after defaults,
/// file entries and overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub values: BTreeMap<String, Value>,
    pub overrides: Vec<String>,
}

/// Split `section.key=value`; the value is read as a TOML literal, or as a bare
/// string when it is not one.
pub fn parse_override(s: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| ConfigError(format!("override `{s}` is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key, value))
}

impl ExperimentSpec {
    pub fn parse(command: Command, file: Option<&str>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for k in KEYS {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), d());
            }
        }
        if let Some(text) = file {
            let table: toml::Table =
                text.parse().map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;
            for (section, body) in table {
                let Value::Table(body) = body else {
                    return err(format!(
                        "top-level key `{section}` must sit under a [section] header{}",
                        suggest(&section)
                    ));
                };
                for (key, v) in body {
                    let name = format!("{section}.{key}");
                    let d = def(&name)?;
                    values.insert(name.clone(), coerce(&name, d.ty, v)?);
                }
            }
        }
        for o in overrides {
            let (name, v) = parse_override(o)?;
            let d = def(&name)?;
            values.insert(name.clone(), coerce(&name, d.ty, v)?);
        }
        let spec = ExperimentSpec { command, values, overrides: overrides.to_vec() };
        spec.check_required()?;
        spec.check_choices()?;
        Ok(spec)
    }

    fn has(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_float)
    }

    pub fn usize(&self, name: &str) -> Option<usize> {
        self.values.get(name).and_then(Value::as_integer).map(|i| i as usize)
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.values.get(name).and_then(Value::as_bool)
    }

    pub fn str(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(Value::as_str)
    }

    pub fn list(&self, name: &str) -> Option<Vec<f64>> {
        self.values.get(name).and_then(Value::as_array).map(|a| a.iter().filter_map(Value::as_float).collect())
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.values.insert(name.to_string(), v);
    }

    pub fn remove(&mut self, name: &str) {
        self.values.remove(name);
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str("output.dir").unwrap_or("nsk-out"))
    }

    /// Missing keys for the command, all reported at once.
    fn check_required(&self) -> Result<(), ConfigError> {
        let mut need: Vec<&str> = Vec::new();
        let physics = self.command != Command::Verify;
        let sub = if self.command == Command::Sweep { self.str("sweep.command").unwrap_or("growth") } else { "" };
        let sim = matches!(self.command, Command::Simulate | Command::Escape) || sub == "simulate";
        if physics {
            need.extend(["slab.g", "slab.mu"]);
            let kappa_swept = self.command == Command::Sweep && self.str("sweep.parameter") == Some("kappa");
            let kappa_given = self.has("slab.kappa") || self.has("slab.kappa_factor");
            if self.command != Command::Threshold && sub != "threshold" && !kappa_swept && !kappa_given {
                need.push("slab.kappa");
            }
            need.push("profile.kind");
            match self.str("profile.kind") {
                Some("linear") => need.extend(["profile.rho0", "profile.slope"]),
                Some("tanh_layer") => need.extend(["profile.base", "profile.amp", "profile.width", "profile.center"]),
                Some("cosine") | Some("sin_squared") => need.extend(["profile.base", "profile.amp"]),
                Some("polynomial") => need.push("profile.coeffs"),
                Some("file") => need.push("profile.path"),
                _ => {}
            }
        }
        if sim {
            need.extend(["run.nx", "run.ny", "run.t_end", "run.init"]);
            match self.str("run.init") {
                Some("file") => need.push("run.init_path"),
                Some(_) if self.command != Command::Escape => need.push("run.delta"),
                _ => {}
            }
        }
        if self.command == Command::Sweep {
            need.extend(["sweep.parameter", "sweep.values"]);
        }
        if self.command == Command::Escape {
            need.extend(["escape.deltas", "escape.eps"]);
        }
        let missing: Vec<&str> = need.into_iter().filter(|k| !self.has(k)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            err(format!("{}: missing required keys: {}", self.command.name(), missing.join(", ")))
        }
    }

    fn check_choices(&self) -> Result<(), ConfigError> {
        let choice = |name: &str, allowed: &[&str]| -> Result<(), ConfigError> {
            match self.str(name) {
                Some(v) if !allowed.contains(&v) => {
                    let hint = allowed.iter().map(|a| (strsim::jaro_winkler(v, a), *a)).fold((0.0, ""), |a, b| {
                        if b.0 > a.0 {
                            b
                        } else {
                            a
                        }
                    });
                    let hint = if hint.0 >= 0.8 { format!("; did you mean `{}`?", hint.1) } else { String::new() };
                    err(format!("`{name}` must be one of {}, found `{v}`{hint}", allowed.join(", ")))
                }
                _ => Ok(()),
            }
        };
        choice("profile.kind", &["linear", "tanh_layer", "cosine", "sin_squared", "polynomial", "file"])?;
        choice("run.init", &["eigenfunction", "random_smooth", "file"])?;
        choice("run.rho_wall", &["odd", "even"])?;
        choice("sweep.parameter", &SWEEP_PARAMETERS)?;
        choice("sweep.command", &["threshold", "growth", "simulate"])?;
        if self.command == Command::Sweep {
            let p = self.str("sweep.parameter").unwrap_or_default();
            let sub = self.str("sweep.command").unwrap_or_default();
            if p == "delta" && sub != "simulate" {
                return err("sweeping `delta` needs `sweep.command = \"simulate\"`");
            }
            if self.bool("sweep.relative") == Some(true) && p != "kappa" {
                return err("`sweep.relative` only applies to the `kappa` axis");
            }
            if self.list("sweep.values").is_some_and(|v| v.is_empty()) {
                return err("`sweep.values` is empty");
            }
        }
        if self.has("slab.kappa") && self.has("slab.kappa_factor") {
            return err("set either `slab.kappa` or `slab.kappa_factor`, not both");
        }
        Ok(())
    }

    /// Resolved keys as JSON, for the run summary.
    pub fn to_json(&self) -> serde_json::Value {
        let mut root = serde_json::Map::new();
        for (name, v) in &self.values {
            let (section, key) = name.split_once('.').expect("qualified key");
            let entry =
                root.entry(section.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
            entry
                .as_object_mut()
                .expect("section object")
                .insert(key.to_string(), serde_json::to_value(v).expect("toml value is json-representable"));
        }
        serde_json::Value::Object(root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = "[slab]\ng = 1\nmu = 0.1\n[profile]\nkind = \"linear\"\nrho0 = 1.0\nslope = 1.0\n";

    #[test]
    fn defaults_and_file_values() {
        let s = ExperimentSpec::parse(Command::Threshold, Some(LINEAR), &[]).unwrap();
        assert_eq!(s.f64("slab.g"), Some(1.0));
        assert_eq!(s.f64("slab.L"), Some(1.0));
        assert_eq!(s.usize("profile.n"), Some(256));
    }

    #[test]
    fn override_wins_and_is_typed() {
        let s = ExperimentSpec::parse(Command::Threshold, Some(LINEAR), &["slab.g=2.5".into(), "profile.n=64".into()])
            .unwrap();
        assert_eq!(s.f64("slab.g"), Some(2.5));
        assert_eq!(s.usize("profile.n"), Some(64));
        let bad = ExperimentSpec::parse(Command::Threshold, Some(LINEAR), &["profile.n=abc".into()]).unwrap_err();
        assert!(bad.0.contains("profile.n") && bad.0.contains("integer"), "{bad}");
    }

    #[test]
    fn misspelled_key_gets_a_suggestion() {
        let e = ExperimentSpec::parse(Command::Growth, Some(LINEAR), &["slab.kapa=0.01".into()]).unwrap_err();
        assert!(e.0.contains("did you mean `slab.kappa`"), "{e}");
        let e = ExperimentSpec::parse(Command::Growth, Some("[slab]\nkapa = 0.1\n"), &[]).unwrap_err();
        assert!(e.0.contains("slab.kappa"), "{e}");
    }

    #[test]
    fn empty_simulate_lists_required_keys() {
        let e = ExperimentSpec::parse(Command::Simulate, None, &[]).unwrap_err();
        for k in ["slab.g", "slab.mu", "slab.kappa", "profile.kind", "run.nx", "run.ny", "run.t_end", "run.init"] {
            assert!(e.0.contains(k), "{k} missing from: {e}");
        }
    }

    #[test]
    fn bare_strings_are_accepted_in_overrides() {
        assert_eq!(parse_override("profile.kind=linear").unwrap().1, Value::String("linear".into()));
        assert_eq!(parse_override("sweep.values=[0.8, 1.2]").unwrap().1.as_array().unwrap().len(), 2);
    }

    #[test]
    fn sweep_axis_is_validated() {
        let e = ExperimentSpec::parse(
            Command::Sweep,
            Some(LINEAR),
            &["slab.kappa=0".into(), "sweep.parameter=h".into(), "sweep.values=[1]".into()],
        )
        .unwrap_err();
        assert!(e.0.contains("sweep.parameter"), "{e}");
    }
}
