//! Run configuration: TOML text, presets, validation.
//!
//! A file names a `preset` (default `theorem-quick`) and overrides any of its
//! keys. Sections are merged key by key, except `[targets]`, which is
//! replaced as a whole, and `[coefficients]`, which is replaced as a whole
//! when it sets `kind`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, Model, ModelParams, ProfileSpec, WaveSource, TENSOR_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Theorem,
    TheoremQuick,
    Linear,
    LinearQuick,
    ContrastBlowup,
    Mms,
    Identities,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Theorem,
        Preset::TheoremQuick,
        Preset::Linear,
        Preset::LinearQuick,
        Preset::ContrastBlowup,
        Preset::Mms,
        Preset::Identities,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Theorem => "theorem",
            Preset::TheoremQuick => "theorem-quick",
            Preset::Linear => "linear",
            Preset::LinearQuick => "linear-quick",
            Preset::ContrastBlowup => "contrast-blowup",
            Preset::Mms => "mms",
            Preset::Identities => "identities",
        }
    }

    /// Whether the preset evolves the model with slice diagnostics.
    pub fn is_evolution(&self) -> bool {
        !matches!(self, Preset::Mms | Preset::Identities)
    }

    pub fn config(&self) -> RunConfig {
        let mut c = RunConfig::base(*self);
        match self {
            Preset::Theorem => {
                c.grid.h = 0.05;
                c.grid.t_final = 64.0;
                c.targets = Targets::Range {
                    start: 2.0,
                    stop: 11.0,
                    step: 0.25,
                };
            }
            Preset::TheoremQuick | Preset::Mms | Preset::Identities => {}
            Preset::Linear => {
                c.coefficients = CoefficientSource::Zero;
                c.grid.h = 0.05;
                c.grid.t_final = 51.0;
                c.targets = Targets::Range {
                    start: 2.0,
                    stop: 10.0,
                    step: 0.25,
                };
            }
            Preset::LinearQuick => {
                c.coefficients = CoefficientSource::Zero;
            }
            Preset::ContrastBlowup => {
                c.wave_source = WaveSource::DtwSquared;
                c.model.epsilon = 0.1;
                c.grid.t_final = 64.0;
                c.targets = Targets::Range {
                    start: 2.0,
                    stop: 11.0,
                    step: 0.25,
                };
            }
        }
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!("unknown preset `{s}` (known: {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSource {
    Zero,
    /// Entries uniform in `[-scale, scale]` from a ChaCha8 stream.
    Random { seed: u64, scale: f64 },
    Explicit(CoefficientSet),
}

impl CoefficientSource {
    pub fn build(&self, p: usize) -> CoefficientSet {
        match self {
            CoefficientSource::Zero => CoefficientSet::zero(p),
            CoefficientSource::Random { seed, scale } => CoefficientSet::random(p, *seed, *scale),
            CoefficientSource::Explicit(c) => c.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    List(Vec<f64>),
    /// `start, start + step, …` up to `stop` inclusive.
    Range { start: f64, stop: f64, step: f64 },
}

impl Targets {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Targets::List(v) => v.clone(),
            Targets::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub t_final: f64,
    pub cfl: f64,
    /// Update only a band around the support.
    pub band: bool,
    pub outer_margin: f64,
    pub inner_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// `δ` in the weighted sup of `|w|` and in `s^{1-δ}`.
    pub delta: f64,
    /// Points where the second-derivative bound is below `theta·max` are ignored.
    pub hessian_theta: f64,
    /// Verdicts use slices with `s ≥ window_start`.
    pub window_start: f64,
    /// Max/min ratio allowed for sup norms and energies.
    pub ratio_threshold: f64,
    /// Max/min ratio allowed for the weighted sup of `|w|`.
    pub weighted_threshold: f64,
    /// Relative slack of the energy inequality monitors.
    pub monitor_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a snapshot every this many steps; 0 disables.
    pub snapshot_every: usize,
    pub final_snapshot: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub model: ModelParams,
    pub wave_source: WaveSource,
    pub coefficients: CoefficientSource,
    pub profile: ProfileSpec,
    pub grid: GridConfig,
    pub targets: Targets,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Preset::TheoremQuick.config()
    }
}

impl RunConfig {
    fn base(preset: Preset) -> Self {
        let model = ModelParams::default();
        Self {
            preset,
            profile: ProfileSpec::default_for(model.p),
            model,
            wave_source: WaveSource::Standard,
            coefficients: CoefficientSource::Random {
                seed: 20_240_611,
                scale: 1.0,
            },
            grid: GridConfig {
                h: 0.1,
                t_final: 32.0,
                cfl: 0.4,
                band: true,
                outer_margin: 1.0,
                inner_margin: 1.0,
            },
            targets: Targets::Range {
                start: 2.0,
                stop: 7.75,
                step: 0.25,
            },
            diagnostics: DiagnosticsConfig {
                delta: 0.05,
                hessian_theta: 1e-3,
                window_start: 3.0,
                ratio_threshold: 1.5,
                weighted_threshold: 2.0,
                monitor_slack: 0.02,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                snapshot_every: 0,
                final_snapshot: false,
            },
            workers: 0,
        }
    }

    pub fn model(&self) -> Model {
        Model::new(
            self.model.clone(),
            self.coefficients.build(self.model.p),
            self.wave_source,
        )
    }

    /// Largest slice fully swept by `t_final`: `√(2·t_final - 1)`.
    pub fn s_coverage(&self) -> f64 {
        (2.0 * self.grid.t_final - 1.0).max(0.0).sqrt()
    }

    /// Coarse grid and short horizon; targets beyond the new coverage are dropped.
    pub fn make_quick(&mut self) {
        self.grid.h = self.grid.h.max(0.1);
        self.grid.t_final = self.grid.t_final.min(32.0);
        let cov = self.s_coverage();
        let kept: Vec<f64> = self
            .targets
            .values()
            .into_iter()
            .filter(|s| *s <= cov)
            .collect();
        self.targets = match &self.targets {
            Targets::Range { start, step, .. } if !kept.is_empty() => Targets::Range {
                start: *start,
                stop: *kept.last().unwrap(),
                step: *step,
            },
            _ => Targets::List(kept),
        };
    }

    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        self.model.validate(&mut e);
        if (1..=crate::model::MAX_COMPONENTS).contains(&self.model.p) {
            self.profile.validate(self.model.p, &mut e);
        }
        let g = &self.grid;
        if !(g.h > 0.0 && g.h <= 1.0) {
            e.push(format!("grid.h = {} must lie in (0, 1]", g.h));
        }
        if !(g.cfl > 0.0 && g.cfl <= 0.5) {
            e.push(format!("grid.cfl = {} must lie in (0, 0.5]", g.cfl));
        }
        if !(g.t_final >= self.model.t0) || !g.t_final.is_finite() {
            e.push(format!(
                "grid.t_final = {} must be at least t0 = {}",
                g.t_final, self.model.t0
            ));
        }
        if !(g.outer_margin >= 0.0) || !(g.inner_margin >= 0.0) {
            e.push("grid margins must be nonnegative".to_string());
        }
        match &self.targets {
            Targets::Range { start, stop, step } => {
                if !(*step > 0.0) {
                    e.push(format!("targets.step = {step} must be positive"));
                }
                if stop < start {
                    e.push(format!("targets.stop = {stop} is below targets.start = {start}"));
                }
            }
            Targets::List(v) => {
                for (k, w) in v.windows(2).enumerate() {
                    if w[1] <= w[0] {
                        e.push(format!("targets.list[{}] = {} is not above its predecessor", k + 1, w[1]));
                    }
                }
            }
        }
        let cov = self.s_coverage();
        for (k, s) in self.targets.values().iter().enumerate() {
            if !(*s >= 2.0) {
                e.push(format!("target #{k} s = {s} is below 2"));
            } else if *s > cov + 1e-12 {
                e.push(format!(
                    "target #{k} s = {s} exceeds the coverage √(2·t_final - 1) = {cov:.4}"
                ));
            }
        }
        let d = &self.diagnostics;
        if !(d.delta > 0.0 && d.delta < 1.0) {
            e.push(format!("diagnostics.delta = {} must lie in (0, 1)", d.delta));
        }
        if !(d.hessian_theta >= 0.0 && d.hessian_theta < 1.0) {
            e.push(format!("diagnostics.hessian_theta = {} must lie in [0, 1)", d.hessian_theta));
        }
        for (name, v) in [
            ("ratio_threshold", d.ratio_threshold),
            ("weighted_threshold", d.weighted_threshold),
        ] {
            if !(v >= 1.0) {
                e.push(format!("diagnostics.{name} = {v} must be at least 1"));
            }
        }
        if !(d.monitor_slack >= 0.0) {
            e.push(format!("diagnostics.monitor_slack = {} must be nonnegative", d.monitor_slack));
        }
        match &self.coefficients {
            CoefficientSource::Random { scale, .. } if !(*scale >= 0.0 && scale.is_finite()) => {
                e.push(format!("coefficients.scale = {scale} must be finite and nonnegative"));
            }
            CoefficientSource::Explicit(c) => {
                if c.p != self.model.p {
                    e.push(format!(
                        "coefficients built for p = {} but model.p = {}",
                        c.p, self.model.p
                    ));
                }
                if !c.is_finite() {
                    e.push("coefficients: entries must be finite".to_string());
                }
            }
            _ => {}
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn to_toml(&self) -> String {
        let raw = RawConfig::from(self);
        toml::to_string(&raw).expect("config serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, None)
    }

    /// Like [`RunConfig::parse`]; `preset`, when given, replaces the file's
    /// `preset` key before merging.
    pub fn parse_with(text: &str, preset: Option<Preset>) -> Result<Self> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Syntax(e.to_string()))?;
        if let Some(p) = preset {
            user.insert("preset".into(), toml::Value::String(p.name().into()));
        }
        let preset = match user.get("preset") {
            None => Preset::TheoremQuick,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(v) => return Err(Error::Syntax(format!("preset must be a string, found {v}"))),
        };
        let mut base = preset.config();
        if let Some(p) = user
            .get("model")
            .and_then(|m| m.get("p"))
            .and_then(|p| p.as_integer())
        {
            if p >= 1 && p as usize != base.model.p {
                base.model.p = p as usize;
                base.profile = ProfileSpec::default_for(p as usize);
            }
        }
        let mut merged: toml::Table = toml::Value::try_from(RawConfig::from(&base))
            .expect("config serializes")
            .as_table()
            .cloned()
            .expect("table");
        for (key, value) in user {
            let replace_whole = key == "targets"
                || (key == "coefficients" && value.get("kind").is_some());
            match (merged.get_mut(&key), value) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if !replace_whole => {
                    for (k, v) in src {
                        dst.insert(k, v);
                    }
                }
                (_, value) => {
                    merged.insert(key, value);
                }
            }
        }
        let raw: RawConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Syntax(e.to_string()))?;
        let config = raw.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: String,
    workers: usize,
    model: RawModel,
    coefficients: RawCoefficients,
    profile: ProfileSpec,
    grid: GridConfig,
    targets: RawTargets,
    diagnostics: DiagnosticsConfig,
    output: OutputConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    p: usize,
    epsilon: f64,
    t0: f64,
    kg_mass: f64,
    wave_source: WaveSource,
}

#[derive(Serialize, Deserialize)]
struct RawCoefficients {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(flatten)]
    tensors: BTreeMap<String, toml::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTargets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
}

impl From<&RunConfig> for RawConfig {
    fn from(c: &RunConfig) -> Self {
        let coefficients = match &c.coefficients {
            CoefficientSource::Zero => RawCoefficients {
                kind: "zero".into(),
                seed: None,
                scale: None,
                tensors: BTreeMap::new(),
            },
            CoefficientSource::Random { seed, scale } => RawCoefficients {
                kind: "random".into(),
                seed: Some(*seed),
                scale: Some(*scale),
                tensors: BTreeMap::new(),
            },
            CoefficientSource::Explicit(set) => RawCoefficients {
                kind: "explicit".into(),
                seed: None,
                scale: None,
                tensors: TENSOR_NAMES
                    .iter()
                    .map(|n| {
                        let shape = CoefficientSet::shape(n, set.p).unwrap();
                        (n.to_string(), nest(set.tensor(n).unwrap(), &shape))
                    })
                    .collect(),
            },
        };
        let targets = match &c.targets {
            Targets::List(v) => RawTargets {
                list: Some(v.clone()),
                start: None,
                stop: None,
                step: None,
            },
            Targets::Range { start, stop, step } => RawTargets {
                list: None,
                start: Some(*start),
                stop: Some(*stop),
                step: Some(*step),
            },
        };
        RawConfig {
            preset: c.preset.name().to_string(),
            workers: c.workers,
            model: RawModel {
                p: c.model.p,
                epsilon: c.model.epsilon,
                t0: c.model.t0,
                kg_mass: c.model.kg_mass,
                wave_source: c.wave_source,
            },
            coefficients,
            profile: c.profile.clone(),
            grid: c.grid.clone(),
            targets,
            diagnostics: c.diagnostics.clone(),
            output: c.output.clone(),
        }
    }
}

impl RawConfig {
    fn into_config(self) -> Result<RunConfig> {
        let mut errors = Vec::new();
        let preset: Preset = self.preset.parse()?;
        let p = self.model.p;
        let coefficients = match self.coefficients.kind.as_str() {
            "zero" | "random" => {
                if let Some(k) = self.coefficients.tensors.keys().next() {
                    errors.push(format!(
                        "coefficients.{k}: tensors are only read when kind = \"explicit\""
                    ));
                }
                if self.coefficients.kind == "zero" {
                    CoefficientSource::Zero
                } else {
                    CoefficientSource::Random {
                        seed: self.coefficients.seed.unwrap_or(0),
                        scale: self.coefficients.scale.unwrap_or(1.0),
                    }
                }
            }
            "explicit" => {
                let mut set = CoefficientSet::zero(p.clamp(1, crate::model::MAX_COMPONENTS));
                for (name, value) in &self.coefficients.tensors {
                    let Some(shape) = CoefficientSet::shape(name, set.p) else {
                        errors.push(format!("coefficients.{name}: unknown tensor"));
                        continue;
                    };
                    let mut flat = Vec::new();
                    let mut path = format!("coefficients.{name}");
                    unnest(value, &shape, &mut path, &mut flat, &mut errors);
                    if flat.len() == set.tensor(name).unwrap().len() {
                        set.tensor_mut(name).unwrap().copy_from_slice(&flat);
                    }
                }
                CoefficientSource::Explicit(set)
            }
            other => {
                errors.push(format!(
                    "coefficients.kind = \"{other}\" (expected zero, random or explicit)"
                ));
                CoefficientSource::Zero
            }
        };
        let t = self.targets;
        let targets = match (t.list, t.start, t.stop, t.step) {
            (Some(list), None, None, None) => Targets::List(list),
            (None, Some(start), Some(stop), Some(step)) => Targets::Range { start, stop, step },
            _ => {
                errors.push("targets: give either `list` or all of `start`, `stop`, `step`".into());
                Targets::List(Vec::new())
            }
        };
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(RunConfig {
            preset,
            model: ModelParams {
                p,
                epsilon: self.model.epsilon,
                t0: self.model.t0,
                kg_mass: self.model.kg_mass,
            },
            wave_source: self.model.wave_source,
            coefficients,
            profile: self.profile,
            grid: self.grid,
            targets,
            diagnostics: self.diagnostics,
            output: self.output,
            workers: self.workers,
        })
    }
}

fn nest(flat: &[f64], shape: &[usize]) -> toml::Value {
    if shape.len() == 1 {
        return toml::Value::Array(flat.iter().map(|v| toml::Value::Float(*v)).collect());
    }
    let stride: usize = shape[1..].iter().product();
    toml::Value::Array(
        (0..shape[0])
            .map(|k| nest(&flat[k * stride..(k + 1) * stride], &shape[1..]))
            .collect(),
    )
}

fn unnest(v: &toml::Value, shape: &[usize], path: &mut String, out: &mut Vec<f64>, errors: &mut Vec<String>) {
    let Some(arr) = v.as_array() else {
        errors.push(format!("{path}: expected an array of {} entries", shape[0]));
        return;
    };
    if arr.len() != shape[0] {
        errors.push(format!("{path}: expected {} entries, found {}", shape[0], arr.len()));
        return;
    }
    for (k, item) in arr.iter().enumerate() {
        let len = path.len();
        path.push_str(&format!("[{k}]"));
        if shape.len() == 1 {
            match item {
                toml::Value::Float(x) => out.push(*x),
                toml::Value::Integer(x) => out.push(*x as f64),
                _ => errors.push(format!("{path}: expected a number")),
            }
        } else {
            unnest(item, &shape[1..], path, out, errors);
        }
        path.truncate(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_quick_theorem_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, Preset::TheoremQuick.config());
        assert_eq!(c.preset, Preset::TheoremQuick);
    }

    #[test]
    fn target_beyond_coverage_is_rejected() {
        let text = "[grid]\nt_final = 32.0\n[targets]\nlist = [3.0, 20.0]\n";
        let err = RunConfig::parse(text).unwrap_err();
        let Error::Config(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("20") && m.contains("7.9373")), "{msgs:?}");
    }

    #[test]
    fn wrong_tensor_extent_reports_index_path() {
        let text = r#"
[coefficients]
kind = "explicit"
A2 = [[[1.0, 2.0], [3.0, 4.0]], [[1.0, 2.0], [3.0, 4.0, 5.0]], [[0.0, 0.0], [0.0, 0.0]]]
B1 = [[1.0, 0.0, 0.0], [0.0, 1.0]]
"#;
        let Error::Config(msgs) = RunConfig::parse(text).unwrap_err() else { panic!() };
        assert!(msgs.contains(&"coefficients.A2[1][1]: expected 2 entries, found 3".to_string()), "{msgs:?}");
        assert!(msgs.contains(&"coefficients.B1: expected 3 entries, found 2".to_string()), "{msgs:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "[model]\nepsilon = -1.0\n[grid]\ncfl = 0.9\nh = 0.0\n";
        let Error::Config(msgs) = RunConfig::parse(text).unwrap_err() else { panic!() };
        assert_eq!(msgs.len(), 3, "{msgs:?}");
    }

    #[test]
    fn malformed_text_is_a_syntax_error() {
        assert!(matches!(RunConfig::parse("[grid\nh = 1"), Err(Error::Syntax(_))));
        assert!(matches!(RunConfig::parse("[grid]\nhh = 1.0"), Err(Error::Syntax(_))));
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for p in Preset::ALL {
            let c = p.config();
            c.validate().unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c, "{p}");
        }
    }

    #[test]
    fn explicit_coefficients_round_trip() {
        let mut c = Preset::LinearQuick.config();
        c.coefficients = CoefficientSource::Explicit(CoefficientSet::random(2, 9, 0.3));
        c.targets = Targets::List(vec![2.0, 2.5, 7.0]);
        c.model.epsilon = 0.123456789012345;
        let text = c.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn changing_p_resizes_default_profile() {
        let c = RunConfig::parse("[model]\np = 3\n").unwrap();
        assert_eq!(c.profile.v0.len(), 3);
        assert_eq!(c.model().coeffs.a[5].len(), 3 * 3 * 27);
    }

    #[test]
    fn quick_clips_targets() {
        let mut c = Preset::Theorem.config();
        c.make_quick();
        assert_eq!(c.grid.h, 0.1);
        assert_eq!(c.grid.t_final, 32.0);
        assert_eq!(*c.targets.values().last().unwrap(), 7.75);
        c.validate().unwrap();
    }

    #[test]
    fn range_targets() {
        let t = Targets::Range {
            start: 2.0,
            stop: 3.0,
            step: 0.25,
        };
        assert_eq!(t.values(), vec![2.0, 2.25, 2.5, 2.75, 3.0]);
    }
}
