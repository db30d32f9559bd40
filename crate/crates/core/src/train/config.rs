use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lfcf::LfcfConfig;

/// Training hyperparameters. Learning rates follow the usual per-group
/// split; the position rate is multiplied by the scene extent and decays
/// exponentially to `lr_position_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: u64,
    pub densify_from: u64,
    /// End of the densification window; `None` means 60% of `iterations`.
    pub densify_until: Option<u64>,
    pub densify_interval: u64,
    pub densify_grad_threshold: f64,
    /// Clone/split boundary as a fraction of the scene extent.
    pub densify_size_fraction: f64,
    pub opacity_prune: f64,
    pub max_gaussians: usize,
    pub lr_position: f64,
    pub lr_position_final: f64,
    pub lr_sh: f64,
    pub lr_opacity: f64,
    pub lr_scale: f64,
    pub lr_rotation: f64,
    pub ssim_weight: f64,
    pub seed: u64,
    pub sh_degree: u8,
    pub init_opacity: f64,
    pub lowpass_baseline: bool,
    pub lowpass_kappa: f64,
    pub lfcf: LfcfConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 7000,
            densify_from: 500,
            densify_until: None,
            densify_interval: 100,
            densify_grad_threshold: 2e-4,
            densify_size_fraction: 0.01,
            opacity_prune: 0.005,
            max_gaussians: 200_000,
            lr_position: 1.6e-4,
            lr_position_final: 1.6e-6,
            lr_sh: 0.0025,
            lr_opacity: 0.05,
            lr_scale: 0.005,
            lr_rotation: 0.001,
            ssim_weight: 0.2,
            seed: 0,
            sh_degree: 0,
            init_opacity: 0.1,
            lowpass_baseline: false,
            lowpass_kappa: 0.2,
            lfcf: LfcfConfig::default(),
        }
    }
}

/// Value type of a configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Int,
    Float,
    Bool,
}

impl KeyKind {
    pub fn describe(self) -> &'static str {
        match self {
            KeyKind::Int => "a non-negative integer",
            KeyKind::Float => "a number",
            KeyKind::Bool => "a boolean",
        }
    }
}

/// One documented configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: KeyKind,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: KeyKind, help: &'static str) -> KeySpec {
    KeySpec { name, kind, help }
}

/// Every accepted key, in documentation order.
pub const CONFIG_KEYS: &[KeySpec] = &[
    key("iterations", KeyKind::Int, "optimization steps"),
    key("densify_from", KeyKind::Int, "first densification iteration"),
    key("densify_until", KeyKind::Int, "end of the densification window (default 0.6 x iterations)"),
    key("densify_interval", KeyKind::Int, "iterations between densification rounds"),
    key("densify_grad_threshold", KeyKind::Float, "averaged screen-space gradient that triggers clone/split"),
    key("densify_size_fraction", KeyKind::Float, "clone if max scale <= this fraction of the scene extent, else split"),
    key("opacity_prune", KeyKind::Float, "prune Gaussians below this opacity"),
    key("max_gaussians", KeyKind::Int, "hard cap on the number of Gaussians"),
    key("lr_position", KeyKind::Float, "initial position learning rate (times scene extent)"),
    key("lr_position_final", KeyKind::Float, "final position learning rate (times scene extent)"),
    key("lr_sh", KeyKind::Float, "color learning rate (degree-1 terms use 1/20 of it)"),
    key("lr_opacity", KeyKind::Float, "opacity logit learning rate"),
    key("lr_scale", KeyKind::Float, "log-scale learning rate"),
    key("lr_rotation", KeyKind::Float, "quaternion learning rate"),
    key("ssim_weight", KeyKind::Float, "weight of the (1 - SSIM) loss term"),
    key("seed", KeyKind::Int, "training seed (camera order, splits)"),
    key("sh_degree", KeyKind::Int, "spherical harmonics degree, 0 or 1"),
    key("init_opacity", KeyKind::Float, "opacity of Gaussians created from init points"),
    key("lowpass_baseline", KeyKind::Bool, "render with the fixed 3D low-pass filter"),
    key("lowpass_kappa", KeyKind::Float, "low-pass filter strength"),
    key("lfcf", KeyKind::Bool, "enable LFCF densification"),
    key("lfcf_tau", KeyKind::Float, "LFCF gradient threshold"),
    key("lfcf_epsilon", KeyKind::Float, "LFCF opacity threshold"),
    key("c_max", KeyKind::Float, "largest enlarging factor"),
    key("c_min", KeyKind::Float, "smallest enlarging factor"),
    key("c_end", KeyKind::Float, "annealing target factor"),
    key("r", KeyKind::Int, "run LFCF every r densification rounds"),
    key("anneal_n", KeyKind::Float, "annealing decay exponent"),
    key("strategy_depth", KeyKind::Bool, "interpolate factors by sampling rate"),
    key("strategy_scale", KeyKind::Bool, "volume-preserving axis assignment"),
    key("strategy_cadence", KeyKind::Bool, "honor r (off: every round)"),
    key("strategy_anneal", KeyKind::Bool, "anneal factors over the window"),
    key("strategy_probabilistic", KeyKind::Bool, "split shrunk Gaussians with probability 1 - theta"),
    key("anneal_literal", KeyKind::Bool, "use the rising exp(ln(c) x^n) schedule"),
    key("lfcf_replaces_densify", KeyKind::Bool, "on LFCF rounds skip the standard clone/split"),
    key("lfcf_seed", KeyKind::Int, "seed for LFCF split decisions"),
];

pub fn key_spec(name: &str) -> Option<&'static KeySpec> {
    CONFIG_KEYS.iter().find(|k| k.name == name)
}

/// A typed configuration value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigValue {
    Int(u64),
    Float(f64),
    Bool(bool),
}

impl ConfigValue {
    fn from_toml(key: &str, kind: KeyKind, v: &toml::Value) -> Result<Self> {
        let mismatch = || Error::ConfigType {
            key: key.to_string(),
            expected: kind.describe(),
            found: v.to_string(),
        };
        match (kind, v) {
            (KeyKind::Int, toml::Value::Integer(i)) => u64::try_from(*i).map(ConfigValue::Int).map_err(|_| mismatch()),
            (KeyKind::Float, toml::Value::Float(f)) => Ok(ConfigValue::Float(*f)),
            (KeyKind::Float, toml::Value::Integer(i)) => Ok(ConfigValue::Float(*i as f64)),
            (KeyKind::Bool, toml::Value::Boolean(b)) => Ok(ConfigValue::Bool(*b)),
            _ => Err(mismatch()),
        }
    }

    /// Parses a command-line string. Booleans accept true/false/on/off/1/0.
    pub fn parse(key: &str, kind: KeyKind, s: &str) -> Result<Self> {
        let mismatch = || Error::ConfigType {
            key: key.to_string(),
            expected: kind.describe(),
            found: s.to_string(),
        };
        let t = s.trim();
        match kind {
            KeyKind::Int => t.parse().map(ConfigValue::Int).map_err(|_| mismatch()),
            KeyKind::Float => t
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(ConfigValue::Float)
                .ok_or_else(mismatch),
            KeyKind::Bool => match t.to_ascii_lowercase().as_str() {
                "true" | "on" | "1" | "yes" => Ok(ConfigValue::Bool(true)),
                "false" | "off" | "0" | "no" => Ok(ConfigValue::Bool(false)),
                _ => Err(mismatch()),
            },
        }
    }
}

impl TrainConfig {
    /// Parses flat `key = value` text. Unknown keys are reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::format(format!("config: {}", e.message())))?;
        let unknown: Vec<String> = table.keys().filter(|k| key_spec(k).is_none()).cloned().collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let mut cfg = Self::default();
        for spec in CONFIG_KEYS {
            if let Some(v) = table.get(spec.name) {
                cfg.set(spec.name, ConfigValue::from_toml(spec.name, spec.kind, v)?)?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Applies `key=value` string overrides on top of the current values.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let mut unknown = Vec::new();
        let mut parsed = Vec::new();
        for (k, v) in overrides {
            match key_spec(k) {
                Some(spec) => parsed.push((spec.name, ConfigValue::parse(k, spec.kind, v)?)),
                None => unknown.push(k.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        for (k, v) in parsed {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: ConfigValue) -> Result<()> {
        let spec = key_spec(key).ok_or_else(|| Error::UnknownKeys(vec![key.to_string()]))?;
        let mismatch = || Error::ConfigType {
            key: key.to_string(),
            expected: spec.kind.describe(),
            found: format!("{value:?}"),
        };
        let int = || match value {
            ConfigValue::Int(i) => Ok(i),
            _ => Err(mismatch()),
        };
        let float = || match value {
            ConfigValue::Float(f) => Ok(f),
            ConfigValue::Int(i) => Ok(i as f64),
            _ => Err(mismatch()),
        };
        let boolean = || match value {
            ConfigValue::Bool(b) => Ok(b),
            _ => Err(mismatch()),
        };
        match key {
            "iterations" => self.iterations = int()?,
            "densify_from" => self.densify_from = int()?,
            "densify_until" => self.densify_until = Some(int()?),
            "densify_interval" => self.densify_interval = int()?,
            "densify_grad_threshold" => self.densify_grad_threshold = float()?,
            "densify_size_fraction" => self.densify_size_fraction = float()?,
            "opacity_prune" => self.opacity_prune = float()?,
            "max_gaussians" => self.max_gaussians = int()? as usize,
            "lr_position" => self.lr_position = float()?,
            "lr_position_final" => self.lr_position_final = float()?,
            "lr_sh" => self.lr_sh = float()?,
            "lr_opacity" => self.lr_opacity = float()?,
            "lr_scale" => self.lr_scale = float()?,
            "lr_rotation" => self.lr_rotation = float()?,
            "ssim_weight" => self.ssim_weight = float()?,
            "seed" => self.seed = int()?,
            "sh_degree" => self.sh_degree = u8::try_from(int()?).map_err(|_| mismatch())?,
            "init_opacity" => self.init_opacity = float()?,
            "lowpass_baseline" => self.lowpass_baseline = boolean()?,
            "lowpass_kappa" => self.lowpass_kappa = float()?,
            "lfcf" => self.lfcf.enabled = boolean()?,
            "lfcf_tau" => self.lfcf.tau = float()?,
            "lfcf_epsilon" => self.lfcf.epsilon = float()?,
            "c_max" => self.lfcf.c_max = float()?,
            "c_min" => self.lfcf.c_min = float()?,
            "c_end" => self.lfcf.c_end = float()?,
            "r" => self.lfcf.r = u32::try_from(int()?).map_err(|_| mismatch())?,
            "anneal_n" => self.lfcf.anneal_n = float()?,
            "strategy_depth" => self.lfcf.depth_strategy = boolean()?,
            "strategy_scale" => self.lfcf.scale_strategy = boolean()?,
            "strategy_cadence" => self.lfcf.cadence_strategy = boolean()?,
            "strategy_anneal" => self.lfcf.anneal_strategy = boolean()?,
            "strategy_probabilistic" => self.lfcf.probabilistic_strategy = boolean()?,
            "anneal_literal" => self.lfcf.anneal_literal = boolean()?,
            "lfcf_replaces_densify" => self.lfcf.replaces_densify = boolean()?,
            "lfcf_seed" => self.lfcf.seed = int()?,
            _ => unreachable!("key table and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Current value of a key, formatted as config text.
    pub fn get(&self, key: &str) -> Option<String> {
        let l = &self.lfcf;
        let f = |v: f64| format!("{v:?}");
        Some(match key {
            "iterations" => self.iterations.to_string(),
            "densify_from" => self.densify_from.to_string(),
            "densify_until" => self.densify_until().to_string(),
            "densify_interval" => self.densify_interval.to_string(),
            "densify_grad_threshold" => f(self.densify_grad_threshold),
            "densify_size_fraction" => f(self.densify_size_fraction),
            "opacity_prune" => f(self.opacity_prune),
            "max_gaussians" => self.max_gaussians.to_string(),
            "lr_position" => f(self.lr_position),
            "lr_position_final" => f(self.lr_position_final),
            "lr_sh" => f(self.lr_sh),
            "lr_opacity" => f(self.lr_opacity),
            "lr_scale" => f(self.lr_scale),
            "lr_rotation" => f(self.lr_rotation),
            "ssim_weight" => f(self.ssim_weight),
            "seed" => self.seed.to_string(),
            "sh_degree" => self.sh_degree.to_string(),
            "init_opacity" => f(self.init_opacity),
            "lowpass_baseline" => self.lowpass_baseline.to_string(),
            "lowpass_kappa" => f(self.lowpass_kappa),
            "lfcf" => l.enabled.to_string(),
            "lfcf_tau" => f(l.tau),
            "lfcf_epsilon" => f(l.epsilon),
            "c_max" => f(l.c_max),
            "c_min" => f(l.c_min),
            "c_end" => f(l.c_end),
            "r" => l.r.to_string(),
            "anneal_n" => f(l.anneal_n),
            "strategy_depth" => l.depth_strategy.to_string(),
            "strategy_scale" => l.scale_strategy.to_string(),
            "strategy_cadence" => l.cadence_strategy.to_string(),
            "strategy_anneal" => l.anneal_strategy.to_string(),
            "strategy_probabilistic" => l.probabilistic_strategy.to_string(),
            "anneal_literal" => l.anneal_literal.to_string(),
            "lfcf_replaces_densify" => l.replaces_densify.to_string(),
            "lfcf_seed" => l.seed.to_string(),
            _ => return None,
        })
    }

    /// Resolved end of the densification window.
    pub fn densify_until(&self) -> u64 {
        self.densify_until.unwrap_or(self.iterations * 6 / 10)
    }

    /// Full config as `key = value` lines, in table order.
    pub fn to_toml_string(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{} = {}\n", k.name, self.get(k.name).unwrap()))
            .collect()
    }

    /// Hex SHA-256 over the keys that can influence training. LFCF keys
    /// are skipped when LFCF is off, and the low-pass strength when the
    /// filter is off.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for k in CONFIG_KEYS {
            let lfcf_key = matches!(
                k.name,
                "lfcf_tau"
                    | "lfcf_epsilon"
                    | "c_max"
                    | "c_min"
                    | "c_end"
                    | "r"
                    | "anneal_n"
                    | "strategy_depth"
                    | "strategy_scale"
                    | "strategy_cadence"
                    | "strategy_anneal"
                    | "strategy_probabilistic"
                    | "anneal_literal"
                    | "lfcf_replaces_densify"
                    | "lfcf_seed"
            );
            if (lfcf_key && !self.lfcf.enabled) || (k.name == "lowpass_kappa" && !self.lowpass_baseline) {
                continue;
            }
            h.update(format!("{}={}\n", k.name, self.get(k.name).unwrap()).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let until = self.densify_until();
        if self.iterations > 0 && self.densify_from >= until {
            return Err(Error::param(format!(
                "densify_from ({}) must be below densify_until ({until})",
                self.densify_from
            )));
        }
        if until > self.iterations {
            return Err(Error::param(format!(
                "densify_until ({until}) exceeds iterations ({})",
                self.iterations
            )));
        }
        if self.densify_interval == 0 {
            return Err(Error::param("densify_interval must be positive"));
        }
        if !(0.0..=1.0).contains(&self.ssim_weight) {
            return Err(Error::param(format!("ssim_weight must lie in [0, 1], got {}", self.ssim_weight)));
        }
        if self.sh_degree > 1 {
            return Err(Error::param(format!("sh_degree must be 0 or 1, got {}", self.sh_degree)));
        }
        if !(self.init_opacity > 0.0 && self.init_opacity < 1.0) {
            return Err(Error::param(format!("init_opacity must lie in (0, 1), got {}", self.init_opacity)));
        }
        for (name, v) in [
            ("lr_position", self.lr_position),
            ("lr_position_final", self.lr_position_final),
            ("lr_sh", self.lr_sh),
            ("lr_opacity", self.lr_opacity),
            ("lr_scale", self.lr_scale),
            ("lr_rotation", self.lr_rotation),
            ("lowpass_kappa", self.lowpass_kappa),
            ("densify_grad_threshold", self.densify_grad_threshold),
            ("densify_size_fraction", self.densify_size_fraction),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.opacity_prune >= 0.0 && self.opacity_prune < 1.0) {
            return Err(Error::param(format!("opacity_prune must lie in [0, 1), got {}", self.opacity_prune)));
        }
        self.lfcf.validate()
    }
}
