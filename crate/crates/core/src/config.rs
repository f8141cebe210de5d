//! Scenario configuration: a flat `key = value` text format with `#` comments.
//!
//! Every key is optional; missing keys take the built-in scenario defaults.
//! Unknown or repeated keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::predictor::TrainingConfig;
use crate::species::{PerSpecies, Species};
use crate::weather::WeatherState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{key}`: cannot parse `{value}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("`{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read scenario {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    // Polluting activities and policy
    pub controlled_per_species: usize,
    /// g/h
    pub max_emission_rate: f64,
    pub uncontrolled_per_species: usize,
    /// g/h
    pub max_uncontrolled_rate: f64,
    /// µg/m³
    pub goals: PerSpecies<f64>,
    pub memory_steps: usize,
    pub initial_coop_fraction: f64,
    /// Fraction of the max rate a source emits after a reduce command.
    pub reduced_rate_fraction: f64,

    // Environment
    pub boxes: usize,
    pub initial_weather: WeatherState,
    /// Additive per-species background, µg/m³.
    pub background: PerSpecies<f64>,
    pub initial_air_quality: u8,
    pub total_hours: u32,
    pub hours_per_step: u32,
    pub prediction_horizon_hours: u32,

    // Geometry (m). Wind blows along +x; boxes tile [0, domain_length).
    pub domain_length: f64,
    pub source_halfwidth: f64,
    pub stack_height: f64,
    pub leak_zone_start: f64,
    pub leak_zone_end: f64,
    pub leak_halfwidth: f64,
    pub leak_height: f64,

    pub training: TrainingConfig,

    // Run
    pub seed: u64,
    pub cooperation: bool,
    pub leaks: bool,
    pub output_dir: PathBuf,
    pub weather_series: Option<PathBuf>,
    pub predictor_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            controlled_per_species: 80,
            max_emission_rate: 2000.0,
            uncontrolled_per_species: 5,
            max_uncontrolled_rate: 5000.0,
            goals: PerSpecies([70.0, 50.0, 60.0]),
            memory_steps: 4,
            initial_coop_fraction: 0.5,
            reduced_rate_fraction: 0.25,
            boxes: 20,
            initial_weather: WeatherState { wind_speed: 2.4, temperature: 12.7, humidity: 71.0, rainfall: 0.0 },
            background: PerSpecies([13.0, 0.0, 0.0]),
            initial_air_quality: 2,
            total_hours: 4900,
            hours_per_step: 2,
            prediction_horizon_hours: 2,
            domain_length: 10_000.0,
            source_halfwidth: 800.0,
            stack_height: 20.0,
            leak_zone_start: 0.0,
            leak_zone_end: 6_000.0,
            leak_halfwidth: 150.0,
            leak_height: 2.0,
            training: TrainingConfig::default(),
            seed: 1,
            cooperation: true,
            leaks: true,
            output_dir: PathBuf::from("out"),
            weather_series: None,
            predictor_dir: None,
        }
    }
}

fn on_off(b: bool) -> &'static str {
    if b { "on" } else { "off" }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn total_steps(&self) -> usize {
        (self.total_hours / self.hours_per_step) as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &'static str, message: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid { field, message: message.into() })
        }
        for (s, key) in [(Species::Pm10, "goal_pm10"), (Species::Nox, "goal_nox"), (Species::Sox, "goal_sox")] {
            if !(self.goals[s] > 0.0) || !self.goals[s].is_finite() {
                return bad(key, "goal must be > 0");
            }
        }
        for (s, key) in [(Species::Pm10, "initial_pm10"), (Species::Nox, "initial_nox"), (Species::Sox, "initial_sox")] {
            if !(self.background[s] >= 0.0) || !self.background[s].is_finite() {
                return bad(key, "background must be >= 0");
            }
        }
        for (field, v) in [("max_emission_rate", self.max_emission_rate), ("max_uncontrolled_rate", self.max_uncontrolled_rate)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(field, "rate must be >= 0");
            }
        }
        if !(0.0..=1.0).contains(&self.initial_coop_fraction) {
            return bad("initial_coop_fraction", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.reduced_rate_fraction) {
            return bad("reduced_rate_fraction", "must be in [0, 1]");
        }
        if self.memory_steps == 0 {
            return bad("memory_steps", "must be >= 1");
        }
        if self.boxes == 0 {
            return bad("boxes", "must be >= 1");
        }
        let w = &self.initial_weather;
        if !(w.wind_speed > 0.0) || !w.wind_speed.is_finite() {
            return bad("initial_wind_speed", "must be > 0");
        }
        if !(0.0..=100.0).contains(&w.humidity) {
            return bad("initial_humidity", "must be in [0, 100]");
        }
        if !w.temperature.is_finite() {
            return bad("initial_temperature", "must be finite");
        }
        if !(w.rainfall >= 0.0) || !w.rainfall.is_finite() {
            return bad("initial_rainfall", "must be >= 0");
        }
        if !(1..=5).contains(&self.initial_air_quality) {
            return bad("initial_air_quality", "must be in 1..=5");
        }
        if self.hours_per_step == 0 {
            return bad("hours_per_step", "must be >= 1");
        }
        if self.total_hours == 0 || !self.total_hours.is_multiple_of(self.hours_per_step) {
            return bad("total_hours", format!("must be a positive multiple of hours_per_step ({})", self.hours_per_step));
        }
        if self.prediction_horizon_hours != self.hours_per_step {
            return bad("prediction_horizon_hours", "only a one-step horizon is supported (must equal hours_per_step)");
        }
        for (field, v) in [
            ("domain_length", self.domain_length),
            ("source_halfwidth", self.source_halfwidth),
            ("leak_halfwidth", self.leak_halfwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(field, "must be > 0");
            }
        }
        for (field, v) in [("stack_height", self.stack_height), ("leak_height", self.leak_height)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(field, "must be >= 0");
            }
        }
        if !(0.0 <= self.leak_zone_start && self.leak_zone_start < self.leak_zone_end && self.leak_zone_end <= self.domain_length) {
            return bad("leak_zone_start", "need 0 <= leak_zone_start < leak_zone_end <= domain_length");
        }
        let t = &self.training;
        if t.hidden == 0 {
            return bad("predictor_hidden", "must be >= 1");
        }
        if t.epochs == 0 {
            return bad("predictor_epochs", "must be >= 1");
        }
        if t.batch_size == 0 {
            return bad("predictor_batch_size", "must be >= 1");
        }
        if !(t.learning_rate > 0.0) || !t.learning_rate.is_finite() {
            return bad("predictor_learning_rate", "must be > 0");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
            cfg.set(line, key, value)?;
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() };
        let f = || value.parse::<f64>().map_err(|_| bad());
        let u = || value.parse::<usize>().map_err(|_| bad());
        let h = || value.parse::<u32>().map_err(|_| bad());
        let b = || parse_bool(value).ok_or_else(bad);
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "controlled_sources_per_species" => self.controlled_per_species = u()?,
            "max_emission_rate_gph" => self.max_emission_rate = f()?,
            "uncontrolled_sources_per_species" => self.uncontrolled_per_species = u()?,
            "max_uncontrolled_rate_gph" => self.max_uncontrolled_rate = f()?,
            "goal_pm10" => self.goals[Species::Pm10] = f()?,
            "goal_nox" => self.goals[Species::Nox] = f()?,
            "goal_sox" => self.goals[Species::Sox] = f()?,
            "memory_steps" => self.memory_steps = u()?,
            "initial_coop_fraction" => self.initial_coop_fraction = f()?,
            "reduced_rate_fraction" => self.reduced_rate_fraction = f()?,
            "boxes" => self.boxes = u()?,
            "initial_temperature" => self.initial_weather.temperature = f()?,
            "initial_humidity" => self.initial_weather.humidity = f()?,
            "initial_wind_speed" => self.initial_weather.wind_speed = f()?,
            "initial_rainfall" => self.initial_weather.rainfall = f()?,
            "initial_pm10" => self.background[Species::Pm10] = f()?,
            "initial_nox" => self.background[Species::Nox] = f()?,
            "initial_sox" => self.background[Species::Sox] = f()?,
            "initial_air_quality" => self.initial_air_quality = value.parse().map_err(|_| bad())?,
            "total_hours" => self.total_hours = h()?,
            "hours_per_step" => self.hours_per_step = h()?,
            "prediction_horizon_hours" => self.prediction_horizon_hours = h()?,
            "domain_length" => self.domain_length = f()?,
            "source_halfwidth" => self.source_halfwidth = f()?,
            "stack_height" => self.stack_height = f()?,
            "leak_zone_start" => self.leak_zone_start = f()?,
            "leak_zone_end" => self.leak_zone_end = f()?,
            "leak_halfwidth" => self.leak_halfwidth = f()?,
            "leak_height" => self.leak_height = f()?,
            "predictor_hidden" => self.training.hidden = u()?,
            "predictor_epochs" => self.training.epochs = u()?,
            "predictor_learning_rate" => self.training.learning_rate = f()?,
            "predictor_batch_size" => self.training.batch_size = u()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "cooperation" => self.cooperation = b()?,
            "leaks" => self.leaks = b()?,
            "output_dir" => self.output_dir = path().ok_or_else(bad)?,
            "weather_series" => self.weather_series = path(),
            "predictor_dir" => self.predictor_dir = path(),
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Serializes every key; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &self.initial_weather;
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        macro_rules! kv {
            ($k:expr, $v:expr) => {
                writeln!(s, "{} = {}", $k, $v).unwrap()
            };
        }
        s.push_str("# Polluting activities and policy\n");
        kv!("controlled_sources_per_species", self.controlled_per_species);
        kv!("max_emission_rate_gph", self.max_emission_rate);
        kv!("uncontrolled_sources_per_species", self.uncontrolled_per_species);
        kv!("max_uncontrolled_rate_gph", self.max_uncontrolled_rate);
        kv!("goal_pm10", self.goals[Species::Pm10]);
        kv!("goal_sox", self.goals[Species::Sox]);
        kv!("goal_nox", self.goals[Species::Nox]);
        kv!("memory_steps", self.memory_steps);
        kv!("initial_coop_fraction", self.initial_coop_fraction);
        kv!("reduced_rate_fraction", self.reduced_rate_fraction);
        s.push_str("\n# Environment\n");
        kv!("boxes", self.boxes);
        kv!("initial_temperature", w.temperature);
        kv!("initial_humidity", w.humidity);
        kv!("initial_wind_speed", w.wind_speed);
        kv!("initial_rainfall", w.rainfall);
        kv!("initial_pm10", self.background[Species::Pm10]);
        kv!("initial_nox", self.background[Species::Nox]);
        kv!("initial_sox", self.background[Species::Sox]);
        kv!("initial_air_quality", self.initial_air_quality);
        kv!("total_hours", self.total_hours);
        kv!("hours_per_step", self.hours_per_step);
        kv!("prediction_horizon_hours", self.prediction_horizon_hours);
        s.push_str("\n# Geometry (metres, wind along +x)\n");
        kv!("domain_length", self.domain_length);
        kv!("source_halfwidth", self.source_halfwidth);
        kv!("stack_height", self.stack_height);
        kv!("leak_zone_start", self.leak_zone_start);
        kv!("leak_zone_end", self.leak_zone_end);
        kv!("leak_halfwidth", self.leak_halfwidth);
        kv!("leak_height", self.leak_height);
        s.push_str("\n# Forecaster training\n");
        kv!("predictor_hidden", self.training.hidden);
        kv!("predictor_epochs", self.training.epochs);
        kv!("predictor_learning_rate", self.training.learning_rate);
        kv!("predictor_batch_size", self.training.batch_size);
        s.push_str("\n# Run\n");
        kv!("seed", self.seed);
        kv!("cooperation", on_off(self.cooperation));
        kv!("leaks", on_off(self.leaks));
        kv!("output_dir", self.output_dir.display());
        kv!("weather_series", opt(&self.weather_series));
        kv!("predictor_dir", opt(&self.predictor_dir));
        s
    }
}
