//! Per-step weather: wind speed, temperature, humidity and rainfall.
//!
//! Weather either comes from a measured series file or from a seeded
//! synthetic generator whose marginal statistics match a [`WeatherStatsTarget`].

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

/// Wind floor, m/s. Keeps the plume denominator away from zero.
pub const MIN_WIND_SPEED: f64 = 0.1;

/// Lag-one autocorrelation of the synthetic AR(1) processes.
pub const REVERSION: f64 = 0.9;

pub const SERIES_HEADER: [&str; 4] = ["wind_speed", "temperature", "humidity", "rainfall"];

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("cannot read weather series {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("weather series line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("weather series has {available} rows but {required} are needed")]
    TooShort { available: usize, required: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherState {
    /// m/s
    pub wind_speed: f64,
    /// °C
    pub temperature: f64,
    /// %
    pub humidity: f64,
    /// mm
    pub rainfall: f64,
}

impl WeatherState {
    /// Checks physical validity; returns the offending field on failure.
    pub fn check(&self) -> Result<(), String> {
        if !(self.wind_speed > 0.0) || !self.wind_speed.is_finite() {
            return Err(format!("wind_speed must be > 0, got {}", self.wind_speed));
        }
        if !self.temperature.is_finite() {
            return Err(format!("temperature must be finite, got {}", self.temperature));
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(format!("humidity must be in [0, 100], got {}", self.humidity));
        }
        if !(self.rainfall >= 0.0) || !self.rainfall.is_finite() {
            return Err(format!("rainfall must be >= 0, got {}", self.rainfall));
        }
        Ok(())
    }
}

/// Marginal statistics of one weather variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl ParamStats {
    pub const fn new(mean: f64, std: f64, max: f64) -> Self {
        ParamStats { mean, std, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherStatsTarget {
    pub wind_speed: ParamStats,
    pub temperature: ParamStats,
    pub humidity: ParamStats,
    pub rainfall: ParamStats,
}

impl Default for WeatherStatsTarget {
    /// Station statistics for 2004, the only year with rainfall records.
    fn default() -> Self {
        WeatherStatsTarget {
            wind_speed: ParamStats::new(2.12, 1.27, 9.6),
            temperature: ParamStats::new(16.82, 6.30, 42.1),
            humidity: ParamStats::new(71.92, 14.33, 93.0),
            rainfall: ParamStats::new(2.96, 9.27, 73.9),
        }
    }
}

impl WeatherStatsTarget {
    pub fn check(&self) -> Result<(), String> {
        for (name, p) in [
            ("wind_speed", self.wind_speed),
            ("temperature", self.temperature),
            ("humidity", self.humidity),
            ("rainfall", self.rainfall),
        ] {
            if !(p.std >= 0.0) || !(p.max >= p.mean) {
                return Err(format!("{name}: need std >= 0 and max >= mean"));
            }
        }
        if !(self.wind_speed.mean > 0.0) {
            return Err("wind_speed: mean must be > 0".into());
        }
        if self.rainfall.mean < 0.0 {
            return Err("rainfall: mean must be >= 0".into());
        }
        Ok(())
    }
}

fn ar1(current: f64, mean: f64, std: f64, rng: &mut impl Rng) -> f64 {
    let eps: f64 = StandardNormal.sample(rng);
    mean + REVERSION * (current - mean) + std * (1.0 - REVERSION * REVERSION).sqrt() * eps
}

/// Advances the synthetic weather by one step.
///
/// Temperature and humidity follow Gaussian AR(1) processes. Wind speed
/// follows an AR(1) process in log space whose log-normal marginal has the
/// target mean and standard deviation; this keeps wind positive without
/// piling probability mass onto the floor. Rainfall is drawn independently
/// each step from a zero-inflated exponential matched to the target mean and
/// variance. Every value is clamped to its physical range and the target max.
pub fn next_state(current: &WeatherState, target: &WeatherStatsTarget, rng: &mut impl Rng) -> WeatherState {
    let w = target.wind_speed;
    let cv2 = (w.std / w.mean).powi(2);
    let log_var = (1.0 + cv2).ln();
    let log_mean = w.mean.ln() - 0.5 * log_var;
    let log_wind = ar1(current.wind_speed.max(MIN_WIND_SPEED).ln(), log_mean, log_var.sqrt(), rng);
    let wind_speed = log_wind.exp().clamp(MIN_WIND_SPEED, w.max.max(MIN_WIND_SPEED));

    let t = target.temperature;
    let temperature = ar1(current.temperature, t.mean, t.std, rng).min(t.max);

    let h = target.humidity;
    let humidity = ar1(current.humidity, h.mean, h.std, rng).clamp(0.0, h.max.min(100.0));

    WeatherState { wind_speed, temperature, humidity, rainfall: draw_rainfall(&target.rainfall, rng) }
}

fn draw_rainfall(stats: &ParamStats, rng: &mut impl Rng) -> f64 {
    if stats.mean <= 0.0 {
        return 0.0;
    }
    if stats.std == 0.0 {
        return stats.mean.min(stats.max);
    }
    // Zero-inflated exponential: wet with probability p, amount ~ Exp(mean = scale).
    // mean = p·scale and var = 2p·scale² − mean², solved for (p, scale).
    let second_moment = stats.std * stats.std + stats.mean * stats.mean;
    let (p, scale) = {
        let scale = second_moment / (2.0 * stats.mean);
        let p = stats.mean / scale;
        if p >= 1.0 { (1.0, stats.mean) } else { (p, scale) }
    };
    let wet: f64 = rng.random();
    if wet >= p {
        return 0.0;
    }
    let amount = Exp::new(1.0 / scale).expect("positive rate").sample(rng);
    amount.min(stats.max)
}

/// Reads a weather series: header `wind_speed,temperature,humidity,rainfall`
/// then one row per step. Wind speeds are floored at [`MIN_WIND_SPEED`].
pub fn load_series(path: impl AsRef<Path>) -> Result<Vec<WeatherState>, WeatherError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| WeatherError::Io { path: path.display().to_string(), source })?;
    read_series(file)
}

pub fn read_series(input: impl std::io::Read) -> Result<Vec<WeatherState>, WeatherError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| WeatherError::Row { line: 1, message: e.to_string() })?
        .clone();
    if header.iter().collect::<Vec<_>>() != SERIES_HEADER {
        return Err(WeatherError::Row {
            line: 1,
            message: format!("header must be `{}`", SERIES_HEADER.join(",")),
        });
    }
    let mut states = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| WeatherError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, WeatherError> {
            let raw = &record[i];
            raw.parse::<f64>().map_err(|_| WeatherError::Row {
                line,
                message: format!("{}: cannot parse `{raw}`", SERIES_HEADER[i]),
            })
        };
        let state = WeatherState {
            wind_speed: field(0)?,
            temperature: field(1)?,
            humidity: field(2)?,
            rainfall: field(3)?,
        };
        state.check().map_err(|message| WeatherError::Row { line, message })?;
        states.push(WeatherState { wind_speed: state.wind_speed.max(MIN_WIND_SPEED), ..state });
    }
    Ok(states)
}

/// Where the engine's weather comes from.
#[derive(Debug, Clone)]
pub enum WeatherFeed<R> {
    Synthetic { target: WeatherStatsTarget, rng: R },
    Series { states: Vec<WeatherState>, cursor: usize },
}

impl<R: Rng> WeatherFeed<R> {
    /// Produces the state following `current`.
    pub fn advance(&mut self, current: &WeatherState) -> Result<WeatherState, WeatherError> {
        match self {
            WeatherFeed::Synthetic { target, rng } => Ok(next_state(current, target, rng)),
            WeatherFeed::Series { states, cursor } => {
                *cursor += 1;
                states
                    .get(*cursor)
                    .copied()
                    .ok_or(WeatherError::TooShort { available: states.len(), required: *cursor + 1 })
            }
        }
    }
}
