//! WebAssembly bindings behind `www/index.html`.
//!
//! The plain functions return Rust errors and are what the native tests
//! exercise; the `#[wasm_bindgen]` wrappers only convert errors for JS.

use airsim::dispersion::{plume_concentration, DispersionError, PlumeQuery};
use airsim::engine::{self, EngineError, Policy};
use airsim::{ScenarioConfig, Species};
use wasm_bindgen::prelude::*;

/// Ground-level concentration (µg/m³) along the plume centreline at `n`
/// evenly spaced distances in `(0, length]`.
pub fn centerline(stack_height: f64, emission_rate: f64, wind_speed: f64, length: f64, n: usize) -> Result<Vec<f64>, DispersionError> {
    (1..=n)
        .map(|i| {
            let x = length * i as f64 / n as f64;
            plume_concentration(&PlumeQuery { x, y: 0.0, z: 0.0, stack_height, emission_rate, wind_speed })
        })
        .collect()
}

/// Ground-level concentration on an `nx × ny` grid, row-major with y varying
/// slowest. Cell centres span `(0, length]` downwind and `[-halfwidth, halfwidth]` crosswind.
pub fn ground_field(
    stack_height: f64,
    emission_rate: f64,
    wind_speed: f64,
    length: f64,
    halfwidth: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, DispersionError> {
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = if ny == 1 { 0.0 } else { -halfwidth + 2.0 * halfwidth * j as f64 / (ny - 1) as f64 };
        for i in 1..=nx {
            let x = length * i as f64 / nx as f64;
            out.push(plume_concentration(&PlumeQuery { x, y, z: 0.0, stack_height, emission_rate, wind_speed })?);
        }
    }
    Ok(out)
}

/// Per-step domain aggregates and cooperation shares of one scenario run.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Series {
    hours_per_step: u32,
    goals: Vec<f64>,
    aggregates: [Vec<f64>; 3],
    coop: [Vec<f64>; 3],
}

#[wasm_bindgen]
impl Series {
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.aggregates[0].len()
    }

    #[wasm_bindgen(getter)]
    pub fn hours_per_step(&self) -> u32 {
        self.hours_per_step
    }

    /// Goal levels in species order PM10, NOx, SOx.
    #[wasm_bindgen(getter)]
    pub fn goals(&self) -> Vec<f64> {
        self.goals.clone()
    }

    /// Aggregate of species 0 (PM10), 1 (NOx) or 2 (SOx); empty for other indices.
    pub fn aggregate(&self, species: usize) -> Vec<f64> {
        self.aggregates.get(species).cloned().unwrap_or_default()
    }

    pub fn coop_fraction(&self, species: usize) -> Vec<f64> {
        self.coop.get(species).cloned().unwrap_or_default()
    }
}

/// Runs the default scenario with trained forecasters.
pub fn scenario(seed: u64, cooperation: bool, leaks: bool) -> Result<Series, EngineError> {
    let cfg = ScenarioConfig { seed, cooperation, leaks, ..ScenarioConfig::default() };
    let run = engine::run_with_policy(&cfg, Policy::from_cooperation(cooperation), false)?;
    let column = |f: &dyn Fn(&engine::StepRecord) -> f64| run.records.iter().map(f).collect::<Vec<f64>>();
    Ok(Series {
        hours_per_step: run.hours_per_step,
        goals: run.goals.0.to_vec(),
        aggregates: Species::ALL.map(|s| column(&|r| r.aggregate[s])),
        coop: Species::ALL.map(|s| column(&|r| r.coop_fraction[s])),
    })
}

#[wasm_bindgen]
pub fn plume_centerline(stack_height: f64, emission_rate: f64, wind_speed: f64, length: f64, n: usize) -> Result<Vec<f64>, JsError> {
    centerline(stack_height, emission_rate, wind_speed, length, n).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn plume_field(
    stack_height: f64,
    emission_rate: f64,
    wind_speed: f64,
    length: f64,
    halfwidth: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, JsError> {
    ground_field(stack_height, emission_rate, wind_speed, length, halfwidth, nx, ny).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn run_scenario(seed: u32, cooperation: bool, leaks: bool) -> Result<Series, JsError> {
    scenario(seed as u64, cooperation, leaks).map_err(|e| JsError::new(&e.to_string()))
}
