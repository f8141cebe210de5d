//! Simulation state and the per-step loop.
//!
//! Each step runs, in this order: agent decisions, actuation of emission
//! rates, plume superposition onto the boxes, weather advance, per-species
//! forecast for the next step, regulation rewards, probability adaptation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{self, AgentState, Decision, RegulationInputs};
use crate::config::{ConfigError, ScenarioConfig};
use crate::dispersion::{self, ConcentrationField, DispersionError, EmissionSource, Receptor};
use crate::predictor::{self, NetworkParameters, PredictorError, PredictorInput};
use crate::species::{PerSpecies, Species};
use crate::weather::{self, WeatherError, WeatherFeed, WeatherState, WeatherStatsTarget};

/// Steps discarded before the forecaster's training pairs are collected and
/// before scenario statistics are compared against goals.
pub const BURN_IN_STEPS: usize = 200;

mod stream {
    pub const CONTROLLED_LAYOUT: u64 = 1;
    pub const LEAK_LAYOUT: u64 = 2;
    pub const INITIAL_DECISIONS: u64 = 3;
    pub const WEATHER: u64 = 4;
    pub const AGENT_DRAWS: u64 = 5;
    pub const TRAINING: u64 = 6;
}

/// Independent random stream `index` of run `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("step {step}: dispersion: {source}")]
    Dispersion {
        step: usize,
        #[source]
        source: DispersionError,
    },
    #[error("step {step}: weather: {source}")]
    StepWeather {
        step: usize,
        #[source]
        source: WeatherError,
    },
    #[error("step {step}: forecast: {source}")]
    Forecast {
        step: usize,
        #[source]
        source: PredictorError,
    },
    #[error("simulation already finished at step {0}")]
    Finished(usize),
}

/// How agents pick their decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Reward/penalty learning with the switching rule.
    Adaptive,
    /// Agents keep their initial decisions for the whole run.
    Frozen,
    /// Every agent takes the given decision at every step.
    Forced(Decision),
}

impl Policy {
    pub fn from_cooperation(cooperation: bool) -> Self {
        if cooperation { Policy::Adaptive } else { Policy::Frozen }
    }
}

#[derive(Debug, Clone)]
pub enum Forecaster {
    /// Next value equals the current aggregate.
    Persistence,
    Network(Box<PerSpecies<NetworkParameters>>),
}

impl Forecaster {
    fn predict(&self, species: Species, input: &PredictorInput) -> Result<f64, PredictorError> {
        match self {
            Forecaster::Persistence => Ok(input.aggregated_concentration),
            Forecaster::Network(nets) => predictor::forecast(&nets[species], input),
        }
    }
}

/// Air-quality category 1..=5 from the worst species' aggregate-to-goal ratio.
pub fn air_quality_index(field: &ConcentrationField, goals: &PerSpecies<f64>) -> u8 {
    Species::ALL
        .into_iter()
        .map(|s| match field.aggregate[s] / goals[s] {
            r if r < 0.5 => 1,
            r if r < 1.0 => 2,
            r if r < 1.5 => 3,
            r if r < 2.0 => 4,
            _ => 5,
        })
        .max()
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Domain mean per species, µg/m³.
    pub aggregate: PerSpecies<f64>,
    pub boxes: Vec<PerSpecies<f64>>,
    /// Forecast of the next step's aggregate.
    pub forecast: PerSpecies<f64>,
    pub coop_fraction: PerSpecies<f64>,
    pub aqi: u8,
    /// Total emission per species, g/h.
    pub emission_totals: PerSpecies<f64>,
    /// Weather the concentrations were computed under.
    pub weather: WeatherState,
    /// Weather of the next step, used as forecast covariates.
    pub next_weather: WeatherState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub step: usize,
    pub agent_id: usize,
    pub species: Species,
    pub decision: Decision,
    pub p: f64,
    pub q: f64,
    pub reward: f64,
}

pub struct Simulation {
    config: ScenarioConfig,
    step: usize,
    total_steps: usize,
    weather: WeatherState,
    feed: WeatherFeed<ChaCha8Rng>,
    sources: Vec<EmissionSource>,
    agents: Vec<AgentState>,
    receptors: Vec<Receptor>,
    field: ConcentrationField,
    forecast: PerSpecies<f64>,
    policy: Policy,
    forecaster: Forecaster,
    draws: ChaCha8Rng,
    trace: Option<Vec<AgentTrace>>,
}

fn weather_feed(config: &ScenarioConfig) -> Result<(WeatherState, WeatherFeed<ChaCha8Rng>), EngineError> {
    match &config.weather_series {
        Some(path) => {
            let states = weather::load_series(path)?;
            let required = config.total_steps() + 1;
            if states.len() < required {
                return Err(WeatherError::TooShort { available: states.len(), required }.into());
            }
            Ok((states[0], WeatherFeed::Series { states, cursor: 0 }))
        }
        None => Ok((
            initial_state(config),
            WeatherFeed::Synthetic {
                target: WeatherStatsTarget::default(),
                rng: stream_rng(config.seed, stream::WEATHER),
            },
        )),
    }
}

/// Weather at t = 0 exactly as configured.
pub fn initial_state(config: &ScenarioConfig) -> WeatherState {
    config.initial_weather
}

/// Instantiates sources, agents, receptors and weather for a scenario.
pub fn build_scenario(config: &ScenarioConfig, policy: Policy, forecaster: Forecaster) -> Result<Simulation, EngineError> {
    config.validate()?;
    let mut sources = Vec::new();
    let mut layout = stream_rng(config.seed, stream::CONTROLLED_LAYOUT);
    for species in Species::ALL {
        for _ in 0..config.controlled_per_species {
            let x = layout.random_range(0.0..config.domain_length);
            let y = layout.random_range(-config.source_halfwidth..=config.source_halfwidth);
            sources.push(EmissionSource {
                id: sources.len(),
                species,
                controlled: true,
                position: (x, y),
                height: config.stack_height,
                max_rate: config.max_emission_rate,
                current_rate: config.max_emission_rate,
            });
        }
    }
    if config.leaks {
        let mut layout = stream_rng(config.seed, stream::LEAK_LAYOUT);
        for species in Species::ALL {
            for _ in 0..config.uncontrolled_per_species {
                let x = layout.random_range(config.leak_zone_start..config.leak_zone_end);
                let y = layout.random_range(-config.leak_halfwidth..=config.leak_halfwidth);
                sources.push(EmissionSource {
                    id: sources.len(),
                    species,
                    controlled: false,
                    position: (x, y),
                    height: config.leak_height,
                    max_rate: config.max_uncontrolled_rate,
                    current_rate: config.max_uncontrolled_rate,
                });
            }
        }
    }

    let mut picks = stream_rng(config.seed, stream::INITIAL_DECISIONS);
    let mut agents = Vec::with_capacity(3 * config.controlled_per_species);
    for species in Species::ALL {
        let n = config.controlled_per_species;
        let cooperators = (config.initial_coop_fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut picks);
        let mut decisions = vec![Decision::Increase; n];
        for &i in &order[..cooperators] {
            decisions[i] = Decision::Reduce;
        }
        let first_source = species.index() * n;
        for (i, d) in decisions.into_iter().enumerate() {
            agents.push(AgentState::new(first_source + i, species, d, config.memory_steps));
        }
    }

    let width = config.domain_length / config.boxes as f64;
    let receptors = (0..config.boxes).map(|i| Receptor { x: (i as f64 + 0.5) * width, y: 0.0 }).collect();
    let (weather, feed) = weather_feed(config)?;

    let mut sim = Simulation {
        config: config.clone(),
        step: 0,
        total_steps: config.total_steps(),
        weather,
        feed,
        sources,
        agents,
        receptors,
        field: ConcentrationField::uniform(config.boxes, config.background),
        forecast: config.background,
        policy,
        forecaster,
        draws: stream_rng(config.seed, stream::AGENT_DRAWS),
        trace: None,
    };
    if let Policy::Forced(d) = policy {
        sim.agents.iter_mut().for_each(|a| a.last_choice = d);
    }
    sim.actuate();
    Ok(sim)
}

impl Simulation {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn sources(&self) -> &[EmissionSource] {
        &self.sources
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn receptors(&self) -> &[Receptor] {
        &self.receptors
    }

    pub fn weather(&self) -> &WeatherState {
        &self.weather
    }

    pub fn field(&self) -> &ConcentrationField {
        &self.field
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Option<Vec<AgentTrace>> {
        self.trace.take()
    }

    fn actuate(&mut self) {
        let reduced = self.config.reduced_rate_fraction;
        for a in &self.agents {
            let src = &mut self.sources[a.source_id];
            src.current_rate = match a.last_choice {
                Decision::Reduce => src.max_rate * reduced,
                Decision::Increase => src.max_rate,
            };
        }
    }

    fn decide(&mut self) {
        match self.policy {
            Policy::Adaptive => {
                let pf = agents::neighbor_averages(&self.agents);
                for (a, pf) in self.agents.iter_mut().zip(pf) {
                    let u: f64 = self.draws.random();
                    let rpw = a.rpw;
                    agents::choose_action(a, rpw, pf.unwrap_or(rpw), u);
                }
            }
            Policy::Frozen => {}
            Policy::Forced(d) => self.agents.iter_mut().for_each(|a| a.last_choice = d),
        }
    }

    /// Advances one step and returns what happened in it.
    pub fn step(&mut self) -> Result<StepRecord, EngineError> {
        let step = self.step;
        if self.is_finished() {
            return Err(EngineError::Finished(step));
        }

        self.decide();
        self.actuate();

        self.field = dispersion::superpose(&self.sources, &self.receptors, self.weather.wind_speed, self.config.background)
            .map_err(|source| EngineError::Dispersion { step, source })?;

        let current_weather = self.weather;
        self.weather = self
            .feed
            .advance(&current_weather)
            .map_err(|source| EngineError::StepWeather { step, source })?;

        for s in Species::ALL {
            let input = predictor_input(self.field.aggregate[s], &self.weather);
            self.forecast[s] = self
                .forecaster
                .predict(s, &input)
                .map_err(|source| EngineError::Forecast { step, source })?;
        }

        let emissions: Vec<f64> = self.agents.iter().map(|a| self.sources[a.source_id].current_rate).collect();
        let mut totals = PerSpecies::splat(0.0);
        for src in &self.sources {
            totals[src.species] += src.current_rate;
        }
        let records = agents::compute_rewards(
            &mut self.agents,
            &RegulationInputs {
                step,
                emissions: &emissions,
                species_totals: totals,
                forecast: self.forecast,
                goals: self.config.goals,
            },
        );

        if self.policy == Policy::Adaptive {
            self.agents.iter_mut().for_each(agents::adapt);
        }

        if let Some(trace) = &mut self.trace {
            trace.extend(self.agents.iter().zip(&records).map(|(a, r)| AgentTrace {
                step,
                agent_id: r.agent_id,
                species: a.species,
                decision: a.last_choice,
                p: a.p,
                q: a.q,
                reward: r.reward,
            }));
        }

        let mut members = PerSpecies::splat(0usize);
        let mut cooperators = PerSpecies::splat(0usize);
        for a in &self.agents {
            members[a.species] += 1;
            cooperators[a.species] += a.last_choice.is_cooperative() as usize;
        }
        let coop_fraction = PerSpecies::from_fn(|s| match members[s] {
            0 => 0.0,
            n => cooperators[s] as f64 / n as f64,
        });

        self.step += 1;
        Ok(StepRecord {
            step,
            aggregate: self.field.aggregate,
            boxes: self.field.boxes.clone(),
            forecast: self.forecast,
            coop_fraction,
            aqi: air_quality_index(&self.field, &self.config.goals),
            emission_totals: totals,
            weather: current_weather,
            next_weather: self.weather,
        })
    }
}

pub fn predictor_input(aggregate: f64, weather: &WeatherState) -> PredictorInput {
    PredictorInput {
        aggregated_concentration: aggregate,
        wind_speed: weather.wind_speed,
        humidity: weather.humidity,
        temperature: weather.temperature,
        rainfall: weather.rainfall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesSummary {
    pub mean: f64,
    pub max: f64,
    /// Fraction of steps whose aggregate exceeds the goal.
    pub above_goal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub hours_per_step: u32,
    pub goals: PerSpecies<f64>,
    pub initial_aqi: u8,
    pub records: Vec<StepRecord>,
    pub agent_trace: Option<Vec<AgentTrace>>,
}

impl RunResult {
    /// Statistics over the steps from `from_step` on.
    pub fn summary_from(&self, from_step: usize) -> PerSpecies<SpeciesSummary> {
        let tail = &self.records[from_step.min(self.records.len())..];
        let n = tail.len().max(1) as f64;
        PerSpecies::from_fn(|s| SpeciesSummary {
            mean: tail.iter().map(|r| r.aggregate[s]).sum::<f64>() / n,
            max: tail.iter().map(|r| r.aggregate[s]).fold(0.0, f64::max),
            above_goal: tail.iter().filter(|r| r.aggregate[s] > self.goals[s]).count() as f64 / n,
        })
    }

    pub fn summary(&self) -> PerSpecies<SpeciesSummary> {
        self.summary_from(0)
    }
}

/// Runs an already-built simulation to completion.
pub fn run_simulation(mut sim: Simulation) -> Result<RunResult, EngineError> {
    let mut records = Vec::with_capacity(sim.total_steps());
    while !sim.is_finished() {
        records.push(sim.step()?);
    }
    Ok(RunResult {
        hours_per_step: sim.config.hours_per_step,
        goals: sim.config.goals,
        initial_aqi: sim.config.initial_air_quality,
        agent_trace: sim.take_trace(),
        records,
    })
}

/// `(aggregate_t, weather_{t+1}) → aggregate_{t+1}` pairs per species.
pub fn training_pairs(records: &[StepRecord]) -> PerSpecies<Vec<(PredictorInput, f64)>> {
    PerSpecies::from_fn(|s| {
        records
            .windows(2)
            .map(|w| (predictor_input(w[0].aggregate[s], &w[0].next_weather), w[1].aggregate[s]))
            .collect()
    })
}

/// Open-loop run (frozen initial decisions, persistence forecasts) whose
/// records feed forecaster training.
pub fn open_loop_records(config: &ScenarioConfig) -> Result<Vec<StepRecord>, EngineError> {
    let sim = build_scenario(config, Policy::Frozen, Forecaster::Persistence)?;
    Ok(run_simulation(sim)?.records)
}

/// Trains one forecaster per species on open-loop pairs after the burn-in.
pub fn train_forecasters(config: &ScenarioConfig) -> Result<PerSpecies<NetworkParameters>, EngineError> {
    train_on_records(config, &open_loop_records(config)?)
}

/// Trains one forecaster per species on already simulated open-loop records.
pub fn train_on_records(config: &ScenarioConfig, records: &[StepRecord]) -> Result<PerSpecies<NetworkParameters>, EngineError> {
    let pairs = training_pairs(&records[BURN_IN_STEPS.min(records.len())..]);
    let mut nets = Vec::with_capacity(3);
    for s in Species::ALL {
        let mut rng = stream_rng(config.seed, stream::TRAINING + s.index() as u64);
        nets.push(predictor::train(&pairs[s], &config.training, &mut rng)?.0);
    }
    let nets: [NetworkParameters; 3] = nets.try_into().expect("three species");
    Ok(PerSpecies(nets))
}

/// Loads `<dir>/<species>.net` for every species.
pub fn load_forecasters(dir: &std::path::Path) -> Result<PerSpecies<NetworkParameters>, EngineError> {
    let load = |s: Species| NetworkParameters::load(dir.join(format!("{}.net", s.tag())));
    Ok(PerSpecies([load(Species::Pm10)?, load(Species::Nox)?, load(Species::Sox)?]))
}

/// Full scenario run under `policy`: obtains forecasters (loaded or trained
/// open-loop), builds the scenario and steps it to the end.
pub fn run_with_policy(config: &ScenarioConfig, policy: Policy, trace_agents: bool) -> Result<RunResult, EngineError> {
    config.validate()?;
    let nets = match &config.predictor_dir {
        Some(dir) => load_forecasters(dir)?,
        None => train_forecasters(config)?,
    };
    let mut sim = build_scenario(config, policy, Forecaster::Network(Box::new(nets)))?;
    if trace_agents {
        sim.enable_trace();
    }
    run_simulation(sim)
}

/// Runs the scenario with the policy implied by its cooperation flag.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, EngineError> {
    run_with_policy(config, Policy::from_cooperation(config.cooperation), false)
}
