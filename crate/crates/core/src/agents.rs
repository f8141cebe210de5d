//! Reward/penalty cooperation game between emission-source controllers.
//!
//! Each controlled source has an agent holding two probabilities: `p`, of
//! deciding to reduce emission, and `q`, of deciding to increase it. Agents
//! compare their own weighted reward against their neighbours' average to
//! decide whether to switch, then adapt `p`/`q` with a linear reward–inaction
//! step whose size depends on how often they have been switching.

use std::collections::VecDeque;

use crate::species::{PerSpecies, Species};

/// Discount between successive entries of the reward memory.
pub const REWARD_DECAY: f64 = 0.5;

pub const ALPHA_STABLE: f64 = 0.015;
pub const ALPHA_SWITCHED: f64 = 0.010;
pub const ALPHA_OSCILLATING: f64 = -0.015;

/// An agent's binary choice. `Reduce` is cooperation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Reduce = 0,
    Increase = 1,
}

impl Decision {
    pub fn as_bit(self) -> u8 {
        self as u8
    }

    pub fn is_cooperative(self) -> bool {
        self == Decision::Reduce
    }
}

/// What the agent asks its source to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionCommand {
    Reduce,
    Resume,
}

impl From<Decision> for EmissionCommand {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Reduce => EmissionCommand::Reduce,
            Decision::Increase => EmissionCommand::Resume,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub source_id: usize,
    pub species: Species,
    pub last_choice: Decision,
    /// Most recent first, at most `memory` entries.
    pub choice_history: VecDeque<Decision>,
    /// Most recent first, at most `memory` entries.
    pub reward_history: VecDeque<f64>,
    pub memory: usize,
    /// Probability of deciding to reduce.
    pub p: f64,
    /// Probability of deciding to increase.
    pub q: f64,
    /// Weighted reward of the latest step.
    pub wp: f64,
    /// Weighted average reward over the memory window.
    pub rpw: f64,
}

impl AgentState {
    pub fn new(source_id: usize, species: Species, initial: Decision, memory: usize) -> Self {
        assert!(memory > 0, "memory window must hold at least one step");
        AgentState {
            source_id,
            species,
            last_choice: initial,
            choice_history: VecDeque::from([initial]),
            reward_history: VecDeque::with_capacity(memory),
            memory,
            p: 0.5,
            q: 0.5,
            wp: 0.0,
            rpw: 0.0,
        }
    }

    pub fn last_reward(&self) -> Option<f64> {
        self.reward_history.front().copied()
    }

    fn remember_choice(&mut self, d: Decision) {
        self.choice_history.push_front(d);
        self.choice_history.truncate(self.memory);
    }

    fn remember_reward(&mut self, r: f64) {
        self.reward_history.push_front(r);
        self.reward_history.truncate(self.memory);
        let (wp, rpw) = weighted_reward(self.reward_history.make_contiguous());
        self.wp = wp;
        self.rpw = rpw;
    }
}

/// Applies the switching rule and records the resulting decision.
///
/// A reducer switches to increasing only when it is doing worse than its
/// neighbours, `q > p`, and `q` beats the uniform draw `u`; an increaser
/// switches to reducing under the mirrored condition. Otherwise the agent
/// keeps its last choice.
pub fn choose_action(state: &mut AgentState, rpw: f64, pf_avg: f64, u: f64) -> (Decision, EmissionCommand) {
    let behind = rpw < pf_avg;
    let decision = match state.last_choice {
        Decision::Reduce if behind && state.p < state.q && state.q > u => Decision::Increase,
        Decision::Reduce => Decision::Reduce,
        Decision::Increase if behind && state.q < state.p && state.p > u => Decision::Reduce,
        Decision::Increase => Decision::Increase,
    };
    state.last_choice = decision;
    state.remember_choice(decision);
    (decision, decision.into())
}

/// Step size from the number of switches in the memory window.
///
/// No switch → 0.015, a switch at every step → −0.015, anything in between
/// → 0.010. A window of two entries with one switch counts as switching at
/// every step.
pub fn select_alpha(history: &[Decision]) -> f64 {
    assert!(!history.is_empty(), "choice history is empty");
    let changes = history.windows(2).filter(|w| w[0] != w[1]).count();
    if changes == 0 {
        ALPHA_STABLE
    } else if changes == history.len() - 1 {
        ALPHA_OSCILLATING
    } else {
        ALPHA_SWITCHED
    }
}

/// Linear reward–inaction update of the probability tied to the last choice.
///
/// With a positive weighted reward the probability moves toward 1 by
/// `(1 − p)·α`; otherwise it shrinks to `(1 − α)·p`. Results are clamped to
/// `[0, 1]`, which only bites when α is negative.
pub fn update_probabilities(state: &mut AgentState, alpha: f64, wp: f64) -> (f64, f64) {
    let step = |x: f64| {
        let next = if wp > 0.0 { x + (1.0 - x) * alpha } else { (1.0 - alpha) * x };
        next.clamp(0.0, 1.0)
    };
    match state.last_choice {
        Decision::Reduce => state.p = step(state.p),
        Decision::Increase => state.q = step(state.q),
    }
    (state.p, state.q)
}

/// Geometrically weighted average of `history` (most recent first).
///
/// Weights are `0.5^j` normalized over however many entries are present.
/// Returns `(WP, RPw)`, which coincide. An empty history averages to 0.
pub fn weighted_reward(history: &[f64]) -> (f64, f64) {
    if history.is_empty() {
        return (0.0, 0.0);
    }
    let mut weight = 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for r in history {
        num += weight * r;
        den += weight;
        weight *= REWARD_DECAY;
    }
    let avg = num / den;
    (avg, avg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRecord {
    pub agent_id: usize,
    pub step: usize,
    pub reward: f64,
    pub wp: f64,
    pub rpw: f64,
}

/// Same-species neighbourhood of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborView {
    pub agent_id: usize,
    pub neighbor_ids: Vec<usize>,
    pub pf_avg: Option<f64>,
}

/// Neighbour average of the latest rewards, for every agent.
///
/// Neighbours are all other agents of the same species. Agents that have not
/// been rewarded yet count as 0. Agents without neighbours get `None`.
pub fn neighbor_averages(agents: &[AgentState]) -> Vec<Option<f64>> {
    let mut sum = PerSpecies::splat(0.0);
    let mut count = PerSpecies::splat(0usize);
    for a in agents {
        sum[a.species] += a.last_reward().unwrap_or(0.0);
        count[a.species] += 1;
    }
    agents
        .iter()
        .map(|a| {
            let n = count[a.species];
            (n > 1).then(|| (sum[a.species] - a.last_reward().unwrap_or(0.0)) / (n - 1) as f64)
        })
        .collect()
}

pub fn neighbor_view(agents: &[AgentState], index: usize) -> NeighborView {
    let me = &agents[index];
    let neighbor_ids: Vec<usize> = agents
        .iter()
        .enumerate()
        .filter(|(i, a)| *i != index && a.species == me.species)
        .map(|(i, _)| i)
        .collect();
    let pf_avg = (!neighbor_ids.is_empty()).then(|| {
        neighbor_ids.iter().map(|&i| agents[i].last_reward().unwrap_or(0.0)).sum::<f64>() / neighbor_ids.len() as f64
    });
    NeighborView { agent_id: index, neighbor_ids, pf_avg }
}

/// Inputs to the regulation step for one time step.
#[derive(Debug, Clone, Copy)]
pub struct RegulationInputs<'a> {
    pub step: usize,
    /// Emission of each agent's source this step, g/h (aligned with the agent slice).
    pub emissions: &'a [f64],
    /// Total emission per species this step, all sources included.
    pub species_totals: PerSpecies<f64>,
    pub forecast: PerSpecies<f64>,
    pub goals: PerSpecies<f64>,
}

/// Raw per-agent reward without touching agent state.
///
/// Each cooperator earns the cooperating share `n_s / N_s` of its species. When the
/// species forecast exceeds its goal, every agent also pays its share of the
/// species' emission times the relative exceedance `forecast / goal − 1`.
pub fn raw_rewards(agents: &[AgentState], inputs: &RegulationInputs<'_>) -> Vec<f64> {
    assert_eq!(agents.len(), inputs.emissions.len(), "emission vector misaligned with agents");
    let mut members = PerSpecies::splat(0usize);
    let mut cooperators = PerSpecies::splat(0usize);
    for a in agents {
        members[a.species] += 1;
        if a.last_choice.is_cooperative() {
            cooperators[a.species] += 1;
        }
    }
    agents
        .iter()
        .zip(inputs.emissions)
        .map(|(a, &e)| {
            let s = a.species;
            let share = if a.last_choice.is_cooperative() { cooperators[s] as f64 / members[s] as f64 } else { 0.0 };
            let excess = inputs.forecast[s] / inputs.goals[s] - 1.0;
            let total = inputs.species_totals[s];
            let penalty = if excess > 0.0 && total > 0.0 { -(e / total) * excess } else { 0.0 };
            share + penalty
        })
        .collect()
}

/// Rewards every agent, folds the reward into its memory and returns the records.
pub fn compute_rewards(agents: &mut [AgentState], inputs: &RegulationInputs<'_>) -> Vec<RewardRecord> {
    let rewards = raw_rewards(agents, inputs);
    agents
        .iter_mut()
        .zip(rewards)
        .enumerate()
        .map(|(agent_id, (a, reward))| {
            a.remember_reward(reward);
            RewardRecord { agent_id, step: inputs.step, reward, wp: a.wp, rpw: a.rpw }
        })
        .collect()
}

/// Adapts `p`/`q` of one agent from its current choice memory and weighted reward.
pub fn adapt(state: &mut AgentState) {
    let alpha = select_alpha(state.choice_history.make_contiguous());
    let wp = state.wp;
    update_probabilities(state, alpha, wp);
}
