//! The outer planning loop: every free agent plans independently from the
//! shared snapshot, the proposals are merged into the next global state, and
//! the loop repeats until full capture or the horizon.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{self, EngineError, SearchBudget};
use crate::grid::{self, GridConfig, GridError, MoveAction, WorldState};
use crate::scenario::Instance;
use crate::seed::mix_words;
use crate::value::{Alpha, UpdateRule, ValueError, ValueParams};
use crate::Rational;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("instance does not match the episode grid: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub grid: GridConfig,
    pub budget: SearchBudget,
    pub alpha: Alpha,
    pub update_rule: UpdateRule,
    pub global_seed: u64,
    /// Plan the agents of one time step on the rayon pool.
    pub parallel: bool,
}

impl EpisodeConfig {
    pub fn value_params(&self) -> Result<ValueParams, ValueError> {
        ValueParams::new(
            self.alpha,
            self.update_rule,
            self.grid.n_agents as u32,
            self.budget.t_final,
        )
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    /// One state per time step, starting at `t = 0`.
    pub states: Vec<WorldState>,
    /// Wall-clock seconds spent planning, `[time step][agent]`. Captured
    /// agents are not planned for and record zero.
    pub plan_durations: Vec<Vec<f64>>,
    pub success_rate: Rational,
    pub makespan: u32,
}

impl EpisodeTrace {
    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("trace holds the initial state")
    }

    fn per_agent_totals(&self) -> Vec<f64> {
        let n_agents = self.final_state().n_agents();
        let mut totals = vec![0.0; n_agents];
        for row in &self.plan_durations {
            for (total, d) in totals.iter_mut().zip(row) {
                *total += d;
            }
        }
        totals
    }

    /// Sum over every agent and step, i.e. the cost of planning sequentially.
    pub fn total_time(&self) -> f64 {
        self.per_agent_totals().iter().sum()
    }

    pub fn avg_agent_time(&self) -> f64 {
        let totals = self.per_agent_totals();
        totals.iter().sum::<f64>() / totals.len() as f64
    }

    pub fn max_agent_time(&self) -> f64 {
        self.per_agent_totals().into_iter().fold(0.0, f64::max)
    }

    /// Stable text rendering of the state sequence, one line per agent and
    /// step: `t agent row col captured`. Wall-clock data is excluded.
    pub fn states_text(&self) -> String {
        let mut out = String::new();
        for s in &self.states {
            for (agent, (p, c)) in s.positions().iter().zip(s.captured()).enumerate() {
                out.push_str(&format!(
                    "{} {} {} {} {}\n",
                    s.t(),
                    agent,
                    p.row,
                    p.col,
                    u8::from(*c)
                ));
            }
        }
        out
    }
}

/// Seed of the planning call of `agent` at time step `t`:
/// `mix_words(&[global_seed, (agent << 32) | t])` (see [`crate::seed`]).
/// Injective in `(agent, t)` for a fixed global seed.
pub fn derive_agent_seed(global_seed: u64, agent: usize, t: u32) -> u64 {
    let word = ((agent as u64) << 32) | u64::from(t);
    mix_words(&[global_seed, word])
}

/// Combines one proposal per agent into the next global state.
///
/// Conflicts are settled by agent-id priority and repeated until nothing
/// changes: when several agents claim one cell only the lowest id keeps its
/// move, and an agent heading into a cell whose holder stays put is turned
/// back. Swaps and rotations go through. Time advances by one and agents
/// that end on a goal become captured.
///
/// Out-of-bounds proposals and moves by captured agents are errors. A
/// proposal into a captured agent's cell is treated as blocked.
pub fn merge_states(s: &WorldState, proposals: &[MoveAction]) -> Result<WorldState, GridError> {
    let n_agents = s.n_agents();
    if proposals.len() != n_agents {
        return Err(GridError::ProposalCount {
            expected: n_agents,
            got: proposals.len(),
        });
    }
    let mut targets = Vec::with_capacity(n_agents);
    for (agent, &action) in proposals.iter().enumerate() {
        let illegal = GridError::IllegalMove { agent, action };
        if s.is_captured(agent) && action != MoveAction::Stay {
            return Err(illegal);
        }
        targets.push(s.position(agent).step(action, s.n()).ok_or(illegal)?);
    }
    let positions = s.positions();
    let mut moving: Vec<bool> = (0..n_agents).map(|i| targets[i] != positions[i]).collect();
    loop {
        let mut changed = false;
        for i in 0..n_agents {
            if !moving[i] {
                continue;
            }
            let holder_stays = s.occupant(targets[i]).is_some_and(|h| !moving[h]);
            let outranked = (0..i).any(|j| moving[j] && targets[j] == targets[i]);
            if holder_stays || outranked {
                moving[i] = false;
                targets[i] = positions[i];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let captured = targets
        .iter()
        .zip(s.captured())
        .map(|(&p, &c)| c || s.is_goal(p))
        .collect();
    Ok(WorldState::from_parts(
        s.n(),
        s.t() + 1,
        targets,
        s.goals().to_vec(),
        captured,
    ))
}

pub fn run_episode(cfg: &EpisodeConfig, instance: &Instance) -> Result<EpisodeTrace, EpisodeError> {
    if instance.grid != cfg.grid {
        return Err(EpisodeError::GridMismatch(format!(
            "instance {} has {:?}, episode expects {:?}",
            instance.name, instance.grid, cfg.grid
        )));
    }
    run_episode_from(cfg, instance.initial_state()?)
}

/// Runs the loop from an arbitrary initial state (for example one where some
/// agents already stand on goals).
pub fn run_episode_from(cfg: &EpisodeConfig, initial: WorldState) -> Result<EpisodeTrace, EpisodeError> {
    let t_final = cfg.budget.t_final;
    let n_agents = initial.n_agents();
    let mut states = vec![initial];
    let mut plan_durations = Vec::new();
    loop {
        let state = states.last().expect("non-empty");
        if grid::is_terminal(state, t_final) {
            break;
        }
        let params = cfg.value_params()?;
        let plan = |agent: usize| -> Result<(MoveAction, f64), EngineError> {
            if state.is_captured(agent) {
                return Ok((MoveAction::Stay, 0.0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_agent_seed(cfg.global_seed, agent, state.t()));
            let started = Instant::now();
            let action = engine::plan_move(state, agent, &cfg.budget, &params, &mut rng)?;
            Ok((action, started.elapsed().as_secs_f64()))
        };
        let planned: Vec<(MoveAction, f64)> = if cfg.parallel {
            (0..n_agents).into_par_iter().map(plan).collect::<Result<_, _>>()?
        } else {
            (0..n_agents).map(plan).collect::<Result<_, _>>()?
        };
        let (proposals, durations): (Vec<_>, Vec<_>) = planned.into_iter().unzip();
        let next = merge_states(state, &proposals)?;
        plan_durations.push(durations);
        states.push(next);
    }
    let last = states.last().expect("non-empty");
    Ok(EpisodeTrace {
        success_rate: grid::success_rate(last),
        makespan: last.t(),
        states,
        plan_durations,
    })
}
