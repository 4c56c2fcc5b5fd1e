//! Brute-force ground truth for small instances.
//!
//! [`exact_joint_search`] runs a breadth-first search over joint positions
//! where every agent moves simultaneously and every collision-free joint
//! action is a successor, so it bounds what any conflict-resolution policy
//! can achieve. [`iterative_deepening_makespan`] recomputes the optimum with
//! an independent depth-limited search so the two can check each other.

use std::collections::{HashMap, HashSet, VecDeque};

use itertools::Itertools;
use thiserror::Error;

use crate::grid::{manhattan_distance, MoveAction, Position, WorldState};
use crate::scenario::Instance;

pub const MAX_SIDE: u16 = 5;
pub const MAX_AGENTS: usize = 3;
pub const MAX_ASSIGNMENT_AGENTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n}x{n} grid with {n_agents} agents exceeds the exhaustive-search bound ({MAX_SIDE}x{MAX_SIDE}, {MAX_AGENTS} agents)")]
    TooLarge { n: u16, n_agents: usize },
    #[error("{0} agents exceed the assignment bound of {MAX_ASSIGNMENT_AGENTS}")]
    TooManyForAssignment(usize),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub solvable_within: bool,
    pub optimal_makespan: Option<u32>,
    /// One move sequence per agent, all of length `optimal_makespan`.
    pub witness_plan: Vec<Vec<MoveAction>>,
}

struct Space {
    n: u16,
    cells: u64,
    goal: Vec<bool>,
}

impl Space {
    fn new(state: &WorldState) -> Self {
        let n = state.n();
        let cells = usize::from(n) * usize::from(n);
        let mut goal = vec![false; cells];
        for g in state.goals() {
            goal[g.index(n)] = true;
        }
        Self {
            n,
            cells: cells as u64,
            goal,
        }
    }

    fn encode(&self, cells: &[usize]) -> u64 {
        cells.iter().rev().fold(0, |key, &c| key * self.cells + c as u64)
    }

    fn decode(&self, mut key: u64, n_agents: usize) -> Vec<usize> {
        (0..n_agents)
            .map(|_| {
                let c = key % self.cells;
                key /= self.cells;
                c as usize
            })
            .collect()
    }

    fn solved(&self, cells: &[usize]) -> bool {
        cells.iter().all(|&c| self.goal[c])
    }

    /// Per-agent options `(action, target cell)`. Agents on a goal are frozen.
    fn options(&self, cells: &[usize]) -> Vec<Vec<(MoveAction, usize)>> {
        cells
            .iter()
            .map(|&c| {
                if self.goal[c] {
                    return vec![(MoveAction::Stay, c)];
                }
                let from = Position::from_index(c, self.n);
                MoveAction::ALL
                    .iter()
                    .filter_map(|&a| from.step(a, self.n).map(|to| (a, to.index(self.n))))
                    .collect()
            })
            .collect()
    }
}

fn check_size(state: &WorldState) -> Result<(), OracleError> {
    if state.n() > MAX_SIDE || state.n_agents() > MAX_AGENTS {
        return Err(OracleError::TooLarge {
            n: state.n(),
            n_agents: state.n_agents(),
        });
    }
    Ok(())
}

fn start_cells(state: &WorldState) -> Vec<usize> {
    state.positions().iter().map(|p| p.index(state.n())).collect()
}

pub fn exact_joint_search(instance: &Instance, t_final: u32) -> Result<OracleResult, OracleError> {
    exact_joint_search_from(&instance.initial_state()?, t_final)
}

/// Minimal number of simultaneous steps until every agent stands on a goal,
/// searching at most `t_final` steps.
pub fn exact_joint_search_from(state: &WorldState, t_final: u32) -> Result<OracleResult, OracleError> {
    check_size(state)?;
    let n_agents = state.n_agents();
    let space = Space::new(state);
    let start = start_cells(state);
    let start_key = space.encode(&start);
    let mut parent: HashMap<u64, (u64, Vec<MoveAction>)> = HashMap::new();
    let mut seen: HashSet<u64> = HashSet::from([start_key]);
    let mut frontier = VecDeque::from([(start_key, 0u32)]);
    let mut found = None;
    while let Some((key, depth)) = frontier.pop_front() {
        let cells = space.decode(key, n_agents);
        if space.solved(&cells) {
            found = Some((key, depth));
            break;
        }
        if depth == t_final {
            continue;
        }
        for joint in space.options(&cells).into_iter().multi_cartesian_product() {
            let targets: Vec<usize> = joint.iter().map(|&(_, c)| c).collect();
            if !targets.iter().all_unique() {
                continue;
            }
            let next = space.encode(&targets);
            if seen.insert(next) {
                parent.insert(next, (key, joint.iter().map(|&(a, _)| a).collect()));
                frontier.push_back((next, depth + 1));
            }
        }
    }
    let Some((goal_key, makespan)) = found else {
        return Ok(OracleResult {
            solvable_within: false,
            optimal_makespan: None,
            witness_plan: vec![Vec::new(); n_agents],
        });
    };
    let mut steps = Vec::new();
    let mut cur = goal_key;
    while let Some((prev, actions)) = parent.get(&cur) {
        steps.push(actions.clone());
        cur = *prev;
    }
    steps.reverse();
    let witness_plan = (0..n_agents)
        .map(|agent| steps.iter().map(|joint| joint[agent]).collect())
        .collect();
    Ok(OracleResult {
        solvable_within: true,
        optimal_makespan: Some(makespan),
        witness_plan,
    })
}

/// Optimal makespan by iterative deepening with a failure memo; independent
/// of the breadth-first search above.
pub fn iterative_deepening_makespan(state: &WorldState, t_final: u32) -> Result<Option<u32>, OracleError> {
    check_size(state)?;
    let n = state.n();
    let goals: Vec<Position> = state.goals().to_vec();
    let start: Vec<Position> = state.positions().to_vec();
    let mut failed: HashSet<(Vec<Position>, u32)> = HashSet::new();
    for limit in 0..=t_final {
        if reach(&start, limit, n, &goals, &mut failed) {
            return Ok(Some(limit));
        }
    }
    Ok(None)
}

fn reach(
    cur: &[Position],
    budget: u32,
    n: u16,
    goals: &[Position],
    failed: &mut HashSet<(Vec<Position>, u32)>,
) -> bool {
    if cur.iter().all(|p| goals.contains(p)) {
        return true;
    }
    if budget == 0 || failed.contains(&(cur.to_vec(), budget)) {
        return false;
    }
    let mut next = Vec::with_capacity(cur.len());
    let ok = extend(cur, &mut next, budget, n, goals, failed);
    if !ok {
        failed.insert((cur.to_vec(), budget));
    }
    ok
}

fn extend(
    cur: &[Position],
    next: &mut Vec<Position>,
    budget: u32,
    n: u16,
    goals: &[Position],
    failed: &mut HashSet<(Vec<Position>, u32)>,
) -> bool {
    let agent = next.len();
    if agent == cur.len() {
        let successor = next.clone();
        return reach(&successor, budget - 1, n, goals, failed);
    }
    let from = cur[agent];
    let choices: Vec<Position> = if goals.contains(&from) {
        vec![from]
    } else {
        let (r, c) = (i32::from(from.row), i32::from(from.col));
        [(r, c), (r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter(|&(r, c)| r >= 0 && c >= 0 && r < i32::from(n) && c < i32::from(n))
            .map(|(r, c)| Position::new(r as u16, c as u16))
            .collect()
    };
    for to in choices {
        if next.contains(&to) {
            continue;
        }
        next.push(to);
        let ok = extend(cur, next, budget, n, goals, failed);
        next.pop();
        if ok {
            return true;
        }
    }
    false
}

/// Smallest achievable maximum Manhattan distance over all agent-to-goal
/// bijections; a collision-free lower bound on the makespan.
pub fn assignment_lower_bound(instance: &Instance) -> Result<u32, OracleError> {
    assignment_lower_bound_cells(&instance.starts, &instance.goals)
}

pub fn assignment_lower_bound_cells(starts: &[Position], goals: &[Position]) -> Result<u32, OracleError> {
    if starts.len() > MAX_ASSIGNMENT_AGENTS {
        return Err(OracleError::TooManyForAssignment(starts.len()));
    }
    debug_assert_eq!(starts.len(), goals.len());
    Ok((0..goals.len())
        .permutations(goals.len())
        .map(|perm| {
            starts
                .iter()
                .zip(perm)
                .map(|(&s, g)| manhattan_distance(s, goals[g]))
                .max()
                .unwrap_or(0)
        })
        .min()
        .unwrap_or(0))
}

/// Upper bound on the number of agents that can ever be captured from
/// `state`, for any horizon.
///
/// An agent is captured on the first goal it enters, so a free agent can
/// only finish on a goal it reaches through goal-free cells. Captured agents
/// sit on goals, which such paths never use, so the bound is a maximum
/// matching between free agents and unclaimed goals over those paths.
pub fn capture_upper_bound(state: &WorldState) -> usize {
    let n = state.n();
    let cells = usize::from(n) * usize::from(n);
    let mut goal = vec![false; cells];
    for g in state.goals() {
        goal[g.index(n)] = true;
    }
    let open_goals: Vec<Position> = state
        .goals()
        .iter()
        .copied()
        .filter(|&g| state.occupant(g).is_none_or(|a| !state.is_captured(a)))
        .collect();
    let free: Vec<usize> = (0..state.n_agents()).filter(|&a| !state.is_captured(a)).collect();
    let reach: Vec<Vec<usize>> = free
        .iter()
        .map(|&a| {
            let mut seen = vec![false; cells];
            let mut queue = VecDeque::from([state.position(a)]);
            seen[state.position(a).index(n)] = true;
            let mut hits = HashSet::new();
            while let Some(p) = queue.pop_front() {
                for action in &MoveAction::ALL[..4] {
                    let Some(q) = p.step(*action, n) else { continue };
                    let i = q.index(n);
                    if goal[i] {
                        hits.insert(q);
                    } else if !seen[i] {
                        seen[i] = true;
                        queue.push_back(q);
                    }
                }
            }
            (0..open_goals.len()).filter(|&g| hits.contains(&open_goals[g])).collect()
        })
        .collect();

    fn augment(agent: usize, reach: &[Vec<usize>], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
        for &g in &reach[agent] {
            if visited[g] {
                continue;
            }
            visited[g] = true;
            if owner[g].is_none_or(|other| augment(other, reach, owner, visited)) {
                owner[g] = Some(agent);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; open_goals.len()];
    let matched = (0..free.len())
        .filter(|&a| augment(a, &reach, &mut owner, &mut vec![false; open_goals.len()]))
        .count();
    state.captured_count() + matched
}
