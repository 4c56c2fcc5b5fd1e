//! Single-agent Monte-Carlo Tree Search over the joint future of all agents.
//!
//! # Tree layout
//!
//! Each tree level is one agent's proposal. Within a simulated time step the
//! planning agent proposes first and the others follow in ascending id; once
//! the last agent has proposed, the step's proposals are merged with the
//! same rule the coordinator uses and simulated time advances by one. A path
//! of `N_A` levels therefore assigns every agent exactly one move, and two
//! distinct paths can only meet in the same table after more than `N_A`
//! levels.
//!
//! # Delta state
//!
//! Only the root stores a full [`WorldState`]; every other node stores the
//! single `(agent, move)` entry that distinguishes it from its parent. Node
//! states are realized in a reusable [`Scratch`] buffer (agent positions plus
//! an `N x N` occupancy table) by replaying deltas from the root. Rollouts
//! keep mutating the same buffer cell by cell and the whole iteration is
//! undone from a journal afterwards, so no grid is ever copied.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::coordinator::merge_states;
use crate::grid::{self, GridError, MoveAction, MoveSet, Position, WorldState};
use crate::value::{self, update_value, NodeStats, UpdateRule, ValueParams};
use crate::Rational;

pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cannot expand terminal node {0}")]
    TerminalNode(NodeId),
    #[error("node {0} is already expanded")]
    AlreadyExpanded(NodeId),
    #[error("planning requested on a terminal state")]
    TerminalState,
    #[error("root has not been expanded")]
    UnexpandedRoot,
    #[error("inconsistent search parameters: {0}")]
    Params(String),
    #[error("delta replay of node {0} disagrees with the reference state")]
    DeltaMismatch(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    /// Selection-to-backpropagation cycles per planning call.
    pub iterations: u32,
    pub t_final: u32,
    pub exploration_c: f64,
    /// Check every replayed node state against an independent full-copy
    /// replay. Slow; meant for tests and debugging.
    pub verify_deltas: bool,
}

impl SearchBudget {
    pub const DEFAULT_EXPLORATION: f64 = std::f64::consts::SQRT_2;

    pub fn new(iterations: u32, t_final: u32) -> Result<Self, EngineError> {
        Self::with_exploration(iterations, t_final, Self::DEFAULT_EXPLORATION)
    }

    pub fn with_exploration(iterations: u32, t_final: u32, exploration_c: f64) -> Result<Self, EngineError> {
        if iterations == 0 {
            return Err(EngineError::Params("iterations must be at least 1".into()));
        }
        if !(exploration_c.is_finite() && exploration_c >= 0.0) {
            return Err(EngineError::Params(format!(
                "exploration constant {exploration_c} must be finite and non-negative"
            )));
        }
        Ok(Self {
            iterations,
            t_final,
            exploration_c,
            verify_deltas: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    /// Proposal that distinguishes this node from its parent; `None` at the root.
    pub delta: Option<(usize, MoveAction)>,
    pub stats: NodeStats,
    /// Agent whose move this node's children choose.
    pub acting_agent: usize,
    /// Simulated time step of the state this node's children act in.
    pub sim_time: u32,
    pub depth: u32,
    pub parent: Option<NodeId>,
    pub expanded: bool,
    /// Earliest simulated time at which a node below (or at) this one shows
    /// every agent captured.
    pub earliest_finish: Option<u32>,
    children: Range<NodeId>,
}

impl SearchNode {
    pub fn children(&self) -> Range<NodeId> {
        self.children.clone()
    }
}

#[derive(Debug, Clone, Copy)]
enum Undo {
    Pos(usize, Position),
    Captured(usize),
    Cell(usize, u16),
    Time(u32),
    Pending(usize, MoveAction),
    Turn(usize),
}

const EMPTY: u16 = u16::MAX;

/// In-place working state with an undo journal.
#[derive(Debug, Clone)]
pub struct Scratch {
    n: u16,
    t: u32,
    pos: Vec<Position>,
    captured: Vec<bool>,
    n_captured: usize,
    occupancy: Vec<u16>,
    goal_mask: Vec<bool>,
    goals: Vec<Position>,
    pending: Vec<MoveAction>,
    order: Vec<usize>,
    turn: usize,
    journal: Vec<Undo>,
    targets: Vec<Position>,
    moving: Vec<bool>,
}

impl Scratch {
    pub fn new(s: &WorldState, order: Vec<usize>) -> Self {
        let n = s.n();
        let cells = usize::from(n) * usize::from(n);
        let mut occupancy = vec![EMPTY; cells];
        for (agent, p) in s.positions().iter().enumerate() {
            occupancy[p.index(n)] = agent as u16;
        }
        let mut goal_mask = vec![false; cells];
        for g in s.goals() {
            goal_mask[g.index(n)] = true;
        }
        let n_agents = s.n_agents();
        Self {
            n,
            t: s.t(),
            pos: s.positions().to_vec(),
            captured: s.captured().to_vec(),
            n_captured: s.captured_count(),
            occupancy,
            goal_mask,
            goals: s.goals().to_vec(),
            pending: vec![MoveAction::Stay; n_agents],
            order,
            turn: 0,
            journal: Vec::new(),
            targets: vec![Position::new(0, 0); n_agents],
            moving: vec![false; n_agents],
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// Index into the turn order of the agent that proposes next.
    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn next_agent(&self) -> usize {
        self.order[self.turn]
    }

    pub fn all_captured(&self) -> bool {
        self.n_captured == self.pos.len()
    }

    pub fn is_terminal(&self, t_final: u32) -> bool {
        self.all_captured() || self.t >= t_final
    }

    /// Snapshot of the state at the start of the current step.
    pub fn to_state(&self) -> WorldState {
        WorldState::from_parts(
            self.n,
            self.t,
            self.pos.clone(),
            self.goals.clone(),
            self.captured.clone(),
        )
    }

    /// Proposals made so far in the current step, in turn order.
    pub fn pending(&self) -> Vec<(usize, MoveAction)> {
        self.order[..self.turn]
            .iter()
            .map(|&a| (a, self.pending[a]))
            .collect()
    }

    pub fn mark(&self) -> usize {
        self.journal.len()
    }

    pub fn rewind(&mut self, mark: usize) {
        while self.journal.len() > mark {
            match self.journal.pop().expect("len > mark") {
                Undo::Pos(agent, p) => self.pos[agent] = p,
                Undo::Captured(agent) => {
                    self.captured[agent] = false;
                    self.n_captured -= 1;
                }
                Undo::Cell(index, old) => self.occupancy[index] = old,
                Undo::Time(t) => self.t = t,
                Undo::Pending(agent, m) => self.pending[agent] = m,
                Undo::Turn(turn) => self.turn = turn,
            }
        }
    }

    pub fn legal_moves(&self, agent: usize) -> MoveSet {
        if self.captured[agent] {
            return MoveSet::only(MoveAction::Stay);
        }
        let from = self.pos[agent];
        let mut set = MoveSet::only(MoveAction::Stay);
        for action in &MoveAction::ALL[..4] {
            if let Some(to) = from.step(*action, self.n) {
                let holder = self.occupancy[to.index(self.n)];
                if holder == EMPTY || !self.captured[usize::from(holder)] {
                    set.insert(*action);
                }
            }
        }
        set
    }

    /// Records the proposal of the agent whose turn it is; merges the step
    /// once every agent has proposed.
    pub fn propose(&mut self, action: MoveAction) {
        let agent = self.order[self.turn];
        self.journal.push(Undo::Pending(agent, self.pending[agent]));
        self.pending[agent] = action;
        self.journal.push(Undo::Turn(self.turn));
        self.turn += 1;
        if self.turn == self.order.len() {
            self.turn = 0;
            self.commit_step();
        }
    }

    fn set_cell(&mut self, index: usize, value: u16) {
        self.journal.push(Undo::Cell(index, self.occupancy[index]));
        self.occupancy[index] = value;
    }

    fn commit_step(&mut self) {
        let n = self.n;
        let n_agents = self.pos.len();
        for agent in 0..n_agents {
            let target = self.pos[agent]
                .step(self.pending[agent], n)
                .expect("proposals come from legal_moves");
            self.targets[agent] = target;
            self.moving[agent] = target != self.pos[agent];
        }
        loop {
            let mut changed = false;
            for i in 0..n_agents {
                if !self.moving[i] {
                    continue;
                }
                let target = self.targets[i];
                let holder = self.occupancy[target.index(n)];
                let holder_stays = holder != EMPTY && !self.moving[usize::from(holder)];
                let outranked = !holder_stays
                    && (0..i).any(|j| self.moving[j] && self.targets[j] == target);
                if holder_stays || outranked {
                    self.moving[i] = false;
                    self.targets[i] = self.pos[i];
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for agent in 0..n_agents {
            if self.moving[agent] {
                let from = self.pos[agent].index(n);
                self.set_cell(from, EMPTY);
            }
        }
        for agent in 0..n_agents {
            if !self.moving[agent] {
                continue;
            }
            let to = self.targets[agent];
            self.set_cell(to.index(n), agent as u16);
            self.journal.push(Undo::Pos(agent, self.pos[agent]));
            self.pos[agent] = to;
            if !self.captured[agent] && self.goal_mask[to.index(n)] {
                self.journal.push(Undo::Captured(agent));
                self.captured[agent] = true;
                self.n_captured += 1;
            }
        }
        self.journal.push(Undo::Time(self.t));
        self.t += 1;
    }
}

/// Uniform choice among `moves`. A single option consumes no randomness.
pub fn uniform_move<R: Rng + ?Sized>(moves: MoveSet, rng: &mut R) -> MoveAction {
    debug_assert!(!moves.is_empty());
    if moves.len() == 1 {
        return moves.nth(0).expect("one move");
    }
    moves
        .nth(rng.gen_range(0..moves.len()))
        .expect("index below len")
}

/// Value of a finished rollout from the planning agent's point of view;
/// `t` is the simulated time of the node the rollout started from.
pub fn evaluate(captured: u32, mark: bool, t: u32, params: &ValueParams) -> Rational {
    value::depth_adjusted(value::value_mod(captured, mark, params), t, params)
}

/// Turn order for one simulated time step: the planner, then everyone else
/// in ascending id.
pub fn turn_order(planning_agent: usize, n_agents: usize) -> Vec<usize> {
    std::iter::once(planning_agent)
        .chain((0..n_agents).filter(|&a| a != planning_agent))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    root_state: WorldState,
    planning_agent: usize,
    order: Vec<usize>,
    nodes: Vec<SearchNode>,
    scratch: Scratch,
}

impl SearchTree {
    pub fn new(root_state: WorldState, planning_agent: usize) -> Result<Self, EngineError> {
        root_state.check_agent(planning_agent)?;
        let order = turn_order(planning_agent, root_state.n_agents());
        let scratch = Scratch::new(&root_state, order.clone());
        let root = SearchNode {
            delta: None,
            stats: NodeStats::default(),
            acting_agent: planning_agent,
            sim_time: root_state.t(),
            depth: 0,
            parent: None,
            expanded: false,
            earliest_finish: grid::is_terminal(&root_state, u32::MAX).then_some(root_state.t()),
            children: 0..0,
        };
        Ok(Self {
            root_state,
            planning_agent,
            order,
            nodes: vec![root],
            scratch,
        })
    }

    pub fn planning_agent(&self) -> usize {
        self.planning_agent
    }

    pub fn root_state(&self) -> &WorldState {
        &self.root_state
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Working buffer; equals the root state between operations.
    pub fn scratch(&self) -> &Scratch {
        &self.scratch
    }

    /// Root-to-`node` path.
    pub fn path_to(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            path.push(parent);
            cur = parent;
        }
        path.reverse();
        path
    }

    /// Descends from the root by UCT until it reaches a node that is not
    /// expanded. Unvisited children score infinitely; ties go to the child
    /// listed first.
    pub fn select(&self, exploration_c: f64) -> Vec<NodeId> {
        let mut path = vec![ROOT];
        let mut cur = ROOT;
        while self.nodes[cur].expanded {
            let parent_visits = f64::from(self.nodes[cur].stats.visits.max(1));
            let log_parent = parent_visits.ln();
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for child in self.nodes[cur].children() {
                let stats = &self.nodes[child].stats;
                let score = if stats.visits == 0 {
                    f64::INFINITY
                } else {
                    to_f64(stats.value)
                        + exploration_c * (log_parent / f64::from(stats.visits)).sqrt()
                };
                if best.is_none() || score > best_score {
                    best = Some(child);
                    best_score = score;
                }
            }
            cur = best.expect("expanded nodes have children");
            path.push(cur);
        }
        path
    }

    fn load(&mut self, node: NodeId) {
        debug_assert_eq!(self.scratch.mark(), 0);
        let path = self.path_to(node);
        for &id in &path[1..] {
            let (_, action) = self.nodes[id].delta.expect("non-root nodes carry a delta");
            self.scratch.propose(action);
        }
    }

    /// State of `node` rebuilt from the root with the functional grid
    /// operations; returns the step-start state and the proposals made so far
    /// in that step.
    pub fn reference_state(&self, node: NodeId) -> Result<(WorldState, Vec<(usize, MoveAction)>), GridError> {
        let mut state = self.root_state.clone();
        let mut pending: Vec<(usize, MoveAction)> = Vec::new();
        for &id in &self.path_to(node)[1..] {
            let (agent, action) = self.nodes[id].delta.expect("non-root nodes carry a delta");
            if !grid::legal_moves(&state, agent)?.contains(action) {
                return Err(GridError::IllegalMove { agent, action });
            }
            pending.push((agent, action));
            if pending.len() == self.order.len() {
                let mut proposals = vec![MoveAction::Stay; self.order.len()];
                for (a, m) in pending.drain(..) {
                    proposals[a] = m;
                }
                state = merge_states(&state, &proposals)?;
            }
        }
        Ok((state, pending))
    }

    fn verify_loaded(&self, node: NodeId) -> Result<(), EngineError> {
        let (state, pending) = self.reference_state(node)?;
        if state != self.scratch.to_state() || pending != self.scratch.pending() {
            return Err(EngineError::DeltaMismatch(node));
        }
        Ok(())
    }

    /// Creates one child per legal move of the leaf's acting agent and
    /// returns the first of them.
    pub fn expand(&mut self, leaf: NodeId, t_final: u32) -> Result<NodeId, EngineError> {
        self.load(leaf);
        let result = self.expand_loaded(leaf, t_final);
        self.scratch.rewind(0);
        result
    }

    fn expand_loaded(&mut self, leaf: NodeId, t_final: u32) -> Result<NodeId, EngineError> {
        if self.nodes[leaf].expanded {
            return Err(EngineError::AlreadyExpanded(leaf));
        }
        if self.scratch.turn() == 0 && self.scratch.is_terminal(t_final) {
            return Err(EngineError::TerminalNode(leaf));
        }
        let acting = self.nodes[leaf].acting_agent;
        debug_assert_eq!(acting, self.scratch.next_agent());
        let moves = self.scratch.legal_moves(acting);
        let depth = self.nodes[leaf].depth + 1;
        let n_agents = self.order.len();
        let next_turn = depth as usize % n_agents;
        let sim_time = self.root_state.t() + depth / n_agents as u32;
        let first = self.nodes.len();
        let mut finish = None;
        for action in moves.iter() {
            let earliest_finish = if next_turn == 0 {
                let mark = self.scratch.mark();
                self.scratch.propose(action);
                let done = self.scratch.all_captured().then_some(self.scratch.t());
                self.scratch.rewind(mark);
                done
            } else {
                None
            };
            finish = min_finish(finish, earliest_finish);
            self.nodes.push(SearchNode {
                delta: Some((acting, action)),
                stats: NodeStats::default(),
                acting_agent: self.order[next_turn],
                sim_time,
                depth,
                parent: Some(leaf),
                expanded: false,
                earliest_finish,
                children: 0..0,
            });
        }
        let node = &mut self.nodes[leaf];
        node.expanded = true;
        node.children = first..first + moves.len();
        if finish.is_some() {
            let mut cur = Some(leaf);
            while let Some(id) = cur {
                let n = &mut self.nodes[id];
                n.earliest_finish = min_finish(n.earliest_finish, finish);
                cur = n.parent;
            }
        }
        Ok(first)
    }

    /// Plays uniformly random proposals for every agent in turn order from
    /// `node` until the simulation is terminal and scores the final state.
    /// The depth bonus uses the simulated time of `node`, not of the final
    /// state.
    pub fn rollout<R: Rng + ?Sized>(&mut self, node: NodeId, params: &ValueParams, rng: &mut R) -> Rational {
        self.load(node);
        let sample = self.rollout_loaded(params, rng);
        self.scratch.rewind(0);
        sample
    }

    fn rollout_loaded<R: Rng + ?Sized>(&mut self, params: &ValueParams, rng: &mut R) -> Rational {
        let s = &mut self.scratch;
        let start_time = s.t;
        while !(s.turn() == 0 && s.is_terminal(params.t_final)) {
            let moves = s.legal_moves(s.next_agent());
            s.propose(uniform_move(moves, rng));
        }
        evaluate(
            s.n_captured as u32,
            s.captured[self.planning_agent],
            start_time,
            params,
        )
    }

    pub fn backpropagate(&mut self, path: &[NodeId], sample: Rational, rule: UpdateRule) {
        for &id in path {
            let node = &mut self.nodes[id];
            node.stats = update_value(node.stats, sample, rule);
        }
    }

    /// One select, expand, rollout, backpropagate cycle.
    pub fn iterate<R: Rng + ?Sized>(
        &mut self,
        budget: &SearchBudget,
        params: &ValueParams,
        rng: &mut R,
    ) -> Result<(), EngineError> {
        let mut path = self.select(budget.exploration_c);
        let leaf = *path.last().expect("path holds the root");
        self.load(leaf);
        let outcome = self.iterate_loaded(&mut path, leaf, budget, params, rng);
        self.scratch.rewind(0);
        let sample = outcome?;
        self.backpropagate(&path, sample, params.update_rule);
        Ok(())
    }

    fn iterate_loaded<R: Rng + ?Sized>(
        &mut self,
        path: &mut Vec<NodeId>,
        leaf: NodeId,
        budget: &SearchBudget,
        params: &ValueParams,
        rng: &mut R,
    ) -> Result<Rational, EngineError> {
        if budget.verify_deltas {
            self.verify_loaded(leaf)?;
        }
        if !(self.scratch.turn() == 0 && self.scratch.is_terminal(budget.t_final)) {
            let child = self.expand_loaded(leaf, budget.t_final)?;
            let (_, action) = self.nodes[child].delta.expect("child delta");
            self.scratch.propose(action);
            if budget.verify_deltas {
                self.verify_loaded(child)?;
            }
            path.push(child);
        }
        Ok(self.rollout_loaded(params, rng))
    }

    /// Move of the root child with the highest value. Ties prefer the child
    /// with the earlier known full capture, then the move order
    /// Up, Down, Left, Right, Stay.
    pub fn best_action(&self) -> Result<MoveAction, EngineError> {
        let root = &self.nodes[ROOT];
        if !root.expanded {
            return Err(EngineError::UnexpandedRoot);
        }
        let mut best: Option<&SearchNode> = None;
        for child in root.children() {
            let node = &self.nodes[child];
            let better = match best {
                None => true,
                Some(b) => {
                    node.stats.value > b.stats.value
                        || (node.stats.value == b.stats.value
                            && finish_key(node.earliest_finish) < finish_key(b.earliest_finish))
                }
            };
            if better {
                best = Some(node);
            }
        }
        Ok(best.and_then(|n| n.delta).expect("root has children").1)
    }

    #[cfg(test)]
    pub(crate) fn stats_mut(&mut self, id: NodeId) -> &mut NodeStats {
        &mut self.nodes[id].stats
    }
}

fn min_finish(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn finish_key(f: Option<u32>) -> u32 {
    f.unwrap_or(u32::MAX)
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Runs `budget.iterations` search cycles for `planning_agent` from `state`
/// and returns the chosen move. A captured agent stays without searching.
pub fn plan_move<R: Rng + ?Sized>(
    state: &WorldState,
    planning_agent: usize,
    budget: &SearchBudget,
    params: &ValueParams,
    rng: &mut R,
) -> Result<MoveAction, EngineError> {
    state.check_agent(planning_agent)?;
    if params.t_final != budget.t_final {
        return Err(EngineError::Params(format!(
            "value horizon {} differs from search horizon {}",
            params.t_final, budget.t_final
        )));
    }
    if params.n_agents as usize != state.n_agents() {
        return Err(EngineError::Params(format!(
            "value params expect {} agents, state has {}",
            params.n_agents,
            state.n_agents()
        )));
    }
    if grid::is_terminal(state, budget.t_final) {
        return Err(EngineError::TerminalState);
    }
    if state.is_captured(planning_agent) {
        return Ok(MoveAction::Stay);
    }
    let tree = search(state, planning_agent, budget, params, rng)?;
    tree.best_action()
}

/// Builds and returns the search tree; [`plan_move`] without the final pick.
pub fn search<R: Rng + ?Sized>(
    state: &WorldState,
    planning_agent: usize,
    budget: &SearchBudget,
    params: &ValueParams,
    rng: &mut R,
) -> Result<SearchTree, EngineError> {
    let mut tree = SearchTree::new(state.clone(), planning_agent)?;
    for _ in 0..budget.iterations {
        tree.iterate(budget, params, rng)?;
    }
    Ok(tree)
}
