//! The grid world: positions, moves, world state and movement rules.
//!
//! An `N x N` empty grid holds `N_A` agents and `N_A` goals. Each time step
//! every agent either stays or moves to a 4-neighbour cell, no two agents
//! may share a cell, and an agent that reaches a goal is frozen there for the
//! rest of the episode.
//!
//! Swap crossings (two agents exchanging cells in one step) are permitted:
//! only simultaneous occupancy of one cell is a collision.

use std::fmt;

use thiserror::Error;

use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("agent {agent} out of range for {n_agents} agents")]
    InvalidAgent { agent: usize, n_agents: usize },
    #[error("position ({row}, {col}) outside a {n}x{n} grid")]
    OutOfBounds { row: i64, col: i64, n: u16 },
    #[error("cell ({row}, {col}) listed more than once")]
    DuplicateCell { row: u16, col: u16 },
    #[error("move {action:?} is not legal for agent {agent}")]
    IllegalMove { agent: usize, action: MoveAction },
    #[error("expected {expected} proposals, got {got}")]
    ProposalCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub row: u16,
    pub col: u16,
}

impl Position {
    pub const fn new(row: u16, col: u16) -> Self {
        Self { row, col }
    }

    /// Cell reached by `action` on an `n x n` grid, or `None` off the edge.
    pub fn step(self, action: MoveAction, n: u16) -> Option<Position> {
        let (dr, dc) = action.offset();
        let row = i32::from(self.row) + dr;
        let col = i32::from(self.col) + dc;
        let n = i32::from(n);
        if (0..n).contains(&row) && (0..n).contains(&col) {
            Some(Position::new(row as u16, col as u16))
        } else {
            None
        }
    }

    pub fn in_bounds(self, n: u16) -> bool {
        self.row < n && self.col < n
    }

    /// Row-major cell index.
    pub fn index(self, n: u16) -> usize {
        usize::from(self.row) * usize::from(n) + usize::from(self.col)
    }

    pub fn from_index(index: usize, n: u16) -> Position {
        let n = usize::from(n);
        Position::new((index / n) as u16, (index % n) as u16)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

pub fn manhattan_distance(a: Position, b: Position) -> u32 {
    u32::from(a.row.abs_diff(b.row)) + u32::from(a.col.abs_diff(b.col))
}

/// One agent's single-step displacement. The declaration order is the
/// tie-break order used when ranking moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MoveAction {
    pub const ALL: [MoveAction; 5] = [
        MoveAction::Up,
        MoveAction::Down,
        MoveAction::Left,
        MoveAction::Right,
        MoveAction::Stay,
    ];

    /// `(row, col)` offset. Up decreases the row.
    pub const fn offset(self) -> (i32, i32) {
        match self {
            MoveAction::Up => (-1, 0),
            MoveAction::Down => (1, 0),
            MoveAction::Left => (0, -1),
            MoveAction::Right => (0, 1),
            MoveAction::Stay => (0, 0),
        }
    }

    const fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A set of moves stored as a bit mask; iterates in [`MoveAction::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MoveSet(u8);

impl MoveSet {
    pub const fn empty() -> Self {
        MoveSet(0)
    }

    pub const fn only(action: MoveAction) -> Self {
        MoveSet(action.bit())
    }

    pub fn insert(&mut self, action: MoveAction) {
        self.0 |= action.bit();
    }

    pub fn contains(self, action: MoveAction) -> bool {
        self.0 & action.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The `k`-th member in iteration order.
    pub fn nth(self, k: usize) -> Option<MoveAction> {
        self.iter().nth(k)
    }

    pub fn iter(self) -> impl Iterator<Item = MoveAction> {
        MoveAction::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<MoveAction> for MoveSet {
    fn from_iter<I: IntoIterator<Item = MoveAction>>(iter: I) -> Self {
        let mut set = MoveSet::empty();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridConfig {
    pub n: u16,
    pub n_agents: usize,
    pub n_goals: usize,
}

impl GridConfig {
    pub fn new(n: u16, n_agents: usize, n_goals: usize) -> Result<Self, GridError> {
        if n < 2 {
            return Err(GridError::InvalidConfig(format!("grid side {n} < 2")));
        }
        let cells = usize::from(n) * usize::from(n);
        if n_agents == 0 || 2 * n_agents > cells {
            return Err(GridError::InvalidConfig(format!(
                "{n_agents} agents do not fit a {n}x{n} grid together with their goals"
            )));
        }
        if n_goals != n_agents {
            return Err(GridError::InvalidConfig(format!(
                "goal count {n_goals} must equal agent count {n_agents}"
            )));
        }
        Ok(Self { n, n_agents, n_goals })
    }

    pub fn cells(&self) -> usize {
        usize::from(self.n) * usize::from(self.n)
    }
}

/// Positions of all agents at time `t`, the goal set and the capture flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    n: u16,
    t: u32,
    agent_pos: Vec<Position>,
    goals: Vec<Position>,
    captured: Vec<bool>,
}

impl WorldState {
    /// Builds the state at `t = 0`. Agents that start on a goal begin captured.
    pub fn new(n: u16, starts: Vec<Position>, goals: Vec<Position>) -> Result<Self, GridError> {
        if n < 2 {
            return Err(GridError::InvalidConfig(format!("grid side {n} < 2")));
        }
        if starts.is_empty() {
            return Err(GridError::InvalidConfig("no agents".into()));
        }
        for p in starts.iter().chain(goals.iter()) {
            if !p.in_bounds(n) {
                return Err(GridError::OutOfBounds {
                    row: p.row.into(),
                    col: p.col.into(),
                    n,
                });
            }
        }
        check_distinct(&starts)?;
        check_distinct(&goals)?;
        let mut goals = goals;
        goals.sort_unstable();
        let captured = starts.iter().map(|p| goals.binary_search(p).is_ok()).collect();
        Ok(Self {
            n,
            t: 0,
            agent_pos: starts,
            goals,
            captured,
        })
    }

    /// Assembles a state from raw parts; the caller guarantees every
    /// invariant (used by replay code that already validated its input).
    pub(crate) fn from_parts(
        n: u16,
        t: u32,
        agent_pos: Vec<Position>,
        goals: Vec<Position>,
        captured: Vec<bool>,
    ) -> Self {
        debug_assert!(goals.windows(2).all(|w| w[0] < w[1]));
        Self {
            n,
            t,
            agent_pos,
            goals,
            captured,
        }
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn n_agents(&self) -> usize {
        self.agent_pos.len()
    }

    pub fn positions(&self) -> &[Position] {
        &self.agent_pos
    }

    pub fn position(&self, agent: usize) -> Position {
        self.agent_pos[agent]
    }

    /// Goals in sorted order.
    pub fn goals(&self) -> &[Position] {
        &self.goals
    }

    pub fn captured(&self) -> &[bool] {
        &self.captured
    }

    pub fn is_captured(&self, agent: usize) -> bool {
        self.captured[agent]
    }

    pub fn captured_count(&self) -> usize {
        self.captured.iter().filter(|&&c| c).count()
    }

    pub fn is_goal(&self, p: Position) -> bool {
        self.goals.binary_search(&p).is_ok()
    }

    /// Agent standing on `p`, if any (lowest id if the state is transiently
    /// doubly occupied).
    pub fn occupant(&self, p: Position) -> Option<usize> {
        self.agent_pos.iter().position(|&q| q == p)
    }

    #[cfg(test)]
    pub(crate) fn set_time(&mut self, t: u32) {
        self.t = t;
    }

    pub(crate) fn check_agent(&self, agent: usize) -> Result<(), GridError> {
        if agent < self.n_agents() {
            Ok(())
        } else {
            Err(GridError::InvalidAgent {
                agent,
                n_agents: self.n_agents(),
            })
        }
    }

    fn captured_at(&self, p: Position) -> bool {
        self.agent_pos
            .iter()
            .zip(&self.captured)
            .any(|(&q, &c)| c && q == p)
    }
}

fn check_distinct(cells: &[Position]) -> Result<(), GridError> {
    for (i, a) in cells.iter().enumerate() {
        if cells[..i].contains(a) {
            return Err(GridError::DuplicateCell {
                row: a.row,
                col: a.col,
            });
        }
    }
    Ok(())
}

/// Moves available to `agent` when it proposes its next step.
///
/// A captured agent may only stay. Otherwise any in-bounds cardinal move is
/// allowed except into a cell held by a captured agent. Entering a cell of a
/// non-captured agent is allowed here; such conflicts are settled when the
/// proposals are merged.
pub fn legal_moves(s: &WorldState, agent: usize) -> Result<MoveSet, GridError> {
    s.check_agent(agent)?;
    if s.captured[agent] {
        return Ok(MoveSet::only(MoveAction::Stay));
    }
    let from = s.agent_pos[agent];
    let mut set = MoveSet::only(MoveAction::Stay);
    for action in &MoveAction::ALL[..4] {
        if let Some(to) = from.step(*action, s.n) {
            if !s.captured_at(to) {
                set.insert(*action);
            }
        }
    }
    Ok(set)
}

/// Applies one agent's move, leaving every other entry untouched. Time does
/// not advance. The mover becomes captured when it lands on a goal that no
/// captured agent already holds.
pub fn apply_move(s: &WorldState, agent: usize, m: MoveAction) -> Result<WorldState, GridError> {
    if !legal_moves(s, agent)?.contains(m) {
        return Err(GridError::IllegalMove { agent, action: m });
    }
    let mut next = s.clone();
    let to = s.agent_pos[agent]
        .step(m, s.n)
        .expect("legal move stays in bounds");
    next.agent_pos[agent] = to;
    if !next.captured[agent] && s.is_goal(to) && !s.captured_at(to) {
        next.captured[agent] = true;
    }
    Ok(next)
}

pub fn success_rate(s: &WorldState) -> Rational {
    Rational::new(s.captured_count() as i64, s.n_agents() as i64)
}

pub fn is_terminal(s: &WorldState, t_final: u32) -> bool {
    s.captured_count() == s.n_agents() || s.t >= t_final
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(row: u16, col: u16) -> Position {
        Position::new(row, col)
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_distance(p(0, 0), p(0, 0)), 0);
        assert_eq!(manhattan_distance(p(0, 0), p(2, 2)), 4);
        assert_eq!(manhattan_distance(p(1, 3), p(4, 1)), 5);
        assert_eq!(manhattan_distance(p(4, 1), p(1, 3)), 5);
    }

    #[test]
    fn corner_agent_has_three_moves() {
        let s = WorldState::new(5, vec![p(0, 0)], vec![p(4, 4)]).unwrap();
        let moves = legal_moves(&s, 0).unwrap();
        assert_eq!(
            moves.iter().collect::<Vec<_>>(),
            vec![MoveAction::Down, MoveAction::Right, MoveAction::Stay]
        );
    }

    #[test]
    fn interior_agent_has_all_moves() {
        let s = WorldState::new(5, vec![p(2, 2)], vec![p(4, 4)]).unwrap();
        assert_eq!(legal_moves(&s, 0).unwrap().len(), 5);
    }

    #[test]
    fn frozen_agent_only_stays() {
        let s = WorldState::new(5, vec![p(2, 2)], vec![p(2, 2)]).unwrap();
        assert!(s.is_captured(0));
        assert_eq!(legal_moves(&s, 0).unwrap(), MoveSet::only(MoveAction::Stay));
    }

    #[test]
    fn captured_cells_are_blocked_but_free_agents_are_not() {
        // agent 1 captured at (2,3), agent 2 free at (1,2)
        let s = WorldState::new(5, vec![p(2, 2), p(2, 3), p(1, 2)], vec![p(2, 3), p(0, 0), p(4, 4)])
            .unwrap();
        let moves = legal_moves(&s, 0).unwrap();
        assert!(!moves.contains(MoveAction::Right));
        assert!(moves.contains(MoveAction::Up));
        assert_eq!(moves.len(), 4);
    }

    #[test]
    fn invalid_agent_is_rejected() {
        let s = WorldState::new(5, vec![p(2, 2)], vec![p(4, 4)]).unwrap();
        assert_eq!(
            legal_moves(&s, 3),
            Err(GridError::InvalidAgent { agent: 3, n_agents: 1 })
        );
    }

    #[test]
    fn apply_move_single_cell_delta() {
        let s = WorldState::new(5, vec![p(1, 1), p(3, 3)], vec![p(4, 4), p(0, 4)]).unwrap();
        let same = apply_move(&s, 0, MoveAction::Stay).unwrap();
        assert_eq!(same, s);
        let next = apply_move(&s, 0, MoveAction::Right).unwrap();
        assert_eq!(next.position(0), p(1, 2));
        assert_eq!(next.position(1), s.position(1));
        assert_eq!(next.captured(), s.captured());
        assert_eq!(next.t(), s.t());
    }

    #[test]
    fn apply_move_onto_goal_captures() {
        let s = WorldState::new(5, vec![p(2, 1), p(0, 0)], vec![p(2, 2), p(4, 4)]).unwrap();
        let next = apply_move(&s, 0, MoveAction::Right).unwrap();
        assert!(next.is_captured(0));
        assert!(!next.is_captured(1));
    }

    #[test]
    fn apply_move_rejects_illegal() {
        let s = WorldState::new(5, vec![p(0, 0)], vec![p(4, 4)]).unwrap();
        assert_eq!(
            apply_move(&s, 0, MoveAction::Up),
            Err(GridError::IllegalMove {
                agent: 0,
                action: MoveAction::Up
            })
        );
    }

    #[test]
    fn success_rate_examples() {
        let none = WorldState::new(5, vec![p(0, 0), p(0, 1)], vec![p(4, 4), p(4, 3)]).unwrap();
        assert_eq!(success_rate(&none), Rational::from_integer(0));
        let half = WorldState::new(
            5,
            vec![p(0, 0), p(0, 1), p(1, 0), p(1, 1)],
            vec![p(0, 0), p(0, 1), p(4, 4), p(4, 3)],
        )
        .unwrap();
        assert_eq!(success_rate(&half), Rational::new(1, 2));
        let all = WorldState::new(5, vec![p(0, 0), p(0, 1)], vec![p(0, 1), p(0, 0)]).unwrap();
        assert_eq!(success_rate(&all), Rational::from_integer(1));
        assert!(is_terminal(&all, 15));
    }

    #[test]
    fn terminal_examples() {
        let mut none = WorldState::new(5, vec![p(0, 0), p(0, 1)], vec![p(4, 4), p(4, 3)]).unwrap();
        assert!(!is_terminal(&none, 15));
        none.set_time(15);
        assert!(is_terminal(&none, 15));
        let mut half = WorldState::new(5, vec![p(0, 0), p(0, 1)], vec![p(0, 0), p(4, 3)]).unwrap();
        half.set_time(3);
        assert!(!is_terminal(&half, 15));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            WorldState::new(5, vec![p(0, 0), p(0, 0)], vec![p(1, 1), p(2, 2)]),
            Err(GridError::DuplicateCell { .. })
        ));
        assert!(matches!(
            WorldState::new(5, vec![p(5, 0)], vec![p(1, 1)]),
            Err(GridError::OutOfBounds { .. })
        ));
        assert!(GridConfig::new(1, 1, 1).is_err());
        assert!(GridConfig::new(5, 13, 13).is_err());
        assert!(GridConfig::new(5, 2, 3).is_err());
        assert!(GridConfig::new(5, 12, 12).is_ok());
    }

    #[test]
    fn move_set_iteration_order() {
        let set: MoveSet = [MoveAction::Stay, MoveAction::Up, MoveAction::Right].into_iter().collect();
        assert_eq!(set.nth(0), Some(MoveAction::Up));
        assert_eq!(set.nth(1), Some(MoveAction::Right));
        assert_eq!(set.nth(2), Some(MoveAction::Stay));
        assert_eq!(set.nth(3), None);
    }
}
