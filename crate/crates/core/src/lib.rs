//! Decentralized, communication-less multi-agent task assignment on discrete
//! grids.
//!
//! Every agent runs its own Monte-Carlo Tree Search over the joint future of
//! all agents and picks its next move from the shared position snapshot
//! alone. The per-agent choices are merged into the next global state each
//! time step until every agent sits frozen on a goal or the horizon expires.
//!
//! Module map:
//!
//! - [`grid`]: positions, moves, world state and the movement rules.
//! - [`value`]: the cooperative reward family and the value update rules.
//! - [`engine`]: single-agent search (selection, expansion, delta-state
//!   rollout, backpropagation, best action).
//! - [`coordinator`]: the outer loop, merge of simultaneous proposals and
//!   per-agent seeding.
//! - [`oracle`]: brute-force optimal solvers for small instances.
//! - [`scenario`]: seeded instance generation, naming and the instance file
//!   format.
//! - [`bench`]: the experiment harness behind the `mamcts-bench` binary.

pub mod bench;
pub mod coordinator;
pub mod engine;
pub mod grid;
pub mod oracle;
pub mod scenario;
pub mod seed;
pub mod value;

/// Exact rational used for every success rate and node value.
pub type Rational = num_rational::Ratio<i64>;

pub use coordinator::{merge_states, run_episode, EpisodeConfig, EpisodeTrace};
pub use engine::{plan_move, SearchBudget};
pub use grid::{GridConfig, MoveAction, Position, WorldState};
pub use scenario::Instance;
pub use value::{Alpha, NodeStats, UpdateRule, ValueParams};
