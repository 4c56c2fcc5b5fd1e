//! Cooperative node values and the two update rules.
//!
//! All arithmetic is exact. A sample is built from the evaluated state in
//! three layers: the captured fraction, an optional self-capture penalty
//! `alpha / N_A` when the planning agent itself is on a goal, and a bonus
//! `(1 / N_A) * (1 - t / T_final)` that prefers states reached earlier.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("agent count must be at least 1")]
    NoAgents,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("unknown alpha {0:?}; expected 0, 0.5 or 1")]
    UnknownAlpha(String),
    #[error("unknown update rule {0:?}; expected mean or max")]
    UnknownRule(String),
}

/// Weight of the self-capture penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Alpha {
    #[default]
    Zero,
    Half,
    One,
}

impl Alpha {
    pub const ALL: [Alpha; 3] = [Alpha::Zero, Alpha::Half, Alpha::One];

    pub fn as_rational(self) -> Rational {
        match self {
            Alpha::Zero => Rational::from_integer(0),
            Alpha::Half => Rational::new(1, 2),
            Alpha::One => Rational::from_integer(1),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alpha::Zero => "0",
            Alpha::Half => "0.5",
            Alpha::One => "1",
        })
    }
}

impl FromStr for Alpha {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" | "0.0" => Ok(Alpha::Zero),
            "0.5" | ".5" | "1/2" => Ok(Alpha::Half),
            "1" | "1.0" => Ok(Alpha::One),
            other => Err(ValueError::UnknownAlpha(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UpdateRule {
    /// Running mean over all samples seen by the node.
    #[default]
    Mean,
    /// Best sample seen by the node.
    Max,
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::Mean => "mean",
            UpdateRule::Max => "max",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(UpdateRule::Mean),
            "max" => Ok(UpdateRule::Max),
            other => Err(ValueError::UnknownRule(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueParams {
    pub alpha: Alpha,
    pub update_rule: UpdateRule,
    pub n_agents: u32,
    pub t_final: u32,
}

impl ValueParams {
    pub fn new(
        alpha: Alpha,
        update_rule: UpdateRule,
        n_agents: u32,
        t_final: u32,
    ) -> Result<Self, ValueError> {
        if n_agents == 0 {
            return Err(ValueError::NoAgents);
        }
        if t_final == 0 {
            return Err(ValueError::ZeroHorizon);
        }
        Ok(Self {
            alpha,
            update_rule,
            n_agents,
            t_final,
        })
    }
}

/// Running value estimate and visit count of one search node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeStats {
    pub value: Rational,
    pub visits: u32,
}

impl Default for NodeStats {
    fn default() -> Self {
        Self {
            value: Rational::from_integer(0),
            visits: 0,
        }
    }
}

pub fn value_naive(goals_captured: u32, n_agents: u32) -> Rational {
    debug_assert!(goals_captured <= n_agents);
    Rational::new(i64::from(goals_captured), i64::from(n_agents))
}

/// Captured fraction, lowered by `alpha / N_A` when `mark` (the planning
/// agent itself holds a goal) is set.
pub fn value_mod(goals_captured: u32, mark: bool, p: &ValueParams) -> Rational {
    let base = value_naive(goals_captured, p.n_agents);
    if mark {
        base - p.alpha.as_rational() / i64::from(p.n_agents)
    } else {
        base
    }
}

pub fn depth_adjusted(value_mod: Rational, t_current: u32, p: &ValueParams) -> Rational {
    debug_assert!(t_current <= p.t_final);
    let remaining = Rational::new(
        i64::from(p.t_final) - i64::from(t_current),
        i64::from(p.t_final),
    );
    value_mod + remaining / i64::from(p.n_agents)
}

/// Folds one sample into a node.
///
/// With `K` the visit count after this update, the mean rule computes
/// `((K - 1) * value + sample) / K` and the max rule keeps the larger of the
/// two. A node's first sample becomes its value under either rule.
pub fn update_value(stats: NodeStats, sample: Rational, rule: UpdateRule) -> NodeStats {
    let k = stats.visits + 1;
    if stats.visits == 0 {
        return NodeStats {
            value: sample,
            visits: k,
        };
    }
    let value = match rule {
        UpdateRule::Mean => (stats.value * i64::from(k - 1) + sample) / i64::from(k),
        UpdateRule::Max => stats.value.max(sample),
    };
    NodeStats { value, visits: k }
}
