//! Instances: seeded generation, `MP{N}{N_A}-{k}` names, the text file
//! format and the full-search-space metric.
//!
//! # File format
//!
//! ```text
//! # name MP52-1
//! # gen_seed 1
//! 5 2
//! 0 3
//! 4 1
//! 2 2
//! 1 0
//! ```
//!
//! The first non-comment line is `N N_A`, followed by `N_A` start cells and
//! `N_A` goal cells, one `row col` pair per line, agents in order. Lines
//! starting with `#` are comments; the `name` and `gen_seed` comments carry
//! the instance metadata and fall back to `MP{N}{N_A}-0` and `0`.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{GridConfig, GridError, Position, WorldState};
use crate::seed::mix_words;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid instance name {0:?}")]
    Name(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub grid: GridConfig,
    pub starts: Vec<Position>,
    pub goals: Vec<Position>,
    pub gen_seed: u64,
}

impl Instance {
    /// Validates that every start and goal is in bounds and that all of them
    /// are pairwise distinct.
    pub fn new(
        name: String,
        grid: GridConfig,
        starts: Vec<Position>,
        goals: Vec<Position>,
        gen_seed: u64,
    ) -> Result<Self, GridError> {
        if starts.len() != grid.n_agents || goals.len() != grid.n_goals {
            return Err(GridError::InvalidConfig(format!(
                "{} starts and {} goals for {} agents",
                starts.len(),
                goals.len(),
                grid.n_agents
            )));
        }
        let all: Vec<_> = starts.iter().chain(&goals).copied().collect();
        for (i, p) in all.iter().enumerate() {
            if !p.in_bounds(grid.n) {
                return Err(GridError::OutOfBounds {
                    row: p.row.into(),
                    col: p.col.into(),
                    n: grid.n,
                });
            }
            if all[..i].contains(p) {
                return Err(GridError::DuplicateCell {
                    row: p.row,
                    col: p.col,
                });
            }
        }
        Ok(Self {
            name,
            grid,
            starts,
            goals,
            gen_seed,
        })
    }

    pub fn initial_state(&self) -> Result<WorldState, GridError> {
        WorldState::new(self.grid.n, self.starts.clone(), self.goals.clone())
    }
}

/// Parsed form of an instance name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceName {
    pub n: u16,
    pub n_agents: usize,
    pub k: u32,
}

fn valid_split(n: u32, n_agents: u32) -> bool {
    (2..=99).contains(&n) && (1..=99).contains(&n_agents) && 2 * n_agents <= n * n
}

fn parse_number(digits: &str) -> Option<u32> {
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

fn digit_splits(digits: &str) -> Vec<(u32, u32)> {
    (1..digits.len())
        .filter_map(|cut| {
            let n = parse_number(&digits[..cut])?;
            let a = parse_number(&digits[cut..])?;
            valid_split(n, a).then_some((n, a))
        })
        .collect()
}

impl InstanceName {
    pub fn new(n: u16, n_agents: usize, k: u32) -> Result<Self, ScenarioError> {
        if !valid_split(u32::from(n), n_agents as u32) {
            return Err(ScenarioError::Name(format!("MP({n},{n_agents})-{k}")));
        }
        Ok(Self { n, n_agents, k })
    }

    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        let bad = || ScenarioError::Name(name.to_string());
        let body = name.strip_prefix("MP").ok_or_else(bad)?;
        let (head, k) = body.split_once('-').ok_or_else(bad)?;
        let k = parse_number(k).ok_or_else(bad)?;
        let (n, n_agents) = match head.split_once('_') {
            Some((n, a)) => {
                let n = parse_number(n).ok_or_else(bad)?;
                let a = parse_number(a).ok_or_else(bad)?;
                if !valid_split(n, a) {
                    return Err(bad());
                }
                (n, a)
            }
            None => {
                if !head.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad());
                }
                match digit_splits(head).as_slice() {
                    [(n, a)] => (*n, *a),
                    _ => return Err(bad()),
                }
            }
        };
        Ok(Self {
            n: n as u16,
            n_agents: n_agents as usize,
            k,
        })
    }
}

impl fmt::Display for InstanceName {
    /// `MP{N}{N_A}-{k}`, or `MP{N}_{N_A}-{k}` when the digit run alone could
    /// be split two ways (for example `8` and `25` against `82` and `5`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = format!("{}{}", self.n, self.n_agents);
        if digit_splits(&digits).len() == 1 {
            write!(f, "MP{digits}-{}", self.k)
        } else {
            write!(f, "MP{}_{}-{}", self.n, self.n_agents, self.k)
        }
    }
}

/// Draws `n_agents` start cells and then `n_agents` goal cells uniformly
/// without replacement. The random stream is keyed by
/// `mix_words(&[seed, n, n_agents, k])`.
pub fn generate_instance(n: u16, n_agents: usize, k: u32, seed: u64) -> Result<Instance, ScenarioError> {
    let grid = GridConfig::new(n, n_agents, n_agents)?;
    let name = InstanceName::new(n, n_agents, k)?;
    let stream = mix_words(&[seed, u64::from(n), n_agents as u64, u64::from(k)]);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut cells: Vec<usize> = (0..grid.cells()).collect();
    let (picked, _) = cells.partial_shuffle(&mut rng, 2 * n_agents);
    let picked: Vec<Position> = picked.iter().map(|&i| Position::from_index(i, n)).collect();
    let (starts, goals) = picked.split_at(n_agents);
    Ok(Instance::new(
        name.to_string(),
        grid,
        starts.to_vec(),
        goals.to_vec(),
        seed,
    )?)
}

/// Exponent `e` of the full search space `4^e` with `e = 3 * N * N_A`.
pub fn search_space_exponent(n: u32, n_agents: u32) -> u64 {
    3 * u64::from(n) * u64::from(n_agents)
}

pub fn format_instance(instance: &Instance) -> String {
    let mut out = String::new();
    out.push_str(&format!("# name {}\n", instance.name));
    out.push_str(&format!("# gen_seed {}\n", instance.gen_seed));
    out.push_str(&format!("{} {}\n", instance.grid.n, instance.grid.n_agents));
    for p in instance.starts.iter().chain(&instance.goals) {
        out.push_str(&format!("{} {}\n", p.row, p.col));
    }
    out
}

pub fn parse_instance(text: &str) -> Result<Instance, ScenarioError> {
    let mut name = None;
    let mut gen_seed = None;
    let mut header: Option<(usize, u16, usize)> = None;
    let mut cells: Vec<(usize, Position)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            match (words.next(), words.next()) {
                (Some("name"), Some(v)) => name = Some(v.to_string()),
                (Some("gen_seed"), Some(v)) => {
                    gen_seed = Some(
                        v.parse::<u64>()
                            .map_err(|_| parse_err(line_no, format!("bad gen_seed {v:?}")))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(line_no, format!("expected two integers, found {line:?}")));
        }
        let a: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("not an integer: {:?}", fields[0])))?;
        let b: u32 = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("not an integer: {:?}", fields[1])))?;
        match header {
            None => {
                let n = u16::try_from(a).map_err(|_| parse_err(line_no, "grid side too large"))?;
                GridConfig::new(n, b as usize, b as usize)
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
                header = Some((line_no, n, b as usize));
            }
            Some((_, n, n_agents)) => {
                if cells.len() == 2 * n_agents {
                    return Err(parse_err(line_no, "more cells than the header announces"));
                }
                if a >= u32::from(n) || b >= u32::from(n) {
                    return Err(parse_err(line_no, format!("cell ({a}, {b}) outside a {n}x{n} grid")));
                }
                let p = Position::new(a as u16, b as u16);
                if cells.iter().any(|(_, q)| *q == p) {
                    return Err(parse_err(line_no, format!("duplicate cell ({a}, {b})")));
                }
                cells.push((line_no, p));
            }
        }
    }
    let (header_line, n, n_agents) = header.ok_or_else(|| parse_err(1, "missing `N N_A` header"))?;
    if cells.len() != 2 * n_agents {
        return Err(parse_err(
            header_line,
            format!("expected {} cells, found {}", 2 * n_agents, cells.len()),
        ));
    }
    let grid = GridConfig::new(n, n_agents, n_agents)?;
    let positions: Vec<Position> = cells.into_iter().map(|(_, p)| p).collect();
    let (starts, goals) = positions.split_at(n_agents);
    let name = match name {
        Some(name) => name,
        None => InstanceName { n, n_agents, k: 0 }.to_string(),
    };
    Ok(Instance::new(
        name,
        grid,
        starts.to_vec(),
        goals.to_vec(),
        gen_seed.unwrap_or(0),
    )?)
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), ScenarioError> {
    fs::write(path, format_instance(instance))?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance, ScenarioError> {
    parse_instance(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_names_round_trip() {
        for (name, n, a, k) in [
            ("MP52-1", 5, 2, 1),
            ("MP1010-3", 10, 10, 3),
            ("MP105-3", 10, 5, 3),
            ("MP2020-3", 20, 20, 3),
            ("MP1515-2", 15, 15, 2),
            ("MP152-3", 15, 2, 3),
        ] {
            let parsed = InstanceName::parse(name).unwrap();
            assert_eq!(parsed, InstanceName { n, n_agents: a, k });
            assert_eq!(parsed.to_string(), name);
        }
    }

    #[test]
    fn ambiguous_digit_runs_get_a_separator() {
        // 8x8 with 25 agents versus 82x82 with 5 agents
        let a = InstanceName::new(8, 25, 1).unwrap();
        let b = InstanceName::new(82, 5, 1).unwrap();
        assert_eq!(a.to_string(), "MP8_25-1");
        assert_eq!(b.to_string(), "MP82_5-1");
        assert!(InstanceName::parse("MP825-1").is_err());
        assert_eq!(InstanceName::parse("MP8_25-1").unwrap(), a);
    }

    #[test]
    fn malformed_names_are_rejected() {
        for bad in ["", "MP", "MP52", "XX52-1", "MP5a-1", "MP52-", "MP52-01", "MP1-1", "MP5_0-1"] {
            assert!(InstanceName::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn generation_is_deterministic_and_distinct() {
        let a = generate_instance(5, 2, 1, 42).unwrap();
        let b = generate_instance(5, 2, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.name, "MP52-1");
        let mut cells: Vec<_> = a.starts.iter().chain(&a.goals).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 4);
        assert_ne!(a, generate_instance(5, 2, 2, 42).unwrap());
        assert!(generate_instance(3, 5, 1, 0).is_err());
    }

    #[test]
    fn search_space_examples() {
        assert_eq!(search_space_exponent(5, 2), 30);
        assert_eq!(search_space_exponent(20, 20), 1200);
        assert_eq!(search_space_exponent(1, 0), 0);
    }

    #[test]
    fn text_round_trip() {
        let inst = generate_instance(8, 4, 2, 7).unwrap();
        assert_eq!(parse_instance(&format_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn duplicate_start_reports_line() {
        let text = "# comment\n5 2\n0 0\n0 0\n1 1\n2 2\n";
        match parse_instance(text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let cases = [
            ("5 2\n0 0\n0 7\n1 1\n2 2\n", 3),
            ("5 2\n0 0\n0 1\nx 1\n2 2\n", 4),
            ("5 2\n0 0\n0 1 2\n", 3),
            ("5 2\n0 0\n0 1\n1 1\n", 1),
            ("5 2\n0 0\n0 1\n1 1\n2 2\n3 3\n", 6),
            ("1 1\n0 0\n", 1),
        ];
        for (text, expected) in cases {
            match parse_instance(text) {
                Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("unexpected {other:?} for {text:?}"),
            }
        }
    }

    #[test]
    fn missing_metadata_defaults() {
        let inst = parse_instance("5 2\n0 0\n0 1\n1 1\n2 2\n").unwrap();
        assert_eq!(inst.name, "MP52-0");
        assert_eq!(inst.gen_seed, 0);
    }
}
