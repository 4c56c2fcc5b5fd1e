//! Experiment harness: full-accuracy suites and horizon sweeps, written as
//! CSV.
//!
//! # Run records
//!
//! One CSV row per run with the columns
//!
//! ```text
//! instance,n,n_agents,alpha,update_rule,iterations,exploration_c,t_final,
//! seed,repeat,success_rate,makespan,total_time_s,avg_agent_time_s,
//! max_agent_time_s,oracle_makespan,lower_bound
//! ```
//!
//! `seed` is the suite seed (also the instance generation seed) and the
//! planner seed of the run is `mix_words(&[seed, k, repeat])` where `k` is the
//! instance index from its name. The last two columns are empty unless an
//! oracle check was requested and the instance is small enough.
//!
//! # Sweep points
//!
//! `t_final,mean_success_rate,runs`, sorted by `t_final`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::{run_episode, EpisodeConfig, EpisodeError};
use crate::engine::{EngineError, SearchBudget};
use crate::oracle::{self, OracleError};
use crate::scenario::{generate_instance, search_space_exponent, Instance, InstanceName, ScenarioError};
use crate::seed::mix_words;
use crate::value::{Alpha, UpdateRule, ValueError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no {wanted} feasible instances among the first {tried} draws for N={n}, N_A={n_agents}")]
    Infeasible {
        n: u16,
        n_agents: usize,
        wanted: u32,
        tried: u32,
    },
    #[error("invalid sweep range {0:?}; expected start:end:step")]
    SweepRange(String),
}

/// Search and value settings shared by every run of a suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub iterations: u32,
    pub alpha: Alpha,
    pub update_rule: UpdateRule,
    pub exploration_c: f64,
    pub parallel_planning: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            iterations: 2000,
            alpha: Alpha::Zero,
            update_rule: UpdateRule::Mean,
            exploration_c: SearchBudget::DEFAULT_EXPLORATION,
            parallel_planning: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    /// `(N, N_A)` pairs.
    pub sizes: Vec<(u16, usize)>,
    /// Instances per size, generated with `k = 1..=instances`.
    pub instances: u32,
    pub seed: u64,
    /// Horizon; `None` means `3 * N`.
    pub t_final: Option<u32>,
    pub repeats: u32,
    pub settings: RunSettings,
    pub oracle_check: bool,
    /// Skip generated instances whose goals cannot all be captured (see
    /// [`oracle::capture_upper_bound`]); `k` then runs past `instances`.
    pub feasible_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub n: u16,
    pub n_agents: usize,
    pub alpha: String,
    pub update_rule: String,
    pub iterations: u32,
    pub exploration_c: f64,
    pub t_final: u32,
    pub seed: u64,
    pub repeat: u32,
    pub success_rate: f64,
    pub makespan: u32,
    pub total_time_s: f64,
    pub avg_agent_time_s: f64,
    pub max_agent_time_s: f64,
    pub oracle_makespan: Option<u32>,
    pub lower_bound: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_final: u32,
    pub mean_success_rate: f64,
    pub runs: usize,
}

/// Per-instance aggregate in the shape of a full-accuracy results table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub n: u16,
    pub n_agents: usize,
    pub search_space_exponent: u64,
    pub runs: usize,
    pub mean_success_rate: f64,
    pub mean_total_time_s: f64,
    pub mean_avg_agent_time_s: f64,
    pub mean_max_agent_time_s: f64,
    pub max_makespan: u32,
}

pub fn run_seed(seed: u64, k: u32, repeat: u32) -> u64 {
    mix_words(&[seed, u64::from(k), u64::from(repeat)])
}

fn instance_index(instance: &Instance) -> u32 {
    InstanceName::parse(&instance.name).map(|n| n.k).unwrap_or(0)
}

/// Runs one episode and turns it into a record.
pub fn run_one(
    instance: &Instance,
    settings: &RunSettings,
    t_final: u32,
    seed: u64,
    repeat: u32,
    oracle_check: bool,
) -> Result<RunRecord, BenchError> {
    let k = instance_index(instance);
    let cfg = EpisodeConfig {
        grid: instance.grid,
        budget: SearchBudget::with_exploration(settings.iterations, t_final, settings.exploration_c)?,
        alpha: settings.alpha,
        update_rule: settings.update_rule,
        global_seed: run_seed(seed, k, repeat),
        parallel: settings.parallel_planning,
    };
    let trace = run_episode(&cfg, instance)?;
    let small = instance.grid.n <= oracle::MAX_SIDE && instance.grid.n_agents <= oracle::MAX_AGENTS;
    let oracle_makespan = if oracle_check && small {
        oracle::exact_joint_search(instance, t_final)?.optimal_makespan
    } else {
        None
    };
    let lower_bound = if oracle_check && instance.grid.n_agents <= oracle::MAX_ASSIGNMENT_AGENTS {
        Some(oracle::assignment_lower_bound(instance)?)
    } else {
        None
    };
    let sr = trace.success_rate;
    Ok(RunRecord {
        instance: instance.name.clone(),
        n: instance.grid.n,
        n_agents: instance.grid.n_agents,
        alpha: settings.alpha.to_string(),
        update_rule: settings.update_rule.to_string(),
        iterations: settings.iterations,
        exploration_c: settings.exploration_c,
        t_final,
        seed,
        repeat,
        success_rate: *sr.numer() as f64 / *sr.denom() as f64,
        makespan: trace.makespan,
        total_time_s: trace.total_time(),
        avg_agent_time_s: trace.avg_agent_time(),
        max_agent_time_s: trace.max_agent_time(),
        oracle_makespan,
        lower_bound,
    })
}

const FEASIBLE_DRAWS_PER_INSTANCE: u32 = 100;

/// Every instance of the suite, in `(size, k)` order.
pub fn suite_instances(spec: &SuiteSpec) -> Result<Vec<Instance>, BenchError> {
    let mut out = Vec::new();
    for &(n, n_agents) in &spec.sizes {
        if !spec.feasible_only {
            for k in 1..=spec.instances {
                out.push(generate_instance(n, n_agents, k, spec.seed)?);
            }
            continue;
        }
        let tried = spec.instances.saturating_mul(FEASIBLE_DRAWS_PER_INSTANCE).max(1);
        let mut found = 0;
        for k in 1..=tried {
            if found == spec.instances {
                break;
            }
            let inst = generate_instance(n, n_agents, k, spec.seed)?;
            if oracle::capture_upper_bound(&inst.initial_state().map_err(ScenarioError::from)?) == n_agents {
                out.push(inst);
                found += 1;
            }
        }
        if found < spec.instances {
            return Err(BenchError::Infeasible {
                n,
                n_agents,
                wanted: spec.instances,
                tried,
            });
        }
    }
    Ok(out)
}

/// Runs `repeats` episodes per instance with horizon `3 N` unless overridden.
/// Rows come back in `(size, k, repeat)` order regardless of scheduling.
pub fn run_full_accuracy(spec: &SuiteSpec) -> Result<Vec<RunRecord>, BenchError> {
    let instances = suite_instances(spec)?;
    run_instances(&instances, spec)
}

pub fn run_instances(instances: &[Instance], spec: &SuiteSpec) -> Result<Vec<RunRecord>, BenchError> {
    let jobs: Vec<(&Instance, u32)> = instances
        .iter()
        .flat_map(|inst| (0..spec.repeats).map(move |r| (inst, r)))
        .collect();
    jobs.par_iter()
        .map(|&(inst, repeat)| {
            let t_final = spec.t_final.unwrap_or(3 * u32::from(inst.grid.n));
            run_one(inst, &spec.settings, t_final, spec.seed, repeat, spec.oracle_check)
        })
        .collect()
}

/// Reruns the episode a record describes. The instance is regenerated from
/// its name and the record seed.
pub fn replay(record: &RunRecord) -> Result<RunRecord, BenchError> {
    let name = InstanceName::parse(&record.instance)?;
    let instance = generate_instance(name.n, name.n_agents, name.k, record.seed)?;
    let settings = RunSettings {
        iterations: record.iterations,
        alpha: record.alpha.parse()?,
        update_rule: record.update_rule.parse()?,
        exploration_c: record.exploration_c,
        parallel_planning: false,
    };
    run_one(
        &instance,
        &settings,
        record.t_final,
        record.seed,
        record.repeat,
        record.oracle_makespan.is_some() || record.lower_bound.is_some(),
    )
}

/// Mean success rate per horizon, averaged over every instance and repeat.
pub fn run_time_accuracy_sweep(
    instances: &[Instance],
    t_finals: &[u32],
    settings: &RunSettings,
    repeats: u32,
    seed: u64,
) -> Result<Vec<SweepPoint>, BenchError> {
    let mut horizons = t_finals.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    let jobs: Vec<(u32, &Instance, u32)> = horizons
        .iter()
        .flat_map(|&t| {
            instances
                .iter()
                .flat_map(move |inst| (0..repeats).map(move |r| (t, inst, r)))
        })
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(t, inst, r)| run_one(inst, settings, t, seed, r, false))
        .collect::<Result<_, _>>()?;
    Ok(horizons
        .iter()
        .map(|&t| {
            let rates: Vec<f64> = records
                .iter()
                .filter(|rec| rec.t_final == t)
                .map(|rec| rec.success_rate)
                .collect();
            SweepPoint {
                t_final: t,
                mean_success_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
                runs: rates.len(),
            }
        })
        .collect())
}

/// Parses `start:end:step` (inclusive end).
pub fn parse_sweep_range(text: &str) -> Result<Vec<u32>, BenchError> {
    let bad = || BenchError::SweepRange(text.to_string());
    let parts: Vec<u32> = text
        .split(':')
        .map(|p| p.trim().parse::<u32>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if step == 0 || end < start {
        return Err(bad());
    }
    Ok((start..=end).step_by(step as usize).collect())
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.instance.as_str()) {
            names.push(&r.instance);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.instance == name).collect();
            let mean = |f: fn(&RunRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
            SummaryRow {
                instance: name.to_string(),
                n: rows[0].n,
                n_agents: rows[0].n_agents,
                search_space_exponent: search_space_exponent(rows[0].n.into(), rows[0].n_agents as u32),
                runs: rows.len(),
                mean_success_rate: mean(|r| r.success_rate),
                mean_total_time_s: mean(|r| r.total_time_s),
                mean_avg_agent_time_s: mean(|r| r.avg_agent_time_s),
                mean_max_agent_time_s: mean(|r| r.max_agent_time_s),
                max_makespan: rows.iter().map(|r| r.makespan).max().unwrap_or(0),
            }
        })
        .collect()
}

pub fn write_records_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_spec() -> SuiteSpec {
        SuiteSpec {
            sizes: vec![(4, 2)],
            instances: 2,
            seed: 5,
            t_final: None,
            repeats: 2,
            settings: RunSettings {
                iterations: 200,
                ..RunSettings::default()
            },
            oracle_check: true,
            feasible_only: false,
        }
    }

    #[test]
    fn sweep_range_parsing() {
        assert_eq!(parse_sweep_range("5:15:5").unwrap(), vec![5, 10, 15]);
        assert_eq!(parse_sweep_range("0:3:2").unwrap(), vec![0, 2]);
        assert!(parse_sweep_range("5:1:1").is_err());
        assert!(parse_sweep_range("1:5:0").is_err());
        assert!(parse_sweep_range("1:5").is_err());
    }

    #[test]
    fn rows_are_ordered_and_consistent() {
        let records = run_full_accuracy(&quick_spec()).unwrap();
        let keys: Vec<(String, u32)> = records.iter().map(|r| (r.instance.clone(), r.repeat)).collect();
        assert_eq!(
            keys,
            vec![
                ("MP42-1".into(), 0),
                ("MP42-1".into(), 1),
                ("MP42-2".into(), 0),
                ("MP42-2".into(), 1)
            ]
        );
        for r in &records {
            assert!((0.0..=1.0).contains(&r.success_rate));
            assert!(r.makespan <= r.t_final);
            assert!(r.avg_agent_time_s <= r.max_agent_time_s + 1e-12);
            assert!(r.max_agent_time_s <= r.total_time_s + 1e-12);
            assert!(r.lower_bound.is_some());
        }
    }

    #[test]
    fn zero_horizon_reports_initial_success() {
        let spec = SuiteSpec {
            t_final: Some(0),
            ..quick_spec()
        };
        for r in run_full_accuracy(&spec).unwrap() {
            assert_eq!(r.success_rate, 0.0);
            assert_eq!(r.makespan, 0);
            assert_eq!(r.total_time_s, 0.0);
        }
    }

    #[test]
    fn csv_round_trip_and_replay() {
        let records = run_full_accuracy(&quick_spec()).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "instance,n,n_agents,alpha,update_rule,iterations,exploration_c,t_final,seed,repeat,\
             success_rate,makespan,total_time_s,avg_agent_time_s,max_agent_time_s,oracle_makespan,lower_bound\n"
        ));
        let back = read_records_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), records.len());
        for (orig, parsed) in records.iter().zip(&back) {
            let again = replay(parsed).unwrap();
            assert_eq!(again.success_rate, orig.success_rate);
            assert_eq!(again.makespan, orig.makespan);
            assert_eq!(again.oracle_makespan, orig.oracle_makespan);
        }
    }

    #[test]
    fn summary_groups_by_instance() {
        let records = run_full_accuracy(&quick_spec()).unwrap();
        let summary = summarize(&records);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].runs, 2);
        assert_eq!(summary[0].search_space_exponent, 24);
    }

    #[test]
    fn feasible_only_skips_fenced_goals() {
        let spec = SuiteSpec {
            sizes: vec![(5, 5)],
            instances: 20,
            seed: 1,
            feasible_only: true,
            ..quick_spec()
        };
        let names: Vec<String> = suite_instances(&spec).unwrap().into_iter().map(|i| i.name).collect();
        assert_eq!(names.len(), 20);
        assert!(!names.contains(&"MP55-18".to_string()));
        assert!(!names.contains(&"MP55-20".to_string()));
        assert!(names.contains(&"MP55-19".to_string()));
    }

    #[test]
    fn sweep_is_sorted() {
        let spec = quick_spec();
        let instances = suite_instances(&spec).unwrap();
        let points = run_time_accuracy_sweep(&instances, &[6, 0, 3], &spec.settings, 1, 1).unwrap();
        let ts: Vec<_> = points.iter().map(|p| p.t_final).collect();
        assert_eq!(ts, vec![0, 3, 6]);
        assert_eq!(points[0].mean_success_rate, 0.0);
        assert!(points.iter().all(|p| p.runs == 2));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &points).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t_final,mean_success_rate,runs\n"));
    }
}
