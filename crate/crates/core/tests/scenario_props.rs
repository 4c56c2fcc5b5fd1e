use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use mamcts::grid::Position;
use mamcts::scenario::{
    format_instance, generate_instance, parse_instance, read_instance, write_instance, InstanceName,
};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/MP52-1.txt");

#[test]
fn fixture_matches_generator() {
    let shipped = read_instance(Path::new(FIXTURE)).unwrap();
    assert_eq!(shipped, generate_instance(5, 2, 1, 1).unwrap());
    assert_eq!(shipped.starts, vec![Position::new(0, 2), Position::new(3, 3)]);
    assert_eq!(shipped.goals, vec![Position::new(1, 1), Position::new(1, 2)]);
}

#[test]
fn ten_thousand_random_instances_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..10_000u32 {
        let n: u16 = rng.gen_range(2..=30);
        let max_agents = (usize::from(n) * usize::from(n) / 2).min(99);
        let inst = generate_instance(n, rng.gen_range(1..=max_agents), i, rng.gen()).unwrap();
        assert_eq!(parse_instance(&format_instance(&inst)).unwrap(), inst);
        if i % 500 == 0 {
            let path = dir.path().join(format!("{}.txt", inst.name));
            write_instance(&path, &inst).unwrap();
            assert_eq!(read_instance(&path).unwrap(), inst);
        }
    }
}

#[test]
fn name_grammar_is_total_and_unambiguous() {
    let mut seen = std::collections::HashSet::new();
    for n in 2u16..=99 {
        for n_agents in 1usize..=99 {
            if 2 * n_agents > usize::from(n) * usize::from(n) {
                continue;
            }
            let name = InstanceName::new(n, n_agents, 7).unwrap();
            let text = name.to_string();
            assert_eq!(InstanceName::parse(&text).unwrap(), name, "{text}");
            assert!(seen.insert(text));
        }
    }
}

#[test]
fn generated_cells_are_uniform() {
    let (n, n_agents) = (5u16, 2usize);
    let cells = usize::from(n) * usize::from(n);
    let draws = 100_000u32;
    let mut counts = vec![0u64; cells];
    for k in 0..draws {
        let inst = generate_instance(n, n_agents, k, 12345).unwrap();
        for p in inst.starts.iter().chain(&inst.goals) {
            counts[p.index(n)] += 1;
        }
    }
    let expected = f64::from(draws) * (2 * n_agents) as f64 / cells as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi-square {chi2:.2} >= {critical:.2}");
    for &c in &counts {
        let freq = c as f64 / f64::from(draws);
        let want = expected / f64::from(draws);
        assert!((freq - want).abs() <= 0.01, "cell frequency {freq} vs {want}");
    }
}

proptest! {
    #[test]
    fn generation_is_deterministic_and_distinct(n in 2u16..=12, k in 0u32..1000, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let max_agents = usize::from(n) * usize::from(n) / 2;
        let n_agents = 1 + ((max_agents - 1) as f64 * frac) as usize;
        let a = generate_instance(n, n_agents, k, seed).unwrap();
        prop_assert_eq!(&a, &generate_instance(n, n_agents, k, seed).unwrap());
        let mut all: Vec<_> = a.starts.iter().chain(&a.goals).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), 2 * n_agents);
        prop_assert_eq!(InstanceName::parse(&a.name).unwrap(), InstanceName::new(n, n_agents, k).unwrap());
    }

    #[test]
    fn corrupted_lines_name_their_line(n in 3u16..=8, seed in any::<u64>(), victim in 0usize..4) {
        let inst = generate_instance(n, 2, 1, seed).unwrap();
        let text = format_instance(&inst);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // Lines 0 and 1 are comments and line 2 is the header.
        let target = 3 + victim;
        lines[target] = format!("{} 0", n);
        let err = parse_instance(&lines.join("\n")).unwrap_err().to_string();
        let needle = format!("line {}", target + 1);
        prop_assert!(err.contains(&needle), "{}", err);
    }
}
