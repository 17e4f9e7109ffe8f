//! Exhaustive-search oracle for the planner on CoinCorridor.

use evoplay_core::game::{builtin, heuristic_value, Action, GameState, ScoreBounds, Status};
use evoplay_core::planner::{RheaConfig, Rhea};

/// Value of every length-`l` sequence, scored like the planner (terminal
/// states stop the simulation, earlier wins get `(l - d)·1e-4`), returning
/// the set of first actions that reach the maximum.
fn optimal_first_actions(root: &GameState, l: usize, bounds: &ScoreBounds) -> Vec<Action> {
    let total = 5usize.pow(l as u32);
    let mut best = f64::NEG_INFINITY;
    let mut firsts: Vec<Action> = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut s = root.clone();
        let mut depth = 0;
        let mut first = Action::Nil;
        for i in 0..l {
            let a = Action::ALL[c % 5];
            c /= 5;
            if i == 0 {
                first = a;
            }
            if s.status() != Status::Running {
                break;
            }
            s = s.advance(a).unwrap();
            depth += 1;
        }
        let mut v = heuristic_value(&s, bounds);
        if s.status() == Status::Win {
            v += (l - depth) as f64 * 1e-4;
        }
        if v > best + 1e-12 {
            best = v;
            firsts = vec![first];
        } else if (v - best).abs() <= 1e-12 && !firsts.contains(&first) {
            firsts.push(first);
        }
    }
    firsts
}

#[test]
fn right_is_the_unique_optimal_first_action() {
    let spec = builtin("CoinCorridor").unwrap();
    let root = GameState::load(spec.clone(), 0);
    assert_eq!(root.avatar(), (0, 0));
    assert_eq!(root.static_at((3, 0)).unwrap().name, "coin");
    let bounds = ScoreBounds::for_spec(&spec);
    assert_eq!(optimal_first_actions(&root, 6, &bounds), vec![Action::Right]);
}

#[test]
fn planner_matches_oracle() {
    let spec = builtin("CoinCorridor").unwrap();
    let bounds = ScoreBounds::for_spec(&spec);
    let root = GameState::load(spec.clone(), 0);
    let optimal = optimal_first_actions(&root, 6, &bounds);
    let cfg = RheaConfig {
        population_size: 10,
        individual_length: 6,
        budget: 500,
        alpha: 0.0,
        ..RheaConfig::default()
    };
    let mut hits = 0;
    for seed in 0..100 {
        let mut r = Rhea::new(cfg.clone(), seed);
        let mut b = bounds;
        let a = r.plan_action(&GameState::load(spec.clone(), seed), None, &mut b).unwrap();
        hits += optimal.contains(&a) as usize;
    }
    println!("planner matched oracle in {hits}/100 seeds");
    assert!(hits >= 95, "{hits}/100");
}
