//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

mod common;

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use evoplay_core::game::{
    builtin, builtin_suite, heuristic_value, parse_gdf, serialize_gdf, Action, GameSpec, GameState,
    GdfErrorKind, ScoreBounds, Status, BUILTIN_SOURCES, COIN_CORRIDOR,
};
use evoplay_core::learner::{
    featurize_state, input_len_for, ModelHandle, ModelWeights,
    PolicyDistribution, Sgd, TrainOptions, TrainingExample,
};
use evoplay_core::params::{default_registry, ParameterSet, ParameterSpace};
use evoplay_core::planner::{
    play_episode, AgentFingerprint, Guide, Individual, InitMode, MutationMode, Rhea, RheaConfig,
};
use evoplay_core::runtime::{
    Event, ModerationConfig, Runtime, RuntimeConfig, Suggestion, SuggestionKind,
};
use evoplay_core::tuner::{run_ntbea, NtbeaConfig, OneMax};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// A guide answering fixed or scripted policies and values.
struct Scripted<F: Fn(&GameState) -> (PolicyDistribution, f64) + Sync>(F);

impl<F: Fn(&GameState) -> (PolicyDistribution, f64) + Sync> Guide for Scripted<F> {
    fn policy_value(&self, state: &GameState) -> (PolicyDistribution, f64) {
        (self.0)(state)
    }
}

fn corridor_with_coins(coins: usize) -> Arc<GameSpec> {
    let level = format!("A{}", "C".repeat(coins));
    let text = COIN_CORRIDOR.replace("A..C....", &level).replace("timeout 30", "timeout 500");
    Arc::new(parse_gdf(&text).unwrap())
}

fn fitness_blend() -> Outcome {
    let spec = corridor_with_coins(40);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.25, 0.5, 1.0] {
        for _ in 0..1000 {
            let score = rng.gen_range(0..=39);
            let mut root = GameState::load(Arc::clone(&spec), 0);
            for _ in 0..score {
                root.step(Action::Right).unwrap();
            }
            let min = rng.gen_range(-1000..=0);
            let max = rng.gen_range(score.max(1)..=1_000_000);
            let bounds = ScoreBounds::new(min, max);
            // Independent value of a running state.
            let r = 0.1 + 0.8 * (score - min) as f64 / (max - min) as f64;
            let n: f64 = rng.gen_range(0.0..1.0);
            let guide = Scripted(move |_| (PolicyDistribution::uniform(), n));
            let cfg = RheaConfig {
                population_size: 1,
                individual_length: 0,
                alpha,
                ..RheaConfig::default()
            };
            let mut planner = Rhea::new(cfg, rng.gen());
            let f = planner.evaluate(&mut Individual::new(Vec::new()), &root, Some(&guide), &bounds);
            worst = worst.max((f - ((1.0 - alpha) * r + alpha * n)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |fitness - ((1-a)R + aN)| = {worst:e} over 4000 pairs"))
}

fn mutation_zeroing() -> Outcome {
    let spec = builtin("CoinMaze").unwrap();
    let root = GameState::load(Arc::clone(&spec), 0);
    // Policies drawn at random per query, half of them one-hot.
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(7));
    let guide = Scripted(|_| {
        let mut r = rng.lock().unwrap();
        let p = if r.gen_bool(0.5) {
            PolicyDistribution::one_hot(Action::ALL[r.gen_range(0..5)])
        } else {
            PolicyDistribution::from_weights(std::array::from_fn(|_| r.gen_range(0.0..1.0)))
        };
        (p, 0.5)
    });
    let cfg = RheaConfig {
        individual_length: 10,
        mutation_rate: 1.0,
        mutation_mode: MutationMode::NnWeighted,
        ..RheaConfig::default()
    };
    let mut planner = Rhea::new(cfg, 1);
    let mut gene_rng = ChaCha8Rng::seed_from_u64(8);
    let (mut mutations, mut unchanged) = (0usize, 0usize);
    while mutations < 100_000 {
        let genes: Vec<Action> = (0..10).map(|_| Action::ALL[gene_rng.gen_range(0..5)]).collect();
        let child = planner.mutate(Individual::new(genes.clone()), &root, Some(&guide));
        for (old, new) in genes.iter().zip(&child.genes) {
            mutations += 1;
            unchanged += (old == new) as usize;
        }
    }
    outcome(unchanged == 0, format!("{unchanged} unchanged genes in {mutations} nn-weighted mutations"))
}

fn trace(spec: &Arc<GameSpec>, fp: &AgentFingerprint, model: &ModelHandle, ticks: usize) -> Vec<Action> {
    let space = default_registry();
    let mut planner = fp.planner(&space).unwrap();
    let mut bounds = ScoreBounds::for_spec(spec);
    let mut out = Vec::new();
    let mut episode = 0;
    while out.len() < ticks {
        let o = play_episode(spec, &mut planner, Some(model), fp.seed + episode, &mut bounds, |_, _, _| {}).unwrap();
        out.extend(o.actions);
        episode += 1;
    }
    out.truncate(ticks);
    out
}

fn fast_params(space: &ParameterSpace) -> ParameterSet {
    space
        .default_set()
        .with(space, "budget", 50)
        .with(space, "population_size", 5)
        .with(space, "individual_length", 6)
        .with(space, "batch_size", 16)
        .with(space, "batches_per_episode", 2)
        .with(space, "hidden1", 32)
        .with(space, "hidden2", 32)
}

fn determinism() -> Outcome {
    let space = default_registry();
    let params = space
        .default_set()
        .with(&space, "alpha", 0.5)
        .with(&space, "mutation_mode", "nn-weighted");
    let fp = AgentFingerprint::new(params, 31);
    let mut equal_games = 0;
    for spec in builtin_suite() {
        let weights = Arc::new(ModelWeights::new(&spec.name, [input_len_for(&spec), 32, 32], 5));
        let handle = ModelHandle::new(weights, ScoreBounds::for_spec(&spec));
        let a = trace(&spec, &fp, &handle, 100);
        let copy = ModelHandle::new(Arc::new((*handle.weights).clone()), handle.bounds);
        let b = trace(&spec, &fp.clone(), &copy, 100);
        equal_games += (a == b && a.len() == 100) as usize;
    }

    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    let games: Vec<GameSpec> = builtin_suite().iter().map(|g| (**g).clone()).collect();
    let fp = AgentFingerprint::new(fast_params(&space), 17);
    let cfg = RuntimeConfig {
        tune_every: 3,
        tune_evaluations: 4,
        tune_neighbours: 5,
        ..RuntimeConfig::default()
    };
    let mut control = Runtime::new(space.clone(), fp, games, cfg).unwrap();
    for _ in 0..6 {
        control.step_cycle();
    }
    control.snapshot(&snap).unwrap();
    let expected: Vec<_> = (0..10).filter_map(|_| control.step_cycle()).collect();
    let mut restored = Runtime::restore(&snap, space, None).unwrap();
    let got: Vec<_> = (0..10).filter_map(|_| restored.step_cycle()).collect();
    let continuation = got.len() == 10 && got == expected;
    outcome(
        equal_games == 4 && continuation,
        format!(
            "identical 100-tick traces on {equal_games}/4 games; restore continuation over 10 episodes {}",
            if continuation { "equal" } else { "DIFFERS" }
        ),
    )
}

/// First actions of the length-`l` sequences with the highest value,
/// scored independently of the planner code.
fn exhaustive_optimal_first(root: &GameState, l: usize, bounds: &ScoreBounds) -> Vec<Action> {
    let mut best = f64::NEG_INFINITY;
    let mut firsts = Vec::new();
    for code in 0..5usize.pow(l as u32) {
        let seq: Vec<Action> = (0..l).map(|i| Action::ALL[code / 5usize.pow(i as u32) % 5]).collect();
        let mut s = root.clone();
        let mut depth = 0;
        for &a in &seq {
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
            firsts = vec![seq[0]];
        } else if (v - best).abs() <= 1e-12 && !firsts.contains(&seq[0]) {
            firsts.push(seq[0]);
        }
    }
    firsts
}

fn planning_oracle() -> Outcome {
    let spec = builtin("CoinCorridor").unwrap();
    let bounds = ScoreBounds::for_spec(&spec);
    let optimal = exhaustive_optimal_first(&GameState::load(Arc::clone(&spec), 0), 6, &bounds);
    let cfg = RheaConfig {
        population_size: 10,
        individual_length: 6,
        budget: 500,
        alpha: 0.0,
        init_mode: InitMode::Uniform,
        ..RheaConfig::default()
    };
    let mut hits = 0;
    for seed in 0..100 {
        let mut planner = Rhea::new(cfg.clone(), seed);
        let mut b = bounds;
        let a = planner
            .plan_action(&GameState::load(Arc::clone(&spec), seed), None, &mut b)
            .unwrap();
        hits += optimal.contains(&a) as usize;
    }
    outcome(
        hits >= 95 && optimal == [Action::Right],
        format!("oracle optimum {optimal:?}; planner matched in {hits}/100 seeds (need 95)"),
    )
}

fn ntbea_oracle() -> Outcome {
    let mut hits = 0;
    for seed in 0..100 {
        let mut problem = OneMax::new(5, 0.1, 1000 + seed);
        let space = problem_space(&problem);
        // Exhaustive oracle over all 32 points of the noiseless objective.
        let optimum = (0..32usize)
            .map(|code| {
                let idx: Vec<usize> = (0..5).map(|d| code >> d & 1).collect();
                ParameterSet::from_indices(&space, idx).unwrap()
            })
            .max_by(|a, b| problem.true_value(a).total_cmp(&problem.true_value(b)))
            .unwrap();
        let cfg = NtbeaConfig {
            evaluations: 200,
            seed,
            ..NtbeaConfig::default()
        };
        let run = run_ntbea(&mut problem, &cfg);
        hits += (run.recommended == optimum) as usize;
    }
    outcome(hits >= 90, format!("recommended the optimum in {hits}/100 seeds (need 90)"))
}

fn problem_space(p: &OneMax) -> ParameterSpace {
    use evoplay_core::tuner::TuningProblem;
    p.space().clone()
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for m in 0..20u64 {
        let dims = [rng.gen_range(3..12), rng.gen_range(2..9), rng.gen_range(2..9)];
        let mut model = ModelWeights::new("g", dims, m);
        for w in &mut model.params {
            *w = rng.gen_range(-1.0..1.0);
        }
        let batch: Vec<TrainingExample> = (0..3)
            .map(|_| TrainingExample {
                features: (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                policy: PolicyDistribution::from_weights(std::array::from_fn(|_| rng.gen_range(0.0..1.0))),
                value: rng.gen_range(0.0..1.0),
            })
            .collect();
        let opts = TrainOptions {
            learning_rate: 0.0,
            weight_decay: [0.0, 1e-3][m as usize % 2],
            value_loss_weight: [0.5, 1.0, 2.0][m as usize % 3],
            momentum: 0.0,
        };
        let (_, analytic) = model.loss_and_gradient(&batch, &opts).unwrap();
        for i in 0..model.params.len() {
            let mut plus = model.clone();
            plus.params[i] += h;
            let mut minus = model.clone();
            minus.params[i] -= h;
            let numeric = (plus.loss_and_gradient(&batch, &opts).unwrap().0
                - minus.loss_and_gradient(&batch, &opts).unwrap().0)
                / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
    }
    outcome(worst < 1e-3, format!("max relative error {worst:e} over 20 models (need < 1e-3)"))
}

/// Up to `count` distinct winnable states met on seeded random walks, each
/// labelled with the first action of a shortest win.
fn bfs_examples(spec: &Arc<GameSpec>, count: usize, seed: u64) -> Vec<TrainingExample> {
    let bounds = ScoreBounds::for_spec(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _walk in 0..10_000 {
        if out.len() == count {
            break;
        }
        let mut s = GameState::load(Arc::clone(spec), 0);
        let steps = rng.gen_range(0..20);
        for _ in 0..steps {
            if s.is_terminal() {
                break;
            }
            s.step(Action::ALL[rng.gen_range(0..5)]).unwrap();
        }
        if s.is_terminal() || !seen.insert((s.observe().cells, s.key_held(), s.score(), s.tick())) {
            continue;
        }
        if let Some(path) = common::shortest_win(&s) {
            out.push(TrainingExample {
                features: featurize_state(&s, &bounds),
                policy: PolicyDistribution::one_hot(path[0]),
                value: 1.0,
            });
        }
    }
    out
}

fn top1(model: &ModelWeights, data: &[TrainingExample]) -> f64 {
    let right = data
        .iter()
        .filter(|e| model.predict(&e.features).unwrap().0.argmax() == e.policy.argmax())
        .count();
    right as f64 / data.len() as f64
}

fn fit(spec: &Arc<GameSpec>, data: &[TrainingExample], max_steps: usize) -> ModelWeights {
    let mut model = ModelWeights::new(&spec.name, [input_len_for(spec), 64, 32], 0);
    let mut sgd = Sgd::new();
    let opts = TrainOptions::default();
    for _ in 0..max_steps {
        sgd.step(&mut model, data, &opts).unwrap();
        if model.steps % 50 == 0 && top1(&model, data) >= 0.999 {
            break;
        }
    }
    model
}

fn learning_effect() -> Outcome {
    let maze = builtin("CoinMaze").unwrap();
    let data = bfs_examples(&maze, 200, 1);
    let model = fit(&maze, &data, 3000);
    let acc = top1(&model, &data);

    let door = builtin("KeyDoor").unwrap();
    let door_data = bfs_examples(&door, 200, 2);
    let door_model = fit(&door, &door_data, 3000);
    let handle = ModelHandle::new(Arc::new(door_model), ScoreBounds::for_spec(&door));
    let base = RheaConfig {
        budget: 50,
        alpha: 0.0,
        mutation_mode: MutationMode::Uniform,
        ..RheaConfig::default()
    };
    let mean_fitness = |init: InitMode| {
        let cfg = RheaConfig {
            init_mode: init,
            ..base.clone()
        };
        let mut total = 0.0;
        for seed in 0..200 {
            let mut planner = Rhea::new(cfg.clone(), seed);
            let mut bounds = ScoreBounds::for_spec(&door);
            let o = play_episode(&door, &mut planner, Some(&handle), seed, &mut bounds, |_, _, _| {}).unwrap();
            total += o.fitness;
        }
        total / 200.0
    };
    let seeded = mean_fitness(InitMode::NnSeeded);
    let uniform = mean_fitness(InitMode::Uniform);
    outcome(
        data.len() == 200 && acc >= 0.9 && seeded >= uniform,
        format!(
            "CoinMaze top-1 {:.1}% on {} BFS examples (need 90%); KeyDoor budget 50 mean fitness nn-seeded {seeded:.4} vs uniform {uniform:.4}",
            100.0 * acc,
            data.len()
        ),
    )
}

fn parameter_space() -> Outcome {
    let space = default_registry();
    let oracle = space
        .arities()
        .iter()
        .try_fold(1u128, |acc, &a| acc.checked_mul(a as u128))
        .unwrap();
    let full_ok = space.cardinality() == BigUint::from(oracle);
    let pick = |names: &[&str]| {
        let mut sub = ParameterSpace::new();
        for n in names {
            sub.push(space.def(space.index_of(n).unwrap()).clone()).unwrap();
        }
        sub
    };
    // Products worked out by hand from the registry's value lists.
    let subs: [(&[&str], u64); 5] = [
        (&["population_size", "individual_length"], 8 * 10),
        (&["mutation_rate", "crossover", "elitism"], 7 * 3 * 4),
        (&["alpha", "budget", "tournament_size", "win_discount"], 5 * 7 * 4 * 3),
        (&["hidden1", "hidden2", "learning_rate", "batch_size"], 2 * 2 * 4 * 3),
        (&["shift_buffer", "init_mode", "mutation_mode", "selection", "momentum"], 2 * 2 * 2 * 3 * 3),
    ];
    let subs_ok = subs
        .iter()
        .all(|(names, want)| pick(names).cardinality() == BigUint::from(*want));
    let wide = ParameterSpace::from_arities(&[1000; 12]);
    let wide_ok = wide.cardinality() == BigUint::from(10u32).pow(36);
    outcome(
        space.len() >= 30 && full_ok && subs_ok && wide_ok,
        format!(
            "{} registered parameters, cardinality {} (oracle {oracle}); 5 sub-registries {}",
            space.len(),
            space.cardinality(),
            if subs_ok { "match" } else { "MISMATCH" }
        ),
    )
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/fixtures/malformed/{name}.gdf"));
    std::fs::read_to_string(path).unwrap()
}

fn gdf_round_trip() -> Outcome {
    let round_trips = BUILTIN_SOURCES
        .iter()
        .filter(|src| {
            let spec = parse_gdf(src).unwrap();
            parse_gdf(&serialize_gdf(&spec)).unwrap() == spec
        })
        .count();
    let cases: [(&str, GdfErrorKind, usize, usize); 10] = [
        ("duplicate_symbol", GdfErrorKind::DuplicateSymbol('C'), 5, 1),
        ("no_avatar", GdfErrorKind::NoAvatar, 8, 1),
        ("multiple_avatars", GdfErrorKind::MultipleAvatars, 10, 1),
        (
            "ragged_rows",
            GdfErrorKind::RaggedRow {
                row: 2,
                expected: 4,
                found: 3,
            },
            10,
            4,
        ),
        ("unknown_kind", GdfErrorKind::UnknownKind("dragon".into()), 5, 10),
        ("missing_timeout", GdfErrorKind::MissingTimeout, 5, 1),
        ("missing_header", GdfErrorKind::MissingHeader, 2, 1),
        ("unknown_symbol", GdfErrorKind::UnknownSymbol('X'), 9, 3),
        ("bad_attribute", GdfErrorKind::BadAttribute("score=abc".into()), 4, 20),
        ("bad_condition", GdfErrorKind::BadCondition("everything-gone".into()), 6, 1),
    ];
    let diagnosed = cases
        .into_iter()
        .filter(|(name, kind, line, col)| {
            parse_gdf(&fixture(name)).is_err_and(|e| (&e.kind, e.line, e.column) == (kind, *line, *col))
        })
        .count();
    outcome(
        round_trips == 4 && diagnosed == 10,
        format!("{round_trips}/4 built-ins round-trip; {diagnosed}/10 fixtures give their designated error"),
    )
}

fn liveness() -> Outcome {
    let fixtures: Vec<String> = [
        "bad_attribute",
        "bad_condition",
        "duplicate_symbol",
        "missing_header",
        "missing_timeout",
        "multiple_avatars",
        "no_avatar",
        "ragged_rows",
        "unknown_kind",
        "unknown_symbol",
    ]
    .iter()
    .map(|n| fixture(n))
    .collect();
    let space = default_registry();
    let cfg = RuntimeConfig {
        moderation: ModerationConfig::default().with_blocklist_text("r1 badword\nr2 nastything"),
        tune_every: 0,
        ..RuntimeConfig::default()
    };
    let games = builtin_suite().iter().map(|g| (**g).clone()).collect();
    let mut rt = Runtime::new(space.clone(), AgentFingerprint::new(fast_params(&space), 3), games, cfg).unwrap();
    let shared = rt.shared();
    let mut rejected = 0;
    let mut played = 0;
    for i in 0..500usize {
        let kind = match i % 4 {
            0 => SuggestionKind::PlayInline {
                gdf: fixtures[i / 4 % 10].clone(),
            },
            1 => SuggestionKind::PlayInline {
                gdf: COIN_CORRIDOR.replace("CoinCorridor", "BadWordQuest"),
            },
            2 => SuggestionKind::PlayGame {
                game: "NASTYTHING".into(),
            },
            _ => SuggestionKind::StrategyHint {
                bias: [f64::NAN; 5],
            },
        };
        let s = Suggestion {
            kind,
            submitter: format!("visitor{i}"),
            timestamp: i as u64,
        };
        rejected += (!shared.submit(s).is_accepted()) as usize;
        played += rt.step_cycle().is_some() as usize;
    }
    let logged = rt
        .events()
        .iter()
        .filter(|e| matches!(e, Event::SuggestionRejected { .. }))
        .count();
    outcome(
        played == 500 && rejected == 500 && logged == rejected,
        format!("{played}/500 cycles completed; {rejected} adversarial suggestions rejected, {logged} rejections logged"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("fitness blend exactness", fitness_blend, Duration::from_secs(1)),
        ("mutation zeroing", mutation_zeroing, Duration::from_secs(10)),
        ("determinism and snapshot continuation", determinism, Duration::from_secs(60)),
        ("planning oracle", planning_oracle, Duration::from_secs(60)),
        ("NTBEA oracle", ntbea_oracle, Duration::from_secs(60)),
        ("gradient check", gradient_check, Duration::from_secs(30)),
        ("learning effect", learning_effect, Duration::from_secs(300)),
        ("parameter space", parameter_space, Duration::from_secs(1)),
        ("GDF round trip and diagnostics", gdf_round_trip, Duration::from_secs(1)),
        ("runtime liveness", liveness, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= limit;
        failed += !pass as usize;
        println!(
            "{} {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {}/10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
