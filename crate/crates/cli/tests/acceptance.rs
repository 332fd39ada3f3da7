//! Acceptance criteria. Each prints one PASS or FAIL line; the process exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tmn_cli::commands::{cmd_pipeline, GlobalOptions, PipelineRow};
use tmn_core::{
    alpha, lambda_approx, lambda_closed_form, round_to_tenth, CircularityInput, DisassemblyOutcome,
    MethodRegistry, ScenarioParams,
};
use tmn_disassembler::{
    evaluate, make_env, plan_oracle, ControllerRegistry, Evaluation, GreedyController,
    LearnerRegistry, TaskKind, TrainConfig, TrainingStats, EVAL_EPISODES,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const RL_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

const TABLE_ROWS: [(f64, f64, f64, f64); 5] = [
    (1.05, 100.0, 0.4, -2.1),
    (1.05, 80.0, 0.8, -2.3),
    (1.05, 0.0, 86_400.0, -3.1),
    (2.1, 0.0, 86_400.0, -6.3),
    (2.4, 0.0, 86_400.0, -7.2),
];

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Direct transcription of the three-segment batch integral, written
/// independently of the library.
fn reference_lambda(p: &ScenarioParams, m: f64, s: f64, t_d: f64) -> f64 {
    let unreused = m * (1.0 - s / 100.0);
    let t1 = p.arrival + t_d + p.transport;
    let t2 = p.arrival + t_d + p.reuse;
    let tf = t2 + p.incineration;
    let area = m * t1 + (m + unreused) * (t2 - t1) + 2.0 * m * (tf - t2);
    -2.0 * area / tf
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn lambda_by(method: &str, input: &CircularityInput) -> f64 {
    MethodRegistry::builtin()
        .get(method)
        .unwrap()
        .lambda(input)
        .unwrap()
}

fn table_reproduction() -> Outcome {
    let p = ScenarioParams::table_one();
    let mut got = Vec::new();
    for (m, s, t_d, expected) in TABLE_ROWS {
        let outcome = DisassemblyOutcome::new(s, t_d).unwrap();
        let (lambda, _) = lambda_closed_form(&p, m, &outcome).unwrap();
        let reference = reference_lambda(&p, m, s, t_d);
        ensure!(
            rel(lambda, reference) < 1e-12,
            "closed form {lambda} vs reference {reference}"
        );
        ensure!(
            round_to_tenth(lambda) == expected,
            "(m0={m}, s={s}, T_d={t_d}) gives {lambda:.4}, expected {expected}"
        );
        got.push(format!("{:.1}", round_to_tenth(lambda)));
    }
    Ok(format!("lambda = [{}]", got.join(", ")))
}

fn numeric_closed_form_equivalence() -> Outcome {
    let table = ScenarioParams::table_one();
    let mut cases: Vec<(ScenarioParams, f64, DisassemblyOutcome)> = TABLE_ROWS
        .iter()
        .map(|&(m, s, t_d, _)| (table.clone(), m, DisassemblyOutcome::new(s, t_d).unwrap()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for i in 0..1000 {
        let mut jitter = |x: f64| x * rng.gen_range(0.5..=1.5);
        let mut p = table.clone();
        p.arrival = jitter(table.arrival);
        p.transport = jitter(table.transport);
        p.reuse = jitter(table.reuse);
        p.incineration = jitter(table.incineration);
        let m = jitter(1.05);
        let t_d = jitter(if i % 2 == 0 { 0.4 } else { 86_400.0 });
        let s = rng.gen_range(0.0..=100.0);
        cases.push((p, m, DisassemblyOutcome::new(s, t_d).unwrap()));
    }

    let mut worst: f64 = 0.0;
    for (p, m, outcome) in &cases {
        let input = CircularityInput::new(p.clone(), *m, *outcome);
        let numeric = lambda_by("numeric", &input);
        let closed = lambda_by("closed-form", &input);
        let reference = reference_lambda(p, *m, outcome.success(), outcome.duration());
        worst = worst.max(rel(numeric, closed));
        ensure!(
            rel(numeric, closed) <= 1e-9,
            "numeric {numeric} vs closed {closed} for {p:?}"
        );
        ensure!(
            rel(closed, reference) <= 1e-9,
            "closed {closed} vs reference {reference}"
        );
    }
    Ok(format!(
        "{} scenarios, worst relative gap {worst:.2e}",
        cases.len()
    ))
}

fn sensitivity_properties() -> Outcome {
    let p = ScenarioParams::table_one();
    let grid: Vec<f64> = (0..=100).map(f64::from).collect();

    let alphas: Vec<f64> = grid.iter().map(|&s| alpha(&p, s).unwrap()).collect();
    ensure!(
        alphas.iter().all(|a| (1.0..2.0).contains(a)),
        "alpha leaves [1, 2)"
    );
    let expected_alpha0 = (p.arrival + 2.0 * p.reuse) / (p.arrival + p.reuse);
    ensure!(
        alphas[0] == 1.5 && expected_alpha0 == 1.5,
        "alpha(0) = {}",
        alphas[0]
    );

    let mut worst_approx: f64 = 0.0;
    for t_d in [0.4, 0.8, 60.0, 3600.0, 43_200.0, 86_400.0] {
        for m in [0.5, 1.05, 2.1, 2.4, 10.0] {
            let lambdas: Vec<f64> = grid
                .iter()
                .map(|&s| {
                    let input = CircularityInput::new(
                        p.clone(),
                        m,
                        DisassemblyOutcome::new(s, t_d).unwrap(),
                    );
                    lambda_by("numeric", &input)
                })
                .collect();
            ensure!(
                lambdas.windows(2).all(|w| w[1] > w[0]),
                "lambda not strictly increasing in s at m0={m}, T_d={t_d}"
            );
            for (&s, &exact) in grid.iter().zip(&lambdas) {
                let err = rel(lambda_approx(&p, m, s), exact);
                worst_approx = worst_approx.max(err);
                ensure!(
                    err < 0.02,
                    "approximation off by {:.3}% at s={s}, T_d={t_d}",
                    err * 100.0
                );
                for k in [0.1, 2.0, 3.7, 100.0] {
                    let input = CircularityInput::new(
                        p.clone(),
                        k * m,
                        DisassemblyOutcome::new(s, t_d).unwrap(),
                    );
                    let scaled = lambda_by("numeric", &input);
                    ensure!(
                        rel(scaled, k * exact) <= 1e-12,
                        "lambda not linear in m0 (k={k})"
                    );
                }
            }
        }
    }
    Ok(format!(
        "alpha(0) = 1.5, worst approximation error {:.2}%",
        worst_approx * 100.0
    ))
}

fn train_and_evaluate(task: TaskKind, seed: u64) -> (TrainingStats, Evaluation) {
    let spec = task.spec();
    let learners = LearnerRegistry::builtin();
    let (policy, stats) = learners
        .default_learner()
        .train(&spec, &TrainConfig::for_task(&spec), seed)
        .unwrap();
    let env = make_env(spec, seed).unwrap();
    let eval = evaluate(&mut GreedyController::new(policy), &env, EVAL_EPISODES).unwrap();
    (stats, eval)
}

fn surrogate_rl() -> Outcome {
    let runs: Vec<_> = RL_SEEDS
        .par_iter()
        .map(|&seed| train_and_evaluate(TaskKind::TwoPartsOneTarget, seed))
        .collect();
    let good = runs
        .iter()
        .filter(|(st, ev)| st.zeta > 0.0 && ev.outcome.success() >= 80.0)
        .count();
    ensure!(
        good >= 3,
        "only {good}/5 seeds reach zeta > 0 and s >= 80 on 2p1t"
    );

    let chassis: Vec<_> = RL_SEEDS
        .par_iter()
        .map(|&seed| train_and_evaluate(TaskKind::FourPartsChassis, seed))
        .collect();
    let mut growth = Vec::new();
    for (seed, (stats, eval)) in RL_SEEDS.iter().zip(&chassis) {
        let (early, late) = stats
            .early_late_lengths(0.1)
            .ok_or("too few chassis episodes")?;
        ensure!(
            late > early,
            "chassis seed {seed}: late length {late:.1} <= early {early:.1}"
        );
        growth.push(format!(
            "{early:.0}->{late:.0} (s={})",
            eval.outcome.success()
        ));
    }
    Ok(format!(
        "2p1t {good}/5 seeds succeed; chassis episode length {}",
        growth.join(", ")
    ))
}

fn oracle_equivalence() -> Outcome {
    let registry = ControllerRegistry::builtin();
    let mut lengths = Vec::new();
    let mut oracle_2p1t = None;
    for task in TaskKind::ALL {
        let env = make_env(task.spec(), 0).unwrap();
        let plan = plan_oracle(&env).map_err(|e| e.to_string())?;
        let longest = plan.max_length().ok_or(format!("{task}: no plan"))?;
        ensure!(
            longest <= env.max_steps(),
            "{task}: plan of {longest} steps exceeds cap"
        );
        let mut oracle = registry.build("oracle", &env, 0).unwrap();
        let eval = evaluate(oracle.as_mut(), &env, EVAL_EPISODES).unwrap();
        ensure!(
            eval.outcome.success() == 100.0,
            "{task}: oracle s = {}",
            eval.outcome.success()
        );
        if task == TaskKind::TwoPartsOneTarget {
            oracle_2p1t = eval.mean_success_steps;
        }
        lengths.push(format!("{}={longest}", task.short_name()));
    }
    let (_, learned) = train_and_evaluate(TaskKind::TwoPartsOneTarget, RL_SEEDS[0]);
    let learned_len = learned
        .mean_success_steps
        .ok_or("learned 2p1t policy never succeeds")?;
    let oracle_len = oracle_2p1t.unwrap();
    ensure!(
        learned_len <= 2.0 * oracle_len,
        "learned 2p1t mean length {learned_len:.2} > 2 x oracle {oracle_len:.2}"
    );
    Ok(format!(
        "longest plans {}; 2p1t learned {learned_len:.2} vs oracle {oracle_len:.2} steps",
        lengths.join(" ")
    ))
}

fn end_to_end_coupling() -> Outcome {
    let opts = GlobalOptions::default();
    let task = TaskKind::TwoPartsOneTarget;
    let mut sink = Vec::new();
    let mut rows: Vec<PipelineRow> = cmd_pipeline(&opts, task, None, &RL_SEEDS, "q-her", &mut sink)
        .map_err(|e| e.to_string())?;
    rows.extend(
        cmd_pipeline(&opts, task, Some(0), &[0], "q-her", &mut sink).map_err(|e| e.to_string())?,
    );
    rows.sort_by(|a, b| a.stats.reward_end.total_cmp(&b.stats.reward_end));
    for w in rows.windows(2) {
        ensure!(
            w[1].lambda >= w[0].lambda,
            "r_e {} -> {} lowers lambda {} -> {}",
            w[0].stats.reward_end,
            w[1].stats.reward_end,
            w[0].lambda,
            w[1].lambda
        );
    }
    let pairs: Vec<_> = rows
        .iter()
        .map(|r| format!("({:.2}, {:.3})", r.stats.reward_end, r.lambda))
        .collect();
    Ok(format!("(r_e, lambda) sorted: {}", pairs.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("table reproduction", table_reproduction),
        (
            "numeric/closed-form equivalence",
            numeric_closed_form_equivalence,
        ),
        ("sensitivity properties", sensitivity_properties),
        ("surrogate RL", surrogate_rl),
        ("oracle equivalence", oracle_equivalence),
        ("end-to-end coupling", end_to_end_coupling),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} [{secs:.2}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.2}s]: {detail}");
            }
        }
    }
    println!("{} of 6 acceptance criteria pass", 6 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
