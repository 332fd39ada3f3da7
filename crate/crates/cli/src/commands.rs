//! Subcommand implementations. Each writes its human-readable output to the
//! given writer and returns the computed values so callers and tests can use
//! them directly.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use tmn_core::{
    format_tenth, lambda_closed_form, sensitivity_sweep, weighted_initial_mass, CircularityError,
    CircularityInput, CircularityReport, DisassemblyOutcome, MethodRegistry, ScenarioParams,
    SweepAxis, SweepRow, SweepVar,
};
use tmn_disassembler::{
    evaluate, make_env, ControllerRegistry, DisassemblerError, Evaluation, GreedyController,
    LearnerRegistry, Policy, PolicyError, TaskKind, TrainConfig, TrainingStats, EVAL_EPISODES,
};

use crate::scenario::{parse_scenario, OutcomeSpec, ScenarioError, ScenarioFile};

/// The bundled table scenarios, in table order.
pub const BUNDLED_SCENARIOS: [(&str, &str); 5] = [
    (
        "table2_sac.json",
        include_str!("../scenarios/table2_sac.json"),
    ),
    (
        "table2_tqc.json",
        include_str!("../scenarios/table2_tqc.json"),
    ),
    (
        "table2_td3.json",
        include_str!("../scenarios/table2_td3.json"),
    ),
    ("table4.json", include_str!("../scenarios/table4.json")),
    ("table5.json", include_str!("../scenarios/table5.json")),
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Circularity(#[from] CircularityError),
    #[error(transparent)]
    Disassembler(#[from] DisassemblerError),
    #[error("{0}")]
    Argument(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0} table row(s) do not reproduce")]
    Mismatch(usize),
}

impl CliError {
    /// 1 for a reproduction mismatch, 2 for anything wrong with the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) => 1,
            _ => 2,
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Disassembler(e.into())
    }
}

impl From<tmn_disassembler::EnvError> for CliError {
    fn from(e: tmn_disassembler::EnvError) -> Self {
        CliError::Disassembler(e.into())
    }
}

impl From<tmn_core::FlowError> for CliError {
    fn from(e: tmn_core::FlowError) -> Self {
        CliError::Circularity(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub scenario: Option<PathBuf>,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub delta: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(io_err(Path::new("<stdout>")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn bundled_scenario(name: &str) -> Option<ScenarioFile> {
    BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name || n.trim_end_matches(".json") == name)
        .map(|(_, text)| ScenarioFile::from_json_str(text).expect("bundled scenarios are valid"))
}

/// Loads `--scenario` (or the bundled perfect-disassembly scenario) and
/// applies `--delta`. Returns the scenario and the directory relative paths
/// resolve against.
pub fn load_scenario(opts: &GlobalOptions) -> Result<(ScenarioFile, PathBuf)> {
    let (mut scenario, dir) = match &opts.scenario {
        Some(path) => {
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (parse_scenario(path)?, dir)
        }
        None => (
            bundled_scenario("table2_sac").expect("bundled"),
            PathBuf::from("."),
        ),
    };
    if let Some(delta) = opts.delta {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(CliError::Argument(format!(
                "--delta must be positive, got {delta}"
            )));
        }
        scenario.params.delta = delta;
    }
    Ok((scenario, dir))
}

/// Turns the scenario's outcome section into `(s, T_d)`, running the
/// referenced controller when it is not literal.
pub fn resolve_outcome(
    scenario: &ScenarioFile,
    base_dir: &Path,
    seed: u64,
) -> Result<(DisassemblyOutcome, Option<Evaluation>)> {
    match &scenario.outcome {
        OutcomeSpec::Literal(o) => Ok((*o, None)),
        OutcomeSpec::Policy { path, task } => {
            let path = base_dir.join(path);
            let eval = evaluate_policy_file(&path, *task)?;
            Ok((eval.outcome, Some(eval)))
        }
        OutcomeSpec::Controller { name, task } => {
            let env = make_env(task.spec(), seed)?;
            let mut controller = ControllerRegistry::builtin().build(name, &env, seed)?;
            let eval = evaluate(controller.as_mut(), &env, EVAL_EPISODES)?;
            Ok((eval.outcome, Some(eval)))
        }
    }
}

fn load_policy(path: &Path, task: TaskKind) -> Result<Policy> {
    let policy = Policy::load(path)?;
    if policy.task != task.name() {
        return Err(PolicyError::TaskMismatch {
            expected: task.name().to_string(),
            found: policy.task.clone(),
        }
        .into());
    }
    Ok(policy)
}

fn evaluate_policy_file(path: &Path, task: TaskKind) -> Result<Evaluation> {
    let policy = load_policy(path, task)?;
    let env = make_env(task.spec(), 0)?;
    Ok(evaluate(
        &mut GreedyController::new(policy),
        &env,
        EVAL_EPISODES,
    )?)
}

pub fn cmd_validate(opts: &GlobalOptions, out: &mut dyn Write) -> Result<ScenarioFile> {
    let (scenario, _) = load_scenario(opts)?;
    let net = &scenario.network;
    let mut text = format!(
        "scenario `{}` is valid\n  network: {} compartments ({} nodes, {} arcs), solids chain\n",
        scenario.name,
        net.compartment_count(),
        net.node_count(),
        net.arc_count()
    );
    for (node, arcs) in net.digraph() {
        let targets: Vec<_> = arcs.iter().map(|(a, j)| format!("c{a}->{j}")).collect();
        text.push_str(&format!(
            "    node {node} [{}]: {}\n",
            net.get(node).unwrap().role,
            targets.join(" ")
        ));
    }
    text.push_str(&format!(
        "  weighted initial mass: {} kg\n",
        scenario.weighted_mass()
    ));
    emit(out, &text)?;
    Ok(scenario)
}

pub fn cmd_lambda(
    opts: &GlobalOptions,
    method: &str,
    out: &mut dyn Write,
) -> Result<CircularityReport> {
    let registry = MethodRegistry::builtin();
    let chosen = registry.get(method)?;
    let (scenario, dir) = load_scenario(opts)?;
    let (outcome, eval) = resolve_outcome(&scenario, &dir, opts.seed)?;
    let mut input =
        CircularityInput::new(scenario.params.clone(), scenario.weighted_mass(), outcome);
    input.weighting = scenario.weighting;
    let report = CircularityReport::compute(&input)?;
    let headline = chosen.lambda(&input)?;

    let mut text = format!("scenario `{}`\n", scenario.name);
    if let Some(eval) = eval {
        text.push_str(&format!(
            "  controller evaluation: {}\n",
            eval.summary_line()
        ));
    }
    text.push_str(&format!("{report}\n"));
    text.push_str(&format!(
        "  {} = {}\n",
        chosen.name(),
        format_tenth(headline)
    ));
    emit(out, &text)?;
    if let Some(path) = &opts.csv {
        write_file(path, &report.to_csv())?;
    }
    Ok(report)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(tmn_core::circularity::SWEEP_CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.var.as_str().to_string(),
            r.value.to_string(),
            r.lambda_exact.to_string(),
            r.lambda_approx.to_string(),
            r.alpha.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn cmd_sweep(
    opts: &GlobalOptions,
    var: &str,
    from: f64,
    to: f64,
    steps: usize,
    out: &mut dyn Write,
) -> Result<Vec<SweepRow>> {
    let var: SweepVar = var.parse().map_err(CliError::Argument)?;
    if steps < 2 {
        return Err(CliError::Argument(format!(
            "--steps must be at least 2, got {steps}"
        )));
    }
    let (scenario, dir) = load_scenario(opts)?;
    let (outcome, _) = resolve_outcome(&scenario, &dir, opts.seed)?;
    let mut base =
        CircularityInput::new(scenario.params.clone(), scenario.weighted_mass(), outcome);
    base.weighting = scenario.weighting;
    let rows = sensitivity_sweep(&base, &[SweepAxis::linspace(var, from, to, steps)])?;
    let csv = sweep_csv(&rows);
    emit(out, &csv)?;
    if let Some(path) = &opts.csv {
        write_file(path, &csv)?;
    }
    Ok(rows)
}

fn train_config(task: TaskKind, steps: Option<u64>) -> TrainConfig {
    match steps {
        Some(n) => TrainConfig::with_steps(n),
        None => TrainConfig::for_task(&task.spec()),
    }
}

pub fn cmd_train(
    opts: &GlobalOptions,
    task: TaskKind,
    steps: Option<u64>,
    learner: &str,
    policy_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(Policy, TrainingStats)> {
    let registry = LearnerRegistry::builtin();
    let learner = registry.get(learner)?;
    let config = train_config(task, steps);
    let (policy, stats) = learner.train(&task.spec(), &config, opts.seed)?;
    let (early, late) = stats
        .early_late_lengths(0.1)
        .unwrap_or((f64::NAN, f64::NAN));
    emit(
        out,
        &format!(
            "task={} learner={} seed={} steps={} episodes={} table_entries={}\n\
             r_s={:.3} r_e={:.3} zeta={:.3} early_len={early:.2} late_len={late:.2}\n",
            task.name(),
            learner.name(),
            opts.seed,
            stats.steps,
            stats.episode_lengths.len(),
            policy.len(),
            stats.reward_start,
            stats.reward_end,
            stats.zeta,
        ),
    )?;
    if let Some(path) = policy_out {
        policy.save(path)?;
    }
    if let Some(path) = &opts.csv {
        write_file(path, &stats.log_csv())?;
    }
    Ok((policy, stats))
}

pub fn cmd_eval(
    opts: &GlobalOptions,
    task: TaskKind,
    policy: Option<&Path>,
    controller: Option<&str>,
    episodes: usize,
    out: &mut dyn Write,
) -> Result<Evaluation> {
    let env = make_env(task.spec(), opts.seed)?;
    let (label, eval) = match (policy, controller) {
        (Some(path), None) => {
            let policy = load_policy(path, task)?;
            (
                path.display().to_string(),
                evaluate(&mut GreedyController::new(policy), &env, episodes)?,
            )
        }
        (None, Some(name)) => {
            let mut c = ControllerRegistry::builtin().build(name, &env, opts.seed)?;
            (name.to_string(), evaluate(c.as_mut(), &env, episodes)?)
        }
        _ => {
            return Err(CliError::Argument(
                "give exactly one of --policy or --controller".into(),
            ))
        }
    };
    emit(
        out,
        &format!(
            "task={} controller={label} {}\n",
            task.name(),
            eval.summary_line()
        ),
    )?;
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRow {
    pub seed: u64,
    pub steps: u64,
    pub stats: TrainingStats,
    pub evaluation: Evaluation,
    pub lambda: f64,
}

/// Train, evaluate greedily, then evaluate λ for each seed. Seeds run in
/// parallel; rows come back in seed-list order.
pub fn cmd_pipeline(
    opts: &GlobalOptions,
    task: TaskKind,
    steps: Option<u64>,
    seeds: &[u64],
    learner: &str,
    out: &mut dyn Write,
) -> Result<Vec<PipelineRow>> {
    let registry = LearnerRegistry::builtin();
    let learner = registry.get(learner)?;
    let (params, mass): (ScenarioParams, f64) = match &opts.scenario {
        Some(_) => {
            let (scenario, _) = load_scenario(opts)?;
            let mass = scenario.weighted_mass();
            (scenario.params, mass)
        }
        None => {
            let mut params = ScenarioParams::table_one();
            if let Some(d) = opts.delta {
                params.delta = d;
            }
            (params, weighted_initial_mass(&task.spec().materials())?)
        }
    };
    let seeds: Vec<u64> = if seeds.is_empty() {
        vec![opts.seed]
    } else {
        seeds.to_vec()
    };
    let config = train_config(task, steps);
    let spec = task.spec();

    let rows: Vec<Result<PipelineRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let (policy, stats) = learner.train(&spec, &config, seed)?;
            let env = make_env(spec.clone(), seed)?;
            let evaluation = evaluate(&mut GreedyController::new(policy), &env, EVAL_EPISODES)?;
            let (lambda, _) = lambda_closed_form(&params, mass, &evaluation.outcome)?;
            Ok(PipelineRow {
                seed,
                steps: config.steps,
                stats,
                evaluation,
                lambda,
            })
        })
        .collect();
    let rows: Vec<PipelineRow> = rows.into_iter().collect::<Result<_>>()?;

    let mut text = format!(
        "task={} learner={} m0={mass} kg\n",
        task.name(),
        learner.name()
    );
    for r in &rows {
        text.push_str(&format!(
            "seed={} steps={} r_s={:.3} r_e={:.3} zeta={:.3} s={:.1} T_d={} lambda={:.6} ({})\n",
            r.seed,
            r.steps,
            r.stats.reward_start,
            r.stats.reward_end,
            r.stats.zeta,
            r.evaluation.outcome.success(),
            r.evaluation.outcome.duration(),
            r.lambda,
            format_tenth(r.lambda),
        ));
    }
    emit(out, &text)?;
    if let Some(path) = &opts.csv {
        let mut csv = String::from("seed,steps,r_s,r_e,zeta,s,T_d,lambda\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.seed,
                r.steps,
                r.stats.reward_start,
                r.stats.reward_end,
                r.stats.zeta,
                r.evaluation.outcome.success(),
                r.evaluation.outcome.duration(),
                r.lambda
            ));
        }
        write_file(path, &csv)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub name: String,
    pub mass: f64,
    pub success: f64,
    pub duration: f64,
    pub expected: f64,
    pub lambda: f64,
    pub rounded: f64,
    pub pass: bool,
}

fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let r = (value * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Compares the closed-form λ of each scenario with its expected value at the
/// scenario's rounding. Scenarios without an expected value are skipped.
pub fn reproduce_rows(scenarios: &[ScenarioFile]) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for s in scenarios {
        let Some(expected) = s.expect_lambda else {
            continue;
        };
        let OutcomeSpec::Literal(outcome) = &s.outcome else {
            return Err(CliError::Argument(format!(
                "scenario `{}` needs a literal outcome for table reproduction",
                s.name
            )));
        };
        let mass = s.weighted_mass();
        let (lambda, _) = lambda_closed_form(&s.params, mass, outcome)?;
        let rounded = round_to(lambda, s.rounding);
        rows.push(TableRow {
            name: s.name.clone(),
            mass,
            success: outcome.success(),
            duration: outcome.duration(),
            expected,
            lambda,
            rounded,
            pass: rounded == round_to(expected, s.rounding),
        });
    }
    Ok(rows)
}

pub fn load_table_scenarios(dir: Option<&Path>) -> Result<Vec<ScenarioFile>> {
    BUNDLED_SCENARIOS
        .iter()
        .map(|(name, text)| match dir {
            Some(dir) => Ok(parse_scenario(&dir.join(name))?),
            None => Ok(ScenarioFile::from_json_str(text)?),
        })
        .collect()
}

pub fn cmd_reproduce_tables(
    opts: &GlobalOptions,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Vec<TableRow>> {
    let mut scenarios = load_table_scenarios(dir)?;
    if let Some(delta) = opts.delta {
        for s in &mut scenarios {
            s.params.delta = delta;
        }
    }
    let rows = reproduce_rows(&scenarios)?;
    let mut text = format!(
        "{:<12} {:>6} {:>6} {:>9} {:>9} {:>9} {:>11}  result\n",
        "scenario", "m0", "s", "T_d", "expected", "computed", "raw"
    );
    for r in &rows {
        text.push_str(&format!(
            "{:<12} {:>6} {:>6} {:>9} {:>9.1} {:>9.1} {:>11.6}  {}\n",
            r.name,
            r.mass,
            r.success,
            r.duration,
            r.expected,
            r.rounded,
            r.lambda,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    text.push_str(&format!(
        "{} of {} rows reproduce\n",
        rows.len() - failed,
        rows.len()
    ));
    emit(out, &text)?;
    if let Some(path) = &opts.csv {
        let mut csv = String::from("scenario,m0,s,T_d,expected,computed,lambda,pass\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.name, r.mass, r.success, r.duration, r.expected, r.rounded, r.lambda, r.pass
            ));
        }
        write_file(path, &csv)?;
    }
    if failed > 0 {
        return Err(CliError::Mismatch(failed));
    }
    Ok(rows)
}
