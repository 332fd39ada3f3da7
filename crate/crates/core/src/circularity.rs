//! Time-window circularity of a material network.
//!
//! λ is minus the time average, over `[0, t_f]`, of the weighted
//! finite-time-sustainable mass (batches, scaled by the functionality
//! coefficient) plus the weighted continuous flow (scaled by Δ). It is never
//! positive; 0 means perfectly circular.
//!
//! Several evaluation routes are available behind [`CircularityMethod`]:
//! exact piecewise integration, the algebraic form for the solids chain, and
//! the long-horizon approximation. They are looked up by name through a
//! [`MethodRegistry`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::flows::{
    self, check_success, functionality_coefficient, BatchSchedule, DisassemblyOutcome, FlowError,
    FunctionalityWeighting, PiecewiseConstant, ScenarioParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircularityError {
    #[error("batch schedule is empty")]
    EmptySchedule,
    #[error("time window must be positive, got t_f = {0}")]
    EmptyWindow(f64),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("unknown circularity method `{0}`")]
    UnknownMethod(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Everything needed to evaluate λ for the solids chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularityInput {
    pub params: ScenarioParams,
    /// Weighted initial mass m̄₀ in kg.
    pub mass: f64,
    pub outcome: DisassemblyOutcome,
    pub weighting: FunctionalityWeighting,
}

impl CircularityInput {
    pub fn new(params: ScenarioParams, mass: f64, outcome: DisassemblyOutcome) -> Self {
        Self {
            params,
            mass,
            outcome,
            weighting: FunctionalityWeighting::Global,
        }
    }

    pub fn mu(&self) -> f64 {
        functionality_coefficient(self.params.functional_discards)
    }

    /// Batch schedule with the functionality weighting already applied
    /// where it is per-batch, plus the global multiplier to use on top.
    fn weighted_schedule(&self) -> Result<(BatchSchedule, f64), FlowError> {
        match self.weighting {
            FunctionalityWeighting::Global => Ok((
                flows::batch_mass_schedule(&self.params, self.mass, &self.outcome)?,
                self.mu(),
            )),
            FunctionalityWeighting::DiscardedBatchOnly => Ok((
                flows::weighted_schedule(&self.params, self.mass, &self.outcome, self.mu())?,
                1.0,
            )),
        }
    }
}

/// λ by exact integration of a piecewise-constant schedule and rate.
pub fn lambda_numeric(
    schedule: &BatchSchedule,
    continuous_rate: &PiecewiseConstant,
    mu: f64,
    delta: f64,
) -> Result<f64, CircularityError> {
    if schedule.is_empty() {
        return Err(CircularityError::EmptySchedule);
    }
    let end = schedule.end();
    if !(end > 0.0) {
        return Err(CircularityError::EmptyWindow(end));
    }
    let batches: f64 = schedule.segment_areas().iter().sum();
    let continuous = continuous_rate.integral_to(end);
    Ok(non_negative_zero(
        -(mu * batches + delta * continuous) / end,
    ))
}

fn non_negative_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Algebraic λ for the solids chain with `μ = 2` and no continuous flow.
/// Returns `(λ, t_f)`.
pub fn lambda_closed_form(
    params: &ScenarioParams,
    mass: f64,
    outcome: &DisassemblyOutcome,
) -> Result<(f64, f64), CircularityError> {
    params.validate()?;
    let (unreused, _) = flows::split_by_success(mass, outcome.success())?;
    let t_d = outcome.duration();
    let t_f = params.final_time(t_d);
    let bracket = mass * (params.arrival + t_d + params.transport)
        + (mass + unreused) * (params.reuse - params.transport)
        + 2.0 * mass * params.incineration;
    Ok((non_negative_zero(-2.0 / t_f * bracket), t_f))
}

/// Long-horizon approximation, valid when the disassembly, incineration and
/// transport times are negligible against arrival and reuse times.
pub fn lambda_approx(params: &ScenarioParams, mass: f64, success: f64) -> f64 {
    let horizon = params.arrival + params.reuse;
    non_negative_zero(
        -2.0 * mass / horizon * (params.arrival + (2.0 - success / 100.0) * params.reuse),
    )
}

/// Sensitivity factor with `λ ≈ -2 m̄₀ α(s)`; lies in [1, 2) and falls with `s`.
pub fn alpha(params: &ScenarioParams, success: f64) -> Result<f64, CircularityError> {
    check_success(success)?;
    Ok((params.arrival + (2.0 - success / 100.0) * params.reuse) / (params.arrival + params.reuse))
}

/// Rounds half away from zero to one decimal, as the reported tables do.
pub fn round_to_tenth(value: f64) -> f64 {
    non_negative_zero((value * 10.0).round() / 10.0)
}

/// One-decimal display that never prints `-0.0`.
pub fn format_tenth(value: f64) -> String {
    format!("{:.1}", round_to_tenth(value))
}

/// A way of evaluating λ for the solids chain.
pub trait CircularityMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn lambda(&self, input: &CircularityInput) -> Result<f64, CircularityError>;
}

pub struct ExactIntegration;

impl CircularityMethod for ExactIntegration {
    fn name(&self) -> &'static str {
        "numeric"
    }

    fn description(&self) -> &'static str {
        "exact integration of the piecewise-constant batch schedule and continuous rate"
    }

    fn lambda(&self, input: &CircularityInput) -> Result<f64, CircularityError> {
        let (schedule, mu) = input.weighted_schedule()?;
        lambda_numeric(
            &schedule,
            &input.params.continuous_rate,
            mu,
            input.params.delta,
        )
    }
}

pub struct ClosedForm;

impl CircularityMethod for ClosedForm {
    fn name(&self) -> &'static str {
        "closed-form"
    }

    fn description(&self) -> &'static str {
        "algebraic solids-chain formula with mu = 2 and no continuous flow"
    }

    fn lambda(&self, input: &CircularityInput) -> Result<f64, CircularityError> {
        lambda_closed_form(&input.params, input.mass, &input.outcome).map(|(l, _)| l)
    }
}

pub struct LongHorizonApprox;

impl CircularityMethod for LongHorizonApprox {
    fn name(&self) -> &'static str {
        "approx"
    }

    fn description(&self) -> &'static str {
        "long-horizon approximation t_f ~ t_2in4 + T_r"
    }

    fn lambda(&self, input: &CircularityInput) -> Result<f64, CircularityError> {
        input.params.validate()?;
        check_success(input.outcome.success())?;
        Ok(lambda_approx(
            &input.params,
            input.mass,
            input.outcome.success(),
        ))
    }
}

/// Named λ evaluators.
pub struct MethodRegistry {
    methods: Vec<Box<dyn CircularityMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self {
            methods: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register(Box::new(ClosedForm));
        registry.register(Box::new(ExactIntegration));
        registry.register(Box::new(LongHorizonApprox));
        registry
    }

    /// Adds a method, replacing any existing one with the same name.
    pub fn register(&mut self, method: Box<dyn CircularityMethod>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn CircularityMethod, CircularityError> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| CircularityError::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// All evaluation routes for one scenario, with the integrand broken down by
/// segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularityReport {
    pub input: CircularityInput,
    pub lambda_numeric: f64,
    pub lambda_closed_form: f64,
    pub lambda_approx: f64,
    pub alpha: f64,
    pub final_time: f64,
    pub mu: f64,
    /// `(start, end, weighted mass, area)` per batch segment, area in kg·s.
    pub segments: Vec<(f64, f64, f64, f64)>,
    /// Integral of the continuous rate over the window, kg.
    pub continuous_integral: f64,
}

impl CircularityReport {
    pub fn compute(input: &CircularityInput) -> Result<Self, CircularityError> {
        let (schedule, mu) = input.weighted_schedule()?;
        let lambda_numeric = lambda_numeric(
            &schedule,
            &input.params.continuous_rate,
            mu,
            input.params.delta,
        )?;
        let (lambda_closed_form, final_time) =
            lambda_closed_form(&input.params, input.mass, &input.outcome)?;
        let segments = schedule
            .segments()
            .into_iter()
            .zip(schedule.segment_areas())
            .map(|((a, b, m), area)| (a, b, m, area))
            .collect();
        Ok(Self {
            input: input.clone(),
            lambda_numeric,
            lambda_closed_form,
            lambda_approx: lambda_approx(&input.params, input.mass, input.outcome.success()),
            alpha: alpha(&input.params, input.outcome.success())?,
            final_time,
            mu: input.mu(),
            segments,
            continuous_integral: input.params.continuous_rate.integral_to(final_time),
        })
    }

    /// CSV with one `quantity,value` row per reported figure.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        let mut row = |k: &str, v: f64| out.push_str(&format!("{k},{v}\n"));
        row("lambda_closed_form", self.lambda_closed_form);
        row("lambda_numeric", self.lambda_numeric);
        row("lambda_approx", self.lambda_approx);
        row("alpha", self.alpha);
        row("t_f", self.final_time);
        row("m0", self.input.mass);
        row("s", self.input.outcome.success());
        row("T_d", self.input.outcome.duration());
        row("mu", self.mu);
        row("delta", self.input.params.delta);
        for (i, seg) in self.segments.iter().enumerate() {
            row(&format!("segment_{}_area", i + 1), seg.3);
        }
        out
    }
}

impl fmt::Display for CircularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.input.params;
        writeln!(f, "circularity report")?;
        writeln!(
            f,
            "  inputs: m0 = {} kg, s = {} %, T_d = {} s, mu = {}, delta = {} s",
            self.input.mass,
            self.input.outcome.success(),
            self.input.outcome.duration(),
            self.mu,
            p.delta
        )?;
        writeln!(
            f,
            "  timing: t_2in4 = {} s, T_t = {} s, T_r = {} s, T_i = {} s",
            p.arrival, p.transport, p.reuse, p.incineration
        )?;
        writeln!(f, "  t_f             = {} s", self.final_time)?;
        for (i, (a, b, m, area)) in self.segments.iter().enumerate() {
            writeln!(
                f,
                "  segment {}       = [{a}, {b}) at {m} kg -> {area} kg*s",
                i + 1
            )?;
        }
        if self.continuous_integral != 0.0 {
            writeln!(f, "  continuous flow = {} kg", self.continuous_integral)?;
        }
        writeln!(f, "  lambda (closed) = {:.6}", self.lambda_closed_form)?;
        writeln!(f, "  lambda (exact)  = {:.6}", self.lambda_numeric)?;
        writeln!(f, "  lambda (approx) = {:.6}", self.lambda_approx)?;
        writeln!(f, "  alpha(s)        = {:.6}", self.alpha)?;
        write!(
            f,
            "  lambda          = {}",
            format_tenth(self.lambda_closed_form)
        )
    }
}

/// Variable swept by [`sensitivity_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    Success,
    DisassemblyTime,
    Mass,
}

impl SweepVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::Success => "s",
            SweepVar::DisassemblyTime => "T_d",
            SweepVar::Mass => "m0",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" => Ok(SweepVar::Success),
            "T_d" | "t_d" | "Td" => Ok(SweepVar::DisassemblyTime),
            "m0" => Ok(SweepVar::Mass),
            other => Err(format!(
                "unknown sweep variable `{other}` (expected s, T_d or m0)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(var: SweepVar, values: Vec<f64>) -> Self {
        Self { var, values }
    }

    /// `steps` evenly spaced points from `from` to `to` inclusive.
    pub fn linspace(var: SweepVar, from: f64, to: f64, steps: usize) -> Self {
        let values = match steps {
            0 => Vec::new(),
            1 => vec![from],
            n => (0..n)
                .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self { var, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub var: SweepVar,
    pub value: f64,
    pub lambda_exact: f64,
    pub lambda_approx: f64,
    pub alpha: f64,
}

pub const SWEEP_CSV_HEADER: &str = "var,value,lambda_exact,lambda_approx,alpha";

/// Evaluates λ at every grid point, varying one input per axis around `base`.
/// Rows come out axis by axis, each axis in ascending value order.
pub fn sensitivity_sweep(
    base: &CircularityInput,
    axes: &[SweepAxis],
) -> Result<Vec<SweepRow>, CircularityError> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(CircularityError::EmptyGrid);
    }
    let mut rows = Vec::new();
    for axis in axes {
        let mut values = axis.values.clone();
        values.sort_by(f64::total_cmp);
        for value in values {
            let mut input = base.clone();
            match axis.var {
                SweepVar::Success => {
                    input.outcome = DisassemblyOutcome::new(value, base.outcome.duration())?
                }
                SweepVar::DisassemblyTime => {
                    input.outcome = DisassemblyOutcome::new(base.outcome.success(), value)?
                }
                SweepVar::Mass => {
                    if !(value >= 0.0 && value.is_finite()) {
                        return Err(FlowError::InvalidMass(value).into());
                    }
                    input.mass = value
                }
            }
            let s = input.outcome.success();
            rows.push(SweepRow {
                var: axis.var,
                value,
                lambda_exact: ExactIntegration.lambda(&input)?,
                lambda_approx: lambda_approx(&input.params, input.mass, s),
                alpha: alpha(&input.params, s)?,
            });
        }
    }
    Ok(rows)
}
