//! Materials, criticality weighting and the batch-mass bookkeeping of the
//! solids chain.

use thiserror::Error;

/// Storage time at the disassembler when disassembly fails entirely: the
/// compartment then acts as a waste collection point for one day.
pub const FAILED_DISASSEMBLY_STORAGE_S: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("no materials given")]
    NoMaterials,
    #[error("criticality of `{name}` must lie in (0, 1], got {value}")]
    InvalidCriticality { name: String, value: f64 },
    #[error("mass of `{name}` must be non-negative, got {value}")]
    NegativeMass { name: String, value: f64 },
    #[error("success percentage must lie in [0, 100], got {0}")]
    SuccessOutOfRange(f64),
    #[error("disassembly time must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("invalid timing parameter `{name}`: {reason}")]
    InvalidTiming { name: &'static str, reason: String },
    #[error("segment breakpoints are not increasing: transport time {transport} s must be below reuse time {reuse} s")]
    NonMonotoneBreakpoints { transport: f64, reuse: f64 },
    #[error("weighted mass must be non-negative and finite, got {0}")]
    InvalidMass(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    pub name: String,
    /// Supply criticality weight in (0, 1].
    pub criticality: f64,
    /// Extracted mass in kg.
    pub mass: f64,
}

impl MaterialSpec {
    pub fn new(name: impl Into<String>, criticality: f64, mass: f64) -> Self {
        Self {
            name: name.into(),
            criticality,
            mass,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.criticality > 0.0 && self.criticality <= 1.0) {
            return Err(FlowError::InvalidCriticality {
                name: self.name.clone(),
                value: self.criticality,
            });
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(FlowError::NegativeMass {
                name: self.name.clone(),
                value: self.mass,
            });
        }
        Ok(())
    }

    pub fn weighted_mass(&self) -> f64 {
        self.criticality * self.mass
    }
}

/// Criticality-weighted mass of everything extracted at t = 0, in kg.
pub fn weighted_initial_mass(materials: &[MaterialSpec]) -> Result<f64, FlowError> {
    if materials.is_empty() {
        return Err(FlowError::NoMaterials);
    }
    materials.iter().try_fold(0.0, |acc, m| {
        m.validate()?;
        Ok(acc + m.weighted_mass())
    })
}

/// Splits the weighted mass into the part sent straight to incineration and
/// the part that is disassembled and reused, as `(unreused, reused)`.
pub fn split_by_success(mass: f64, success: f64) -> Result<(f64, f64), FlowError> {
    check_success(success)?;
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(FlowError::InvalidMass(mass));
    }
    let fraction = success / 100.0;
    Ok((mass * (1.0 - fraction), mass * fraction))
}

pub(crate) fn check_success(success: f64) -> Result<(), FlowError> {
    if (0.0..=100.0).contains(&success) {
        Ok(())
    } else {
        Err(FlowError::SuccessOutOfRange(success))
    }
}

/// Penalty multiplier `1 + l`, where `l` counts functional batches that were
/// discarded anyway.
pub fn functionality_coefficient(functional_discards: u32) -> f64 {
    1.0 + f64::from(functional_discards)
}

/// A right-open piecewise-constant function of time. Each breakpoint
/// `(start, value)` holds until the next one; the last holds until `end`
/// (or forever when used as a rate with no end).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseConstant {
    breakpoints: Vec<(f64, f64)>,
}

impl PiecewiseConstant {
    /// Identically zero.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, String> {
        if let Some(&(first, _)) = breakpoints.first() {
            if first != 0.0 {
                return Err(format!("first breakpoint must be at t = 0, got {first}"));
            }
        }
        for pair in breakpoints.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(format!(
                    "breakpoint times must increase strictly ({} then {})",
                    pair[0].0, pair[1].0
                ));
            }
        }
        if breakpoints
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err("breakpoints must be finite".to_string());
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn is_zero(&self) -> bool {
        self.breakpoints.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|&&(start, _)| start <= t)
            .last()
            .map_or(0.0, |&(_, v)| v)
    }

    /// Exact integral over `[0, end)`, one rectangle per segment.
    pub fn integral_to(&self, end: f64) -> f64 {
        self.segment_areas(end).iter().sum()
    }

    pub fn segment_areas(&self, end: f64) -> Vec<f64> {
        let n = self.breakpoints.len();
        (0..n)
            .map(|i| {
                let (start, value) = self.breakpoints[i];
                let stop = if i + 1 < n {
                    self.breakpoints[i + 1].0.min(end)
                } else {
                    end
                };
                value * (stop - start).max(0.0)
            })
            .collect()
    }
}

/// Weighted finite-time-sustainable mass carried in batches, on `[0, t_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSchedule {
    profile: PiecewiseConstant,
    end: f64,
}

impl BatchSchedule {
    pub fn new(breakpoints: Vec<(f64, f64)>, end: f64) -> Result<Self, String> {
        if breakpoints.iter().any(|&(_, m)| m < 0.0) {
            return Err("batch masses must be non-negative".to_string());
        }
        if let Some(&(last, _)) = breakpoints.last() {
            if !(end > last) {
                return Err(format!(
                    "schedule end {end} must follow the last breakpoint {last}"
                ));
            }
        }
        Ok(Self {
            profile: PiecewiseConstant::new(breakpoints)?,
            end,
        })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        self.profile.breakpoints()
    }

    pub fn profile(&self) -> &PiecewiseConstant {
        &self.profile
    }

    /// Final time `t_f`.
    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn is_empty(&self) -> bool {
        self.profile.breakpoints().is_empty()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.end {
            0.0
        } else {
            self.profile.value_at(t)
        }
    }

    /// `(start, end, value)` per segment.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let bp = self.profile.breakpoints();
        bp.iter()
            .enumerate()
            .map(|(i, &(start, v))| (start, bp.get(i + 1).map_or(self.end, |b| b.0), v))
            .collect()
    }

    pub fn segment_areas(&self) -> Vec<f64> {
        self.profile.segment_areas(self.end)
    }

    /// CSV with header `time_s,mass_kg`, one row per breakpoint plus the end.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,mass_kg\n");
        for &(t, m) in self.profile.breakpoints() {
            out.push_str(&format!("{t},{m}\n"));
        }
        if let Some(&(_, m)) = self.profile.breakpoints().last() {
            out.push_str(&format!("{},{m}\n", self.end));
        }
        out
    }
}

/// Timing constants of the solids chain, all in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Arrival of the extracted batch at the disassembler (`t_{2,in,4}`).
    pub arrival: f64,
    /// Transport of the non-disassembled batch to the incinerator.
    pub transport: f64,
    /// Reuse period before the disassembled batch reaches the incinerator.
    pub reuse: f64,
    /// Incineration time.
    pub incineration: f64,
    /// Weight of the continuous flow term.
    pub delta: f64,
    /// Functional batches discarded anyway (`l`).
    pub functional_discards: u32,
    /// Weighted continuous finite-time-sustainable flow, kg/s.
    pub continuous_rate: PiecewiseConstant,
}

impl ScenarioParams {
    /// One month to the disassembler, one hour of transport, one month of
    /// reuse, one day of incineration, `l = 1`, `Δ = 1 s`.
    pub fn table_one() -> Self {
        Self {
            arrival: 2_592_000.0,
            transport: 3_600.0,
            reuse: 2_592_000.0,
            incineration: 86_400.0,
            delta: 1.0,
            functional_discards: 1,
            continuous_rate: PiecewiseConstant::zero(),
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(FlowError::InvalidTiming {
                    name,
                    reason: format!("{v} is not finite"),
                })
            }
        };
        let positive = |name, v: f64| {
            finite(name, v)?;
            if v > 0.0 {
                Ok(())
            } else {
                Err(FlowError::InvalidTiming {
                    name,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        };
        finite("t_2in4", self.arrival)?;
        if self.arrival < 0.0 {
            return Err(FlowError::InvalidTiming {
                name: "t_2in4",
                reason: format!("must be >= 0, got {}", self.arrival),
            });
        }
        positive("T_t", self.transport)?;
        positive("T_r", self.reuse)?;
        positive("T_i", self.incineration)?;
        positive("delta", self.delta)?;
        if self.transport >= self.reuse {
            return Err(FlowError::NonMonotoneBreakpoints {
                transport: self.transport,
                reuse: self.reuse,
            });
        }
        Ok(())
    }

    /// End of the time window, `t_f = t_{2,in,4} + T_d + T_r + T_i`.
    pub fn final_time(&self, disassembly_time: f64) -> f64 {
        self.arrival + disassembly_time + self.reuse + self.incineration
    }
}

/// Success percentage and duration of the disassembly stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisassemblyOutcome {
    success: f64,
    duration: f64,
}

impl DisassemblyOutcome {
    pub fn new(success: f64, duration: f64) -> Result<Self, FlowError> {
        check_success(success)?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(FlowError::InvalidDuration(duration));
        }
        Ok(Self { success, duration })
    }

    /// Total failure: nothing reused, material stored for a day.
    pub fn failed() -> Self {
        Self {
            success: 0.0,
            duration: FAILED_DISASSEMBLY_STORAGE_S,
        }
    }

    /// Percent in [0, 100].
    pub fn success(&self) -> f64 {
        self.success
    }

    /// Seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// How the functionality coefficient enters the batch integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FunctionalityWeighting {
    /// `μ` multiplies the whole batch integrand.
    #[default]
    Global,
    /// `μ` multiplies only the non-disassembled batch sent to incineration.
    /// Experimental; not used for any reported table value.
    DiscardedBatchOnly,
}

/// The three-segment weighted batch mass of the solids chain, cut at `t_f`.
pub fn batch_mass_schedule(
    params: &ScenarioParams,
    mass: f64,
    outcome: &DisassemblyOutcome,
) -> Result<BatchSchedule, FlowError> {
    weighted_schedule(params, mass, outcome, 1.0)
}

/// Like [`batch_mass_schedule`] but with the discarded batch scaled by
/// `discard_weight`; see [`FunctionalityWeighting::DiscardedBatchOnly`].
pub fn weighted_schedule(
    params: &ScenarioParams,
    mass: f64,
    outcome: &DisassemblyOutcome,
    discard_weight: f64,
) -> Result<BatchSchedule, FlowError> {
    params.validate()?;
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(FlowError::InvalidMass(mass));
    }
    let (unreused, reused) = split_by_success(mass, outcome.success())?;
    let left_disassembler = params.arrival + outcome.duration();
    let discarded_at = left_disassembler + params.transport;
    let reused_at = left_disassembler + params.reuse;
    let end = params.final_time(outcome.duration());
    if !(discarded_at < reused_at) {
        return Err(FlowError::NonMonotoneBreakpoints {
            transport: params.transport,
            reuse: params.reuse,
        });
    }
    let second = mass + discard_weight * unreused;
    BatchSchedule::new(
        vec![
            (0.0, mass),
            (discarded_at, second),
            (reused_at, second + reused),
        ],
        end,
    )
    .map_err(|reason| FlowError::InvalidTiming {
        name: "schedule",
        reason,
    })
}
