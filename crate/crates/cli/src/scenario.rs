//! JSON scenario files.
//!
//! ```json
//! {
//!   "name": "table2_sac",
//!   "network": [
//!     { "id": 1, "kind": "node", "role": "reservoir" },
//!     { "id": 4, "kind": "arc", "source": 1, "sink": 2, "role": "use" }
//!   ],
//!   "materials": [ { "name": "beta1", "criticality": 0.1, "mass": 1.0 } ],
//!   "timing": { "t_1out4": 0, "t_2in4": 2592000, "T_t": 3600, "T_r": 2592000, "T_i": 86400 },
//!   "outcome": { "s": 100, "T_d": 0.4 },
//!   "options": { "delta": 1.0, "l": 1, "rounding": 1 },
//!   "expect": { "lambda": -2.1 }
//! }
//! ```
//!
//! `outcome` may instead reference a trained policy file
//! (`{ "policy": "run.ciroq", "task": "2p1t" }`) or a builtin controller
//! (`{ "controller": "oracle", "task": "2p1t" }`). `network` is optional and
//! defaults to the solids chain. Unknown keys are rejected and every problem
//! is reported, each with a JSON-pointer path.

use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;
use tmn_core::{
    weighted_initial_mass, Compartment, CompartmentKind, DisassemblyOutcome,
    FunctionalityWeighting, MaterialSpec, Network, PiecewiseConstant, Role, ScenarioParams,
};
use tmn_disassembler::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<FieldError>),
}

impl ScenarioError {
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ScenarioError::Validation(errors) => errors,
            _ => &[],
        }
    }
}

/// Where the disassembly outcome comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeSpec {
    Literal(DisassemblyOutcome),
    /// A policy file, resolved relative to the scenario file.
    Policy {
        path: String,
        task: TaskKind,
    },
    Controller {
        name: String,
        task: TaskKind,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub name: String,
    pub description: Option<String>,
    pub network: Network,
    pub materials: Vec<MaterialSpec>,
    pub params: ScenarioParams,
    pub outcome: OutcomeSpec,
    pub weighting: FunctionalityWeighting,
    /// Decimals used when comparing against expected values.
    pub rounding: u32,
    pub expect_lambda: Option<f64>,
}

impl ScenarioFile {
    pub fn weighted_mass(&self) -> f64 {
        weighted_initial_mass(&self.materials).expect("validated on load")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        if text.trim().is_empty() {
            return Err(ScenarioError::Parse("file is empty".into()));
        }
        let value: Value =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut v = Validator::default();
        let parsed = v.scenario(&value);
        match parsed {
            Some(s) if v.errors.is_empty() => Ok(s),
            _ => Err(ScenarioError::Validation(v.errors)),
        }
    }

    pub fn to_json(&self) -> Value {
        let network: Vec<Value> = self
            .network
            .compartments()
            .iter()
            .map(|c| match c.kind {
                CompartmentKind::Node => json!({ "id": c.id, "kind": "node", "role": c.role.as_str() }),
                CompartmentKind::Arc => json!({
                    "id": c.id, "kind": "arc", "source": c.source, "sink": c.sink, "role": c.role.as_str()
                }),
            })
            .collect();
        let materials: Vec<Value> = self
            .materials
            .iter()
            .map(|m| json!({ "name": m.name, "criticality": m.criticality, "mass": m.mass }))
            .collect();
        let p = &self.params;
        let outcome = match &self.outcome {
            OutcomeSpec::Literal(o) => json!({ "s": o.success(), "T_d": o.duration() }),
            OutcomeSpec::Policy { path, task } => json!({ "policy": path, "task": task.name() }),
            OutcomeSpec::Controller { name, task } => {
                json!({ "controller": name, "task": task.name() })
            }
        };
        let mut options = json!({
            "delta": p.delta,
            "l": p.functional_discards,
            "rounding": self.rounding,
            "weighting": match self.weighting {
                FunctionalityWeighting::Global => "global",
                FunctionalityWeighting::DiscardedBatchOnly => "discarded-batch",
            },
        });
        if !p.continuous_rate.breakpoints().is_empty() {
            options["continuous_rate"] = json!(p
                .continuous_rate
                .breakpoints()
                .iter()
                .map(|&(t, r)| json!([t, r]))
                .collect::<Vec<_>>());
        }
        let mut out = json!({
            "name": self.name,
            "network": network,
            "materials": materials,
            "timing": {
                "t_1out4": 0.0,
                "t_2in4": p.arrival,
                "T_t": p.transport,
                "T_r": p.reuse,
                "T_i": p.incineration,
            },
            "outcome": outcome,
            "options": options,
        });
        if let Some(d) = &self.description {
            out["description"] = json!(d);
        }
        if let Some(l) = self.expect_lambda {
            out["expect"] = json!({ "lambda": l });
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("scenario serializes")
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioFile::from_json_str(&text)
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(
        &mut self,
        value: &'a Value,
        path: &str,
        allowed: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let Some(map) = value.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(&format!("{path}/{key}"), "unknown key");
            }
        }
        Some(map)
    }

    fn number(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<f64> {
        match map.get(key) {
            None => {
                self.err(&format!("{path}/{key}"), "missing required number");
                None
            }
            Some(v) => self.number_value(v, &format!("{path}/{key}")),
        }
    }

    fn number_value(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, "expected a finite number");
                None
            }
        }
    }

    fn integer(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<u32> {
        let p = format!("{path}/{key}");
        match map.get(key)?.as_u64().and_then(|x| u32::try_from(x).ok()) {
            Some(x) => Some(x),
            None => {
                self.err(&p, "expected a non-negative integer");
                None
            }
        }
    }

    fn string<'a>(
        &mut self,
        map: &'a Map<String, Value>,
        key: &str,
        path: &str,
    ) -> Option<&'a str> {
        match map.get(key) {
            None => {
                self.err(&format!("{path}/{key}"), "missing required string");
                None
            }
            Some(v) => {
                let s = v.as_str();
                if s.is_none() {
                    self.err(&format!("{path}/{key}"), "expected a string");
                }
                s
            }
        }
    }

    fn scenario(&mut self, value: &Value) -> Option<ScenarioFile> {
        let root = self.object(
            value,
            "",
            &[
                "name",
                "description",
                "network",
                "materials",
                "timing",
                "outcome",
                "options",
                "expect",
            ],
        )?;
        let name = match root.get("name") {
            None => "unnamed".to_string(),
            Some(_) => self
                .string(root, "name", "")
                .unwrap_or_default()
                .to_string(),
        };
        let description = match root.get("description") {
            None => None,
            Some(_) => self.string(root, "description", "").map(str::to_string),
        };
        let network = match root.get("network") {
            None => Some(Network::solids()),
            Some(v) => self.network(v),
        };
        let materials = match root.get("materials") {
            None => {
                self.err("/materials", "missing required section");
                None
            }
            Some(v) => self.materials(v),
        };
        let timing = match root.get("timing") {
            None => {
                self.err("/timing", "missing required section");
                None
            }
            Some(v) => self.timing(v),
        };
        let outcome = match root.get("outcome") {
            None => {
                self.err("/outcome", "missing required section");
                None
            }
            Some(v) => self.outcome(v),
        };
        let empty = Value::Object(Map::new());
        let options = self.options(root.get("options").unwrap_or(&empty));
        let expect_lambda = match root.get("expect") {
            None => None,
            Some(v) => self.object(v, "/expect", &["lambda"]).and_then(|m| {
                m.get("lambda")
                    .and_then(|l| self.number_value(l, "/expect/lambda"))
            }),
        };

        let mut params = timing?;
        let (delta, l, rounding, weighting, rate) = options?;
        params.delta = delta;
        params.functional_discards = l;
        params.continuous_rate = rate;
        if let Err(e) = params.validate() {
            self.err("/timing", e.to_string());
        }
        if let Some(net) = &network {
            let check = net.check_solids_topology();
            for reason in check.reasons {
                self.err("/network", format!("not a solids chain: {reason}"));
            }
        }
        Some(ScenarioFile {
            name,
            description,
            network: network?,
            materials: materials?,
            params,
            outcome: outcome?,
            weighting,
            rounding,
            expect_lambda,
        })
    }

    fn network(&mut self, value: &Value) -> Option<Network> {
        let Some(items) = value.as_array() else {
            self.err("/network", "expected an array of compartments");
            return None;
        };
        let before = self.errors.len();
        let mut compartments = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let path = format!("/network/{i}");
            let Some(map) = self.object(item, &path, &["id", "kind", "source", "sink", "role"])
            else {
                continue;
            };
            let id = self.integer(map, "id", &path);
            if map.get("id").is_none() {
                self.err(&format!("{path}/id"), "missing required integer");
            }
            let kind =
                self.string(map, "kind", &path)
                    .and_then(|k| match k.parse::<CompartmentKind>() {
                        Ok(k) => Some(k),
                        Err(e) => {
                            self.err(&format!("{path}/kind"), e);
                            None
                        }
                    });
            let role = self
                .string(map, "role", &path)
                .and_then(|r| match r.parse::<Role>() {
                    Ok(r) => Some(r),
                    Err(e) => {
                        self.err(&format!("{path}/role"), e);
                        None
                    }
                });
            let (Some(id), Some(kind), Some(role)) = (id, kind, role) else {
                continue;
            };
            let endpoint = |v: &mut Self, key: &str| -> Option<u32> {
                match map.get(key) {
                    None if kind == CompartmentKind::Node => Some(id),
                    None => {
                        v.err(&format!("{path}/{key}"), "arcs need a source and a sink");
                        None
                    }
                    Some(_) => v.integer(map, key, &path),
                }
            };
            let (Some(source), Some(sink)) = (endpoint(self, "source"), endpoint(self, "sink"))
            else {
                continue;
            };
            compartments.push(Compartment {
                id,
                source,
                sink,
                kind,
                role,
            });
        }
        if self.errors.len() > before {
            return None;
        }
        match Network::build(compartments) {
            Ok(net) => Some(net),
            Err(e) => {
                self.err("/network", e.to_string());
                None
            }
        }
    }

    fn materials(&mut self, value: &Value) -> Option<Vec<MaterialSpec>> {
        let Some(items) = value.as_array() else {
            self.err("/materials", "expected an array of materials");
            return None;
        };
        if items.is_empty() {
            self.err("/materials", "at least one material is required");
            return None;
        }
        let before = self.errors.len();
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let path = format!("/materials/{i}");
            let Some(map) = self.object(item, &path, &["name", "criticality", "mass"]) else {
                continue;
            };
            let name = self
                .string(map, "name", &path)
                .unwrap_or_default()
                .to_string();
            let criticality = self.number(map, "criticality", &path);
            let mass = self.number(map, "mass", &path);
            if let Some(c) = criticality {
                if !(c > 0.0 && c <= 1.0) {
                    self.err(
                        &format!("{path}/criticality"),
                        format!("must lie in (0, 1], got {c}"),
                    );
                }
            }
            if let Some(m) = mass {
                if m < 0.0 {
                    self.err(
                        &format!("{path}/mass"),
                        format!("must be non-negative, got {m}"),
                    );
                }
            }
            if let (Some(c), Some(m)) = (criticality, mass) {
                out.push(MaterialSpec::new(name, c, m));
            }
        }
        (self.errors.len() == before).then_some(out)
    }

    fn timing(&mut self, value: &Value) -> Option<ScenarioParams> {
        let map = self.object(
            value,
            "/timing",
            &["t_1out4", "t_2in4", "T_t", "T_r", "T_i"],
        )?;
        if let Some(v) = map.get("t_1out4") {
            if self
                .number_value(v, "/timing/t_1out4")
                .is_some_and(|t| t != 0.0)
            {
                self.err("/timing/t_1out4", "extraction happens at t = 0");
            }
        }
        let arrival = self.number(map, "t_2in4", "/timing");
        let transport = self.number(map, "T_t", "/timing");
        let reuse = self.number(map, "T_r", "/timing");
        let incineration = self.number(map, "T_i", "/timing");
        Some(ScenarioParams {
            arrival: arrival?,
            transport: transport?,
            reuse: reuse?,
            incineration: incineration?,
            ..ScenarioParams::table_one()
        })
    }

    fn outcome(&mut self, value: &Value) -> Option<OutcomeSpec> {
        let map = self.object(
            value,
            "/outcome",
            &["s", "T_d", "policy", "controller", "task"],
        )?;
        let has = |k: &str| map.contains_key(k);
        let task = |v: &mut Self| -> Option<TaskKind> {
            let name = v.string(map, "task", "/outcome")?;
            match name.parse() {
                Ok(t) => Some(t),
                Err(e) => {
                    v.err("/outcome/task", e);
                    None
                }
            }
        };
        match (has("s") || has("T_d"), has("policy"), has("controller")) {
            (true, false, false) => {
                if has("task") {
                    self.err("/outcome/task", "only used with `policy` or `controller`");
                }
                let s = self.number(map, "s", "/outcome");
                let t_d = self.number(map, "T_d", "/outcome");
                if let Some(s) = s {
                    if !(0.0..=100.0).contains(&s) {
                        self.err("/outcome/s", format!("must lie in [0, 100], got {s}"));
                        return None;
                    }
                }
                if let Some(t) = t_d {
                    if t <= 0.0 {
                        self.err("/outcome/T_d", format!("must be positive, got {t}"));
                        return None;
                    }
                }
                DisassemblyOutcome::new(s?, t_d?)
                    .ok()
                    .map(OutcomeSpec::Literal)
            }
            (false, true, false) => {
                let path = self.string(map, "policy", "/outcome").map(str::to_string);
                let task = task(self);
                Some(OutcomeSpec::Policy {
                    path: path?,
                    task: task?,
                })
            }
            (false, false, true) => {
                let name = self
                    .string(map, "controller", "/outcome")
                    .map(str::to_string);
                let task = task(self);
                Some(OutcomeSpec::Controller {
                    name: name?,
                    task: task?,
                })
            }
            _ => {
                self.err(
                    "/outcome",
                    "give exactly one of {s, T_d}, {policy, task} or {controller, task}",
                );
                None
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn options(
        &mut self,
        value: &Value,
    ) -> Option<(f64, u32, u32, FunctionalityWeighting, PiecewiseConstant)> {
        let map = self.object(
            value,
            "/options",
            &["delta", "l", "rounding", "weighting", "continuous_rate"],
        )?;
        let defaults = ScenarioParams::table_one();
        let delta = match map.get("delta") {
            None => Some(defaults.delta),
            Some(_) => self.number(map, "delta", "/options"),
        };
        let l = match map.get("l") {
            None => Some(defaults.functional_discards),
            Some(_) => self.integer(map, "l", "/options"),
        };
        let rounding = match map.get("rounding") {
            None => Some(1),
            Some(_) => self.integer(map, "rounding", "/options"),
        };
        let weighting = match map.get("weighting") {
            None => Some(FunctionalityWeighting::Global),
            Some(_) => match self.string(map, "weighting", "/options") {
                Some("global") => Some(FunctionalityWeighting::Global),
                Some("discarded-batch") => Some(FunctionalityWeighting::DiscardedBatchOnly),
                Some(other) => {
                    self.err(
                        "/options/weighting",
                        format!("expected `global` or `discarded-batch`, got `{other}`"),
                    );
                    None
                }
                None => None,
            },
        };
        let rate = match map.get("continuous_rate") {
            None => Some(PiecewiseConstant::zero()),
            Some(v) => self.rate(v),
        };
        Some((delta?, l?, rounding?, weighting?, rate?))
    }

    fn rate(&mut self, value: &Value) -> Option<PiecewiseConstant> {
        let path = "/options/continuous_rate";
        let Some(items) = value.as_array() else {
            self.err(path, "expected an array of [time, rate] pairs");
            return None;
        };
        let mut points = Vec::new();
        for (i, item) in items.iter().enumerate() {
            match item.as_array().map(Vec::as_slice) {
                Some([t, r]) => {
                    let p = format!("{path}/{i}");
                    let (t, r) = (self.number_value(t, &p), self.number_value(r, &p));
                    if let (Some(t), Some(r)) = (t, r) {
                        if r < 0.0 {
                            self.err(&p, "rates must be non-negative");
                        }
                        points.push((t, r));
                    }
                }
                _ => self.err(&format!("{path}/{i}"), "expected a [time, rate] pair"),
            }
        }
        match PiecewiseConstant::new(points) {
            Ok(p) => Some(p),
            Err(e) => {
                self.err(path, e);
                None
            }
        }
    }
}
