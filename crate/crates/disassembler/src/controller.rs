//! Controllers that drive the disassembly environment, selectable by name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Env, EnvState};
use crate::oracle::{plan_oracle, OraclePlan};
use crate::policy::Policy;
use crate::DisassemblerError;

pub trait Controller {
    fn name(&self) -> &str;
    fn act(&mut self, env: &Env, state: &EnvState) -> Action;
}

/// Acts greedily on a learned table for the environment's own goal.
pub struct GreedyController {
    policy: Policy,
}

impl GreedyController {
    pub fn new(policy: Policy) -> Self {
        Self { policy }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl Controller for GreedyController {
    fn name(&self) -> &str {
        "greedy"
    }

    fn act(&mut self, env: &Env, state: &EnvState) -> Action {
        self.policy.greedy(state.key(), env.goal().key())
    }
}

pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _env: &Env, _state: &EnvState) -> Action {
        Action::ALL[self.rng.gen_range(0..Action::COUNT)]
    }
}

/// Follows an exact shortest plan; falls back to the first action where no
/// plan exists.
pub struct OracleController {
    plan: OraclePlan,
}

impl OracleController {
    pub fn new(plan: OraclePlan) -> Self {
        Self { plan }
    }

    pub fn plan(&self) -> &OraclePlan {
        &self.plan
    }
}

impl Controller for OracleController {
    fn name(&self) -> &str {
        "oracle"
    }

    fn act(&mut self, env: &Env, state: &EnvState) -> Action {
        self.plan.best_action(env, state).unwrap_or(Action::North)
    }
}

type Factory = fn(&Env, u64) -> Result<Box<dyn Controller>, DisassemblerError>;

/// Builtin controllers by name. Learned policies are loaded from files and
/// wrapped in [`GreedyController`] directly.
pub struct ControllerRegistry {
    entries: Vec<(&'static str, &'static str, Factory)>,
}

impl ControllerRegistry {
    pub fn builtin() -> Self {
        let mut registry = Self {
            entries: Vec::new(),
        };
        registry.register("oracle", "exact shortest-plan controller", |env, _| {
            Ok(Box::new(OracleController::new(plan_oracle(env)?)))
        });
        registry.register("random", "uniformly random actions", |_, seed| {
            Ok(Box::new(RandomController::new(seed)))
        });
        registry.register("untrained", "greedy on an empty value table", |env, _| {
            Ok(Box::new(GreedyController::new(Policy::new(
                env.spec().kind.name(),
                0.0,
                0.0,
            ))))
        });
        registry
    }

    pub fn register(&mut self, name: &'static str, description: &'static str, factory: Factory) {
        self.entries.retain(|(n, _, _)| *n != name);
        self.entries.push((name, description, factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _, _)| *n).collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|(n, d, _)| (*n, *d)).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _, _)| *n == name)
    }

    pub fn build(
        &self,
        name: &str,
        env: &Env,
        seed: u64,
    ) -> Result<Box<dyn Controller>, DisassemblerError> {
        let (_, _, factory) = self
            .entries
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| DisassemblerError::UnknownController(name.to_string()))?;
        factory(env, seed)
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
