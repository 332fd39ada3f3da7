//! Tabular goal-conditioned temporal-difference learners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::GreedyController;
use crate::env::{make_env, Action, Env, EnvState, Goal};
use crate::eval::{evaluate, EVAL_EPISODES};
use crate::policy::Policy;
use crate::task::TaskSpec;
use crate::DisassemblerError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the budget over which ε decays linearly.
    pub epsilon_decay: f64,
    pub eval_episodes: usize,
}

impl TrainConfig {
    pub fn for_task(spec: &TaskSpec) -> Self {
        Self::with_steps(spec.default_budget)
    }

    pub fn with_steps(steps: u64) -> Self {
        Self {
            steps,
            learning_rate: 0.5,
            discount: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay: 0.5,
            eval_episodes: EVAL_EPISODES,
        }
    }

    fn epsilon(&self, step: u64) -> f64 {
        let horizon = self.epsilon_decay * self.steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = (step as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStats {
    /// Mean greedy evaluation reward before training.
    pub reward_start: f64,
    /// Mean greedy evaluation reward after training.
    pub reward_end: f64,
    /// `reward_end - reward_start`.
    pub zeta: f64,
    pub episode_lengths: Vec<u32>,
    pub episode_returns: Vec<f64>,
    /// Cumulative environment steps at the end of each episode.
    pub episode_end_steps: Vec<u64>,
    pub seed: u64,
    pub steps: u64,
}

impl TrainingStats {
    /// Mean length over the first and the last `fraction` of episodes.
    pub fn early_late_lengths(&self, fraction: f64) -> Option<(f64, f64)> {
        let n = self.episode_lengths.len();
        let k = ((n as f64 * fraction).floor() as usize).max(1);
        if n < 2 * k {
            return None;
        }
        let mean = |xs: &[u32]| xs.iter().map(|&x| f64::from(x)).sum::<f64>() / xs.len() as f64;
        Some((
            mean(&self.episode_lengths[..k]),
            mean(&self.episode_lengths[n - k..]),
        ))
    }

    /// CSV with header `step,episode,episode_length,return`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("step,episode,episode_length,return\n");
        for (i, ((len, ret), step)) in self
            .episode_lengths
            .iter()
            .zip(&self.episode_returns)
            .zip(&self.episode_end_steps)
            .enumerate()
        {
            out.push_str(&format!("{step},{},{len},{ret}\n", i + 1));
        }
        out
    }
}

/// How failed episodes are replayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relabel {
    None,
    /// Replay each episode with the goal replaced by what it achieved.
    FinalState,
}

pub trait Learner: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn train(
        &self,
        spec: &TaskSpec,
        config: &TrainConfig,
        seed: u64,
    ) -> Result<(Policy, TrainingStats), DisassemblerError>;
}

/// ε-greedy Q-learning over (state, goal, action) with optional hindsight
/// relabeling.
pub struct TabularQ {
    pub relabel: Relabel,
}

impl TabularQ {
    fn update(
        policy: &mut Policy,
        state: &EnvState,
        goal: &Goal,
        action: Action,
        reward: f64,
        next: &EnvState,
        terminated: bool,
    ) {
        let goal_key = goal.key();
        let bootstrap = if terminated {
            0.0
        } else {
            policy.discount * policy.max_value(next.key(), goal_key)
        };
        let lr = policy.learning_rate;
        let q = &mut policy.values_mut(state.key(), goal_key)[action.index()];
        *q += lr * (reward + bootstrap - *q);
    }

    fn replay(
        &self,
        env: &Env,
        policy: &mut Policy,
        episode: &[(EnvState, Action)],
        last: &EnvState,
    ) {
        if self.relabel != Relabel::FinalState {
            return;
        }
        let Some(goal) = env.achieved_goal(last) else {
            return;
        };
        if &goal == env.goal() {
            return;
        }
        for (state, action) in episode {
            if goal.is_achieved(state) {
                break;
            }
            let t = env.transition(state, *action, &goal);
            Self::update(
                policy,
                state,
                &goal,
                *action,
                t.reward,
                &t.next,
                t.terminated,
            );
        }
    }
}

impl Learner for TabularQ {
    fn name(&self) -> &'static str {
        match self.relabel {
            Relabel::None => "q",
            Relabel::FinalState => "q-her",
        }
    }

    fn description(&self) -> &'static str {
        match self.relabel {
            Relabel::None => "tabular Q-learning",
            Relabel::FinalState => "tabular Q-learning with final-state goal relabeling",
        }
    }

    fn train(
        &self,
        spec: &TaskSpec,
        config: &TrainConfig,
        seed: u64,
    ) -> Result<(Policy, TrainingStats), DisassemblerError> {
        let mut env = make_env(spec.clone(), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let mut policy = Policy::new(spec.kind.name(), config.learning_rate, config.discount);

        let eval = |env: &Env, policy: &Policy| -> Result<f64, DisassemblerError> {
            let mut greedy = GreedyController::new(policy.clone());
            Ok(evaluate(&mut greedy, env, config.eval_episodes)?.mean_reward)
        };
        let reward_start = eval(&env, &policy)?;

        let goal = env.goal().clone();
        let mut episode_lengths = Vec::new();
        let mut episode_returns = Vec::new();
        let mut episode_end_steps = Vec::new();
        let mut episode: Vec<(EnvState, Action)> = Vec::new();
        let mut step = 0u64;
        while step < config.steps {
            let mut state = env.reset();
            episode.clear();
            let mut ret = 0.0;
            let mut done = goal.is_achieved(&state);
            while !done && step < config.steps {
                let action = if rng.gen::<f64>() < config.epsilon(step) {
                    Action::ALL[rng.gen_range(0..Action::COUNT)]
                } else {
                    policy.greedy(state.key(), goal.key())
                };
                let out = env.step_action(action)?;
                step += 1;
                ret += out.reward;
                Self::update(
                    &mut policy,
                    &state,
                    &goal,
                    action,
                    out.reward,
                    &out.state,
                    out.terminated,
                );
                episode.push((state, action));
                state = out.state;
                done = out.terminated || out.truncated;
            }
            self.replay(&env, &mut policy, &episode, &state);
            episode_lengths.push(episode.len() as u32);
            episode_returns.push(ret);
            episode_end_steps.push(step);
        }

        let reward_end = eval(&env, &policy)?;
        let stats = TrainingStats {
            reward_start,
            reward_end,
            zeta: reward_end - reward_start,
            episode_lengths,
            episode_returns,
            episode_end_steps,
            seed,
            steps: config.steps,
        };
        Ok((policy, stats))
    }
}

/// Learners by name.
pub struct LearnerRegistry {
    learners: Vec<Box<dyn Learner>>,
}

impl LearnerRegistry {
    pub fn builtin() -> Self {
        let mut registry = Self {
            learners: Vec::new(),
        };
        registry.register(Box::new(TabularQ {
            relabel: Relabel::FinalState,
        }));
        registry.register(Box::new(TabularQ {
            relabel: Relabel::None,
        }));
        registry
    }

    pub fn register(&mut self, learner: Box<dyn Learner>) {
        self.learners.retain(|l| l.name() != learner.name());
        self.learners.push(learner);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Learner, DisassemblerError> {
        self.learners
            .iter()
            .find(|l| l.name() == name)
            .map(|l| l.as_ref())
            .ok_or_else(|| DisassemblerError::UnknownLearner(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.learners.iter().map(|l| l.name()).collect()
    }

    pub fn default_learner(&self) -> &dyn Learner {
        self.learners[0].as_ref()
    }
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
