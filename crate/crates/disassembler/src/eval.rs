//! Greedy evaluation of a controller and conversion to a disassembly outcome.

use tmn_core::{DisassemblyOutcome, FAILED_DISASSEMBLY_STORAGE_S};

use crate::controller::Controller;
use crate::env::{make_env, Env};
use crate::DisassemblerError;

pub const EVAL_EPISODES: usize = 100;
/// Layout stream shared by every evaluation, so controllers face the same starts.
pub const EVAL_SEED: u64 = 0x00C1_0E7A;
/// Wall-clock duration of one control step.
pub const SECONDS_PER_STEP: f64 = 0.040;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub outcome: DisassemblyOutcome,
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
    /// Mean steps over successful episodes.
    pub mean_success_steps: Option<f64>,
    pub episode_lengths: Vec<u32>,
}

impl Evaluation {
    pub fn summary_line(&self) -> String {
        format!(
            "episodes={} successes={} s={:.1} T_d={} mean_reward={:.3} mean_success_steps={}",
            self.episodes,
            self.successes,
            self.outcome.success(),
            self.outcome.duration(),
            self.mean_reward,
            self.mean_success_steps
                .map_or("-".to_string(), |m| format!("{m:.3}")),
        )
    }
}

/// Runs `episodes` episodes on fresh layouts drawn from [`EVAL_SEED`].
///
/// `s` is the percentage of episodes reaching the goal. `T_d` is the mean
/// length of successful episodes times [`SECONDS_PER_STEP`], or the one-day
/// storage fallback when nothing succeeds. A success needing no step counts
/// as one step so that `T_d` stays positive.
pub fn evaluate(
    controller: &mut dyn Controller,
    env: &Env,
    episodes: usize,
) -> Result<Evaluation, DisassemblerError> {
    if episodes == 0 {
        return Err(DisassemblerError::NoEpisodes);
    }
    let mut env = make_env(env.spec().clone(), EVAL_SEED)?;
    let mut total_reward = 0.0;
    let mut success_steps = Vec::new();
    let mut episode_lengths = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset();
        let mut succeeded = env.goal().is_achieved(&state);
        let mut steps = 0u32;
        while !succeeded {
            let action = controller.act(&env, &state);
            let step = env.step_action(action)?;
            steps += 1;
            total_reward += step.reward;
            state = step.state;
            succeeded = step.terminated;
            if step.truncated {
                break;
            }
        }
        episode_lengths.push(steps);
        if succeeded {
            success_steps.push(steps.max(1));
        }
    }
    let successes = success_steps.len();
    let mean_success_steps = (successes > 0)
        .then(|| success_steps.iter().map(|&s| f64::from(s)).sum::<f64>() / successes as f64);
    let outcome = match mean_success_steps {
        Some(mean) => DisassemblyOutcome::new(
            100.0 * successes as f64 / episodes as f64,
            SECONDS_PER_STEP * mean,
        )?,
        None => DisassemblyOutcome::new(0.0, FAILED_DISASSEMBLY_STORAGE_S)?,
    };
    Ok(Evaluation {
        outcome,
        episodes,
        successes,
        mean_reward: total_reward / episodes as f64,
        mean_success_steps,
        episode_lengths,
    })
}
