//! Exact shortest-plan oracle for the deterministic task MDP.
//!
//! Enumerates every state reachable from the reset distribution without
//! colliding, then runs a multi-source breadth-first search backwards from
//! the goal states. The resulting step counts are optimal episode lengths.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::env::{Action, Env, EnvState, StateKey};

pub const MAX_ORACLE_STATES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("reachable state space exceeds {limit} states")]
    StateSpaceTooLarge { limit: usize },
}

#[derive(Debug, Clone)]
pub struct OraclePlan {
    distance: HashMap<StateKey, u32>,
    /// Optimal episode length per start gripper cell; `None` when no plan exists.
    starts: Vec<(u8, Option<u32>)>,
    explored: usize,
}

impl OraclePlan {
    pub fn distance(&self, state: &EnvState) -> Option<u32> {
        self.distance.get(&state.key()).copied()
    }

    pub fn start_lengths(&self) -> &[(u8, Option<u32>)] {
        &self.starts
    }

    pub fn explored_states(&self) -> usize {
        self.explored
    }

    /// Every start state has a plan.
    pub fn is_feasible(&self) -> bool {
        self.starts.iter().all(|(_, d)| d.is_some())
    }

    pub fn max_length(&self) -> Option<u32> {
        self.starts
            .iter()
            .map(|(_, d)| *d)
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .max()
    }

    /// First action, in index order, that moves one step closer to the goal.
    pub fn best_action(&self, env: &Env, state: &EnvState) -> Option<Action> {
        let here = self.distance(state)?;
        if here == 0 {
            return None;
        }
        Action::ALL.into_iter().find(|&a| {
            let t = env.transition(state, a, env.goal());
            !t.collided && self.distance(&t.next) == Some(here - 1)
        })
    }
}

pub fn plan_oracle(env: &Env) -> Result<OraclePlan, OracleError> {
    plan_oracle_with_limit(env, MAX_ORACLE_STATES)
}

pub fn plan_oracle_with_limit(env: &Env, limit: usize) -> Result<OraclePlan, OracleError> {
    let goal = env.goal();
    let mut index: HashMap<StateKey, usize> = HashMap::new();
    let mut states: Vec<EnvState> = Vec::new();
    let mut predecessors: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |state: EnvState,
                      states: &mut Vec<EnvState>,
                      predecessors: &mut Vec<Vec<usize>>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, OracleError> {
        if let Some(&i) = index.get(&state.key()) {
            return Ok(i);
        }
        if states.len() >= limit {
            return Err(OracleError::StateSpaceTooLarge { limit });
        }
        let i = states.len();
        index.insert(state.key(), i);
        states.push(state);
        predecessors.push(Vec::new());
        queue.push_back(i);
        Ok(i)
    };

    for start in env.start_states() {
        intern(start, &mut states, &mut predecessors, &mut queue)?;
    }
    while let Some(i) = queue.pop_front() {
        if goal.is_achieved(&states[i]) {
            continue;
        }
        for action in Action::ALL {
            let t = env.transition(&states[i], action, goal);
            if t.collided {
                continue;
            }
            let j = intern(t.next, &mut states, &mut predecessors, &mut queue)?;
            if j != i {
                predecessors[j].push(i);
            }
        }
    }

    let mut distance = vec![u32::MAX; states.len()];
    let mut frontier: VecDeque<usize> = (0..states.len())
        .filter(|&i| goal.is_achieved(&states[i]))
        .collect();
    for &i in &frontier {
        distance[i] = 0;
    }
    while let Some(j) = frontier.pop_front() {
        for &i in &predecessors[j] {
            if distance[i] == u32::MAX {
                distance[i] = distance[j] + 1;
                frontier.push_back(i);
            }
        }
    }

    let distance: HashMap<StateKey, u32> = states
        .iter()
        .zip(&distance)
        .filter(|(_, &d)| d != u32::MAX)
        .map(|(s, &d)| (s.key(), d))
        .collect();
    let starts = env
        .start_states()
        .into_iter()
        .map(|s| (s.gripper, distance.get(&s.key()).copied()))
        .collect();
    Ok(OraclePlan {
        distance,
        starts,
        explored: states.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_env;
    use crate::task::{Material, PartRole, PartSpec, TaskKind};

    #[test]
    fn easiest_task_has_short_plans() {
        let env = make_env(TaskKind::TwoPartsOneTarget.spec(), 0).unwrap();
        let plan = plan_oracle(&env).unwrap();
        assert!(plan.is_feasible());
        let longest = plan.max_length().unwrap();
        assert!(longest <= 50);
        // gripper already on the stack: pick, two moves east, place
        let on_stack = env.cell(1, 2);
        let d = plan
            .start_lengths()
            .iter()
            .find(|(c, _)| *c == on_stack)
            .unwrap()
            .1;
        assert_eq!(d, Some(4));
    }

    #[test]
    fn satisfied_goal_has_length_zero() {
        let mut spec = TaskKind::TwoPartsOneTarget.spec();
        spec.parts[1] = PartSpec {
            material: Material::Beta2,
            mass: 1.0,
            role: PartRole::Target,
            goal: Some(spec.stack),
        };
        let env = make_env(spec, 0).unwrap();
        let plan = plan_oracle(&env).unwrap();
        assert!(plan.start_lengths().iter().all(|(_, d)| *d == Some(0)));
    }

    #[test]
    fn enclosed_stack_is_unreachable() {
        let mut spec = TaskKind::FourPartsChassis.spec();
        spec.chassis.as_mut().unwrap().cells = vec![(2, 1), (2, 3), (1, 2), (3, 2)];
        let env = make_env(spec, 0).unwrap();
        let plan = plan_oracle(&env).unwrap();
        assert!(!plan.is_feasible());
        assert!(plan.start_lengths().iter().all(|(_, d)| d.is_none()));
        assert_eq!(plan.max_length(), None);
    }

    #[test]
    fn limit_is_enforced() {
        let env = make_env(TaskKind::FourPartsChassis.spec(), 0).unwrap();
        assert_eq!(
            plan_oracle_with_limit(&env, 100).unwrap_err(),
            OracleError::StateSpaceTooLarge { limit: 100 }
        );
    }
}
