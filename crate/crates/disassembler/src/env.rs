//! Deterministic grid MDP standing in for the robotic disassembly scene.
//!
//! The gripper moves one cell per step, picks the top part of a stack and
//! places it on a pad. A part under others cannot be picked. Entering a
//! chassis cell is a collision: the gripper is bounced back, the step costs
//! [`COLLISION_PENALTY`] and the episode is truncated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::task::TaskSpec;

pub const STEP_REWARD: f64 = -1.0;
pub const SUCCESS_REWARD: f64 = 0.0;
pub const COLLISION_PENALTY: f64 = -10.0;
pub const MAX_PARTS: usize = 7;

const HELD: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("grid {width}x{height} cannot hold the layout: {reason}")]
    GridTooSmall {
        width: u8,
        height: u8,
        reason: String,
    },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid action index {0} (expected 0..6)")]
    InvalidAction(usize),
    #[error("episode already finished; call reset")]
    EpisodeFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    North,
    South,
    East,
    West,
    Pick,
    Place,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; Action::COUNT] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Pick,
        Action::Place,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, EnvError> {
        Action::ALL
            .get(index)
            .copied()
            .ok_or(EnvError::InvalidAction(index))
    }
}

/// Packed state used as a table key.
pub type StateKey = u128;
/// Packed goal used as a table key.
pub type GoalKey = u64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub gripper: u8,
    pub held: Option<u8>,
    /// `(cell, level)` per part; level 0 is the bottom of a stack.
    parts: Vec<(u8, u8)>,
    pub collided: bool,
}

impl EnvState {
    pub fn part_cell(&self, part: usize) -> Option<u8> {
        match self.parts[part].0 {
            HELD => None,
            cell => Some(cell),
        }
    }

    pub fn part_level(&self, part: usize) -> Option<u8> {
        self.part_cell(part).map(|_| self.parts[part].1)
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn stack_height(&self, cell: u8) -> u8 {
        self.parts.iter().filter(|p| p.0 == cell).count() as u8
    }

    /// The part that can be picked at `cell`.
    pub fn top_part(&self, cell: u8) -> Option<usize> {
        self.parts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0 == cell)
            .max_by_key(|(_, p)| p.1)
            .map(|(i, _)| i)
    }

    pub fn key(&self) -> StateKey {
        let mut key = u128::from(self.gripper);
        key = (key << 8) | u128::from(self.held.unwrap_or(HELD));
        for &(cell, level) in &self.parts {
            key = (key << 16) | (u128::from(cell) << 8) | u128::from(level);
        }
        key
    }
}

/// Desired cell per part; `None` for parts without a goal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Goal(pub Vec<Option<u8>>);

impl Goal {
    pub fn is_achieved(&self, state: &EnvState) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, g)| g.is_none_or(|cell| state.part_cell(i) == Some(cell)))
    }

    pub fn key(&self) -> GoalKey {
        self.0
            .iter()
            .fold(0u64, |k, g| (k << 8) | u64::from(g.unwrap_or(HELD)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: EnvState,
    pub reward: f64,
    /// The goal holds in `next`.
    pub terminated: bool,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// A task instance with its own layout randomization stream.
#[derive(Debug, Clone)]
pub struct Env {
    spec: TaskSpec,
    chassis: Vec<bool>,
    pads: Vec<bool>,
    goal: Goal,
    starts: Vec<u8>,
    rng: ChaCha8Rng,
    state: EnvState,
    steps: u32,
    finished: bool,
}

pub fn make_env(spec: TaskSpec, seed: u64) -> Result<Env, EnvError> {
    Env::new(spec, seed)
}

impl Env {
    pub fn new(spec: TaskSpec, seed: u64) -> Result<Self, EnvError> {
        let (w, h) = (spec.width, spec.height);
        let cells = usize::from(w) * usize::from(h);
        let too_small = |reason: String| EnvError::GridTooSmall {
            width: w,
            height: h,
            reason,
        };
        if w == 0 || h == 0 || cells >= usize::from(HELD) {
            return Err(too_small("grid must have between 1 and 254 cells".into()));
        }
        if spec.parts.is_empty() || spec.parts.len() > MAX_PARTS {
            return Err(EnvError::InvalidLayout(format!(
                "need 1..={MAX_PARTS} parts, got {}",
                spec.parts.len()
            )));
        }
        let index = |(x, y): (u8, u8)| -> Result<u8, EnvError> {
            if x < w && y < h {
                Ok(y * w + x)
            } else {
                Err(too_small(format!("cell ({x}, {y}) lies outside the grid")))
            }
        };

        let pad_cells = spec.pads();
        let chassis_cells = spec
            .chassis
            .as_ref()
            .map(|c| c.cells.clone())
            .unwrap_or_default();
        if pad_cells.len() + chassis_cells.len() >= cells {
            return Err(too_small(format!(
                "{} pads and {} chassis cells leave no room for the gripper",
                pad_cells.len(),
                chassis_cells.len()
            )));
        }
        let mut pads = vec![false; cells];
        for &p in &pad_cells {
            pads[usize::from(index(p)?)] = true;
        }
        let mut chassis = vec![false; cells];
        for &c in &chassis_cells {
            let i = usize::from(index(c)?);
            if pads[i] {
                return Err(EnvError::InvalidLayout(format!(
                    "chassis covers pad ({}, {})",
                    c.0, c.1
                )));
            }
            chassis[i] = true;
        }

        let goal = Goal(
            spec.parts
                .iter()
                .map(|p| p.goal.map(index).transpose())
                .collect::<Result<_, _>>()?,
        );
        let starts: Vec<u8> = (0..cells as u8)
            .filter(|&c| !chassis[usize::from(c)])
            .collect();
        let stack = index(spec.stack)?;
        let state = EnvState {
            gripper: starts[0],
            held: None,
            parts: (0..spec.parts.len())
                .map(|level| (stack, level as u8))
                .collect(),
            collided: false,
        };
        Ok(Self {
            spec,
            chassis,
            pads,
            goal,
            starts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
            steps: 0,
            finished: false,
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn max_steps(&self) -> u32 {
        self.spec.max_episode_steps
    }

    pub fn cell(&self, x: u8, y: u8) -> u8 {
        y * self.spec.width + x
    }

    pub fn coords(&self, cell: u8) -> (u8, u8) {
        (cell % self.spec.width, cell / self.spec.width)
    }

    pub fn is_chassis(&self, cell: u8) -> bool {
        self.chassis[usize::from(cell)]
    }

    pub fn is_pad(&self, cell: u8) -> bool {
        self.pads[usize::from(cell)]
    }

    /// Every layout a reset can produce, one per admissible gripper cell.
    pub fn start_states(&self) -> Vec<EnvState> {
        self.starts.iter().map(|&c| self.start_state(c)).collect()
    }

    fn start_state(&self, gripper: u8) -> EnvState {
        let mut state = self.state.clone();
        let stack = self.cell(self.spec.stack.0, self.spec.stack.1);
        state.gripper = gripper;
        state.held = None;
        state.collided = false;
        for (level, part) in state.parts.iter_mut().enumerate() {
            *part = (stack, level as u8);
        }
        state
    }

    /// Starts a new episode from a random gripper cell.
    pub fn reset(&mut self) -> EnvState {
        let gripper = self.starts[self.rng.gen_range(0..self.starts.len())];
        self.reset_to(gripper)
    }

    pub fn reset_to(&mut self, gripper: u8) -> EnvState {
        self.state = self.start_state(gripper);
        self.steps = 0;
        self.finished = self.goal.is_achieved(&self.state);
        self.state.clone()
    }

    /// Achieved positions of the parts that carry a goal, or `None` while one
    /// of them is held.
    pub fn achieved_goal(&self, state: &EnvState) -> Option<Goal> {
        self.goal
            .0
            .iter()
            .enumerate()
            .map(|(i, g)| match g {
                Some(_) => state.part_cell(i).map(Some),
                None => Some(None),
            })
            .collect::<Option<Vec<_>>>()
            .map(Goal)
    }

    /// Pure dynamics with respect to an arbitrary goal.
    pub fn transition(&self, state: &EnvState, action: Action, goal: &Goal) -> Transition {
        let mut next = state.clone();
        next.collided = false;
        let (x, y) = self.coords(state.gripper);
        let (w, h) = (self.spec.width, self.spec.height);
        let target = match action {
            Action::North if y > 0 => Some(self.cell(x, y - 1)),
            Action::South if y + 1 < h => Some(self.cell(x, y + 1)),
            Action::East if x + 1 < w => Some(self.cell(x + 1, y)),
            Action::West if x > 0 => Some(self.cell(x - 1, y)),
            _ => None,
        };
        match action {
            Action::North | Action::South | Action::East | Action::West => {
                if let Some(cell) = target {
                    if self.is_chassis(cell) {
                        next.collided = true;
                        return Transition {
                            terminated: false,
                            next,
                            reward: COLLISION_PENALTY,
                            collided: true,
                        };
                    }
                    next.gripper = cell;
                }
            }
            Action::Pick => {
                if next.held.is_none() {
                    if let Some(part) = next.top_part(next.gripper) {
                        next.parts[part] = (HELD, 0);
                        next.held = Some(part as u8);
                    }
                }
            }
            Action::Place => {
                if let Some(part) = next.held {
                    if self.is_pad(next.gripper) {
                        let level = next.stack_height(next.gripper);
                        next.parts[usize::from(part)] = (next.gripper, level);
                        next.held = None;
                    }
                }
            }
        }
        let terminated = goal.is_achieved(&next);
        Transition {
            next,
            reward: if terminated {
                SUCCESS_REWARD
            } else {
                STEP_REWARD
            },
            terminated,
            collided: false,
        }
    }

    pub fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let action = Action::from_index(action)?;
        self.step_action(action)
    }

    pub fn step_action(&mut self, action: Action) -> Result<Step, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeFinished);
        }
        let t = self.transition(&self.state, action, &self.goal);
        self.steps += 1;
        let truncated = !t.terminated && (t.collided || self.steps >= self.spec.max_episode_steps);
        self.finished = t.terminated || truncated;
        self.state = t.next;
        Ok(Step {
            state: self.state.clone(),
            reward: t.reward,
            terminated: t.terminated,
            truncated,
        })
    }

    /// Grid picture: `G` gripper, digits for stack heights, `#` chassis,
    /// `o` empty pad.
    pub fn render(&self, state: &EnvState) -> String {
        let mut out = String::new();
        for y in 0..self.spec.height {
            for x in 0..self.spec.width {
                let c = self.cell(x, y);
                let ch = if state.gripper == c {
                    'G'
                } else if self.is_chassis(c) {
                    '#'
                } else {
                    match state.stack_height(c) {
                        0 if self.is_pad(c) => 'o',
                        0 => '.',
                        n => char::from_digit(u32::from(n), 10).unwrap_or('+'),
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::TaskKind;

    fn env(kind: TaskKind) -> Env {
        make_env(kind.spec(), 0).unwrap()
    }

    #[test]
    fn two_parts_one_target_layout() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        let s = e.reset();
        assert_eq!(s.part_count(), 2);
        assert_eq!(s.part_cell(0), s.part_cell(1));
        assert_eq!(e.goal().0.iter().filter(|g| g.is_some()).count(), 1);
    }

    #[test]
    fn chassis_layout() {
        let mut e = env(TaskKind::FourPartsChassis);
        let s = e.reset();
        assert_eq!(s.part_count(), 4);
        let mut goals: Vec<_> = e
            .spec()
            .parts
            .iter()
            .filter(|p| p.role == crate::task::PartRole::Target)
            .filter_map(|p| p.goal)
            .collect();
        goals.dedup();
        assert_eq!(goals.len(), 2);
        assert_eq!((0..25).filter(|&c| e.is_chassis(c)).count(), 6);
        assert!(!e.is_chassis(s.gripper));
    }

    #[test]
    fn tiny_grid_rejected() {
        let spec = TaskKind::TwoPartsOneTarget.spec().with_grid(1, 1);
        assert!(matches!(
            make_env(spec, 0),
            Err(EnvError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn resets_are_seeded() {
        let starts = |seed| {
            let mut e = make_env(TaskKind::TwoPartsOneTarget.spec(), seed).unwrap();
            (0..20).map(|_| e.reset().gripper).collect::<Vec<_>>()
        };
        assert_eq!(starts(7), starts(7));
        assert_ne!(starts(7), starts(8));
    }

    #[test]
    fn non_terminal_step_costs_one() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        e.reset_to(e.cell(0, 0));
        let step = e.step(Action::East.index()).unwrap();
        assert_eq!(step.reward, -1.0);
        assert!(!step.terminated && !step.truncated);
    }

    #[test]
    fn invalid_action() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        e.reset();
        assert_eq!(e.step(6), Err(EnvError::InvalidAction(6)));
    }

    #[test]
    fn chassis_collision_truncates() {
        let mut e = env(TaskKind::FourPartsChassis);
        let start = e.cell(0, 2);
        e.reset_to(start);
        let step = e.step_action(Action::East).unwrap();
        assert_eq!(step.reward, COLLISION_PENALTY);
        assert!(step.truncated && !step.terminated);
        assert!(step.state.collided);
        assert_eq!(step.state.gripper, start);
        assert_eq!(e.step_action(Action::North), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn buried_part_cannot_be_picked() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        let stack = e.cell(1, 2);
        e.reset_to(stack);
        let s = e.step_action(Action::Pick).unwrap().state;
        assert_eq!(s.held, Some(1));
        assert_eq!(s.part_cell(0), Some(stack));
    }

    #[test]
    fn scripted_solution_terminates_with_zero_reward() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        e.reset_to(e.cell(1, 2));
        let plan = [Action::Pick, Action::East, Action::East, Action::Place];
        let mut last = None;
        for a in plan {
            last = Some(e.step_action(a).unwrap());
        }
        let last = last.unwrap();
        assert!(last.terminated);
        assert_eq!(last.reward, 0.0);
        assert!(e.goal().is_achieved(&last.state));
    }

    #[test]
    fn place_only_on_pads() {
        let mut e = env(TaskKind::TwoPartsOneTarget);
        e.reset_to(e.cell(1, 2));
        e.step_action(Action::Pick).unwrap();
        e.step_action(Action::North).unwrap();
        let s = e.step_action(Action::Place).unwrap().state;
        assert_eq!(s.held, Some(1));
    }

    #[test]
    fn time_limit_truncates() {
        let spec = TaskKind::TwoPartsOneTarget.spec().with_max_episode_steps(3);
        let mut e = make_env(spec, 0).unwrap();
        e.reset_to(0);
        let steps: Vec<_> = (0..3)
            .map(|_| e.step_action(Action::North).unwrap())
            .collect();
        assert!(!steps[1].truncated);
        assert!(steps[2].truncated);
    }

    #[test]
    fn achieved_goal_relabels() {
        let e = env(TaskKind::TwoPartsOneTarget);
        let s = e.start_states()[0].clone();
        let achieved = e.achieved_goal(&s).unwrap();
        assert!(achieved.is_achieved(&s));
        assert!(!e.goal().is_achieved(&s));
    }

    #[test]
    fn render_shows_stack() {
        let e = env(TaskKind::FourPartsChassis);
        let s = e.start_states()[0].clone();
        let pic = e.render(&s);
        assert_eq!(pic.lines().nth(2).unwrap(), ".#4#.");
    }
}
