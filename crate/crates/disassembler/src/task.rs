//! The four disassembly tasks as discrete grid layouts.

use std::fmt;
use std::str::FromStr;

use tmn_core::MaterialSpec;

/// Low-criticality material β₁ and critical material β₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    Beta1,
    Beta2,
}

impl Material {
    pub fn criticality(&self) -> f64 {
        match self {
            Material::Beta1 => 0.1,
            Material::Beta2 => 0.95,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Material::Beta1 => "beta1",
            Material::Beta2 => "beta2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartRole {
    /// Must end on its target cell.
    Target,
    /// Sits on top of target parts and must be cleared to the obstacle pad.
    Obstacle,
    /// Has no goal.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSpec {
    pub material: Material,
    pub mass: f64,
    pub role: PartRole,
    /// Cell `(x, y)` the part has to end on, if any.
    pub goal: Option<(u8, u8)>,
}

impl PartSpec {
    fn new(material: Material, role: PartRole, goal: Option<(u8, u8)>) -> Self {
        Self {
            material,
            mass: 1.0,
            role,
            goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChassisSpec {
    pub cells: Vec<(u8, u8)>,
    pub material: Material,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    TwoPartsOneTarget,
    TwoPartsTwoTargets,
    FourPartsTwoTargetsTwoObstacles,
    FourPartsChassis,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::TwoPartsOneTarget,
        TaskKind::TwoPartsTwoTargets,
        TaskKind::FourPartsTwoTargetsTwoObstacles,
        TaskKind::FourPartsChassis,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::TwoPartsOneTarget => "two-parts-one-target",
            TaskKind::TwoPartsTwoTargets => "two-parts-two-targets",
            TaskKind::FourPartsTwoTargetsTwoObstacles => "four-parts-two-targets-two-obstacles",
            TaskKind::FourPartsChassis => "four-parts-chassis",
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            TaskKind::TwoPartsOneTarget => "2p1t",
            TaskKind::TwoPartsTwoTargets => "2p2t",
            TaskKind::FourPartsTwoTargetsTwoObstacles => "4p2t2o",
            TaskKind::FourPartsChassis => "4p2t2oc",
        }
    }

    pub fn spec(&self) -> TaskSpec {
        TaskSpec::new(*self)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        if lower == "chassis" {
            return Ok(TaskKind::FourPartsChassis);
        }
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || k.short_name() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = TaskKind::ALL.iter().map(|k| k.short_name()).collect();
                format!("unknown task `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A disassembly task: grid extent, where the part stack sits, the parts
/// from bottom to top, and an optional chassis that must not be touched.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub width: u8,
    pub height: u8,
    pub stack: (u8, u8),
    /// Bottom to top.
    pub parts: Vec<PartSpec>,
    pub chassis: Option<ChassisSpec>,
    pub max_episode_steps: u32,
    /// Training steps used when none are given.
    pub default_budget: u64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        use Material::*;
        use PartRole::*;
        let (stack, parts, chassis, max_episode_steps, default_budget) = match kind {
            TaskKind::TwoPartsOneTarget => (
                (1, 2),
                vec![
                    PartSpec::new(Beta1, Free, None),
                    PartSpec::new(Beta2, Target, Some((3, 2))),
                ],
                None,
                50,
                200_000,
            ),
            TaskKind::TwoPartsTwoTargets => (
                (1, 1),
                vec![
                    PartSpec::new(Beta1, Target, Some((3, 3))),
                    PartSpec::new(Beta2, Target, Some((3, 1))),
                ],
                None,
                100,
                200_000,
            ),
            TaskKind::FourPartsTwoTargetsTwoObstacles | TaskKind::FourPartsChassis => {
                let parts = vec![
                    PartSpec::new(Beta2, Target, Some((0, 0))),
                    PartSpec::new(Beta1, Target, Some((4, 0))),
                    PartSpec::new(Beta1, Obstacle, Some((2, 4))),
                    PartSpec::new(Beta2, Obstacle, Some((2, 4))),
                ];
                if kind == TaskKind::FourPartsChassis {
                    let chassis = ChassisSpec {
                        cells: vec![(1, 1), (1, 2), (1, 3), (3, 1), (3, 2), (3, 3)],
                        material: Beta1,
                        mass: 3.0,
                    };
                    ((2, 2), parts, Some(chassis), 150, 250_000)
                } else {
                    ((2, 2), parts, None, 100, 250_000)
                }
            }
        };
        Self {
            kind,
            width: 5,
            height: 5,
            stack,
            parts,
            chassis,
            max_episode_steps,
            default_budget,
        }
    }

    pub fn with_grid(mut self, width: u8, height: u8) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_max_episode_steps(mut self, steps: u32) -> Self {
        self.max_episode_steps = steps;
        self
    }

    /// Extracted mass per material, β₁ first, chassis included.
    pub fn materials(&self) -> Vec<MaterialSpec> {
        [Material::Beta1, Material::Beta2]
            .into_iter()
            .map(|mat| {
                let parts: f64 = self
                    .parts
                    .iter()
                    .filter(|p| p.material == mat)
                    .map(|p| p.mass)
                    .sum();
                let chassis: f64 = self
                    .chassis
                    .iter()
                    .filter(|c| c.material == mat)
                    .map(|c| c.mass)
                    .sum();
                MaterialSpec::new(mat.name(), mat.criticality(), parts + chassis)
            })
            .collect()
    }

    /// Cells where a part may be set down: the stack cell and every goal cell.
    pub fn pads(&self) -> Vec<(u8, u8)> {
        let mut pads = vec![self.stack];
        for goal in self.parts.iter().filter_map(|p| p.goal) {
            if !pads.contains(&goal) {
                pads.push(goal);
            }
        }
        pads
    }
}
