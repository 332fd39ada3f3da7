//! Goal-conditioned action-value tables and their on-disk format.
//!
//! File layout, all integers little endian:
//!
//! ```text
//! magic    b"CIROQ1"
//! version  u16
//! task     u16 length + UTF-8 bytes
//! alpha    f64   learning rate
//! gamma    f64   discount
//! count    u64
//! entries  count x (state u128, goal u64, 6 x f64), sorted by (state, goal)
//! ```

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::env::{Action, GoalKey, StateKey};

pub const MAGIC: &[u8; 6] = b"CIROQ1";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("not a policy file (bad magic header)")]
    BadMagic,
    #[error("unsupported policy format version {0}")]
    UnsupportedVersion(u16),
    #[error("policy file is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("policy was trained on `{found}`, not `{expected}`")]
    TaskMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type ActionValues = [f64; Action::COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub task: String,
    pub learning_rate: f64,
    pub discount: f64,
    table: HashMap<(StateKey, GoalKey), ActionValues>,
}

impl Policy {
    pub fn new(task: impl Into<String>, learning_rate: f64, discount: f64) -> Self {
        Self {
            task: task.into(),
            learning_rate,
            discount,
            table: HashMap::new(),
        }
    }

    /// Unvisited pairs read as all zeros, which is optimistic since no
    /// reward is positive.
    pub fn values(&self, state: StateKey, goal: GoalKey) -> ActionValues {
        self.table
            .get(&(state, goal))
            .copied()
            .unwrap_or([0.0; Action::COUNT])
    }

    pub fn values_mut(&mut self, state: StateKey, goal: GoalKey) -> &mut ActionValues {
        self.table
            .entry((state, goal))
            .or_insert([0.0; Action::COUNT])
    }

    pub fn max_value(&self, state: StateKey, goal: GoalKey) -> f64 {
        self.values(state, goal)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action; the lowest index wins ties.
    pub fn greedy(&self, state: StateKey, goal: GoalKey) -> Action {
        Action::ALL[greedy_index(&self.values(state, goal))]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn sorted_entries(&self) -> Vec<(&(StateKey, GoalKey), &ActionValues)> {
        let mut entries: Vec<_> = self.table.iter().collect();
        entries.sort_unstable_by_key(|(k, _)| **k);
        entries
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<(), PolicyError> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let task = self.task.as_bytes();
        let len = u16::try_from(task.len())
            .map_err(|_| PolicyError::Corrupt("task name too long".into()))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(task)?;
        out.write_all(&self.learning_rate.to_le_bytes())?;
        out.write_all(&self.discount.to_le_bytes())?;
        out.write_all(&(self.table.len() as u64).to_le_bytes())?;
        for ((state, goal), values) in self.sorted_entries() {
            out.write_all(&state.to_le_bytes())?;
            out.write_all(&goal.to_le_bytes())?;
            for v in values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self, PolicyError> {
        let mut magic = [0u8; 6];
        read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(PolicyError::BadMagic);
        }
        let version = u16::from_le_bytes(read_array(&mut input)?);
        if version != FORMAT_VERSION {
            return Err(PolicyError::UnsupportedVersion(version));
        }
        let len = u16::from_le_bytes(read_array(&mut input)?);
        let mut task = vec![0u8; usize::from(len)];
        read_exact(&mut input, &mut task)?;
        let task = String::from_utf8(task).map_err(|e| PolicyError::Corrupt(e.to_string()))?;
        let learning_rate = f64::from_le_bytes(read_array(&mut input)?);
        let discount = f64::from_le_bytes(read_array(&mut input)?);
        let count = u64::from_le_bytes(read_array(&mut input)?);
        let mut table = HashMap::new();
        for _ in 0..count {
            let state = u128::from_le_bytes(read_array(&mut input)?);
            let goal = u64::from_le_bytes(read_array(&mut input)?);
            let mut values = [0.0; Action::COUNT];
            for v in &mut values {
                *v = f64::from_le_bytes(read_array(&mut input)?);
            }
            table.insert((state, goal), values);
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(PolicyError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            task,
            learning_rate,
            discount,
            table,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        let file = std::fs::File::create(path)?;
        let mut out = io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(file))
    }
}

pub(crate) fn greedy_index(values: &ActionValues) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn read_exact(input: &mut impl Read, buf: &mut [u8]) -> Result<(), PolicyError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => PolicyError::Corrupt("unexpected end of file".into()),
        _ => PolicyError::Io(e),
    })
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N], PolicyError> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf)?;
    Ok(buf)
}
