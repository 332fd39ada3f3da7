//! Compartmental digraphs of material networks.
//!
//! A network is a set of compartments `c^k_{i,j}`: a node stores, transforms or
//! uses material (`i = j = k`), an arc moves it from node `i` to node `j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub type CompartmentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompartmentKind {
    Node,
    Arc,
}

impl CompartmentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompartmentKind::Node => "node",
            CompartmentKind::Arc => "arc",
        }
    }
}

impl FromStr for CompartmentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "node" => Ok(CompartmentKind::Node),
            "arc" => Ok(CompartmentKind::Arc),
            other => Err(format!("unknown compartment kind `{other}`")),
        }
    }
}

/// What a compartment does in the material chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Role {
    Reservoir,
    Disassembler,
    Incinerator,
    Transport,
    Use,
    Other(String),
}

impl Role {
    pub fn as_str(&self) -> &str {
        match self {
            Role::Reservoir => "reservoir",
            Role::Disassembler => "disassembler",
            Role::Incinerator => "incinerator",
            Role::Transport => "transport",
            Role::Use => "use",
            Role::Other(label) => label,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Err("empty role label".to_string());
        }
        Ok(match s.to_ascii_lowercase().as_str() {
            "reservoir" => Role::Reservoir,
            "disassembler" => Role::Disassembler,
            "incinerator" => Role::Incinerator,
            "transport" => Role::Transport,
            "use" => Role::Use,
            _ => Role::Other(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Compartment {
    pub id: CompartmentId,
    pub source: CompartmentId,
    pub sink: CompartmentId,
    pub kind: CompartmentKind,
    pub role: Role,
}

impl Compartment {
    pub fn node(id: CompartmentId, role: Role) -> Self {
        Self {
            id,
            source: id,
            sink: id,
            kind: CompartmentKind::Node,
            role,
        }
    }

    pub fn arc(id: CompartmentId, source: CompartmentId, sink: CompartmentId, role: Role) -> Self {
        Self {
            id,
            source,
            sink,
            kind: CompartmentKind::Arc,
            role,
        }
    }

    pub fn is_node(&self) -> bool {
        self.kind == CompartmentKind::Node
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network has no compartments")]
    Empty,
    #[error("node c{id} must have source = sink = id, got ({from}, {to})")]
    NodeIndexMismatch {
        id: CompartmentId,
        from: CompartmentId,
        to: CompartmentId,
    },
    #[error("arc c{id} is a self loop on node {node}")]
    ArcSelfLoop {
        id: CompartmentId,
        node: CompartmentId,
    },
    #[error("arc c{id} references missing node {endpoint}")]
    DanglingArc {
        id: CompartmentId,
        endpoint: CompartmentId,
    },
    #[error("compartment id {0} is declared more than once")]
    DuplicateId(CompartmentId),
    #[error("compartment ids must be exactly 1..={expected}; missing {missing:?}")]
    CountMismatch {
        expected: usize,
        missing: Vec<CompartmentId>,
    },
}

/// A validated material network. Compartments are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    compartments: Vec<Compartment>,
    node_count: usize,
    arc_count: usize,
}

impl Network {
    pub fn build(
        compartments: impl IntoIterator<Item = Compartment>,
    ) -> Result<Self, NetworkError> {
        let mut compartments: Vec<Compartment> = compartments.into_iter().collect();
        if compartments.is_empty() {
            return Err(NetworkError::Empty);
        }
        compartments.sort_by_key(|c| c.id);

        for pair in compartments.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(NetworkError::DuplicateId(pair[0].id));
            }
        }
        let n = compartments.len();
        let ids: BTreeSet<CompartmentId> = compartments.iter().map(|c| c.id).collect();
        let missing: Vec<CompartmentId> = (1..=n as CompartmentId)
            .filter(|k| !ids.contains(k))
            .collect();
        if !missing.is_empty() {
            return Err(NetworkError::CountMismatch {
                expected: n,
                missing,
            });
        }

        let nodes: BTreeSet<CompartmentId> = compartments
            .iter()
            .filter(|c| c.is_node())
            .map(|c| c.id)
            .collect();
        for c in &compartments {
            match c.kind {
                CompartmentKind::Node => {
                    if c.source != c.id || c.sink != c.id {
                        return Err(NetworkError::NodeIndexMismatch {
                            id: c.id,
                            from: c.source,
                            to: c.sink,
                        });
                    }
                }
                CompartmentKind::Arc => {
                    if c.source == c.sink {
                        return Err(NetworkError::ArcSelfLoop {
                            id: c.id,
                            node: c.source,
                        });
                    }
                    for endpoint in [c.source, c.sink] {
                        if !nodes.contains(&endpoint) {
                            return Err(NetworkError::DanglingArc { id: c.id, endpoint });
                        }
                    }
                }
            }
        }

        let node_count = nodes.len();
        Ok(Self {
            arc_count: n - node_count,
            node_count,
            compartments,
        })
    }

    /// The solid-material chain: reservoir -> disassembler -> incinerator, with
    /// parallel discard (c5) and reuse (c6) arcs into the incinerator.
    pub fn solids() -> Self {
        Self::build([
            Compartment::node(1, Role::Reservoir),
            Compartment::node(2, Role::Disassembler),
            Compartment::node(3, Role::Incinerator),
            Compartment::arc(4, 1, 2, Role::Use),
            Compartment::arc(5, 2, 3, Role::Transport),
            Compartment::arc(6, 2, 3, Role::Use),
        ])
        .expect("solids network is well formed")
    }

    pub fn compartments(&self) -> &[Compartment] {
        &self.compartments
    }

    pub fn get(&self, id: CompartmentId) -> Option<&Compartment> {
        id.checked_sub(1)
            .and_then(|i| self.compartments.get(i as usize))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn compartment_count(&self) -> usize {
        self.compartments.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments.iter().filter(|c| c.is_node())
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments.iter().filter(|c| !c.is_node())
    }

    /// Outgoing arcs per node as `(arc id, sink node)`, following material flow.
    pub fn digraph(&self) -> BTreeMap<CompartmentId, Vec<(CompartmentId, CompartmentId)>> {
        let mut adjacency: BTreeMap<_, Vec<_>> = self.nodes().map(|n| (n.id, Vec::new())).collect();
        for arc in self.arcs() {
            adjacency
                .entry(arc.source)
                .or_default()
                .push((arc.id, arc.sink));
        }
        adjacency
    }

    /// Checks whether the network has the shape of the solids chain, matching
    /// compartments by role rather than by id.
    pub fn check_solids_topology(&self) -> TopologyCheck {
        let mut reasons = Vec::new();

        let find_node = |role: Role, reasons: &mut Vec<String>| -> Option<CompartmentId> {
            let found: Vec<_> = self
                .nodes()
                .filter(|n| n.role == role)
                .map(|n| n.id)
                .collect();
            match found.as_slice() {
                [id] => Some(*id),
                [] => {
                    reasons.push(format!("no {role} node"));
                    None
                }
                many => {
                    reasons.push(format!("expected 1 {role} node, found {}", many.len()));
                    None
                }
            }
        };
        let reservoir = find_node(Role::Reservoir, &mut reasons);
        let disassembler = find_node(Role::Disassembler, &mut reasons);
        let incinerator = find_node(Role::Incinerator, &mut reasons);

        if self.node_count != 3 {
            reasons.push(format!("expected 3 nodes, found {}", self.node_count));
        }
        if self.arc_count != 3 {
            reasons.push(format!("expected 3 arcs, found {}", self.arc_count));
        }

        if let (Some(r), Some(d), Some(i)) = (reservoir, disassembler, incinerator) {
            let count = |from, to| {
                self.arcs()
                    .filter(|a| a.source == from && a.sink == to)
                    .count()
            };
            let supply = count(r, d);
            if supply != 1 {
                reasons.push(format!(
                    "expected 1 arc reservoir->disassembler, found {supply}"
                ));
            }
            let outflow = count(d, i);
            if outflow != 2 {
                reasons.push(format!(
                    "expected 2 parallel arcs disassembler->incinerator, found {outflow}"
                ));
            }
            let stray = self.arc_count.saturating_sub(supply + outflow);
            if supply + outflow <= self.arc_count && stray > 0 {
                reasons.push(format!("{stray} arc(s) outside the solids chain"));
            }
        }

        TopologyCheck { reasons }
    }
}

/// Outcome of [`Network::check_solids_topology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyCheck {
    pub reasons: Vec<String>,
}

impl TopologyCheck {
    pub fn is_valid(&self) -> bool {
        self.reasons.is_empty()
    }
}
