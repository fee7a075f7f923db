//! Relationship graph over metadata records.
//!
//! Edges are never written directly. They are an index derived from the
//! entity-reference properties of stored metadata, rebuilt for a record
//! whenever its metadata changes.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metadata::MetadataRecord;
use crate::pid::Pid;

// Variants are declared in name order so the derived `Ord` sorts by label name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Affiliation,
    Citation,
    Creator,
    Provider,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 4] = [
        EdgeLabel::Affiliation,
        EdgeLabel::Citation,
        EdgeLabel::Creator,
        EdgeLabel::Provider,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Affiliation => "affiliation",
            EdgeLabel::Citation => "citation",
            EdgeLabel::Creator => "creator",
            EdgeLabel::Provider => "provider",
        }
    }

    /// Label for an entity-reference property name.
    pub fn for_property(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == name)
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::for_property(s).ok_or_else(|| format!("unknown edge label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: Pid,
    pub to: Pid,
    pub label: EdgeLabel,
    pub ordinal: usize,
}

/// Edges implied by one record's properties, sorted by (label, ordinal).
pub fn derive_edges(record: &MetadataRecord) -> Vec<Edge> {
    let mut edges: Vec<Edge> = record
        .references()
        .into_iter()
        .filter_map(|r| {
            Some(Edge {
                from: record.pid.clone(),
                to: r.target,
                label: EdgeLabel::for_property(r.property)?,
                ordinal: r.ordinal,
            })
        })
        .collect();
    edges.sort_by_key(|e| (e.label, e.ordinal));
    edges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outbound,
    Inbound,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outbound" => Ok(Direction::Outbound),
            "inbound" => Ok(Direction::Inbound),
            other => Err(format!("direction must be outbound or inbound, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureEntry {
    pub pid: Pid,
    pub depth: u32,
}

type InboundKey = (Pid, EdgeLabel, usize);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeIndex {
    outbound: BTreeMap<Pid, Vec<Edge>>,
    inbound: BTreeMap<Pid, BTreeSet<InboundKey>>,
}

impl EdgeIndex {
    /// Replaces all outbound edges of `record.pid` with those derived from
    /// its current properties.
    pub fn update(&mut self, record: &MetadataRecord) {
        if let Some(old) = self.outbound.remove(&record.pid) {
            for edge in old {
                if let Some(set) = self.inbound.get_mut(&edge.to) {
                    set.remove(&(edge.from, edge.label, edge.ordinal));
                    if set.is_empty() {
                        self.inbound.remove(&edge.to);
                    }
                }
            }
        }
        let edges = derive_edges(record);
        for edge in &edges {
            self.inbound
                .entry(edge.to.clone())
                .or_default()
                .insert((edge.from.clone(), edge.label, edge.ordinal));
        }
        if !edges.is_empty() {
            self.outbound.insert(record.pid.clone(), edges);
        }
    }

    /// Outbound edges sorted by (label, ordinal).
    pub fn edges_from(&self, pid: &Pid, label: Option<EdgeLabel>) -> Vec<Edge> {
        self.outbound
            .get(pid)
            .map(|edges| {
                edges
                    .iter()
                    .filter(|e| label.is_none_or(|l| e.label == l))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Inbound edges sorted by (from, label, ordinal).
    pub fn edges_to(&self, pid: &Pid, label: Option<EdgeLabel>) -> Vec<Edge> {
        self.inbound
            .get(pid)
            .map(|set| {
                set.iter()
                    .filter(|(_, l, _)| label.is_none_or(|want| *l == want))
                    .map(|(from, l, ordinal)| Edge {
                        from: from.clone(),
                        to: pid.clone(),
                        label: *l,
                        ordinal: *ordinal,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Every indexed edge, sorted.
    pub fn all_edges(&self) -> Vec<Edge> {
        let mut all: Vec<Edge> = self.outbound.values().flatten().cloned().collect();
        all.sort();
        all
    }

    fn citation_neighbours(&self, pid: &Pid, direction: Direction) -> Vec<Pid> {
        match direction {
            Direction::Outbound => self
                .edges_from(pid, Some(EdgeLabel::Citation))
                .into_iter()
                .map(|e| e.to)
                .collect(),
            Direction::Inbound => self
                .edges_to(pid, Some(EdgeLabel::Citation))
                .into_iter()
                .map(|e| e.from)
                .collect(),
        }
    }

    /// Breadth-first traversal over citation edges. Each reachable node is
    /// reported once at its minimum depth (1..=max_depth). The start node is
    /// reported only if a citation cycle leads back to it.
    pub fn citation_closure(&self, start: &Pid, direction: Direction, max_depth: u32) -> Vec<ClosureEntry> {
        let mut seen: HashSet<Pid> = HashSet::new();
        let mut expanded: HashSet<Pid> = HashSet::new();
        let mut queue = VecDeque::from([(start.clone(), 0u32)]);
        let mut out = Vec::new();

        while let Some((node, depth)) = queue.pop_front() {
            if depth >= max_depth || !expanded.insert(node.clone()) {
                continue;
            }
            for next in self.citation_neighbours(&node, direction) {
                if seen.insert(next.clone()) {
                    out.push(ClosureEntry {
                        pid: next.clone(),
                        depth: depth + 1,
                    });
                    queue.push_back((next, depth + 1));
                }
            }
        }
        out.sort_by(|a, b| (a.depth, &a.pid).cmp(&(b.depth, &b.pid)));
        out
    }
}
