//! Resistance graph between recurrent classes of the unperturbed process.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::chain::PmpChain;
use crate::numeric::{Resistance, Q};

use super::arborescence::{min_arborescence, Arborescence};
use super::scc::{classes_of_sparse, Classes};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassNode {
    /// Chain state indices, sorted.
    pub members: Vec<usize>,
    pub recurrent: bool,
    pub contains_d: bool,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct ResistanceGraph {
    pub nodes: Vec<ClassNode>,
    /// `weights[x][y]`: least total resistance of a path from `x` to `y`.
    pub weights: Vec<Vec<Resistance>>,
}

/// Least resistance from `sources` to every state.
pub fn shortest_resistances(rows: &[Vec<(usize, Resistance)>], sources: &[usize]) -> Vec<Resistance> {
    let mut dist = vec![Resistance::Infinite; rows.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = Resistance::zero();
        heap.push(Reverse((Q::from_integer(0), s)));
    }
    while let Some(Reverse((d, u))) = heap.pop() {
        if Resistance::Finite(d) > dist[u] {
            continue;
        }
        for (v, r) in &rows[u] {
            if let Some(w) = r.finite() {
                let nd = d + w;
                if Resistance::Finite(nd) < dist[*v] {
                    dist[*v] = Resistance::Finite(nd);
                    heap.push(Reverse((nd, *v)));
                }
            }
        }
    }
    dist
}

/// Least path resistance from any state of `from` to any state of `to`.
pub fn class_resistance(rows: &[Vec<(usize, Resistance)>], from: &[usize], to: &[usize]) -> Resistance {
    let dist = shortest_resistances(rows, from);
    to.iter().map(|y| dist[*y].clone()).min().unwrap_or(Resistance::Infinite)
}

/// Per-root minimum trees and the resulting stochastic potentials.
#[derive(Clone, Debug)]
pub struct Potentials {
    pub gamma: Vec<Resistance>,
    pub trees: Vec<Arborescence>,
    /// Recurrent nodes of least potential.
    pub minimizers: Vec<usize>,
}

impl ResistanceGraph {
    /// Nodes are the recurrent classes of `P⁰`, plus the class of `D`.
    pub fn from_chain(chain: &PmpChain) -> Self {
        let classes = classes_of_sparse(&chain.unperturbed_limit());
        let labels: Vec<String> = chain.states.iter().map(|s| s.to_string()).collect();
        Self::from_parts(&chain.resistances(), &classes, chain.d_index(), &labels)
    }

    pub fn from_parts(rows: &[Vec<(usize, Resistance)>], classes: &Classes, d_index: usize, labels: &[String]) -> Self {
        let d_class = classes.class_of[d_index];
        let nodes: Vec<ClassNode> = (0..classes.members.len())
            .filter(|&c| classes.recurrent[c] || c == d_class)
            .map(|c| {
                let members = classes.members[c].clone();
                let label = if members.len() == 1 {
                    labels[members[0]].clone()
                } else {
                    format!("{{{}}}", members.iter().map(|m| labels[*m].as_str()).collect::<Vec<_>>().join(", "))
                };
                ClassNode {
                    members,
                    recurrent: classes.recurrent[c],
                    contains_d: c == d_class,
                    label,
                }
            })
            .collect();
        let weights = nodes
            .par_iter()
            .enumerate()
            .map(|(x, from)| {
                let dist = shortest_resistances(rows, &from.members);
                nodes
                    .iter()
                    .enumerate()
                    .map(|(y, to)| {
                        if x == y {
                            Resistance::Infinite
                        } else {
                            to.members.iter().map(|m| dist[*m].clone()).min().unwrap_or(Resistance::Infinite)
                        }
                    })
                    .collect()
            })
            .collect();
        ResistanceGraph { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_of_state(&self, state: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.members.binary_search(&state).is_ok())
    }

    pub fn d_node(&self) -> usize {
        self.nodes.iter().position(|n| n.contains_d).expect("D is always a node")
    }

    /// Least resistance of leaving `node` for any other node.
    pub fn outward(&self, node: usize) -> Resistance {
        self.weights[node].iter().min().cloned().unwrap_or(Resistance::Infinite)
    }

    pub fn potentials(&self) -> Potentials {
        let trees: Vec<Arborescence> = (0..self.len()).into_par_iter().map(|r| min_arborescence(&self.weights, r)).collect();
        let gamma: Vec<Resistance> = trees.iter().map(|t| t.total.clone()).collect();
        let best = (0..self.len())
            .filter(|&x| self.nodes[x].recurrent)
            .map(|x| gamma[x].clone())
            .min()
            .unwrap_or(Resistance::Infinite);
        let minimizers = (0..self.len())
            .filter(|&x| self.nodes[x].recurrent && gamma[x] == best)
            .collect();
        Potentials {
            gamma,
            trees,
            minimizers,
        }
    }

    /// Graphviz rendering with resistance labels on finite edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph resistance {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = if n.recurrent { "ellipse" } else { "box" };
            let _ = writeln!(out, "  n{i} [label=\"{}\", shape={shape}];", n.label.replace('"', "'"));
        }
        for (i, row) in self.weights.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                if i != j && w.is_finite() {
                    let _ = writeln!(out, "  n{i} -> n{j} [label=\"{w}\"];");
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
