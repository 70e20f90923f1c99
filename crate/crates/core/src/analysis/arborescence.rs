//! Minimum-resistance in-arborescences ("x-trees").
//!
//! A tree rooted at `x` picks one outgoing edge for every other node so that
//! every node has a directed path to `x`. Weights are resistances; infinite
//! weights are missing edges.

use num_traits::Zero;

use crate::numeric::{Resistance, Q};

/// Up to this many nodes, [`min_arborescence`] enumerates every tree.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arborescence {
    pub root: usize,
    pub total: Resistance,
    /// `(child, parent)` sorted by child.
    pub edges: Vec<(usize, usize)>,
    /// A node with no finite path to the root, when the total is infinite.
    pub unreachable: Option<usize>,
}

impl Arborescence {
    fn infinite(root: usize, node: usize) -> Self {
        Arborescence {
            root,
            total: Resistance::Infinite,
            edges: Vec::new(),
            unreachable: Some(node),
        }
    }

    /// Every non-root node has exactly one parent and reaches the root.
    pub fn is_valid(&self, nodes: usize) -> bool {
        if self.unreachable.is_some() {
            return true;
        }
        let mut parent = vec![None; nodes];
        for &(c, p) in &self.edges {
            if c == self.root || parent[c].is_some() {
                return false;
            }
            parent[c] = Some(p);
        }
        (0..nodes).filter(|&v| v != self.root).all(|v| {
            let mut x = v;
            for _ in 0..nodes {
                match parent[x] {
                    Some(p) if p == self.root => return true,
                    Some(p) => x = p,
                    None => return false,
                }
            }
            false
        })
    }
}

fn finite(w: &Resistance) -> Option<Q> {
    w.finite().copied()
}

/// First node (by index) that cannot reach `root` over finite edges.
fn cut_off(weights: &[Vec<Resistance>], root: usize) -> Option<usize> {
    let n = weights.len();
    let mut reaches = vec![false; n];
    reaches[root] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if !reaches[v] && (0..n).any(|u| u != v && reaches[u] && weights[v][u].is_finite()) {
                reaches[v] = true;
                changed = true;
            }
        }
    }
    (0..n).find(|v| !reaches[*v])
}

/// Brute force over all parent assignments, in lexicographic order.
pub fn exhaustive(weights: &[Vec<Resistance>], root: usize) -> Arborescence {
    let n = weights.len();
    if let Some(v) = cut_off(weights, root) {
        return Arborescence::infinite(root, v);
    }
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let options: Vec<Vec<(usize, Q)>> = others
        .iter()
        .map(|&v| {
            (0..n)
                .filter(|&u| u != v)
                .filter_map(|u| finite(&weights[v][u]).map(|w| (u, w)))
                .collect()
        })
        .collect();
    let mut pick = vec![0usize; others.len()];
    let mut parent = vec![usize::MAX; n];
    let mut best: Option<(Q, Vec<(usize, usize)>)> = None;
    'outer: loop {
        for (k, &v) in others.iter().enumerate() {
            parent[v] = options[k][pick[k]].0;
        }
        let acyclic = others.iter().all(|&v| {
            let mut x = v;
            for _ in 0..n {
                if x == root {
                    return true;
                }
                x = parent[x];
            }
            x == root
        });
        if acyclic {
            let total: Q = (0..others.len()).map(|k| options[k][pick[k]].1).sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                let edges = others.iter().map(|&v| (v, parent[v])).collect();
                best = Some((total, edges));
            }
        }
        // odometer, most significant position first so the scan is lexicographic
        let mut k = others.len();
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
        }
    }
    match best {
        Some((total, edges)) => Arborescence {
            root,
            total: Resistance::Finite(total),
            edges,
            unreachable: None,
        },
        None if others.is_empty() => Arborescence {
            root,
            total: Resistance::zero(),
            edges: Vec::new(),
            unreachable: None,
        },
        None => Arborescence::infinite(root, others[0]),
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    weight: Q,
}

/// Chu-Liu/Edmonds contraction for in-trees; returns one chosen edge index
/// per non-root node.
fn contract(n: usize, root: usize, edges: &[Edge]) -> Option<Vec<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (k, e) in edges.iter().enumerate() {
        if e.from == root || e.from == e.to {
            continue;
        }
        let better = match best[e.from] {
            None => true,
            Some(b) => (e.weight, e.to) < (edges[b].weight, edges[b].to),
        };
        if better {
            best[e.from] = Some(k);
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }
    // cycle detection in the functional graph v -> best[v].to
    let mut cycle_id = vec![usize::MAX; n];
    let mut cycles = 0usize;
    let mut mark = vec![usize::MAX; n];
    for start in 0..n {
        let mut v = start;
        while v != root && mark[v] == usize::MAX && cycle_id[v] == usize::MAX {
            mark[v] = start;
            v = edges[best[v].unwrap()].to;
        }
        if v != root && mark[v] == start && cycle_id[v] == usize::MAX {
            let mut x = v;
            loop {
                cycle_id[x] = cycles;
                x = edges[best[x].unwrap()].to;
                if x == v {
                    break;
                }
            }
            cycles += 1;
        }
    }
    if cycles == 0 {
        return Some((0..n).filter(|&v| v != root).map(|v| best[v].unwrap()).collect());
    }
    let mut comp = vec![0usize; n];
    let mut next = cycles;
    for v in 0..n {
        comp[v] = if cycle_id[v] != usize::MAX {
            cycle_id[v]
        } else {
            next += 1;
            next - 1
        };
    }
    let mut reduced = Vec::new();
    let mut origin = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        if comp[e.from] == comp[e.to] {
            continue;
        }
        let weight = if cycle_id[e.from] != usize::MAX {
            e.weight - edges[best[e.from].unwrap()].weight
        } else {
            e.weight
        };
        reduced.push(Edge {
            from: comp[e.from],
            to: comp[e.to],
            weight,
        });
        origin.push(k);
    }
    let chosen = contract(next, comp[root], &reduced)?;
    let mut out: Vec<usize> = chosen.iter().map(|&j| origin[j]).collect();
    let mut exit_node = vec![usize::MAX; cycles];
    for &k in &out {
        let c = cycle_id[edges[k].from];
        if c != usize::MAX {
            exit_node[c] = edges[k].from;
        }
    }
    for v in 0..n {
        let c = cycle_id[v];
        if c != usize::MAX && exit_node[c] != v {
            out.push(best[v].unwrap());
        }
    }
    Some(out)
}

/// Edmonds-style contraction; exact on rational weights.
pub fn edmonds(weights: &[Vec<Resistance>], root: usize) -> Arborescence {
    let n = weights.len();
    if let Some(v) = cut_off(weights, root) {
        return Arborescence::infinite(root, v);
    }
    let edges: Vec<Edge> = (0..n)
        .flat_map(|v| (0..n).map(move |u| (v, u)))
        .filter(|(v, u)| v != u)
        .filter_map(|(v, u)| {
            finite(&weights[v][u]).map(|w| Edge {
                from: v,
                to: u,
                weight: w,
            })
        })
        .collect();
    match contract(n, root, &edges) {
        Some(chosen) => {
            let mut tree: Vec<(usize, usize)> = chosen.iter().map(|&k| (edges[k].from, edges[k].to)).collect();
            tree.sort_unstable();
            let total = chosen.iter().map(|&k| edges[k].weight).fold(Q::zero(), |a, b| a + b);
            Arborescence {
                root,
                total: Resistance::Finite(total),
                edges: tree,
                unreachable: None,
            }
        }
        None => Arborescence::infinite(root, root),
    }
}

/// Exhaustive search for small graphs, contraction above.
pub fn min_arborescence(weights: &[Vec<Resistance>], root: usize) -> Arborescence {
    if weights.len() <= EXHAUSTIVE_LIMIT {
        exhaustive(weights, root)
    } else {
        edmonds(weights, root)
    }
}
