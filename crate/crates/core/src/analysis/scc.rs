//! Communication classes of a transition digraph.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Partition into communication classes, ordered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classes {
    pub class_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    /// No positive-probability edge leaves the class.
    pub recurrent: Vec<bool>,
}

impl Classes {
    pub fn recurrent_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.members.len()).filter(|c| self.recurrent[*c])
    }
}

/// Classes of the digraph given by successor lists.
pub fn recurrence_classes(successors: &[Vec<usize>]) -> Classes {
    let n = successors.len();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, successors.iter().map(Vec::len).sum());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, succ) in successors.iter().enumerate() {
        for &j in succ {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut members: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    members.sort_by_key(|m| m[0]);
    let mut class_of = vec![0; n];
    for (c, m) in members.iter().enumerate() {
        for &x in m {
            class_of[x] = c;
        }
    }
    let recurrent = members
        .iter()
        .enumerate()
        .map(|(c, m)| m.iter().all(|&x| successors[x].iter().all(|&y| class_of[y] == c)))
        .collect();
    Classes {
        class_of,
        members,
        recurrent,
    }
}

/// Classes of the positive-entry digraph of a sparse matrix.
pub fn classes_of_sparse<T: PartialOrd + Default>(rows: &[Vec<(usize, T)>]) -> Classes {
    let succ: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| r.iter().filter(|(_, p)| *p > T::default()).map(|(j, _)| *j).collect())
        .collect();
    recurrence_classes(&succ)
}

/// Classes of the positive-entry digraph of a dense matrix.
pub fn classes_of_dense(m: &[Vec<f64>]) -> Classes {
    let succ: Vec<Vec<usize>> = m
        .iter()
        .map(|r| r.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(j, _)| j).collect())
        .collect();
    recurrence_classes(&succ)
}
