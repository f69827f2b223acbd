//! Bottom strongly connected components of an induced chain.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::strategy::InducedChain;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BsccDecomposition {
    /// Each BSCC as sorted state indices; ordered by smallest member.
    pub bsccs: Vec<Vec<usize>>,
    /// BSCC id per state, `None` for transient states.
    pub membership: Vec<Option<usize>>,
}

impl BsccDecomposition {
    pub fn len(&self) -> usize {
        self.bsccs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bsccs.is_empty()
    }
}

/// Strongly connected components of a digraph given as adjacency lists
/// (iterative Tarjan). Components are emitted in reverse topological order.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    // (node, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// BSCCs of the graph of strictly positive transitions.
pub fn decompose_bsccs(chain: &InducedChain) -> BsccDecomposition {
    let adj: Vec<Vec<usize>> = (0..chain.len()).map(|s| chain.positive_successors(s).collect()).collect();
    let comps = tarjan_scc(&adj);
    let mut comp_of = vec![0; chain.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &s in comp {
            comp_of[s] = c;
        }
    }
    let mut bsccs: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, comp)| comp.iter().all(|&s| adj[s].iter().all(|&t| comp_of[t] == *c)))
        .map(|(_, comp)| comp.clone())
        .collect();
    bsccs.sort_by_key(|b| b[0]);
    let mut membership = vec![None; chain.len()];
    for (id, b) in bsccs.iter().enumerate() {
        for &s in b {
            membership[s] = Some(id);
        }
    }
    BsccDecomposition { bsccs, membership }
}

/// A chain restricted to one closed class, re-indexed `0..|B|`.
#[derive(Debug, Clone)]
pub struct LocalChain {
    /// Global state index of each local state.
    pub states: Vec<usize>,
    /// Label of each local state.
    pub labels: Vec<usize>,
    pub num_labels: usize,
    /// Positive-probability successors per local state: (local target, probability).
    pub succ: Vec<Vec<(usize, f64)>>,
}

impl LocalChain {
    /// Restricts `chain` to `members`, which must be closed under positive transitions.
    pub fn new(chain: &InducedChain, members: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; chain.len()];
        for (i, &s) in members.iter().enumerate() {
            local[s] = i;
        }
        let mut succ = Vec::with_capacity(members.len());
        for &s in members {
            let mut row = Vec::new();
            for &(t, p) in chain.row(s) {
                if p <= 0.0 {
                    continue;
                }
                if local[t] == usize::MAX {
                    return Err(Error::InvalidStrategy(format!(
                        "state set is not closed: transition {s} -> {t} leaves it"
                    )));
                }
                row.push((local[t], p));
            }
            succ.push(row);
        }
        Ok(Self {
            states: members.to_vec(),
            labels: members.iter().map(|&s| chain.label(s)).collect(),
            num_labels: chain.num_labels(),
            succ,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n, n);
        for (i, row) in self.succ.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] += p;
            }
        }
        m
    }
}
