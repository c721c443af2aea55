//! Agent network with a legitimate/malicious role partition.
//!
//! Agents are indexed legitimate-first: `0..n_legit` are legitimate,
//! `n_legit..n_legit + n_malicious` are malicious. Edges are undirected and
//! carry no self-loops; self-influence is handled by the weight rule.
//! Malicious-to-malicious links never enter a legitimate update, so only
//! malicious-to-legitimate adjacency is stored.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for AgentId {
    fn from(i: usize) -> Self {
        AgentId(i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_legit: usize,
    n_malicious: usize,
    /// Sorted neighbor lists for every agent. Legitimate agents list their
    /// legitimate neighbors first, then malicious ones.
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from a boolean adjacency matrix over the legitimate
    /// agents and, for each malicious agent, the legitimate agents it reaches.
    ///
    /// Diagonal entries of `legit_adjacency` are ignored.
    pub fn new(
        n_legit: usize,
        n_malicious: usize,
        legit_adjacency: &[Vec<bool>],
        malicious_neighbors: &[Vec<usize>],
    ) -> Result<Self> {
        if legit_adjacency.len() != n_legit {
            return Err(Error::DimensionMismatch { expected: n_legit, got: legit_adjacency.len() });
        }
        if malicious_neighbors.len() != n_malicious {
            return Err(Error::DimensionMismatch {
                expected: n_malicious,
                got: malicious_neighbors.len(),
            });
        }
        for row in legit_adjacency {
            if row.len() != n_legit {
                return Err(Error::DimensionMismatch { expected: n_legit, got: row.len() });
            }
        }

        let mut neighbors = vec![Vec::new(); n_legit + n_malicious];
        for i in 0..n_legit {
            for j in 0..n_legit {
                if i == j {
                    continue;
                }
                if legit_adjacency[i][j] != legit_adjacency[j][i] {
                    return Err(Error::AsymmetricAdjacency(i, j));
                }
                if legit_adjacency[i][j] {
                    neighbors[i].push(j);
                }
            }
        }
        for (k, targets) in malicious_neighbors.iter().enumerate() {
            let m = n_legit + k;
            let mut targets = targets.clone();
            targets.sort_unstable();
            targets.dedup();
            for &i in &targets {
                if i >= n_legit {
                    return Err(Error::NeighborOutOfRange { agent: m, neighbor: i });
                }
                neighbors[i].push(m);
            }
            neighbors[m] = targets;
        }

        Ok(Topology { n_legit, n_malicious, neighbors })
    }

    /// Same as [`Topology::new`] but with legitimate links given as an edge list.
    pub fn from_edges(
        n_legit: usize,
        n_malicious: usize,
        legit_edges: &[(usize, usize)],
        malicious_neighbors: &[Vec<usize>],
    ) -> Result<Self> {
        let mut adjacency = vec![vec![false; n_legit]; n_legit];
        for &(a, b) in legit_edges {
            if a >= n_legit {
                return Err(Error::NeighborOutOfRange { agent: b, neighbor: a });
            }
            if b >= n_legit {
                return Err(Error::NeighborOutOfRange { agent: a, neighbor: b });
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        Self::new(n_legit, n_malicious, &adjacency, malicious_neighbors)
    }

    /// Every malicious agent adjacent to every legitimate agent.
    pub fn fully_exposed(n_legit: usize, n_malicious: usize, legit_adjacency: &[Vec<bool>]) -> Result<Self> {
        let all: Vec<usize> = (0..n_legit).collect();
        Self::new(n_legit, n_malicious, legit_adjacency, &vec![all; n_malicious])
    }

    pub fn n_legit(&self) -> usize {
        self.n_legit
    }

    pub fn n_malicious(&self) -> usize {
        self.n_malicious
    }

    pub fn n_agents(&self) -> usize {
        self.n_legit + self.n_malicious
    }

    pub fn is_legit(&self, agent: usize) -> bool {
        agent < self.n_legit
    }

    /// Full neighbor set `N_i`, sorted ascending (legitimate indices first).
    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn legit_neighbors(&self, agent: usize) -> &[usize] {
        let all = &self.neighbors[agent];
        &all[..all.partition_point(|&j| j < self.n_legit)]
    }

    pub fn malicious_neighbors(&self, agent: usize) -> &[usize] {
        let all = &self.neighbors[agent];
        &all[all.partition_point(|&j| j < self.n_legit)..]
    }

    pub fn legit_degree(&self, agent: usize) -> usize {
        self.legit_neighbors(agent).len()
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors.get(a).is_some_and(|n| n.binary_search(&b).is_ok())
    }

    /// Total number of directed legitimate-to-neighbor edges that carry trust
    /// observations.
    pub fn n_observed_edges(&self) -> usize {
        (0..self.n_legit).map(|i| self.neighbors[i].len()).sum()
    }

    /// Breadth-first reachability over the legitimate subgraph. An empty
    /// legitimate set counts as disconnected.
    pub fn is_legit_connected(&self) -> bool {
        if self.n_legit == 0 {
            return false;
        }
        let mut seen = vec![false; self.n_legit];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in self.legit_neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n_legit
    }

    /// Same topology with a different number of fully-exposed malicious agents.
    pub fn with_malicious(&self, n_malicious: usize) -> Result<Self> {
        let adjacency: Vec<Vec<bool>> = (0..self.n_legit)
            .map(|i| (0..self.n_legit).map(|j| self.are_neighbors(i, j)).collect())
            .collect();
        Self::fully_exposed(self.n_legit, n_malicious, &adjacency)
    }

    pub fn legit_adjacency(&self) -> Vec<Vec<bool>> {
        (0..self.n_legit)
            .map(|i| (0..self.n_legit).map(|j| self.are_neighbors(i, j)).collect())
            .collect()
    }
}

/// Legitimate-subgraph adjacency of the 15-agent evaluation network, as
/// printed with ones on the diagonal.
pub const PAPER_ADJACENCY: [&str; 15] = [
    "110000000101001",
    "111100000000000",
    "011100000010000",
    "011110000000100",
    "000111100000001",
    "000011100000100",
    "000011110000001",
    "000000111000110",
    "000000011100010",
    "100000001111010",
    "001000000111001",
    "100000000111100",
    "000101010001110",
    "000000011100111",
    "100010100010011",
];

/// Initial values of the 15 legitimate agents in the evaluation network.
pub const PAPER_INITIAL_VALUES: [f64; 15] = [
    -2.59, -2.44, -4.23, -1.45, -1.46, 0.871, -0.51, -3.19, -0.59, -3.31, -2.25, 1.31, 1.87, 1.34, 1.76,
];

/// Parses rows of `0`/`1` characters (whitespace ignored) into a boolean matrix.
pub fn parse_bit_rows<S: AsRef<str>>(rows: &[S]) -> Result<Vec<Vec<bool>>> {
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            row.as_ref()
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::config(
                        format!("topology.adjacency[{r}]"),
                        format!("unexpected character {other:?}"),
                    )),
                })
                .collect()
        })
        .collect()
}

/// The 15-agent evaluation network with `n_malicious` malicious agents, each
/// adjacent to every legitimate agent.
pub fn paper_topology(n_malicious: usize) -> Topology {
    let adjacency = parse_bit_rows(&PAPER_ADJACENCY).expect("static adjacency is well formed");
    Topology::fully_exposed(15, n_malicious, &adjacency).expect("static adjacency is symmetric")
}
