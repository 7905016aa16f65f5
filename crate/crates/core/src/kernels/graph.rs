//! Compressed sparse row graphs, an edge-list loader and two synthetic
//! generators (power-law and road-like lattice).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCsr {
    pub nodes: u32,
    pub offsets: Vec<u64>,
    pub dests: Vec<u32>,
}

impl GraphCsr {
    /// Builds a CSR from `(src, dst)` pairs; edges keep their input order
    /// within each source.
    pub fn from_edges(nodes: u32, edges: &[(u32, u32)]) -> Result<Self> {
        let mut deg = vec![0u64; nodes as usize + 1];
        for &(s, d) in edges {
            if s >= nodes || d >= nodes {
                return Err(Error::Graph(format!("edge ({s}, {d}) outside {nodes} nodes")));
            }
            deg[s as usize + 1] += 1;
        }
        for i in 1..deg.len() {
            deg[i] += deg[i - 1];
        }
        let offsets = deg.clone();
        let mut fill = deg;
        let mut dests = vec![0u32; edges.len()];
        for &(s, d) in edges {
            dests[fill[s as usize] as usize] = d;
            fill[s as usize] += 1;
        }
        Ok(GraphCsr { nodes, offsets, dests })
    }

    /// Parses one `src dst` pair per line; blank lines and `#`/`%` comments
    /// are skipped. The node count is one past the largest id.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max = None::<u32>;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || -> Result<u32> {
                it.next()
                    .ok_or_else(|| Error::Graph(format!("line {}: expected `src dst`", i + 1)))?
                    .parse()
                    .map_err(|e| Error::Graph(format!("line {}: {e}", i + 1)))
            };
            let (s, d) = (next()?, next()?);
            max = Some(max.unwrap_or(0).max(s).max(d));
            edges.push((s, d));
        }
        Self::from_edges(max.map_or(0, |m| m + 1), &edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (s, d) in self.edges() {
            out.push_str(&format!("{s} {d}\n"));
        }
        out
    }

    pub fn edge_count(&self) -> u64 {
        self.dests.len() as u64
    }

    /// Renames node `v` to `perm[v]`; CSR order follows the new ids.
    pub fn relabeled(&self, perm: &[u32]) -> GraphCsr {
        let list: Vec<(u32, u32)> = self.edges().map(|(u, v)| (perm[u as usize], perm[v as usize])).collect();
        GraphCsr::from_edges(self.nodes, &list).expect("permutation keeps ids in range")
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        let (a, b) = (self.offsets[v as usize], self.offsets[v as usize + 1]);
        &self.dests[a as usize..b as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.nodes).flat_map(move |s| self.neighbors(s).iter().map(move |&d| (s, d)))
    }

    pub fn in_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes as usize];
        for &d in &self.dests {
            deg[d as usize] += 1;
        }
        deg
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != self.nodes as usize + 1 || self.offsets[0] != 0 {
            return Err(Error::Graph("offset array has wrong shape".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Graph("offsets not monotone".into()));
        }
        if *self.offsets.last().unwrap() != self.dests.len() as u64 {
            return Err(Error::Graph("last offset does not match edge count".into()));
        }
        if let Some(d) = self.dests.iter().find(|&&d| d >= self.nodes) {
            return Err(Error::Graph(format!("destination {d} out of range")));
        }
        Ok(())
    }
}

/// Probability that a destination is drawn by degree rather than uniformly.
const ATTACH_BIAS: f64 = 0.5;

/// Seeded growing preferential-attachment generator. Nodes arrive in order,
/// each with one outgoing edge; the remaining edges pick a uniform source
/// among arrived nodes. Destinations are drawn proportionally to current
/// in-degree with probability `ATTACH_BIAS`, otherwise uniformly among
/// arrived nodes. Ids are finally relabeled by a seeded permutation so degree
/// does not track id. No self-loops.
pub fn synth_powerlaw_graph(nodes: u32, edges: u64, seed: u64) -> Result<GraphCsr> {
    if nodes <= 1 {
        return GraphCsr::from_edges(nodes, &[]);
    }
    if edges < nodes as u64 {
        return Err(Error::Graph(format!("need at least {nodes} edges, got {edges}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut endpoints: Vec<u32> = Vec::with_capacity(edges as usize);
    let mut list = Vec::with_capacity(edges as usize);
    // node t arrives with edge t * extra / nodes
    let extra = edges - nodes as u64;
    let mut arrived = 1u32;
    let mut next_extra = 0u64;
    let emit = |src: u32, arrived: u32, rng: &mut ChaCha8Rng, endpoints: &mut Vec<u32>| {
        let dst = loop {
            let d = if !endpoints.is_empty() && rng.gen_bool(ATTACH_BIAS) {
                endpoints[rng.gen_range(0..endpoints.len())]
            } else {
                rng.gen_range(0..arrived)
            };
            if d != src {
                break d;
            }
        };
        endpoints.push(dst);
        (src, dst)
    };
    for t in 1..=nodes {
        let due = extra * t as u64 / nodes as u64;
        while next_extra < due {
            let src = rng.gen_range(0..arrived);
            if arrived > 1 {
                list.push(emit(src, arrived, &mut rng, &mut endpoints));
            } else {
                // nothing to attach to yet; retry once a second node exists
                break;
            }
            next_extra += 1;
        }
        if t == nodes {
            break;
        }
        arrived = t + 1;
        list.push(emit(t, arrived, &mut rng, &mut endpoints));
    }
    // node 0 pushes too
    list.push(emit(0, arrived, &mut rng, &mut endpoints));
    while (list.len() as u64) < edges {
        let src = rng.gen_range(0..nodes);
        list.push(emit(src, nodes, &mut rng, &mut endpoints));
    }
    let g = GraphCsr::from_edges(nodes, &list)?;
    Ok(g.relabeled(&seeded_permutation(nodes, &mut rng)))
}

fn seeded_permutation(n: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Lattice with its ids scrambled by a seeded permutation, standing in for
/// a road network whose vertex numbering carries little spatial order.
pub fn scrambled_road(width: u32, height: u32, seed: u64) -> GraphCsr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = road_lattice(width, height);
    let perm = seeded_permutation(g.nodes, &mut rng);
    g.relabeled(&perm)
}

/// `width x height` grid where every node pushes to its four neighbours.
pub fn road_lattice(width: u32, height: u32) -> GraphCsr {
    let id = |x: u32, y: u32| y * width + x;
    let mut list = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let v = id(x, y);
            if x > 0 {
                list.push((v, id(x - 1, y)));
            }
            if x + 1 < width {
                list.push((v, id(x + 1, y)));
            }
            if y > 0 {
                list.push((v, id(x, y - 1)));
            }
            if y + 1 < height {
                list.push((v, id(x, y + 1)));
            }
        }
    }
    GraphCsr::from_edges(width * height, &list).expect("lattice ids in range")
}
