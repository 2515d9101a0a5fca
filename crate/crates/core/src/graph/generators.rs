//! Small named graphs, random models and exhaustive enumeration.

use std::collections::HashSet;

use rand::Rng;

use super::{Graph, Pair};

pub fn path(n: usize) -> Graph {
    let edges: Vec<Pair> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edge_slice(n, &edges)
}

pub fn complete(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Graph::from_edge_slice(n, &edges)
}

/// Node 0 joined to `leaves` leaves `1..=leaves`.
pub fn star(leaves: usize) -> Graph {
    let edges: Vec<Pair> = (1..=leaves).map(|i| (0, i)).collect();
    Graph::from_edge_slice(leaves + 1, &edges)
}

pub fn triangle() -> Graph {
    complete(3)
}

pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edge_slice(n, &edges)
}

/// Planted partition: `communities` blocks of `size` nodes, edge probability
/// `p_in` inside a block and `p_out` across blocks. Node `v` belongs to block
/// `v / size`.
pub fn planted_partition<R: Rng + ?Sized>(
    communities: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> Graph {
    let n = communities * size;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u / size == v / size { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edge_slice(n, &edges)
}

/// Chung-Lu graph with power-law expected degrees (exponent `gamma`) and
/// mean degree close to `avg_degree`; a heavy-tailed stand-in for
/// collaboration networks.
pub fn chung_lu<R: Rng + ?Sized>(n: usize, avg_degree: f64, gamma: f64, rng: &mut R) -> Graph {
    let raw: Vec<f64> = (0..n)
        .map(|i| ((i + 1) as f64).powf(-1.0 / (gamma - 1.0)))
        .collect();
    let scale = avg_degree * n as f64 / raw.iter().sum::<f64>();
    let weights: Vec<f64> = raw.iter().map(|w| w * scale).collect();
    let total: f64 = weights.iter().sum();

    // Draw the expected number of endpoints by weight, then pair them up.
    let m = (avg_degree * n as f64 / 2.0).round() as usize;
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let pick = |rng: &mut R| -> usize {
        let x: f64 = rng.random();
        cumulative.partition_point(|&c| c < x).min(n - 1)
    };
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(m);
    let mut attempts = 0;
    while edges.len() < m && attempts < 20 * m {
        attempts += 1;
        let u = pick(rng);
        let v = pick(rng);
        if u != v && seen.insert(super::canonical(u, v)) {
            edges.push((u, v));
        }
    }
    Graph::from_edge_slice(n, &edges)
}

/// Graph on `n` nodes from an edge bitmask over the pairs `(u, v)`, `u < v`,
/// in lexicographic order.
pub fn from_mask(n: usize, mask: u64) -> Graph {
    let mut edges = Vec::new();
    let mut bit = 0;
    for u in 0..n {
        for v in u + 1..n {
            if mask >> bit & 1 == 1 {
                edges.push((u, v));
            }
            bit += 1;
        }
    }
    Graph::from_edge_slice(n, &edges)
}

/// Every labeled simple graph on `n` nodes (`2^(n(n-1)/2)` of them).
pub fn all_labeled(n: usize) -> impl Iterator<Item = Graph> {
    assert!(n <= 8, "labeled enumeration is limited to 8 nodes");
    let pairs = n * n.saturating_sub(1) / 2;
    (0..1u64 << pairs).map(move |mask| from_mask(n, mask))
}

/// One representative per isomorphism class of graphs on `n` nodes
/// (`n <= 7`), built by extending canonical graphs on `n - 1` nodes with a
/// new vertex and deduplicating canonical forms.
pub fn nonisomorphic(n: usize) -> Vec<Graph> {
    assert!(n <= 7, "isomorphism-class enumeration is limited to 7 nodes");
    let mut classes: Vec<Vec<u8>> = vec![vec![]];
    for k in 1..=n {
        let mut next = HashSet::new();
        for base in &classes {
            for attach in 0u8..(1u16 << (k - 1)) as u8 {
                let mut rows = base.clone();
                rows.push(attach);
                for (i, row) in rows.iter_mut().enumerate().take(k - 1) {
                    if attach >> i & 1 == 1 {
                        *row |= 1 << (k - 1);
                    }
                }
                next.insert(canonical_form(&rows));
            }
            if k == 1 {
                break;
            }
        }
        let mut sorted: Vec<Vec<u8>> = next.into_iter().collect();
        sorted.sort();
        classes = sorted;
    }
    classes
        .iter()
        .map(|rows| {
            let mut edges = Vec::new();
            for (u, row) in rows.iter().enumerate() {
                for v in u + 1..n {
                    if row >> v & 1 == 1 {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edge_slice(n, &edges)
        })
        .collect()
}

// Lexicographically smallest adjacency-row encoding over the relabelings
// that list vertices by nondecreasing degree. Isomorphic graphs share that
// relabeling set up to the isomorphism, so the minimum is still canonical.
fn canonical_form(rows: &[u8]) -> Vec<u8> {
    let k = rows.len();
    let degree: Vec<u32> = rows.iter().map(|r| r.count_ones()).collect();
    let mut slots = degree.clone();
    slots.sort_unstable();
    let mut best: Option<Vec<u8>> = None;
    let mut perm = Vec::with_capacity(k);
    let mut used = vec![false; k];
    search(rows, &degree, &slots, &mut perm, &mut used, &mut best);
    best.unwrap_or_default()
}

fn search(rows: &[u8], degree: &[u32], slots: &[u32], perm: &mut Vec<usize>, used: &mut [bool], best: &mut Option<Vec<u8>>) {
    let k = rows.len();
    if perm.len() == k {
        let mut cand = vec![0u8; k];
        for (i, c) in cand.iter_mut().enumerate() {
            let src = rows[perm[i]];
            for (j, &pj) in perm.iter().enumerate() {
                if src >> pj & 1 == 1 {
                    *c |= 1 << j;
                }
            }
        }
        if best.as_ref().is_none_or(|b| cand < *b) {
            *best = Some(cand);
        }
        return;
    }
    let want = slots[perm.len()];
    for x in 0..k {
        if !used[x] && degree[x] == want {
            used[x] = true;
            perm.push(x);
            search(rows, degree, slots, perm, used, best);
            perm.pop();
            used[x] = false;
        }
    }
}
