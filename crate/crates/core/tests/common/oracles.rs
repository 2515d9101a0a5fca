//! Brute-force reference implementations, written independently of the
//! library code they check.

use std::collections::BTreeSet;

use linkformer_core::Graph;
use nalgebra::DMatrix;

pub fn neighbor_set(g: &Graph, x: usize) -> BTreeSet<usize> {
    g.edges()
        .into_iter()
        .filter_map(|(a, b)| {
            if a == x {
                Some(b)
            } else if b == x {
                Some(a)
            } else {
                None
            }
        })
        .collect()
}

fn common(g: &Graph, u: usize, v: usize) -> Vec<usize> {
    neighbor_set(g, u).intersection(&neighbor_set(g, v)).copied().collect()
}

pub fn cn(g: &Graph, u: usize, v: usize) -> f64 {
    common(g, u, v).len() as f64
}

pub fn aa(g: &Graph, u: usize, v: usize) -> f64 {
    common(g, u, v)
        .into_iter()
        .map(|w| 1.0 / (neighbor_set(g, w).len() as f64).ln())
        .sum()
}

pub fn ra(g: &Graph, u: usize, v: usize) -> f64 {
    common(g, u, v)
        .into_iter()
        .map(|w| 1.0 / neighbor_set(g, w).len() as f64)
        .sum()
}

pub fn dense(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for (u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

/// Walks of each length from `u` to `v`, by depth-first enumeration.
pub fn walk_counts(g: &Graph, u: usize, v: usize, max_len: usize) -> Vec<u64> {
    fn go(adj: &[Vec<usize>], at: usize, v: usize, len: usize, max_len: usize, out: &mut [u64]) {
        if len > 0 && at == v {
            out[len] += 1;
        }
        if len == max_len {
            return;
        }
        for &w in &adj[at] {
            go(adj, w, v, len + 1, max_len, out);
        }
    }
    let adj: Vec<Vec<usize>> = (0..g.num_nodes()).map(|x| neighbor_set(g, x).into_iter().collect()).collect();
    let mut out = vec![0; max_len + 1];
    go(&adj, u, v, 0, max_len, &mut out);
    out
}

pub fn katz_walks(g: &Graph, u: usize, v: usize, beta: f64, max_len: usize) -> f64 {
    walk_counts(g, u, v, max_len)
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, &c)| beta.powi(l as i32) * c as f64)
        .sum()
}

/// `sum_{l=1..L} beta^l A^l` by explicit matrix powers.
pub fn katz_powers(g: &Graph, beta: f64, max_len: usize) -> DMatrix<f64> {
    let a = dense(g);
    let n = g.num_nodes();
    let mut acc = DMatrix::zeros(n, n);
    let mut p = DMatrix::identity(n, n);
    for _ in 0..max_len {
        p = &p * &a * beta;
        acc += &p;
    }
    acc
}

/// `(I - beta A)^{-1} - I` by dense inversion.
pub fn katz_closed(g: &Graph, beta: f64) -> DMatrix<f64> {
    let n = g.num_nodes();
    let m = DMatrix::identity(n, n) - dense(g) * beta;
    m.try_inverse().expect("invertible") - DMatrix::identity(n, n)
}

/// All-pairs hop distances by Floyd-Warshall; `None` when disconnected.
pub fn distances(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.num_nodes();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for (u, v) in g.edges() {
        d[u][v] = Some(1);
        d[v][u] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// PageRank as the solution of its linear fixed-point equation, with
/// degree-0 nodes teleporting uniformly.
pub fn pagerank(g: &Graph, alpha: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let a = dense(g);
    let mut m = DMatrix::identity(n, n);
    for x in 0..n {
        let deg: f64 = a.row(x).sum();
        for y in 0..n {
            let t = if deg == 0.0 { 1.0 / n as f64 } else { a[(x, y)] / deg };
            m[(y, x)] -= alpha * t;
        }
    }
    let b = nalgebra::DVector::from_element(n, (1.0 - alpha) / n as f64);
    m.lu().solve(&b).expect("solvable").iter().copied().collect()
}
