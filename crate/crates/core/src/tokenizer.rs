//! Adjacency-row tokenization, padded collation and recovery of the
//! propagation operator from the tokens themselves.
//!
//! A token row is `[one-hot id (N_max) | adjacency row (N_max) | role (2)]`.
//! Context tokens carry role `[1, 0]`; the two task tokens copy the endpoint
//! rows with role `[0, 1]`. In a batch the task tokens of every sample sit at
//! rows `N_B` and `N_B + 1`, after the (padded) context slots.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::sampler::{pack_bits, unpack_bits, ByteCursor, SubgraphSample};

/// Token matrix of one sample, `(n + 2) x (2 n_max + 2)`, entries 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMatrix {
    pub n: usize,
    pub n_max: usize,
    pub rows: Vec<u8>,
}

impl TokenMatrix {
    pub fn width(&self) -> usize {
        token_width(self.n_max)
    }

    pub fn row(&self, r: usize) -> &[u8] {
        let w = self.width();
        &self.rows[r * w..(r + 1) * w]
    }
}

pub fn token_width(n_max: usize) -> usize {
    2 * n_max + 2
}

fn write_context_row(sample: &SubgraphSample, n_max: usize, r: usize, out: &mut [u8]) {
    out[r] = 1;
    out[n_max..n_max + sample.len()].copy_from_slice(sample.row(r));
    out[2 * n_max] = 1;
}

fn write_task_row(sample: &SubgraphSample, n_max: usize, endpoint: usize, out: &mut [u8]) {
    out[endpoint] = 1;
    out[n_max..n_max + sample.len()].copy_from_slice(sample.row(endpoint));
    out[2 * n_max + 1] = 1;
}

fn check_budget(sample: &SubgraphSample, n_max: usize) -> Result<()> {
    if sample.len() > n_max {
        return Err(Error::invalid(format!(
            "sample has {} nodes but the token budget is {n_max}",
            sample.len()
        )));
    }
    if sample.len() < 2 {
        return Err(Error::invalid("a sample needs both endpoints"));
    }
    Ok(())
}

pub fn encode(sample: &SubgraphSample, n_max: usize) -> Result<TokenMatrix> {
    check_budget(sample, n_max)?;
    let n = sample.len();
    let w = token_width(n_max);
    let mut rows = vec![0u8; (n + 2) * w];
    for r in 0..n {
        write_context_row(sample, n_max, r, &mut rows[r * w..(r + 1) * w]);
    }
    for t in 0..2 {
        write_task_row(sample, n_max, t, &mut rows[(n + t) * w..(n + t + 1) * w]);
    }
    Ok(TokenMatrix { n, n_max, rows })
}

/// Padded batch, `b x (n_b + 2) x (2 n_max + 2)` stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub b: usize,
    /// Padded context length `N_B`, the largest sample size in the batch.
    pub n_b: usize,
    pub n_max: usize,
    pub tokens: Vec<u8>,
    /// Validity of each of the `b * (n_b + 2)` rows.
    pub mask: Vec<bool>,
    /// Context size of each sample.
    pub sizes: Vec<usize>,
    pub labels: Option<Vec<u8>>,
}

impl TokenBatch {
    pub fn width(&self) -> usize {
        token_width(self.n_max)
    }

    pub fn rows_per_sample(&self) -> usize {
        self.n_b + 2
    }

    pub fn token(&self, sample: usize, row: usize) -> &[u8] {
        let w = self.width();
        let start = (sample * self.rows_per_sample() + row) * w;
        &self.tokens[start..start + w]
    }

    pub fn is_valid(&self, sample: usize, row: usize) -> bool {
        self.mask[sample * self.rows_per_sample() + row]
    }

    /// Batch rows holding real tokens of `sample`: its context rows followed
    /// by the two task rows.
    pub fn valid_rows(&self, sample: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..self.sizes[sample]).collect();
        rows.push(self.n_b);
        rows.push(self.n_b + 1);
        rows
    }

    /// The sample's token matrix with padding removed.
    pub fn unpadded(&self, sample: usize) -> TokenMatrix {
        let mut rows = Vec::with_capacity((self.sizes[sample] + 2) * self.width());
        for r in self.valid_rows(sample) {
            rows.extend_from_slice(self.token(sample, r));
        }
        TokenMatrix {
            n: self.sizes[sample],
            n_max: self.n_max,
            rows,
        }
    }
}

fn empty_batch(b: usize, n_b: usize, n_max: usize, labels: Option<Vec<u8>>) -> Result<TokenBatch> {
    if let Some(l) = &labels {
        if l.len() != b {
            return Err(Error::invalid(format!("{} labels for {b} samples", l.len())));
        }
        if l.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
    }
    Ok(TokenBatch {
        b,
        n_b,
        n_max,
        tokens: vec![0u8; b * (n_b + 2) * token_width(n_max)],
        mask: vec![false; b * (n_b + 2)],
        sizes: Vec::with_capacity(b),
        labels,
    })
}

/// Stacks token matrices, moving each sample's task rows to `N_B`, `N_B + 1`.
pub fn collate(mats: &[TokenMatrix], labels: Option<Vec<u8>>) -> Result<TokenBatch> {
    let first = mats.first().ok_or_else(|| Error::invalid("cannot collate an empty list"))?;
    let n_max = first.n_max;
    if let Some(m) = mats.iter().find(|m| m.n_max != n_max) {
        return Err(Error::invalid(format!(
            "mixed token budgets in one batch ({n_max} and {})",
            m.n_max
        )));
    }
    let n_b = mats.iter().map(|m| m.n).max().unwrap_or(0);
    let mut batch = empty_batch(mats.len(), n_b, n_max, labels)?;
    let w = token_width(n_max);
    let per = n_b + 2;
    for (s, m) in mats.iter().enumerate() {
        let base = s * per;
        batch.tokens[base * w..(base + m.n) * w].copy_from_slice(&m.rows[..m.n * w]);
        batch.tokens[(base + n_b) * w..(base + n_b + 2) * w].copy_from_slice(&m.rows[m.n * w..]);
        batch.mask[base..base + m.n].fill(true);
        batch.mask[base + n_b] = true;
        batch.mask[base + n_b + 1] = true;
        batch.sizes.push(m.n);
    }
    Ok(batch)
}

/// Encode and collate in one pass, writing rows straight into the padded
/// buffer.
pub fn collate_samples(samples: &[SubgraphSample], n_max: usize, labels: Option<Vec<u8>>) -> Result<TokenBatch> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot collate an empty list"));
    }
    for s in samples {
        check_budget(s, n_max)?;
    }
    let n_b = samples.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut batch = empty_batch(samples.len(), n_b, n_max, labels)?;
    let w = token_width(n_max);
    let per = n_b + 2;
    for (s, sample) in samples.iter().enumerate() {
        let base = s * per;
        let n = sample.len();
        for r in 0..n {
            write_context_row(sample, n_max, r, &mut batch.tokens[(base + r) * w..(base + r + 1) * w]);
        }
        for t in 0..2 {
            let row = base + n_b + t;
            write_task_row(sample, n_max, t, &mut batch.tokens[row * w..(row + 1) * w]);
        }
        batch.mask[base..base + n].fill(true);
        batch.mask[base + n_b] = true;
        batch.mask[base + n_b + 1] = true;
        batch.sizes.push(n);
    }
    Ok(batch)
}

/// Context-sourced propagation operator, `b x (n_b + 2) x (n_b + 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyOperator {
    pub data: Array3<f64>,
    pub normalized: bool,
}

impl AdjacencyOperator {
    /// Square operator restricted to the given rows and columns.
    pub fn gather(&self, sample: usize, rows: &[usize]) -> Array2<f64> {
        let k = rows.len();
        Array2::from_shape_fn((k, k), |(i, j)| self.data[[sample, rows[i], rows[j]]])
    }
}

/// Recovers `[X^adj + X^id | 0 0]` from the tokens, optionally
/// row-normalized (all-zero rows stay zero).
pub fn reconstruct_adjacency(batch: &TokenBatch, normalize: bool) -> AdjacencyOperator {
    let per = batch.rows_per_sample();
    let n_b = batch.n_b;
    let n_max = batch.n_max;
    let mut data = Array3::<f64>::zeros((batch.b, per, per));
    for s in 0..batch.b {
        for r in 0..per {
            let tok = batch.token(s, r);
            let mut sum = 0.0;
            for j in 0..n_b {
                let a = f64::from(tok[j] + tok[n_max + j]);
                data[[s, r, j]] = a;
                sum += a;
            }
            if normalize && sum > 0.0 {
                for j in 0..n_b {
                    data[[s, r, j]] /= sum;
                }
            }
        }
    }
    AdjacencyOperator { data, normalized: normalize }
}

/// Per-token node features, `b x (n_b + 2) x f`: context rows take their
/// node's features, task rows the endpoint features, padding stays zero.
pub fn gather_features(samples: &[SubgraphSample], n_b: usize, features: &Array2<f64>) -> Result<Array3<f64>> {
    let f = features.ncols();
    let mut out = Array3::<f64>::zeros((samples.len(), n_b + 2, f));
    for (s, sample) in samples.iter().enumerate() {
        if sample.len() > n_b {
            return Err(Error::invalid(format!("sample of size {} exceeds N_B = {n_b}", sample.len())));
        }
        let rows = (0..sample.len()).map(|r| (r, sample.nodes[r])).chain([
            (n_b, sample.nodes[0]),
            (n_b + 1, sample.nodes[1]),
        ]);
        for (r, node) in rows {
            if node >= features.nrows() {
                return Err(Error::NodeOutOfRange {
                    id: node,
                    num_nodes: features.nrows(),
                });
            }
            out.slice_mut(ndarray::s![s, r, ..]).assign(&features.row(node));
        }
    }
    Ok(out)
}

const BATCH_MAGIC: &[u8; 4] = b"LFTB";
const BATCH_VERSION: u32 = 1;

/// Writes a batch: magic `LFTB`, u32 version, u32 `B`, u32 `N_B`,
/// u32 `N_max`, u8 label flag, `B` label bytes when flagged, then every
/// token bit packed row-major, least significant bit first. The row mask
/// and sample sizes are recovered from the one-hot slice on load.
pub fn write_token_cache(batch: &TokenBatch, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(BATCH_MAGIC)?;
    for x in [BATCH_VERSION, batch.b as u32, batch.n_b as u32, batch.n_max as u32] {
        out.write_all(&x.to_le_bytes())?;
    }
    match &batch.labels {
        Some(l) => {
            out.write_all(&[1])?;
            out.write_all(l)?;
        }
        None => out.write_all(&[0])?,
    }
    out.write_all(&pack_bits(&batch.tokens))
}

pub fn read_token_cache(mut input: impl Read) -> Result<TokenBatch> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut cur = ByteCursor::new(&buf);
    if cur.take(4)? != BATCH_MAGIC {
        return Err(Error::Format("not a token batch cache (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != BATCH_VERSION {
        return Err(Error::Format(format!("unsupported token cache version {version}")));
    }
    let b = cur.u32()? as usize;
    let n_b = cur.u32()? as usize;
    let n_max = cur.u32()? as usize;
    if n_b > n_max {
        return Err(Error::Format(format!("N_B = {n_b} exceeds N_max = {n_max}")));
    }
    let labels = match cur.take(1)?[0] {
        0 => None,
        1 => Some(cur.take(b)?.to_vec()),
        x => return Err(Error::Format(format!("bad label flag {x}"))),
    };
    let w = token_width(n_max);
    let total = b * (n_b + 2) * w;
    let tokens = unpack_bits(cur.take(total.div_ceil(8))?, total);
    if !cur.is_done() {
        return Err(Error::Format("trailing bytes after token planes".into()));
    }
    let per = n_b + 2;
    let mut mask = vec![false; b * per];
    let mut sizes = Vec::with_capacity(b);
    for s in 0..b {
        let mut n = 0;
        for r in 0..per {
            let start = (s * per + r) * w;
            let valid = tokens[start..start + n_max].contains(&1);
            mask[s * per + r] = valid;
            if valid && r < n_b {
                n = r + 1;
            }
        }
        sizes.push(n);
    }
    Ok(TokenBatch {
        b,
        n_b,
        n_max,
        tokens,
        mask,
        sizes,
        labels,
    })
}

pub fn save_token_cache(batch: &TokenBatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_token_cache(batch, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_token_cache(path: impl AsRef<Path>) -> Result<TokenBatch> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_token_cache(&bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generators, Graph};

    fn sample(g: &Graph, nodes: Vec<usize>) -> SubgraphSample {
        let hidden = Some((nodes[0], nodes[1]));
        SubgraphSample::induced(g, nodes, hidden).unwrap()
    }

    #[test]
    fn figure_shape() {
        let g = generators::path(5);
        let m = encode(&sample(&g, vec![0, 4, 1, 2, 3]), 6).unwrap();
        assert_eq!(m.rows.len() / m.width(), 7);
        assert_eq!(m.width(), 14);
    }

    #[test]
    fn two_isolated_endpoints() {
        let g = Graph::from_edge_slice(2, &[]);
        let m = encode(&sample(&g, vec![0, 1]), 3).unwrap();
        assert_eq!(m.row(0), &[1, 0, 0, 0, 0, 0, 1, 0]);
        assert_eq!(m.row(1), &[0, 1, 0, 0, 0, 0, 1, 0]);
        assert_eq!(m.row(2), &[1, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(m.row(3), &[0, 1, 0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn triangle_rows_and_overflow() {
        let g = generators::triangle();
        let s = SubgraphSample::induced(&g, vec![0, 1, 2], None).unwrap();
        let m = encode(&s, 4).unwrap();
        for r in 0..3 {
            assert_eq!(m.row(r)[4..8].iter().map(|&x| x as usize).sum::<usize>(), 2);
        }
        assert!(encode(&s, 2).is_err());
    }

    #[test]
    fn collate_pads_and_masks() {
        let g = generators::complete(5);
        let a = encode(&sample(&g, vec![0, 1, 2]), 6).unwrap();
        let b = encode(&sample(&g, vec![3, 4, 0, 1, 2]), 6).unwrap();
        let batch = collate(&[a.clone(), b.clone()], Some(vec![1, 0])).unwrap();
        assert_eq!(batch.n_b, 5);
        let masked = (0..5).filter(|&r| !batch.is_valid(0, r)).count();
        assert_eq!(masked, 2);
        assert!(batch.is_valid(0, 5) && batch.is_valid(0, 6));
        assert!(batch.token(0, 3).iter().all(|&x| x == 0));
        assert_eq!(batch.token(0, 5), a.row(3));
        assert_eq!(batch.unpadded(1), b);

        let single = collate(&[a.clone()], None).unwrap();
        assert!(single.mask.iter().all(|&m| m));
        assert!(collate(&[], None).is_err());
        let other = encode(&sample(&g, vec![0, 1]), 7).unwrap();
        assert!(collate(&[a, other], None).is_err());
    }

    #[test]
    fn fused_collation_matches_two_step() {
        let g = generators::complete(6);
        let samples = vec![
            sample(&g, vec![0, 1, 2, 3]),
            sample(&g, vec![2, 5]),
            sample(&g, vec![5, 4, 3, 2, 1, 0]),
        ];
        let mats: Vec<TokenMatrix> = samples.iter().map(|s| encode(s, 6).unwrap()).collect();
        assert_eq!(
            collate(&mats, Some(vec![0, 1, 1])).unwrap(),
            collate_samples(&samples, 6, Some(vec![0, 1, 1])).unwrap()
        );
    }

    #[test]
    fn operator_structure() {
        let g = generators::path(4);
        let s = sample(&g, vec![1, 2, 0, 3]);
        let small = sample(&g, vec![0, 3]);
        let batch = collate_samples(&[s.clone(), small], 6, None).unwrap();
        let raw = reconstruct_adjacency(&batch, false);
        let per = batch.rows_per_sample();
        for i in 0..4 {
            for j in 0..4 {
                let expected = f64::from(s.has_edge(i, j) as u8) + if i == j { 1.0 } else { 0.0 };
                assert_eq!(raw.data[[0, i, j]], expected);
            }
        }
        for r in 0..per {
            assert_eq!(raw.data[[0, r, per - 2]], 0.0);
            assert_eq!(raw.data[[0, r, per - 1]], 0.0);
        }
        for j in 0..per {
            assert_eq!(raw.data[[0, 4, j]], raw.data[[0, 0, j]]);
            assert_eq!(raw.data[[0, 5, j]], raw.data[[0, 1, j]]);
        }
        let norm = reconstruct_adjacency(&batch, true);
        for r in 0..per {
            let sum: f64 = (0..per).map(|j| norm.data[[1, r, j]]).sum();
            let valid = batch.is_valid(1, r);
            assert!((sum - if valid { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn features_follow_nodes() {
        let g = generators::path(4);
        let feats = Array2::from_shape_fn((4, 2), |(i, j)| (10 * i + j) as f64);
        let s = sample(&g, vec![3, 1, 2]);
        let x = gather_features(std::slice::from_ref(&s), 4, &feats).unwrap();
        assert_eq!(x[[0, 0, 1]], 31.0);
        assert_eq!(x[[0, 2, 0]], 20.0);
        assert_eq!(x[[0, 3, 0]], 0.0);
        assert_eq!(x[[0, 4, 0]], 30.0);
        assert_eq!(x[[0, 5, 1]], 11.0);
    }

    #[test]
    fn token_cache_round_trip() {
        let g = generators::complete(5);
        let samples = vec![sample(&g, vec![0, 1, 2]), sample(&g, vec![3, 4, 0, 1, 2])];
        for labels in [None, Some(vec![1, 0])] {
            let batch = collate_samples(&samples, 7, labels).unwrap();
            let mut buf = Vec::new();
            write_token_cache(&batch, &mut buf).unwrap();
            assert_eq!(read_token_cache(&buf[..]).unwrap(), batch);
            assert!(read_token_cache(&buf[..buf.len() - 1]).is_err());
        }
    }
}
