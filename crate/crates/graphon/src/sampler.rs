//! W-random graph sampling from block matrices.
//!
//! All randomness flows through [`RngSeed`], a `(seed, stream)` pair feeding
//! a ChaCha8 counter-based generator, so every experiment replays bit-exactly
//! and concurrent trials can use disjoint streams.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::BlockMatrix;

/// Mean-entry threshold below which sampling switches to geometric skipping.
pub const SPARSE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("graph must have at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("graph parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Seed and stream for the repo-wide RNG (ChaCha8). Identical pairs produce
/// identical draws on every platform; distinct streams are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self {
            seed: self.seed,
            stream,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Which edge-sampling path to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Dense Bernoulli sweep when the mean entry is at least
    /// [`SPARSE_THRESHOLD`], geometric skipping below it.
    Auto,
    Dense,
    Sparse,
}

/// An undirected simple graph plus optionally retained latents.
///
/// Edges are stored as a lexicographically sorted list of `(i, j)` pairs with
/// `i < j`, 0-based. Labels (block indices, 0-based) and the `n x n`
/// probability matrix `h` are kept only when requested at sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    labels: Option<Vec<u32>>,
    h: Option<Vec<f64>>,
}

impl SampledGraph {
    pub fn new(n: usize, mut edges: Vec<(u32, u32)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.retain(|e| e.0 != e.1);
        Self {
            n,
            edges,
            labels: None,
            h: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Row-major `n x n` edge-probability matrix, if retained.
    pub fn h(&self) -> Option<&[f64]> {
        self.h.as_deref()
    }

    pub fn has_edge(&self, i: u32, j: u32) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Hashed adjacency set, built on demand for random-access-heavy callers.
    pub fn adjacency_set(&self) -> HashSet<(u32, u32)> {
        self.edges.iter().cloned().collect()
    }

    /// Text format: header `n m`, then `m` lines `i j` with 1-based
    /// endpoints, `i < j`, sorted lexicographically.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(i, j) in &self.edges {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self, SamplerError> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or(SamplerError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut parts = header.split_whitespace();
        let parse = |tok: Option<&str>, line: usize| -> Result<usize, SamplerError> {
            tok.and_then(|t| t.parse::<usize>().ok())
                .ok_or(SamplerError::Parse {
                    line,
                    msg: "expected integer".into(),
                })
        };
        let n = parse(parts.next(), 1)?;
        let m = parse(parts.next(), 1)?;
        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let i = parse(it.next(), ln + 1)?;
            let j = parse(it.next(), ln + 1)?;
            if i < 1 || j < 1 || i > n || j > n || i >= j {
                return Err(SamplerError::Parse {
                    line: ln + 1,
                    msg: format!("bad edge {i} {j} for n = {n}"),
                });
            }
            edges.push(((i - 1) as u32, (j - 1) as u32));
        }
        if edges.len() != m {
            return Err(SamplerError::Parse {
                line: 1,
                msg: format!("header declared {m} edges, found {}", edges.len()),
            });
        }
        Ok(Self::new(n, edges))
    }
}

/// Provenance sidecar written next to graph files: the seed that produced the
/// graph and the 1-based latent labels.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub seed: RngSeed,
    pub labels: Vec<u32>,
}

impl GraphSidecar {
    pub fn new(seed: RngSeed, labels_zero_based: &[u32]) -> Self {
        Self {
            seed,
            labels: labels_zero_based.iter().map(|&l| l + 1).collect(),
        }
    }
}

/// I.i.d. uniform block labels in `{0..k-1}`. For equal blocks this is
/// exactly the uniform-latent sampling step of a W-random graph.
pub fn sample_labels(n: usize, k: usize, seed: RngSeed) -> Vec<u32> {
    assert!(n >= 1 && k >= 1);
    let mut rng = seed.rng();
    (0..n).map(|_| rng.gen_range(0..k) as u32).collect()
}

/// Sample a W-random graph on `n` nodes: uniform labels, then each edge
/// `{i, j}` present independently with probability `W[label_i][label_j]`.
pub fn sample_graph(w: &BlockMatrix, n: usize, seed: RngSeed, keep_latents: bool) -> SampledGraph {
    sample_graph_mode(w, n, seed, keep_latents, SampleMode::Auto)
}

/// [`sample_graph`] with the edge-sampling path pinned. The dense and sparse
/// paths consume randomness differently, so they produce different (equally
/// distributed) graphs from the same seed.
pub fn sample_graph_mode(
    w: &BlockMatrix,
    n: usize,
    seed: RngSeed,
    keep_latents: bool,
    mode: SampleMode,
) -> SampledGraph {
    assert!(n >= 1);
    let mut rng = seed.rng();
    let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..w.k()) as u32).collect();
    let sparse = match mode {
        SampleMode::Auto => w.mean_entry() < SPARSE_THRESHOLD,
        SampleMode::Dense => false,
        SampleMode::Sparse => true,
    };
    let edges = if sparse {
        sample_edges_sparse(w, &labels, &mut rng)
    } else {
        sample_edges_dense(w, &labels, &mut rng)
    };
    let mut g = SampledGraph::new(n, edges);
    if keep_latents {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = w.get(labels[i] as usize, labels[j] as usize);
            }
        }
        g.h = Some(h);
        g.labels = Some(labels);
    }
    g
}

fn sample_edges_dense(w: &BlockMatrix, labels: &[u32], rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = w.get(labels[i] as usize, labels[j] as usize);
            if rng.gen::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    edges
}

/// Geometric skipping over the candidate pairs of each label-pair class: the
/// probability is constant within a class, so the gap to the next edge is
/// geometric and the expected work is proportional to the edge count.
fn sample_edges_sparse(w: &BlockMatrix, labels: &[u32], rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let k = w.k();
    let mut classes: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        classes[l as usize].push(i as u32);
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a..k {
            let p = w.get(a, b);
            if p <= 0.0 {
                continue;
            }
            let count = if a == b {
                let t = classes[a].len();
                t * t.saturating_sub(1) / 2
            } else {
                classes[a].len() * classes[b].len()
            };
            if count == 0 {
                continue;
            }
            if p >= 1.0 {
                for m in 0..count {
                    edges.push(unrank_pair(&classes, a, b, m));
                }
                continue;
            }
            let log1mp = (1.0 - p).ln();
            let mut pos: usize = 0;
            loop {
                let u: f64 = rng.gen::<f64>();
                let skip = ((1.0 - u).ln() / log1mp).floor();
                if !skip.is_finite() || skip >= (count - pos) as f64 {
                    break;
                }
                pos += skip as usize;
                if pos >= count {
                    break;
                }
                edges.push(unrank_pair(&classes, a, b, pos));
                pos += 1;
                if pos >= count {
                    break;
                }
            }
        }
    }
    edges
}

/// Map a flat index to the `m`-th candidate pair of class pair `(a, b)`.
fn unrank_pair(classes: &[Vec<u32>], a: usize, b: usize, m: usize) -> (u32, u32) {
    if a == b {
        let nodes = &classes[a];
        let t = nodes.len();
        // pairs (r, s), r < s, lexicographic; cum(r) = r*t - r*(r+1)/2 pairs
        // precede row r.
        let cum = |r: usize| r * t - r * (r + 1) / 2;
        let tf = t as f64;
        let disc = ((2.0 * tf - 1.0) * (2.0 * tf - 1.0) - 8.0 * m as f64).max(0.0);
        let mut r = (((2.0 * tf - 1.0) - disc.sqrt()) / 2.0).floor() as usize;
        r = r.min(t.saturating_sub(2));
        while r > 0 && cum(r) > m {
            r -= 1;
        }
        while cum(r + 1) <= m {
            r += 1;
        }
        let s = r + 1 + (m - cum(r));
        let (x, y) = (nodes[r], nodes[s]);
        if x < y {
            (x, y)
        } else {
            (y, x)
        }
    } else {
        let u = &classes[a];
        let v = &classes[b];
        let (x, y) = (u[m / v.len()], v[m % v.len()]);
        if x < y {
            (x, y)
        } else {
            (y, x)
        }
    }
}

/// Fraction of present edges among the `n*(n-1)/2` possible ones.
pub fn empirical_edge_density(g: &SampledGraph) -> Result<f64, SamplerError> {
    if g.n() < 2 {
        return Err(SamplerError::TooFewNodes(g.n()));
    }
    let total = g.n() * (g.n() - 1) / 2;
    Ok(g.edge_count() as f64 / total as f64)
}
