//! Block matrices: the finite representation of equal-block step graphons.
//!
//! A `k`-block step graphon is fully described by a symmetric `k x k` matrix
//! of connection probabilities together with a declared bound `rho` on its
//! entries. [`BlockMatrix`] enforces those invariants at construction;
//! [`SquareMatrix`] is the unvalidated payload used by alignment metrics,
//! which must also handle row/column-permuted (hence possibly asymmetric)
//! matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the symmetry check on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("matrix is not symmetric: max |e[i][j] - e[j][i]| = {max_dev:e}")]
    AsymmetricInput { max_dev: f64 },
    #[error("entry ({i},{j}) = {value} outside [0, {rho}]")]
    OutOfRange {
        i: usize,
        j: usize,
        value: f64,
        rho: f64,
    },
    #[error("rho = {0} outside (0, 1]")]
    InvalidRho(f64),
    #[error("expected a nonempty square matrix, got {rows} rows with row {bad_row} of length {len}")]
    BadShape {
        rows: usize,
        bad_row: usize,
        len: usize,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid probabilities: need 0 <= q <= p <= 1 and p > 0, got p = {p}, q = {q}")]
    InvalidProbabilities { p: f64, q: f64 },
    #[error("amplitude too large: c*eta = {c_eta} > 1/2")]
    AmplitudeTooLarge { c_eta: f64 },
    #[error("binary matrix entry ({i},{j}) = {value} is not 0 or 1")]
    NotBinary { i: usize, j: usize, value: f64 },
    #[error("blow-up factor must be >= 1")]
    BadBlowUp,
}

/// A plain square matrix of `f64`, stored dense row-major.
///
/// No symmetry or range invariants; this is the type alignment metrics work
/// on, since permuting rows and columns independently breaks symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(k: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), k * k, "data length must be k*k");
        assert!(k >= 1, "k must be positive");
        Self { k, data }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(k, vec![0.0; k * k])
    }

    pub fn constant(k: usize, v: f64) -> Self {
        Self::new(k, vec![v; k * k])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, BlockError> {
        let k = rows.len();
        if k == 0 {
            return Err(BlockError::BadShape {
                rows: 0,
                bad_row: 0,
                len: 0,
            });
        }
        let mut data = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(BlockError::BadShape {
                    rows: k,
                    bad_row: i,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { k, data })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.k + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| self.data[i * self.k..(i + 1) * self.k].to_vec())
            .collect()
    }

    /// L2 norm normalized so a k-block matrix and the step graphon it
    /// induces have the same norm: `sqrt(1/k^2 * sum a_ij^2)`.
    pub fn normalized_l2(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|x| x * x).sum();
        (sum / (self.k * self.k) as f64).sqrt()
    }

    pub fn sub(&self, other: &SquareMatrix) -> Result<SquareMatrix, BlockError> {
        if self.k != other.k {
            return Err(BlockError::DimensionMismatch {
                left: self.k,
                right: other.k,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SquareMatrix { k: self.k, data })
    }

    /// Split every block into `m` equal sub-blocks, replicating entries.
    /// Old block `i` becomes new blocks `i*m .. i*m + m`.
    pub fn blow_up(&self, m: usize) -> Result<SquareMatrix, BlockError> {
        if m < 1 {
            return Err(BlockError::BadBlowUp);
        }
        if m == 1 {
            return Ok(self.clone());
        }
        let kk = self.k * m;
        let mut data = vec![0.0; kk * kk];
        for i in 0..kk {
            for j in 0..kk {
                data[i * kk + j] = self.get(i / m, j / m);
            }
        }
        Ok(SquareMatrix { k: kk, data })
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_entry(&self) -> f64 {
        self.data.iter().sum::<f64>() / (self.k * self.k) as f64
    }
}

/// Normalized L2 distance between two same-size square matrices.
pub fn l2_distance(a: &SquareMatrix, b: &SquareMatrix) -> Result<f64, BlockError> {
    Ok(a.sub(b)?.normalized_l2())
}

/// A validated symmetric `k x k` matrix of connection probabilities in
/// `[0, rho]`, `rho` in `(0, 1]`. The finite representation of a k-block
/// graphon with equal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    mat: SquareMatrix,
    rho: f64,
}

impl BlockMatrix {
    /// Validates symmetry (tolerance [`SYMMETRY_TOL`]) and the `[0, rho]`
    /// bound, then symmetrizes by averaging so downstream code never has to
    /// branch on which triangle it reads.
    pub fn new(entries: &[Vec<f64>], rho: f64) -> Result<Self, BlockError> {
        let mat = SquareMatrix::from_rows(entries)?;
        Self::from_square(mat, rho)
    }

    pub fn from_square(mat: SquareMatrix, rho: f64) -> Result<Self, BlockError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(BlockError::InvalidRho(rho));
        }
        let k = mat.k();
        let mut max_dev = 0.0f64;
        for i in 0..k {
            for j in (i + 1)..k {
                max_dev = max_dev.max((mat.get(i, j) - mat.get(j, i)).abs());
            }
        }
        if max_dev > SYMMETRY_TOL {
            return Err(BlockError::AsymmetricInput { max_dev });
        }
        for i in 0..k {
            for j in 0..k {
                let v = mat.get(i, j);
                if !(v >= 0.0 && v <= rho) {
                    return Err(BlockError::OutOfRange {
                        i,
                        j,
                        value: v,
                        rho,
                    });
                }
            }
        }
        let mut mat = mat;
        for i in 0..k {
            for j in (i + 1)..k {
                let avg = 0.5 * (mat.get(i, j) + mat.get(j, i));
                mat.set(i, j, avg);
                mat.set(j, i, avg);
            }
        }
        Ok(Self { mat, rho })
    }

    /// Constant matrix, e.g. an Erdos-Renyi model. `value` must lie in `[0, rho]`.
    pub fn constant(k: usize, value: f64, rho: f64) -> Result<Self, BlockError> {
        Self::from_square(SquareMatrix::constant(k, value), rho)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.mat.k()
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.mat
    }

    pub fn normalized_l2(&self) -> f64 {
        self.mat.normalized_l2()
    }

    /// Refine into `k*m` blocks with identical entries. The induced step
    /// graphon is unchanged, and so is the normalized L2 norm.
    pub fn blow_up(&self, m: usize) -> Result<BlockMatrix, BlockError> {
        Ok(BlockMatrix {
            mat: self.mat.blow_up(m)?,
            rho: self.rho,
        })
    }

    pub fn mean_entry(&self) -> f64 {
        self.mat.mean_entry()
    }
}

/// A symmetric `k x k` matrix with entries in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySymMatrix {
    k: usize,
    bits: Vec<u8>,
}

impl BinarySymMatrix {
    pub fn new(rows: &[Vec<u8>]) -> Result<Self, BlockError> {
        let k = rows.len();
        if k == 0 {
            return Err(BlockError::BadShape {
                rows: 0,
                bad_row: 0,
                len: 0,
            });
        }
        let mut bits = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(BlockError::BadShape {
                    rows: k,
                    bad_row: i,
                    len: row.len(),
                });
            }
            for (j, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(BlockError::NotBinary {
                        i,
                        j,
                        value: b as f64,
                    });
                }
                bits.push(b);
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if bits[i * k + j] != bits[j * k + i] {
                    return Err(BlockError::AsymmetricInput { max_dev: 1.0 });
                }
            }
        }
        Ok(Self { k, bits })
    }

    /// Build from the upper triangle including the diagonal, row by row.
    pub fn from_upper_bits(k: usize, upper: &[u8]) -> Result<Self, BlockError> {
        assert_eq!(upper.len(), k * (k + 1) / 2);
        let mut bits = vec![0u8; k * k];
        let mut idx = 0;
        for i in 0..k {
            for j in i..k {
                let b = upper[idx];
                if b > 1 {
                    return Err(BlockError::NotBinary {
                        i,
                        j,
                        value: b as f64,
                    });
                }
                bits[i * k + j] = b;
                bits[j * k + i] = b;
                idx += 1;
            }
        }
        Ok(Self { k, bits })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.k + j]
    }

    /// Row-major `k*k` string of '0'/'1' characters.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(k: usize, s: &str) -> Result<Self, BlockError> {
        let chars: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(BlockError::NotBinary {
                    i: 0,
                    j: 0,
                    value: f64::NAN,
                }),
            })
            .collect::<Result<_, _>>()?;
        if chars.len() != k * k {
            return Err(BlockError::BadShape {
                rows: k,
                bad_row: 0,
                len: chars.len(),
            });
        }
        let rows: Vec<Vec<u8>> = (0..k).map(|i| chars[i * k..(i + 1) * k].to_vec()).collect();
        Self::new(&rows)
    }

    pub fn to_square(&self) -> SquareMatrix {
        SquareMatrix::new(self.k, self.bits.iter().map(|&b| b as f64).collect())
    }
}

/// Parameters of the two-valued hard-instance family: matrices taking the
/// values `rho*(1/2 + c*eta)` and `rho*(1/2 - c*eta)` with
/// `eta = min(1, k/(n*sqrt(rho)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceParams {
    n: usize,
    k: usize,
    rho: f64,
    c: f64,
    eta: f64,
}

impl HardInstanceParams {
    pub fn new(n: usize, k: usize, rho: f64, c: f64) -> Result<Self, BlockError> {
        assert!(n >= 1 && k >= 1, "n and k must be positive");
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(BlockError::InvalidRho(rho));
        }
        assert!(c > 0.0, "amplitude constant must be positive");
        let eta = (k as f64 / (n as f64 * rho.sqrt())).min(1.0);
        if c * eta > 0.5 {
            return Err(BlockError::AmplitudeTooLarge { c_eta: c * eta });
        }
        Ok(Self { n, k, rho, c, eta })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Map a binary pattern to the two-valued block matrix
/// `rho * (1/2 * J + c*eta*(2B - J))`: entries are `rho*(1/2 + c*eta)` where
/// `B = 1` and `rho*(1/2 - c*eta)` where `B = 0`.
pub fn q_matrix(b: &BinarySymMatrix, params: &HardInstanceParams) -> Result<BlockMatrix, BlockError> {
    if b.k() != params.k() {
        return Err(BlockError::DimensionMismatch {
            left: b.k(),
            right: params.k(),
        });
    }
    let ce = params.c() * params.eta();
    if ce > 0.5 {
        return Err(BlockError::AmplitudeTooLarge { c_eta: ce });
    }
    let hi = params.rho() * (0.5 + ce);
    let lo = params.rho() * (0.5 - ce);
    let k = b.k();
    let mut mat = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            mat.set(i, j, if b.get(i, j) == 1 { hi } else { lo });
        }
    }
    BlockMatrix::from_square(mat, params.rho())
}

/// Planted-partition matrix: `p` on the diagonal (within-group), `q` off the
/// diagonal (between groups). The declared bound is `p`.
pub fn planted_partition(k: usize, p: f64, q: f64) -> Result<BlockMatrix, BlockError> {
    if !(q >= 0.0 && q <= p && p <= 1.0 && p > 0.0) {
        return Err(BlockError::InvalidProbabilities { p, q });
    }
    let mut mat = SquareMatrix::constant(k, q);
    for i in 0..k {
        mat.set(i, i, p);
    }
    BlockMatrix::from_square(mat, p)
}

/// Least common multiple, used to put two block matrices on a common
/// refinement before comparing them.
pub fn lcm(a: usize, b: usize) -> usize {
    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    a / gcd(a, b) * b
}

/// Blow both matrices up to `lcm(a.k, b.k)` blocks. Exact for equal-block
/// step graphons: neither induced graphon changes.
pub fn common_refinement(a: &BlockMatrix, b: &BlockMatrix) -> Result<(BlockMatrix, BlockMatrix), BlockError> {
    let l = lcm(a.k(), b.k());
    Ok((a.blow_up(l / a.k())?, b.blow_up(l / b.k())?))
}

// ---------------------------------------------------------------------------
// Matrix file I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Block(#[from] BlockError),
}

#[derive(Serialize, Deserialize)]
struct BlockMatrixJson {
    k: usize,
    rho: f64,
    entries: Vec<Vec<f64>>,
}

/// CSV form: `k` lines of `k` comma-separated decimals. Values are printed
/// with Rust's shortest round-trip formatting, so a write/read cycle
/// reproduces them bit-exactly. CSV carries no `rho`; the reader infers the
/// bound as the maximum entry (1.0 for an all-zero matrix).
pub fn matrix_to_csv(m: &BlockMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.k() {
        let row: Vec<String> = (0..m.k()).map(|j| format!("{}", m.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(s: &str) -> Result<BlockMatrix, MatrixIoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| MatrixIoError::Parse {
                    line: ln + 1,
                    msg: format!("bad number {tok:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MatrixIoError::Parse {
            line: 0,
            msg: "empty matrix".into(),
        });
    }
    let max = rows
        .iter()
        .flat_map(|r| r.iter().cloned())
        .fold(f64::NEG_INFINITY, f64::max);
    let rho = if max > 0.0 { max } else { 1.0 };
    Ok(BlockMatrix::new(&rows, rho)?)
}

pub fn matrix_to_json(m: &BlockMatrix) -> String {
    let j = BlockMatrixJson {
        k: m.k(),
        rho: m.rho(),
        entries: m.matrix().rows(),
    };
    serde_json::to_string(&j).expect("serializing a matrix cannot fail")
}

pub fn matrix_from_json(s: &str) -> Result<BlockMatrix, MatrixIoError> {
    let j: BlockMatrixJson = serde_json::from_str(s)?;
    if j.entries.len() != j.k {
        return Err(MatrixIoError::Parse {
            line: 0,
            msg: format!("declared k = {} but got {} rows", j.k, j.entries.len()),
        });
    }
    Ok(BlockMatrix::new(&j.entries, j.rho)?)
}

/// Load a matrix from a path, dispatching on the `.json` / `.csv` extension
/// (anything that is not `.json` is treated as CSV).
pub fn matrix_from_path(path: &std::path::Path) -> Result<BlockMatrix, MatrixIoError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        matrix_from_json(&text)
    } else {
        matrix_from_csv(&text)
    }
}

pub fn matrix_to_path(m: &BlockMatrix, path: &std::path::Path) -> Result<(), MatrixIoError> {
    let text = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        matrix_to_json(m)
    } else {
        matrix_to_csv(m)
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The two 3x3 patterns that are L2-far apart but induce the same graphon
    /// after relabeling blocks. Used throughout the metric tests.
    pub(crate) fn pattern_a() -> BlockMatrix {
        BlockMatrix::new(
            &[
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 0.0, 1.0],
            ],
            1.0,
        )
        .unwrap()
    }

    pub(crate) fn pattern_b() -> BlockMatrix {
        BlockMatrix::new(
            &[
                vec![1.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn construct_1x1() {
        let m = BlockMatrix::new(&[vec![0.5]], 1.0).unwrap();
        assert_eq!(m.k(), 1);
        assert_eq!(m.get(0, 0), 0.5);
    }

    #[test]
    fn construct_pattern_a() {
        let m = pattern_a();
        assert_eq!(m.k(), 3);
        assert_eq!(m.get(0, 2), 1.0);
    }

    #[test]
    fn reject_out_of_range() {
        let err = BlockMatrix::new(&[vec![0.2, 0.6], vec![0.6, 0.2]], 0.5).unwrap_err();
        assert!(matches!(err, BlockError::OutOfRange { .. }));
    }

    #[test]
    fn reject_asymmetric() {
        let err = BlockMatrix::new(&[vec![0.1, 0.2], vec![0.3, 0.1]], 1.0).unwrap_err();
        assert!(matches!(err, BlockError::AsymmetricInput { .. }));
    }

    #[test]
    fn reject_bad_rho() {
        assert!(matches!(
            BlockMatrix::new(&[vec![0.0]], 0.0).unwrap_err(),
            BlockError::InvalidRho(_)
        ));
        assert!(matches!(
            BlockMatrix::new(&[vec![0.0]], 1.5).unwrap_err(),
            BlockError::InvalidRho(_)
        ));
    }

    #[test]
    fn reject_ragged() {
        let err = BlockMatrix::new(&[vec![0.1, 0.2], vec![0.1]], 1.0).unwrap_err();
        assert!(matches!(err, BlockError::BadShape { .. }));
    }

    #[test]
    fn symmetrizes_within_tolerance() {
        let eps = 4e-13;
        let m = BlockMatrix::new(&[vec![0.2, 0.5 + eps], vec![0.5 - eps, 0.2]], 1.0).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!((m.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalized_l2_constants() {
        let ones = BlockMatrix::constant(3, 1.0, 1.0).unwrap();
        assert_eq!(ones.normalized_l2(), 1.0);
        let zeros = BlockMatrix::constant(4, 0.0, 1.0).unwrap();
        assert_eq!(zeros.normalized_l2(), 0.0);
    }

    #[test]
    fn normalized_l2_of_pattern_difference_is_two_thirds() {
        let d = l2_distance(pattern_a().matrix(), pattern_b().matrix()).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn q_matrix_all_ones() {
        // rho*(1/2 + c*eta) with rho = 0.5, c = 0.25, eta = 1 is 0.375.
        let b = BinarySymMatrix::new(&[vec![1, 1], vec![1, 1]]).unwrap();
        let params = HardInstanceParams::new(1, 2, 0.5, 0.25).unwrap();
        assert_eq!(params.eta(), 1.0);
        let q = q_matrix(&b, &params).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((q.get(i, j) - 0.375).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn q_matrix_identity_pattern() {
        let b = BinarySymMatrix::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        let params = HardInstanceParams::new(1, 2, 1.0, 0.25).unwrap();
        let q = q_matrix(&b, &params).unwrap();
        assert!((q.get(0, 0) - 0.75).abs() < 1e-15);
        assert!((q.get(0, 1) - 0.25).abs() < 1e-15);
        assert!((q.get(1, 0) - 0.25).abs() < 1e-15);
        assert!((q.get(1, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn eta_formula() {
        let params = HardInstanceParams::new(10, 5, 0.25, 0.25).unwrap();
        assert_eq!(params.eta(), 1.0);
        let params = HardInstanceParams::new(100, 10, 0.04, 0.1).unwrap();
        assert!((params.eta() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_matrix_rejects_large_amplitude() {
        assert!(matches!(
            HardInstanceParams::new(1, 2, 1.0, 0.75).unwrap_err(),
            BlockError::AmplitudeTooLarge { .. }
        ));
    }

    #[test]
    fn q_matrix_value_gap_and_bounds() {
        let b = BinarySymMatrix::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        for &(rho, c) in &[(0.5, 0.25), (1.0, 0.5), (0.125, 0.1)] {
            let params = HardInstanceParams::new(3, 2, rho, c).unwrap();
            let q = q_matrix(&b, &params).unwrap();
            let hi = q.matrix().max_entry();
            let lo = q.matrix().min_entry();
            assert!(lo >= 0.0 && hi <= rho);
            let gap = 2.0 * rho * c * params.eta();
            assert!((hi - lo - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_partition_basics() {
        let er = planted_partition(2, 0.3, 0.3).unwrap();
        assert_eq!(er.get(0, 0), 0.3);
        assert_eq!(er.get(0, 1), 0.3);
        assert_eq!(er.rho(), 0.3);

        let pp = planted_partition(3, 0.5, 0.1).unwrap();
        assert_eq!(pp.get(1, 1), 0.5);
        assert_eq!(pp.get(0, 2), 0.1);

        assert!(matches!(
            planted_partition(2, 0.1, 0.5).unwrap_err(),
            BlockError::InvalidProbabilities { .. }
        ));
    }

    #[test]
    fn blow_up_identity_and_replication() {
        let a = BlockMatrix::new(&[vec![0.25]], 1.0).unwrap();
        let same = a.blow_up(1).unwrap();
        assert_eq!(same, a);
        let big = a.blow_up(3).unwrap();
        assert_eq!(big.k(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(big.get(i, j), 0.25);
            }
        }
    }

    #[test]
    fn blow_up_preserves_norm() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k = rng.gen_range(1..=5);
            let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
            let mut sym = rows.clone();
            for i in 0..k {
                for j in 0..k {
                    sym[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
                }
            }
            let a = BlockMatrix::new(&sym, 1.0).unwrap();
            for m in 1..=8 {
                let b = a.blow_up(m).unwrap();
                assert!((b.normalized_l2() - a.normalized_l2()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_pp_equals_constant() {
        let pp = planted_partition(4, 0.3, 0.3).unwrap();
        let c = BlockMatrix::constant(4, 0.3, 0.3).unwrap();
        assert_eq!(l2_distance(pp.matrix(), c.matrix()).unwrap(), 0.0);
    }

    #[test]
    fn binary_matrix_validation() {
        assert!(BinarySymMatrix::new(&[vec![1, 0], vec![0, 1]]).is_ok());
        assert!(matches!(
            BinarySymMatrix::new(&[vec![1, 2], vec![2, 1]]).unwrap_err(),
            BlockError::NotBinary { .. }
        ));
        assert!(matches!(
            BinarySymMatrix::new(&[vec![1, 0], vec![1, 1]]).unwrap_err(),
            BlockError::AsymmetricInput { .. }
        ));
    }

    #[test]
    fn bitstring_round_trip() {
        let b = BinarySymMatrix::new(&[vec![1, 0, 1], vec![0, 0, 1], vec![1, 1, 1]]).unwrap();
        let s = b.to_bitstring();
        assert_eq!(s.len(), 9);
        let back = BinarySymMatrix::from_bitstring(3, &s).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = BlockMatrix::new(
            &[
                vec![0.1 + 0.2, 1.0 / 3.0],
                vec![1.0 / 3.0, 0.7654321e-3],
            ],
            1.0,
        )
        .unwrap();
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.get(i, j), back.get(i, j));
            }
        }
    }

    #[test]
    fn json_round_trip_preserves_rho() {
        let m = BlockMatrix::new(&[vec![0.25, 0.125], vec![0.125, 0.0625]], 0.5).unwrap();
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(back.rho(), 0.5);
        assert_eq!(back.get(0, 1), 0.125);
    }

    #[test]
    fn csv_all_zero_gets_unit_rho() {
        let m = BlockMatrix::constant(2, 0.0, 0.25).unwrap();
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(back.rho(), 1.0);
    }

    #[test]
    fn common_refinement_puts_matrices_on_lcm_blocks() {
        let a = BlockMatrix::constant(2, 0.5, 1.0).unwrap();
        let b = BlockMatrix::constant(3, 0.25, 1.0).unwrap();
        let (ar, br) = common_refinement(&a, &b).unwrap();
        assert_eq!(ar.k(), 6);
        assert_eq!(br.k(), 6);
        assert!((l2_distance(ar.matrix(), br.matrix()).unwrap() - 0.25).abs() < 1e-15);
    }
}
