//! Small dense complex linear algebra: LU with partial pivoting, one-sided
//! Jacobi SVD, numerical rank with gap detection, least squares.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{norm2, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(CMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        let mut t = self.transpose();
        t.data.iter_mut().for_each(|z| *z = z.conj());
        t
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Relative pivot threshold for declaring a matrix singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// LU factorization `PA = LU` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    swaps: usize,
    singular: bool,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let scale = (0..n)
            .map(|r| a.row(r).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = scale == 0.0 && n > 0;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|r| (r, lu[(r, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= PIVOT_TOL * scale {
                singular = true;
            }
            if p != k {
                for c in 0..n {
                    lu.data.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            if pivot == ZERO {
                continue;
            }
            for r in k + 1..n {
                let f = lu[(r, k)] / pivot;
                lu[(r, k)] = f;
                if f == ZERO {
                    continue;
                }
                for c in k + 1..n {
                    let v = lu[(k, c)];
                    lu[(r, c)] -= f * v;
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            swaps,
            singular,
        })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> C64 {
        let n = self.lu.rows;
        let mut d = if self.swaps.is_multiple_of(2) { ONE } else { -ONE };
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        if self.singular {
            return Err(Error::Singular);
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }
}

pub fn lu_solve(a: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    Lu::new(a)?.solve(b)
}

/// Determinant via LU; exactly singular matrices give 0.
pub fn determinant(a: &CMatrix) -> Result<C64> {
    Ok(Lu::new(a)?.determinant())
}

/// Thin SVD `A = U diag(s) V^H`; `U` is `m x p`, `V` is `n x p`, `p = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix, returning
/// the orthogonalized columns (as rows of `work`) and the accumulated
/// right rotations (rows of `vt` are columns of V).
fn hestenes(a: &CMatrix) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let n = a.cols;
    let mut cols: Vec<Vec<C64>> = (0..n).map(|c| a.column(c)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|c| {
            let mut v = vec![ZERO; n];
            v[c] = ONE;
            v
        })
        .collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (ap, aq) in split_pair(&mut cols, p, q) {
                    let bq = *aq * phase;
                    let np = *ap * c - bq * s;
                    *aq = *ap * s + bq * c;
                    *ap = np;
                }
                for (vp, vq) in split_pair(&mut vcols, p, q) {
                    let bq = *vq * phase;
                    let np = *vp * c - bq * s;
                    *vq = *vp * s + bq * c;
                    *vp = np;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, vcols)
}

fn split_pair(v: &mut [Vec<C64>], p: usize, q: usize) -> impl Iterator<Item = (&mut C64, &mut C64)> {
    debug_assert!(p < q);
    let (lo, hi) = v.split_at_mut(q);
    lo[p].iter_mut().zip(hi[0].iter_mut())
}

fn svd_tall(a: &CMatrix) -> Svd {
    let (m, n) = (a.rows, a.cols);
    let (cols, vcols) = hestenes(a);
    let mut order: Vec<(usize, f64)> = cols.iter().map(|c| norm2(c)).enumerate().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut u = CMatrix::zeros(m, n);
    let mut v = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, &(src, s)) in order.iter().enumerate() {
        values.push(s);
        for r in 0..m {
            u[(r, j)] = if s > 0.0 { cols[src][r] / s } else { ZERO };
        }
        for r in 0..n {
            v[(r, j)] = vcols[src][r];
        }
    }
    Svd { values, u, v }
}

/// Singular values (descending) with thin factors.
pub fn svd(a: &CMatrix) -> Svd {
    if a.rows >= a.cols {
        svd_tall(a)
    } else {
        let s = svd_tall(&a.adjoint());
        Svd {
            values: s.values,
            u: s.v,
            v: s.u,
        }
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).values
}

/// Rank decision rule: an absolute floor relative to `sigma_1` and a
/// minimum gap ratio between consecutive singular values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankRule {
    pub floor_rel: f64,
    pub min_gap: f64,
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule {
            floor_rel: 1e-8,
            min_gap: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `sigma_rank / sigma_{rank+1}`; infinite when the rank is full.
    pub gap_ratio: f64,
    pub threshold_used: f64,
    /// No cut satisfied both the floor and the gap requirement.
    pub ambiguous: bool,
}

/// `values` must be sorted descending.
pub fn numerical_rank(values: &[f64], rule: RankRule) -> RankReport {
    let count = values.len();
    let sigma1 = values.first().copied().unwrap_or(0.0);
    let floor = rule.floor_rel * sigma1;
    let gap_at = |r: usize| -> f64 {
        if r == 0 {
            return 0.0;
        }
        if r == count {
            return f64::INFINITY;
        }
        if values[r] == 0.0 {
            f64::INFINITY
        } else {
            values[r - 1] / values[r]
        }
    };
    let passes = |r: usize| values[r - 1] >= floor && values[r - 1] > 0.0 && gap_at(r) >= rule.min_gap;
    let found = (1..=count).rev().find(|&r| passes(r));
    let (rank, ambiguous) = match found {
        Some(r) => (r, false),
        None if sigma1 == 0.0 => (0, false),
        None => (values.iter().filter(|&&s| s >= floor).count(), true),
    };
    RankReport {
        singular_values: values.to_vec(),
        rank,
        gap_ratio: gap_at(rank),
        threshold_used: floor,
        ambiguous,
    }
}

pub fn matrix_rank(a: &CMatrix, rule: RankRule) -> RankReport {
    numerical_rank(&singular_values(a), rule)
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub coefficients: Vec<C64>,
    /// `||Ax - b|| / ||b||`, 0 when `b = 0`.
    pub relative_residual: f64,
    pub rank: RankReport,
}

/// Minimum-norm least squares through the truncated SVD pseudoinverse.
pub fn least_squares(a: &CMatrix, b: &[C64], rule: RankRule) -> Result<LeastSquares> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            got: b.len(),
        });
    }
    let s = svd(a);
    let rank = numerical_rank(&s.values, rule);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(LeastSquares {
            coefficients: vec![ZERO; a.cols],
            relative_residual: 0.0,
            rank,
        });
    }
    let mut x = vec![ZERO; a.cols];
    for j in 0..rank.rank {
        let proj: C64 = (0..a.rows).map(|r| s.u[(r, j)].conj() * b[r]).sum::<C64>() / s.values[j];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += s.v[(i, j)] * proj;
        }
    }
    let ax = a.matvec(&x)?;
    let res: Vec<C64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    Ok(LeastSquares {
        coefficients: x,
        relative_residual: norm2(&res) / bnorm,
        rank,
    })
}
