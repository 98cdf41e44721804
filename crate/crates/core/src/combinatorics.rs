//! Exact integer invariants of a tensor format: boundary/concise
//! classification, the number of singular tuples of a generic tensor, and
//! the dimensions of the critical space and of the span of the singular
//! tuples.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::tensor::Format;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormatClass {
    pub is_sub_boundary: bool,
    pub is_boundary: bool,
    pub is_concise: bool,
    /// `1 + sum_{i<k} (n_i - 1)`: the last-factor size making the format boundary.
    pub boundary_threshold: usize,
    /// Product of all dimensions except the largest one.
    pub concise_threshold: usize,
}

impl FormatClass {
    pub fn label(&self) -> &'static str {
        match (self.is_boundary, self.is_sub_boundary, self.is_concise) {
            (true, _, _) => "boundary",
            (false, true, _) => "sub-boundary",
            (false, false, true) => "non-sub-boundary, concise",
            (false, false, false) => "non-concise",
        }
    }
}

pub fn classify(format: &Format) -> FormatClass {
    let dims = format.dims();
    let k = dims.len();
    let excess: usize = dims.iter().map(|n| n - 1).sum();
    let mut sub = true;
    let mut boundary = false;
    let mut concise = true;
    for (i, &n) in dims.iter().enumerate() {
        let bound = 1 + excess - (n - 1);
        sub &= n <= bound;
        boundary |= n == bound;
        let others = dims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(1usize, |acc, (_, &m)| acc.saturating_mul(m));
        concise &= n <= others;
    }
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    FormatClass {
        is_sub_boundary: sub,
        is_boundary: boundary,
        is_concise: concise,
        boundary_threshold: 1 + dims[..k - 1].iter().map(|n| n - 1).sum::<usize>(),
        concise_threshold: sorted[..k - 1].iter().product(),
    }
}

/// Polynomial in `k` variables with exponents bounded by `(n_1-1, ..., n_k-1)`.
/// Products drop every monomial leaving the box.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPoly {
    bounds: Vec<usize>,
    strides: Vec<usize>,
    coeffs: Vec<BigInt>,
}

impl TruncatedPoly {
    /// `bounds[i]` is the number of admissible exponents `0..bounds[i]` of variable `i`.
    pub fn zero(bounds: &[usize]) -> Self {
        let mut strides = vec![1; bounds.len()];
        let mut total = 1;
        for i in (0..bounds.len()).rev() {
            strides[i] = total;
            total *= bounds[i];
        }
        TruncatedPoly {
            bounds: bounds.to_vec(),
            strides,
            coeffs: vec![BigInt::zero(); total],
        }
    }

    pub fn one(bounds: &[usize]) -> Self {
        let mut p = Self::zero(bounds);
        p.coeffs[0] = BigInt::one();
        p
    }

    /// `sum_{j in vars} h_j`.
    pub fn linear_sum(bounds: &[usize], vars: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::zero(bounds);
        for v in vars {
            if bounds[v] > 1 {
                p.coeffs[p.strides[v]] += 1;
            }
        }
        p
    }

    fn exponents(&self, mut pos: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let e = pos / s;
                pos %= s;
                e
            })
            .collect()
    }

    pub fn coeff(&self, exps: &[usize]) -> BigInt {
        if exps.iter().zip(&self.bounds).any(|(e, b)| e >= b) {
            return BigInt::zero();
        }
        let pos: usize = exps.iter().zip(&self.strides).map(|(e, s)| e * s).sum();
        self.coeffs[pos].clone()
    }

    pub fn set_coeff(&mut self, exps: &[usize], c: BigInt) {
        let pos: usize = exps.iter().zip(&self.strides).map(|(e, s)| e * s).sum();
        self.coeffs[pos] = c;
    }

    pub fn add_assign(&mut self, other: &TruncatedPoly) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// Multiplies by `h_var^power`.
    pub fn shift(&self, var: usize, power: usize) -> Self {
        let mut out = Self::zero(&self.bounds);
        for (pos, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut e = self.exponents(pos);
            e[var] += power;
            if e[var] < self.bounds[var] {
                out.set_coeff(&e, c.clone());
            }
        }
        out
    }

    fn nonzero_terms(&self) -> Vec<(Vec<usize>, &BigInt)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(pos, c)| (self.exponents(pos), c))
            .collect()
    }

    pub fn mul(&self, other: &TruncatedPoly) -> Self {
        assert_eq!(self.bounds, other.bounds);
        let mut out = Self::zero(&self.bounds);
        let lhs = self.nonzero_terms();
        let rhs = other.nonzero_terms();
        for (ea, ca) in &lhs {
            'terms: for (eb, cb) in &rhs {
                let mut pos = 0;
                for i in 0..ea.len() {
                    let e = ea[i] + eb[i];
                    if e >= self.bounds[i] {
                        continue 'terms;
                    }
                    pos += e * self.strides[i];
                }
                out.coeffs[pos] += *ca * *cb;
            }
        }
        out
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut out = Self::one(&self.bounds);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }
}

/// Number of singular tuples of a generic tensor: the coefficient of
/// `h_1^{n_1-1} ... h_k^{n_k-1}` in
/// `prod_i sum_{j=0}^{n_i-1} hh_i^{n_i-1-j} h_i^j` with `hh_i = sum_{j != i} h_j`.
pub fn ed_degree(format: &Format) -> BigInt {
    let dims = format.dims();
    let k = dims.len();
    let mut product = TruncatedPoly::one(dims);
    for (i, &n) in dims.iter().enumerate() {
        let hat = TruncatedPoly::linear_sum(dims, (0..k).filter(|&j| j != i));
        let mut factor = TruncatedPoly::zero(dims);
        let mut hat_pow = TruncatedPoly::one(dims);
        // hat_pow = hat^(n-1-j) built from j = n-1 down to 0
        for j in (0..n).rev() {
            factor.add_assign(&hat_pow.shift(i, j));
            if j > 0 {
                hat_pow = hat_pow.mul(&hat);
            }
        }
        product = product.mul(&factor);
    }
    let corner: Vec<usize> = dims.iter().map(|n| n - 1).collect();
    product.coeff(&corner)
}

pub fn ed_degree_u64(format: &Format) -> u64 {
    u64::try_from(ed_degree(format)).expect("ed degree fits u64 at desk scale")
}

fn binom2(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Affine dimension of the critical space of a generic tensor.
pub fn critical_space_dim(format: &Format) -> usize {
    let mut dims = format.dims().to_vec();
    dims.sort_unstable();
    let k = dims.len();
    let d: usize = dims[..k - 1].iter().product();
    let low: usize = dims[..k - 1].iter().map(|&n| binom2(n)).sum();
    if dims[k - 1] <= d {
        format.total_size() - low - binom2(dims[k - 1])
    } else {
        binom2(d + 1) - low
    }
}

/// Where an expected span dimension comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanSource {
    /// Sub-boundary: the span is the whole projective critical space.
    SubBoundary,
    /// Closed formula for `(2, ..., 2, l + 2)`.
    TwoByTwoFormula,
    /// Settled by exact symbolic computation rather than cohomology
    /// (formats `(2,3,5)` and `(2,3,6)`).
    Symbolic,
    /// Tabulated value for an order-three or `(2, ..., 2, n)` format.
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExpectedSpan {
    pub dim: usize,
    pub source: SpanSource,
}

/// Order-three rows: `(n1, n2, n_B, stabilized span dim, delta, ed)`.
pub const ORDER_THREE_TABLE: [(usize, usize, usize, usize, usize, u64); 18] = [
    (2, 2, 3, 6, 0, 8),
    (2, 3, 4, 13, 0, 18),
    (2, 4, 5, 22, 0, 32),
    (2, 5, 6, 33, 0, 50),
    (2, 6, 7, 46, 0, 72),
    (3, 3, 5, 29, 1, 61),
    (3, 4, 6, 50, 1, 148),
    (3, 5, 7, 76, 1, 295),
    (4, 4, 7, 87, 1, 480),
    (4, 5, 8, 133, 2, 1220),
    (4, 6, 9, 188, 3, 2624),
    (4, 7, 10, 252, 3, 5012),
    (5, 5, 9, 204, 3, 3881),
    (5, 6, 10, 289, 4, 10166),
    (5, 7, 11, 388, 4, 23051),
    (6, 6, 11, 410, 5, 31976),
    (6, 7, 12, 551, 6, 85526),
    (6, 8, 13, 712, 7, 201536),
];

/// Rows for `(2, ..., 2, n)` with `l` twos: `(l, first n, span dims for
/// n = first, first+1, ...; the last value holds for all larger n, ed)`.
pub const BINARY_PREFIX_TABLE: [(usize, usize, &[usize], u64); 5] = [
    (2, 3, &[6], 8),
    (3, 4, &[22, 23], 48),
    (4, 5, &[65, 76], 384),
    (5, 6, &[171, 197, 222, 237], 3840),
    (6, 7, &[420, 477, 533, 588, 642, 695, 722], 46080),
];

fn two_by_two_formula(l: usize) -> usize {
    let l = l as i64;
    let pow = |b: i64, e: i64| b.pow(e as u32);
    let correction = (pow(l - 1, l) - pow(l - 2, l) * (l + 2)).max(0);
    (pow(2, l) * (l + 2) - (l + 1) - (l + 2) * (l + 1) / 2 - correction) as usize
}

pub fn expected_span(format: &Format) -> Option<ExpectedSpan> {
    let class = classify(format);
    if class.is_sub_boundary {
        return Some(ExpectedSpan {
            dim: critical_space_dim(format) - 1,
            source: SpanSource::SubBoundary,
        });
    }
    let mut dims = format.dims().to_vec();
    dims.sort_unstable();
    let k = dims.len();
    let n = dims[k - 1];
    let binary_prefix = dims[..k - 1].iter().all(|&d| d == 2);
    if binary_prefix && n == k + 1 {
        return Some(ExpectedSpan {
            dim: two_by_two_formula(k - 1),
            source: SpanSource::TwoByTwoFormula,
        });
    }
    if k == 3 && dims[0] == 2 && dims[1] == 3 && (n == 5 || n == 6) {
        return Some(ExpectedSpan {
            dim: 13,
            source: SpanSource::Symbolic,
        });
    }
    if k == 3 {
        for &(a, b, nb, dim, delta, _) in ORDER_THREE_TABLE.iter() {
            if dims[0] == a && dims[1] == b && n >= nb + delta {
                return Some(ExpectedSpan {
                    dim,
                    source: SpanSource::Table,
                });
            }
        }
    }
    if binary_prefix {
        for &(l, first, values, _) in BINARY_PREFIX_TABLE.iter() {
            if l == k - 1 && n >= first {
                let dim = values[(n - first).min(values.len() - 1)];
                return Some(ExpectedSpan {
                    dim,
                    source: SpanSource::Table,
                });
            }
        }
    }
    None
}

pub fn expected_span_dim(format: &Format) -> Option<usize> {
    expected_span(format).map(|e| e.dim)
}
