//! Dense complex tensors of a fixed format.
//!
//! Entries are stored in row-major order: the multi-index `(j_1, ..., j_k)`
//! maps to the linear position `sum_i j_i * stride_i` with the last index
//! varying fastest. All indices are 0-based.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Plain bilinear dot product `sum a_i b_i` (no conjugation).
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_max(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// The dimension vector `(n_1, ..., n_k)` of a tensor space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Format {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl Format {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidFormat(format!(
                "need at least 2 factors, got {}",
                dims.len()
            )));
        }
        if let Some(bad) = dims.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidFormat(format!(
                "every factor dimension must be at least 2, got {bad} in {dims:?}"
            )));
        }
        let mut strides = vec![1usize; dims.len()];
        let mut total = 1usize;
        for i in (0..dims.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(dims[i])
                .ok_or_else(|| Error::InvalidFormat(format!("total size of {dims:?} overflows")))?;
        }
        Ok(Format {
            dims,
            strides,
            total,
        })
    }

    /// Parses `"n1,n2,...,nk"`.
    pub fn parse(s: &str) -> Result<Self> {
        let dims = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad dimension {t:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Format::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn total_size(&self) -> usize {
        self.total
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of multi-indices over the first `k - 1` factors.
    pub fn prefix_count(&self) -> usize {
        self.total / self.dims[self.dims.len() - 1]
    }

    /// The same format with the last factor replaced by `n`.
    pub fn with_last(&self, n: usize) -> Result<Self> {
        let mut dims = self.dims.clone();
        *dims.last_mut().unwrap() = n;
        Format::new(dims)
    }

    pub fn linear_index(&self, index: &MultiIndex) -> Result<usize> {
        index.check(self)?;
        Ok(index
            .0
            .iter()
            .zip(&self.strides)
            .map(|(j, s)| j * s)
            .sum())
    }

    pub fn multi_index(&self, mut pos: usize) -> MultiIndex {
        let mut idx = vec![0; self.dims.len()];
        for (i, s) in self.strides.iter().enumerate() {
            idx[i] = pos / s;
            pos %= s;
        }
        MultiIndex(idx)
    }

    /// Multi-index over the first `k - 1` factors for a prefix position
    /// `0..prefix_count()`, in row-major order.
    pub fn prefix_index(&self, mut pos: usize) -> MultiIndex {
        let k = self.dims.len();
        let mut idx = vec![0; k - 1];
        for i in (0..k - 1).rev() {
            idx[i] = pos % self.dims[i];
            pos /= self.dims[i];
        }
        MultiIndex(idx)
    }

    pub fn prefix_position(&self, prefix: &MultiIndex) -> Result<usize> {
        let k = self.dims.len();
        if prefix.0.len() != k - 1 || prefix.0.iter().zip(&self.dims).any(|(j, n)| j >= n) {
            return Err(Error::IndexOutOfRange {
                index: prefix.0.clone(),
                dims: self.dims[..k - 1].to_vec(),
            });
        }
        Ok(prefix
            .0
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (j, n)| acc * n + j))
    }

    fn check_vectors(&self, x: &[Vec<C64>], skip: &[usize]) -> Result<()> {
        if x.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: x.len(),
            });
        }
        for (i, (v, &n)) in x.iter().zip(&self.dims).enumerate() {
            if !skip.contains(&i) && v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A multi-index `(j_1, ..., j_m)`, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn check(&self, format: &Format) -> Result<()> {
        if self.0.len() != format.order() || self.0.iter().zip(format.dims()).any(|(j, n)| j >= n) {
            return Err(Error::IndexOutOfRange {
                index: self.0.clone(),
                dims: format.dims().to_vec(),
            });
        }
        Ok(())
    }
}

/// Contracts axis `axis` of a row-major array with `v`, removing the axis.
fn contract_axis(data: &[C64], dims: &[usize], axis: usize, v: &[C64]) -> (Vec<C64>, Vec<usize>) {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for (s, vs) in v.iter().enumerate().take(n) {
            let src = &data[(o * n + s) * inner..(o * n + s + 1) * inner];
            for (d, a) in dst.iter_mut().zip(src) {
                *d += a * vs;
            }
        }
    }
    let mut new_dims = dims.to_vec();
    new_dims.remove(axis);
    (out, new_dims)
}

/// Dense complex tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct CTensor {
    format: Format,
    data: Vec<C64>,
}

impl CTensor {
    pub fn zeros(format: &Format) -> Self {
        CTensor {
            data: vec![C64::new(0.0, 0.0); format.total_size()],
            format: format.clone(),
        }
    }

    pub fn from_vec(format: &Format, data: Vec<C64>) -> Result<Self> {
        if data.len() != format.total_size() {
            return Err(Error::DimensionMismatch {
                expected: format.total_size(),
                got: data.len(),
            });
        }
        Ok(CTensor {
            format: format.clone(),
            data,
        })
    }

    /// Entries `z_J = prod_i x_{i, j_i}`.
    pub fn rank_one(x: &[Vec<C64>]) -> Result<Self> {
        let format = Format::new(x.iter().map(Vec::len).collect())?;
        let mut data = vec![C64::new(1.0, 0.0)];
        for v in x {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for a in &data {
                next.extend(v.iter().map(|b| a * b));
            }
            data = next;
        }
        Ok(CTensor { format, data })
    }

    /// I.i.d. entries with independent standard normal real and imaginary parts.
    pub fn random(format: &Format, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(format, &mut rng)
    }

    pub fn random_with<R: rand::Rng>(format: &Format, rng: &mut R) -> Self {
        let data = (0..format.total_size())
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
            .collect();
        CTensor {
            format: format.clone(),
            data,
        }
    }

    pub fn format(&self) -> &Format {
        &self.format
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, index: &MultiIndex) -> Result<C64> {
        Ok(self.data[self.format.linear_index(index)?])
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn scale(&self, c: C64) -> Self {
        CTensor {
            format: self.format.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &CTensor, b: C64) -> Result<Self> {
        self.same_format(other)?;
        Ok(CTensor {
            format: self.format.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    fn same_format(&self, other: &CTensor) -> Result<()> {
        if self.format != other.format {
            return Err(Error::FormatMismatch(
                self.format.dims().to_vec(),
                other.format.dims().to_vec(),
            ));
        }
        Ok(())
    }

    /// Contracts every axis not listed in `keep` (ascending) with the
    /// corresponding vector of `x`.
    fn contract_except(&self, x: &[Vec<C64>], keep: &[usize]) -> Vec<C64> {
        let mut data = self.data.clone();
        let mut dims = self.format.dims().to_vec();
        for axis in (0..self.format.order()).rev() {
            if keep.contains(&axis) {
                continue;
            }
            let (d, n) = contract_axis(&data, &dims, axis, &x[axis]);
            data = d;
            dims = n;
        }
        data
    }

    /// `s`-th entry: sum over multi-indices with `j_skip = s` of
    /// `t_J * prod_{l != skip} x_{l, j_l}`. The vector `x[skip]` is ignored.
    pub fn contract(&self, x: &[Vec<C64>], skip: usize) -> Result<Vec<C64>> {
        if skip >= self.format.order() {
            return Err(Error::DimensionMismatch {
                expected: self.format.order(),
                got: skip,
            });
        }
        self.format.check_vectors(x, &[skip])?;
        Ok(self.contract_except(x, &[skip]))
    }

    /// The `n_a x n_b` matrix (row-major) of second mixed contractions,
    /// i.e. the Hessian block of the multilinear form in `(x_a, x_b)`.
    pub fn contract_pair(&self, x: &[Vec<C64>], a: usize, b: usize) -> Result<Vec<C64>> {
        assert!(a != b);
        self.format.check_vectors(x, &[a, b])?;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m = self.contract_except(x, &[lo, hi]);
        if a < b {
            return Ok(m);
        }
        let (nl, nh) = (self.format.dims()[lo], self.format.dims()[hi]);
        let mut t = vec![C64::new(0.0, 0.0); m.len()];
        for r in 0..nl {
            for c in 0..nh {
                t[c * nl + r] = m[r * nh + c];
            }
        }
        Ok(t)
    }

    /// The k-linear form `sum_J t_J prod_i x_{i, j_i}`.
    pub fn multilinear_value(&self, x: &[Vec<C64>]) -> Result<C64> {
        self.format.check_vectors(x, &[])?;
        Ok(self.contract_except(x, &[])[0])
    }

    /// Bilinear coordinate sum `sum_J t_J s_J`.
    pub fn frobenius_inner(&self, other: &CTensor) -> Result<C64> {
        self.same_format(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// The fiber `(t_{prefix, s})_s` along the last factor.
    pub fn slice_fiber(&self, prefix: &MultiIndex) -> Result<&[C64]> {
        let pos = self.format.prefix_position(prefix)?;
        let n = *self.format.dims().last().unwrap();
        Ok(&self.data[pos * n..(pos + 1) * n])
    }

    /// Fiber by prefix position (row-major over the first `k - 1` factors).
    pub fn fiber_at(&self, pos: usize) -> &[C64] {
        let n = *self.format.dims().last().unwrap();
        &self.data[pos * n..(pos + 1) * n]
    }

    /// Zero-pads the last factor to `n >= n_k`.
    pub fn pad_last(&self, n: usize) -> Result<Self> {
        let old = *self.format.dims().last().unwrap();
        if n < old {
            return Err(Error::InvalidFormat(format!(
                "cannot pad last factor from {old} down to {n}"
            )));
        }
        let format = self.format.with_last(n)?;
        let mut out = CTensor::zeros(&format);
        for p in 0..self.format.prefix_count() {
            out.data[p * n..p * n + old].copy_from_slice(self.fiber_at(p));
        }
        Ok(out)
    }
}

/// On-disk layout: `{"format": [n1, ...], "re": [...], "im": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorFile {
    pub format: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CTensor> for TensorFile {
    fn from(t: &CTensor) -> Self {
        TensorFile {
            format: t.format.dims().to_vec(),
            re: t.data.iter().map(|z| z.re).collect(),
            im: t.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<TensorFile> for CTensor {
    type Error = Error;

    fn try_from(f: TensorFile) -> Result<Self> {
        let format = Format::new(f.format)?;
        if f.re.len() != format.total_size() || f.im.len() != format.total_size() {
            return Err(Error::Parse(format!(
                "format {format} needs {} entries, got re={} im={}",
                format.total_size(),
                f.re.len(),
                f.im.len()
            )));
        }
        let data = f.re.into_iter().zip(f.im).map(|(r, i)| C64::new(r, i)).collect();
        CTensor::from_vec(&format, data)
    }
}

impl CTensor {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&TensorFile::from(self)).expect("tensor serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TensorFile = serde_json::from_str(s)?;
        CTensor::try_from(file)
    }
}
