//! The square polynomial system whose solutions are singular tuples in the
//! affine chart `x_{i,1} = 1`.
//!
//! Unknowns are `(x_1, ..., x_k, lambda_1, ..., lambda_k)`. Equations are the
//! `k` gradient blocks `U(x, skip i) - lambda_i x_i` followed by the `k`
//! chart equations `x_{i,1} - 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::tensor::{norm_max, CTensor, Format, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct SystemPoint {
    pub x: Vec<Vec<C64>>,
    pub lambda: Vec<C64>,
}

impl SystemPoint {
    pub fn norm_max(&self) -> f64 {
        self.x
            .iter()
            .map(|v| norm_max(v))
            .chain(self.lambda.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .flatten()
            .chain(&self.lambda)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max-norm distance over the chart coordinates `x` only.
    pub fn chart_distance(&self, other: &SystemPoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    /// The same tuple as a solution for the tensor `c * U`.
    pub fn scaled_lambda(&self, c: C64) -> SystemPoint {
        SystemPoint {
            x: self.x.clone(),
            lambda: self.lambda.iter().map(|l| l * c).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularSystem {
    format: Format,
    offsets: Vec<usize>,
    x_len: usize,
}

impl SingularSystem {
    pub fn new(format: &Format) -> Self {
        let mut offsets = Vec::with_capacity(format.order());
        let mut acc = 0;
        for &n in format.dims() {
            offsets.push(acc);
            acc += n;
        }
        SingularSystem {
            format: format.clone(),
            offsets,
            x_len: acc,
        }
    }

    pub fn format(&self) -> &Format {
        &self.format
    }

    /// `sum n_i + k`; also the number of equations.
    pub fn n_vars(&self) -> usize {
        self.x_len + self.format.order()
    }

    fn check_tensor(&self, u: &CTensor) -> Result<()> {
        if u.format() != &self.format {
            return Err(Error::FormatMismatch(
                self.format.dims().to_vec(),
                u.format().dims().to_vec(),
            ));
        }
        Ok(())
    }

    fn check_point(&self, p: &SystemPoint) -> Result<()> {
        let k = self.format.order();
        if p.x.len() != k || p.lambda.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: p.x.len().min(p.lambda.len()),
            });
        }
        for (v, &n) in p.x.iter().zip(self.format.dims()) {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn to_flat(&self, p: &SystemPoint) -> Vec<C64> {
        p.x.iter().flatten().chain(&p.lambda).copied().collect()
    }

    pub fn from_flat(&self, v: &[C64]) -> SystemPoint {
        let dims = self.format.dims();
        SystemPoint {
            x: self
                .offsets
                .iter()
                .zip(dims)
                .map(|(&o, &n)| v[o..o + n].to_vec())
                .collect(),
            lambda: v[self.x_len..self.x_len + dims.len()].to_vec(),
        }
    }

    pub fn evaluate(&self, p: &SystemPoint, u: &CTensor) -> Result<Vec<C64>> {
        self.check_tensor(u)?;
        self.check_point(p)?;
        let k = self.format.order();
        let mut out = Vec::with_capacity(self.n_vars());
        for i in 0..k {
            let g = u.contract(&p.x, i)?;
            out.extend(g.iter().zip(&p.x[i]).map(|(gs, xs)| gs - p.lambda[i] * xs));
        }
        out.extend(p.x.iter().map(|v| v[0] - ONE));
        Ok(out)
    }

    pub fn residual_norm(&self, p: &SystemPoint, u: &CTensor) -> Result<f64> {
        Ok(norm_max(&self.evaluate(p, u)?))
    }

    /// Derivative of the residual with respect to `(x, lambda)`.
    pub fn jacobian(&self, p: &SystemPoint, u: &CTensor) -> Result<CMatrix> {
        self.check_tensor(u)?;
        self.check_point(p)?;
        let k = self.format.order();
        let dims = self.format.dims();
        let mut jac = CMatrix::zeros(self.n_vars(), self.n_vars());
        for i in 0..k {
            let ri = self.offsets[i];
            for m in 0..k {
                let cm = self.offsets[m];
                if m == i {
                    for s in 0..dims[i] {
                        jac[(ri + s, cm + s)] = -p.lambda[i];
                    }
                    continue;
                }
                let block = u.contract_pair(&p.x, i, m)?;
                for r in 0..dims[i] {
                    for c in 0..dims[m] {
                        jac[(ri + r, cm + c)] = block[r * dims[m] + c];
                    }
                }
            }
            for s in 0..dims[i] {
                jac[(ri + s, self.x_len + i)] = -p.x[i][s];
            }
            jac[(self.x_len + i, ri)] = ONE;
        }
        Ok(jac)
    }

    /// Derivative of the residual along the tensor direction `du`
    /// (the residual is linear in the tensor).
    pub fn param_tangent(&self, p: &SystemPoint, du: &CTensor) -> Result<Vec<C64>> {
        self.check_tensor(du)?;
        self.check_point(p)?;
        let k = self.format.order();
        let mut out = Vec::with_capacity(self.n_vars());
        for i in 0..k {
            out.extend(du.contract(&p.x, i)?);
        }
        out.extend(std::iter::repeat_n(ZERO, k));
        Ok(out)
    }
}

pub(crate) fn complex_normal<R: rand::Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// A tensor `U*` together with a known solution: `x_i = e_1`, all
/// `lambda_i = lambda*`. `U*` has `lambda*` at the corner entry, zeros where
/// exactly one index leaves the first position, and random entries elsewhere.
pub fn start_pair(format: &Format, seed: u64) -> (CTensor, SystemPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = complex_normal(&mut rng);
    let mut u = CTensor::zeros(format);
    for pos in 0..format.total_size() {
        let idx = format.multi_index(pos);
        let off_corner = idx.0.iter().filter(|&&j| j > 0).count();
        u.as_mut_slice()[pos] = match off_corner {
            0 => lambda,
            1 => ZERO,
            _ => complex_normal(&mut rng),
        };
    }
    let x = format
        .dims()
        .iter()
        .map(|&n| {
            let mut v = vec![ZERO; n];
            v[0] = ONE;
            v
        })
        .collect();
    let point = SystemPoint {
        x,
        lambda: vec![lambda; format.order()],
    };
    (u, point)
}
