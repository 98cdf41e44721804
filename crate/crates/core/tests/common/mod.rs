#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tuplespan::linalg::{svd, CMatrix};
use tuplespan::monodromy::{solve_singular_tuples, SolutionSet, SolverConfig};
use tuplespan::system::{SingularSystem, SystemPoint};
use tuplespan::tensor::{dot, CTensor, Format};

pub fn format(d: &[usize]) -> Format {
    Format::new(d.to_vec()).unwrap()
}

pub struct Solved {
    pub tensor: CTensor,
    pub set: SolutionSet,
    pub elapsed: Duration,
}

type Key = (Vec<usize>, u64);
type Cache = Mutex<HashMap<Key, Arc<OnceLock<Arc<Solved>>>>>;

/// Random tensor for `seed` and its solution set, computed once per process.
pub fn solved(d: &[usize], seed: u64) -> Arc<Solved> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry((d.to_vec(), seed)).or_default().clone()
    };
    slot.get_or_init(|| {
        let tensor = CTensor::random(&format(d), seed);
        let start = Instant::now();
        let set = solve_singular_tuples(&tensor, seed + 1000, &SolverConfig::default()).unwrap();
        Arc::new(Solved {
            tensor,
            set,
            elapsed: start.elapsed(),
        })
    })
    .clone()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn random_tuple(f: &Format, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    f.dims().iter().map(|&n| (0..n).map(|_| complex_normal(rng)).collect()).collect()
}

/// Coefficient of `prod_i h_i^{n_i - 1}` in `prod_i sum_j hh_i^{n_i-1-j} h_i^j`
/// with `hh_i = sum_{l != i} h_l`, by full expansion over exponent vectors.
pub fn ed_oracle(dims: &[usize]) -> BigInt {
    let k = dims.len();
    let mut poly: HashMap<Vec<usize>, BigInt> = HashMap::new();
    poly.insert(vec![0; k], BigInt::from(1));
    for (i, &n) in dims.iter().enumerate() {
        // factor_i = sum_j hh_i^{n-1-j} h_i^j, expanded by multinomials
        let mut factor: HashMap<Vec<usize>, BigInt> = HashMap::new();
        for j in 0..n {
            let mut hh: HashMap<Vec<usize>, BigInt> = HashMap::new();
            let mut e = vec![0; k];
            e[i] = j;
            hh.insert(e, BigInt::from(1));
            for _ in 0..n - 1 - j {
                let mut next = HashMap::new();
                for (m, c) in &hh {
                    for l in (0..k).filter(|&l| l != i) {
                        let mut m2 = m.clone();
                        m2[l] += 1;
                        *next.entry(m2).or_insert_with(|| BigInt::from(0)) += c;
                    }
                }
                hh = next;
            }
            for (m, c) in hh {
                *factor.entry(m).or_insert_with(|| BigInt::from(0)) += c;
            }
        }
        let mut next: HashMap<Vec<usize>, BigInt> = HashMap::new();
        for (a, ca) in &poly {
            for (b, cb) in &factor {
                let m: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if m.iter().zip(dims).all(|(e, n)| *e < *n) {
                    *next.entry(m).or_insert_with(|| BigInt::from(0)) += ca * cb;
                }
            }
        }
        poly = next;
    }
    let corner: Vec<usize> = dims.iter().map(|n| n - 1).collect();
    poly.get(&corner).cloned().unwrap_or_default()
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues (descending) and eigenvectors as columns.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
    (values, vectors)
}

/// Real singular triples `(sigma, u, v)` of an `m x n` row-major matrix,
/// `min(m, n)` of them, from the eigenvectors of the smaller Gram matrix.
pub fn real_svd(a: &[f64], m: usize, n: usize) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let at = |i: usize, j: usize| a[i * n + j];
    if m <= n {
        let g: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| (0..n).map(|c| at(i, c) * at(j, c)).sum()).collect()).collect();
        let (vals, vecs) = symmetric_eigen(&g);
        vals.iter()
            .zip(vecs)
            .map(|(&l, u)| {
                let s = l.sqrt();
                let v = (0..n).map(|c| (0..m).map(|r| at(r, c) * u[r]).sum::<f64>() / s).collect();
                (s, u, v)
            })
            .collect()
    } else {
        let g: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (0..m).map(|r| at(r, i) * at(r, j)).sum()).collect()).collect();
        let (vals, vecs) = symmetric_eigen(&g);
        vals.iter()
            .zip(vecs)
            .map(|(&l, v)| {
                let s = l.sqrt();
                let u = (0..m).map(|r| (0..n).map(|c| at(r, c) * v[c]).sum::<f64>() / s).collect();
                (s, u, v)
            })
            .collect()
    }
}

/// Max entrywise gap between the analytic Jacobian and central differences
/// (step `1e-6`) at a random point and tensor.
pub fn jacobian_fd_error(d: &[usize], seed: u64) -> f64 {
    let f = format(d);
    let sys = SingularSystem::new(&f);
    let mut r = rng(seed);
    let u = CTensor::random_with(&f, &mut r);
    let p = SystemPoint {
        x: random_tuple(&f, &mut r),
        lambda: (0..f.order()).map(|_| complex_normal(&mut r)).collect(),
    };
    let jac = sys.jacobian(&p, &u).unwrap();
    let flat = sys.to_flat(&p);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for c in 0..flat.len() {
        let shifted = |s: f64| {
            let mut v = flat.clone();
            v[c] += C64::new(s, 0.0);
            sys.evaluate(&sys.from_flat(&v), &u).unwrap()
        };
        let (plus, minus) = (shifted(h), shifted(-h));
        for row in 0..flat.len() {
            let fd = (plus[row] - minus[row]) / (2.0 * h);
            worst = worst.max((fd - jac[(row, c)]).norm());
        }
    }
    worst
}

/// Largest relative spread of `lambda_i (x_i . x_i)` across factors, over
/// all tuples of the set.
pub fn lambda_spread(set: &SolutionSet) -> f64 {
    set.tuples
        .iter()
        .map(|t| {
            let v: Vec<C64> = t.x.iter().zip(&t.lambda).map(|(x, l)| l * dot(x, x)).collect();
            let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            v.iter()
                .flat_map(|a| v.iter().map(move |b| (a - b).norm()))
                .fold(0.0, f64::max)
                / scale
        })
        .fold(0.0, f64::max)
}

pub fn random_matrix(m: usize, n: usize, seed: u64) -> CMatrix {
    let mut r = rng(seed);
    CMatrix::from_vec(m, n, (0..m * n).map(|_| complex_normal(&mut r)).collect()).unwrap()
}

/// `||A - U S V^H||_F / (max(m, n) eps sigma_1)`; the bound asks for <= 10.
pub fn svd_reconstruction_ratio(a: &CMatrix) -> f64 {
    let s = svd(a);
    let p = s.values.len();
    let mut sig = CMatrix::zeros(p, p);
    for i in 0..p {
        sig[(i, i)] = C64::new(s.values[i], 0.0);
    }
    let r = s.u.matmul(&sig).unwrap().matmul(&s.v.adjoint()).unwrap();
    let err: f64 = r
        .as_slice()
        .iter()
        .zip(a.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    err / (a.rows().max(a.cols()) as f64 * f64::EPSILON * s.values[0])
}

/// Max chart distance from each tuple of `a` to its nearest tuple in `b`,
/// symmetrized; infinite when the counts differ.
pub fn set_distance(a: &SolutionSet, b: &SolutionSet) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let one_way = |x: &SolutionSet, y: &SolutionSet| {
        x.tuples
            .iter()
            .map(|t| {
                y.tuples
                    .iter()
                    .map(|s| t.point().chart_distance(&s.point()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
