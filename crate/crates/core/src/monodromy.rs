//! Collects all singular tuples of a tensor: one start path from a tensor
//! with a known solution, then monodromy loops through random tensors until
//! the expected count is reached or the loops stall.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::ed_degree_u64;
use crate::error::{Error, Result};
use crate::system::{start_pair, SingularSystem, SystemPoint};
use crate::tensor::{dot, CTensor, Format, C64};
use crate::tracking::{newton_refine, track, TrackResult, TrackerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tracker: TrackerConfig,
    /// Consecutive loops without a new solution before giving up.
    pub stall_limit: usize,
    /// Max-norm chart distance below which two tuples are the same.
    pub dedup_tol: f64,
    pub start_attempts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tracker: TrackerConfig::default(),
            stall_limit: 10,
            dedup_tol: 1e-6,
            start_attempts: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularTuple {
    pub x: Vec<Vec<C64>>,
    pub lambda: Vec<C64>,
    pub residual: f64,
    pub rank_one: CTensor,
}

impl SingularTuple {
    pub fn point(&self) -> SystemPoint {
        SystemPoint {
            x: self.x.clone(),
            lambda: self.lambda.clone(),
        }
    }

    /// `lambda_i (x_i . x_i)` for every factor; equal across factors for a
    /// solution (all equal the multilinear value at the tuple).
    pub fn scaled_values(&self) -> Vec<C64> {
        self.x
            .iter()
            .zip(&self.lambda)
            .map(|(v, l)| l * dot(v, v))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub format: Format,
    pub tuples: Vec<SingularTuple>,
    pub ed: u64,
    pub seed: u64,
    pub loops_run: usize,
    pub complete: bool,
    pub paths_tracked: usize,
    pub path_failures: usize,
    pub dedup_tol: f64,
}

impl SolutionSet {
    pub fn empty(format: &Format, seed: u64, dedup_tol: f64) -> Self {
        SolutionSet {
            format: format.clone(),
            tuples: Vec::new(),
            ed: ed_degree_u64(format),
            seed,
            loops_run: 0,
            complete: false,
            paths_tracked: 0,
            path_failures: 0,
            dedup_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Inserts a refined candidate unless an existing tuple lies within
    /// `dedup_tol` in chart coordinates.
    pub fn dedup_insert(&mut self, candidate: &SystemPoint, residual: f64) -> bool {
        let mut p = candidate.clone();
        for v in &mut p.x {
            v[0] = C64::new(1.0, 0.0);
        }
        let close = self.tuples.iter().any(|t| {
            t.x.iter()
                .zip(&p.x)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, w)| (u - w).norm()))
                .fold(0.0, f64::max)
                < self.dedup_tol
        });
        if close {
            return false;
        }
        let rank_one = CTensor::rank_one(&p.x).expect("chart vectors match the format");
        self.tuples.push(SingularTuple {
            x: p.x,
            lambda: p.lambda,
            residual,
            rank_one,
        });
        self.complete = self.tuples.len() as u64 == self.ed;
        true
    }
}

fn unit_complex<R: Rng>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Refines an endpoint at the target and accepts it when the residual is
/// below tolerance.
fn accept(
    sys: &SingularSystem,
    res: &TrackResult,
    u: &CTensor,
    cfg: &TrackerConfig,
) -> Option<(SystemPoint, f64)> {
    if !res.is_success() {
        return None;
    }
    let mut p = res.endpoint.clone();
    for v in &mut p.x {
        v[0] = C64::new(1.0, 0.0);
    }
    let (mut q, _) = newton_refine(sys, &p, u, 0.0, 2).ok()?;
    for v in &mut q.x {
        v[0] = C64::new(1.0, 0.0);
    }
    let r = sys.residual_norm(&q, u).ok()?;
    (r < cfg.newton_tol).then_some((q, r))
}

/// Tracks `p` (a solution for `from`) around `from -> a -> b -> from`.
fn track_loop(
    sys: &SingularSystem,
    p: &SystemPoint,
    legs: &[(&CTensor, &CTensor, C64)],
    cfg: &TrackerConfig,
) -> Result<TrackResult> {
    let mut cur = p.clone();
    let mut last = None;
    for &(from, to, gamma) in legs {
        let r = track(sys, &cur.scaled_lambda(gamma), from, to, gamma, cfg)?;
        if !r.is_success() {
            return Ok(r);
        }
        cur = r.endpoint.clone();
        last = Some(r);
    }
    Ok(last.expect("loop has legs"))
}

pub fn solve_singular_tuples(u: &CTensor, seed: u64, cfg: &SolverConfig) -> Result<SolutionSet> {
    cfg.tracker.validate()?;
    let format = u.format().clone();
    let sys = SingularSystem::new(&format);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = SolutionSet::empty(&format, seed, cfg.dedup_tol);

    let mut started = false;
    for _ in 0..cfg.start_attempts {
        let (u_start, p_start) = start_pair(&format, rng.random());
        let gamma = unit_complex(&mut rng);
        let r = track(&sys, &p_start.scaled_lambda(gamma), &u_start, u, gamma, &cfg.tracker)?;
        set.paths_tracked += 1;
        if let Some((q, res)) = accept(&sys, &r, u, &cfg.tracker) {
            set.dedup_insert(&q, res);
            started = true;
            break;
        }
        set.path_failures += 1;
    }
    if !started {
        return Err(Error::StartTrackingFailed(cfg.start_attempts));
    }

    let mut stalled = 0;
    while !set.complete && stalled < cfg.stall_limit {
        let a = CTensor::random_with(&format, &mut rng);
        let b = CTensor::random_with(&format, &mut rng);
        let gammas = [
            unit_complex(&mut rng),
            unit_complex(&mut rng),
            unit_complex(&mut rng),
        ];
        let legs = [(u, &a, gammas[0]), (&a, &b, gammas[1]), (&b, u, gammas[2])];
        let known: Vec<SystemPoint> = set.tuples.iter().map(SingularTuple::point).collect();
        let results: Vec<Result<TrackResult>> = known
            .par_iter()
            .map(|p| track_loop(&sys, p, &legs, &cfg.tracker))
            .collect();
        let mut added = 0;
        for r in results {
            let r = r?;
            set.paths_tracked += 1;
            match accept(&sys, &r, u, &cfg.tracker) {
                Some((q, res)) => {
                    if set.dedup_insert(&q, res) {
                        added += 1;
                    }
                }
                None => set.path_failures += 1,
            }
            if set.complete {
                break;
            }
        }
        set.loops_run += 1;
        stalled = if added == 0 { stalled + 1 } else { 0 };
    }
    Ok(set)
}

#[derive(Clone, Debug)]
pub struct SpecializationReport {
    pub padded: Option<SolutionSet>,
    /// Largest `|x_{k,j}| / ||x_k||` over tuples and padded coordinates.
    pub max_leakage: f64,
    pub holds: bool,
    pub skipped: bool,
}

/// Zero-pads the last factor of `u` to `m` and checks that every singular
/// tuple of the padded tensor is supported on the original coordinates.
pub fn check_specialization(
    u: &CTensor,
    m: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<SpecializationReport> {
    let n = *u.format().dims().last().unwrap();
    if m <= n {
        return Ok(SpecializationReport {
            padded: None,
            max_leakage: 0.0,
            holds: true,
            skipped: true,
        });
    }
    let padded = u.pad_last(m)?;
    let set = solve_singular_tuples(&padded, seed, cfg)?;
    let k = u.format().order();
    let max_leakage = set
        .tuples
        .iter()
        .map(|t| {
            let xk = &t.x[k - 1];
            let norm = crate::tensor::norm2(xk);
            xk[n..].iter().map(|z| z.norm() / norm).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(SpecializationReport {
        holds: max_leakage < 1e-8,
        max_leakage,
        padded: Some(set),
        skipped: false,
    })
}

/// `{"re": [...], "im": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComplexVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&[C64]> for ComplexVec {
    fn from(v: &[C64]) -> Self {
        ComplexVec {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }
}

impl ComplexVec {
    pub fn to_vec(&self) -> Result<Vec<C64>> {
        if self.re.len() != self.im.len() {
            return Err(Error::Parse(format!(
                "re/im length mismatch: {} vs {}",
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TupleRecord {
    pub x: Vec<ComplexVec>,
    pub lambda: ComplexVec,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionFile {
    pub format: Vec<usize>,
    pub seed: u64,
    pub ed: u64,
    pub complete: bool,
    pub loops_run: usize,
    pub tuples: Vec<TupleRecord>,
}

impl From<&SolutionSet> for SolutionFile {
    fn from(s: &SolutionSet) -> Self {
        SolutionFile {
            format: s.format.dims().to_vec(),
            seed: s.seed,
            ed: s.ed,
            complete: s.complete,
            loops_run: s.loops_run,
            tuples: s
                .tuples
                .iter()
                .map(|t| TupleRecord {
                    x: t.x.iter().map(|v| ComplexVec::from(&v[..])).collect(),
                    lambda: ComplexVec::from(&t.lambda[..]),
                    residual: t.residual,
                })
                .collect(),
        }
    }
}

impl SolutionFile {
    pub fn into_solution_set(self) -> Result<SolutionSet> {
        let format = Format::new(self.format)?;
        let mut set = SolutionSet::empty(&format, self.seed, 0.0);
        set.loops_run = self.loops_run;
        for rec in self.tuples {
            let x = rec.x.iter().map(ComplexVec::to_vec).collect::<Result<Vec<_>>>()?;
            if x.len() != format.order() || x.iter().zip(format.dims()).any(|(v, &n)| v.len() != n) {
                return Err(Error::Parse(format!("tuple does not match format {format}")));
            }
            let lambda = rec.lambda.to_vec()?;
            let rank_one = CTensor::rank_one(&x)?;
            set.tuples.push(SingularTuple {
                x,
                lambda,
                residual: rec.residual,
                rank_one,
            });
        }
        set.complete = set.tuples.len() as u64 == set.ed;
        Ok(set)
    }
}
