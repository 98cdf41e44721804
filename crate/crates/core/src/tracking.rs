//! Predictor-corrector continuation of one solution along a straight
//! segment in tensor space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::system::{SingularSystem, SystemPoint};
use crate::tensor::{norm_max, CTensor, C64};

/// Point norm beyond which a path is considered to escape to infinity.
pub const DIVERGENCE_NORM: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub newton_tol: f64,
    pub max_corrector_iters: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub step_expand: f64,
    pub step_shrink: f64,
    pub max_steps: usize,
    pub endpoint_refine_iters: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            newton_tol: 1e-10,
            max_corrector_iters: 3,
            initial_step: 0.1,
            min_step: 1e-8,
            max_step: 0.25,
            step_expand: 2.0,
            step_shrink: 0.5,
            max_steps: 10_000,
            endpoint_refine_iters: 5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.min_step > 0.0
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.step_expand >= 1.0
            && self.max_corrector_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parse(format!("invalid tracker configuration {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Success,
    StepUnderflow,
    MaxStepsExceeded,
    SingularJacobian,
    Diverged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackResult {
    pub status: TrackStatus,
    pub endpoint: SystemPoint,
    pub endpoint_residual: f64,
    pub steps_taken: usize,
}

impl TrackResult {
    pub fn is_success(&self) -> bool {
        self.status == TrackStatus::Success
    }
}

fn newton_step(sys: &SingularSystem, p: &SystemPoint, u: &CTensor) -> Result<(Vec<C64>, f64)> {
    let f = sys.evaluate(p, u)?;
    let res = norm_max(&f);
    let lu = Lu::new(&sys.jacobian(p, u)?)?;
    let neg: Vec<C64> = f.iter().map(|z| -z).collect();
    Ok((lu.solve(&neg)?, res))
}

fn add(sys: &SingularSystem, p: &SystemPoint, d: &[C64]) -> SystemPoint {
    let mut flat = sys.to_flat(p);
    for (a, b) in flat.iter_mut().zip(d) {
        *a += b;
    }
    sys.from_flat(&flat)
}

/// Newton iteration at a fixed tensor. Stops once the residual drops below
/// `tol` or after `iters` steps, and returns the iterate with the smallest
/// residual seen together with that residual.
pub fn newton_refine(
    sys: &SingularSystem,
    p: &SystemPoint,
    u: &CTensor,
    tol: f64,
    iters: usize,
) -> Result<(SystemPoint, f64)> {
    let mut best = (p.clone(), sys.residual_norm(p, u)?);
    let mut cur = p.clone();
    for _ in 0..iters {
        if best.1 < tol {
            break;
        }
        let (delta, _) = newton_step(sys, &cur, u)?;
        cur = add(sys, &cur, &delta);
        if !cur.is_finite() {
            break;
        }
        let r = sys.residual_norm(&cur, u)?;
        if r < best.1 {
            best = (cur.clone(), r);
        }
    }
    Ok(best)
}

/// Tensor on the segment `(1 - t) gamma U_from + t U_to`.
fn on_segment(from: &CTensor, to: &CTensor, gamma: C64, t: f64) -> CTensor {
    from.combine(gamma * (1.0 - t), to, C64::new(t, 0.0))
        .expect("segment endpoints share a format")
}

/// Corrector at fixed `u`; `None` when it fails to converge.
fn correct(
    sys: &SingularSystem,
    p: SystemPoint,
    u: &CTensor,
    cfg: &TrackerConfig,
) -> Option<SystemPoint> {
    let mut cur = p;
    let mut prev_norm = f64::INFINITY;
    for _ in 0..cfg.max_corrector_iters {
        let (delta, _) = newton_step(sys, &cur, u).ok()?;
        let dn = norm_max(&delta);
        if !dn.is_finite() || dn > 0.5 * prev_norm {
            return None;
        }
        cur = add(sys, &cur, &delta);
        if dn <= cfg.newton_tol * (1.0 + cur.norm_max()) {
            return Some(cur);
        }
        prev_norm = dn;
    }
    None
}

/// Tracks `start` (a solution for `gamma * u_from`) to a solution for `u_to`
/// along `(1 - t) gamma U_from + t U_to`, `t: 0 -> 1`.
pub fn track(
    sys: &SingularSystem,
    start: &SystemPoint,
    u_from: &CTensor,
    u_to: &CTensor,
    gamma: C64,
    cfg: &TrackerConfig,
) -> Result<TrackResult> {
    let direction = u_to.combine(C64::new(1.0, 0.0), u_from, -gamma)?;
    let failed = |status, p: SystemPoint, steps| -> Result<TrackResult> {
        let r = sys.residual_norm(&p, u_to).unwrap_or(f64::INFINITY);
        Ok(TrackResult {
            status,
            endpoint: p,
            endpoint_residual: r,
            steps_taken: steps,
        })
    };

    let mut t = 0.0f64;
    let mut h = cfg.initial_step;
    let mut p = start.clone();
    let mut steps = 0;
    let mut streak = 0;
    while t < 1.0 {
        if steps >= cfg.max_steps {
            return failed(TrackStatus::MaxStepsExceeded, p, steps);
        }
        if p.norm_max() > DIVERGENCE_NORM || !p.is_finite() {
            return failed(TrackStatus::Diverged, p, steps);
        }
        h = h.min(1.0 - t);
        let u_t = on_segment(u_from, u_to, gamma, t);
        let lu = Lu::new(&sys.jacobian(&p, &u_t)?)?;
        if lu.is_singular() {
            return failed(TrackStatus::SingularJacobian, p, steps);
        }
        // Euler step on J dp/dt = -dF/dU . dU/dt
        let tangent = lu.solve(&sys.param_tangent(&p, &direction)?)?;
        let dp: Vec<C64> = tangent.iter().map(|z| -z * h).collect();
        let t_next = if 1.0 - t - h < 1e-14 { 1.0 } else { t + h };
        let u_next = on_segment(u_from, u_to, gamma, t_next);
        match correct(sys, add(sys, &p, &dp), &u_next, cfg) {
            Some(q) => {
                p = q;
                t = t_next;
                steps += 1;
                streak += 1;
                if streak >= 2 {
                    h = (h * cfg.step_expand).min(cfg.max_step);
                    streak = 0;
                }
            }
            None => {
                streak = 0;
                h *= cfg.step_shrink;
                if h < cfg.min_step {
                    return failed(TrackStatus::StepUnderflow, p, steps);
                }
            }
        }
    }
    if p.norm_max() > DIVERGENCE_NORM {
        return failed(TrackStatus::Diverged, p, steps);
    }
    let (q, r) = match newton_refine(sys, &p, u_to, 0.0, cfg.endpoint_refine_iters) {
        Ok(v) => v,
        Err(Error::Singular) => return failed(TrackStatus::SingularJacobian, p, steps),
        Err(e) => return Err(e),
    };
    // an endpoint that Newton cannot bring under tolerance counts as a step failure
    let status = if r < cfg.newton_tol {
        TrackStatus::Success
    } else {
        TrackStatus::StepUnderflow
    };
    Ok(TrackResult {
        status,
        endpoint: q,
        endpoint_residual: r,
        steps_taken: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::start_pair;
    use crate::tensor::Format;

    #[test]
    fn constant_path_returns_start() {
        let f = Format::new(vec![2, 2, 3]).unwrap();
        let sys = SingularSystem::new(&f);
        let (u, p) = start_pair(&f, 1);
        let r = track(&sys, &p, &u, &u, C64::new(1.0, 0.0), &TrackerConfig::default()).unwrap();
        assert!(r.is_success());
        assert!(r.endpoint.chart_distance(&p) < 1e-14);
        assert_eq!(r.endpoint_residual, 0.0);
    }

    #[test]
    fn newton_fixed_point() {
        let f = Format::new(vec![2, 3, 2]).unwrap();
        let sys = SingularSystem::new(&f);
        let (u, p) = start_pair(&f, 2);
        let (q, r) = newton_refine(&sys, &p, &u, 1e-12, 5).unwrap();
        assert_eq!(q, p);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn newton_converges_from_perturbation() {
        let f = Format::new(vec![2, 2, 3]).unwrap();
        let sys = SingularSystem::new(&f);
        let cfg = TrackerConfig::default();
        for seed in 0..10 {
            let (u0, p0) = start_pair(&f, seed);
            let target = CTensor::random(&f, 100 + seed);
            let r = track(&sys, &p0, &u0, &target, C64::from_polar(1.0, 0.7), &cfg).unwrap();
            assert!(r.is_success(), "{:?}", r.status);
            let mut flat = sys.to_flat(&r.endpoint);
            for (i, z) in flat.iter_mut().enumerate() {
                *z += C64::new(1e-4 * ((i % 3) as f64 - 1.0), 1e-4);
            }
            let perturbed = sys.from_flat(&flat);
            let (_, res) = newton_refine(&sys, &perturbed, &target, 1e-12, 5).unwrap();
            assert!(res < 1e-12, "seed {seed}: {res}");
        }
    }

    #[test]
    fn far_point_reports_residual() {
        let f = Format::new(vec![2, 2, 3]).unwrap();
        let sys = SingularSystem::new(&f);
        let u = CTensor::random(&f, 4);
        let (_, p) = start_pair(&f, 5);
        let far = p.scaled_lambda(C64::new(1e3, 0.0));
        let (_, res) = newton_refine(&sys, &far, &u, 1e-12, 0).unwrap();
        assert!(res > 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig {
            min_step: 1.0,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
