//! Linear relations among the rank-one tensors beyond the critical space,
//! built from Laplace expansions of determinants whose rows are fibers of
//! the tensor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, matrix_rank, CMatrix, RankRule};
use crate::monodromy::{solve_singular_tuples, ComplexVec, SolutionSet, SolverConfig};
use crate::span::{critical_space_equations, containment_check, FormLabel, LinearFormZ};
use crate::tensor::{norm2, CTensor, Format, MultiIndex, C64};

/// Refuse to enumerate more candidates than this.
pub const CANDIDATE_LIMIT: u128 = 100_000;

/// Default threshold on `containment_check` for keeping a candidate.
pub const RELATION_TOL: f64 = 1e-8;

/// Swap of indices `a` and `b` in factor `factor` of the prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Twist {
    pub factor: usize,
    pub a: usize,
    pub b: usize,
}

impl Twist {
    fn apply(&self, prefix: &mut [usize]) {
        let v = &mut prefix[self.factor];
        if *v == self.a {
            *v = self.b;
        } else if *v == self.b {
            *v = self.a;
        }
    }
}

/// The `n_k - 2` fiber prefixes that fill the bottom rows of the matrix,
/// plus the optional twist applied to the prefix of the `z` row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetChoice {
    pub prefixes: Vec<MultiIndex>,
    pub twist: Option<Twist>,
}

impl IndexSetChoice {
    /// Untwisted choice; prefixes must be distinct and of the right shape.
    pub fn new(format: &Format, prefixes: Vec<MultiIndex>) -> Result<Self> {
        let choice = IndexSetChoice {
            prefixes,
            twist: None,
        };
        choice.validate(format)?;
        Ok(choice)
    }

    /// Picks the twist for `prefixes`: when the remaining prefixes all share
    /// index `a` in some factor, swap `a` with the smallest other index.
    pub fn canonical(format: &Format, prefixes: Vec<MultiIndex>) -> Result<Self> {
        let mut choice = IndexSetChoice::new(format, prefixes)?;
        let rest = choice.complement(format)?;
        let k = format.order();
        if let Some(first) = rest.first() {
            choice.twist = (0..k - 1).find_map(|i| {
                let a = first.0[i];
                rest.iter().all(|j| j.0[i] == a).then_some(Twist {
                    factor: i,
                    a,
                    b: if a == 0 { 1 } else { 0 },
                })
            });
        }
        Ok(choice)
    }

    pub fn validate(&self, format: &Format) -> Result<()> {
        let n = *format.dims().last().unwrap();
        let prefixes = format.prefix_count();
        if n < 2 || n - 2 > prefixes || self.prefixes.len() != n - 2 {
            return Err(Error::Relation(format!(
                "format {format} needs {} prefixes, got {}",
                n.saturating_sub(2),
                self.prefixes.len()
            )));
        }
        let mut seen = Vec::with_capacity(self.prefixes.len());
        for p in &self.prefixes {
            let pos = format.prefix_position(p)?;
            if seen.contains(&pos) {
                return Err(Error::Relation(format!("repeated prefix {:?}", p.0)));
            }
            seen.push(pos);
        }
        if let Some(t) = self.twist {
            let ok = t.factor + 1 < format.order()
                && t.a != t.b
                && t.a.max(t.b) < format.dims()[t.factor];
            if !ok {
                return Err(Error::Relation(format!("invalid twist {t:?}")));
            }
        }
        Ok(())
    }

    /// Prefixes not in the choice, in lexicographic order.
    pub fn complement(&self, format: &Format) -> Result<Vec<MultiIndex>> {
        let used: Vec<usize> = self
            .prefixes
            .iter()
            .map(|p| format.prefix_position(p))
            .collect::<Result<_>>()?;
        Ok((0..format.prefix_count())
            .filter(|p| !used.contains(p))
            .map(|p| format.prefix_index(p))
            .collect())
    }

    fn twisted(&self, prefix: &MultiIndex) -> MultiIndex {
        let mut p = prefix.0.clone();
        if let Some(t) = self.twist {
            t.apply(&mut p);
        }
        MultiIndex(p)
    }
}

/// Cofactors of row 1 (0-based) of the `n x n` matrix `[top; *; rest]`.
fn second_row_cofactors(top: &[C64], rest: &[&[C64]]) -> Result<Vec<C64>> {
    let n = top.len();
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let drop_col = |row: &[C64]| -> Vec<C64> {
            row.iter()
                .enumerate()
                .filter(|&(c, _)| c != s)
                .map(|(_, z)| *z)
                .collect()
        };
        let mut rows = vec![drop_col(top)];
        rows.extend(rest.iter().map(|r| drop_col(r)));
        let minor = if n == 1 {
            C64::new(1.0, 0.0)
        } else {
            determinant(&CMatrix::from_rows(&rows)?)?
        };
        out.push(if (1 + s) % 2 == 0 { minor } else { -minor });
    }
    Ok(out)
}

/// The form `z -> sum_j det [T_j; z_{tau(j)}; T_I]` over all prefixes `j`,
/// where `tau` is the twist. Terms with `j` in `I` have a repeated row.
pub fn build_relation(t: &CTensor, choice: &IndexSetChoice) -> Result<LinearFormZ> {
    let format = t.format();
    choice.validate(format)?;
    let n = *format.dims().last().unwrap();
    let fixed: Vec<&[C64]> = choice
        .prefixes
        .iter()
        .map(|p| t.slice_fiber(p))
        .collect::<Result<_>>()?;
    let mut coef = CTensor::zeros(format);
    for pos in 0..format.prefix_count() {
        let j = format.prefix_index(pos);
        let cof = second_row_cofactors(t.fiber_at(pos), &fixed)?;
        let target = format.prefix_position(&choice.twisted(&j))?;
        coef.as_mut_slice()[target * n..(target + 1) * n].copy_from_slice(&cof);
    }
    if coef.norm() == 0.0 {
        return Err(Error::Relation(format!(
            "relation for {:?} vanishes identically",
            choice
        )));
    }
    Ok(LinearFormZ {
        coefficients: coef,
        label: FormLabel::Relation(choice.clone()),
    })
}

/// Compares `det A` for `A = [T(y', skip last); y_k; T_I]` with the relation
/// evaluated at `y_1 x ... x y_k`, where `y'` has the twist applied.
/// The difference is divided by the Hadamard bound of `A`.
pub fn laplace_identity_check(t: &CTensor, choice: &IndexSetChoice, y: &[Vec<C64>]) -> Result<f64> {
    let format = t.format();
    let k = format.order();
    let mut yt = y.to_vec();
    if let Some(tw) = choice.twist {
        yt[tw.factor].swap(tw.a, tw.b);
    }
    let mut rows = vec![t.contract(&yt, k - 1)?, y[k - 1].clone()];
    for p in &choice.prefixes {
        rows.push(t.slice_fiber(p)?.to_vec());
    }
    let lhs = determinant(&CMatrix::from_rows(&rows)?)?;
    let rhs = build_relation(t, choice)?.evaluate(&CTensor::rank_one(y)?)?;
    let scale: f64 = rows.iter().map(|r| norm2(r)).product();
    let diff = (lhs - rhs).norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r.min(n - r)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub fn candidate_count(format: &Format) -> u128 {
    let n = *format.dims().last().unwrap();
    binomial(format.prefix_count(), n - 2)
}

/// All `binom(D, n_k - 2)` prefix sets in lexicographic order, each with its
/// canonical twist.
pub fn enumerate_candidates(format: &Format) -> Result<Vec<IndexSetChoice>> {
    let count = candidate_count(format);
    if count > CANDIDATE_LIMIT {
        return Err(Error::TooManyCandidates {
            count,
            limit: CANDIDATE_LIMIT,
        });
    }
    let d = format.prefix_count();
    let m = *format.dims().last().unwrap() - 2;
    if m > d {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut combo: Vec<usize> = (0..m).collect();
    loop {
        let prefixes = combo.iter().map(|&p| format.prefix_index(p)).collect();
        out.push(IndexSetChoice::canonical(format, prefixes)?);
        let Some(i) = (0..m).rev().find(|&i| combo[i] < d - m + i) else {
            break;
        };
        combo[i] += 1;
        for j in i + 1..m {
            combo[j] = combo[j - 1] + 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FilteredRelation {
    pub form: LinearFormZ,
    /// `containment_check` of the form on the solution set.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub candidates: usize,
    /// Candidates whose form vanishes identically for this tensor.
    pub degenerate: usize,
    pub validated: Vec<FilteredRelation>,
}

/// Builds every candidate and keeps those vanishing on all rank-one tensors
/// of `sols` to relative tolerance `tol`.
pub fn enumerate_and_filter(t: &CTensor, sols: &SolutionSet, tol: f64) -> Result<FilterOutcome> {
    let choices = enumerate_candidates(t.format())?;
    let built: Vec<Result<Option<FilteredRelation>>> = choices
        .par_iter()
        .map(|c| match build_relation(t, c) {
            Ok(form) => {
                let residual = containment_check(std::slice::from_ref(&form), sols)?;
                Ok(Some(FilteredRelation { form, residual }))
            }
            Err(Error::Relation(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut degenerate = 0;
    let mut validated = Vec::new();
    for b in built {
        match b? {
            Some(r) if r.residual < tol => validated.push(r),
            Some(_) => {}
            None => degenerate += 1,
        }
    }
    Ok(FilterOutcome {
        candidates: choices.len(),
        degenerate,
        validated,
    })
}

/// Choices validated for the random tensor of every seed in `seeds`. Guards
/// against a form that vanishes on the tuples of one tensor by accident.
pub fn confirmed_choices(
    format: &Format,
    seeds: &[u64],
    cfg: &SolverConfig,
    tol: f64,
) -> Result<Vec<IndexSetChoice>> {
    let mut keep: Option<Vec<IndexSetChoice>> = None;
    for &seed in seeds {
        let t = CTensor::random(format, seed);
        let sols = solve_singular_tuples(&t, seed, cfg)?;
        let found: Vec<IndexSetChoice> = enumerate_and_filter(&t, &sols, tol)?
            .validated
            .into_iter()
            .filter_map(|r| match r.form.label {
                FormLabel::Relation(c) => Some(c),
                FormLabel::Critical { .. } => None,
            })
            .collect();
        keep = Some(match keep {
            None => found,
            Some(prev) => prev.into_iter().filter(|c| found.contains(c)).collect(),
        });
    }
    Ok(keep.unwrap_or_default())
}

fn normalized_rows(forms: &[&LinearFormZ]) -> Result<CMatrix> {
    let rows: Vec<Vec<C64>> = forms
        .iter()
        .map(|f| {
            let s = f.norm();
            f.coefficients.as_slice().iter().map(|z| z / s).collect()
        })
        .collect();
    CMatrix::from_rows(&rows)
}

/// Rank added by `validated` on top of the critical space equations.
pub fn extra_relation_rank(validated: &[LinearFormZ], critical: &[LinearFormZ], rule: RankRule) -> Result<usize> {
    let crit: Vec<&LinearFormZ> = critical.iter().collect();
    let all: Vec<&LinearFormZ> = critical.iter().chain(validated).collect();
    if all.is_empty() {
        return Ok(0);
    }
    let base = if crit.is_empty() {
        0
    } else {
        matrix_rank(&normalized_rows(&crit)?, rule).rank
    };
    let total = matrix_rank(&normalized_rows(&all)?, rule).rank;
    Ok(total.saturating_sub(base))
}

/// Largest `|form(T)| / (||form|| ||T||)`.
pub fn verify_t_satisfies(validated: &[LinearFormZ], t: &CTensor) -> Result<f64> {
    validated
        .iter()
        .map(|f| f.relative_value(t))
        .try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub choice: IndexSetChoice,
    pub coefficients: ComplexVec,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationsReport {
    pub format: Vec<usize>,
    pub candidates: usize,
    pub degenerate: usize,
    pub validated: usize,
    pub extra_rank: usize,
    pub tensor_residual: f64,
    pub relations: Vec<RelationRecord>,
}

pub fn analyze_relations(t: &CTensor, sols: &SolutionSet, tol: f64, rule: RankRule) -> Result<RelationsReport> {
    let outcome = enumerate_and_filter(t, sols, tol)?;
    let forms: Vec<LinearFormZ> = outcome.validated.iter().map(|r| r.form.clone()).collect();
    let critical = critical_space_equations(t);
    Ok(RelationsReport {
        format: t.format().dims().to_vec(),
        candidates: outcome.candidates,
        degenerate: outcome.degenerate,
        validated: forms.len(),
        extra_rank: extra_relation_rank(&forms, &critical, rule)?,
        tensor_residual: verify_t_satisfies(&forms, t)?,
        relations: outcome
            .validated
            .iter()
            .map(|r| {
                let FormLabel::Relation(choice) = &r.form.label else {
                    unreachable!("relations carry their choice")
                };
                RelationRecord {
                    choice: choice.clone(),
                    coefficients: ComplexVec::from(r.form.coefficients.as_slice()),
                    residual: r.residual,
                }
            })
            .collect(),
    })
}
