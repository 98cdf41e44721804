//! Critical space equations, the dimension of the span of the rank-one
//! tensors of the singular tuples, and membership of the tensor in that span.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{classify, critical_space_dim, expected_span_dim};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, matrix_rank, CMatrix, RankReport, RankRule};
use crate::monodromy::SolutionSet;
use crate::relations::IndexSetChoice;
use crate::tensor::{norm2, CTensor, Format, C64};

/// Relative residual below which the tensor counts as lying in the span.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Formats where a generic tensor is known to lie in the span of its
/// rank-one tensors: sub-boundary formats, `(2,2,n)` with `n >= 4`,
/// `(2,3,n)` with `n >= 5` and `(2,...,2,l+2)` with `l >= 4`.
pub fn membership_proven(format: &Format) -> bool {
    if classify(format).is_sub_boundary {
        return true;
    }
    let mut d = format.dims().to_vec();
    d.sort_unstable();
    let k = d.len();
    let n = d[k - 1];
    match d[..k - 1] {
        [2, 2] => n >= 4,
        [2, 3] => n >= 5,
        _ => k >= 5 && d[..k - 1].iter().all(|&m| m == 2) && n == k + 1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormLabel {
    /// Equation for factor `factor` and index pair `p < q`.
    Critical { factor: usize, p: usize, q: usize },
    Relation(IndexSetChoice),
}

/// Linear form `z -> sum_J c_J z_J` on the ambient tensor space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFormZ {
    pub coefficients: CTensor,
    pub label: FormLabel,
}

impl LinearFormZ {
    pub fn evaluate(&self, z: &CTensor) -> Result<C64> {
        self.coefficients.frobenius_inner(z)
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// `|form(z)| / (||form|| ||z||)`, 0 for a zero argument.
    pub fn relative_value(&self, z: &CTensor) -> Result<f64> {
        let scale = self.norm() * z.norm();
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(self.evaluate(z)?.norm() / scale)
    }
}

pub fn critical_space_equations(t: &CTensor) -> Vec<LinearFormZ> {
    let format = t.format();
    let data = t.as_slice();
    let mut forms = Vec::new();
    for (factor, &n) in format.dims().iter().enumerate() {
        let stride = format.strides()[factor];
        for p in 0..n {
            for q in p + 1..n {
                let mut c = CTensor::zeros(format);
                let coef = c.as_mut_slice();
                for pos in 0..data.len() {
                    if (pos / stride) % n != p {
                        continue;
                    }
                    let pos_q = pos + (q - p) * stride;
                    coef[pos_q] += data[pos];
                    coef[pos] -= data[pos_q];
                }
                forms.push(LinearFormZ {
                    coefficients: c,
                    label: FormLabel::Critical { factor, p, q },
                });
            }
        }
    }
    forms
}

/// Coefficient rows of `forms` stacked into a matrix.
pub fn stack_forms(forms: &[LinearFormZ]) -> Result<CMatrix> {
    let rows: Vec<Vec<C64>> = forms.iter().map(|f| f.coefficients.as_slice().to_vec()).collect();
    CMatrix::from_rows(&rows)
}

/// Columns are the vectorized rank-one tensors, each scaled to unit norm.
pub fn span_matrix(sols: &SolutionSet) -> Result<CMatrix> {
    if sols.is_empty() {
        return Err(Error::EmptySolutionSet);
    }
    let cols: Vec<Vec<C64>> = sols
        .tuples
        .iter()
        .map(|t| {
            let v = t.rank_one.as_slice();
            let s = norm2(v);
            v.iter().map(|z| z / s).collect()
        })
        .collect();
    CMatrix::from_columns(&cols)
}

#[derive(Clone, Debug)]
pub struct SpanDimension {
    pub rank: RankReport,
    pub projective: usize,
    /// The solution set was incomplete, so `projective` is only a lower bound.
    pub provisional: bool,
}

pub fn span_dimension(sols: &SolutionSet, rule: RankRule) -> Result<SpanDimension> {
    let rank = matrix_rank(&span_matrix(sols)?, rule);
    Ok(SpanDimension {
        projective: rank.rank.saturating_sub(1),
        provisional: !sols.complete,
        rank,
    })
}

/// Largest `|form(Z)| / (||form|| ||Z||)` over forms and rank-one tensors.
pub fn containment_check(forms: &[LinearFormZ], sols: &SolutionSet) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in forms {
        if f.coefficients.format() != &sols.format {
            return Err(Error::FormatMismatch(
                f.coefficients.format().dims().to_vec(),
                sols.format.dims().to_vec(),
            ));
        }
        for t in &sols.tuples {
            worst = worst.max(f.relative_value(&t.rank_one)?);
        }
    }
    Ok(worst)
}

/// Relative least-squares residual of `t` against the rank-one tensors.
pub fn membership_residual(t: &CTensor, sols: &SolutionSet, rule: RankRule) -> Result<f64> {
    let m = span_matrix(sols)?;
    Ok(least_squares(&m, t.as_slice(), rule)?.relative_residual)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalDimCheck {
    pub measured: usize,
    pub formula: usize,
    pub agree: bool,
    pub ambiguous: bool,
}

/// Affine dimension of the critical space of `t`, measured from the rank of
/// its equations and compared with the closed formula.
pub fn critical_space_dim_check(t: &CTensor, rule: RankRule) -> Result<CriticalDimCheck> {
    let format = t.format();
    let rank = matrix_rank(&stack_forms(&critical_space_equations(t))?, rule);
    let measured = format.total_size() - rank.rank;
    let formula = critical_space_dim(format);
    Ok(CriticalDimCheck {
        measured,
        formula,
        agree: measured == formula,
        ambiguous: rank.ambiguous,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    pub format: Vec<usize>,
    pub ed: u64,
    pub tuples: usize,
    pub provisional: bool,
    pub span_matrix_rank: usize,
    pub span_dim_projective: usize,
    pub critical_dim_projective: usize,
    pub extra_relations: usize,
    /// `None` when the span matrix has full column rank.
    pub gap_ratio: Option<f64>,
    pub rank_ambiguous: bool,
    pub membership_residual: f64,
    pub in_span: bool,
    pub expected_span_dim: Option<usize>,
}

pub fn analyze_span(
    t: &CTensor,
    sols: &SolutionSet,
    rule: RankRule,
    membership_tol: f64,
) -> Result<SpanReport> {
    let span = span_dimension(sols, rule)?;
    let crit = critical_space_dim_check(t, rule)?;
    let critical_dim_projective = crit.measured - 1;
    let membership = membership_residual(t, sols, rule)?;
    Ok(SpanReport {
        format: sols.format.dims().to_vec(),
        ed: sols.ed,
        tuples: sols.len(),
        provisional: span.provisional,
        span_matrix_rank: span.rank.rank,
        span_dim_projective: span.projective,
        critical_dim_projective,
        extra_relations: critical_dim_projective.saturating_sub(span.projective),
        gap_ratio: span.rank.gap_ratio.is_finite().then_some(span.rank.gap_ratio),
        rank_ambiguous: span.rank.ambiguous || crit.ambiguous,
        membership_residual: membership,
        in_span: membership < membership_tol,
        expected_span_dim: expected_span_dim(&sols.format),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monodromy::{solve_singular_tuples, SolverConfig};
    use crate::tensor::MultiIndex;

    fn format(d: &[usize]) -> Format {
        Format::new(d.to_vec()).unwrap()
    }

    #[test]
    fn equation_counts() {
        assert_eq!(critical_space_equations(&CTensor::random(&format(&[2, 2, 4]), 0)).len(), 8);
        assert_eq!(critical_space_equations(&CTensor::random(&format(&[2, 3, 5]), 0)).len(), 14);
    }

    #[test]
    fn tensor_lies_in_its_critical_space() {
        for (i, d) in [[2, 2, 4], [2, 3, 5], [3, 3, 3]].iter().enumerate() {
            let t = CTensor::random(&format(d), i as u64);
            let scale = t.norm() * t.norm();
            for f in critical_space_equations(&t) {
                assert!(f.evaluate(&t).unwrap().norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn matrix_equation_is_commutator() {
        // For a matrix T the (factor 0, p, q) form is (T Z^t - Z T^t)_{pq}.
        let f = format(&[3, 4]);
        let t = CTensor::random(&f, 5);
        let z = CTensor::random(&f, 6);
        for form in critical_space_equations(&t) {
            let FormLabel::Critical { factor, p, q } = form.label else {
                unreachable!()
            };
            let at = |m: &CTensor, i: usize, j: usize| m.get(&MultiIndex(vec![i, j])).unwrap();
            let expected: C64 = if factor == 0 {
                (0..4).map(|j| at(&t, p, j) * at(&z, q, j) - at(&t, q, j) * at(&z, p, j)).sum()
            } else {
                (0..3).map(|i| at(&t, i, p) * at(&z, i, q) - at(&t, i, q) * at(&z, i, p)).sum()
            };
            assert!((form.evaluate(&z).unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn critical_dimensions_match_formula() {
        for (d, dim) in [(vec![2, 2, 4], 8), (vec![2, 3, 6], 17), (vec![2, 2, 5], 8), (vec![2, 3, 5], 16)] {
            let c = critical_space_dim_check(&CTensor::random(&format(&d), 3), RankRule::default()).unwrap();
            assert_eq!(c.measured, dim, "{d:?}");
            assert!(c.agree && !c.ambiguous);
        }
    }

    #[test]
    fn span_of_two_by_two_by_four() {
        let t = CTensor::random(&format(&[2, 2, 4]), 11);
        let sols = solve_singular_tuples(&t, 3, &SolverConfig::default()).unwrap();
        let r = analyze_span(&t, &sols, RankRule::default(), MEMBERSHIP_TOL).unwrap();
        assert_eq!(r.span_dim_projective, 6);
        assert_eq!(r.critical_dim_projective, 7);
        assert_eq!(r.extra_relations, 1);
        assert!(r.in_span && !r.provisional && !r.rank_ambiguous);
        assert!(r.gap_ratio.unwrap() >= 1e6);
        assert!(containment_check(&critical_space_equations(&t), &sols).unwrap() < 1e-8);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SpanReport>(&json).unwrap(), r);
    }

    #[test]
    fn random_form_does_not_vanish() {
        let f = format(&[2, 2, 3]);
        let t = CTensor::random(&f, 2);
        let sols = solve_singular_tuples(&t, 1, &SolverConfig::default()).unwrap();
        let form = LinearFormZ {
            coefficients: CTensor::random(&f, 99),
            label: FormLabel::Critical { factor: 0, p: 0, q: 1 },
        };
        assert!(containment_check(&[form], &sols).unwrap() > 1e-3);
    }

    #[test]
    fn proven_membership_formats() {
        for d in [[2, 2, 4], [2, 2, 9], [2, 3, 5], [4, 3, 2], [2, 2, 3], [3, 3, 5]] {
            assert!(membership_proven(&format(&d)), "{d:?}");
        }
        assert!(membership_proven(&format(&[2, 2, 2, 2, 6])));
        for d in [vec![3, 3, 6], vec![2, 2, 2, 5], vec![2, 4, 6]] {
            assert!(!membership_proven(&format(&d)), "{d:?}");
        }
    }

    #[test]
    fn empty_set_is_an_error() {
        let f = format(&[2, 2]);
        let sols = SolutionSet::empty(&f, 0, 1e-6);
        assert!(matches!(span_dimension(&sols, RankRule::default()), Err(Error::EmptySolutionSet)));
    }
}
