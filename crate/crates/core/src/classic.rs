//! Closed-form and design-based scale-up estimators.
//!
//! Missing cells: a respondent's degree uses only their observed known
//! columns, and respondents with no observed known answer or a missing answer
//! for the target column are left out of that column's estimate. The count of
//! left-out respondents is reported in the estimate metadata.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ard::{summarize, ArdSurvey, DegreeEstimates, EnrichedArd, SizeEstimate};
use crate::error::{NsumError, Result};

/// Normal quantile used for the MLE interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Known sizes below this fraction of `N` trigger the MoS variance warning.
pub const DEFAULT_MOS_SMALL_FRACTION: f64 = 0.001;

const ZERO_DEGREE_DECISION: &str = "respondents with zero estimated degree are excluded from the average";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicMethod {
    Pimle,
    Mle,
    Mos,
    Wmle,
    Wmos,
}

impl ClassicMethod {
    pub const ALL: [ClassicMethod; 5] = [
        ClassicMethod::Pimle,
        ClassicMethod::Mle,
        ClassicMethod::Mos,
        ClassicMethod::Wmle,
        ClassicMethod::Wmos,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClassicMethod::Pimle => "pimle",
            ClassicMethod::Mle => "mle",
            ClassicMethod::Mos => "mos",
            ClassicMethod::Wmle => "wmle",
            ClassicMethod::Wmos => "wmos",
        }
    }

    pub fn estimate(self, survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
        match self {
            ClassicMethod::Pimle => pimle(survey, unknown),
            ClassicMethod::Mle => mle(survey, unknown),
            ClassicMethod::Mos => mos(survey, unknown),
            ClassicMethod::Wmle => weighted_mle(survey, unknown),
            ClassicMethod::Wmos => weighted_mos(survey, unknown),
        }
    }
}

impl fmt::Display for ClassicMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ClassicMethod {
    type Err = NsumError;

    fn from_str(s: &str) -> Result<Self> {
        ClassicMethod::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| NsumError::InvalidInput(format!("unknown classic method `{s}`")))
    }
}

fn require_known(survey: &ArdSurvey) -> Result<()> {
    if survey.known_sizes.is_empty() || survey.known_sizes.values().sum::<u64>() == 0 {
        Err(NsumError::NoKnownColumns)
    } else {
        Ok(())
    }
}

/// `d_i = N * sum_k y_ik / sum_k N_k` over each respondent's observed known columns.
pub fn pimle_degrees(survey: &ArdSurvey) -> Result<DegreeEstimates> {
    require_known(survey)?;
    let big_n = survey.population_total as f64;
    let degrees = (0..survey.n_respondents())
        .map(|i| {
            let (mut ys, mut sizes) = (0.0, 0.0);
            for (&k, &nk) in &survey.known_sizes {
                if let Some(y) = survey.get(i, k) {
                    ys += f64::from(y);
                    sizes += nk as f64;
                }
            }
            if sizes > 0.0 {
                big_n * ys / sizes
            } else {
                0.0
            }
        })
        .collect();
    Ok(DegreeEstimates {
        degrees,
        method_tag: "pimle".into(),
    })
}

/// `d_i = (N / L) * sum_k y_ik / N_k`, with `L` the respondent's observed known columns.
pub fn mos_degrees(survey: &ArdSurvey) -> Result<DegreeEstimates> {
    require_known(survey)?;
    let big_n = survey.population_total as f64;
    let degrees = (0..survey.n_respondents())
        .map(|i| {
            let mut acc = 0.0;
            let mut l = 0usize;
            for (&k, &nk) in &survey.known_sizes {
                if let Some(y) = survey.get(i, k) {
                    acc += f64::from(y) / nk as f64;
                    l += 1;
                }
            }
            if l > 0 {
                big_n / l as f64 * acc
            } else {
                0.0
            }
        })
        .collect();
    Ok(DegreeEstimates {
        degrees,
        method_tag: "mos".into(),
    })
}

fn has_known_answer(survey: &ArdSurvey, i: usize) -> bool {
    survey.known_sizes.keys().any(|&k| survey.get(i, k).is_some())
}

/// Rows that can contribute to an estimate for `unknown`: answered the target
/// question and at least one known question.
fn usable_rows(survey: &ArdSurvey, unknown: usize) -> Vec<(usize, f64)> {
    (0..survey.n_respondents())
        .filter(|&i| has_known_answer(survey, i))
        .filter_map(|i| survey.get(i, unknown).map(|y| (i, f64::from(y))))
        .collect()
}

fn base_estimate(survey: &ArdSurvey, method: &str, unknown: usize, point: f64, used: usize) -> SizeEstimate {
    let mut e = SizeEstimate::new(method, point);
    e.metadata.excluded_respondents = survey.n_respondents() - used;
    e.metadata.unknown = Some(survey.columns[unknown].clone());
    e.metadata.population_total = Some(survey.population_total);
    e
}

/// Average of per-respondent back-estimates `N * w_i * y_iu / d_i`.
fn back_estimate_average(
    survey: &ArdSurvey,
    unknown: usize,
    degrees: &DegreeEstimates,
    weighted: bool,
    method: &str,
) -> Result<SizeEstimate> {
    survey.ensure_unknown(unknown)?;
    let big_n = survey.population_total as f64;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut any_rows = false;
    for (i, y) in usable_rows(survey, unknown) {
        any_rows = true;
        let d = degrees.degrees[i];
        if d > 0.0 {
            let w = if weighted { survey.weight(i) } else { 1.0 };
            total += big_n * y * w / d;
            used += 1;
        }
    }
    if used == 0 {
        return Err(if any_rows {
            NsumError::AllDegreesZero
        } else {
            NsumError::InvalidInput("no respondent answered the target question".into())
        });
    }
    let mut e = base_estimate(survey, method, unknown, total / used as f64, used);
    e.metadata.decisions.push(ZERO_DEGREE_DECISION.into());
    Ok(e)
}

/// Plug-in MLE: mean of `N * y_iu / d_i` with PIMLE degrees. No standard error.
pub fn pimle(survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
    let degrees = pimle_degrees(survey)?;
    back_estimate_average(survey, unknown, &degrees, false, "pimle")
}

fn ratio_estimate(survey: &ArdSurvey, unknown: usize, weighted: bool, method: &str) -> Result<SizeEstimate> {
    survey.ensure_unknown(unknown)?;
    let degrees = pimle_degrees(survey)?;
    let rows = usable_rows(survey, unknown);
    let sum_d: f64 = rows.iter().map(|&(i, _)| degrees.degrees[i]).sum();
    if sum_d <= 0.0 {
        return Err(NsumError::ZeroDegreeSum);
    }
    let sum_y: f64 = rows
        .iter()
        .map(|&(i, y)| if weighted { y * survey.weight(i) } else { y })
        .sum();
    let big_n = survey.population_total as f64;
    let point = big_n * sum_y / sum_d;
    let mut e = base_estimate(survey, method, unknown, point, rows.len());
    if !weighted {
        let se = (big_n * point / sum_d).sqrt();
        e.std_error = Some(se);
        e.interval = Some(((point - Z_95 * se).max(0.0), (point + Z_95 * se).min(big_n)));
        e.metadata
            .decisions
            .push("interval is point +/- 1.96 SE truncated to [0, N]".into());
    }
    Ok(e)
}

/// `N * sum_i y_iu / sum_i d_i` with PIMLE degrees, SE `sqrt(N * N_u / sum_i d_i)`.
pub fn mle(survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
    ratio_estimate(survey, unknown, false, "mle")
}

/// `N * sum_i w_i y_iu / sum_i d_i`. Weights are used as given (not renormalized),
/// so scaling every weight by `c` scales the estimate by `c`.
pub fn weighted_mle(survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
    if survey.weights.is_none() {
        return Err(NsumError::MissingWeights);
    }
    ratio_estimate(survey, unknown, true, "wmle")
}

pub fn mos(survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
    mos_with_threshold(survey, unknown, DEFAULT_MOS_SMALL_FRACTION, false)
}

pub fn weighted_mos(survey: &ArdSurvey, unknown: usize) -> Result<SizeEstimate> {
    if survey.weights.is_none() {
        return Err(NsumError::MissingWeights);
    }
    mos_with_threshold(survey, unknown, DEFAULT_MOS_SMALL_FRACTION, true)
}

/// Mean-of-sums back-estimate. Known sizes below `small_fraction * N` add a
/// warning to the metadata.
pub fn mos_with_threshold(
    survey: &ArdSurvey,
    unknown: usize,
    small_fraction: f64,
    weighted: bool,
) -> Result<SizeEstimate> {
    let degrees = mos_degrees(survey)?;
    let method = if weighted { "wmos" } else { "mos" };
    let mut e = back_estimate_average(survey, unknown, &degrees, weighted, method)?;
    let cutoff = small_fraction * survey.population_total as f64;
    for (&k, &nk) in &survey.known_sizes {
        if (nk as f64) < cutoff {
            e.metadata.warnings.push(format!(
                "known subpopulation {} (N_k = {nk}) is below {small_fraction} * N; MoS variance may be very large",
                survey.columns[k]
            ));
        }
    }
    Ok(e)
}

/// Bracket on an unknown size from zero-answer proportions.
///
/// Uses `P(W_k) ~ sum_m (1 - N_k/N)^m P(d = m)`, which drops the slack term `g`
/// of the exact bound; `g` is never estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnsenBracket {
    pub lower: u64,
    pub upper: u64,
    /// 1-based `j` with `P(W_{j-1}) > P(W_u) >= P(W_j)` over the known
    /// columns sorted by size; `1` means below the smallest known size and
    /// `L + 1` above the largest.
    pub ordering_position: usize,
    pub p_unknown: f64,
}

pub fn johnsen_bounds(survey: &ArdSurvey, unknown: usize) -> Result<JohnsenBracket> {
    survey.ensure_unknown(unknown)?;
    let summary = summarize(survey);
    let mut known: Vec<(u64, usize)> = survey.known_sizes.iter().map(|(&k, &s)| (s, k)).collect();
    known.sort_unstable();
    if known.len() < 2 {
        return Err(NsumError::InvalidInput("Johnsen bounds need at least two known subpopulations".into()));
    }
    for pair in known.windows(2) {
        let ((s1, k1), (s2, k2)) = (pair[0], pair[1]);
        if s1 == s2 {
            return Err(NsumError::InvalidInput(format!(
                "known subpopulations {} and {} share size {s1}",
                survey.columns[k1], survey.columns[k2]
            )));
        }
        let (p1, p2) = (summary[k1].zero_proportion, summary[k2].zero_proportion);
        if p1 <= p2 {
            return Err(NsumError::OrderingViolation {
                smaller: survey.columns[k1].clone(),
                smaller_size: s1,
                smaller_pw: p1,
                larger: survey.columns[k2].clone(),
                larger_size: s2,
                larger_pw: p2,
            });
        }
    }
    let p_u = summary[unknown].zero_proportion;
    let above = known.iter().filter(|&&(_, k)| summary[k].zero_proportion > p_u).count();
    let lower = if above == 0 { 0 } else { known[above - 1].0 };
    let upper = if above == known.len() {
        survey.population_total
    } else {
        known[above].0
    };
    Ok(JohnsenBracket {
        lower,
        upper,
        ordering_position: above + 1,
        p_unknown: p_u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnsumComponents {
    /// Horvitz-Thompson total of out-reports to the hidden group.
    pub numerator: f64,
    /// Weighted mean visibility of hidden-group members.
    pub denominator: f64,
}

pub const GNSUM_DENOMINATOR_DECISION: &str =
    "visibility = sum(aware_i / pi_i) / sum(1 / pi_i) over the hidden-population sample";

/// Generalized scale-up estimate `y_F,u / v_bar`.
///
/// The numerator is `sum_i y_iu / pi_i` over the frame sample; the denominator
/// is a ratio-of-totals mean of the aware counts in the enriched sample.
pub fn gnsum(
    enriched: &EnrichedArd,
    frame_survey: &ArdSurvey,
    unknown: usize,
    frame_inclusion: &[f64],
) -> Result<(SizeEstimate, GnsumComponents)> {
    enriched.check()?;
    frame_survey.ensure_unknown(unknown)?;
    if frame_inclusion.len() != frame_survey.n_respondents() {
        return Err(NsumError::InvalidInput(format!(
            "expected {} frame inclusion probabilities, found {}",
            frame_survey.n_respondents(),
            frame_inclusion.len()
        )));
    }
    let mut numerator = 0.0;
    let mut used = 0;
    for (i, &pi) in frame_inclusion.iter().enumerate() {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(NsumError::InvalidInput(format!("frame inclusion probability {pi} outside (0, 1]")));
        }
        if let Some(y) = frame_survey.get(i, unknown) {
            numerator += f64::from(y) / pi;
            used += 1;
        }
    }
    let mut aware_total = 0.0;
    let mut weight_total = 0.0;
    for (&a, &pi) in enriched.aware_counts.iter().zip(&enriched.inclusion_probs) {
        aware_total += f64::from(a) / pi;
        weight_total += 1.0 / pi;
    }
    if aware_total <= 0.0 {
        return Err(NsumError::ZeroVisibility);
    }
    let denominator = aware_total / weight_total;
    // numerator / (aware / weight), arranged so integral inputs divide exactly.
    let point = numerator * weight_total / aware_total;
    let mut e = SizeEstimate::new("gnsum", point);
    e.metadata.excluded_respondents = frame_survey.n_respondents() - used;
    e.metadata.unknown = Some(frame_survey.columns[unknown].clone());
    e.metadata.population_total = Some(frame_survey.population_total);
    e.metadata.decisions.push(GNSUM_DENOMINATOR_DECISION.into());
    Ok((e, GnsumComponents { numerator, denominator }))
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use proptest::prelude::*;

    use super::*;
    use crate::ard::fixtures::two_respondents;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn pimle_degree_closed_form() {
        let s = ArdSurvey::from_counts(
            vec!["a".into(), "b".into(), "u".into()],
            &[vec![10, 10, 0], vec![0, 0, 0], vec![20, 20, 0]],
            1000,
            BTreeMap::from([(0, 100), (1, 100)]),
            BTreeSet::from([2]),
        );
        let d = pimle_degrees(&s).unwrap();
        assert_eq!(d.degrees, vec![100.0, 0.0, 200.0]);
        let m = mos_degrees(&s).unwrap();
        assert_eq!(m.degrees, vec![100.0, 0.0, 200.0]);
    }

    #[test]
    fn no_known_columns_is_an_error() {
        let s = ArdSurvey::from_counts(vec!["u".into()], &[vec![1]], 100, BTreeMap::new(), BTreeSet::from([0]));
        assert!(matches!(pimle_degrees(&s), Err(NsumError::NoKnownColumns)));
        assert!(matches!(mos_degrees(&s), Err(NsumError::NoKnownColumns)));
    }

    #[test]
    fn two_respondent_fixture() {
        let s = two_respondents();
        assert!(close(pimle(&s, 2).unwrap().point, 30.0));
        let m = mle(&s, 2).unwrap();
        assert!(close(m.point, 30.0));
        assert!(close(m.std_error.unwrap(), 10.0));
        assert!(close(mos(&s, 2).unwrap().point, 30.0));
        assert!(pimle(&s, 2).unwrap().std_error.is_none());
    }

    #[test]
    fn weighted_fixture_values() {
        let mut s = two_respondents();
        assert!(matches!(weighted_mle(&s, 2), Err(NsumError::MissingWeights)));
        s.weights = Some(vec![2.0, 1.0]);
        assert!(close(weighted_mle(&s, 2).unwrap().point, 40.0));
        assert!(close(weighted_mos(&s, 2).unwrap().point, 45.0));
        s.weights = Some(vec![1.0, 1.0]);
        assert!(close(weighted_mle(&s, 2).unwrap().point, mle(&s, 2).unwrap().point));
        assert!(close(weighted_mos(&s, 2).unwrap().point, mos(&s, 2).unwrap().point));
        s.weights = Some(vec![3.0, 3.0]);
        assert!(close(weighted_mle(&s, 2).unwrap().point, 90.0));
    }

    #[test]
    fn zero_unknown_answers_give_zero() {
        let mut s = two_respondents();
        s.responses[2] = Some(0);
        s.responses[5] = Some(0);
        for m in [ClassicMethod::Pimle, ClassicMethod::Mle, ClassicMethod::Mos] {
            assert_eq!(m.estimate(&s, 2).unwrap().point, 0.0);
        }
        s.weights = Some(vec![2.0, 1.0]);
        assert_eq!(weighted_mos(&s, 2).unwrap().point, 0.0);
    }

    #[test]
    fn single_respondent_saturates_at_population() {
        // y_u equal to the degree: everyone they know is in the hidden group.
        let s = ArdSurvey::from_counts(
            vec!["a".into(), "u".into()],
            &[vec![10, 100]],
            1000,
            BTreeMap::from([(0, 100)]),
            BTreeSet::from([1]),
        );
        let e = mle(&s, 1).unwrap();
        assert!(close(e.point, 1000.0));
        let (lo, hi) = e.interval.unwrap();
        assert!(lo >= 0.0 && hi <= 1000.0 && lo <= e.point && e.point <= hi);
    }

    #[test]
    fn zero_degree_respondents_are_excluded_and_counted() {
        let s = ArdSurvey::from_counts(
            vec!["a".into(), "u".into()],
            &[vec![10, 1], vec![0, 0]],
            1000,
            BTreeMap::from([(0, 100)]),
            BTreeSet::from([1]),
        );
        let e = pimle(&s, 1).unwrap();
        assert_eq!(e.metadata.excluded_respondents, 1);
        assert!(close(e.point, 10.0));
        let all_zero = ArdSurvey::from_counts(
            vec!["a".into(), "u".into()],
            &[vec![0, 1]],
            1000,
            BTreeMap::from([(0, 100)]),
            BTreeSet::from([1]),
        );
        assert!(matches!(pimle(&all_zero, 1), Err(NsumError::AllDegreesZero)));
        assert!(matches!(mle(&all_zero, 1), Err(NsumError::ZeroDegreeSum)));
    }

    #[test]
    fn mos_warns_on_tiny_known_size() {
        let s = ArdSurvey::from_counts(
            vec!["tiny".into(), "big".into(), "u".into()],
            &[vec![1, 50, 2], vec![0, 40, 3]],
            100_000,
            BTreeMap::from([(0, 2), (1, 5000)]),
            BTreeSet::from([2]),
        );
        let e = mos(&s, 2).unwrap();
        assert_eq!(e.metadata.warnings.len(), 1);
        assert!(e.metadata.warnings[0].contains("tiny"));
        // The tiny column dominates respondent 1's degree: (N/2)(1/2 + 50/5000).
        let d = mos_degrees(&s).unwrap();
        assert!(close(d.degrees[0], 50_000.0 * (0.5 + 0.01)));
        assert!(mle(&s, 2).unwrap().metadata.warnings.is_empty());
    }

    fn bracket_survey(p_known: [usize; 2], p_u: usize) -> ArdSurvey {
        // 20 respondents; the given number of zeros per column.
        let rows: Vec<Vec<u32>> = (0..20)
            .map(|i| {
                vec![
                    u32::from(i >= p_known[0]),
                    u32::from(i >= p_known[1]),
                    u32::from(i >= p_u),
                ]
            })
            .collect();
        ArdSurvey::from_counts(
            vec!["small".into(), "large".into(), "u".into()],
            &rows,
            10_000,
            BTreeMap::from([(0, 100), (1, 300)]),
            BTreeSet::from([2]),
        )
    }

    #[test]
    fn johnsen_brackets() {
        let b = johnsen_bounds(&bracket_survey([18, 12], 15), 2).unwrap();
        assert_eq!((b.lower, b.upper, b.ordering_position), (100, 300, 2));
        let b = johnsen_bounds(&bracket_survey([18, 12], 19), 2).unwrap();
        assert_eq!((b.lower, b.upper, b.ordering_position), (0, 100, 1));
        let b = johnsen_bounds(&bracket_survey([18, 12], 5), 2).unwrap();
        assert_eq!((b.lower, b.upper, b.ordering_position), (300, 10_000, 3));
    }

    #[test]
    fn johnsen_ordering_violation_names_pair() {
        match johnsen_bounds(&bracket_survey([10, 12], 15), 2) {
            Err(NsumError::OrderingViolation { smaller, larger, .. }) => {
                assert_eq!((smaller.as_str(), larger.as_str()), ("small", "large"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn johnsen_position_is_monotone_in_zero_share() {
        let mut last = usize::MAX;
        for p_u in 0..=20 {
            let b = johnsen_bounds(&bracket_survey([18, 12], p_u), 2).unwrap();
            assert!(b.ordering_position <= last);
            last = b.ordering_position;
        }
    }

    fn enriched(aware: Vec<u32>, out: Vec<u32>, pi: Vec<f64>) -> EnrichedArd {
        EnrichedArd {
            member_ids: (0..aware.len()).map(|i| format!("h{i}")).collect(),
            out_reports: out,
            aware_counts: aware,
            inclusion_probs: pi,
            frame_total: 1000,
        }
    }

    #[test]
    fn gnsum_components_and_linearity() {
        let s = two_respondents();
        let e = enriched(vec![4, 8], vec![10, 10], vec![0.5, 0.5]);
        let (est, c) = gnsum(&e, &s, 2, &[0.1, 0.1]).unwrap();
        assert!(close(c.numerator, 90.0));
        assert!(close(c.denominator, 6.0));
        assert!(close(est.point, 15.0));
        let halved = enriched(vec![2, 4], vec![10, 10], vec![0.5, 0.5]);
        let (est2, _) = gnsum(&halved, &s, 2, &[0.1, 0.1]).unwrap();
        assert_eq!(est2.point, 2.0 * est.point);
        let zero = enriched(vec![0, 0], vec![10, 10], vec![0.5, 0.5]);
        assert!(matches!(gnsum(&zero, &s, 2, &[0.1, 0.1]), Err(NsumError::ZeroVisibility)));
    }

    fn arb_survey() -> impl Strategy<Value = ArdSurvey> {
        (1usize..5, 1usize..40).prop_flat_map(|(l, n)| {
            (
                prop::collection::vec(1u64..5000, l),
                prop::collection::vec(prop::collection::vec(0u32..60, l + 1), n),
            )
                .prop_map(move |(sizes, mut rows)| {
                    // Keep every degree positive.
                    for r in &mut rows {
                        r[0] += 1;
                    }
                    let mut cols: Vec<String> = (0..l).map(|k| format!("k{k}")).collect();
                    cols.push("u".into());
                    ArdSurvey::from_counts(
                        cols,
                        &rows,
                        100_000,
                        sizes.iter().enumerate().map(|(k, &s)| (k, s)).collect(),
                        BTreeSet::from([l]),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn mle_two_forms_agree(s in arb_survey()) {
            let u = *s.unknown_columns.iter().next().unwrap();
            let e = mle(&s, u).unwrap();
            let sum_yu: f64 = s.column(u).flatten().map(f64::from).sum();
            let sum_nk: f64 = s.known_sizes.values().map(|&v| v as f64).sum();
            let sum_yk: f64 = s.known_sizes.keys().flat_map(|&k| s.column(k).flatten()).map(f64::from).sum();
            let second = sum_yu * sum_nk / sum_yk;
            prop_assert!((e.point - second).abs() <= 1e-10 * second.abs().max(1.0));
        }

        #[test]
        fn scale_equivariance(s in arb_survey(), c in 2u64..7) {
            let u = *s.unknown_columns.iter().next().unwrap();
            let mut t = s.clone();
            t.population_total *= c;
            for v in t.known_sizes.values_mut() {
                *v *= c;
            }
            let cf = c as f64;
            for (a, b) in pimle_degrees(&s).unwrap().degrees.iter().zip(pimle_degrees(&t).unwrap().degrees) {
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
            for (a, b) in mos_degrees(&s).unwrap().degrees.iter().zip(mos_degrees(&t).unwrap().degrees) {
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
            for m in [ClassicMethod::Pimle, ClassicMethod::Mle, ClassicMethod::Mos] {
                let (a, b) = (m.estimate(&s, u).unwrap().point, m.estimate(&t, u).unwrap().point);
                prop_assert!((a * cf - b).abs() <= 1e-12 * b.max(1.0));
            }
        }

        #[test]
        fn row_permutation_invariance(s in arb_survey(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let u = *s.unknown_columns.iter().next().unwrap();
            let mut order: Vec<usize> = (0..s.n_respondents()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let t = s.select_rows(&order);
            for m in [ClassicMethod::Pimle, ClassicMethod::Mle, ClassicMethod::Mos] {
                let (a, b) = (m.estimate(&s, u).unwrap().point, m.estimate(&t, u).unwrap().point);
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }

        #[test]
        fn pimle_equals_mle_for_equal_degrees(
            ys in prop::collection::vec(0u32..30, 1..20),
            base in 1u32..20,
        ) {
            let rows: Vec<Vec<u32>> = ys.iter().map(|&y| vec![base, base, y]).collect();
            let s = ArdSurvey::from_counts(
                vec!["a".into(), "b".into(), "u".into()],
                &rows,
                10_000,
                BTreeMap::from([(0, 300), (1, 700)]),
                BTreeSet::from([2]),
            );
            let (p, m) = (pimle(&s, 2).unwrap().point, mle(&s, 2).unwrap().point);
            prop_assert!((p - m).abs() <= 1e-10 * m.max(1.0));
        }
    }
}
