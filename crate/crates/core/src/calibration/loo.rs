use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ard::ArdSurvey;
use crate::classic::ClassicMethod;
use crate::error::{NsumError, Result};

/// One leave-one-out fold: known column `subpop` re-estimated as if unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRow {
    pub subpop: String,
    pub known_size: u64,
    pub backestimate: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

/// Back-estimates every known column from the remaining known columns.
/// Folds run in parallel; rows come back in column order.
pub fn loo_backestimates(survey: &ArdSurvey, method: ClassicMethod) -> Result<Vec<LooRow>> {
    if survey.known_sizes.len() < 2 {
        return Err(NsumError::InvalidInput(format!(
            "leave-one-out needs at least 2 known columns, got {}",
            survey.known_sizes.len()
        )));
    }
    let folds: Vec<(usize, u64)> = survey.known_sizes.iter().map(|(&k, &s)| (k, s)).collect();
    folds
        .par_iter()
        .map(|&(k, size)| {
            let name = survey.columns[k].clone();
            let est = method
                .estimate(&survey.with_column_hidden(k), k)
                .map_err(|e| NsumError::Fold {
                    fold: name.clone(),
                    source: Box::new(e),
                })?;
            let ratio = est.point / size as f64;
            Ok(LooRow {
                subpop: name,
                known_size: size,
                backestimate: est.point,
                ratio,
                log_ratio: ratio.ln(),
            })
        })
        .collect()
}

/// `subpop,known_size,backestimate,ratio,log_ratio`
pub fn render_loo_csv(rows: &[LooRow]) -> String {
    let mut s = String::from("subpop,known_size,backestimate,ratio,log_ratio\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.subpop, r.known_size, r.backestimate, r.ratio, r.log_ratio);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimRound {
    pub round: usize,
    /// Folds as computed at the start of the round.
    pub ratios: Vec<LooRow>,
    pub removed: String,
    pub removed_log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimOutcome {
    #[serde(skip)]
    pub survey: Option<ArdSurvey>,
    pub rounds: Vec<TrimRound>,
    /// Folds of the trimmed survey; empty when fewer than 2 known columns remain.
    pub final_ratios: Vec<LooRow>,
    pub stop_reason: String,
}

impl TrimOutcome {
    pub fn removed(&self) -> Vec<&str> {
        self.rounds.iter().map(|r| r.removed.as_str()).collect()
    }

    pub fn trimmed(&self) -> &ArdSurvey {
        self.survey.as_ref().expect("trimmed survey present")
    }
}

/// Repeatedly drops the known column with the largest `|log ratio|`,
/// recomputing every fold after each removal, until all ratios are within
/// `tolerance`, `max_removals` is reached, or only 2 known columns remain.
pub fn trim_stepwise(
    survey: &ArdSurvey,
    method: ClassicMethod,
    tolerance: f64,
    max_removals: Option<usize>,
) -> Result<TrimOutcome> {
    if !(tolerance >= 0.0) {
        return Err(NsumError::InvalidInput(format!("tolerance {tolerance} must be nonnegative")));
    }
    let mut current = survey.clone();
    let mut rounds = Vec::new();
    let limit = max_removals.unwrap_or(usize::MAX);
    let stop_reason;
    loop {
        let ratios = loo_backestimates(&current, method)?;
        let worst = ratios
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.log_ratio.abs().total_cmp(&b.1.log_ratio.abs()))
            .map(|(i, r)| (i, r.log_ratio));
        let (idx, worst_log) = worst.expect("at least two folds");
        if worst_log.abs() <= tolerance {
            stop_reason = "all ratios within tolerance".to_string();
            break;
        }
        if rounds.len() >= limit {
            stop_reason = "maximum removals reached".to_string();
            break;
        }
        if current.known_sizes.len() <= 2 {
            stop_reason = "two known columns remain".to_string();
            break;
        }
        let name = ratios[idx].subpop.clone();
        let k = current.column_index(&name).expect("fold column exists");
        current = current.without_column(k);
        rounds.push(TrimRound {
            round: rounds.len() + 1,
            ratios,
            removed: name,
            removed_log_ratio: worst_log,
        });
    }
    let final_ratios = loo_backestimates(&current, method)?;
    Ok(TrimOutcome {
        survey: Some(current),
        rounds,
        final_ratios,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use rand_distr::{Binomial, Distribution, LogNormal};

    use super::*;
    use crate::rng;

    /// Unbiased binomial survey: five known columns and one unknown.
    fn clean_survey(n: usize, seed: u64) -> (ArdSurvey, f64) {
        let total = 100_000u64;
        let sizes = [1000u64, 1500, 2000, 2500, 3000, 2000];
        let mut r = rng::stream(seed, &[]);
        let deg = LogNormal::<f64>::new(5.0, 0.5).unwrap();
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let d = deg.sample(&mut r).round() as u64;
                sizes
                    .iter()
                    .map(|&s| Binomial::new(d, s as f64 / total as f64).unwrap().sample(&mut r) as u32)
                    .collect()
            })
            .collect();
        let columns = (0..sizes.len()).map(|k| format!("k{k}")).collect();
        let known = (0..5).map(|k| (k, sizes[k])).collect::<BTreeMap<_, _>>();
        let s = ArdSurvey::from_counts(columns, &rows, total, known, BTreeSet::from([5]));
        (s, sizes[5] as f64)
    }

    fn inflate(s: &ArdSurvey, k: usize, factor: u32) -> ArdSurvey {
        let mut t = s.clone();
        let w = t.n_columns();
        for i in 0..t.n_respondents() {
            if let Some(v) = t.responses[i * w + k].as_mut() {
                *v *= factor;
            }
        }
        t
    }

    #[test]
    fn unbiased_ratios_are_near_one() {
        let (s, _) = clean_survey(500, 1);
        let rows = loo_backestimates(&s, ClassicMethod::Mle).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!((0.8..=1.25).contains(&r.ratio), "{r:?}");
        }
    }

    #[test]
    fn duplicated_column_is_self_consistent_and_doubling_shows() {
        let (s, _) = clean_survey(500, 2);
        let mut dup = s.clone();
        let w = s.n_columns();
        dup.columns.push("k0_copy".into());
        dup.responses = (0..s.n_respondents())
            .flat_map(|i| {
                let mut row = s.row(i).to_vec();
                row.push(s.get(i, 0));
                row
            })
            .collect();
        dup.known_sizes.insert(w, s.known_sizes[&0]);
        let rows = loo_backestimates(&dup, ClassicMethod::Mle).unwrap();
        let copy = rows.iter().find(|r| r.subpop == "k0_copy").unwrap();
        assert!((copy.ratio - 1.0).abs() < 0.15, "{copy:?}");

        let doubled = loo_backestimates(&inflate(&s, 2, 2), ClassicMethod::Mle).unwrap();
        let r = doubled.iter().find(|r| r.subpop == "k2").unwrap();
        assert!((r.ratio - 2.0).abs() < 0.3, "{r:?}");
    }

    #[test]
    fn fold_failure_names_the_fold() {
        let s = crate::ard::fixtures::two_respondents();
        let err = loo_backestimates(&s, ClassicMethod::Wmle).unwrap_err();
        match err {
            NsumError::Fold { fold, .. } => assert_eq!(fold, "a"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn clean_survey_needs_no_trimming() {
        let (s, _) = clean_survey(500, 3);
        let out = trim_stepwise(&s, ClassicMethod::Mle, 0.3, None).unwrap();
        assert!(out.rounds.is_empty());
        assert_eq!(out.trimmed().known_sizes.len(), 5);
    }

    #[test]
    fn poisoned_column_goes_first_and_error_drops() {
        let (s, truth) = clean_survey(500, 4);
        let poisoned = inflate(&s, 3, 3);
        let out = trim_stepwise(&poisoned, ClassicMethod::Mle, 0.2, Some(1)).unwrap();
        assert_eq!(out.removed(), vec!["k3"]);
        let before = crate::classic::mle(&poisoned, 5).unwrap().point;
        let trimmed = out.trimmed();
        let after = crate::classic::mle(trimmed, trimmed.column_index("k5").unwrap()).unwrap().point;
        assert!((after - truth).abs() < (before - truth).abs());
    }

    #[test]
    fn never_trims_below_two_known_columns() {
        let (s, _) = clean_survey(200, 5);
        let out = trim_stepwise(&s, ClassicMethod::Mle, 0.0, None).unwrap();
        assert_eq!(out.trimmed().known_sizes.len(), 2);
        assert_eq!(out.rounds.len(), 3);
        for r in &out.rounds {
            assert!(r.removed_log_ratio.abs() > 0.0);
        }
    }
}
