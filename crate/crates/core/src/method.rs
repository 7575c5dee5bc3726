//! One entry point over every size estimator, keyed by a method label.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ard::{ArdSurvey, EnrichedArd, SizeEstimate};
use crate::bayes::{
    fit_maltiel, fit_teo, fit_zheng, posterior_size, BetaMeanDispersion, MaltielPriors, MaltielVariant, McmcConfig,
    OverdispersedPriors, PosteriorDraws, TeoPriors, TeoVariant,
};
use crate::classic::{gnsum, ClassicMethod};
use crate::error::{NsumError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Classic(ClassicMethod),
    Gnsum,
    Zheng,
    Maltiel(MaltielVariant),
    Teo(TeoVariant),
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Classic(ClassicMethod::Pimle),
        Method::Classic(ClassicMethod::Mle),
        Method::Classic(ClassicMethod::Mos),
        Method::Classic(ClassicMethod::Wmle),
        Method::Classic(ClassicMethod::Wmos),
        Method::Gnsum,
        Method::Zheng,
        Method::Maltiel(MaltielVariant::RandomDegree),
        Method::Maltiel(MaltielVariant::Barrier),
        Method::Maltiel(MaltielVariant::Transmission),
        Method::Maltiel(MaltielVariant::Combined),
        Method::Teo(TeoVariant::Transmission),
        Method::Teo(TeoVariant::TransmissionBarrier),
    ];

    pub fn label(self) -> String {
        match self {
            Method::Classic(m) => m.label().to_string(),
            Method::Gnsum => "gnsum".into(),
            Method::Zheng => "zheng".into(),
            Method::Maltiel(MaltielVariant::RandomDegree) => "maltiel-random".into(),
            Method::Maltiel(v) => format!("maltiel-{}", v.label()),
            Method::Teo(TeoVariant::Transmission) => "teo".into(),
            Method::Teo(TeoVariant::TransmissionBarrier) => "teo-barrier".into(),
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::Zheng | Method::Maltiel(_) | Method::Teo(_))
    }

    pub fn labels() -> Vec<String> {
        Method::ALL.iter().map(|m| m.label()).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Method {
    type Err = NsumError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| NsumError::InvalidInput(format!("unknown method `{s}`; expected one of {}", Method::labels().join(", "))))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inputs beyond the survey that some methods need.
#[derive(Debug, Clone, Default)]
pub struct MethodOptions {
    pub mcmc: McmcConfig,
    pub transmission_prior: Option<BetaMeanDispersion>,
    pub maltiel_priors: MaltielPriors,
    pub overdispersed_priors: OverdispersedPriors,
    pub teo_priors: TeoPriors,
    pub enriched: Option<EnrichedArd>,
    /// Frame-sample inclusion probabilities; `n / N` for every respondent when absent.
    pub frame_inclusion: Option<Vec<f64>>,
    /// Known columns used to renormalize the overdispersed fit; all known
    /// columns when absent.
    pub rare_columns: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub estimate: SizeEstimate,
    pub draws: Option<PosteriorDraws>,
}

pub fn estimate(method: Method, survey: &ArdSurvey, unknown: usize, options: &MethodOptions) -> Result<MethodOutput> {
    survey.ensure_unknown(unknown)?;
    let name = survey.columns[unknown].clone();
    let bayes = |draws: PosteriorDraws| -> Result<MethodOutput> {
        let mut estimate = posterior_size(&draws, &name)?;
        estimate.method = method.label();
        estimate.metadata.population_total = Some(survey.population_total);
        Ok(MethodOutput {
            estimate,
            draws: Some(draws),
        })
    };
    match method {
        Method::Classic(m) => Ok(MethodOutput {
            estimate: m.estimate(survey, unknown)?,
            draws: None,
        }),
        Method::Gnsum => {
            let enriched = options
                .enriched
                .as_ref()
                .ok_or_else(|| NsumError::InvalidInput("gnsum requires enriched ARD from the hidden population".into()))?;
            let n = survey.n_respondents();
            let default_pi = vec![n as f64 / survey.population_total as f64; n];
            let pi = options.frame_inclusion.as_deref().unwrap_or(&default_pi);
            let (estimate, _) = gnsum(enriched, survey, unknown, pi)?;
            Ok(MethodOutput { estimate, draws: None })
        }
        Method::Zheng => bayes(fit_zheng(
            survey,
            &options.overdispersed_priors,
            &options.mcmc,
            options.rare_columns.as_ref(),
        )?),
        Method::Maltiel(v) => bayes(fit_maltiel(
            survey,
            unknown,
            v,
            &options.maltiel_priors,
            options.transmission_prior,
            &options.mcmc,
        )?),
        Method::Teo(v) => bayes(fit_teo(survey, unknown, v, &options.teo_priors, &options.mcmc)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for l in Method::labels() {
            let m: Method = l.parse().unwrap();
            assert_eq!(m.label(), l);
        }
        assert!("nope".parse::<Method>().is_err());
        assert_eq!(Method::labels().len(), 13);
    }

    #[test]
    fn classic_dispatch_matches_direct_call() {
        let s = crate::ard::fixtures::two_respondents();
        let out = estimate(Method::Classic(ClassicMethod::Mle), &s, 2, &MethodOptions::default()).unwrap();
        assert_eq!(out.estimate.point, 30.0);
        assert!(estimate(Method::Gnsum, &s, 2, &MethodOptions::default()).is_err());
    }
}
