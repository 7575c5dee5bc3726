//! Ground-truth worlds and synthetic ARD with controllable biases.
//!
//! Every random stage draws from its own stream derived from the world seed,
//! a stage tag and (where relevant) a respondent or subpopulation index, so
//! toggling one bias never perturbs the draws of another stage.

mod benchmark;
mod generate;
mod network;
mod scenario;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::ard::{ArdSurvey, EnrichedArd};
use crate::error::{NsumError, Result};
use crate::rng;

pub use benchmark::{render_benchmark_csv, run_benchmark, summarize_benchmark, BenchmarkRow, BenchmarkSummary};
pub use generate::{apply_response_bias, apply_transmission, generate_ard};
pub use network::{census_ard, chung_lu, erdos_renyi, network_ard, Graph, NetworkArd};
pub use scenario::{load_scenarios, parse_scenarios, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpopSpec {
    pub name: String,
    pub size: u64,
    #[serde(default = "default_true")]
    pub known: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DegreeModel {
    Constant { degree: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl DegreeModel {
    fn check(&self) -> Result<()> {
        match *self {
            DegreeModel::Constant { degree } if !(degree >= 0.0 && degree.is_finite()) => {
                Err(NsumError::InfeasibleWorld(format!("constant degree {degree} must be finite and >= 0")))
            }
            DegreeModel::LogNormal { mu, sigma } if !(sigma >= 0.0 && mu.is_finite() && sigma.is_finite()) => Err(
                NsumError::InfeasibleWorld(format!("log-normal degree needs finite mu and sigma >= 0, got ({mu}, {sigma})")),
            ),
            _ => Ok(()),
        }
    }

    pub(crate) fn sampler(&self) -> impl FnMut(&mut rand_chacha::ChaCha8Rng) -> f64 + '_ {
        let ln = match *self {
            DegreeModel::LogNormal { mu, sigma } => Some(LogNormal::new(mu, sigma).expect("checked parameters")),
            DegreeModel::Constant { .. } => None,
        };
        move |r| match (self, &ln) {
            (DegreeModel::Constant { degree }, _) => *degree,
            (_, Some(d)) => d.sample(r),
            _ => unreachable!(),
        }
    }
}

/// How respondents spread their ties over subpopulations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Mixing {
    #[default]
    Uniform,
    /// Gamma-distributed relative propensities with mean 1 that inflate the
    /// count variance to `ω_k` times the mean; subpopulations not listed get 1.
    Propensity { omega: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub population_total: u64,
    pub respondents: usize,
    pub subpops: Vec<SubpopSpec>,
    pub degree: DegreeModel,
    #[serde(default)]
    pub mixing: Mixing,
    #[serde(default)]
    pub seed: u64,
}

impl WorldConfig {
    pub fn check(&self) -> Result<()> {
        let n = self.population_total;
        if n == 0 {
            return Err(NsumError::InfeasibleWorld("population total must be positive".into()));
        }
        if self.respondents == 0 || self.respondents as u64 > n {
            return Err(NsumError::InfeasibleWorld(format!(
                "respondent count {} must lie in [1, {n}]",
                self.respondents
            )));
        }
        if self.subpops.is_empty() {
            return Err(NsumError::InfeasibleWorld("no subpopulations configured".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.subpops {
            if !names.insert(s.name.as_str()) {
                return Err(NsumError::InfeasibleWorld(format!("duplicate subpopulation {}", s.name)));
            }
            if s.size == 0 || s.size >= n {
                return Err(NsumError::InfeasibleWorld(format!(
                    "subpopulation {} has size {} outside [1, {})",
                    s.name, s.size, n
                )));
            }
        }
        self.degree.check()?;
        if let Mixing::Propensity { omega } = &self.mixing {
            for (name, &w) in omega {
                self.subpop_index(name)?;
                if !(w >= 1.0 && w.is_finite()) {
                    return Err(NsumError::InfeasibleWorld(format!("omega for {name} is {w}; must be >= 1")));
                }
            }
        }
        Ok(())
    }

    pub fn subpop_index(&self, name: &str) -> Result<usize> {
        self.subpops
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| NsumError::InfeasibleWorld(format!("no subpopulation named {name}")))
    }

    pub fn omega(&self, k: usize) -> f64 {
        match &self.mixing {
            Mixing::Uniform => 1.0,
            Mixing::Propensity { omega } => omega.get(&self.subpops[k].name).copied().unwrap_or(1.0),
        }
    }

    /// Names of the subpopulations marked unknown.
    pub fn unknown_names(&self) -> Vec<String> {
        self.subpops.iter().filter(|s| !s.known).map(|s| s.name.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallDistortion {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseBias {
    #[serde(default)]
    pub zero_inflation: BTreeMap<String, f64>,
    /// Counts above this are rounded to the nearest multiple of `round_to`;
    /// `None` disables rounding.
    #[serde(default = "default_round_above")]
    pub round_above: Option<u32>,
    #[serde(default = "default_round_to")]
    pub round_to: u32,
}

fn default_round_above() -> Option<u32> {
    Some(10)
}

fn default_round_to() -> u32 {
    5
}

impl Default for ResponseBias {
    fn default() -> Self {
        ResponseBias {
            zero_inflation: BTreeMap::new(),
            round_above: default_round_above(),
            round_to: default_round_to(),
        }
    }
}

/// Likert-scaled transmission: respondent answers `x ~ Uniform{1..upper}` and
/// the tie probability is multiplied by `exp(beta (x - upper))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertTransmission {
    pub upper: u32,
    pub beta: f64,
}

/// Sample drawn from inside one hidden subpopulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedDesign {
    pub unknown: String,
    pub sample_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    /// Per-subpopulation visibility `τ_k` in (0, 1].
    #[serde(default)]
    pub transmission: BTreeMap<String, f64>,
    /// Per-subpopulation Beta dispersion in (0, 1) of the tie probability.
    #[serde(default)]
    pub barrier: BTreeMap<String, f64>,
    #[serde(default)]
    pub recall: Option<RecallDistortion>,
    #[serde(default)]
    pub response: Option<ResponseBias>,
    #[serde(default)]
    pub likert: BTreeMap<String, LikertTransmission>,
    #[serde(default)]
    pub enriched: Option<EnrichedDesign>,
}

impl BiasConfig {
    pub fn check(&self, world: &WorldConfig) -> Result<()> {
        for (name, &t) in &self.transmission {
            world.subpop_index(name)?;
            if !(t > 0.0 && t <= 1.0) {
                return Err(NsumError::InvalidInput(format!("transmission for {name} is {t}; must lie in (0, 1]")));
            }
        }
        for (name, &r) in &self.barrier {
            world.subpop_index(name)?;
            if !(r > 0.0 && r < 1.0) {
                return Err(NsumError::InvalidInput(format!("barrier dispersion for {name} is {r}; must lie in (0, 1)")));
            }
        }
        if let Some(rc) = self.recall {
            if !(rc.a > 0.0 && rc.b.is_finite()) {
                return Err(NsumError::InvalidInput("recall distortion needs a > 0 and finite b".into()));
            }
        }
        if let Some(resp) = &self.response {
            for (name, &z) in &resp.zero_inflation {
                world.subpop_index(name)?;
                if !(0.0..1.0).contains(&z) {
                    return Err(NsumError::InvalidInput(format!("zero inflation for {name} is {z}; must lie in [0, 1)")));
                }
            }
            if resp.round_above.is_some() && resp.round_to == 0 {
                return Err(NsumError::InvalidInput("rounding multiple must be positive".into()));
            }
        }
        for (name, l) in &self.likert {
            world.subpop_index(name)?;
            if l.upper < 1 || !l.beta.is_finite() {
                return Err(NsumError::InvalidInput(format!("Likert scale for {name} needs upper >= 1 and finite beta")));
            }
        }
        if let Some(e) = &self.enriched {
            let k = world.subpop_index(&e.unknown)?;
            if e.sample_size == 0 || e.sample_size as u64 > world.subpops[k].size {
                return Err(NsumError::InvalidInput(format!(
                    "enriched sample size {} must lie in [1, {}]",
                    e.sample_size, world.subpops[k].size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    /// Degrees of the sampled respondents.
    pub degrees: Vec<f64>,
    /// Population indices of the sampled respondents.
    pub respondents: Vec<u64>,
    /// `memberships[i][k]`: respondent `i` belongs to subpopulation `k`.
    pub memberships: Vec<Vec<bool>>,
    pub survey: Option<ArdSurvey>,
    pub enriched: Option<EnrichedArd>,
    pub biases: Option<BiasConfig>,
}

impl SyntheticWorld {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// True size of a subpopulation.
    pub fn truth(&self, name: &str) -> Result<u64> {
        Ok(self.config.subpops[self.config.subpop_index(name)?].size)
    }

    /// `n / N` for every respondent.
    pub fn frame_inclusion(&self) -> Vec<f64> {
        let p = self.degrees.len() as f64 / self.config.population_total as f64;
        vec![p; self.degrees.len()]
    }
}

pub(crate) mod stage {
    pub const DEGREES: u64 = 1;
    pub const RESPONDENTS: u64 = 2;
    pub const MEMBERSHIP: u64 = 3;
    pub const BARRIER: u64 = 4;
    pub const PROPENSITY: u64 = 5;
    pub const LIKERT: u64 = 6;
    pub const COUNTS: u64 = 7;
    pub const TRANSMISSION: u64 = 8;
    pub const RESPONSE: u64 = 9;
    pub const ENRICHED: u64 = 10;
}

/// Draws respondent degrees and memberships; no responses yet.
pub fn generate_world(config: &WorldConfig) -> Result<SyntheticWorld> {
    config.check()?;
    let seed = config.seed;
    let n = config.respondents;
    let mut r = rng::stream(seed, &[stage::DEGREES]);
    let mut draw = config.degree.sampler();
    let degrees: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();

    let total = usize::try_from(config.population_total)
        .map_err(|_| NsumError::InfeasibleWorld("population total too large for this platform".into()))?;
    let mut r = rng::stream(seed, &[stage::RESPONDENTS]);
    let respondents: Vec<u64> = rand::seq::index::sample(&mut r, total, n)
        .into_iter()
        .map(|v| v as u64)
        .collect();
    let position: HashMap<u64, usize> = respondents.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut memberships = vec![vec![false; config.subpops.len()]; n];
    for (k, s) in config.subpops.iter().enumerate() {
        let mut r = rng::stream(seed, &[stage::MEMBERSHIP, k as u64]);
        for member in rand::seq::index::sample(&mut r, total, s.size as usize) {
            if let Some(&i) = position.get(&(member as u64)) {
                memberships[i][k] = true;
            }
        }
    }
    Ok(SyntheticWorld {
        config: config.clone(),
        degrees,
        respondents,
        memberships,
        survey: None,
        enriched: None,
        biases: None,
    })
}
