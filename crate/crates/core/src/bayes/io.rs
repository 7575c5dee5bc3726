use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChainDraws, PosteriorDraws};
use crate::error::{NsumError, Result};

/// Companion record for a draws CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub model: String,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub kept_per_chain: usize,
    pub converged: Option<bool>,
    pub decisions: Vec<String>,
    pub acceptance: Vec<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl DrawsManifest {
    pub fn of(draws: &PosteriorDraws, config: Option<serde_json::Value>) -> Self {
        DrawsManifest {
            model: draws.model.clone(),
            seed: draws.seed,
            burn_in: draws.burn_in,
            thin: draws.thin,
            chains: draws.chains.len(),
            kept_per_chain: draws.kept_per_chain(),
            converged: draws.converged,
            decisions: draws.decisions.clone(),
            acceptance: draws.chains.iter().map(|c| c.acceptance.clone()).collect(),
            config,
        }
    }
}

/// Long-format CSV `chain,iter,param,value` for the parameters `keep` admits.
pub fn render_draws_csv(draws: &PosteriorDraws, keep: impl Fn(&str) -> bool) -> String {
    let selected: Vec<usize> = (0..draws.params.len()).filter(|&p| keep(&draws.params[p])).collect();
    let mut out = String::from("chain,iter,param,value\n");
    for (c, chain) in draws.chains.iter().enumerate() {
        for t in 0..draws.kept_per_chain() {
            for &p in &selected {
                let _ = writeln!(out, "{c},{t},{},{}", draws.params[p], chain.values[p][t]);
            }
        }
    }
    out
}

pub fn write_draws_csv(draws: &PosteriorDraws, path: &Path, keep: impl Fn(&str) -> bool) -> Result<()> {
    fs::write(path, render_draws_csv(draws, keep)).map_err(|e| NsumError::io(path, e))
}

/// Parses a draws CSV. Run metadata is taken from `manifest` when given.
pub fn parse_draws_csv(text: &str, manifest: Option<&DrawsManifest>) -> Result<PosteriorDraws> {
    #[derive(Deserialize)]
    struct Row {
        chain: usize,
        iter: usize,
        param: String,
        value: f64,
    }
    let mut params: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut cells: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|err| NsumError::Parse {
            line: err.position().map_or(0, |p| p.line()),
            column: 0,
            message: err.to_string(),
        })?;
        let p = *index.entry(row.param.clone()).or_insert_with(|| {
            params.push(row.param.clone());
            params.len() - 1
        });
        if cells.insert((row.chain, p, row.iter), row.value).is_some() {
            return Err(NsumError::Format(format!(
                "duplicate draw: chain {} iter {} param {}",
                row.chain, row.iter, row.param
            )));
        }
    }
    let n_chains = cells.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    let n_iter = cells.keys().map(|k| k.2 + 1).max().unwrap_or(0);
    if cells.len() != n_chains * n_iter * params.len() {
        return Err(NsumError::Format("draws CSV is not a complete chain x iter x param grid".into()));
    }
    let chains = (0..n_chains)
        .map(|c| ChainDraws {
            values: (0..params.len())
                .map(|p| (0..n_iter).map(|t| cells[&(c, p, t)]).collect())
                .collect(),
            acceptance: manifest.and_then(|m| m.acceptance.get(c).cloned()).unwrap_or_default(),
        })
        .collect();
    Ok(PosteriorDraws {
        model: manifest.map_or_else(|| "unknown".to_string(), |m| m.model.clone()),
        params,
        chains,
        seed: manifest.map_or(0, |m| m.seed),
        burn_in: manifest.map_or(0, |m| m.burn_in),
        thin: manifest.map_or(1, |m| m.thin),
        converged: manifest.and_then(|m| m.converged),
        decisions: manifest.map(|m| m.decisions.clone()).unwrap_or_default(),
    })
}

pub fn read_draws_csv(path: &Path, manifest: Option<&Path>) -> Result<PosteriorDraws> {
    let text = fs::read_to_string(path).map_err(|e| NsumError::io(path, e))?;
    let manifest = match manifest {
        Some(m) => {
            let raw = fs::read_to_string(m).map_err(|e| NsumError::io(m, e))?;
            Some(serde_json::from_str::<DrawsManifest>(&raw)?)
        }
        None => None,
    };
    parse_draws_csv(&text, manifest.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_values() {
        let draws = PosteriorDraws {
            model: "m".into(),
            params: vec!["a".into(), "size[u]".into()],
            chains: vec![
                ChainDraws {
                    values: vec![vec![0.1, 0.2], vec![30.0, 31.5]],
                    acceptance: BTreeMap::from([("a".into(), 0.3)]),
                },
                ChainDraws {
                    values: vec![vec![-1e-300, 1.0 / 3.0], vec![29.0, 28.25]],
                    acceptance: BTreeMap::from([("a".into(), 0.4)]),
                },
            ],
            seed: 5,
            burn_in: 10,
            thin: 2,
            converged: Some(true),
            decisions: vec!["d".into()],
        };
        let text = render_draws_csv(&draws, |_| true);
        let manifest = DrawsManifest::of(&draws, None);
        let back = parse_draws_csv(&text, Some(&manifest)).unwrap();
        assert_eq!(back, draws);

        let only = render_draws_csv(&draws, |p| p.starts_with("size"));
        assert_eq!(only.lines().count(), 1 + 4);
        assert!(parse_draws_csv("chain,iter,param,value\n0,0,a,1\n0,1,a,2\n1,0,a,3\n", None).is_err());
    }
}
