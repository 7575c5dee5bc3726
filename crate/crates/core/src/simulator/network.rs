//! Explicit small graphs, for checks that need actual ties rather than the
//! binomial approximation: exact census identities and zero-answer brackets.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::{stage, SubpopSpec};
use crate::ard::{ArdSurvey, EnrichedArd};
use crate::error::{NsumError, Result};
use crate::rng;

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub adjacency: Vec<Vec<u32>>,
}

impl Graph {
    fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Graph {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// `G(n, p)` with `p = mean_degree / (n - 1)`, by geometric edge skipping.
pub fn erdos_renyi(n: usize, mean_degree: f64, seed: u64) -> Result<Graph> {
    if n < 2 || !(mean_degree > 0.0 && mean_degree < (n - 1) as f64) {
        return Err(NsumError::InfeasibleWorld(format!(
            "Erdos-Renyi graph needs n >= 2 and mean degree in (0, n - 1), got n = {n}, mean {mean_degree}"
        )));
    }
    let p = mean_degree / (n - 1) as f64;
    let log_q = (-p).ln_1p();
    let mut r = rng::stream(seed, &[0x6572]);
    let mut edges = Vec::new();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let u: f64 = r.random();
        w += 1 + ((-u).ln_1p() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((v as u32, w as u32));
        }
    }
    Ok(Graph::from_edges(n, edges))
}

/// Chung-Lu graph: tie `(i, j)` present with probability `min(w_i w_j / Σw, 1)`.
/// Quadratic in the number of nodes.
pub fn chung_lu(weights: &[f64], seed: u64) -> Result<Graph> {
    if weights.len() < 2 || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(NsumError::InfeasibleWorld("Chung-Lu weights must be finite, nonnegative, at least 2".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(NsumError::InfeasibleWorld("Chung-Lu weights sum to zero".into()));
    }
    let mut r = rng::stream(seed, &[0x636c]);
    let mut edges = Vec::new();
    for i in 0..weights.len() {
        for j in (i + 1)..weights.len() {
            if r.random::<f64>() < (weights[i] * weights[j] / total).min(1.0) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Ok(Graph::from_edges(weights.len(), edges))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkArd {
    pub survey: ArdSurvey,
    pub enriched: EnrichedArd,
    pub frame_inclusion: Vec<f64>,
    /// Members of each subpopulation, in configuration order.
    pub members: Vec<Vec<usize>>,
}

/// Reads ARD off a graph. Each tie to a member of subpopulation `k` is
/// reported with probability `τ_k` (the alter's awareness), independently
/// per tie; the same awareness draws define the enriched sample's aware
/// counts. `respondents: None` surveys everyone; `hidden_sample: None`
/// interviews every member of `unknown`.
pub fn network_ard(
    graph: &Graph,
    subpops: &[SubpopSpec],
    transmission: &BTreeMap<String, f64>,
    unknown: &str,
    respondents: Option<usize>,
    hidden_sample: Option<usize>,
    seed: u64,
) -> Result<NetworkArd> {
    let n = graph.len();
    let u = subpops
        .iter()
        .position(|s| s.name == unknown)
        .ok_or_else(|| NsumError::InfeasibleWorld(format!("no subpopulation named {unknown}")))?;
    for s in subpops {
        if s.size == 0 || s.size as usize > n {
            return Err(NsumError::InfeasibleWorld(format!("subpopulation {} size {} outside [1, {n}]", s.name, s.size)));
        }
    }
    let k_count = subpops.len();
    let members: Vec<Vec<usize>> = (0..k_count)
        .map(|k| {
            let mut r = rng::stream(seed, &[stage::MEMBERSHIP, k as u64]);
            let mut m = rand::seq::index::sample(&mut r, n, subpops[k].size as usize).into_vec();
            m.sort_unstable();
            m
        })
        .collect();

    let mut counts = vec![0u32; n * k_count];
    let mut aware_of = vec![0u32; n];
    for (k, list) in members.iter().enumerate() {
        let tau = transmission.get(&subpops[k].name).copied().unwrap_or(1.0);
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(NsumError::InvalidInput(format!("transmission {tau} outside (0, 1]")));
        }
        for &j in list {
            let mut r = rng::stream(seed, &[stage::TRANSMISSION, k as u64, j as u64]);
            for &i in &graph.adjacency[j] {
                let aware = tau >= 1.0 || r.random::<f64>() < tau;
                if aware {
                    counts[i as usize * k_count + k] += 1;
                    if k == u {
                        aware_of[j] += 1;
                    }
                }
            }
        }
    }

    let (rows, pi): (Vec<usize>, f64) = match respondents {
        None => ((0..n).collect(), 1.0),
        Some(m) if m >= 1 && m <= n => {
            let mut r = rng::stream(seed, &[stage::RESPONDENTS]);
            (rand::seq::index::sample(&mut r, n, m).into_vec(), m as f64 / n as f64)
        }
        Some(m) => return Err(NsumError::InfeasibleWorld(format!("respondent count {m} outside [1, {n}]"))),
    };
    let hidden: Vec<usize> = match hidden_sample {
        None => members[u].clone(),
        Some(m) if m >= 1 && m <= members[u].len() => {
            let mut r = rng::stream(seed, &[stage::ENRICHED]);
            rand::seq::index::sample(&mut r, members[u].len(), m)
                .into_iter()
                .map(|idx| members[u][idx])
                .collect()
        }
        Some(m) => return Err(NsumError::InfeasibleWorld(format!("hidden sample {m} outside [1, {}]", members[u].len()))),
    };
    let hidden_pi = hidden.len() as f64 / members[u].len() as f64;

    let survey = ArdSurvey {
        respondent_ids: rows.iter().map(|i| format!("v{i}")).collect(),
        columns: subpops.iter().map(|s| s.name.clone()).collect(),
        responses: rows
            .iter()
            .flat_map(|&i| counts[i * k_count..(i + 1) * k_count].iter().map(|&c| Some(c)))
            .collect(),
        population_total: n as u64,
        known_sizes: subpops
            .iter()
            .enumerate()
            .filter(|(k, s)| s.known && *k != u)
            .map(|(k, s)| (k, s.size))
            .collect(),
        unknown_columns: subpops
            .iter()
            .enumerate()
            .filter(|(k, s)| !s.known || *k == u)
            .map(|(k, _)| k)
            .collect::<BTreeSet<_>>(),
        weights: None,
        covariates: None,
        likert: BTreeMap::new(),
    };
    let enriched = EnrichedArd {
        member_ids: hidden.iter().map(|j| format!("v{j}")).collect(),
        out_reports: hidden.iter().map(|&j| graph.degree(j) as u32).collect(),
        aware_counts: hidden.iter().map(|&j| aware_of[j]).collect(),
        inclusion_probs: vec![hidden_pi; hidden.len()],
        frame_total: n as u64,
    };
    Ok(NetworkArd {
        frame_inclusion: vec![pi; survey.n_respondents()],
        survey,
        enriched,
        members,
    })
}

/// Everyone surveyed and every hidden member interviewed.
pub fn census_ard(
    graph: &Graph,
    subpops: &[SubpopSpec],
    transmission: &BTreeMap<String, f64>,
    unknown: &str,
    seed: u64,
) -> Result<NetworkArd> {
    network_ard(graph, subpops, transmission, unknown, None, None, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<SubpopSpec> {
        [("a", 50, true), ("b", 200, true), ("u", 120, false)]
            .into_iter()
            .map(|(n, s, k)| SubpopSpec {
                name: n.into(),
                size: s,
                known: k,
            })
            .collect()
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        let g = erdos_renyi(2000, 10.0, 3).unwrap();
        let mean = 2.0 * g.edge_count() as f64 / 2000.0;
        assert!((mean - 10.0).abs() < 0.5, "{mean}");
        assert!(g.adjacency.iter().enumerate().all(|(v, l)| !l.contains(&(v as u32))));
    }

    #[test]
    fn chung_lu_tracks_weights() {
        let w: Vec<f64> = (0..600).map(|i| if i < 300 { 4.0 } else { 16.0 }).collect();
        let g = chung_lu(&w, 1).unwrap();
        let low = (0..300).map(|v| g.degree(v)).sum::<usize>() as f64 / 300.0;
        let high = (300..600).map(|v| g.degree(v)).sum::<usize>() as f64 / 300.0;
        assert!(high / low > 3.0 && high / low < 5.0, "{low} {high}");
    }

    #[test]
    fn census_in_reports_equal_out_reports() {
        let g = erdos_renyi(1000, 12.0, 5).unwrap();
        let tau = BTreeMap::from([("u".to_string(), 0.6)]);
        let w = census_ard(&g, &specs(), &tau, "u", 8).unwrap();
        let in_reports: u64 = w.survey.column(2).map(|y| u64::from(y.unwrap())).sum();
        let out_reports: u64 = w.enriched.aware_counts.iter().map(|&a| u64::from(a)).sum();
        assert_eq!(in_reports, out_reports);
        assert!(w.enriched.check().is_ok());
    }

    #[test]
    fn sampled_design_sets_inclusion_probabilities() {
        let g = erdos_renyi(500, 8.0, 2).unwrap();
        let w = network_ard(&g, &specs(), &BTreeMap::new(), "u", Some(100), Some(30), 4).unwrap();
        assert_eq!(w.survey.n_respondents(), 100);
        assert_eq!(w.frame_inclusion[0], 0.2);
        assert_eq!(w.enriched.inclusion_probs[0], 0.25);
    }
}
