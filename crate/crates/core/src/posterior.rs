//! Posterior summaries over retained MCMC samples: parameter tables,
//! transmission-network edge probabilities, and epidemic-curve bands.
//!
//! The workhorse functions operate on plain per-chain sample containers
//! (the shapes stored by `MarkovChain` and written to sample files);
//! convenience wrappers accept chains directly.

use std::collections::HashMap;

use thiserror::Error;

use crate::events::{Events, Transition, TransmissionNetwork, TransmissionSource};
use crate::mcmc::MarkovChain;
use crate::model::ModelClass;
use crate::rates::DiseaseState;
use crate::stats::{mean_variance, quantile_sorted};

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("burn-in {burnin} exceeds the iteration count {iterations}")]
    BurninTooLarge { burnin: usize, iterations: usize },
    #[error("thin must be >= 1")]
    ZeroThin,
    #[error("no retained samples (burnin {burnin}, thin {thin}, iterations {iterations})")]
    NothingRetained {
        burnin: usize,
        thin: usize,
        iterations: usize,
    },
    #[error("no chains supplied")]
    NoChains,
    #[error("chain has no samples")]
    EmptyChain,
}

/// Retention plan shared by all summaries: sample indices `burnin`,
/// `burnin + thin`, ... over one chain's stored samples (index 0 is the
/// chain's initial state, so a chain with `iterations` iterations has
/// `iterations + 1` stored samples).
pub fn retained_indices(
    iterations: usize,
    burnin: usize,
    thin: usize,
) -> Result<Vec<usize>, PosteriorError> {
    if thin == 0 {
        return Err(PosteriorError::ZeroThin);
    }
    if burnin > iterations {
        return Err(PosteriorError::BurninTooLarge { burnin, iterations });
    }
    let idx: Vec<usize> = (burnin..=iterations).step_by(thin).collect();
    if idx.is_empty() {
        return Err(PosteriorError::NothingRetained {
            burnin,
            thin,
            iterations,
        });
    }
    Ok(idx)
}

/// One row of the parameter summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub parameter: String,
    pub mean: f64,
    pub variance: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Pooled parameter summaries across chains: mean, unbiased variance, and
/// the equal-tailed 95% interval by interpolated order statistics.
/// `chains[c]` holds one flattened parameter vector per stored sample.
pub fn summarize_samples(
    chains: &[&[Vec<f64>]],
    names: &[String],
    burnin: usize,
    thin: usize,
) -> Result<Vec<ParameterSummary>, PosteriorError> {
    if chains.is_empty() {
        return Err(PosteriorError::NoChains);
    }
    let p = names.len();
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); p];
    for chain in chains {
        if chain.is_empty() {
            return Err(PosteriorError::EmptyChain);
        }
        let idx = retained_indices(chain.len() - 1, burnin, thin)?;
        for &i in &idx {
            for (d, slot) in pooled.iter_mut().enumerate() {
                slot.push(chain[i][d]);
            }
        }
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let mut values = std::mem::take(&mut pooled[d]);
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (mean, variance) = mean_variance(&values);
            ParameterSummary {
                parameter: name.clone(),
                mean,
                variance,
                q025: quantile_sorted(&values, 0.025),
                q975: quantile_sorted(&values, 0.975),
            }
        })
        .collect())
}

/// [`summarize_samples`] over live chains.
pub fn summarize(
    chains: &[MarkovChain],
    names: &[String],
    burnin: usize,
    thin: usize,
) -> Result<Vec<ParameterSummary>, PosteriorError> {
    let views: Vec<&[Vec<f64>]> = chains.iter().map(|c| c.param_samples.as_slice()).collect();
    summarize_samples(&views, names, burnin, thin)
}

/// Posterior edge probabilities of the transmission network.
///
/// `external_prob[i-1]` is the relative frequency of an exogenous source
/// for individual i over retained samples; `edge_prob` maps (source,
/// infectee) to its frequency. For an individual infected in every sample
/// the external probability plus its incoming edge probabilities sum to 1.
#[derive(Debug, Clone)]
pub struct TnDistribution {
    pub n: usize,
    pub external_prob: Vec<f64>,
    edge_prob: HashMap<(usize, usize), f64>,
}

impl TnDistribution {
    pub fn edge_probability(&self, source: usize, infectee: usize) -> f64 {
        self.edge_prob
            .get(&(source, infectee))
            .copied()
            .unwrap_or(0.0)
    }

    /// Non-zero edges as (source, infectee, probability), sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut edges: Vec<_> = self
            .edge_prob
            .iter()
            .map(|(&(s, i), &p)| (s, i, p))
            .collect();
        edges.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        edges
    }

    /// Expected number of transmissions attributed to `k`.
    pub fn out_degree(&self, k: usize) -> f64 {
        self.edge_prob
            .iter()
            .filter(|(&(s, _), _)| s == k)
            .map(|(_, p)| p)
            .sum()
    }

    /// Total probability mass of an incoming source for individual `i`
    /// (1 for the ever-infected, 0 for the never-infected).
    pub fn incoming_total(&self, i: usize) -> f64 {
        self.external_prob[i - 1]
            + self
                .edge_prob
                .iter()
                .filter(|(&(_, inf), _)| inf == i)
                .map(|(_, p)| p)
                .sum::<f64>()
    }

    /// The single most frequent source per infectee (posterior mode).
    pub fn mode_network(&self) -> TransmissionNetwork {
        let mut net = TransmissionNetwork::new(self.n);
        for i in 1..=self.n {
            let mut best = (self.external_prob[i - 1], TransmissionSource::External);
            for ((s, inf), p) in &self.edge_prob {
                if *inf == i && *p > best.0 {
                    best = (*p, TransmissionSource::Individual(*s));
                }
            }
            if best.0 > 0.0 {
                net.set_source(i, best.1);
            }
        }
        net
    }
}

/// Edge frequencies over retained compact network samples (-1 none,
/// 0 external, k > 0 endogenous source), pooled across chains.
pub fn network_posterior_samples(
    chains: &[&[Box<[i32]>]],
    burnin: usize,
    thin: usize,
) -> Result<TnDistribution, PosteriorError> {
    if chains.is_empty() {
        return Err(PosteriorError::NoChains);
    }
    let n = chains[0].first().ok_or(PosteriorError::EmptyChain)?.len();
    let mut external = vec![0.0; n];
    let mut edges: HashMap<(usize, usize), f64> = HashMap::new();
    let mut total = 0usize;
    for chain in chains {
        if chain.is_empty() {
            return Err(PosteriorError::EmptyChain);
        }
        let idx = retained_indices(chain.len() - 1, burnin, thin)?;
        for &s in &idx {
            let sample = &chain[s];
            for i in 1..=n {
                match sample[i - 1] {
                    -1 => {}
                    0 => external[i - 1] += 1.0,
                    k => *edges.entry((k as usize, i)).or_insert(0.0) += 1.0,
                }
            }
            total += 1;
        }
    }
    let total = total as f64;
    for e in external.iter_mut() {
        *e /= total;
    }
    for p in edges.values_mut() {
        *p /= total;
    }
    Ok(TnDistribution {
        n,
        external_prob: external,
        edge_prob: edges,
    })
}

/// [`network_posterior_samples`] over live chains.
pub fn network_posterior(
    chains: &[MarkovChain],
    burnin: usize,
    thin: usize,
) -> Result<TnDistribution, PosteriorError> {
    let views: Vec<&[Box<[i32]>]> = chains
        .iter()
        .map(|c| c.network_samples.as_slice())
        .collect();
    network_posterior_samples(&views, burnin, thin)
}

/// Count individuals in `state` at time `t` given an event set and the
/// starting states.
pub fn state_count_at(
    events: &Events,
    starting_states: &[DiseaseState],
    state: DiseaseState,
    t: f64,
) -> usize {
    let class = events.class();
    (1..=events.len())
        .filter(|&i| state_at(events, starting_states[i - 1], class, i, t) == state)
        .count()
}

fn state_at(
    events: &Events,
    start: DiseaseState,
    class: ModelClass,
    i: usize,
    t: f64,
) -> DiseaseState {
    // walk backwards through the chain's transitions
    if class.has_removed() {
        if let Some(tr) = events.get(i, Transition::Removal) {
            if t >= tr {
                return DiseaseState::Removed;
            }
        }
    }
    if let Some(ti) = events.get(i, Transition::Infection) {
        if t >= ti {
            return DiseaseState::Infectious;
        }
    }
    if class.has_exposed() {
        if let Some(te) = events.get(i, Transition::Exposure) {
            if t >= te {
                return DiseaseState::Exposed;
            }
        }
    }
    start
}

/// Per-time quantile band of a state count over retained event samples.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub time: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Epidemic-curve credible band over retained compact event samples: the
/// count of `state` at each grid time, pooled across chains. The grid must
/// be sorted ascending.
pub fn epidemic_curves_samples(
    chains: &[&[Box<[f64]>]],
    class: ModelClass,
    starting_states: &[DiseaseState],
    state: DiseaseState,
    time_grid: &[f64],
    burnin: usize,
    thin: usize,
) -> Result<Vec<CurvePoint>, PosteriorError> {
    if chains.is_empty() {
        return Err(PosteriorError::NoChains);
    }
    assert!(
        time_grid.windows(2).all(|w| w[0] <= w[1]),
        "time grid must be sorted"
    );
    let mut counts_per_time: Vec<Vec<f64>> = vec![Vec::new(); time_grid.len()];
    for chain in chains {
        if chain.is_empty() {
            return Err(PosteriorError::EmptyChain);
        }
        let idx = retained_indices(chain.len() - 1, burnin, thin)?;
        for &s in &idx {
            let events = Events::from_compact(class, &chain[s]);
            for (g, &t) in time_grid.iter().enumerate() {
                counts_per_time[g]
                    .push(state_count_at(&events, starting_states, state, t) as f64);
            }
        }
    }
    Ok(time_grid
        .iter()
        .zip(counts_per_time.iter_mut())
        .map(|(&time, counts)| {
            counts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            CurvePoint {
                time,
                q025: quantile_sorted(counts, 0.025),
                median: quantile_sorted(counts, 0.5),
                q975: quantile_sorted(counts, 0.975),
            }
        })
        .collect())
}

/// [`epidemic_curves_samples`] over live chains.
#[allow(clippy::too_many_arguments)]
pub fn epidemic_curves(
    chains: &[MarkovChain],
    class: ModelClass,
    starting_states: &[DiseaseState],
    state: DiseaseState,
    time_grid: &[f64],
    burnin: usize,
    thin: usize,
) -> Result<Vec<CurvePoint>, PosteriorError> {
    let views: Vec<&[Box<[f64]>]> = chains.iter().map(|c| c.event_samples.as_slice()).collect();
    epidemic_curves_samples(&views, class, starting_states, state, time_grid, burnin, thin)
}
