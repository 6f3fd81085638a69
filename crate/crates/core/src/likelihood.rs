//! Exact log-likelihood of an event sequence.
//!
//! Walking the events in global time order while maintaining the rate
//! state, each event contributes `ln(rate of the realized cell) - total *
//! gap`. In the marginal (ILM) form a transmission's realized rate is the
//! individual's whole transmission rate; in the network-explicit (TN-ILM)
//! form it is the competing rate of the recorded source. A realized rate of
//! zero means the configuration is impossible and the result is `-inf`.
//!
//! The running sum only decreases between events, so evaluation can stop
//! early once it falls below a caller-provided threshold (used heavily by
//! chain initialization).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::events::{Events, EventsError, Transition, TransmissionNetwork, TransmissionSource};
use crate::model::{RiskFunctions, RiskParameters};
use crate::population::Population;
use crate::rates::{DiseaseState, RateError, RateState};

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error("event at {t} precedes the window start {start}")]
    EventBeforeStart { t: f64, start: f64 },
    #[error("individual {individual} is infected in the event set but the network has no source")]
    IncompatibleNetwork { individual: usize },
    #[error("starting states must have one entry per individual ({expected}), got {got}")]
    StartingStates { expected: usize, got: usize },
}

/// Evaluation options.
#[derive(Debug, Clone, Copy)]
pub struct LikelihoodConfig {
    /// Stop and return `-inf` once the running log-likelihood drops below
    /// this (log scale); `-inf` disables early stopping.
    pub early_stop_threshold: f64,
    /// Retain a per-transmission snapshot of the competing rates, as needed
    /// by the Gibbs network update.
    pub collect_transmission_rates: bool,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            early_stop_threshold: f64::NEG_INFINITY,
            collect_transmission_rates: false,
        }
    }
}

/// Competing transmission rates for one individual at the instant of its
/// transmission event.
#[derive(Debug, Clone)]
pub struct ExposureSnapshot {
    pub individual: usize,
    /// Infectious source -> competing rate at the transmission time.
    pub endogenous: BTreeMap<usize, f64>,
    pub exogenous: f64,
}

impl ExposureSnapshot {
    pub fn total(&self) -> f64 {
        self.exogenous + self.endogenous.values().sum::<f64>()
    }

    /// Rate of the recorded source within this snapshot (zero when the
    /// source was not infectious).
    pub fn rate_of(&self, source: TransmissionSource) -> f64 {
        match source {
            TransmissionSource::External => self.exogenous,
            TransmissionSource::Individual(k) => self.endogenous.get(&k).copied().unwrap_or(0.0),
            TransmissionSource::None => 0.0,
        }
    }
}

/// Result of a likelihood evaluation.
#[derive(Debug)]
pub struct Evaluated {
    pub log_likelihood: f64,
    pub snapshots: Option<Vec<ExposureSnapshot>>,
}

enum Realization<'a> {
    Marginal,
    Network(&'a TransmissionNetwork),
}

/// Marginal (ILM) log-likelihood: transmission sources summed out.
pub fn log_likelihood_ilm(
    rf: &RiskFunctions,
    rp: &RiskParameters,
    pop: &Population,
    starting_states: &[DiseaseState],
    events: &Events,
    cfg: &LikelihoodConfig,
) -> Result<Evaluated, LikelihoodError> {
    walk(rf, rp, pop, starting_states, events, Realization::Marginal, cfg)
}

/// Network-explicit (TN-ILM) log-likelihood: each transmission contributes
/// the competing rate of its recorded source.
pub fn log_likelihood_tnilm(
    rf: &RiskFunctions,
    rp: &RiskParameters,
    pop: &Population,
    starting_states: &[DiseaseState],
    events: &Events,
    network: &TransmissionNetwork,
    cfg: &LikelihoodConfig,
) -> Result<Evaluated, LikelihoodError> {
    walk(
        rf,
        rp,
        pop,
        starting_states,
        events,
        Realization::Network(network),
        cfg,
    )
}

fn walk(
    rf: &RiskFunctions,
    rp: &RiskParameters,
    pop: &Population,
    starting_states: &[DiseaseState],
    events: &Events,
    realization: Realization<'_>,
    cfg: &LikelihoodConfig,
) -> Result<Evaluated, LikelihoodError> {
    if starting_states.len() != pop.len() {
        return Err(LikelihoodError::StartingStates {
            expected: pop.len(),
            got: starting_states.len(),
        });
    }
    // structural checks only; inverted per-individual orderings realize a
    // zero rate below and come back as -inf rather than an error
    for i in 1..=events.len() {
        if events.get(i, Transition::Exposure).is_some() && !rf.class.has_exposed() {
            return Err(EventsError::WrongClass {
                individual: i,
                transition: Transition::Exposure,
                class: rf.class,
            }
            .into());
        }
        if events.get(i, Transition::Removal).is_some() && !rf.class.has_removed() {
            return Err(EventsError::WrongClass {
                individual: i,
                transition: Transition::Removal,
                class: rf.class,
            }
            .into());
        }
        for tr in [Transition::Exposure, Transition::Infection, Transition::Removal] {
            if events.get(i, tr).is_some_and(f64::is_nan) {
                return Err(EventsError::NaNTime {
                    individual: i,
                    transition: tr,
                }
                .into());
            }
        }
    }

    let ordered = events.sorted();
    let mut snapshots = cfg
        .collect_transmission_rates
        .then(|| Vec::with_capacity(ordered.len() / 2 + 1));
    if ordered.is_empty() {
        return Ok(Evaluated {
            log_likelihood: 0.0,
            snapshots,
        });
    }

    let mut rates = RateState::initialize(starting_states.to_vec(), pop, rf, rp)?;
    let transmission_kind = Transition::transmission_for(rf.class);
    let mut prev = match events.start_time {
        Some(t0) => {
            if ordered[0].0 < t0 {
                return Err(LikelihoodError::EventBeforeStart {
                    t: ordered[0].0,
                    start: t0,
                });
            }
            t0
        }
        // no declared window start: anchor at the first event
        None => ordered[0].0,
    };

    let mut log_likelihood = 0.0_f64;
    let minus_inf = Evaluated {
        log_likelihood: f64::NEG_INFINITY,
        snapshots: None,
    };

    for (t, transition, individual) in ordered {
        let total = rates.total_rate();
        log_likelihood -= total * (t - prev);
        prev = t;

        let realized = if transition == transmission_kind {
            if let Some(snaps) = snapshots.as_mut() {
                snaps.push(ExposureSnapshot {
                    individual,
                    endogenous: rates.transmission.endogenous[individual - 1].clone(),
                    exogenous: rates.transmission.exogenous[individual - 1],
                });
            }
            match realization {
                Realization::Marginal => rates.event_rates.se[individual - 1],
                Realization::Network(net) => match net.source(individual) {
                    TransmissionSource::None => {
                        return Err(LikelihoodError::IncompatibleNetwork { individual })
                    }
                    TransmissionSource::External => rates.transmission.exogenous[individual - 1],
                    TransmissionSource::Individual(k) => rates.transmission.endogenous
                        [individual - 1]
                        .get(&k)
                        .copied()
                        .unwrap_or(0.0),
                },
            }
        } else {
            match transition {
                Transition::Infection => rates
                    .event_rates
                    .ei
                    .as_ref()
                    .map_or(0.0, |ei| ei[individual - 1]),
                Transition::Removal => rates
                    .event_rates
                    .ir
                    .as_ref()
                    .map_or(0.0, |ir| ir[individual - 1]),
                Transition::Exposure => unreachable!("exposure is always the transmission"),
            }
        };

        if realized <= 0.0 {
            return Ok(minus_inf);
        }
        log_likelihood += realized.ln();
        if log_likelihood < cfg.early_stop_threshold {
            return Ok(minus_inf);
        }

        // realized > 0 guarantees the individual is in the originating
        // state, so the transition is legal
        let new_state = transition.target_state(rf.class);
        rates.apply_event(individual, new_state, pop, rf, rp)?;
    }

    Ok(Evaluated {
        log_likelihood,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelClass;
    use crate::riskdsl::{parse_risk_expr, ExprContext};

    fn pop2() -> Population {
        Population::from_columns(
            vec![("rf".into(), vec![1.0, 1.0])],
            vec![vec![0.0, 1.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    fn sir_unit_kernel(sparks: f64, removal: f64) -> (RiskFunctions, RiskParameters) {
        let rf = RiskFunctions {
            class: ModelClass::Sir,
            sparks: parse_risk_expr("theta[1]", ExprContext::Single).unwrap(),
            susceptibility: parse_risk_expr("1.0", ExprContext::Single).unwrap(),
            infectivity_kernel: parse_risk_expr("dist(i,k,1)^(-4.0)", ExprContext::Pair).unwrap(),
            transmissibility: parse_risk_expr("1.0", ExprContext::Single).unwrap(),
            latency: None,
            removal: Some(parse_risk_expr("theta[1]", ExprContext::Single).unwrap()),
        };
        let rp = RiskParameters {
            sparks: vec![sparks],
            susceptibility: vec![],
            infectivity_kernel: vec![],
            transmissibility: vec![],
            latency: None,
            removal: Some(vec![removal]),
        };
        (rf, rp)
    }

    /// Two individuals, (I, S) at t=0, unit pair rate, removal rate 0.1,
    /// no sparks; 1 infects 2 at t=2.0: logL = ln(1.0) - 1.1 * 2.0 = -2.2.
    #[test]
    fn hand_computed_two_individual_fixture() {
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.0, 0.1);
        let starting = vec![DiseaseState::Infectious, DiseaseState::Susceptible];
        let mut events = Events::new(ModelClass::Sir, 2);
        events.start_time = Some(0.0);
        events.set(2, Transition::Infection, Some(2.0));
        let mut net = TransmissionNetwork::new(2);
        net.set_source(2, TransmissionSource::Individual(1));

        let cfg = LikelihoodConfig::default();
        let tn = log_likelihood_tnilm(&rf, &rp, &pop, &starting, &events, &net, &cfg).unwrap();
        assert!(
            (tn.log_likelihood - (-2.2)).abs() < 1e-12,
            "{}",
            tn.log_likelihood
        );

        // single possible source: marginal equals joint
        let ilm = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg).unwrap();
        assert!((ilm.log_likelihood - (-2.2)).abs() < 1e-12);
    }

    #[test]
    fn empty_event_set_is_zero() {
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.0, 0.1);
        let starting = vec![DiseaseState::Susceptible; 2];
        let events = Events::new(ModelClass::Sir, 2);
        let cfg = LikelihoodConfig::default();
        let r = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg).unwrap();
        assert_eq!(r.log_likelihood, 0.0);
    }

    #[test]
    fn impossible_source_is_minus_infinity() {
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.0, 0.1);
        let starting = vec![DiseaseState::Susceptible, DiseaseState::Susceptible];
        // 2 infected at t=1 "by" 1, but 1 was never infectious
        let mut events = Events::new(ModelClass::Sir, 2);
        events.start_time = Some(0.0);
        events.set(2, Transition::Infection, Some(1.0));
        let mut net = TransmissionNetwork::new(2);
        net.set_source(2, TransmissionSource::Individual(1));
        let cfg = LikelihoodConfig::default();
        let r = log_likelihood_tnilm(&rf, &rp, &pop, &starting, &events, &net, &cfg).unwrap();
        assert_eq!(r.log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn marginalization_three_individuals() {
        // 1 and 2 infectious, 3 susceptible; rate(3<-1)=0.3, rate(3<-2)=0.6,
        // sparks 0.1; 3 infected at t=1.5.
        // exp(ilm) must equal the sum of exp(tnilm) over the three sources.
        let n = 3;
        let mut dist = vec![0.0; n * n];
        // choose distances so dist^-4 gives 0.3 and 0.6
        let d31 = (0.3_f64).powf(-1.0 / 4.0);
        let d32 = (0.6_f64).powf(-1.0 / 4.0);
        dist[2 * n] = d31;
        dist[2 * n + 1] = d32;
        dist[2] = d31;
        dist[n + 2] = d32;
        let pop =
            Population::from_columns(vec![("rf".into(), vec![1.0; n])], vec![dist]).unwrap();
        let (rf, rp) = sir_unit_kernel(0.1, 0.0);
        let starting = vec![
            DiseaseState::Infectious,
            DiseaseState::Infectious,
            DiseaseState::Susceptible,
        ];
        let mut events = Events::new(ModelClass::Sir, n);
        events.start_time = Some(0.0);
        events.set(3, Transition::Infection, Some(1.5));

        let cfg = LikelihoodConfig::default();
        let ilm = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg)
            .unwrap()
            .log_likelihood;

        let mut total = 0.0;
        for source in [
            TransmissionSource::Individual(1),
            TransmissionSource::Individual(2),
            TransmissionSource::External,
        ] {
            let mut net = TransmissionNetwork::new(n);
            net.set_source(3, source);
            let tn = log_likelihood_tnilm(&rf, &rp, &pop, &starting, &events, &net, &cfg)
                .unwrap()
                .log_likelihood;
            total += tn.exp();
        }
        assert!(
            (total - ilm.exp()).abs() / ilm.exp() < 1e-12,
            "sum {total} vs {}",
            ilm.exp()
        );

        // the source-k2 network term realizes ln(0.6)
        let mut net = TransmissionNetwork::new(n);
        net.set_source(3, TransmissionSource::Individual(2));
        let tn2 = log_likelihood_tnilm(&rf, &rp, &pop, &starting, &events, &net, &cfg)
            .unwrap()
            .log_likelihood;
        let upsilon = 0.3 + 0.6 + 0.1;
        assert!((tn2 - (0.6_f64.ln() - upsilon * 1.5)).abs() < 1e-10);
    }

    #[test]
    fn early_stop_matches_unstopped() {
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.0, 0.1);
        let starting = vec![DiseaseState::Infectious, DiseaseState::Susceptible];
        let mut events = Events::new(ModelClass::Sir, 2);
        events.start_time = Some(0.0);
        events.set(2, Transition::Infection, Some(2.0));
        events.set(1, Transition::Removal, Some(3.0));
        events.set(2, Transition::Removal, Some(9.0));

        let plain = log_likelihood_ilm(
            &rf,
            &rp,
            &pop,
            &starting,
            &events,
            &LikelihoodConfig::default(),
        )
        .unwrap()
        .log_likelihood;
        assert!(plain.is_finite());

        // threshold below the final value: identical result
        let below = LikelihoodConfig {
            early_stop_threshold: plain - 1.0,
            ..Default::default()
        };
        let r = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &below).unwrap();
        assert_eq!(r.log_likelihood, plain);

        // threshold above the final value: -inf
        let above = LikelihoodConfig {
            early_stop_threshold: plain + 1.0,
            ..Default::default()
        };
        let r = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &above).unwrap();
        assert_eq!(r.log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn snapshots_capture_competing_rates() {
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.25, 0.1);
        let starting = vec![DiseaseState::Infectious, DiseaseState::Susceptible];
        let mut events = Events::new(ModelClass::Sir, 2);
        events.start_time = Some(0.0);
        events.set(2, Transition::Infection, Some(2.0));
        let cfg = LikelihoodConfig {
            collect_transmission_rates: true,
            ..Default::default()
        };
        let r = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg).unwrap();
        let snaps = r.snapshots.unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].individual, 2);
        assert_eq!(snaps[0].exogenous, 0.25);
        assert_eq!(snaps[0].endogenous[&1], 1.0);
        assert!((snaps[0].total() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn inverted_ordering_returns_minus_infinity() {
        // removal drawn before infection (possible in initialization
        // draws): realized rate is zero, not an error
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.5, 0.1);
        let starting = vec![DiseaseState::Susceptible; 2];
        let mut events = Events::new(ModelClass::Sir, 2);
        events.set(1, Transition::Removal, Some(1.0));
        events.set(1, Transition::Infection, Some(2.0));
        let cfg = LikelihoodConfig::default();
        let r = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg).unwrap();
        assert_eq!(r.log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn anchored_window_vs_declared_start() {
        // with start_time=None the first event contributes no survival term
        let pop = pop2();
        let (rf, rp) = sir_unit_kernel(0.0, 0.1);
        let starting = vec![DiseaseState::Infectious, DiseaseState::Susceptible];
        let mut events = Events::new(ModelClass::Sir, 2);
        events.set(2, Transition::Infection, Some(2.0));
        let cfg = LikelihoodConfig::default();
        let anchored = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg)
            .unwrap()
            .log_likelihood;
        assert!(
            anchored.abs() < 1e-12,
            "ln(1.0) only: {anchored}"
        );
        events.start_time = Some(0.0);
        let declared = log_likelihood_ilm(&rf, &rp, &pop, &starting, &events, &cfg)
            .unwrap()
            .log_likelihood;
        assert!((declared - (-2.2)).abs() < 1e-12);
    }
}
