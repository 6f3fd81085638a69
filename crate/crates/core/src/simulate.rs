//! Exact event-driven epidemic simulation and observation generation.
//!
//! The next inter-event time is exponential with the total event rate;
//! the event cell is drawn proportional to its rate by a single uniform
//! against the cumulative rate vector, and transmissions sample their
//! source from the competing rates at that instant, so the network is
//! complete at every point of the run.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::events::{EventObservations, Events, Transition, TransmissionNetwork, TransmissionSource};
use crate::model::{ModelClass, RiskFunctions, RiskParameters};
use crate::population::Population;
use crate::rates::{DiseaseState, RateError, RateState};
use crate::stats::Distribution;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("starting states must have one entry per individual ({expected}), got {got}")]
    StartingStates { expected: usize, got: usize },
    #[error("observation delay distribution must have non-negative support")]
    NegativeDelay,
    #[error(
        "forced infection observation impossible for individual {individual}: delay lower bound \
         {delay_lo} is not below the infectious period {period}"
    )]
    ForceImpossible {
        individual: usize,
        delay_lo: f64,
        period: f64,
    },
    #[error("source sampling requested for individual {individual} with zero transmission rate")]
    ZeroSourceRate { individual: usize },
}

/// Stop conditions for [`Simulation::run`]; the first one satisfied ends
/// the run, and a run always ends when no further events are possible.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopCondition {
    pub tmax: Option<f64>,
    pub max_iterations: Option<u64>,
    pub max_wall_time: Option<Duration>,
}

impl StopCondition {
    pub fn tmax(t: f64) -> Self {
        Self {
            tmax: Some(t),
            ..Default::default()
        }
    }
}

/// A single pending disease-state transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingEvent {
    pub individual: usize,
    pub new_state: DiseaseState,
}

/// Mutable simulation state: clock, rates, record, network, rng stream.
#[derive(Debug)]
pub struct Simulation<'a> {
    pub population: &'a Population,
    pub functions: &'a RiskFunctions,
    pub parameters: &'a RiskParameters,
    pub time: f64,
    pub iterations: u64,
    pub rates: RateState,
    pub events: Events,
    pub network: TransmissionNetwork,
    rng: ChaCha8Rng,
}

impl<'a> Simulation<'a> {
    /// Start a simulation at time 0 with every individual susceptible.
    pub fn new(
        population: &'a Population,
        functions: &'a RiskFunctions,
        parameters: &'a RiskParameters,
        rng: ChaCha8Rng,
    ) -> Result<Self, SimulationError> {
        let states = vec![DiseaseState::Susceptible; population.len()];
        Self::with_starting_states(population, functions, parameters, states, 0.0, rng)
    }

    pub fn with_starting_states(
        population: &'a Population,
        functions: &'a RiskFunctions,
        parameters: &'a RiskParameters,
        starting_states: Vec<DiseaseState>,
        start_time: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self, SimulationError> {
        if starting_states.len() != population.len() {
            return Err(SimulationError::StartingStates {
                expected: population.len(),
                got: starting_states.len(),
            });
        }
        let rates = RateState::initialize(starting_states, population, functions, parameters)?;
        let mut events = Events::new(functions.class, population.len());
        events.start_time = Some(start_time);
        Ok(Self {
            population,
            functions,
            parameters,
            time: start_time,
            iterations: 0,
            rates,
            events,
            network: TransmissionNetwork::new(population.len()),
            rng,
        })
    }

    pub fn class(&self) -> ModelClass {
        self.functions.class
    }

    fn transmission_target(&self) -> DiseaseState {
        if self.class().has_exposed() {
            DiseaseState::Exposed
        } else {
            DiseaseState::Infectious
        }
    }

    /// Draw the next inter-event time and event cell. `None` when the total
    /// rate is zero (no further events possible). Consumes randomness but
    /// does not change states, rates, or records.
    pub fn next_event(&mut self) -> Option<(f64, PendingEvent)> {
        let total = self.rates.total_rate();
        if total <= 0.0 {
            return None;
        }
        // exponential via inverse CDF; guard against ln(0)
        let mut u: f64 = self.rng.gen();
        if u <= f64::MIN_POSITIVE {
            u = f64::MIN_POSITIVE;
        }
        let delta = -u.ln() / total;

        // walk the cumulative rate vector: all SE cells, then EI, then IR
        let mut target = self.rng.gen::<f64>() * total;
        let er = &self.rates.event_rates;
        let transmission_state = self.transmission_target();
        for (idx, rate) in er.se.iter().enumerate() {
            if *rate > 0.0 {
                target -= rate;
                if target <= 0.0 {
                    return Some((
                        delta,
                        PendingEvent {
                            individual: idx + 1,
                            new_state: transmission_state,
                        },
                    ));
                }
            }
        }
        if let Some(ei) = &er.ei {
            for (idx, rate) in ei.iter().enumerate() {
                if *rate > 0.0 {
                    target -= rate;
                    if target <= 0.0 {
                        return Some((
                            delta,
                            PendingEvent {
                                individual: idx + 1,
                                new_state: DiseaseState::Infectious,
                            },
                        ));
                    }
                }
            }
        }
        if let Some(ir) = &er.ir {
            for (idx, rate) in ir.iter().enumerate() {
                if *rate > 0.0 {
                    target -= rate;
                    if target <= 0.0 {
                        return Some((
                            delta,
                            PendingEvent {
                                individual: idx + 1,
                                new_state: DiseaseState::Removed,
                            },
                        ));
                    }
                }
            }
        }
        // cumulative rounding can leave a sliver; attribute it to the last
        // positive cell
        self.last_positive_cell().map(|event| (delta, event))
    }

    fn last_positive_cell(&self) -> Option<PendingEvent> {
        let er = &self.rates.event_rates;
        if let Some(ir) = &er.ir {
            if let Some(idx) = ir.iter().rposition(|r| *r > 0.0) {
                return Some(PendingEvent {
                    individual: idx + 1,
                    new_state: DiseaseState::Removed,
                });
            }
        }
        if let Some(ei) = &er.ei {
            if let Some(idx) = ei.iter().rposition(|r| *r > 0.0) {
                return Some(PendingEvent {
                    individual: idx + 1,
                    new_state: DiseaseState::Infectious,
                });
            }
        }
        er.se.iter().rposition(|r| *r > 0.0).map(|idx| PendingEvent {
            individual: idx + 1,
            new_state: self.transmission_target(),
        })
    }

    /// Sample the transmission source for a just-drawn transmission event
    /// of `individual`: each infectious k with probability proportional to
    /// its competing rate, exogenous with probability proportional to the
    /// sparks rate.
    pub fn sample_source(
        &mut self,
        individual: usize,
    ) -> Result<TransmissionSource, SimulationError> {
        sample_source_from_row(
            &self.rates.transmission.endogenous[individual - 1],
            self.rates.transmission.exogenous[individual - 1],
            individual,
            &mut self.rng,
        )
    }

    /// Advance until a stop condition is reached. An event that would land
    /// beyond `tmax` is discarded and the clock is clamped to `tmax`.
    pub fn run(&mut self, stop: StopCondition) -> Result<(), SimulationError> {
        let wall_start = Instant::now();
        loop {
            if let Some(max_iter) = stop.max_iterations {
                if self.iterations >= max_iter {
                    return Ok(());
                }
            }
            if let Some(max_wall) = stop.max_wall_time {
                if wall_start.elapsed() >= max_wall {
                    return Ok(());
                }
            }
            let Some((delta, event)) = self.next_event() else {
                return Ok(());
            };
            let event_time = self.time + delta;
            if let Some(tmax) = stop.tmax {
                if event_time > tmax {
                    self.time = tmax;
                    return Ok(());
                }
            }
            self.apply(event, event_time)?;
        }
    }

    /// Record and apply one event at an absolute time.
    fn apply(&mut self, event: PendingEvent, event_time: f64) -> Result<(), SimulationError> {
        let is_transmission = self.rates.state(event.individual) == DiseaseState::Susceptible;
        let transition = match event.new_state {
            DiseaseState::Exposed => Transition::Exposure,
            DiseaseState::Infectious => Transition::Infection,
            DiseaseState::Removed => Transition::Removal,
            DiseaseState::Susceptible => unreachable!("no transition enters S"),
        };
        // transmissions record their source before rates change
        if is_transmission {
            let source = self.sample_source(event.individual)?;
            self.network.set_source(event.individual, source);
        }
        self.rates.apply_event(
            event.individual,
            event.new_state,
            self.population,
            self.functions,
            self.parameters,
        )?;
        self.events
            .set(event.individual, transition, Some(event_time));
        self.time = event_time;
        self.iterations += 1;
        Ok(())
    }

    /// State counts (S, E, I, R) at the current time.
    pub fn state_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for s in self.rates.states() {
            let slot = match s {
                DiseaseState::Susceptible => 0,
                DiseaseState::Exposed => 1,
                DiseaseState::Infectious => 2,
                DiseaseState::Removed => 3,
            };
            counts[slot] += 1;
        }
        counts
    }
}

/// Shared source-sampling kernel, also used by the Gibbs network update:
/// walks the (sorted) endogenous row then the exogenous cell.
pub fn sample_source_from_row<R: Rng + ?Sized>(
    row: &std::collections::BTreeMap<usize, f64>,
    exogenous: f64,
    individual: usize,
    rng: &mut R,
) -> Result<TransmissionSource, SimulationError> {
    let total = exogenous + row.values().sum::<f64>();
    if total <= 0.0 {
        return Err(SimulationError::ZeroSourceRate { individual });
    }
    let mut target = rng.gen::<f64>() * total;
    for (k, rate) in row {
        if *rate > 0.0 {
            target -= rate;
            if target <= 0.0 {
                return Ok(TransmissionSource::Individual(*k));
            }
        }
    }
    if exogenous > 0.0 {
        return Ok(TransmissionSource::External);
    }
    // rounding sliver: last positive endogenous cell
    row.iter()
        .rev()
        .find(|(_, r)| **r > 0.0)
        .map(|(k, _)| TransmissionSource::Individual(*k))
        .ok_or(SimulationError::ZeroSourceRate { individual })
}

/// Generate observed infection/removal times from a completed simulation.
///
/// Observed time = true time + a draw from the delay distribution. With
/// `force`, the infection delay is resampled until the infection is
/// observed before the individual's true removal, guaranteeing detection;
/// impossible cases (delay support entirely past the infectious period)
/// error out after bounded retries.
pub fn observe(
    sim: &mut Simulation<'_>,
    infection_delay: &Distribution,
    removal_delay: &Distribution,
    force: bool,
) -> Result<EventObservations, SimulationError> {
    if !infection_delay.non_negative_support() || !removal_delay.non_negative_support() {
        return Err(SimulationError::NegativeDelay);
    }
    let n = sim.population.len();
    let mut obs = EventObservations::new(n);
    const MAX_RETRIES: usize = 10_000;
    for i in 1..=n {
        let true_infection = sim.events.get(i, Transition::Infection);
        let true_removal = sim.events.get(i, Transition::Removal);
        if let Some(ti) = true_infection {
            let observed = if force {
                match true_removal {
                    Some(tr) => {
                        if infection_delay.support_lower_bound() >= tr - ti {
                            return Err(SimulationError::ForceImpossible {
                                individual: i,
                                delay_lo: infection_delay.support_lower_bound(),
                                period: tr - ti,
                            });
                        }
                        let mut accepted = None;
                        for _ in 0..MAX_RETRIES {
                            let cand = ti + infection_delay.sample(&mut sim.rng);
                            if cand < tr {
                                accepted = Some(cand);
                                break;
                            }
                        }
                        accepted.ok_or(SimulationError::ForceImpossible {
                            individual: i,
                            delay_lo: infection_delay.support_lower_bound(),
                            period: tr - ti,
                        })?
                    }
                    None => ti + infection_delay.sample(&mut sim.rng),
                }
            } else {
                ti + infection_delay.sample(&mut sim.rng)
            };
            obs.infection[i - 1] = Some(observed);
            if let Some(tr) = true_removal {
                obs.removal[i - 1] = Some(tr + removal_delay.sample(&mut sim.rng));
            }
        }
    }
    Ok(obs)
}
