//! Disease states and exact transition-rate bookkeeping.
//!
//! A [`RateState`] owns the current state vector plus the competing
//! transmission rates (one per susceptible-infectious pair, plus an
//! exogenous term) and the per-individual event rates. `apply_event`
//! updates both incrementally: an event touches one row and at most one
//! column, so maintenance is O(n) instead of the O(n^2) full rebuild, which
//! is kept as [`RateState::recompute`] for drift control and as a test
//! oracle.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{IndividualRates, ModelClass, RiskFunctions, RiskParameters};
use crate::population::Population;
use crate::riskdsl::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiseaseState {
    Susceptible,
    Exposed,
    Infectious,
    Removed,
}

impl DiseaseState {
    pub fn letter(self) -> char {
        match self {
            DiseaseState::Susceptible => 'S',
            DiseaseState::Exposed => 'E',
            DiseaseState::Infectious => 'I',
            DiseaseState::Removed => 'R',
        }
    }

    pub fn legal_for(self, class: ModelClass) -> bool {
        match self {
            DiseaseState::Exposed => class.has_exposed(),
            DiseaseState::Removed => class.has_removed(),
            _ => true,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" => Some(DiseaseState::Susceptible),
            "E" => Some(DiseaseState::Exposed),
            "I" => Some(DiseaseState::Infectious),
            "R" => Some(DiseaseState::Removed),
            _ => None,
        }
    }
}

impl fmt::Display for DiseaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Error)]
pub enum RateError {
    #[error("illegal transition for individual {individual}: {from} -> {to} in class {class}")]
    IllegalTransition {
        individual: usize,
        from: DiseaseState,
        to: DiseaseState,
        class: ModelClass,
    },
    #[error("state {state} not representable in class {class}")]
    IllegalState { state: DiseaseState, class: ModelClass },
    #[error("risk expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Competing transmission rates: the exogenous (sparks) rate per
/// susceptible and, per susceptible row, the endogenous rate against each
/// infectious individual.
#[derive(Debug, Clone, Default)]
pub struct TransmissionRates {
    pub exogenous: Vec<f64>,
    /// `endogenous[i-1]` maps infectious k -> rate; empty for
    /// non-susceptible rows.
    pub endogenous: Vec<BTreeMap<usize, f64>>,
}

impl TransmissionRates {
    fn new(n: usize) -> Self {
        Self {
            exogenous: vec![0.0; n],
            endogenous: vec![BTreeMap::new(); n],
        }
    }

    /// Row sum: exogenous plus all endogenous entries for susceptible `i`.
    pub fn row_total(&self, i: usize) -> f64 {
        self.exogenous[i - 1] + self.endogenous[i - 1].values().sum::<f64>()
    }
}

/// Per-individual transition rates; entries are zero for individuals not
/// in the originating state.
#[derive(Debug, Clone, Default)]
pub struct EventRates {
    pub se: Vec<f64>,
    /// Absent for classes without an exposed state.
    pub ei: Option<Vec<f64>>,
    /// Absent for classes without a removed state.
    pub ir: Option<Vec<f64>>,
}

impl EventRates {
    fn new(class: ModelClass, n: usize) -> Self {
        Self {
            se: vec![0.0; n],
            ei: class.has_exposed().then(|| vec![0.0; n]),
            ir: class.has_removed().then(|| vec![0.0; n]),
        }
    }

    /// Total event rate over the population (the exponential rate of the
    /// next inter-event time).
    pub fn total(&self) -> f64 {
        let mut total: f64 = self.se.iter().sum();
        if let Some(ei) = &self.ei {
            total += ei.iter().sum::<f64>();
        }
        if let Some(ir) = &self.ir {
            total += ir.iter().sum::<f64>();
        }
        total
    }
}

/// States plus both rate structures, kept mutually consistent.
#[derive(Debug, Clone)]
pub struct RateState {
    class: ModelClass,
    states: Vec<DiseaseState>,
    pub transmission: TransmissionRates,
    pub event_rates: EventRates,
    cache: IndividualRates,
    events_since_recompute: usize,
    recompute_interval: usize,
}

/// Full rebuilds every this many incremental updates bound float drift.
pub const DEFAULT_RECOMPUTE_INTERVAL: usize = 1000;

impl RateState {
    /// Build rates from scratch for the given states.
    pub fn initialize(
        states: Vec<DiseaseState>,
        pop: &Population,
        rf: &RiskFunctions,
        rp: &RiskParameters,
    ) -> Result<Self, RateError> {
        for s in &states {
            if !s.legal_for(rf.class) {
                return Err(RateError::IllegalState {
                    state: *s,
                    class: rf.class,
                });
            }
        }
        let cache = IndividualRates::compute(rf, rp, pop)?;
        let mut rs = Self {
            class: rf.class,
            states,
            transmission: TransmissionRates::new(pop.len()),
            event_rates: EventRates::new(rf.class, pop.len()),
            cache,
            events_since_recompute: 0,
            recompute_interval: DEFAULT_RECOMPUTE_INTERVAL,
        };
        rs.rebuild(pop, rf, rp)?;
        Ok(rs)
    }

    pub fn with_recompute_interval(mut self, interval: usize) -> Self {
        assert!(interval > 0);
        self.recompute_interval = interval;
        self
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    pub fn states(&self) -> &[DiseaseState] {
        &self.states
    }

    pub fn state(&self, individual: usize) -> DiseaseState {
        self.states[individual - 1]
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Total event rate (zero signals no further events are possible).
    pub fn total_rate(&self) -> f64 {
        self.event_rates.total()
    }

    fn rebuild(
        &mut self,
        pop: &Population,
        rf: &RiskFunctions,
        rp: &RiskParameters,
    ) -> Result<(), RateError> {
        let n = self.n();
        self.transmission = TransmissionRates::new(n);
        self.event_rates = EventRates::new(self.class, n);
        let infectious: Vec<usize> = (1..=n)
            .filter(|&k| self.states[k - 1] == DiseaseState::Infectious)
            .collect();
        for i in 1..=n {
            match self.states[i - 1] {
                DiseaseState::Susceptible => {
                    let exo = self.cache.sparks[i - 1];
                    self.transmission.exogenous[i - 1] = exo;
                    let mut total = exo;
                    for &k in &infectious {
                        let rate = self.cache.pair_rate(rf, rp, pop, i, k)?;
                        if rate.is_sign_negative() {
                            return Err(RateError::Eval(EvalError::Negative(rate)));
                        }
                        self.transmission.endogenous[i - 1].insert(k, rate);
                        total += rate;
                    }
                    self.event_rates.se[i - 1] = total;
                }
                DiseaseState::Exposed => {
                    let ei = self
                        .event_rates
                        .ei
                        .as_mut()
                        .expect("exposed state implies class with E");
                    ei[i - 1] = self.cache.latency.as_ref().unwrap()[i - 1];
                }
                DiseaseState::Infectious => {
                    if let Some(ir) = self.event_rates.ir.as_mut() {
                        ir[i - 1] = self.cache.removal.as_ref().unwrap()[i - 1];
                    }
                }
                DiseaseState::Removed => {}
            }
        }
        self.events_since_recompute = 0;
        Ok(())
    }

    /// Recompute every rate from scratch (drift control / test oracle).
    pub fn recompute(
        &mut self,
        pop: &Population,
        rf: &RiskFunctions,
        rp: &RiskParameters,
    ) -> Result<(), RateError> {
        self.rebuild(pop, rf, rp)
    }

    fn legal_transition(&self, from: DiseaseState, to: DiseaseState) -> bool {
        use DiseaseState::*;
        match (from, to) {
            (Susceptible, Exposed) => self.class.has_exposed(),
            (Susceptible, Infectious) => !self.class.has_exposed(),
            (Exposed, Infectious) => self.class.has_exposed(),
            (Infectious, Removed) => self.class.has_removed(),
            _ => false,
        }
    }

    /// Apply one disease-state transition, updating only the affected rows
    /// and columns.
    pub fn apply_event(
        &mut self,
        individual: usize,
        new_state: DiseaseState,
        pop: &Population,
        rf: &RiskFunctions,
        rp: &RiskParameters,
    ) -> Result<(), RateError> {
        let from = self.states[individual - 1];
        if !self.legal_transition(from, new_state) {
            return Err(RateError::IllegalTransition {
                individual,
                from,
                to: new_state,
                class: self.class,
            });
        }
        self.states[individual - 1] = new_state;
        let idx = individual - 1;
        match new_state {
            DiseaseState::Exposed => {
                // leaves S: row disappears
                self.clear_susceptible_row(idx);
                self.event_rates.ei.as_mut().unwrap()[idx] =
                    self.cache.latency.as_ref().unwrap()[idx];
            }
            DiseaseState::Infectious => {
                match from {
                    DiseaseState::Susceptible => self.clear_susceptible_row(idx),
                    DiseaseState::Exposed => {
                        self.event_rates.ei.as_mut().unwrap()[idx] = 0.0;
                    }
                    _ => unreachable!("guarded by legal_transition"),
                }
                if let Some(ir) = self.event_rates.ir.as_mut() {
                    ir[idx] = self.cache.removal.as_ref().unwrap()[idx];
                }
                self.add_infectious_column(individual, pop, rf, rp)?;
            }
            DiseaseState::Removed => {
                self.event_rates.ir.as_mut().unwrap()[idx] = 0.0;
                self.remove_infectious_column(individual);
            }
            DiseaseState::Susceptible => unreachable!("guarded by legal_transition"),
        }
        self.events_since_recompute += 1;
        if self.events_since_recompute >= self.recompute_interval {
            self.rebuild(pop, rf, rp)?;
        }
        Ok(())
    }

    fn clear_susceptible_row(&mut self, idx: usize) {
        self.transmission.exogenous[idx] = 0.0;
        self.transmission.endogenous[idx].clear();
        self.event_rates.se[idx] = 0.0;
    }

    fn add_infectious_column(
        &mut self,
        k: usize,
        pop: &Population,
        rf: &RiskFunctions,
        rp: &RiskParameters,
    ) -> Result<(), RateError> {
        for i in 1..=self.n() {
            if self.states[i - 1] == DiseaseState::Susceptible {
                let rate = self.cache.pair_rate(rf, rp, pop, i, k)?;
                if rate.is_sign_negative() {
                    return Err(RateError::Eval(EvalError::Negative(rate)));
                }
                self.transmission.endogenous[i - 1].insert(k, rate);
                self.event_rates.se[i - 1] += rate;
            }
        }
        Ok(())
    }

    fn remove_infectious_column(&mut self, k: usize) {
        for i in 1..=self.n() {
            if self.states[i - 1] == DiseaseState::Susceptible {
                if let Some(rate) = self.transmission.endogenous[i - 1].remove(&k) {
                    self.event_rates.se[i - 1] -= rate;
                    // repeated subtraction may leave a tiny negative residue
                    if self.event_rates.se[i - 1] < 0.0 {
                        self.event_rates.se[i - 1] = self.transmission.row_total(i);
                    }
                }
            }
        }
    }
}
