//! Epidemic records: per-individual transition times, the transmission
//! network, and observational data.

use std::fmt;

use thiserror::Error;

use crate::model::ModelClass;
use crate::rates::DiseaseState;

/// The three transition kinds. For classes without an exposed state the
/// transmission event is the `Infection`; with one it is the `Exposure`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transition {
    Exposure,
    Infection,
    Removal,
}

impl Transition {
    /// Ordering priority for simultaneous times: E < I < R.
    pub fn priority(self) -> u8 {
        match self {
            Transition::Exposure => 0,
            Transition::Infection => 1,
            Transition::Removal => 2,
        }
    }

    /// The transition that receives a transmission in this class.
    pub fn transmission_for(class: ModelClass) -> Transition {
        if class.has_exposed() {
            Transition::Exposure
        } else {
            Transition::Infection
        }
    }

    /// State an individual enters through this transition.
    pub fn target_state(self, class: ModelClass) -> DiseaseState {
        match self {
            Transition::Exposure => DiseaseState::Exposed,
            Transition::Infection => DiseaseState::Infectious,
            Transition::Removal => {
                debug_assert!(class.has_removed());
                DiseaseState::Removed
            }
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Exposure => "exposure",
            Transition::Infection => "infection",
            Transition::Removal => "removal",
        })
    }
}

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("individual {individual}: {first} time {t1} does not precede {second} time {t2}")]
    OutOfOrder {
        individual: usize,
        first: Transition,
        second: Transition,
        t1: f64,
        t2: f64,
    },
    #[error("individual {individual}: transition {transition} not representable in class {class}")]
    WrongClass {
        individual: usize,
        transition: Transition,
        class: ModelClass,
    },
    #[error("individual {individual}: {transition} time is NaN")]
    NaNTime {
        individual: usize,
        transition: Transition,
    },
    #[error("individual {individual} has {second} without {first}")]
    GapInChain {
        individual: usize,
        first: Transition,
        second: Transition,
    },
}

/// Per-individual transition times; `None` means the transition never
/// occurred. Times for states preceding an individual's starting state are
/// absent (a simulation seeded with an infectious individual records no
/// infection event for it).
#[derive(Debug, Clone, PartialEq)]
pub struct Events {
    class: ModelClass,
    /// Window start for likelihood survival terms. Simulations stamp their
    /// start time here; augmented event sets leave it `None`, anchoring the
    /// likelihood at the earliest event.
    pub start_time: Option<f64>,
    exposure: Vec<Option<f64>>,
    infection: Vec<Option<f64>>,
    removal: Vec<Option<f64>>,
}

impl Events {
    pub fn new(class: ModelClass, n: usize) -> Self {
        Self {
            class,
            start_time: None,
            exposure: vec![None; n],
            infection: vec![None; n],
            removal: vec![None; n],
        }
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    pub fn len(&self) -> usize {
        self.infection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infection.is_empty()
    }

    pub fn get(&self, individual: usize, transition: Transition) -> Option<f64> {
        match transition {
            Transition::Exposure => self.exposure[individual - 1],
            Transition::Infection => self.infection[individual - 1],
            Transition::Removal => self.removal[individual - 1],
        }
    }

    pub fn set(&mut self, individual: usize, transition: Transition, time: Option<f64>) {
        let slot = match transition {
            Transition::Exposure => &mut self.exposure[individual - 1],
            Transition::Infection => &mut self.infection[individual - 1],
            Transition::Removal => &mut self.removal[individual - 1],
        };
        *slot = time;
    }

    /// Time the individual received its transmission (exposure for classes
    /// with E, infection otherwise).
    pub fn transmission_time(&self, individual: usize) -> Option<f64> {
        self.get(individual, Transition::transmission_for(self.class))
    }

    /// Whether the individual was ever exposed/infected (has a transmission
    /// event recorded).
    pub fn was_infected(&self, individual: usize) -> bool {
        self.transmission_time(individual).is_some()
    }

    /// All recorded events sorted by (time, E<I<R priority, individual id).
    pub fn sorted(&self) -> Vec<(f64, Transition, usize)> {
        let mut out = Vec::new();
        for i in 1..=self.len() {
            for tr in [Transition::Exposure, Transition::Infection, Transition::Removal] {
                if let Some(t) = self.get(i, tr) {
                    out.push((t, tr, i));
                }
            }
        }
        out.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.priority().cmp(&b.1.priority()))
                .then(a.2.cmp(&b.2))
        });
        out
    }

    /// The earliest recorded event time, if any events exist.
    pub fn first_time(&self) -> Option<f64> {
        self.sorted().first().map(|(t, _, _)| *t)
    }

    /// Validate the per-individual chain: slots legal for the class, times
    /// strictly increasing along it, chains gap-free relative to the
    /// starting state.
    pub fn validate(&self, starting_states: &[DiseaseState]) -> Result<(), EventsError> {
        for i in 1..=self.len() {
            let e = self.get(i, Transition::Exposure);
            let inf = self.get(i, Transition::Infection);
            let r = self.get(i, Transition::Removal);
            if !self.class.has_exposed() && e.is_some() {
                return Err(EventsError::WrongClass {
                    individual: i,
                    transition: Transition::Exposure,
                    class: self.class,
                });
            }
            if !self.class.has_removed() && r.is_some() {
                return Err(EventsError::WrongClass {
                    individual: i,
                    transition: Transition::Removal,
                    class: self.class,
                });
            }
            for (tr, t) in [
                (Transition::Exposure, e),
                (Transition::Infection, inf),
                (Transition::Removal, r),
            ] {
                if t.is_some_and(f64::is_nan) {
                    return Err(EventsError::NaNTime {
                        individual: i,
                        transition: tr,
                    });
                }
            }
            let start = starting_states[i - 1];
            // chain completeness: a later transition implies the earlier
            // one happened or the individual started beyond it
            if self.class.has_exposed() && inf.is_some() && e.is_none() && start == DiseaseState::Susceptible
            {
                return Err(EventsError::GapInChain {
                    individual: i,
                    first: Transition::Exposure,
                    second: Transition::Infection,
                });
            }
            if r.is_some()
                && inf.is_none()
                && matches!(start, DiseaseState::Susceptible | DiseaseState::Exposed)
            {
                return Err(EventsError::GapInChain {
                    individual: i,
                    first: Transition::Infection,
                    second: Transition::Removal,
                });
            }
            let ordered = [
                (Transition::Exposure, e, Transition::Infection, inf),
                (Transition::Infection, inf, Transition::Removal, r),
                (Transition::Exposure, e, Transition::Removal, r),
            ];
            for (tr1, t1, tr2, t2) in ordered {
                if let (Some(t1), Some(t2)) = (t1, t2) {
                    if t1 >= t2 {
                        return Err(EventsError::OutOfOrder {
                            individual: i,
                            first: tr1,
                            second: tr2,
                            t1,
                            t2,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Compact triple-stacked representation for chain storage
    /// (`NaN` = absent): exposure block, infection block, removal block.
    pub fn to_compact(&self) -> Box<[f64]> {
        let n = self.len();
        let mut out = Vec::with_capacity(3 * n);
        for slot in [&self.exposure, &self.infection, &self.removal] {
            out.extend(slot.iter().map(|t| t.unwrap_or(f64::NAN)));
        }
        out.into_boxed_slice()
    }

    pub fn from_compact(class: ModelClass, compact: &[f64]) -> Self {
        let n = compact.len() / 3;
        let grab = |block: usize| -> Vec<Option<f64>> {
            compact[block * n..(block + 1) * n]
                .iter()
                .map(|t| if t.is_nan() { None } else { Some(*t) })
                .collect()
        };
        Self {
            class,
            start_time: None,
            exposure: grab(0),
            infection: grab(1),
            removal: grab(2),
        }
    }
}

/// Where an individual's transmission came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionSource {
    /// Never infected.
    None,
    /// Exogenous (sparks) exposure.
    External,
    /// Endogenous exposure from the given individual (1-based).
    Individual(usize),
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("individual {individual} is infected in the event set but has no transmission source")]
    MissingSource { individual: usize },
    #[error("individual {individual} has a transmission source but never an infection event")]
    SourcelessInfection { individual: usize },
    #[error("individual {infectee}: source {source_id} was not infectious at transmission time {t}")]
    SourceNotInfectious {
        infectee: usize,
        source_id: usize,
        t: f64,
    },
}

/// Latent transmission network: one source per ever-infected individual.
///
/// Stored column-sparse (each infectee has at most one source), which makes
/// the "column sum plus external flag is 0 or 1" invariant structural. The
/// boolean-matrix view is recoverable through [`edges`](Self::edges).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionNetwork {
    sources: Vec<TransmissionSource>,
}

impl TransmissionNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            sources: vec![TransmissionSource::None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn source(&self, individual: usize) -> TransmissionSource {
        self.sources[individual - 1]
    }

    pub fn set_source(&mut self, individual: usize, source: TransmissionSource) {
        self.sources[individual - 1] = source;
    }

    pub fn is_external(&self, individual: usize) -> bool {
        matches!(self.sources[individual - 1], TransmissionSource::External)
    }

    /// Endogenous edges as (source, infectee) pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sources.iter().enumerate().filter_map(|(idx, s)| match s {
            TransmissionSource::Individual(k) => Some((*k, idx + 1)),
            _ => None,
        })
    }

    /// Individuals infected by `k`.
    pub fn offspring(&self, k: usize) -> Vec<usize> {
        self.edges()
            .filter_map(|(src, inf)| (src == k).then_some(inf))
            .collect()
    }

    /// Check compatibility against an event set: every infected individual
    /// has exactly one source, sources were infectious at the transmission
    /// time, and no source is recorded for the never-infected.
    pub fn validate(
        &self,
        events: &Events,
        starting_states: &[DiseaseState],
    ) -> Result<(), NetworkError> {
        for i in 1..=self.len() {
            let infected = events.was_infected(i);
            match self.sources[i - 1] {
                TransmissionSource::None => {
                    if infected {
                        return Err(NetworkError::MissingSource { individual: i });
                    }
                }
                TransmissionSource::External => {
                    if !infected {
                        return Err(NetworkError::SourcelessInfection { individual: i });
                    }
                }
                TransmissionSource::Individual(k) => {
                    if !infected {
                        return Err(NetworkError::SourcelessInfection { individual: i });
                    }
                    let t = events.transmission_time(i).unwrap();
                    let k_infectious = events.get(k, Transition::Infection);
                    let k_removed = events.get(k, Transition::Removal);
                    let ok = match k_infectious {
                        // without a recorded infection event, k is
                        // infectious from the window start only when it was
                        // seeded infectious
                        None => starting_states[k - 1] == DiseaseState::Infectious,
                        Some(ti) => ti < t,
                    } && match k_removed {
                        None => true,
                        Some(tr) => t < tr,
                    };
                    if !ok {
                        return Err(NetworkError::SourceNotInfectious {
                            infectee: i,
                            source_id: k,
                            t,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Compact signed encoding for chain storage: -1 none, 0 external,
    /// k > 0 endogenous source.
    pub fn to_compact(&self) -> Box<[i32]> {
        self.sources
            .iter()
            .map(|s| match s {
                TransmissionSource::None => -1,
                TransmissionSource::External => 0,
                TransmissionSource::Individual(k) => *k as i32,
            })
            .collect()
    }

    pub fn from_compact(compact: &[i32]) -> Self {
        Self {
            sources: compact
                .iter()
                .map(|c| match *c {
                    -1 => TransmissionSource::None,
                    0 => TransmissionSource::External,
                    k => TransmissionSource::Individual(k as usize),
                })
                .collect(),
        }
    }
}

/// Observed infection/removal times (with observation delay applied);
/// `None` for unobserved.
#[derive(Debug, Clone, PartialEq)]
pub struct EventObservations {
    pub infection: Vec<Option<f64>>,
    pub removal: Vec<Option<f64>>,
}

impl EventObservations {
    pub fn new(n: usize) -> Self {
        Self {
            infection: vec![None; n],
            removal: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.infection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infection.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.infection.iter().filter(|o| o.is_some()).count()
    }
}
