//! Proposal bounds for augmented event times.
//!
//! A proposed event time must keep the chain state consistent: the
//! individual's own path ordering, the observation-delay window, the
//! latent-period window, and (when conditioning on a network) the
//! infectious window of the individual's source and of every transmission
//! the individual made. The feasible set is the intersection of intervals,
//! none of which involves the target time itself, so bounds computed
//! before a move also serve the reverse move.

use thiserror::Error;

use crate::events::{Events, Transition, TransmissionNetwork, TransmissionSource};
use crate::model::EventExtents;

#[derive(Debug, Error)]
#[error(
    "empty proposal interval for individual {individual} {transition} (lo {lo} >= hi {hi}); \
     chain state is network/event incompatible"
)]
pub struct EmptyBounds {
    pub individual: usize,
    pub transition: Transition,
    pub lo: f64,
    pub hi: f64,
}

/// Precomputed per-individual offspring lists (network fixed during one
/// event-update sweep).
pub struct OffspringIndex {
    by_source: Vec<Vec<usize>>,
}

impl OffspringIndex {
    pub fn build(network: &TransmissionNetwork) -> Self {
        let mut by_source = vec![Vec::new(); network.len()];
        for (source, infectee) in network.edges() {
            by_source[source - 1].push(infectee);
        }
        Self { by_source }
    }

    fn offspring(&self, k: usize) -> &[usize] {
        &self.by_source[k - 1]
    }
}

/// Observation context for bound computation.
pub struct BoundsContext<'a> {
    pub events: &'a Events,
    /// Present when event moves condition on the current network.
    pub network: Option<(&'a TransmissionNetwork, &'a OffspringIndex)>,
    pub observed_infection: &'a [Option<f64>],
    pub observed_removal: &'a [Option<f64>],
    pub extents: &'a EventExtents,
}

/// Feasible interval for moving one augmented event time. Errors only on an
/// inconsistent chain state, which is impossible by construction.
pub fn event_time_bounds(
    ctx: &BoundsContext<'_>,
    individual: usize,
    transition: Transition,
) -> Result<(f64, f64), EmptyBounds> {
    let class = ctx.events.class();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let events = ctx.events;

    match transition {
        Transition::Exposure => {
            // latent-period window relative to own infection time
            let inf = events
                .get(individual, Transition::Infection)
                .expect("exposure is only augmented alongside infection");
            let (ext_lo, ext_hi) = ctx.extents.exposure.expect("exposure extent required");
            lo = lo.max(inf - ext_hi);
            hi = hi.min(inf - ext_lo);
            if let Some((network, _)) = ctx.network {
                if let TransmissionSource::Individual(k) = network.source(individual) {
                    source_window(events, k, &mut lo, &mut hi);
                }
            }
        }
        Transition::Infection => {
            // observation-delay window
            let obs = ctx.observed_infection[individual - 1]
                .expect("infection is only augmented when observed");
            let (ext_lo, ext_hi) = ctx.extents.infection;
            lo = lo.max(obs - ext_hi);
            hi = hi.min(obs - ext_lo);
            if class.has_exposed() {
                // latent-period window relative to own exposure time
                let exposure = events
                    .get(individual, Transition::Exposure)
                    .expect("augmented infection in an E class has an exposure");
                let (e_lo, e_hi) = ctx.extents.exposure.expect("exposure extent required");
                lo = lo.max(exposure + e_lo);
                hi = hi.min(exposure + e_hi);
            } else if let Some((network, _)) = ctx.network {
                // infection receives the transmission directly
                if let TransmissionSource::Individual(k) = network.source(individual) {
                    source_window(events, k, &mut lo, &mut hi);
                }
            }
            if let Some(removal) = events.get(individual, Transition::Removal) {
                hi = hi.min(removal);
            }
            if let Some((_, offspring)) = ctx.network {
                // must be infectious before the earliest transmission made
                for &j in offspring.offspring(individual) {
                    if let Some(t) = events.transmission_time(j) {
                        hi = hi.min(t);
                    }
                }
            }
        }
        Transition::Removal => {
            let obs = ctx.observed_removal[individual - 1]
                .expect("removal is only augmented when observed");
            let (ext_lo, ext_hi) = ctx
                .extents
                .removal
                .expect("removal extent required for augmented removals");
            lo = lo.max(obs - ext_hi);
            hi = hi.min(obs - ext_lo);
            if let Some(infection) = events.get(individual, Transition::Infection) {
                lo = lo.max(infection);
            }
            if let Some((_, offspring)) = ctx.network {
                // must remain infectious through the latest transmission made
                for &j in offspring.offspring(individual) {
                    if let Some(t) = events.transmission_time(j) {
                        lo = lo.max(t);
                    }
                }
            }
        }
    }

    if lo >= hi {
        return Err(EmptyBounds {
            individual,
            transition,
            lo,
            hi,
        });
    }
    Ok((lo, hi))
}

/// Intersect with the infectious window of source `k`: (infection of k,
/// removal of k). A source without a recorded infection event was seeded
/// infectious and constrains nothing from below.
fn source_window(events: &Events, k: usize, lo: &mut f64, hi: &mut f64) {
    if let Some(t) = events.get(k, Transition::Infection) {
        *lo = lo.max(t);
    }
    if let Some(t) = events.get(k, Transition::Removal) {
        *hi = hi.min(t);
    }
}

/// Every augmented event time for a chain: one infection per observed
/// individual, plus exposure for classes with a latent state, plus removal
/// where a removal was observed.
pub fn augmented_targets(
    class: crate::model::ModelClass,
    observed_infection: &[Option<f64>],
    observed_removal: &[Option<f64>],
) -> Vec<(usize, Transition)> {
    let mut targets = Vec::new();
    for i in 1..=observed_infection.len() {
        if observed_infection[i - 1].is_some() {
            if class.has_exposed() {
                targets.push((i, Transition::Exposure));
            }
            targets.push((i, Transition::Infection));
            if class.has_removed() && observed_removal[i - 1].is_some() {
                targets.push((i, Transition::Removal));
            }
        }
    }
    targets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelClass;

    fn extents_sir() -> EventExtents {
        EventExtents {
            exposure: None,
            infection: (0.0, 3.0),
            removal: Some((0.0, 2.0)),
        }
    }

    #[test]
    fn infection_bounds_from_observation_window() {
        // no offspring, external source, extent (0,3), observed at 10:
        // hand intersection gives (7, 10), then own removal (at 9) caps hi
        let mut events = Events::new(ModelClass::Sir, 2);
        events.set(1, Transition::Infection, Some(8.0));
        events.set(1, Transition::Removal, Some(9.0));
        let obs_inf = vec![Some(10.0), None];
        let obs_rem = vec![Some(10.5), None];
        let net = {
            let mut n = TransmissionNetwork::new(2);
            n.set_source(1, TransmissionSource::External);
            n
        };
        let idx = OffspringIndex::build(&net);
        let extents = extents_sir();
        let ctx = BoundsContext {
            events: &events,
            network: Some((&net, &idx)),
            observed_infection: &obs_inf,
            observed_removal: &obs_rem,
            extents: &extents,
        };
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Infection).unwrap();
        assert_eq!(lo, 7.0);
        assert_eq!(hi, 9.0);

        // without the removal, hi is the observation bound
        let mut ev2 = events.clone();
        ev2.set(1, Transition::Removal, None);
        let ctx2 = BoundsContext {
            events: &ev2,
            ..ctx
        };
        let (lo, hi) = event_time_bounds(&ctx2, 1, Transition::Infection).unwrap();
        assert_eq!((lo, hi), (7.0, 10.0));
    }

    #[test]
    fn removal_bounded_below_by_latest_offspring() {
        // source 1 removed at 14, offspring 2 infected at 13: moving 1's
        // removal has lo = 13 when conditioning on the network
        let mut events = Events::new(ModelClass::Sir, 2);
        events.set(1, Transition::Infection, Some(5.0));
        events.set(1, Transition::Removal, Some(14.0));
        events.set(2, Transition::Infection, Some(13.0));
        let obs_inf = vec![Some(6.0), Some(14.0)];
        let obs_rem = vec![Some(14.5), None];
        let mut net = TransmissionNetwork::new(2);
        net.set_source(1, TransmissionSource::External);
        net.set_source(2, TransmissionSource::Individual(1));
        let idx = OffspringIndex::build(&net);
        let extents = extents_sir();
        let ctx = BoundsContext {
            events: &events,
            network: Some((&net, &idx)),
            observed_infection: &obs_inf,
            observed_removal: &obs_rem,
            extents: &extents,
        };
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Removal).unwrap();
        assert_eq!(lo, 13.0);
        assert_eq!(hi, 14.5);

        // relaxed mode drops the offspring constraint: lo from the
        // observation window only
        let relaxed = BoundsContext {
            events: &events,
            network: None,
            observed_infection: &obs_inf,
            observed_removal: &obs_rem,
            extents: &extents,
        };
        let (lo, _) = event_time_bounds(&relaxed, 1, Transition::Removal).unwrap();
        assert_eq!(lo, 12.5);
    }

    #[test]
    fn single_individual_external_source_depends_only_on_own_path() {
        let mut events = Events::new(ModelClass::Sir, 1);
        events.set(1, Transition::Infection, Some(3.0));
        events.set(1, Transition::Removal, Some(8.0));
        let obs_inf = vec![Some(4.0)];
        let obs_rem = vec![Some(9.0)];
        let mut net = TransmissionNetwork::new(1);
        net.set_source(1, TransmissionSource::External);
        let idx = OffspringIndex::build(&net);
        let extents = extents_sir();
        let ctx = BoundsContext {
            events: &events,
            network: Some((&net, &idx)),
            observed_infection: &obs_inf,
            observed_removal: &obs_rem,
            extents: &extents,
        };
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Infection).unwrap();
        assert_eq!((lo, hi), (1.0, 4.0));
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Removal).unwrap();
        assert_eq!((lo, hi), (7.0, 9.0));
    }

    #[test]
    fn exposure_window_tracks_infection_and_source() {
        let mut events = Events::new(ModelClass::Seir, 2);
        events.set(1, Transition::Exposure, Some(-4.0));
        events.set(1, Transition::Infection, Some(4.0));
        events.set(1, Transition::Removal, Some(20.0));
        events.set(2, Transition::Exposure, Some(10.0));
        events.set(2, Transition::Infection, Some(18.0));
        let obs_inf = vec![Some(5.0), Some(19.0)];
        let obs_rem = vec![Some(21.0), None];
        let mut net = TransmissionNetwork::new(2);
        net.set_source(1, TransmissionSource::External);
        net.set_source(2, TransmissionSource::Individual(1));
        let idx = OffspringIndex::build(&net);
        let extents = EventExtents {
            exposure: Some((5.0, 14.0)),
            infection: (0.0, 3.0),
            removal: Some((0.0, 2.0)),
        };
        let ctx = BoundsContext {
            events: &events,
            network: Some((&net, &idx)),
            observed_infection: &obs_inf,
            observed_removal: &obs_rem,
            extents: &extents,
        };
        // exposure of 2: [18-14, 18-5] = [4, 13] intersect source window (4, 20)
        let (lo, hi) = event_time_bounds(&ctx, 2, Transition::Exposure).unwrap();
        assert_eq!((lo, hi), (4.0, 13.0));
        // infection of 2: obs window [16,19] intersect latent [15, 24]
        let (lo, hi) = event_time_bounds(&ctx, 2, Transition::Infection).unwrap();
        assert_eq!((lo, hi), (16.0, 19.0));
        // infection of 1: obs window [2,5], capped by offspring exposure 10 (no-op)
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Infection).unwrap();
        assert_eq!((lo, hi), (2.0, 5.0));
        // removal of 1: obs window [19,21], floored by offspring exposure 10 (no-op);
        // own infection 4 -> lo stays 19
        let (lo, hi) = event_time_bounds(&ctx, 1, Transition::Removal).unwrap();
        assert_eq!((lo, hi), (19.0, 21.0));
    }

    #[test]
    fn augmented_target_listing() {
        let obs_inf = vec![Some(1.0), None, Some(2.0)];
        let obs_rem = vec![Some(2.0), None, None];
        let targets = augmented_targets(ModelClass::Seir, &obs_inf, &obs_rem);
        assert_eq!(
            targets,
            vec![
                (1, Transition::Exposure),
                (1, Transition::Infection),
                (1, Transition::Removal),
                (3, Transition::Exposure),
                (3, Transition::Infection),
            ]
        );
        let targets = augmented_targets(ModelClass::Si, &obs_inf, &obs_rem);
        assert_eq!(
            targets,
            vec![(1, Transition::Infection), (3, Transition::Infection)]
        );
    }
}
