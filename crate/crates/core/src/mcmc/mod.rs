//! Bayesian inference for transmission-network ILMs.
//!
//! Each chain iteration runs three sub-steps:
//!
//! 1. event-time augmentation: shuffled, batched truncated-normal
//!    random-walk proposals with a joint accept/reject per batch,
//! 2. an adaptive random-walk Metropolis update of the risk parameters,
//! 3. a Gibbs draw of the transmission network from its exact conditional
//!    (each source is multinomial over the competing rates at that
//!    individual's transmission time).
//!
//! With `condition_on_network` the event and parameter targets are the
//! network-explicit posterior; otherwise both use the marginal
//! (network-summed) likelihood and the Gibbs draw re-anchors the network
//! afterwards.
//!
//! Chains are independent: each owns its rng stream (`seed + chain
//! index`), and `iterate` advances them in parallel.

pub mod bounds;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::events::{EventObservations, Events, Transition, TransmissionNetwork};
use crate::likelihood::{
    log_likelihood_ilm, log_likelihood_tnilm, LikelihoodConfig, LikelihoodError,
};
use crate::model::{
    log_prior, validate_model, EventExtents, ModelError, RiskFunctions, RiskParameters,
    RiskPriors,
};
use crate::population::Population;
use crate::rates::DiseaseState;
use crate::simulate::{sample_source_from_row, SimulationError};
use crate::stats::{sample_truncated_normal, truncated_normal_ln_pdf, OnlineCovariance};

use bounds::{augmented_targets, event_time_bounds, BoundsContext, EmptyBounds, OffspringIndex};

#[derive(Debug, Error)]
pub enum McmcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Bounds(#[from] EmptyBounds),
    #[error(transparent)]
    Source(#[from] SimulationError),
    #[error(
        "no finite-posterior initialization found in {attempts} attempts; widen the event \
         extents or priors, or raise the attempt count"
    )]
    InitializationFailed { attempts: usize },
    #[error("chains are not initialized; call start() first")]
    NotInitialized,
    #[error("invalid MCMC settings: {0}")]
    Settings(String),
    #[error("model validation failed:\n{0}")]
    Validation(crate::model::ValidationReport),
}

/// Adaptive random-walk kernel settings. After enough samples the proposal
/// mixes the scaled empirical covariance with a fixed fallback kernel.
#[derive(Debug, Clone, Copy)]
pub struct AdaptSettings {
    pub enabled: bool,
    /// Probability of using the fixed kernel once adaptation is active.
    pub beta_mix: f64,
    /// Ridge added to the scaled empirical covariance.
    pub jitter: f64,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            beta_mix: 0.05,
            jitter: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McmcSettings {
    /// Initialization draws per chain; the best finite posterior wins.
    pub init_attempts: usize,
    /// Standard deviation of the truncated-normal event-time kernel.
    pub event_sigma: f64,
    /// Number of joint accept/reject groups per event sweep.
    pub event_batches: usize,
    /// Accept/reject each event time individually instead of in batches.
    pub per_event_acceptance: bool,
    /// Condition event-time moves (and the parameter target) on the
    /// current network instead of the marginal likelihood.
    pub condition_on_network: bool,
    pub adapt: AdaptSettings,
    pub chains: usize,
    pub seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            init_attempts: 1000,
            event_sigma: 1.0,
            event_batches: 10,
            per_event_acceptance: false,
            condition_on_network: true,
            adapt: AdaptSettings::default(),
            chains: 1,
            seed: 0,
        }
    }
}

impl McmcSettings {
    fn validate(&self) -> Result<(), McmcError> {
        if self.init_attempts == 0 {
            return Err(McmcError::Settings("init_attempts must be >= 1".into()));
        }
        if self.event_sigma <= 0.0 || self.event_sigma.is_nan() {
            return Err(McmcError::Settings("event_sigma must be positive".into()));
        }
        if self.event_batches == 0 {
            return Err(McmcError::Settings("event_batches must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(McmcError::Settings("chains must be >= 1".into()));
        }
        if !(self.adapt.beta_mix > 0.0 && self.adapt.beta_mix < 1.0) {
            return Err(McmcError::Settings(
                "adapt.beta_mix must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// One Markov chain: current state, per-iteration samples (index 0 is the
/// initial state), and the streaming covariance driving adaptation.
#[derive(Debug)]
pub struct MarkovChain {
    pub parameters: RiskParameters,
    pub events: Events,
    pub network: TransmissionNetwork,
    pub log_posterior: f64,
    log_prior: f64,
    /// Marginal (network-summed) likelihood of the current events, kept
    /// fresh by the Gibbs pass.
    marginal_ll: f64,
    pub cov: OnlineCovariance,
    rng: ChaCha8Rng,

    pub param_samples: Vec<Vec<f64>>,
    pub event_samples: Vec<Box<[f64]>>,
    pub network_samples: Vec<Box<[i32]>>,
    pub log_posterior_samples: Vec<f64>,

    pub accepted_parameters: u64,
    pub proposed_parameters: u64,
    pub accepted_event_batches: u64,
    pub proposed_event_batches: u64,
}

impl MarkovChain {
    /// Completed iterations (samples beyond the initial state).
    pub fn iterations(&self) -> usize {
        self.log_posterior_samples.len() - 1
    }

    pub fn parameter_acceptance_rate(&self) -> f64 {
        if self.proposed_parameters == 0 {
            return 0.0;
        }
        self.accepted_parameters as f64 / self.proposed_parameters as f64
    }

    pub fn event_batch_acceptance_rate(&self) -> f64 {
        if self.proposed_event_batches == 0 {
            return 0.0;
        }
        self.accepted_event_batches as f64 / self.proposed_event_batches as f64
    }
}

/// Shared, read-only inputs of one inference run plus its chains.
#[derive(Debug)]
pub struct McmcRun<'a> {
    pub population: &'a Population,
    pub functions: &'a RiskFunctions,
    pub priors: &'a RiskPriors,
    pub observations: &'a EventObservations,
    pub extents: EventExtents,
    pub starting_states: Vec<DiseaseState>,
    pub settings: McmcSettings,
    template: RiskParameters,
    pub chains: Vec<MarkovChain>,
}

/// Borrowed view of run inputs threaded through the per-chain steps.
struct RunContext<'a> {
    population: &'a Population,
    functions: &'a RiskFunctions,
    priors: &'a RiskPriors,
    observations: &'a EventObservations,
    extents: &'a EventExtents,
    starting_states: &'a [DiseaseState],
    settings: &'a McmcSettings,
    template: &'a RiskParameters,
}

impl<'a> McmcRun<'a> {
    /// Validate the model pieces and assemble a run. Starting states
    /// default to everyone susceptible when `starting_states` is `None`.
    pub fn new(
        population: &'a Population,
        functions: &'a RiskFunctions,
        priors: &'a RiskPriors,
        observations: &'a EventObservations,
        extents: EventExtents,
        starting_states: Option<Vec<DiseaseState>>,
        settings: McmcSettings,
    ) -> Result<Self, McmcError> {
        settings.validate()?;
        priors.validate()?;
        extents.validate(functions.class)?;
        let template = template_from_priors(priors);
        // probe with a prior draw rather than zeros so expressions with
        // log/ratio forms validate on representative values
        let mut probe_rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x9e37_79b9_7f4a_7c15);
        let probe = priors.sample(&template, &mut probe_rng);
        let report = validate_model(functions.class, functions, &probe, population);
        if !report.passed() {
            return Err(McmcError::Validation(report));
        }
        let starting_states = starting_states
            .unwrap_or_else(|| vec![DiseaseState::Susceptible; population.len()]);
        if starting_states.len() != population.len() {
            return Err(McmcError::Settings(format!(
                "starting states must have {} entries, got {}",
                population.len(),
                starting_states.len()
            )));
        }
        if observations.len() != population.len() {
            return Err(McmcError::Settings(format!(
                "observations must have {} entries, got {}",
                population.len(),
                observations.len()
            )));
        }
        let n_targets = augmented_targets(
            functions.class,
            &observations.infection,
            &observations.removal,
        )
        .len();
        if n_targets > 0 && settings.event_batches > n_targets {
            return Err(McmcError::Settings(format!(
                "event_batches ({}) exceeds the number of augmented event times ({n_targets})",
                settings.event_batches
            )));
        }
        Ok(Self {
            population,
            functions,
            priors,
            observations,
            extents,
            starting_states,
            settings,
            template,
            chains: Vec::new(),
        })
    }

    fn context(&self) -> RunContext<'_> {
        RunContext {
            population: self.population,
            functions: self.functions,
            priors: self.priors,
            observations: self.observations,
            extents: &self.extents,
            starting_states: &self.starting_states,
            settings: &self.settings,
            template: &self.template,
        }
    }

    /// Initialize every chain: repeated prior/extent draws scored by the
    /// marginal likelihood with early stopping against the best score so
    /// far, then a Gibbs draw for the starting network.
    pub fn start(&mut self) -> Result<(), McmcError> {
        let settings = self.settings;
        let mut chains = Vec::with_capacity(settings.chains);
        if settings.chains == 1 {
            let rng = ChaCha8Rng::seed_from_u64(settings.seed);
            chains.push(initialize_chain(&self.context(), settings.init_attempts, rng)?);
        } else {
            let results: Vec<Result<MarkovChain, McmcError>> = std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for c in 0..settings.chains {
                    let ctx = self.context();
                    handles.push(scope.spawn(move || {
                        let rng = ChaCha8Rng::seed_from_u64(settings.seed + c as u64);
                        initialize_chain(&ctx, settings.init_attempts, rng)
                    }));
                }
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for r in results {
                chains.push(r?);
            }
        }
        self.chains = chains;
        Ok(())
    }

    /// Advance every chain `n` iterations (in parallel when multi-chain).
    pub fn iterate(&mut self, n: usize) -> Result<(), McmcError> {
        if self.chains.is_empty() {
            return Err(McmcError::NotInitialized);
        }
        if n == 0 {
            return Ok(());
        }
        let population = self.population;
        let functions = self.functions;
        let priors = self.priors;
        let observations = self.observations;
        let extents = &self.extents;
        let starting_states = &self.starting_states;
        let settings = &self.settings;
        let template = &self.template;
        if self.chains.len() == 1 {
            let ctx = RunContext {
                population,
                functions,
                priors,
                observations,
                extents,
                starting_states,
                settings,
                template,
            };
            advance_chain(&mut self.chains[0], &ctx, n, 0)
        } else {
            let results: Vec<Result<(), McmcError>> = std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for (idx, chain) in self.chains.iter_mut().enumerate() {
                    let ctx = RunContext {
                        population,
                        functions,
                        priors,
                        observations,
                        extents,
                        starting_states,
                        settings,
                        template,
                    };
                    handles.push(scope.spawn(move || advance_chain(chain, &ctx, n, idx)));
                }
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            results.into_iter().collect()
        }
    }

    /// Recompute the log-posterior of an arbitrary state from scratch
    /// (spot-check / diagnostics path).
    pub fn log_posterior_of(
        &self,
        parameters: &RiskParameters,
        events: &Events,
        network: &TransmissionNetwork,
    ) -> Result<f64, McmcError> {
        let lp = log_prior(parameters, self.priors)?;
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let ll = log_likelihood_tnilm(
            self.functions,
            parameters,
            self.population,
            &self.starting_states,
            events,
            network,
            &LikelihoodConfig::default(),
        )?
        .log_likelihood;
        Ok(lp + ll)
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.template.names()
    }

    pub fn parameter_template(&self) -> &RiskParameters {
        &self.template
    }
}

fn template_from_priors(priors: &RiskPriors) -> RiskParameters {
    RiskParameters {
        sparks: vec![0.0; priors.sparks.len()],
        susceptibility: vec![0.0; priors.susceptibility.len()],
        infectivity_kernel: vec![0.0; priors.infectivity_kernel.len()],
        transmissibility: vec![0.0; priors.transmissibility.len()],
        latency: priors.latency.as_ref().map(|v| vec![0.0; v.len()]),
        removal: priors.removal.as_ref().map(|v| vec![0.0; v.len()]),
    }
}

/// Draw augmented event times from the extent-uniform construction around
/// the observations: infection = observed - U(infection extent), removal
/// likewise, exposure = infection - U(exposure extent).
fn draw_event_times(ctx: &RunContext<'_>, rng: &mut ChaCha8Rng) -> Events {
    let class = ctx.functions.class;
    let n = ctx.population.len();
    let mut events = Events::new(class, n);
    let (inf_lo, inf_hi) = ctx.extents.infection;
    for i in 1..=n {
        if let Some(obs) = ctx.observations.infection[i - 1] {
            let infection = obs - rng.gen_range(inf_lo..inf_hi);
            events.set(i, Transition::Infection, Some(infection));
            if class.has_exposed() {
                let (e_lo, e_hi) = ctx.extents.exposure.expect("validated");
                events.set(
                    i,
                    Transition::Exposure,
                    Some(infection - rng.gen_range(e_lo..e_hi)),
                );
            }
            if class.has_removed() {
                if let Some(obs_rem) = ctx.observations.removal[i - 1] {
                    let (r_lo, r_hi) = ctx.extents.removal.expect("validated");
                    events.set(
                        i,
                        Transition::Removal,
                        Some(obs_rem - rng.gen_range(r_lo..r_hi)),
                    );
                }
            }
        }
    }
    events
}

fn initialize_chain(
    ctx: &RunContext<'_>,
    attempts: usize,
    mut rng: ChaCha8Rng,
) -> Result<MarkovChain, McmcError> {
    let mut best: Option<(RiskParameters, f64, Events)> = None;
    let mut best_score = f64::NEG_INFINITY;
    for _ in 0..attempts {
        let params = ctx.priors.sample(ctx.template, &mut rng);
        let lp = log_prior(&params, ctx.priors)?;
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let events = draw_event_times(ctx, &mut rng);
        // competitive only if lp + ll beats the best score; stop the pass
        // early as soon as that is impossible
        let cfg = LikelihoodConfig {
            early_stop_threshold: best_score - lp,
            collect_transmission_rates: false,
        };
        let ll = log_likelihood_ilm(
            ctx.functions,
            &params,
            ctx.population,
            ctx.starting_states,
            &events,
            &cfg,
        )?
        .log_likelihood;
        let score = lp + ll;
        if score.is_finite() && score > best_score {
            best_score = score;
            best = Some((params, lp, events));
        }
    }
    let Some((parameters, lp, events)) = best else {
        return Err(McmcError::InitializationFailed { attempts });
    };
    log::info!("chain initialized with marginal log-posterior {best_score:.4}");

    let (network, marginal_ll, network_ll) = gibbs_network_update(
        ctx.functions,
        &parameters,
        ctx.population,
        ctx.starting_states,
        &events,
        &mut rng,
    )?;

    let p = parameters.total();
    let mut cov = OnlineCovariance::new(p);
    let flat = parameters.flatten();
    cov.update(&flat);
    let log_posterior = lp + network_ll;
    Ok(MarkovChain {
        param_samples: vec![flat],
        event_samples: vec![events.to_compact()],
        network_samples: vec![network.to_compact()],
        log_posterior_samples: vec![log_posterior],
        parameters,
        events,
        network,
        log_posterior,
        log_prior: lp,
        marginal_ll,
        cov,
        rng,
        accepted_parameters: 0,
        proposed_parameters: 0,
        accepted_event_batches: 0,
        proposed_event_batches: 0,
    })
}

/// Gibbs draw of the transmission network from its exact conditional given
/// parameters and event times. Returns the network, the marginal (ILM)
/// log-likelihood of the events, and the network-explicit (TN-ILM)
/// log-likelihood of the drawn network.
pub fn gibbs_network_update(
    functions: &RiskFunctions,
    parameters: &RiskParameters,
    population: &Population,
    starting_states: &[DiseaseState],
    events: &Events,
    rng: &mut ChaCha8Rng,
) -> Result<(TransmissionNetwork, f64, f64), McmcError> {
    let cfg = LikelihoodConfig {
        early_stop_threshold: f64::NEG_INFINITY,
        collect_transmission_rates: true,
    };
    let eval = log_likelihood_ilm(
        functions,
        parameters,
        population,
        starting_states,
        events,
        &cfg,
    )?;
    let marginal = eval.log_likelihood;
    let mut network = TransmissionNetwork::new(population.len());
    let mut network_ll = marginal;
    if marginal == f64::NEG_INFINITY {
        // zero-posterior state carries no snapshots worth sampling
        return Ok((network, marginal, network_ll));
    }
    for snap in eval.snapshots.expect("requested snapshots") {
        let source =
            sample_source_from_row(&snap.endogenous, snap.exogenous, snap.individual, rng)?;
        network.set_source(snap.individual, source);
        // swap the marginal transmission term for the realized source term
        network_ll += snap.rate_of(source).ln() - snap.total().ln();
    }
    Ok((network, marginal, network_ll))
}

/// Metropolis-Hastings acceptance: accept iff
/// `ln U < log_post_new - log_post_old + log_proposal_correction`.
pub fn mh_accept<R: Rng + ?Sized>(
    log_post_new: f64,
    log_post_old: f64,
    log_proposal_correction: f64,
    rng: &mut R,
) -> bool {
    debug_assert!(
        log_post_old.is_finite(),
        "old state must have finite posterior"
    );
    accept_delta(log_post_new - log_post_old + log_proposal_correction, rng)
}

fn accept_delta<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
    if delta == f64::NEG_INFINITY || delta.is_nan() {
        return false;
    }
    if delta >= 0.0 {
        return true;
    }
    rng.gen::<f64>().ln() < delta
}

/// Random-walk proposal for the flattened parameter vector. Early
/// iterations (and a `beta_mix` share thereafter) use the fixed kernel
/// `N(x, (0.1^2/p) I)`; once more than `2p` samples have accumulated the
/// main component is `N(x, (2.38^2/p) cov + jitter I)`.
pub fn propose_parameters<R: Rng + ?Sized>(
    cov: &OnlineCovariance,
    current: &[f64],
    adapt: &AdaptSettings,
    rng: &mut R,
) -> Vec<f64> {
    let p = current.len();
    assert!(p > 0);
    let adapted_ready = adapt.enabled && cov.count() > (2 * p) as u64;
    let use_adapted = adapted_ready && rng.gen::<f64>() >= adapt.beta_mix;
    if use_adapted {
        let s_d = 2.38 * 2.38 / p as f64;
        let sigma = cov.covariance() * s_d;
        let mut jitter = adapt.jitter.max(f64::MIN_POSITIVE);
        for _ in 0..8 {
            let mut ridged = sigma.clone();
            for d in 0..p {
                ridged[(d, d)] += jitter;
            }
            if let Some(chol) = nalgebra::Cholesky::new(ridged) {
                let z = nalgebra::DVector::from_fn(p, |_, _| standard_normal(rng));
                let step = chol.l() * z;
                return current
                    .iter()
                    .zip(step.iter())
                    .map(|(x, s)| x + s)
                    .collect();
            }
            jitter *= 10.0;
        }
        // covariance irreparably ill-conditioned; fall through to the
        // fixed kernel
    }
    let sd = 0.1 / (p as f64).sqrt();
    current
        .iter()
        .map(|x| x + sd * standard_normal(rng))
        .collect()
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand_distr::Distribution as _;
    rand_distr::StandardNormal.sample(rng)
}

/// One shuffled, batched sweep over every augmented event time.
fn update_event_times(
    chain: &mut MarkovChain,
    ctx: &RunContext<'_>,
    sigma: f64,
    batches: usize,
) -> Result<(), McmcError> {
    let class = ctx.functions.class;
    let targets = augmented_targets(
        class,
        &ctx.observations.infection,
        &ctx.observations.removal,
    );
    if targets.is_empty() {
        return Ok(());
    }
    let condition = ctx.settings.condition_on_network;
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.shuffle(&mut chain.rng);
    let effective_batches = if ctx.settings.per_event_acceptance {
        targets.len()
    } else {
        batches.min(targets.len())
    };

    let offspring = OffspringIndex::build(&chain.network);
    let mut cur_ll = if condition {
        chain.log_posterior - chain.log_prior
    } else {
        chain.marginal_ll
    };

    // near-even contiguous partition of the shuffled order
    let base = order.len() / effective_batches;
    let extra = order.len() % effective_batches;
    let mut cursor = 0usize;
    for b in 0..effective_batches {
        let size = base + usize::from(b < extra);
        let group = &order[cursor..cursor + size];
        cursor += size;
        if group.is_empty() {
            continue;
        }

        let mut proposal = chain.events.clone();
        let mut log_q_fwd = 0.0;
        let mut log_q_rev = 0.0;
        for &ti in group {
            let (individual, transition) = targets[ti];
            let bctx = BoundsContext {
                events: &proposal,
                network: condition.then_some((&chain.network, &offspring)),
                observed_infection: &ctx.observations.infection,
                observed_removal: &ctx.observations.removal,
                extents: ctx.extents,
            };
            let (lo, hi) = event_time_bounds(&bctx, individual, transition)?;
            let old = proposal
                .get(individual, transition)
                .expect("augmented targets exist in the chain events");
            let new = sample_truncated_normal(&mut chain.rng, old, sigma, lo, hi);
            // the feasible interval of a time does not depend on the time
            // itself, so the same bounds price the reverse move
            log_q_fwd += truncated_normal_ln_pdf(new, old, sigma, lo, hi);
            log_q_rev += truncated_normal_ln_pdf(old, new, sigma, lo, hi);
            proposal.set(individual, transition, Some(new));
        }

        let cfg = LikelihoodConfig::default();
        let prop_ll = if condition {
            log_likelihood_tnilm(
                ctx.functions,
                &chain.parameters,
                ctx.population,
                ctx.starting_states,
                &proposal,
                &chain.network,
                &cfg,
            )?
            .log_likelihood
        } else {
            log_likelihood_ilm(
                ctx.functions,
                &chain.parameters,
                ctx.population,
                ctx.starting_states,
                &proposal,
                &cfg,
            )?
            .log_likelihood
        };

        chain.proposed_event_batches += 1;
        let delta = prop_ll - cur_ll + log_q_rev - log_q_fwd;
        if accept_delta(delta, &mut chain.rng) {
            chain.events = proposal;
            cur_ll = prop_ll;
            chain.accepted_event_batches += 1;
        }
    }

    if condition {
        chain.log_posterior = chain.log_prior + cur_ll;
    } else {
        chain.marginal_ll = cur_ll;
    }
    Ok(())
}

fn advance_chain(
    chain: &mut MarkovChain,
    ctx: &RunContext<'_>,
    n: usize,
    chain_idx: usize,
) -> Result<(), McmcError> {
    let p = chain.parameters.total();
    let condition = ctx.settings.condition_on_network;
    let progress_every = (n / 10).max(1);
    chain.param_samples.reserve(n);
    chain.event_samples.reserve(n);
    chain.network_samples.reserve(n);
    chain.log_posterior_samples.reserve(n);

    for iter in 1..=n {
        // 1. event-time augmentation
        update_event_times(
            chain,
            ctx,
            ctx.settings.event_sigma,
            ctx.settings.event_batches,
        )?;

        // 2. parameter update (symmetric kernel, no correction)
        if p > 0 {
            let current_flat = chain.parameters.flatten();
            let proposal_flat = propose_parameters(
                &chain.cov,
                &current_flat,
                &ctx.settings.adapt,
                &mut chain.rng,
            );
            let proposal = ctx.template.with_flat(&proposal_flat);
            chain.proposed_parameters += 1;
            let lp_new = log_prior(&proposal, ctx.priors)?;
            if lp_new > f64::NEG_INFINITY {
                let cfg = LikelihoodConfig::default();
                let ll_new = if condition {
                    log_likelihood_tnilm(
                        ctx.functions,
                        &proposal,
                        ctx.population,
                        ctx.starting_states,
                        &chain.events,
                        &chain.network,
                        &cfg,
                    )?
                    .log_likelihood
                } else {
                    log_likelihood_ilm(
                        ctx.functions,
                        &proposal,
                        ctx.population,
                        ctx.starting_states,
                        &chain.events,
                        &cfg,
                    )?
                    .log_likelihood
                };
                let post_new = lp_new + ll_new;
                let post_old = if condition {
                    chain.log_posterior
                } else {
                    chain.log_prior + chain.marginal_ll
                };
                if mh_accept(post_new, post_old, 0.0, &mut chain.rng) {
                    chain.parameters = proposal;
                    chain.log_prior = lp_new;
                    chain.accepted_parameters += 1;
                    if condition {
                        chain.log_posterior = post_new;
                    } else {
                        chain.marginal_ll = ll_new;
                    }
                }
            }
            chain.cov.update(&chain.parameters.flatten());
        }

        // 3. Gibbs network draw from its exact conditional
        let (network, marginal_ll, network_ll) = gibbs_network_update(
            ctx.functions,
            &chain.parameters,
            ctx.population,
            ctx.starting_states,
            &chain.events,
            &mut chain.rng,
        )?;
        chain.network = network;
        chain.marginal_ll = marginal_ll;
        chain.log_posterior = chain.log_prior + network_ll;

        chain.param_samples.push(chain.parameters.flatten());
        chain.event_samples.push(chain.events.to_compact());
        chain.network_samples.push(chain.network.to_compact());
        chain.log_posterior_samples.push(chain.log_posterior);

        if iter % progress_every == 0 || iter == n {
            log::info!(
                "chain {chain_idx}: {iter}/{n} iterations, log-posterior {:.4}, \
                 param acceptance {:.3}, event-batch acceptance {:.3}",
                chain.log_posterior,
                chain.parameter_acceptance_rate(),
                chain.event_batch_acceptance_rate()
            );
        }
    }
    Ok(())
}
