//! `ilm fit`: fit the configured model to observed data by MCMC and write
//! per-chain sample files plus a run manifest.

use std::path::Path;
use std::time::Instant;

use anyhow::anyhow;

use ilm_core::mcmc::{AdaptSettings, McmcRun, McmcSettings};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Manifest;

use super::{read_observations_csv, starting_states, write_chain_samples};

pub fn run(
    config: &RunConfig,
    observations_path: &Path,
    out_dir: &Path,
    iterations_override: Option<usize>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let fit_cfg = config
        .fit
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("[fit] section missing from config")))?;
    let class = config.model_class().map_err(CliError::config)?;
    let population = config.load_population().map_err(CliError::config)?;
    let functions = config.risk_functions().map_err(CliError::config)?;
    let priors = config.risk_priors().map_err(CliError::config)?;
    let extents = config.event_extents().map_err(CliError::config)?;
    let observations =
        read_observations_csv(observations_path, population.len()).map_err(CliError::config)?;
    let states = starting_states(fit_cfg.initial.as_ref(), &population, class)
        .map_err(CliError::config)?;

    let iterations = iterations_override.unwrap_or(fit_cfg.iterations);
    let adapt = match &fit_cfg.adapt {
        Some(a) => AdaptSettings {
            enabled: a.enabled,
            beta_mix: a.beta_mix,
            jitter: a.jitter,
        },
        None => AdaptSettings::default(),
    };
    let settings = McmcSettings {
        init_attempts: fit_cfg.init_attempts,
        event_sigma: fit_cfg.event_sigma,
        event_batches: fit_cfg.event_batches,
        per_event_acceptance: fit_cfg.per_event_acceptance,
        condition_on_network: fit_cfg.condition_on_network,
        adapt,
        chains: fit_cfg.chains,
        seed: config.seed,
    };

    let mut run = McmcRun::new(
        &population,
        &functions,
        &priors,
        &observations,
        extents,
        Some(states),
        settings,
    )
    .map_err(CliError::config)?;

    log::info!(
        "initializing {} chain(s) with {} attempts each",
        settings.chains,
        settings.init_attempts
    );
    run.start().map_err(CliError::runtime)?;
    log::info!("iterating {iterations} iterations");
    run.iterate(iterations).map_err(CliError::runtime)?;

    std::fs::create_dir_all(out_dir).map_err(CliError::runtime)?;
    let names = run.parameter_names();
    for (c, chain) in run.chains.iter().enumerate() {
        let dir = out_dir.join(format!("chain_{c}"));
        write_chain_samples(
            &dir,
            &names,
            &chain.param_samples,
            &chain.log_posterior_samples,
            &chain.event_samples,
            &chain.network_samples,
            population.len(),
        )
        .map_err(CliError::runtime)?;
        log::info!(
            "chain {c}: final log-posterior {:.4}, param acceptance {:.3}, \
             event-batch acceptance {:.3}",
            chain.log_posterior,
            chain.parameter_acceptance_rate(),
            chain.event_batch_acceptance_rate()
        );
    }

    Manifest {
        command: "fit".into(),
        seed: config.seed,
        class: class.to_string(),
        individuals: population.len(),
        replicates: 0,
        chains: settings.chains,
        iterations,
        parameter_names: names,
        outputs: (0..settings.chains)
            .map(|c| format!("chain_{c}"))
            .collect(),
        duration_ms: started.elapsed().as_millis(),
    }
    .write(out_dir)
    .map_err(CliError::runtime)?;
    Ok(())
}
