//! `ilm simulate`: run one or more seeded epidemic simulations and write
//! events, network, state-count, and (optionally) observation files.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ilm_core::model::validate_model;
use ilm_core::simulate::{observe, Simulation, StopCondition};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Manifest;

use super::{
    starting_states, write_events_csv, write_network_csv, write_observations_csv,
    write_states_csv,
};

pub fn run(config: &RunConfig, out_dir: &Path, replicates_override: Option<usize>) -> Result<(), CliError> {
    let started = Instant::now();
    let sim_cfg = config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("[simulate] section missing from config")))?;
    let class = config.model_class().map_err(CliError::config)?;
    let population = config.load_population().map_err(CliError::config)?;
    let functions = config.risk_functions().map_err(CliError::config)?;
    let parameters = config.risk_parameters().map_err(CliError::config)?;
    let report = validate_model(class, &functions, &parameters, &population);
    if !report.passed() {
        return Err(CliError::config(anyhow!(
            "model validation failed:\n{report}"
        )));
    }
    let states = starting_states(sim_cfg.initial.as_ref(), &population, class)
        .map_err(CliError::config)?;
    let stop = StopCondition {
        tmax: sim_cfg.tmax,
        max_iterations: sim_cfg.max_iterations,
        max_wall_time: sim_cfg.max_wall_seconds.map(Duration::from_secs_f64),
    };
    let observe_cfg = match &sim_cfg.observe {
        Some(o) => {
            let infection_delay = o.infection_delay.to_distribution().map_err(CliError::config)?;
            let removal_delay = match &o.removal_delay {
                Some(d) => Some(d.to_distribution().map_err(CliError::config)?),
                None => None,
            };
            if class.has_removed() && removal_delay.is_none() {
                return Err(CliError::config(anyhow!(
                    "[simulate.observe] needs removal_delay for class {class}"
                )));
            }
            Some((infection_delay, removal_delay, o.force))
        }
        None => None,
    };

    let replicates = replicates_override.unwrap_or(sim_cfg.replicates).max(1);
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))
        .map_err(CliError::config)?;

    let run_one = |replicate: usize, dir: &Path| -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed + replicate as u64);
        let mut sim = Simulation::with_starting_states(
            &population,
            &functions,
            &parameters,
            states.clone(),
            0.0,
            rng,
        )?;
        sim.run(stop)?;
        log::info!(
            "replicate {replicate}: {} events, final time {:.3}",
            sim.iterations,
            sim.time
        );
        write_events_csv(&dir.join("events.csv"), &sim.events)?;
        write_network_csv(&dir.join("network.csv"), &sim.network)?;
        write_states_csv(&dir.join("states.csv"), &sim.events, &states, 0.0)?;
        if let Some((infection_delay, removal_delay, force)) = &observe_cfg {
            // classes without removal never draw a removal delay; reuse the
            // infection delay as the (unused) placeholder
            let removal = removal_delay.as_ref().unwrap_or(infection_delay);
            let obs = observe(&mut sim, infection_delay, removal, *force)?;
            write_observations_csv(&dir.join("observations.csv"), &obs)?;
        }
        Ok(())
    };

    if replicates == 1 {
        run_one(0, out_dir).map_err(CliError::runtime)?;
    } else {
        let workers: usize = std::env::var("ILM_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|p| p.get())
                    .unwrap_or(1)
            })
            .max(1);
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<Result<()>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for _ in 0..workers.min(replicates) {
                let next = &next;
                let run_one = &run_one;
                handles.push(scope.spawn(move || -> Vec<(usize, Result<()>)> {
                    let mut done = Vec::new();
                    loop {
                        let r = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                        if r >= replicates {
                            return done;
                        }
                        let dir = out_dir.join(format!("replicate_{r}"));
                        done.push((r, run_one(r, &dir)));
                    }
                }));
            }
            let mut all: Vec<(usize, Result<()>)> =
                handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
            all.sort_by_key(|(r, _)| *r);
            all.into_iter().map(|(_, res)| res).collect()
        });
        for r in results {
            r.map_err(CliError::runtime)?;
        }
    }

    let mut outputs = vec![
        "events.csv".to_string(),
        "network.csv".to_string(),
        "states.csv".to_string(),
    ];
    if observe_cfg.is_some() {
        outputs.push("observations.csv".to_string());
    }
    Manifest {
        command: "simulate".into(),
        seed: config.seed,
        class: class.to_string(),
        individuals: population.len(),
        replicates,
        chains: 0,
        iterations: 0,
        parameter_names: Vec::new(),
        outputs,
        duration_ms: started.elapsed().as_millis(),
    }
    .write(out_dir)
    .map_err(CliError::runtime)?;
    Ok(())
}
