//! `ilm curves`: epidemic-curve credible bands from a completed fit run.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use ilm_core::model::ModelClass;
use ilm_core::posterior::epidemic_curves_samples;
use ilm_core::rates::DiseaseState;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Manifest;

use super::{read_event_samples, starting_states};

pub struct GridOptions {
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub points: usize,
}

pub fn run(
    config: &RunConfig,
    run_dir: &Path,
    burnin: usize,
    thin: usize,
    grid: GridOptions,
) -> Result<(), CliError> {
    let manifest = Manifest::read(run_dir).map_err(CliError::config)?;
    if manifest.command != "fit" {
        return Err(CliError::config(anyhow!(
            "{} holds a `{}` run, expected a fit run",
            run_dir.display(),
            manifest.command
        )));
    }
    if burnin >= manifest.iterations {
        return Err(CliError::config(anyhow!(
            "burn-in {burnin} must be below the run's iteration count {}",
            manifest.iterations
        )));
    }
    let class = ModelClass::parse(&manifest.class)
        .ok_or_else(|| CliError::config(anyhow!("manifest has unknown class {}", manifest.class)))?;
    let population = config.load_population().map_err(CliError::config)?;
    let states = starting_states(
        config.fit.as_ref().and_then(|f| f.initial.as_ref()),
        &population,
        class,
    )
    .map_err(CliError::config)?;

    let mut chains: Vec<Vec<Box<[f64]>>> = Vec::with_capacity(manifest.chains);
    for c in 0..manifest.chains {
        let dir = run_dir.join(format!("chain_{c}"));
        chains.push(
            read_event_samples(&dir.join("events.csv"), manifest.individuals, manifest.iterations)
                .map_err(CliError::runtime)?,
        );
    }

    // default grid spans the sampled event times
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for chain in &chains {
        for sample in chain {
            for t in sample.iter().filter(|t| !t.is_nan()) {
                lo = lo.min(*t);
                hi = hi.max(*t);
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let tmin = grid.tmin.unwrap_or(lo);
    let tmax = grid.tmax.unwrap_or(hi);
    if tmax < tmin || grid.points < 2 {
        return Err(CliError::config(anyhow!(
            "curve grid needs tmin <= tmax and at least 2 points"
        )));
    }
    let step = (tmax - tmin) / (grid.points - 1) as f64;
    let time_grid: Vec<f64> = (0..grid.points).map(|g| tmin + g as f64 * step).collect();

    let views: Vec<&[Box<[f64]>]> = chains.iter().map(|c| c.as_slice()).collect();
    let mut state_list = vec![DiseaseState::Susceptible];
    if class.has_exposed() {
        state_list.push(DiseaseState::Exposed);
    }
    state_list.push(DiseaseState::Infectious);
    if class.has_removed() {
        state_list.push(DiseaseState::Removed);
    }

    write_curves(run_dir, &views, class, &states, &state_list, &time_grid, burnin, thin)
        .map_err(CliError::runtime)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_curves(
    run_dir: &Path,
    views: &[&[Box<[f64]>]],
    class: ModelClass,
    starting: &[DiseaseState],
    state_list: &[DiseaseState],
    time_grid: &[f64],
    burnin: usize,
    thin: usize,
) -> Result<()> {
    let path = run_dir.join("curves.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "time,state,q2.5,median,q97.5")?;
    for &state in state_list {
        let points =
            epidemic_curves_samples(views, class, starting, state, time_grid, burnin, thin)?;
        for p in points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.time,
                state.letter(),
                p.q025,
                p.median,
                p.q975
            )?;
        }
    }
    Ok(w.flush()?)
}
