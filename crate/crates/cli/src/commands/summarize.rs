//! `ilm summarize`: parameter summary table and network posterior from a
//! completed fit run directory.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use ilm_core::posterior::{network_posterior_samples, summarize_samples, ParameterSummary};

use crate::error::CliError;
use crate::manifest::Manifest;

use super::{read_network_samples, read_parameters_csv};

pub fn run(run_dir: &Path, burnin: usize, thin: usize) -> Result<(), CliError> {
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
    if thin == 0 {
        return Err(CliError::config(anyhow!("thin must be >= 1")));
    }

    let p = manifest.parameter_names.len();
    let mut param_chains: Vec<Vec<Vec<f64>>> = Vec::with_capacity(manifest.chains);
    let mut network_chains: Vec<Vec<Box<[i32]>>> = Vec::with_capacity(manifest.chains);
    for c in 0..manifest.chains {
        let dir = run_dir.join(format!("chain_{c}"));
        let (params, _) =
            read_parameters_csv(&dir.join("parameters.csv"), p).map_err(CliError::runtime)?;
        param_chains.push(params);
        let nets = read_network_samples(
            &dir.join("network.csv"),
            manifest.individuals,
            manifest.iterations,
        )
        .map_err(CliError::runtime)?;
        network_chains.push(nets);
    }

    let param_views: Vec<&[Vec<f64>]> = param_chains.iter().map(|c| c.as_slice()).collect();
    let rows = summarize_samples(&param_views, &manifest.parameter_names, burnin, thin)
        .map_err(CliError::runtime)?;
    write_summary(run_dir, &rows).map_err(CliError::runtime)?;

    let net_views: Vec<&[Box<[i32]>]> = network_chains.iter().map(|c| c.as_slice()).collect();
    let dist = network_posterior_samples(&net_views, burnin, thin)
        .map_err(CliError::runtime)?;
    write_network_posterior(run_dir, &dist).map_err(CliError::runtime)?;

    for row in &rows {
        println!(
            "{}: mean {:.6e}, variance {:.6e}, 95% CI ({:.6e}, {:.6e})",
            row.parameter, row.mean, row.variance, row.q025, row.q975
        );
    }
    Ok(())
}

fn write_summary(run_dir: &Path, rows: &[ParameterSummary]) -> Result<()> {
    let path = run_dir.join("summary.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "parameter,mean,variance,q2.5,q97.5")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.parameter, r.mean, r.variance, r.q025, r.q975)?;
    }
    w.flush()?;

    let json: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "parameter": r.parameter,
                "mean": r.mean,
                "variance": r.variance,
                "q2.5": r.q025,
                "q97.5": r.q975,
            })
        })
        .collect();
    let path = run_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_network_posterior(
    run_dir: &Path,
    dist: &ilm_core::posterior::TnDistribution,
) -> Result<()> {
    let path = run_dir.join("network_posterior.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "source,target,probability")?;
    for i in 1..=dist.n {
        let p = dist.external_prob[i - 1];
        if p > 0.0 {
            writeln!(w, "external,{i},{p}")?;
        }
    }
    for (source, target, p) in dist.edges() {
        writeln!(w, "{source},{target},{p}")?;
    }
    Ok(w.flush()?)
}
