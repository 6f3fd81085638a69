//! Subcommand implementations and the CSV formats they share.

pub mod curves;
pub mod fit;
pub mod simulate;
pub mod summarize;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use ilm_core::events::{EventObservations, Events, Transition, TransmissionNetwork, TransmissionSource};
use ilm_core::model::ModelClass;
use ilm_core::population::Population;
use ilm_core::posterior::state_count_at;
use ilm_core::rates::DiseaseState;

/// Non-scientific shortest-round-trip float formatting; empty for absent.
fn fmt_opt(t: Option<f64>) -> String {
    match t {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

/// `individual,exposure,infection,removal`; one row per individual with at
/// least one recorded transition.
pub fn write_events_csv(path: &Path, events: &Events) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "individual,exposure,infection,removal")?;
    for i in 1..=events.len() {
        let e = events.get(i, Transition::Exposure);
        let inf = events.get(i, Transition::Infection);
        let r = events.get(i, Transition::Removal);
        if e.is_some() || inf.is_some() || r.is_some() {
            writeln!(w, "{i},{},{},{}", fmt_opt(e), fmt_opt(inf), fmt_opt(r))?;
        }
    }
    Ok(w.flush()?)
}

/// `infectee,source` with `source` either `external` or an individual id.
pub fn write_network_csv(path: &Path, network: &TransmissionNetwork) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "infectee,source")?;
    for i in 1..=network.len() {
        match network.source(i) {
            TransmissionSource::None => {}
            TransmissionSource::External => writeln!(w, "{i},external")?,
            TransmissionSource::Individual(k) => writeln!(w, "{i},{k}")?,
        }
    }
    Ok(w.flush()?)
}

/// Step-function state counts: one row at the start time and after every
/// event, `time,S,E,I,R`.
pub fn write_states_csv(
    path: &Path,
    events: &Events,
    starting_states: &[DiseaseState],
    start_time: f64,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,S,E,I,R")?;
    let mut write_row = |t: f64| -> Result<()> {
        let counts = [
            state_count_at(events, starting_states, DiseaseState::Susceptible, t),
            state_count_at(events, starting_states, DiseaseState::Exposed, t),
            state_count_at(events, starting_states, DiseaseState::Infectious, t),
            state_count_at(events, starting_states, DiseaseState::Removed, t),
        ];
        writeln!(w, "{t},{},{},{},{}", counts[0], counts[1], counts[2], counts[3])?;
        Ok(())
    };
    write_row(start_time)?;
    for (t, _, _) in events.sorted() {
        write_row(t)?;
    }
    Ok(())
}

/// `individual,infection,removal`; one row per observed individual.
pub fn write_observations_csv(path: &Path, obs: &EventObservations) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "individual,infection,removal")?;
    for i in 1..=obs.len() {
        if obs.infection[i - 1].is_some() || obs.removal[i - 1].is_some() {
            writeln!(
                w,
                "{i},{},{}",
                fmt_opt(obs.infection[i - 1]),
                fmt_opt(obs.removal[i - 1])
            )?;
        }
    }
    Ok(w.flush()?)
}

/// Read observations back (absent individuals are unobserved).
pub fn read_observations_csv(path: &Path, n: usize) -> Result<EventObservations> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read observations file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let ind_col = col("individual")?;
    let inf_col = col("infection")?;
    let rem_col = col("removal")?;
    let mut obs = EventObservations::new(n);
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let location = || format!("{}: row {}", path.display(), row_idx + 2);
        let individual: usize = record
            .get(ind_col)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| anyhow!("{}: bad individual id", location()))?;
        if individual < 1 || individual > n {
            bail!("{}: individual {individual} out of range 1..={n}", location());
        }
        let parse_opt = |idx: usize| -> Result<Option<f64>> {
            let cell = record.get(idx).unwrap_or("");
            if cell.is_empty() {
                Ok(None)
            } else {
                cell.parse()
                    .map(Some)
                    .map_err(|_| anyhow!("{}: cannot parse `{cell}` as a time", location()))
            }
        };
        let infection = parse_opt(inf_col)?;
        let removal = parse_opt(rem_col)?;
        if removal.is_some() && infection.is_none() {
            bail!(
                "{}: individual {individual} has an observed removal but no observed infection",
                location()
            );
        }
        obs.infection[individual - 1] = infection;
        obs.removal[individual - 1] = removal;
    }
    Ok(obs)
}

/// Per-iteration chain sample files.
pub fn write_chain_samples(
    dir: &Path,
    names: &[String],
    param_samples: &[Vec<f64>],
    log_posterior: &[f64],
    event_samples: &[Box<[f64]>],
    network_samples: &[Box<[i32]>],
    n: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = create(&dir.join("parameters.csv"))?;
    let mut header = String::from("iteration");
    for name in names {
        write!(header, ",{name}").unwrap();
    }
    writeln!(w, "{header},log_posterior")?;
    for (it, (sample, lp)) in param_samples.iter().zip(log_posterior).enumerate() {
        let mut row = format!("{it}");
        for v in sample {
            write!(row, ",{v}").unwrap();
        }
        writeln!(w, "{row},{lp}")?;
    }
    w.flush()?;

    let mut w = create(&dir.join("events.csv"))?;
    writeln!(w, "iteration,individual,exposure,infection,removal")?;
    for (it, compact) in event_samples.iter().enumerate() {
        for i in 0..n {
            let e = compact[i];
            let inf = compact[n + i];
            let r = compact[2 * n + i];
            if !e.is_nan() || !inf.is_nan() || !r.is_nan() {
                let cell = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
                writeln!(w, "{it},{},{},{},{}", i + 1, cell(e), cell(inf), cell(r))?;
            }
        }
    }
    w.flush()?;

    let mut w = create(&dir.join("network.csv"))?;
    writeln!(w, "iteration,infectee,source")?;
    for (it, compact) in network_samples.iter().enumerate() {
        for i in 0..n {
            match compact[i] {
                -1 => {}
                0 => writeln!(w, "{it},{},external", i + 1)?,
                k => writeln!(w, "{it},{},{k}", i + 1)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Load one chain's parameter samples (and log-posteriors) back.
pub fn read_parameters_csv(path: &Path, p: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut params = Vec::new();
    let mut log_post = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != p + 2 {
            bail!(
                "{}: expected {} fields per row, got {}",
                path.display(),
                p + 2,
                record.len()
            );
        }
        let mut row = Vec::with_capacity(p);
        for cell in record.iter().skip(1).take(p) {
            row.push(cell.parse::<f64>()?);
        }
        params.push(row);
        log_post.push(record.get(p + 1).unwrap().parse::<f64>()?);
    }
    Ok((params, log_post))
}

/// Load one chain's per-iteration network samples back into compact form.
pub fn read_network_samples(path: &Path, n: usize, iterations: usize) -> Result<Vec<Box<[i32]>>> {
    let mut samples: Vec<Box<[i32]>> = (0..=iterations)
        .map(|_| vec![-1i32; n].into_boxed_slice())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    for record in reader.records() {
        let record = record?;
        let it: usize = record.get(0).unwrap().parse()?;
        let infectee: usize = record.get(1).unwrap().parse()?;
        let source = record.get(2).unwrap();
        let code = if source == "external" {
            0
        } else {
            source.parse::<i32>()?
        };
        samples
            .get_mut(it)
            .ok_or_else(|| anyhow!("{}: iteration {it} out of range", path.display()))?
            [infectee - 1] = code;
    }
    Ok(samples)
}

/// Load one chain's per-iteration event samples back into compact form.
pub fn read_event_samples(path: &Path, n: usize, iterations: usize) -> Result<Vec<Box<[f64]>>> {
    let mut samples: Vec<Box<[f64]>> = (0..=iterations)
        .map(|_| vec![f64::NAN; 3 * n].into_boxed_slice())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    for record in reader.records() {
        let record = record?;
        let it: usize = record.get(0).unwrap().parse()?;
        let individual: usize = record.get(1).unwrap().parse()?;
        let sample = samples
            .get_mut(it)
            .ok_or_else(|| anyhow!("{}: iteration {it} out of range", path.display()))?;
        for (block, idx) in [(0usize, 2usize), (1, 3), (2, 4)] {
            let cell = record.get(idx).unwrap_or("");
            if !cell.is_empty() {
                sample[block * n + individual - 1] = cell.parse()?;
            }
        }
    }
    Ok(samples)
}

/// Simulation starting states from the optional `[**.initial]` section.
pub fn starting_states(
    initial: Option<&crate::config::InitialStates>,
    pop: &Population,
    class: ModelClass,
) -> Result<Vec<DiseaseState>> {
    match initial {
        Some(init) => init.expand(pop.len(), class),
        None => Ok(vec![DiseaseState::Susceptible; pop.len()]),
    }
}
