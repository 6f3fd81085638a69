//! Regenerates the bundled example datasets under `data/`. Everything is
//! seeded, so the committed files are reproducible byte for byte:
//!
//! * `sir_demo_risks.csv` — 100 individuals on a 15 x 30 area with one
//!   gamma-distributed risk factor, for the SIR walkthrough config.
//! * `village_measles_*` — a synthetic 188-child village measles outbreak
//!   with household and classroom structure: risk factors, three pairwise
//!   distance components (Euclidean with same-household entries set to
//!   `inf`, same-class indicator, same-household indicator), and observed
//!   infection/removal times from a seeded SEIR simulation. One child is
//!   an isolated case weeks after the main outbreak, so its transmission
//!   source can only be external.
//!
//! Run with: `cargo run -p ilm-cli --example make_datasets`

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ilm_core::model::{ModelClass, RiskFunctions, RiskParameters};
use ilm_core::population::Population;
use ilm_core::rates::DiseaseState;
use ilm_core::riskdsl::{parse_risk_expr, ExprContext};
use ilm_core::simulate::{observe, Simulation, StopCondition};
use ilm_core::stats::Distribution;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn main() {
    let dir = data_dir();
    std::fs::create_dir_all(&dir).unwrap();
    write_sir_demo(&dir);
    write_village_measles(&dir);
    println!("datasets written to {}", dir.display());
}

fn write_sir_demo(dir: &Path) {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(11235);
    let gamma = Distribution::Gamma {
        shape: 1.0,
        scale: 1.0,
    };
    let mut csv = String::from("x,y,riskfactor1\n");
    for _ in 0..n {
        let x: f64 = rng.gen_range(0.0..15.0);
        let y: f64 = rng.gen_range(0.0..30.0);
        let r = gamma.sample(&mut rng);
        writeln!(csv, "{x},{y},{r}").unwrap();
    }
    std::fs::write(dir.join("sir_demo_risks.csv"), csv).unwrap();
    println!("sir_demo_risks.csv: {n} individuals");
}

struct Village {
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    household: Vec<usize>,
    class: Vec<usize>,
}

fn build_village(rng: &mut ChaCha8Rng) -> Village {
    let n = 188;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut household = Vec::with_capacity(n);
    let mut class = Vec::with_capacity(n);
    let mut hid = 0usize;
    while x.len() < n {
        hid += 1;
        let hx: f64 = rng.gen_range(0.0..300.0);
        let hy: f64 = rng.gen_range(0.0..250.0);
        let children = rng.gen_range(1..=5).min(n - x.len());
        for _ in 0..children {
            x.push(hx);
            y.push(hy);
            household.push(hid);
            // class 0: preschool; classes 1 and 2: classrooms
            let c = match rng.gen_range(0..10) {
                0..=2 => 0,
                3..=6 => 1,
                _ => 2,
            };
            class.push(c);
        }
    }
    Village {
        n,
        x,
        y,
        household,
        class,
    }
}

fn village_distances(v: &Village) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = v.n;
    let mut euclid = vec![0.0; n * n];
    let mut same_class = vec![0.0; n * n];
    let mut same_house = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            if v.household[i] == v.household[k] {
                // household transmission is carried by the indicator term,
                // not the spatial kernel
                euclid[i * n + k] = f64::INFINITY;
                same_house[i * n + k] = 1.0;
            } else {
                let dx = v.x[i] - v.x[k];
                let dy = v.y[i] - v.y[k];
                euclid[i * n + k] = (dx * dx + dy * dy).sqrt();
            }
            if v.class[i] != 0 && v.class[i] == v.class[k] {
                same_class[i * n + k] = 1.0;
            }
        }
    }
    (euclid, same_class, same_house)
}

fn write_matrix(path: &Path, m: &[f64], n: usize) {
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|k| {
                let v = m[i * n + k];
                if v.is_infinite() {
                    "inf".to_string()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out).unwrap();
}

fn write_village_measles(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(4321);
    let village = build_village(&mut rng);
    let n = village.n;
    let (euclid, same_class, same_house) = village_distances(&village);

    let mut risks = String::from("x,y,household,class\n");
    for i in 0..n {
        writeln!(
            risks,
            "{},{},{},{}",
            village.x[i], village.y[i], village.household[i], village.class[i]
        )
        .unwrap();
    }
    std::fs::write(dir.join("village_measles_risks.csv"), risks).unwrap();
    write_matrix(&dir.join("village_measles_dist_euclid.csv"), &euclid, n);
    write_matrix(&dir.join("village_measles_dist_class.csv"), &same_class, n);
    write_matrix(&dir.join("village_measles_dist_household.csv"), &same_house, n);

    // simulate the outbreak that generates the bundled observations
    let pop = Population::from_columns(
        vec![
            ("x".into(), village.x.clone()),
            ("y".into(), village.y.clone()),
            (
                "household".into(),
                village.household.iter().map(|h| *h as f64).collect(),
            ),
            (
                "class".into(),
                village.class.iter().map(|c| *c as f64).collect(),
            ),
        ],
        vec![euclid, same_class, same_house],
    )
    .unwrap();
    let single = |s: &str| parse_risk_expr(s, ExprContext::Single).unwrap();
    let functions = RiskFunctions {
        class: ModelClass::Seir,
        sparks: single("theta[1]"),
        susceptibility: single("1.0"),
        infectivity_kernel: parse_risk_expr(
            "theta[1] * dist(i,k,1)^(-theta[2]) + theta[3]*dist(i,k,2) + theta[4]*dist(i,k,3)",
            ExprContext::Pair,
        )
        .unwrap(),
        transmissibility: single("1.0"),
        latency: Some(single("theta[1]")),
        removal: Some(single("theta[1]")),
    };
    let parameters = RiskParameters {
        sparks: vec![2e-5],
        susceptibility: vec![],
        infectivity_kernel: vec![3.0, 2.0, 0.02, 0.2],
        transmissibility: vec![],
        latency: Some(vec![0.125]),
        removal: Some(vec![0.12]),
    };
    let mut states = vec![DiseaseState::Susceptible; n];
    states[0] = DiseaseState::Infectious;
    let mut sim = Simulation::with_starting_states(
        &pop,
        &functions,
        &parameters,
        states,
        0.0,
        ChaCha8Rng::seed_from_u64(1861),
    )
    .unwrap();
    sim.run(StopCondition::tmax(200.0)).unwrap();
    let infected = (1..=n).filter(|&i| sim.events.was_infected(i)).count();
    println!(
        "village outbreak: {infected}/{n} infected, {} events, final time {:.1}",
        sim.iterations, sim.time
    );

    let delay_inf = Distribution::Uniform { a: 0.0, b: 3.0 };
    let delay_rem = Distribution::Uniform { a: 0.0, b: 2.0 };
    let obs = observe(&mut sim, &delay_inf, &delay_rem, true).unwrap();

    // individual `n` becomes an isolated case well after the outbreak: its
    // only feasible transmission source is external
    let last_removal = (1..=n)
        .filter_map(|i| obs.removal[i - 1])
        .fold(0.0_f64, f64::max);
    let isolated = n;
    let iso_infection = last_removal + 30.0;
    let mut infection = obs.infection.clone();
    let mut removal = obs.removal.clone();
    infection[isolated - 1] = Some(iso_infection);
    removal[isolated - 1] = Some(iso_infection + 8.0);

    let mut out = String::from("individual,infection,removal\n");
    let mut observed = 0;
    for i in 1..=n {
        if let Some(t) = infection[i - 1] {
            observed += 1;
            let r = removal[i - 1]
                .map(|v| format!("{v}"))
                .unwrap_or_default();
            writeln!(out, "{i},{t},{r}").unwrap();
        }
    }
    std::fs::write(dir.join("village_measles_observations.csv"), out).unwrap();
    println!(
        "village_measles_observations.csv: {observed} observed cases, isolated case {isolated} at t={iso_infection:.1}"
    );
}
