//! Scratch harness for tuning the desk-scale parameter-recovery run:
//! simulate an SIR epidemic at n=50 with known parameters, fit it, and
//! report whether the truth lands in the 95% credible intervals.
//!
//! `cargo run --release -p ilm-cli --example recovery_check [base_seed]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ilm_core::mcmc::{McmcRun, McmcSettings};
use ilm_core::model::{EventExtents, ModelClass, RiskFunctions, RiskParameters, RiskPriors};
use ilm_core::population::Population;
use ilm_core::posterior::summarize;
use ilm_core::rates::DiseaseState;
use ilm_core::riskdsl::{parse_risk_expr, ExprContext};
use ilm_core::simulate::{observe, Simulation, StopCondition};
use ilm_core::stats::Distribution;

fn sir_population(seed: u64, n: usize) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..15.0)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..15.0)).collect();
    let gamma = Distribution::Gamma {
        shape: 1.0,
        scale: 1.0,
    };
    let rf: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let dx = xs[i] - xs[k];
            let dy = ys[i] - ys[k];
            dist[i * n + k] = (dx * dx + dy * dy).sqrt();
        }
    }
    Population::from_columns(
        vec![
            ("x".into(), xs),
            ("y".into(), ys),
            ("riskfactor1".into(), rf),
        ],
        vec![dist],
    )
    .unwrap()
}

fn sir_model() -> (RiskFunctions, RiskParameters, RiskPriors) {
    let single = |s: &str| parse_risk_expr(s, ExprContext::Single).unwrap();
    let functions = RiskFunctions {
        class: ModelClass::Sir,
        sparks: single("theta[1]"),
        susceptibility: single("1.0"),
        infectivity_kernel: parse_risk_expr("dist(i,k,1)^(-theta[1])", ExprContext::Pair).unwrap(),
        transmissibility: single("1.0"),
        latency: None,
        removal: Some(single("theta[1] * risk.riskfactor1")),
    };
    let truth = RiskParameters {
        sparks: vec![0.0001],
        susceptibility: vec![],
        infectivity_kernel: vec![4.0],
        transmissibility: vec![],
        latency: None,
        removal: Some(vec![0.1]),
    };
    let priors = RiskPriors {
        sparks: vec![Distribution::Exponential { mean: 0.0001 }],
        susceptibility: vec![],
        infectivity_kernel: vec![Distribution::Uniform { a: 1.0, b: 7.0 }],
        transmissibility: vec![],
        latency: None,
        removal: Some(vec![Distribution::Uniform { a: 0.0, b: 1.0 }]),
    };
    (functions, truth, priors)
}

fn main() {
    let base: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1000);
    let n = 50;
    let pop = sir_population(900, n);
    let (functions, truth, priors) = sir_model();
    let delay = Distribution::Uniform { a: 0.5, b: 2.5 };

    for seed in base..base + 40 {
        let mut states = vec![DiseaseState::Susceptible; n];
        states[0] = DiseaseState::Infectious;
        let mut sim = Simulation::with_starting_states(
            &pop,
            &functions,
            &truth,
            states,
            0.0,
            ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        sim.run(StopCondition::tmax(200.0)).unwrap();
        let infected = (1..=n).filter(|&i| sim.events.was_infected(i)).count();
        let obs = match observe(&mut sim, &delay, &delay, true) {
            Ok(obs) => obs,
            Err(_) => {
                println!("seed {seed}: force impossible (infected {infected}), skip");
                continue;
            }
        };
        if infected < 25 {
            println!("seed {seed}: only {infected} infected, skip");
            continue;
        }
        println!("seed {seed}: {infected}/{n} infected; fitting...");
        // sanity: profile the exact likelihood over the kernel decay at the
        // true events/network; the maximizer should sit near the truth
        {
            let cfg = ilm_core::likelihood::LikelihoodConfig::default();
            let starting = {
                let mut s = vec![DiseaseState::Susceptible; n];
                s[0] = DiseaseState::Infectious;
                s
            };
            let mut best = (f64::NEG_INFINITY, 0.0);
            let mut at_truth = f64::NEG_INFINITY;
            for step in 0..=60 {
                let beta = 2.0 + step as f64 * 0.05;
                let mut params = truth.clone();
                params.infectivity_kernel = vec![beta];
                let ll = ilm_core::likelihood::log_likelihood_tnilm(
                    &functions,
                    &params,
                    &pop,
                    &starting,
                    &sim.events,
                    &sim.network,
                    &cfg,
                )
                .unwrap()
                .log_likelihood;
                if ll > best.0 {
                    best = (ll, beta);
                }
                if beta == 4.0 {
                    at_truth = ll;
                }
            }
            println!(
                "  true-event profile: argmax beta {:.2} (logL {:.2}), logL at 4.0 = {:.2}",
                best.1, best.0, at_truth
            );
        }
        let t0 = std::time::Instant::now();
        let extents = EventExtents {
            exposure: None,
            infection: (0.0, 5.0),
            removal: Some((0.0, 5.0)),
        };
        let settings = McmcSettings {
            init_attempts: 5000,
            event_sigma: 1.0,
            event_batches: 10,
            seed,
            ..Default::default()
        };
        let mut run = McmcRun::new(&pop, &functions, &priors, &obs, extents, None, settings)
            .unwrap();
        run.start().unwrap();
        run.iterate(20_000).unwrap();
        let names = run.parameter_names();
        let rows = summarize(&run.chains, &names, 5000, 20).unwrap();
        let true_flat = truth.flatten();
        let mut covered = 0;
        for (row, t) in rows.iter().zip(&true_flat) {
            let inside = *t >= row.q025 && *t <= row.q975;
            covered += usize::from(inside);
            println!(
                "  {}: mean {:.5e} CI ({:.5e}, {:.5e}) truth {:.5e} {}",
                row.parameter,
                row.mean,
                row.q025,
                row.q975,
                t,
                if inside { "IN" } else { "OUT" }
            );
        }
        println!(
            "  covered {covered}/3, param acc {:.3}, event acc {:.3}, {:.1}s",
            run.chains[0].parameter_acceptance_rate(),
            run.chains[0].event_batch_acceptance_rate(),
            t0.elapsed().as_secs_f64()
        );
    }
}
