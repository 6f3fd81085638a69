//! Scratch harness for the prior-recovery sanity run: with no observed
//! events the likelihood is constant, so MCMC must reproduce the priors.
//!
//! `cargo run --release -p ilm-cli --example prior_recovery_check [seed]`

use ilm_core::mcmc::{McmcRun, McmcSettings};
use ilm_core::model::{EventExtents, ModelClass, RiskFunctions, RiskPriors};
use ilm_core::population::Population;
use ilm_core::riskdsl::{parse_risk_expr, ExprContext};
use ilm_core::stats::Distribution;

fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(7);
    let n = 10;
    let pop = Population::from_columns(
        vec![("riskfactor1".into(), vec![1.0; n])],
        vec![vec![1.0; n * n]],
    )
    .unwrap();
    let single = |s: &str| parse_risk_expr(s, ExprContext::Single).unwrap();
    let functions = RiskFunctions {
        class: ModelClass::Sir,
        sparks: single("theta[1]"),
        susceptibility: single("1.0"),
        infectivity_kernel: parse_risk_expr("dist(i,k,1)^(-theta[1])", ExprContext::Pair).unwrap(),
        transmissibility: single("1.0"),
        latency: None,
        removal: Some(single("theta[1]")),
    };
    let priors = RiskPriors {
        sparks: vec![Distribution::Exponential { mean: 0.0001 }],
        susceptibility: vec![],
        infectivity_kernel: vec![Distribution::Uniform { a: 1.0, b: 7.0 }],
        transmissibility: vec![],
        latency: None,
        removal: Some(vec![Distribution::Uniform { a: 0.0, b: 1.0 }]),
    };
    let obs = ilm_core::events::EventObservations::new(n);
    let extents = EventExtents {
        exposure: None,
        infection: (0.0, 5.0),
        removal: Some((0.0, 5.0)),
    };
    let settings = McmcSettings {
        init_attempts: 100,
        seed,
        ..Default::default()
    };
    let mut run = McmcRun::new(&pop, &functions, &priors, &obs, extents, None, settings).unwrap();
    run.start().unwrap();
    let t0 = std::time::Instant::now();
    run.iterate(20_000).unwrap();
    println!(
        "20k iterations in {:.1}s, param acceptance {:.3}",
        t0.elapsed().as_secs_f64(),
        run.chains[0].parameter_acceptance_rate()
    );

    let burnin = 2000;
    let thin = 25;
    let chain = &run.chains[0];
    let cdfs: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|x: f64| 1.0 - (-x / 0.0001).exp()),
        Box::new(|x: f64| ((x - 1.0) / 6.0).clamp(0.0, 1.0)),
        Box::new(|x: f64| x.clamp(0.0, 1.0)),
    ];
    for d in 0..3 {
        let mut values: Vec<f64> = (burnin..=20_000)
            .step_by(thin)
            .map(|i| chain.param_samples[i][d])
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = values.len();
        let ks = ks_statistic(&values, &cdfs[d]);
        let crit = 1.6276 / (m as f64).sqrt();
        println!(
            "param {d}: m={m} KS={ks:.4} crit={crit:.4} {}",
            if ks < crit { "PASS" } else { "FAIL" }
        );
    }
}
