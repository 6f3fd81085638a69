//! Shared statistical utilities: the univariate distribution family used
//! for priors and observation delays, a streaming covariance accumulator
//! for the adaptive proposal kernel, truncated-normal sampling with exact
//! log-density, and interpolated quantiles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Distribution as _;
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("uniform requires a < b, got a={a}, b={b}")]
    UniformBounds { a: f64, b: f64 },
    #[error("{family} requires positive {what}, got {value}")]
    NonPositive {
        family: &'static str,
        what: &'static str,
        value: f64,
    },
}

/// Univariate distribution with a log-density evaluable at any real
/// (`-inf` outside support) and a sampler.
///
/// `Exponential` is parameterized by its mean (scale), not its rate;
/// `Gamma` by shape and scale. `Normal` is optionally truncated to
/// `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
    Normal { mu: f64, sigma: f64, truncated: bool },
    Beta { alpha: f64, beta: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<(), DistributionError> {
        match *self {
            Distribution::Uniform { a, b } => {
                if a >= b || !a.is_finite() || !b.is_finite() {
                    return Err(DistributionError::UniformBounds { a, b });
                }
            }
            Distribution::Exponential { mean } => {
                if mean <= 0.0 || !mean.is_finite() {
                    return Err(DistributionError::NonPositive {
                        family: "exponential",
                        what: "mean",
                        value: mean,
                    });
                }
            }
            Distribution::Gamma { shape, scale } => {
                for (what, value) in [("shape", shape), ("scale", scale)] {
                    if value <= 0.0 || !value.is_finite() {
                        return Err(DistributionError::NonPositive {
                            family: "gamma",
                            what,
                            value,
                        });
                    }
                }
            }
            Distribution::Normal { sigma, .. } => {
                if sigma <= 0.0 || !sigma.is_finite() {
                    return Err(DistributionError::NonPositive {
                        family: "normal",
                        what: "sigma",
                        value: sigma,
                    });
                }
            }
            Distribution::Beta { alpha, beta } => {
                for (what, value) in [("alpha", alpha), ("beta", beta)] {
                    if value <= 0.0 || !value.is_finite() {
                        return Err(DistributionError::NonPositive {
                            family: "beta",
                            what,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Natural log of the density at `x`; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => {
                if x >= a && x <= b {
                    -(b - a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Exponential { mean } => {
                if x >= 0.0 {
                    -mean.ln() - x / mean
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Gamma { shape, scale } => {
                if x > 0.0 {
                    (shape - 1.0) * x.ln() - x / scale - shape * scale.ln() - ln_gamma(shape)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Normal {
                mu,
                sigma,
                truncated,
            } => {
                if truncated && x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x - mu) / sigma;
                let base = -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
                if truncated {
                    // renormalize by P(X >= 0)
                    let std = StatNormal::new(0.0, 1.0).unwrap();
                    base - (1.0 - std.cdf(-mu / sigma)).ln()
                } else {
                    base
                }
            }
            Distribution::Beta { alpha, beta } => {
                if x > 0.0 && x < 1.0 {
                    (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_gamma(alpha)
                        - ln_gamma(beta)
                        + ln_gamma(alpha + beta)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => rng.gen_range(a..b),
            Distribution::Exponential { mean } => {
                rand_distr::Exp::new(1.0 / mean).unwrap().sample(rng)
            }
            Distribution::Gamma { shape, scale } => {
                rand_distr::Gamma::new(shape, scale).unwrap().sample(rng)
            }
            Distribution::Normal {
                mu,
                sigma,
                truncated,
            } => {
                let normal = rand_distr::Normal::new(mu, sigma).unwrap();
                if truncated {
                    loop {
                        let x = normal.sample(rng);
                        if x >= 0.0 {
                            return x;
                        }
                    }
                } else {
                    normal.sample(rng)
                }
            }
            Distribution::Beta { alpha, beta } => {
                rand_distr::Beta::new(alpha, beta).unwrap().sample(rng)
            }
        }
    }

    /// Whether the support is contained in `[0, inf)`; observation delays
    /// require this.
    pub fn non_negative_support(&self) -> bool {
        match *self {
            Distribution::Uniform { a, .. } => a >= 0.0,
            Distribution::Exponential { .. } | Distribution::Gamma { .. } => true,
            Distribution::Normal { truncated, .. } => truncated,
            Distribution::Beta { .. } => true,
        }
    }

    /// Infimum of the support (used to prove a forced observation
    /// impossible).
    pub fn support_lower_bound(&self) -> f64 {
        match *self {
            Distribution::Uniform { a, .. } => a,
            Distribution::Exponential { .. } | Distribution::Gamma { .. } => 0.0,
            Distribution::Normal { truncated, .. } => {
                if truncated {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Beta { .. } => 0.0,
        }
    }
}

/// Streaming mean/scatter accumulator over parameter vectors.
///
/// Holds the count, running mean, and the scatter matrix
/// `M2 = sum (x - mean_old)(x - mean_new)^T`; the sample covariance is
/// `M2 / (count - 1)`.
#[derive(Debug, Clone)]
pub struct OnlineCovariance {
    count: u64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl OnlineCovariance {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Sample covariance; zero matrix until two observations arrive.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.count < 2 {
            DMatrix::zeros(self.mean.len(), self.mean.len())
        } else {
            &self.m2 / (self.count - 1) as f64
        }
    }
}

/// Sample from Normal(mu, sigma^2) truncated to `[lo, hi]` by inverse-CDF.
///
/// The interval is mapped into the lower tail first so the CDF difference
/// stays well conditioned. Falls back to rejection sampling in the rare
/// case the inverse-CDF value lands outside `[lo, hi]` through rounding.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    assert!(lo < hi, "truncation interval must be non-empty");
    assert!(sigma > 0.0);
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    // flip into the lower tail when the interval sits right of the mean
    if a + b > 0.0 {
        mu - sigma * sample_std_truncated(rng, -b, -a)
    } else {
        mu + sigma * sample_std_truncated(rng, a, b)
    }
}

fn sample_std_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let std = StatNormal::new(0.0, 1.0).unwrap();
    let pa = std.cdf(a);
    let pb = std.cdf(b);
    if pb - pa > 1e-12 {
        for _ in 0..16 {
            let u = rng.gen_range(pa..pb);
            let z = std.inverse_cdf(u);
            if z >= a && z <= b && z.is_finite() {
                return z;
            }
        }
    }
    // nearly-degenerate or deep-tail interval: uniform rejection against
    // the density peak, restricted to a window where mass is non-negligible
    let peak = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    let lo = a.max(peak - 40.0);
    let hi = b.min(peak + 40.0);
    loop {
        let z = rng.gen_range(lo..hi);
        let accept = (-0.5 * (z * z - peak * peak)).exp();
        if rng.gen::<f64>() < accept {
            return z;
        }
    }
}

/// Log-density of the truncated normal above; `-inf` outside `[lo, hi]`.
pub fn truncated_normal_ln_pdf(x: f64, mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    let std = StatNormal::new(0.0, 1.0).unwrap();
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let mass = if a + b > 0.0 {
        std.cdf(-a) - std.cdf(-b)
    } else {
        std.cdf(b) - std.cdf(a)
    };
    if mass <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - mass.ln()
}

/// Interpolated quantile of unsorted data (linear interpolation of order
/// statistics, the common "type 7" rule). `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, q)
}

/// As [`quantile`] but assumes `sorted` is ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Sample mean and unbiased variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    assert!(m >= 1);
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, var)
}
