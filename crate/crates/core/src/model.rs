//! Model classes, role-bound risk functions, parameters, priors, and event
//! extents, with completeness validation per class.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::population::Population;
use crate::riskdsl::{EvalError, ExprContext, RiskExpr};
use crate::stats::{Distribution, DistributionError};

/// Disease-progression class. Transition chains are S->E->I->R, S->E->I,
/// S->I->R, and S->I; no other transitions exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelClass {
    Seir,
    Sei,
    Sir,
    Si,
}

impl ModelClass {
    pub fn has_exposed(self) -> bool {
        matches!(self, ModelClass::Seir | ModelClass::Sei)
    }

    pub fn has_removed(self) -> bool {
        matches!(self, ModelClass::Seir | ModelClass::Sir)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SEIR" => Some(ModelClass::Seir),
            "SEI" => Some(ModelClass::Sei),
            "SIR" => Some(ModelClass::Sir),
            "SI" => Some(ModelClass::Si),
            _ => None,
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::Seir => "SEIR",
            ModelClass::Sei => "SEI",
            ModelClass::Sir => "SIR",
            ModelClass::Si => "SI",
        })
    }
}

/// The function roles a model may bind. `Latency` exists only for classes
/// with an exposed state, `Removal` only for classes with a removed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sparks,
    Susceptibility,
    InfectivityKernel,
    Transmissibility,
    Latency,
    Removal,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Sparks,
        Role::Susceptibility,
        Role::InfectivityKernel,
        Role::Transmissibility,
        Role::Latency,
        Role::Removal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::Sparks => "sparks",
            Role::Susceptibility => "susceptibility",
            Role::InfectivityKernel => "infectivity_kernel",
            Role::Transmissibility => "transmissibility",
            Role::Latency => "latency",
            Role::Removal => "removal",
        }
    }

    pub fn required_for(self, class: ModelClass) -> bool {
        match self {
            Role::Latency => class.has_exposed(),
            Role::Removal => class.has_removed(),
            _ => true,
        }
    }

    pub fn context(self) -> ExprContext {
        match self {
            Role::InfectivityKernel => ExprContext::Pair,
            _ => ExprContext::Single,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model validation failed:\n{0}")]
    Invalid(ValidationReport),
    #[error("parameter shape mismatch for role {role}: expected {expected}, got {got}")]
    ShapeMismatch {
        role: Role,
        expected: usize,
        got: usize,
    },
    #[error("prior for {role}[{index}]: {source}")]
    BadPrior {
        role: Role,
        index: usize,
        source: DistributionError,
    },
    #[error("event extent `{which}` invalid: need 0 <= lo < hi, got ({lo}, {hi})")]
    BadExtent { which: &'static str, lo: f64, hi: f64 },
    #[error("event extent `exposure` is {state} for class {class}")]
    ExtentPresence { state: &'static str, class: ModelClass },
}

/// Parsed risk expressions bound to their roles for one model class.
#[derive(Debug, Clone)]
pub struct RiskFunctions {
    pub class: ModelClass,
    pub sparks: RiskExpr,
    pub susceptibility: RiskExpr,
    pub infectivity_kernel: RiskExpr,
    pub transmissibility: RiskExpr,
    pub latency: Option<RiskExpr>,
    pub removal: Option<RiskExpr>,
}

impl RiskFunctions {
    pub fn expr(&self, role: Role) -> Option<&RiskExpr> {
        match role {
            Role::Sparks => Some(&self.sparks),
            Role::Susceptibility => Some(&self.susceptibility),
            Role::InfectivityKernel => Some(&self.infectivity_kernel),
            Role::Transmissibility => Some(&self.transmissibility),
            Role::Latency => self.latency.as_ref(),
            Role::Removal => self.removal.as_ref(),
        }
    }

    /// Roles populated on this instance, in canonical order.
    pub fn roles(&self) -> Vec<Role> {
        Role::ALL
            .into_iter()
            .filter(|r| self.expr(*r).is_some())
            .collect()
    }
}

/// One parameter vector per populated role; lengths match each
/// expression's `param_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskParameters {
    pub sparks: Vec<f64>,
    pub susceptibility: Vec<f64>,
    pub infectivity_kernel: Vec<f64>,
    pub transmissibility: Vec<f64>,
    pub latency: Option<Vec<f64>>,
    pub removal: Option<Vec<f64>>,
}

impl RiskParameters {
    pub fn values(&self, role: Role) -> Option<&[f64]> {
        match role {
            Role::Sparks => Some(&self.sparks),
            Role::Susceptibility => Some(&self.susceptibility),
            Role::InfectivityKernel => Some(&self.infectivity_kernel),
            Role::Transmissibility => Some(&self.transmissibility),
            Role::Latency => self.latency.as_deref(),
            Role::Removal => self.removal.as_deref(),
        }
    }

    /// Total scalar parameter count across roles.
    pub fn total(&self) -> usize {
        Role::ALL
            .into_iter()
            .filter_map(|r| self.values(r))
            .map(|v| v.len())
            .sum()
    }

    /// Flatten to a single vector in canonical role order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total());
        for role in Role::ALL {
            if let Some(v) = self.values(role) {
                out.extend_from_slice(v);
            }
        }
        out
    }

    /// Rebuild from a flat vector with the same shape as `self`.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), self.total());
        let mut iter = flat.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { iter.by_ref().take(n).collect() };
        RiskParameters {
            sparks: take(self.sparks.len()),
            susceptibility: take(self.susceptibility.len()),
            infectivity_kernel: take(self.infectivity_kernel.len()),
            transmissibility: take(self.transmissibility.len()),
            latency: self.latency.as_ref().map(|v| take(v.len())),
            removal: self.removal.as_ref().map(|v| take(v.len())),
        }
    }

    /// One `role[index]` label per scalar, matching [`flatten`] order.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for role in Role::ALL {
            if let Some(v) = self.values(role) {
                for j in 1..=v.len() {
                    out.push(format!("{}[{}]", role.name(), j));
                }
            }
        }
        out
    }
}

/// One prior per scalar parameter, same shape as [`RiskParameters`].
#[derive(Debug, Clone)]
pub struct RiskPriors {
    pub sparks: Vec<Distribution>,
    pub susceptibility: Vec<Distribution>,
    pub infectivity_kernel: Vec<Distribution>,
    pub transmissibility: Vec<Distribution>,
    pub latency: Option<Vec<Distribution>>,
    pub removal: Option<Vec<Distribution>>,
}

impl RiskPriors {
    pub fn values(&self, role: Role) -> Option<&[Distribution]> {
        match role {
            Role::Sparks => Some(&self.sparks),
            Role::Susceptibility => Some(&self.susceptibility),
            Role::InfectivityKernel => Some(&self.infectivity_kernel),
            Role::Transmissibility => Some(&self.transmissibility),
            Role::Latency => self.latency.as_deref(),
            Role::Removal => self.removal.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for role in Role::ALL {
            if let Some(priors) = self.values(role) {
                for (i, p) in priors.iter().enumerate() {
                    p.validate().map_err(|source| ModelError::BadPrior {
                        role,
                        index: i + 1,
                        source,
                    })?;
                }
            }
        }
        Ok(())
    }

    /// Flat list matching [`RiskParameters::flatten`] order.
    pub fn flatten(&self) -> Vec<&Distribution> {
        let mut out = Vec::new();
        for role in Role::ALL {
            if let Some(v) = self.values(role) {
                out.extend(v.iter());
            }
        }
        out
    }

    /// Draw one parameter set from the priors, shaped like `template`.
    pub fn sample<R: Rng + ?Sized>(&self, template: &RiskParameters, rng: &mut R) -> RiskParameters {
        let flat: Vec<f64> = self.flatten().iter().map(|d| d.sample(rng)).collect();
        template.with_flat(&flat)
    }
}

/// Uniform prior bounds for event-time data augmentation.
///
/// `infection` and `removal` bound the delay between a true event and its
/// observation; `exposure` bounds the latent period (infection time minus
/// exposure time). Scalar shorthand expands `hi` to `(0, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventExtents {
    pub exposure: Option<(f64, f64)>,
    pub infection: (f64, f64),
    pub removal: Option<(f64, f64)>,
}

impl EventExtents {
    pub fn validate(&self, class: ModelClass) -> Result<(), ModelError> {
        let check = |which: &'static str, (lo, hi): (f64, f64)| -> Result<(), ModelError> {
            if !(0.0 <= lo && lo < hi) || !hi.is_finite() {
                Err(ModelError::BadExtent { which, lo, hi })
            } else {
                Ok(())
            }
        };
        check("infection", self.infection)?;
        match (self.exposure, class.has_exposed()) {
            (Some(e), true) => check("exposure", e)?,
            (None, true) => {
                return Err(ModelError::ExtentPresence {
                    state: "missing",
                    class,
                })
            }
            (Some(_), false) => {
                return Err(ModelError::ExtentPresence {
                    state: "present",
                    class,
                })
            }
            (None, false) => {}
        }
        if let Some(r) = self.removal {
            check("removal", r)?;
        }
        Ok(())
    }
}

/// Outcome of [`validate_model`]: empty problem list means pass.
#[derive(Debug, Default, Clone)]
pub struct ValidationReport {
    pub problems: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.problems {
            writeln!(f, "  problem: {p}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

/// Check that role slots match the class, expression contexts and arities
/// line up, and every expression evaluates finitely on a probe individual.
pub fn validate_model(
    class: ModelClass,
    rf: &RiskFunctions,
    rp: &RiskParameters,
    pop: &Population,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if rf.class != class {
        report
            .problems
            .push(format!("functions declare class {}, expected {class}", rf.class));
    }
    for role in Role::ALL {
        let required = role.required_for(class);
        match (rf.expr(role), required) {
            (None, true) => report.problems.push(format!("missing role: {role}")),
            (Some(_), false) => report.problems.push(format!("extra role: {role}")),
            (Some(expr), true) => {
                if expr.context() != role.context() {
                    report
                        .problems
                        .push(format!("role {role} has wrong expression context"));
                }
                match rp.values(role) {
                    None => report
                        .problems
                        .push(format!("missing parameter vector for role {role}")),
                    Some(v) => {
                        if v.len() != expr.param_count() {
                            report.problems.push(format!(
                                "role {role}: expression uses {} parameters, vector has {}",
                                expr.param_count(),
                                v.len()
                            ));
                        } else if v.iter().any(|x| !x.is_finite()) {
                            report
                                .problems
                                .push(format!("role {role}: non-finite parameter value"));
                        } else {
                            // probe evaluation on individual 1 (and source 2/1)
                            let k = match role.context() {
                                ExprContext::Pair => Some(if pop.len() > 1 { 2 } else { 1 }),
                                ExprContext::Single => None,
                            };
                            if let Err(e) = expr.eval(v, pop, 1, k) {
                                report
                                    .problems
                                    .push(format!("role {role}: probe evaluation failed: {e}"));
                            }
                        }
                    }
                }
            }
            (None, false) => {
                if rp.values(role).is_some_and(|v| !v.is_empty()) {
                    report
                        .problems
                        .push(format!("parameters supplied for absent role {role}"));
                }
            }
        }
    }
    report
}

/// Sum of per-scalar log prior densities; `-inf` when any parameter falls
/// outside its prior's support.
pub fn log_prior(rp: &RiskParameters, priors: &RiskPriors) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for role in Role::ALL {
        match (rp.values(role), priors.values(role)) {
            (Some(values), Some(dists)) => {
                if values.len() != dists.len() {
                    return Err(ModelError::ShapeMismatch {
                        role,
                        expected: dists.len(),
                        got: values.len(),
                    });
                }
                for (x, d) in values.iter().zip(dists) {
                    total += d.log_density(*x);
                }
            }
            (None, None) => {}
            (got, expected) => {
                return Err(ModelError::ShapeMismatch {
                    role,
                    expected: expected.map_or(0, |v| v.len()),
                    got: got.map_or(0, |v| v.len()),
                });
            }
        }
    }
    Ok(total)
}

/// Per-individual cached evaluations of the single-individual roles; the
/// kernel stays on-demand. Rebuilt whenever the parameters change.
#[derive(Debug, Clone)]
pub struct IndividualRates {
    pub sparks: Vec<f64>,
    pub susceptibility: Vec<f64>,
    pub transmissibility: Vec<f64>,
    pub latency: Option<Vec<f64>>,
    pub removal: Option<Vec<f64>>,
}

impl IndividualRates {
    pub fn compute(
        rf: &RiskFunctions,
        rp: &RiskParameters,
        pop: &Population,
    ) -> Result<Self, EvalError> {
        let n = pop.len();
        let eval_all = |expr: &RiskExpr, params: &[f64]| -> Result<Vec<f64>, EvalError> {
            (1..=n).map(|i| expr.eval(params, pop, i, None)).collect()
        };
        Ok(IndividualRates {
            sparks: eval_all(&rf.sparks, &rp.sparks)?,
            susceptibility: eval_all(&rf.susceptibility, &rp.susceptibility)?,
            transmissibility: eval_all(&rf.transmissibility, &rp.transmissibility)?,
            latency: match (&rf.latency, &rp.latency) {
                (Some(expr), Some(params)) => Some(eval_all(expr, params)?),
                _ => None,
            },
            removal: match (&rf.removal, &rp.removal) {
                (Some(expr), Some(params)) => Some(eval_all(expr, params)?),
                _ => None,
            },
        })
    }

    /// Pair rate `susceptibility(i) * transmissibility(k) * kernel(i, k)`.
    pub fn pair_rate(
        &self,
        rf: &RiskFunctions,
        rp: &RiskParameters,
        pop: &Population,
        i: usize,
        k: usize,
    ) -> Result<f64, EvalError> {
        let kernel = rf
            .infectivity_kernel
            .eval(&rp.infectivity_kernel, pop, i, Some(k))?;
        let v = self.susceptibility[i - 1] * self.transmissibility[k - 1] * kernel;
        if v.is_nan() {
            return Err(EvalError::NaN);
        }
        Ok(v)
    }
}
