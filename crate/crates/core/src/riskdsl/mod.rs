//! A small, closed expression language for disease-state transition rates.
//!
//! Rate functions are ordinary arithmetic over parameters (`theta[j]`),
//! covariates of the subject individual (`risk.<column>`), covariates of the
//! transmission source (`risk_src.<column>`, kernel context only), and
//! pairwise distance components (`dist(i,k,c)`, kernel context only), with
//! `+ - * / ^`, unary minus, and the functions `exp`, `log`, `min`, `max`
//! and `ind(a CMP b)` (indicator, 1.0 or 0.0).
//!
//! Precedence, tightest first: `^` (right associative), unary minus,
//! `* /`, `+ -`, comparisons (only inside `ind`).
//!
//! The grammar is documented in EBNF in `docs/expression-grammar.ebnf`.

mod parser;

pub use parser::parse_risk_expr;

use std::fmt;

use thiserror::Error;

use crate::population::Population;

/// Whether an expression ranges over one individual or an (infectee,
/// source) pair. Pair-only references (`risk_src`, `dist`) are rejected in
/// single context at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprContext {
    Single,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Literal(f64),
    /// `theta[j]`, 1-based.
    Param(usize),
    /// `risk.<column>` of the subject individual.
    Covariate(String),
    /// `risk_src.<column>` of the source individual (pair context).
    SourceCovariate(String),
    /// `dist(i,k,c)`, 1-based component index (pair context).
    Distance(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    /// `ind(a CMP b)`: 1.0 when the comparison holds, else 0.0.
    Indicator(Box<Node>, CmpOp, Box<Node>),
}

/// A parsed, validated risk expression.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskExpr {
    root: Node,
    context: ExprContext,
    param_count: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
    #[error("`{what}` at byte {offset} is only valid in pair (kernel) context")]
    PairOnly { offset: usize, what: String },
    #[error("parameter indices must be contiguous from 1: theta[{missing}] is never referenced but theta[{max}] is")]
    ParamGap { missing: usize, max: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("expression expects {expected} parameters, {got} supplied")]
    WrongArity { expected: usize, got: usize },
    #[error("pair expression evaluated without a source individual")]
    MissingSource,
    #[error("single-context expression evaluated with a source individual")]
    UnexpectedSource,
    #[error("unknown covariate column `{0}`")]
    UnknownColumn(String),
    #[error("individual id {id} out of range 1..={n}")]
    IndividualOutOfRange { id: usize, n: usize },
    #[error("distance component {component} out of range 1..={d}")]
    DistanceComponent { component: usize, d: usize },
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("expression produced NaN")]
    NaN,
    #[error("expression produced a non-finite rate")]
    NonFinite,
    #[error("expression produced a negative rate {0}; rates must be non-negative")]
    Negative(f64),
}

impl RiskExpr {
    pub(crate) fn new(root: Node, context: ExprContext, param_count: usize) -> Self {
        Self {
            root,
            context,
            param_count,
        }
    }

    /// Number of parameters the expression references (`theta[1..=count]`).
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn context(&self) -> ExprContext {
        self.context
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluate as a rate: finite and non-negative, or an error.
    ///
    /// `k` must be supplied exactly when the expression has pair context.
    /// IEEE semantics give `inf^(-b) == 0` for `b > 0`, which is what lets
    /// an infinite distance disable a power-law kernel term.
    pub fn eval(
        &self,
        params: &[f64],
        pop: &Population,
        i: usize,
        k: Option<usize>,
    ) -> Result<f64, EvalError> {
        if params.len() != self.param_count {
            return Err(EvalError::WrongArity {
                expected: self.param_count,
                got: params.len(),
            });
        }
        match (self.context, k) {
            (ExprContext::Pair, None) => return Err(EvalError::MissingSource),
            (ExprContext::Single, Some(_)) => return Err(EvalError::UnexpectedSource),
            _ => {}
        }
        if i < 1 || i > pop.len() {
            return Err(EvalError::IndividualOutOfRange {
                id: i,
                n: pop.len(),
            });
        }
        if let Some(k) = k {
            if k < 1 || k > pop.len() {
                return Err(EvalError::IndividualOutOfRange {
                    id: k,
                    n: pop.len(),
                });
            }
        }
        let v = eval_node(&self.root, params, pop, i, k)?;
        if v.is_nan() {
            return Err(EvalError::NaN);
        }
        if !v.is_finite() {
            return Err(EvalError::NonFinite);
        }
        if v < 0.0 {
            return Err(EvalError::Negative(v));
        }
        Ok(v)
    }
}

fn eval_node(
    node: &Node,
    params: &[f64],
    pop: &Population,
    i: usize,
    k: Option<usize>,
) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Literal(v) => *v,
        Node::Param(j) => params[*j - 1],
        Node::Covariate(name) => pop
            .covariate(name, i)
            .ok_or_else(|| EvalError::UnknownColumn(name.clone()))?,
        Node::SourceCovariate(name) => {
            let k = k.expect("pair context checked at entry");
            pop.covariate(name, k)
                .ok_or_else(|| EvalError::UnknownColumn(name.clone()))?
        }
        Node::Distance(c) => {
            let k = k.expect("pair context checked at entry");
            pop.distance(i, k, *c)
                .map_err(|_| EvalError::DistanceComponent {
                    component: *c,
                    d: pop.distance_components(),
                })?
        }
        Node::Neg(a) => -eval_node(a, params, pop, i, k)?,
        Node::Binary(op, a, b) => {
            let a = eval_node(a, params, pop, i, k)?;
            let b = eval_node(b, params, pop, i, k)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Exp(a) => eval_node(a, params, pop, i, k)?.exp(),
        Node::Log(a) => {
            let v = eval_node(a, params, pop, i, k)?;
            if v <= 0.0 {
                return Err(EvalError::LogDomain(v));
            }
            v.ln()
        }
        Node::Min(a, b) => eval_node(a, params, pop, i, k)?.min(eval_node(b, params, pop, i, k)?),
        Node::Max(a, b) => eval_node(a, params, pop, i, k)?.max(eval_node(b, params, pop, i, k)?),
        Node::Indicator(a, op, b) => {
            let a = eval_node(a, params, pop, i, k)?;
            let b = eval_node(b, params, pop, i, k)?;
            let holds = match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Eq => a == b,
                CmpOp::Ge => a >= b,
                CmpOp::Gt => a > b,
            };
            if holds {
                1.0
            } else {
                0.0
            }
        }
    })
}

// Precedence levels used by the printer to emit a re-parseable form.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Binary(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

fn fmt_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = |child: &Node, f: &mut fmt::Formatter<'_>, needs: bool| -> fmt::Result {
        if needs {
            write!(f, "(")?;
            fmt_node(child, f)?;
            write!(f, ")")
        } else {
            fmt_node(child, f)
        }
    };
    match node {
        Node::Literal(v) => {
            if *v == v.trunc() && v.is_finite() && v.abs() < 1e15 {
                write!(f, "{v:.1}")
            } else {
                write!(f, "{v}")
            }
        }
        Node::Param(j) => write!(f, "theta[{j}]"),
        Node::Covariate(name) => write!(f, "risk.{name}"),
        Node::SourceCovariate(name) => write!(f, "risk_src.{name}"),
        Node::Distance(c) => write!(f, "dist(i,k,{c})"),
        Node::Neg(a) => {
            write!(f, "-")?;
            paren(a, f, precedence(a) < 3)
        }
        Node::Binary(op, a, b) => {
            let p = precedence(node);
            // left-associative operators parenthesize an equal-precedence
            // right child so right-nested trees re-parse to themselves
            let (sym, left_needs, right_needs) = match op {
                BinOp::Add => (" + ", precedence(a) < p, precedence(b) <= p),
                BinOp::Sub => (" - ", precedence(a) < p, precedence(b) <= p),
                BinOp::Mul => (" * ", precedence(a) < p, precedence(b) <= p),
                BinOp::Div => (" / ", precedence(a) < p, precedence(b) <= p),
                // right-associative: parenthesize a left child of equal level
                BinOp::Pow => ("^", precedence(a) <= p, precedence(b) < 3),
            };
            paren(a, f, left_needs)?;
            f.write_str(sym)?;
            paren(b, f, right_needs)
        }
        Node::Exp(a) => {
            write!(f, "exp(")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
        Node::Log(a) => {
            write!(f, "log(")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
        Node::Min(a, b) => {
            write!(f, "min(")?;
            fmt_node(a, f)?;
            write!(f, ", ")?;
            fmt_node(b, f)?;
            write!(f, ")")
        }
        Node::Max(a, b) => {
            write!(f, "max(")?;
            fmt_node(a, f)?;
            write!(f, ", ")?;
            fmt_node(b, f)?;
            write!(f, ")")
        }
        Node::Indicator(a, op, b) => {
            write!(f, "ind(")?;
            fmt_node(a, f)?;
            write!(f, " {op} ")?;
            fmt_node(b, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for RiskExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.root, f)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop2() -> Population {
        // riskfactor1 = (2.0, 0.5); one distance component, d(1,2)=1.0
        Population::from_columns(
            vec![("riskfactor1".into(), vec![2.0, 0.5])],
            vec![vec![0.0, 1.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn constant_parameter() {
        let e = parse_risk_expr("theta[1]", ExprContext::Single).unwrap();
        assert_eq!(e.param_count(), 1);
        assert_eq!(e.eval(&[0.25], &pop2(), 1, None).unwrap(), 0.25);
    }

    #[test]
    fn literal_one() {
        let e = parse_risk_expr("1.0", ExprContext::Single).unwrap();
        assert_eq!(e.param_count(), 0);
        assert_eq!(e.eval(&[], &pop2(), 2, None).unwrap(), 1.0);
    }

    #[test]
    fn linear_in_covariate() {
        let e = parse_risk_expr("theta[1] * risk.riskfactor1", ExprContext::Single).unwrap();
        let v = e.eval(&[0.1], &pop2(), 1, None).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn power_law_kernel() {
        let e = parse_risk_expr("dist(i,k,1)^(-theta[1])", ExprContext::Pair).unwrap();
        let v = e.eval(&[4.0], &pop2(), 1, Some(2)).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn infinite_distance_kills_power_term() {
        let pop = Population::from_columns(
            vec![("x".into(), vec![0.0, 0.0])],
            vec![vec![0.0, f64::INFINITY, f64::INFINITY, 0.0]],
        )
        .unwrap();
        let e = parse_risk_expr(
            "theta[1] * dist(i,k,1)^(-theta[2]) + theta[3]",
            ExprContext::Pair,
        )
        .unwrap();
        // inf^(-2) -> 0, so only theta[3] survives
        let v = e.eval(&[5.0, 2.0, 0.125], &pop, 1, Some(2)).unwrap();
        assert_eq!(v, 0.125);
    }

    #[test]
    fn negative_rate_is_hard_error() {
        let e = parse_risk_expr("theta[1] - 2.0", ExprContext::Single).unwrap();
        assert!(matches!(
            e.eval(&[1.0], &pop2(), 1, None),
            Err(EvalError::Negative(_))
        ));
    }

    #[test]
    fn log_domain_error() {
        let e = parse_risk_expr("log(theta[1])", ExprContext::Single).unwrap();
        assert!(matches!(
            e.eval(&[0.0], &pop2(), 1, None),
            Err(EvalError::LogDomain(_))
        ));
        assert!(e.eval(&[1.0], &pop2(), 1, None).unwrap().abs() < 1e-15);
    }

    #[test]
    fn nan_is_reported() {
        // inf * 0 = NaN with theta[1]=0 against an infinite distance
        let pop = Population::from_columns(
            vec![("x".into(), vec![0.0, 0.0])],
            vec![vec![0.0, f64::INFINITY, f64::INFINITY, 0.0]],
        )
        .unwrap();
        let e = parse_risk_expr("theta[1] * dist(i,k,1)", ExprContext::Pair).unwrap();
        assert!(matches!(
            e.eval(&[0.0], &pop, 1, Some(2)),
            Err(EvalError::NaN)
        ));
    }

    #[test]
    fn arity_checked() {
        let e = parse_risk_expr("theta[1] + theta[2]", ExprContext::Single).unwrap();
        assert!(matches!(
            e.eval(&[1.0], &pop2(), 1, None),
            Err(EvalError::WrongArity {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn pair_reference_needs_source() {
        let e = parse_risk_expr("dist(i,k,1)", ExprContext::Pair).unwrap();
        assert!(matches!(
            e.eval(&[], &pop2(), 1, None),
            Err(EvalError::MissingSource)
        ));
    }

    #[test]
    fn indicator_and_minmax() {
        let e = parse_risk_expr(
            "ind(risk.riskfactor1 >= 1.0) + min(theta[1], 0.5) + max(0.0, -1.0)",
            ExprContext::Single,
        )
        .unwrap();
        // individual 1: rf=2.0 -> ind=1; min(2,0.5)=0.5; max=0
        assert_eq!(e.eval(&[2.0], &pop2(), 1, None).unwrap(), 1.5);
        // individual 2: rf=0.5 -> ind=0
        assert_eq!(e.eval(&[2.0], &pop2(), 2, None).unwrap(), 0.5);
    }

    #[test]
    fn pow_right_associative() {
        let e = parse_risk_expr("2.0^3.0^2.0", ExprContext::Single).unwrap();
        // 2^(3^2) = 512, not (2^3)^2 = 64
        assert_eq!(e.eval(&[], &pop2(), 1, None).unwrap(), 512.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = parse_risk_expr("4.0 + -2.0^2.0", ExprContext::Single).unwrap();
        // -(2^2) = -4
        assert_eq!(e.eval(&[], &pop2(), 1, None).unwrap(), 0.0);
    }

    #[test]
    fn display_roundtrip_hagelloch_kernel() {
        let src = "theta[1] * dist(i,k,1)^(-theta[2]) + theta[3]*dist(i,k,2) + theta[4]*dist(i,k,3)";
        let e = parse_risk_expr(src, ExprContext::Pair).unwrap();
        assert_eq!(e.param_count(), 4);
        let printed = e.to_string();
        let reparsed = parse_risk_expr(&printed, ExprContext::Pair).unwrap();
        assert_eq!(e, reparsed);
    }
}
