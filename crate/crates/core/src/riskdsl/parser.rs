//! Recursive-descent parser for risk expressions. Errors carry byte offsets.

use super::{BinOp, CmpOp, ExprContext, Node, ParseError, RiskExpr};

/// Parse an expression in the given context and validate parameter indices.
pub fn parse_risk_expr(text: &str, context: ExprContext) -> Result<RiskExpr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        context,
    };
    p.skip_ws();
    let root = p.additive()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    let mut max = 0usize;
    let mut seen = Vec::new();
    collect_params(&root, &mut seen, &mut max);
    for j in 1..=max {
        if !seen.contains(&j) {
            return Err(ParseError::ParamGap { missing: j, max });
        }
    }
    Ok(RiskExpr::new(root, context, max))
}

fn collect_params(node: &Node, seen: &mut Vec<usize>, max: &mut usize) {
    match node {
        Node::Param(j) => {
            if !seen.contains(j) {
                seen.push(*j);
            }
            *max = (*max).max(*j);
        }
        Node::Neg(a) | Node::Exp(a) | Node::Log(a) => collect_params(a, seen, max),
        Node::Binary(_, a, b)
        | Node::Min(a, b)
        | Node::Max(a, b)
        | Node::Indicator(a, _, b) => {
            collect_params(a, seen, max);
            collect_params(b, seen, max);
        }
        _ => {}
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: ExprContext,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", b as char)))
        }
    }

    fn additive(&mut self) -> Result<Node, ParseError> {
        let mut node = self.multiplicative()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.multiplicative()?;
                    node = Node::Binary(BinOp::Add, Box::new(node), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.multiplicative()?;
                    node = Node::Binary(BinOp::Sub, Box::new(node), Box::new(rhs));
                }
                _ => return Ok(node),
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Node, ParseError> {
        let mut node = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    node = Node::Binary(BinOp::Mul, Box::new(node), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    node = Node::Binary(BinOp::Div, Box::new(node), Box::new(rhs));
                }
                _ => return Ok(node),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        if self.eat(b'-') {
            let inner = self.unary()?;
            Ok(Node::Neg(Box::new(inner)))
        } else {
            self.power()
        }
    }

    // `^` binds tighter than unary minus and is right-associative, so the
    // exponent re-enters at `unary` (allowing `x^-theta[1]`).
    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            let exponent = self.unary()?;
            Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.additive()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(&format!("unexpected character `{}`", c as char))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        // exponent part: 1e-3, 2.5E+7
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark; // not an exponent, e.g. `2exp(...)` is an error later
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Node::Literal)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }

    fn ident_text(&mut self) -> (usize, String) {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        (
            start,
            std::str::from_utf8(&self.bytes[start..self.pos])
                .unwrap()
                .to_string(),
        )
    }

    fn identifier(&mut self) -> Result<Node, ParseError> {
        let (start, name) = self.ident_text();
        match name.as_str() {
            "theta" => {
                self.skip_ws();
                self.expect(b'[')?;
                self.skip_ws();
                let idx = self.integer()?;
                if idx == 0 {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "parameter indices are 1-based".into(),
                    });
                }
                self.skip_ws();
                self.expect(b']')?;
                Ok(Node::Param(idx))
            }
            "risk" => {
                self.expect(b'.')?;
                let (cstart, col) = self.ident_text();
                if col.is_empty() {
                    return Err(ParseError::Syntax {
                        offset: cstart,
                        message: "expected covariate column name after `risk.`".into(),
                    });
                }
                Ok(Node::Covariate(col))
            }
            "risk_src" => {
                if self.context != ExprContext::Pair {
                    return Err(ParseError::PairOnly {
                        offset: start,
                        what: "risk_src".into(),
                    });
                }
                self.expect(b'.')?;
                let (cstart, col) = self.ident_text();
                if col.is_empty() {
                    return Err(ParseError::Syntax {
                        offset: cstart,
                        message: "expected covariate column name after `risk_src.`".into(),
                    });
                }
                Ok(Node::SourceCovariate(col))
            }
            "dist" => {
                if self.context != ExprContext::Pair {
                    return Err(ParseError::PairOnly {
                        offset: start,
                        what: "dist".into(),
                    });
                }
                self.expect(b'(')?;
                self.skip_ws();
                let (istart, first) = self.ident_text();
                if first != "i" {
                    return Err(ParseError::Syntax {
                        offset: istart,
                        message: "dist arguments are written dist(i,k,component)".into(),
                    });
                }
                self.skip_ws();
                self.expect(b',')?;
                self.skip_ws();
                let (kstart, second) = self.ident_text();
                if second != "k" {
                    return Err(ParseError::Syntax {
                        offset: kstart,
                        message: "dist arguments are written dist(i,k,component)".into(),
                    });
                }
                self.skip_ws();
                self.expect(b',')?;
                self.skip_ws();
                let comp = self.integer()?;
                if comp == 0 {
                    return Err(self.syntax("distance components are 1-based"));
                }
                self.skip_ws();
                self.expect(b')')?;
                Ok(Node::Distance(comp))
            }
            "exp" | "log" => {
                self.skip_ws();
                self.expect(b'(')?;
                let inner = self.additive()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(if name == "exp" {
                    Node::Exp(Box::new(inner))
                } else {
                    Node::Log(Box::new(inner))
                })
            }
            "min" | "max" => {
                self.skip_ws();
                self.expect(b'(')?;
                let a = self.additive()?;
                self.skip_ws();
                self.expect(b',')?;
                let b = self.additive()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(if name == "min" {
                    Node::Min(Box::new(a), Box::new(b))
                } else {
                    Node::Max(Box::new(a), Box::new(b))
                })
            }
            "ind" => {
                self.skip_ws();
                self.expect(b'(')?;
                let a = self.additive()?;
                self.skip_ws();
                let op = self.cmp_op()?;
                let b = self.additive()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(Node::Indicator(Box::new(a), op, Box::new(b)))
            }
            "" => Err(self.syntax("expected an expression")),
            other => Err(ParseError::UnknownFunction {
                offset: start,
                name: other.to_string(),
            }),
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, ParseError> {
        self.skip_ws();
        let op = match (self.peek(), self.bytes.get(self.pos + 1).copied()) {
            (Some(b'<'), Some(b'=')) => {
                self.pos += 2;
                CmpOp::Le
            }
            (Some(b'<'), _) => {
                self.pos += 1;
                CmpOp::Lt
            }
            (Some(b'>'), Some(b'=')) => {
                self.pos += 2;
                CmpOp::Ge
            }
            (Some(b'>'), _) => {
                self.pos += 1;
                CmpOp::Gt
            }
            (Some(b'='), Some(b'=')) => {
                self.pos += 2;
                CmpOp::Eq
            }
            _ => return Err(self.syntax("expected a comparison operator inside ind(...)")),
        };
        Ok(op)
    }

    fn integer(&mut self) -> Result<usize, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected an integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: "integer too large".into(),
            })
    }
}
