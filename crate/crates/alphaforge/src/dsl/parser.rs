use super::lexer::{tokenize, Token, TokenKind};
use super::{op_spec, op_spec_by_name, Expr, Field, Op};
use crate::error::{Error, Result};

/// Parse expression text into a canonical tree.
///
/// Accepts function-call form plus infix `+ - * /` sugar (standard precedence,
/// left associativity, unary minus, parentheses). Infix is desugared to
/// `add`/`sub`/`mul`/`div`; unary minus on a literal folds into the literal and
/// on anything else becomes `mul(-1, x)`. Integer literals survive as `Int`
/// only inside window/period slots; everywhere else they canonicalize to `Num`.
pub fn parse(text: &str) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens: &tokens, pos: 0, input_len: text.len() };
    let expr = p.expr()?;
    if p.pos < p.tokens.len() {
        return Err(Error::Syntax {
            offset: p.tokens[p.pos].offset,
            message: format!("unexpected `{}`; expected end of input", p.tokens[p.pos].lexeme),
        });
    }
    let expr = canonicalize(expr, false);
    expr.check_structure()?;
    Ok(expr)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn offset_here(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.input_len)
    }

    fn unexpected(&self, expected: &str) -> Error {
        let found = self
            .peek()
            .map(|t| format!("`{}`", t.lexeme))
            .unwrap_or_else(|| "end of input".to_string());
        Error::Syntax {
            offset: self.offset_here(),
            message: format!("unexpected {found}; expected {expected}"),
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokenKind::Plus => Op::Add,
                TokenKind::Minus => Op::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Call(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    // term := factor (('*' | '/') factor)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokenKind::Star => Op::Mul,
                TokenKind::Slash => Op::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Call(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    // factor := '-' factor | primary
    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.bump();
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Int(v) => Expr::Int(-v),
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Call(Op::Mul, vec![Expr::Num(-1.0), other]),
            });
        }
        self.primary()
    }

    // primary := number | ident | ident '(' args ')' | '(' expr ')'
    fn primary(&mut self) -> Result<Expr> {
        let tok = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("an expression")),
        };
        match &tok.kind {
            TokenKind::Int(v) => {
                let v = *v;
                self.bump();
                Ok(Expr::Int(v))
            }
            TokenKind::Float(v) => {
                let v = *v;
                self.bump();
                Ok(Expr::Num(v))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::RParen) => {
                        self.bump();
                        Ok(inner)
                    }
                    _ => Err(self.unexpected("`)`")),
                }
            }
            TokenKind::Ident(name) => {
                let name = name.clone();
                let offset = tok.offset;
                self.bump();
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                    self.bump();
                    let spec = op_spec_by_name(&name)
                        .ok_or_else(|| Error::UnknownOperator(name.clone()))?;
                    let mut args = Vec::new();
                    if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
                        self.bump();
                    } else {
                        loop {
                            args.push(self.expr()?);
                            match self.peek().map(|t| &t.kind) {
                                Some(TokenKind::Comma) => {
                                    self.bump();
                                }
                                Some(TokenKind::RParen) => {
                                    self.bump();
                                    break;
                                }
                                _ => return Err(self.unexpected("`,` or `)`")),
                            }
                        }
                    }
                    Ok(Expr::Call(spec.op, args))
                } else if let Some(field) = Field::from_name(&name) {
                    Ok(Expr::Field(field))
                } else {
                    Err(Error::Syntax {
                        offset,
                        message: format!(
                            "unknown field `{name}`; expected one of open, high, low, close, volume, vwap"
                        ),
                    })
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Convert `Int` literals to `Num` outside window slots.
fn canonicalize(expr: Expr, in_window_slot: bool) -> Expr {
    match expr {
        Expr::Int(v) if !in_window_slot => Expr::Num(v as f64),
        Expr::Call(op, args) => {
            let window_slot = op_spec(op).window_slot;
            let args = args
                .into_iter()
                .enumerate()
                .map(|(i, a)| canonicalize(a, Some(i) == window_slot))
                .collect();
            Expr::Call(op, args)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::print_expr;

    #[test]
    fn infix_desugars_to_calls() {
        let e = parse("close - vwap").unwrap();
        assert_eq!(e, Expr::Call(Op::Sub, vec![Expr::Field(Field::Close), Expr::Field(Field::Vwap)]));
    }

    #[test]
    fn precedence_binds_mul_tighter() {
        let e = parse("open + close * vwap").unwrap();
        assert_eq!(
            e,
            Expr::Call(
                Op::Add,
                vec![
                    Expr::Field(Field::Open),
                    Expr::Call(Op::Mul, vec![Expr::Field(Field::Close), Expr::Field(Field::Vwap)]),
                ]
            )
        );
    }

    #[test]
    fn left_associativity() {
        let e = parse("close - open - vwap").unwrap();
        assert_eq!(print_expr(&e), "sub(sub(close, open), vwap)");
    }

    #[test]
    fn unary_minus_folds_literals_and_wraps_series() {
        assert_eq!(parse("-2.5").unwrap(), Expr::Num(-2.5));
        let e = parse("-close").unwrap();
        assert_eq!(print_expr(&e), "mul(-1, close)");
    }

    #[test]
    fn unknown_operator_is_named() {
        match parse("foo(close)") {
            Err(Error::UnknownOperator(name)) => assert_eq!(name, "foo"),
            other => panic!("expected unknown-operator error, got {other:?}"),
        }
    }

    #[test]
    fn window_range_rules_follow_the_table() {
        assert!(matches!(parse("ts_std(close, 1)"), Err(Error::WindowRange { .. })));
        assert!(matches!(parse("ts_corr(close, vwap, 1)"), Err(Error::WindowRange { .. })));
        assert!(parse("ts_mean(close, 1)").is_ok());
        assert!(matches!(parse("ts_mean(close, 251)"), Err(Error::WindowRange { .. })));
        assert!(matches!(parse("ts_mean(close, vwap)"), Err(Error::WindowRange { .. })));
    }

    #[test]
    fn arity_mismatch_is_reported() {
        assert!(matches!(parse("add(close)"), Err(Error::Arity { .. })));
        assert!(matches!(parse("abs(close, vwap)"), Err(Error::Arity { .. })));
    }

    #[test]
    fn missing_comma_reports_offset() {
        match parse("ts_mean(close 5)") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 14),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn numeric_literals_canonicalize_to_num_outside_windows() {
        let e = parse("mul(2, vwap)").unwrap();
        assert_eq!(e, Expr::Call(Op::Mul, vec![Expr::Num(2.0), Expr::Field(Field::Vwap)]));
        // Round trip through the printer is the identity.
        assert_eq!(parse(&print_expr(&e)).unwrap(), e);
    }

    #[test]
    fn print_parse_idempotent_on_canonical_strings() {
        let s = "add(close, mul(2, vwap))";
        let once = print_expr(&parse(s).unwrap());
        assert_eq!(once, s);
        assert_eq!(print_expr(&parse(&once).unwrap()), once);
    }
}
