use super::ast::*;
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::QueryError;

/// Parses one query. Trailing input after the query is an error.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let q = p.query()?;
    p.expect_eof()?;
    Ok(q)
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(text: &str) -> Result<Expr, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> TokenKind {
        let kind = self.tokens[self.pos].kind.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        kind
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        QueryError::Parse {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        self.eat(&TokenKind::Keyword(kw))
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> Result<(), QueryError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error(&[label]))
        }
    }

    fn expect_eof(&self) -> Result<(), QueryError> {
        if *self.peek() == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            TokenKind::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect(TokenKind::Keyword(Keyword::Select), "SELECT")?;
        let mut select = vec![self.select_item()?];
        while self.eat(&TokenKind::Comma) {
            select.push(self.select_item()?);
        }
        self.expect(TokenKind::Keyword(Keyword::From), "FROM")?;
        let from = self.source()?;
        let where_clause = if self.eat_kw(Keyword::Where) {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_kw(Keyword::Group) {
            self.expect(TokenKind::Keyword(Keyword::By), "BY")?;
            group_by.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                group_by.push(self.expr()?);
            }
        }
        let mut order_by = Vec::new();
        if self.eat_kw(Keyword::Order) {
            self.expect(TokenKind::Keyword(Keyword::By), "BY")?;
            order_by.push(self.order_item()?);
            while self.eat(&TokenKind::Comma) {
                order_by.push(self.order_item()?);
            }
        }
        let limit = if self.eat_kw(Keyword::Limit) {
            match self.peek() {
                TokenKind::Int(n) if *n >= 0 => {
                    let n = *n as u64;
                    self.bump();
                    Some(n)
                }
                _ => return Err(self.error(&["non-negative integer"])),
            }
        } else {
            None
        };
        Ok(Query {
            select,
            from,
            where_clause,
            group_by,
            order_by,
            limit,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, QueryError> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        let expr = self.expr()?;
        let alias = if self.eat_kw(Keyword::As) {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn order_item(&mut self) -> Result<OrderItem, QueryError> {
        let expr = self.expr()?;
        let descending = if self.eat_kw(Keyword::Desc) {
            true
        } else {
            self.eat_kw(Keyword::Asc);
            false
        };
        Ok(OrderItem { expr, descending })
    }

    fn source(&mut self) -> Result<Source, QueryError> {
        if self.eat_kw(Keyword::Xmatch) {
            self.expect(TokenKind::LParen, "`(`")?;
            let mut surveys = vec![self.ident()?];
            while self.eat(&TokenKind::Comma) {
                surveys.push(self.ident()?);
            }
            self.expect(TokenKind::RParen, "`,` or `)`")?;
            let mut options = XmatchOptions::default();
            if self.eat_kw(Keyword::With) {
                self.xmatch_option(&mut options)?;
                while self.eat(&TokenKind::Comma) {
                    self.xmatch_option(&mut options)?;
                }
            }
            return Ok(Source::Xmatch { surveys, options });
        }
        if !matches!(self.peek(), TokenKind::Ident(_)) {
            return Err(self.error(&["table name", "XMATCH"]));
        }
        let first = self.ident()?;
        if self.eat(&TokenKind::Dot) {
            let name = self.ident()?;
            Ok(Source::Table {
                qualifier: Some(first),
                name,
            })
        } else {
            Ok(Source::Table {
                qualifier: None,
                name: first,
            })
        }
    }

    fn xmatch_option(&mut self, options: &mut XmatchOptions) -> Result<(), QueryError> {
        let at = self.offset();
        let name = match self.peek() {
            TokenKind::Ident(s) => s.to_ascii_lowercase(),
            _ => return Err(self.error(&["k", "max_radius", "mode"])),
        };
        let duplicate = || QueryError::Parse {
            offset: at,
            expected: vec!["distinct option".into()],
            found: format!("repeated option `{name}`"),
        };
        match name.as_str() {
            "k" | "max_radius" => {
                self.bump();
                self.expect(TokenKind::Eq, "`=`")?;
                let v = match *self.peek() {
                    TokenKind::Int(i) => i as f64,
                    TokenKind::Float(x) => x,
                    _ => return Err(self.error(&["number"])),
                };
                self.bump();
                let slot = if name == "k" {
                    &mut options.k
                } else {
                    &mut options.max_radius_arcsec
                };
                if slot.is_some() {
                    return Err(duplicate());
                }
                *slot = Some(v);
            }
            "mode" => {
                self.bump();
                self.expect(TokenKind::Eq, "`=`")?;
                let mode = match self.peek() {
                    TokenKind::Ident(s) if s.eq_ignore_ascii_case("all") => MatchMode::All,
                    TokenKind::Ident(s) if s.eq_ignore_ascii_case("best") => MatchMode::Best,
                    _ => return Err(self.error(&["all", "best"])),
                };
                self.bump();
                if options.mode.is_some() {
                    return Err(duplicate());
                }
                options.mode = Some(mode);
            }
            _ => return Err(self.error(&["k", "max_radius", "mode"])),
        }
        Ok(())
    }

    pub fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw(Keyword::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw(Keyword::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, QueryError> {
        if self.eat_kw(Keyword::Not) {
            let inner = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, QueryError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            TokenKind::Eq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::NotEq,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, QueryError> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(inner),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        match self.peek().clone() {
            TokenKind::Int(i) => {
                self.bump();
                Ok(Expr::Literal(Literal::Int(i)))
            }
            TokenKind::Float(x) => {
                self.bump();
                Ok(Expr::Literal(Literal::Float(x)))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Literal::Text(s)))
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                self.bump();
                if self.eat(&TokenKind::LParen) {
                    let args = self.call_args()?;
                    return Ok(Expr::Call {
                        name: name.to_ascii_uppercase(),
                        args,
                    });
                }
                if self.eat(&TokenKind::Dot) {
                    let col = self.ident()?;
                    return Ok(Expr::Column(ColumnRef::qualified(name, col)));
                }
                Ok(Expr::Column(ColumnRef::bare(name)))
            }
            _ => Err(self.error(&["expression"])),
        }
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, QueryError> {
        if self.eat(&TokenKind::RParen) {
            return Ok(Vec::new());
        }
        if self.eat(&TokenKind::Star) {
            self.expect(TokenKind::RParen, "`)`")?;
            return Ok(vec![Expr::Star]);
        }
        let mut args = vec![self.expr()?];
        while self.eat(&TokenKind::Comma) {
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RParen, "`,` or `)`")?;
        Ok(args)
    }
}
