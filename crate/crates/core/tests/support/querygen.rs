use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyfed_core::query::ast::{BinaryOp, Expr, Literal, OrderItem, Query, SelectItem, Source, UnaryOp};

/// Random node-dialect queries over the `photoobj` columns, built as ASTs so
/// printing and re-parsing them exercises the printer too.
pub struct QueryGen {
    rng: ChaCha8Rng,
}

const NUMERIC: [&str; 7] = ["ra", "dec", "sigma_pos", "mag_u", "mag_g", "mag_r", "object_id"];

impl QueryGen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Literals are non-negative, as the parser produces them; a minus sign
    /// is a unary operator.
    fn lit(&mut self) -> Expr {
        let lit = if self.rng.random_bool(0.5) {
            Expr::Literal(Literal::Int(self.rng.random_range(0..40)))
        } else {
            let x: f64 = self.rng.random_range(0.0..40.0);
            Expr::Literal(Literal::Float((x * 100.0).round() / 100.0))
        };
        self.signed(lit)
    }

    fn signed(&mut self, lit: Expr) -> Expr {
        if self.rng.random_bool(0.15) {
            Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(lit),
            }
        } else {
            lit
        }
    }

    fn dec_lit(&mut self) -> Expr {
        let dec: f64 = self.rng.random_range(-89.0..89.0_f64).round();
        let lit = Expr::Literal(Literal::Float(dec.abs()));
        if dec < 0.0 {
            Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(lit),
            }
        } else {
            lit
        }
    }

    fn num(&mut self, depth: u32) -> Expr {
        let pick = if depth == 0 { self.rng.random_range(0..2) } else { self.rng.random_range(0..7) };
        match pick {
            0 => Expr::column(NUMERIC[self.rng.random_range(0..NUMERIC.len())]),
            1 => self.lit(),
            2 | 3 => {
                let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div][self.rng.random_range(0..4)];
                Expr::binary(op, self.num(depth - 1), self.num(depth - 1))
            }
            4 => Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(self.num(depth - 1)),
            },
            5 => Expr::Call {
                name: ["FLOOR", "ABS"][self.rng.random_range(0..2)].into(),
                args: vec![self.num(depth - 1)],
            },
            _ => Expr::Call {
                name: "SEPARATION".into(),
                args: vec![
                    Expr::column("ra"),
                    Expr::column("dec"),
                    Expr::Literal(Literal::Float(self.rng.random_range(0.0..360.0_f64).round())),
                    self.dec_lit(),
                ],
            },
        }
    }

    fn cone(&mut self) -> Expr {
        Expr::Call {
            name: "CONE".into(),
            args: vec![
                Expr::Literal(Literal::Float(self.rng.random_range(0.0..360.0_f64).round())),
                self.dec_lit(),
                Expr::Literal(Literal::Float(self.rng.random_range(1.0..40.0_f64).round())),
            ],
        }
    }

    fn boolean(&mut self, depth: u32) -> Expr {
        let pick = if depth == 0 { self.rng.random_range(0..3) } else { self.rng.random_range(0..6) };
        match pick {
            0 => {
                let op = [BinaryOp::Lt, BinaryOp::Le, BinaryOp::Gt, BinaryOp::Ge, BinaryOp::Eq, BinaryOp::NotEq]
                    [self.rng.random_range(0..6)];
                let d = depth.min(1);
                Expr::binary(op, self.num(d), self.num(d))
            }
            1 => {
                let class = ["STAR", "GALAXY", "QSO", "UNKNOWN"][self.rng.random_range(0..4)];
                let op = if self.rng.random_bool(0.7) { BinaryOp::Eq } else { BinaryOp::NotEq };
                Expr::binary(op, Expr::column("class"), Expr::Literal(Literal::Text(class.into())))
            }
            2 => self.cone(),
            3 => Expr::binary(BinaryOp::And, self.boolean(depth - 1), self.boolean(depth - 1)),
            4 => Expr::binary(BinaryOp::Or, self.boolean(depth - 1), self.boolean(depth - 1)),
            _ => Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(self.boolean(depth - 1)),
            },
        }
    }

    pub fn query(&mut self) -> Query {
        let where_clause = self.rng.random_bool(0.85).then(|| self.boolean(2));
        let from = Source::Table {
            qualifier: None,
            name: "photoobj".into(),
        };
        let limit = self.rng.random_bool(0.4).then(|| self.rng.random_range(0..50));
        if self.rng.random_bool(0.35) {
            let key = if self.rng.random_bool(0.5) {
                Expr::column("class")
            } else {
                Expr::Call {
                    name: "FLOOR".into(),
                    args: vec![Expr::binary(
                        BinaryOp::Div,
                        Expr::column(["ra", "dec", "mag_r"][self.rng.random_range(0..3)]),
                        Expr::Literal(Literal::Int(self.rng.random_range(1..40))),
                    )],
                }
            };
            let mut select = vec![SelectItem::Expr {
                expr: key.clone(),
                alias: Some("k".into()),
            }];
            let n_aggs = self.rng.random_range(1..4);
            for i in 0..n_aggs {
                let func = ["COUNT", "SUM", "MIN", "MAX", "AVG"][self.rng.random_range(0..5)];
                let arg = if func == "COUNT" && self.rng.random_bool(0.5) { Expr::Star } else { self.num(1) };
                select.push(SelectItem::Expr {
                    expr: Expr::Call {
                        name: func.into(),
                        args: vec![arg],
                    },
                    alias: Some(format!("a{i}")),
                });
            }
            let order_by = if self.rng.random_bool(0.5) {
                vec![OrderItem {
                    expr: Expr::column("a0"),
                    descending: self.rng.random_bool(0.5),
                }]
            } else {
                Vec::new()
            };
            Query {
                select,
                from,
                where_clause,
                group_by: vec![Expr::column("k")],
                order_by,
                limit,
            }
        } else {
            let mut select = vec![SelectItem::Expr {
                expr: Expr::column("object_id"),
                alias: None,
            }];
            for i in 0..self.rng.random_range(1..4) {
                let expr = if self.rng.random_bool(0.15) { Expr::column("class") } else { self.num(2) };
                let alias = self.rng.random_bool(0.5).then(|| format!("c{i}"));
                select.push(SelectItem::Expr { expr, alias });
            }
            if self.rng.random_bool(0.1) {
                select.push(SelectItem::Wildcard);
            }
            let mut order_by = Vec::new();
            if self.rng.random_bool(0.5) {
                order_by.push(OrderItem {
                    expr: self.num(1),
                    descending: self.rng.random_bool(0.5),
                });
            }
            Query {
                select,
                from,
                where_clause,
                group_by: Vec::new(),
                order_by,
                limit,
            }
        }
    }
}
