use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::lexer::{lex, Kw, Tok};
use super::{AggKind, BinOp, Expr, Query, QueryError, SelectItem};

/// Parses query text. Name resolution against a table happens in
/// [`super::resolve`].
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0 };
    let q = p.query()?;
    p.expect(&Tok::Eof, "end of query")?;
    Ok(q)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].1
    }

    fn pos(&self) -> usize {
        self.toks[self.i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].1.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), QueryError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(alloc::format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(alloc::format!("expected {what}")),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect(&Tok::Kw(Kw::Select), "SELECT")?;
        let mut select = Vec::new();
        loop {
            let expr = self.expr()?;
            let alias = if self.eat(&Tok::Kw(Kw::As)) {
                Some(self.ident("alias")?)
            } else {
                None
            };
            select.push(SelectItem { expr, alias });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::Kw(Kw::From), "FROM")?;
        let from = self.ident("table name")?;
        let filter = if self.eat(&Tok::Kw(Kw::Where)) {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat(&Tok::Kw(Kw::Group)) {
            self.expect(&Tok::Kw(Kw::By), "BY")?;
            loop {
                group_by.push(self.ident("column name")?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        Ok(Query {
            select,
            from,
            filter,
            group_by,
        })
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.and()?;
        while self.eat(&Tok::Kw(Kw::Or)) {
            e = Expr::Bin(BinOp::Or, Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.not()?;
        while self.eat(&Tok::Kw(Kw::And)) {
            e = Expr::Bin(BinOp::And, Box::new(e), Box::new(self.not()?));
        }
        Ok(e)
    }

    fn not(&mut self) -> Result<Expr, QueryError> {
        if self.eat(&Tok::Kw(Kw::Not)) {
            Ok(Expr::Not(Box::new(self.not()?)))
        } else {
            self.cmp()
        }
    }

    fn cmp(&mut self) -> Result<Expr, QueryError> {
        let e = self.sum()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(e),
        };
        self.bump();
        Ok(Expr::Bin(op, Box::new(e), Box::new(self.sum()?)))
    }

    fn sum(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Bin(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Bin(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, QueryError> {
        if self.eat(&Tok::Minus) {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Kw(Kw::Null) => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek() == &Tok::LParen {
                    self.call(&name)
                } else {
                    Ok(Expr::Column(name))
                }
            }
            Tok::Eof => self.err("unexpected end of query"),
            _ => self.err("expected expression"),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr, QueryError> {
        let fn_pos = self.pos();
        self.bump();
        let upper = name.to_ascii_uppercase();
        if upper == "COUNT" && self.eat(&Tok::Star) {
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Expr::Agg(AggKind::Count, Vec::new()));
        }
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        let arity = |n: usize| -> Result<(), QueryError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(QueryError::Syntax {
                    pos: fn_pos,
                    message: alloc::format!("{upper} takes {n} argument(s)"),
                })
            }
        };
        let agg = match upper.as_str() {
            "COUNT" => Some(AggKind::Count),
            "AVG" => Some(AggKind::Avg),
            "SUM" => Some(AggKind::Sum),
            "STDDEV" => Some(AggKind::Stddev),
            "CORR" => Some(AggKind::Corr),
            _ => None,
        };
        if let Some(k) = agg {
            arity(if k == AggKind::Corr { 2 } else { 1 })?;
            return Ok(Expr::Agg(k, args));
        }
        match upper.as_str() {
            "LOG1P" => {
                arity(1)?;
                Ok(Expr::Log1p(Box::new(args.remove(0))))
            }
            "IF" => {
                arity(3)?;
                let mut it = args.into_iter();
                let (c, a, b) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                Ok(Expr::If(Box::new(c), Box::new(a), Box::new(b)))
            }
            _ => Err(QueryError::Syntax {
                pos: fn_pos,
                message: alloc::format!("unknown function {name}"),
            }),
        }
    }
}
