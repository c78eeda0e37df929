//! The `run_sql_query` tool: a small SQL subset over one in-memory [`Table`].
//!
//! ```text
//! query     = "SELECT" item { "," item } "FROM" ident
//!             [ "WHERE" expr ] [ "GROUP" "BY" ident { "," ident } ] ;
//! item      = expr [ "AS" ident ] ;
//! expr      = or ;
//! or        = and { "OR" and } ;
//! and       = not { "AND" not } ;
//! not       = "NOT" not | cmp ;
//! cmp       = sum [ ( "=" | "!=" | "<>" | "<" | "<=" | ">" | ">=" ) sum ] ;
//! sum       = term { ( "+" | "-" ) term } ;
//! term      = unary { ( "*" | "/" ) unary } ;
//! unary     = "-" unary | primary ;
//! primary   = number | "NULL" | ident | call | "(" expr ")" ;
//! call      = ( "COUNT" "(" ( "*" | expr ) ")" )
//!           | ( "AVG" | "SUM" | "STDDEV" | "LOG1P" ) "(" expr ")"
//!           | ( "CORR" ) "(" expr "," expr ")"
//!           | "IF" "(" expr "," expr "," expr ")" ;
//! ```
//!
//! Keywords and function names are case-insensitive. Values are nullable
//! numbers; comparisons and logic yield 1 or 0.

mod exec;
mod lexer;
mod parser;

pub use exec::{execute_query, ResultTable};
pub use parser::parse_query;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::table::Table;

pub const DEFAULT_ROW_CAP: usize = 1000;
pub const DEFAULT_CELL_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    /// Also returned for hidden columns, so their existence cannot be probed.
    #[error("column does not exist: {0}")]
    UnknownColumn(String),
    #[error("table does not exist: {0}")]
    UnknownTable(String),
    #[error("{0}")]
    Semantic(String),
    #[error("query budget exceeded: {needed} cells > {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Eq => "=",
            Self::Ne => "!=",
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
            Self::And => "AND",
            Self::Or => "OR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggKind {
    Count,
    Avg,
    Sum,
    Stddev,
    Corr,
}

impl AggKind {
    fn name(self) -> &'static str {
        match self {
            Self::Count => "COUNT",
            Self::Avg => "AVG",
            Self::Sum => "SUM",
            Self::Stddev => "STDDEV",
            Self::Corr => "CORR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Column(String),
    Num(f64),
    Null,
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Log1p(Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `COUNT(*)` has no arguments.
    Agg(AggKind, Vec<Expr>),
}

impl Expr {
    pub fn has_aggregate(&self) -> bool {
        match self {
            Self::Agg(..) => true,
            Self::Column(_) | Self::Num(_) | Self::Null => false,
            Self::Neg(e) | Self::Not(e) | Self::Log1p(e) => e.has_aggregate(),
            Self::Bin(_, a, b) => a.has_aggregate() || b.has_aggregate(),
            Self::If(c, a, b) => c.has_aggregate() || a.has_aggregate() || b.has_aggregate(),
        }
    }

    /// Every column name referenced, in first-appearance order, with repeats.
    pub fn columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Self::Column(c) => out.push(c),
            Self::Num(_) | Self::Null => {}
            Self::Neg(e) | Self::Not(e) | Self::Log1p(e) => e.columns(out),
            Self::Bin(_, a, b) => {
                a.columns(out);
                b.columns(out);
            }
            Self::If(c, a, b) => {
                c.columns(out);
                a.columns(out);
                b.columns(out);
            }
            Self::Agg(_, args) => args.iter().for_each(|a| a.columns(out)),
        }
    }
}

/// Fully parenthesized rendering that reparses to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Column(c) => f.write_str(c),
            Self::Num(v) => write!(f, "{v:?}"),
            Self::Null => f.write_str("NULL"),
            Self::Neg(e) => write!(f, "(-{e})"),
            Self::Not(e) => write!(f, "(NOT {e})"),
            Self::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Self::Log1p(e) => write!(f, "LOG1P({e})"),
            Self::If(c, a, b) => write!(f, "IF({c}, {a}, {b})"),
            Self::Agg(AggKind::Count, args) if args.is_empty() => f.write_str("COUNT(*)"),
            Self::Agg(k, args) => {
                write!(f, "{}(", k.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    pub fn output_name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub select: Vec<SelectItem>,
    pub from: String,
    pub filter: Option<Expr>,
    pub group_by: Vec<String>,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, item) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item.expr)?;
            if let Some(a) = &item.alias {
                write!(f, " AS {a}")?;
            }
        }
        write!(f, " FROM {}", self.from)?;
        if let Some(w) = &self.filter {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            write!(f, " GROUP BY {}", self.group_by.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLimits {
    pub row_cap: usize,
    pub cell_budget: u64,
}

impl Default for QueryLimits {
    fn default() -> Self {
        Self {
            row_cap: DEFAULT_ROW_CAP,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// Checks names against the table and returns the number of cells a scan
/// will touch.
pub fn resolve(q: &Query, t: &Table) -> Result<u64, QueryError> {
    if q.from != t.name {
        return Err(QueryError::UnknownTable(q.from.clone()));
    }
    let mut cols = Vec::new();
    for item in &q.select {
        item.expr.columns(&mut cols);
    }
    if let Some(w) = &q.filter {
        if w.has_aggregate() {
            return Err(QueryError::Semantic("aggregates are not allowed in WHERE".into()));
        }
        w.columns(&mut cols);
    }
    cols.extend(q.group_by.iter().map(String::as_str));
    for c in &cols {
        if t.column_index(c).is_none() {
            return Err(QueryError::UnknownColumn((*c).to_string()));
        }
    }
    let aggregated = !q.group_by.is_empty() || q.select.iter().any(|i| i.expr.has_aggregate());
    for item in &q.select {
        check_nesting(&item.expr, false)?;
        if aggregated {
            check_grouped(&item.expr, &q.group_by)?;
        }
    }
    cols.sort_unstable();
    cols.dedup();
    Ok(t.rows() as u64 * cols.len().max(1) as u64)
}

fn check_nesting(e: &Expr, inside: bool) -> Result<(), QueryError> {
    match e {
        Expr::Agg(_, args) => {
            if inside {
                return Err(QueryError::Semantic("aggregates cannot be nested".into()));
            }
            args.iter().try_for_each(|a| check_nesting(a, true))
        }
        Expr::Column(_) | Expr::Num(_) | Expr::Null => Ok(()),
        Expr::Neg(x) | Expr::Not(x) | Expr::Log1p(x) => check_nesting(x, inside),
        Expr::Bin(_, a, b) => {
            check_nesting(a, inside)?;
            check_nesting(b, inside)
        }
        Expr::If(c, a, b) => {
            check_nesting(c, inside)?;
            check_nesting(a, inside)?;
            check_nesting(b, inside)
        }
    }
}

fn check_grouped(e: &Expr, keys: &[String]) -> Result<(), QueryError> {
    match e {
        Expr::Agg(..) | Expr::Num(_) | Expr::Null => Ok(()),
        Expr::Column(c) if keys.iter().any(|k| k == c) => Ok(()),
        Expr::Column(c) => Err(QueryError::Semantic(alloc::format!(
            "column {c} must appear in GROUP BY or inside an aggregate"
        ))),
        Expr::Neg(x) | Expr::Not(x) | Expr::Log1p(x) => check_grouped(x, keys),
        Expr::Bin(_, a, b) => {
            check_grouped(a, keys)?;
            check_grouped(b, keys)
        }
        Expr::If(c, a, b) => {
            check_grouped(c, keys)?;
            check_grouped(a, keys)?;
            check_grouped(b, keys)
        }
    }
}

/// Tool response for one query: a text table for the prompt plus JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub query: String,
    pub result: ResultTable,
    pub cells_scanned: u64,
}

impl ToolResponse {
    pub fn to_text(&self) -> String {
        let mut s = alloc::format!("query: {}\n", self.query);
        s.push_str(&self.result.to_text());
        s.push_str("json: ");
        s.push_str(&serde_json::to_string(&self.result).unwrap_or_default());
        s.push('\n');
        s
    }
}

/// Parses, resolves, budget-checks and executes one query.
pub fn run_sql_query(text: &str, table: &Table, limits: &QueryLimits) -> Result<ToolResponse, QueryError> {
    let q = parse_query(text)?;
    let needed = resolve(&q, table)?;
    if needed > limits.cell_budget {
        return Err(QueryError::BudgetExceeded {
            needed,
            budget: limits.cell_budget,
        });
    }
    let result = exec::execute_resolved(&q, table, limits.row_cap);
    Ok(ToolResponse {
        query: q.to_string(),
        result,
        cells_scanned: needed,
    })
}

/// Runs a batch; results are independent and in input order.
pub fn run_sql_batch(
    texts: &[&str],
    table: &Table,
    limits: &QueryLimits,
) -> Vec<Result<ToolResponse, QueryError>> {
    texts.iter().map(|t| run_sql_query(t, table, limits)).collect()
}
