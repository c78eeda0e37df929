use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{resolve, AggKind, BinOp, Expr, Query, QueryError, DEFAULT_ROW_CAP};
use crate::math;
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Set when more rows existed than the cap allowed.
    pub truncated: bool,
    pub total_rows: usize,
}

impl ResultTable {
    /// Plain-text grid; nulls print as `NULL`.
    pub fn to_text(&self) -> String {
        let cell = |v: &Option<f64>| v.map_or_else(|| String::from("NULL"), |x| alloc::format!("{x}"));
        let mut widths: Vec<usize> = self.columns.iter().map(String::len).collect();
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        for r in &body {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                out.push_str(c);
                out.extend(core::iter::repeat_n(' ', w - c.len()));
            }
            out.push('\n');
        };
        line(&mut out, &self.columns);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule);
        for r in &body {
            line(&mut out, r);
        }
        out.push_str(&alloc::format!("({} row(s)", self.total_rows));
        if self.truncated {
            out.push_str(&alloc::format!(", truncated to {}", self.rows.len()));
        }
        out.push_str(")\n");
        out
    }
}

/// Resolves `q` against `t` and executes it with the default row cap. No
/// cell budget is applied; see [`super::run_sql_query`] for the tool form.
pub fn execute_query(q: &Query, t: &Table) -> Result<ResultTable, QueryError> {
    resolve(q, t)?;
    Ok(execute_resolved(q, t, DEFAULT_ROW_CAP))
}

/// Expression with columns bound to indices.
enum Bound {
    Col(usize),
    Num(f64),
    Null,
    Neg(Box<Bound>),
    Not(Box<Bound>),
    Bin(BinOp, Box<Bound>, Box<Bound>),
    Log1p(Box<Bound>),
    If(Box<Bound>, Box<Bound>, Box<Bound>),
    Agg(AggKind, Vec<Bound>),
}

fn bind(e: &Expr, t: &Table) -> Bound {
    let b = |x: &Expr| Box::new(bind(x, t));
    match e {
        Expr::Column(c) => Bound::Col(t.column_index(c).expect("resolved before binding")),
        Expr::Num(v) => Bound::Num(*v),
        Expr::Null => Bound::Null,
        Expr::Neg(x) => Bound::Neg(b(x)),
        Expr::Not(x) => Bound::Not(b(x)),
        Expr::Bin(op, x, y) => Bound::Bin(*op, b(x), b(y)),
        Expr::Log1p(x) => Bound::Log1p(b(x)),
        Expr::If(c, x, y) => Bound::If(b(c), b(x), b(y)),
        Expr::Agg(k, args) => Bound::Agg(*k, args.iter().map(|a| bind(a, t)).collect()),
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn truth(v: bool) -> Option<f64> {
    Some(if v { 1.0 } else { 0.0 })
}

fn binop(op: BinOp, a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match op {
        // three-valued logic: a known false (or true) operand decides
        BinOp::And => match (a.map(|x| x != 0.0), b.map(|x| x != 0.0)) {
            (Some(false), _) | (_, Some(false)) => truth(false),
            (Some(true), Some(true)) => truth(true),
            _ => None,
        },
        BinOp::Or => match (a.map(|x| x != 0.0), b.map(|x| x != 0.0)) {
            (Some(true), _) | (_, Some(true)) => truth(true),
            (Some(false), Some(false)) => truth(false),
            _ => None,
        },
        _ => {
            let (a, b) = (a?, b?);
            match op {
                BinOp::Add => finite(a + b),
                BinOp::Sub => finite(a - b),
                BinOp::Mul => finite(a * b),
                BinOp::Div if b == 0.0 => None,
                BinOp::Div => finite(a / b),
                BinOp::Eq => truth(a == b),
                BinOp::Ne => truth(a != b),
                BinOp::Lt => truth(a < b),
                BinOp::Le => truth(a <= b),
                BinOp::Gt => truth(a > b),
                BinOp::Ge => truth(a >= b),
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
    }
}

/// Scalar evaluation at one row. Aggregates never reach here after resolution.
fn eval_row(e: &Bound, t: &Table, r: usize) -> Option<f64> {
    match e {
        Bound::Col(c) => t.columns()[*c].values[r],
        Bound::Num(v) => Some(*v),
        Bound::Null | Bound::Agg(..) => None,
        Bound::Neg(x) => eval_row(x, t, r).map(|v| -v),
        Bound::Not(x) => eval_row(x, t, r).map(|v| if v == 0.0 { 1.0 } else { 0.0 }),
        Bound::Bin(op, x, y) => binop(*op, eval_row(x, t, r), eval_row(y, t, r)),
        Bound::Log1p(x) => eval_row(x, t, r).filter(|v| *v > -1.0).map(libm::log1p),
        Bound::If(c, x, y) => {
            if eval_row(c, t, r).is_some_and(|v| v != 0.0) {
                eval_row(x, t, r)
            } else {
                eval_row(y, t, r)
            }
        }
    }
}

/// Evaluation over a group; bare columns are group keys and read from the
/// group's first row.
fn eval_group(e: &Bound, t: &Table, rows: &[usize]) -> Option<f64> {
    match e {
        Bound::Agg(k, args) => aggregate(*k, args, t, rows),
        Bound::Col(_) => rows.first().and_then(|r| eval_row(e, t, *r)),
        Bound::Num(v) => Some(*v),
        Bound::Null => None,
        Bound::Neg(x) => eval_group(x, t, rows).map(|v| -v),
        Bound::Not(x) => eval_group(x, t, rows).map(|v| if v == 0.0 { 1.0 } else { 0.0 }),
        Bound::Bin(op, x, y) => binop(*op, eval_group(x, t, rows), eval_group(y, t, rows)),
        Bound::Log1p(x) => eval_group(x, t, rows).filter(|v| *v > -1.0).map(libm::log1p),
        Bound::If(c, x, y) => {
            if eval_group(c, t, rows).is_some_and(|v| v != 0.0) {
                eval_group(x, t, rows)
            } else {
                eval_group(y, t, rows)
            }
        }
    }
}

fn aggregate(k: AggKind, args: &[Bound], t: &Table, rows: &[usize]) -> Option<f64> {
    if k == AggKind::Count && args.is_empty() {
        return Some(rows.len() as f64);
    }
    if k == AggKind::Corr {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &r in rows {
            if let (Some(x), Some(y)) = (eval_row(&args[0], t, r), eval_row(&args[1], t, r)) {
                xs.push(x);
                ys.push(y);
            }
        }
        return math::pearson(&xs, &ys);
    }
    let vals: Vec<f64> = rows.iter().filter_map(|&r| eval_row(&args[0], t, r)).collect();
    match k {
        AggKind::Count => Some(vals.len() as f64),
        _ if vals.is_empty() => None,
        AggKind::Sum => Some(vals.iter().sum()),
        AggKind::Avg => Some(math::mean(&vals)),
        AggKind::Stddev => (vals.len() > 1).then(|| math::std_sample(&vals)),
        AggKind::Corr => unreachable!(),
    }
}

#[derive(Clone, PartialEq)]
struct Key(Vec<Option<f64>>);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Nulls sort first; numbers by total order.
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            let o = match (a, b) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(x), Some(y)) => x.total_cmp(y),
            };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    }
}

pub(crate) fn execute_resolved(q: &Query, t: &Table, row_cap: usize) -> ResultTable {
    let items: Vec<Bound> = q.select.iter().map(|i| bind(&i.expr, t)).collect();
    let filter = q.filter.as_ref().map(|f| bind(f, t));
    let rows: Vec<usize> = (0..t.rows())
        .filter(|&r| filter.as_ref().is_none_or(|f| eval_row(f, t, r).is_some_and(|v| v != 0.0)))
        .collect();
    let columns = q.select.iter().map(|i| i.output_name()).collect();
    let aggregated = !q.group_by.is_empty() || q.select.iter().any(|i| i.expr.has_aggregate());

    let mut out: Vec<Vec<Option<f64>>> = Vec::new();
    let total_rows;
    if !aggregated {
        total_rows = rows.len();
        for &r in rows.iter().take(row_cap) {
            out.push(items.iter().map(|e| eval_row(e, t, r)).collect());
        }
    } else if q.group_by.is_empty() {
        total_rows = 1;
        out.push(items.iter().map(|e| eval_group(e, t, &rows)).collect());
    } else {
        let keys: Vec<usize> = q
            .group_by
            .iter()
            .map(|g| t.column_index(g).expect("resolved before execution"))
            .collect();
        let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
        for &r in &rows {
            let k = Key(keys.iter().map(|c| t.columns()[*c].values[r]).collect());
            groups.entry(k).or_default().push(r);
        }
        total_rows = groups.len();
        for members in groups.values().take(row_cap) {
            out.push(items.iter().map(|e| eval_group(e, t, members)).collect());
        }
    }
    ResultTable {
        columns,
        truncated: total_rows > out.len(),
        rows: out,
        total_rows,
    }
}
