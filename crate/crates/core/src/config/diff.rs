//! Structured deltas against a configuration.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{path_type, removal_default, PathType};
use super::text::{parse_blocks, parse_value, render_blocks};
use super::{validate_config, Config, ConfigError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Set,
    Remove,
}

/// A literal as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Text(s) => f.write_str(s),
        }
    }
}

impl From<&Value> for Literal {
    fn from(v: &Value) -> Self {
        match v {
            Value::Int(i) => Literal::Int(*i),
            Value::Float(x) => Literal::Float(*x),
            Value::Word(w) => Literal::Text(w.clone()),
            Value::Blocks(b) => Literal::Text(render_blocks(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffOp {
    pub op: OpKind,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Literal>,
}

impl DiffOp {
    pub fn set(path: impl Into<String>, value: Literal) -> Self {
        Self {
            op: OpKind::Set,
            path: path.into(),
            value: Some(value),
        }
    }

    pub fn remove(path: impl Into<String>) -> Self {
        Self {
            op: OpKind::Remove,
            path: path.into(),
            value: None,
        }
    }
}

/// Ordered list of ops. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diff {
    pub ops: Vec<DiffOp>,
}

impl Diff {
    pub fn new(ops: Vec<DiffOp>) -> Self {
        Self { ops }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Line-per-op rendering used in journals and prompts.
    pub fn render(&self) -> String {
        if self.ops.is_empty() {
            return "(baseline)".into();
        }
        let mut out = String::new();
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            match (&op.op, &op.value) {
                (OpKind::Set, Some(v)) => out.push_str(&format!("set {} = {v}", op.path)),
                _ => out.push_str(&format!("remove {}", op.path)),
            }
        }
        out
    }

    /// Inverse of [`Diff::render`] for paths in the schema.
    pub fn parse_rendered(text: &str) -> Result<Diff, String> {
        let text = text.trim();
        if text == "(baseline)" || text.is_empty() {
            return Ok(Diff::default());
        }
        let mut ops = Vec::new();
        for part in text.split("; ") {
            let part = part.trim();
            if let Some(path) = part.strip_prefix("remove ") {
                ops.push(DiffOp::remove(path.trim()));
                continue;
            }
            let rest = part
                .strip_prefix("set ")
                .ok_or_else(|| format!("expected `set` or `remove`, got `{part}`"))?;
            let (path, value) = rest
                .split_once(" = ")
                .ok_or_else(|| format!("expected `path = value`, got `{rest}`"))?;
            let ty = path_type(path).ok_or_else(|| format!("unknown path `{path}`"))?;
            let v = parse_value(ty, value.trim())?;
            ops.push(DiffOp::set(path, Literal::from(&v)));
        }
        Ok(Diff { ops })
    }
}

/// Converts a wire literal into the value type the path stores. Ints widen
/// to floats; everything else must match exactly.
pub(crate) fn coerce(path: &str, ty: PathType, lit: &Literal) -> Result<Value, ConfigError> {
    let mismatch = || ConfigError::TypeMismatch {
        path: path.to_owned(),
        expected: ty.describe(),
        got: format!("{lit}"),
    };
    match (ty, lit) {
        (PathType::Float, Literal::Float(x)) => Ok(Value::Float(*x)),
        (PathType::Float, Literal::Int(i)) => Ok(Value::Float(*i as f64)),
        (PathType::Int, Literal::Int(i)) => Ok(Value::Int(*i)),
        (PathType::Word(_), Literal::Text(s)) => parse_value(ty, s).map_err(|_| mismatch()),
        (PathType::Blocks, Literal::Text(s)) => {
            parse_blocks(s).map(Value::Blocks).map_err(|_| mismatch())
        }
        _ => Err(mismatch()),
    }
}

/// Applies `d` to `c`. Either every op applies and the result validates, or
/// the error is returned and nothing changes.
pub fn apply_diff(c: &Config, d: &Diff) -> Result<Config, ConfigError> {
    let mut entries = c.entries();
    for op in &d.ops {
        let ty = path_type(&op.path).ok_or_else(|| ConfigError::UnknownPath(op.path.clone()))?;
        match (op.op, &op.value) {
            (OpKind::Set, Some(lit)) => {
                let v = coerce(&op.path, ty, lit)?;
                entries.insert(op.path.clone(), v);
            }
            (OpKind::Set, None) => {
                return Err(ConfigError::MalformedOp {
                    path: op.path.clone(),
                    message: "set requires a value",
                })
            }
            (OpKind::Remove, Some(_)) => {
                return Err(ConfigError::MalformedOp {
                    path: op.path.clone(),
                    message: "remove takes no value",
                })
            }
            (OpKind::Remove, None) => match removal_default(&op.path) {
                Some(Some(default)) => {
                    entries.insert(op.path.clone(), default);
                }
                Some(None) => {
                    entries.remove(&op.path);
                    // A weight without its transform is incomplete the other way round.
                    if let Some(prefix) = op.path.strip_suffix(".weight") {
                        entries.remove(&format!("{prefix}.transform"));
                    }
                }
                None => return Err(ConfigError::NotRemovable(op.path.clone())),
            },
        }
    }
    let next = Config::from_entries(&entries)?;
    let report = validate_config(&next);
    match report.violations.into_iter().next() {
        Some(v) => Err(ConfigError::Invalid {
            path: v.path,
            rule: v.rule,
        }),
        None => Ok(next),
    }
}

/// Minimal diff taking `a` to `b`: one op per differing path, in path order.
pub fn diff_configs(a: &Config, b: &Config) -> Diff {
    let ea = a.entries();
    let eb = b.entries();
    let mut paths: Vec<&String> = ea.keys().chain(eb.keys()).collect();
    paths.sort();
    paths.dedup();
    let mut ops = Vec::new();
    for p in paths {
        match (ea.get(p), eb.get(p)) {
            (Some(x), Some(y)) if x == y => {}
            (_, Some(y)) => ops.push(DiffOp::set(p.clone(), Literal::from(y))),
            (Some(_), None) => ops.push(DiffOp::remove(p.clone())),
            (None, None) => {}
        }
    }
    Diff { ops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{presets, serialize_config, OptimizerKind};
    use alloc::vec;

    fn rmsprop_diff() -> Diff {
        Diff::new(vec![
            DiffOp::set("optimizer.kind", Literal::Text("rmsprop".into())),
            DiffOp::set("optimizer.decay", Literal::Float(0.9)),
            DiffOp::set("optimizer.momentum", Literal::Float(0.0)),
        ])
    }

    #[test]
    fn rendered_form_parses_back() {
        let mut d = rmsprop_diff();
        d.ops.push(DiffOp::set("architecture.blocks", Literal::Text("[dense(16, relu), glu_gate(8)]".into())));
        d.ops.push(DiffOp::set("training.epochs", Literal::Int(3)));
        d.ops.push(DiffOp::remove("reward.click.weight"));
        assert_eq!(Diff::parse_rendered(&d.render()).unwrap(), d);
        assert_eq!(Diff::parse_rendered("(baseline)").unwrap(), Diff::default());
        assert!(Diff::parse_rendered("set optimzer.lr = 1").is_err());
    }

    #[test]
    fn adagrad_to_rmsprop() {
        let base = presets::adagrad_linear();
        let next = apply_diff(&base, &rmsprop_diff()).unwrap();
        assert_eq!(next.optimizer.kind, OptimizerKind::Rmsprop);
        assert_eq!(next.optimizer.decay, Some(0.9));
        assert_eq!(next.optimizer.momentum, Some(0.0));
        assert_eq!(base, presets::adagrad_linear());
    }

    #[test]
    fn empty_diff_is_identity() {
        let base = presets::adagrad_linear();
        assert_eq!(apply_diff(&base, &Diff::default()).unwrap(), base);
    }

    #[test]
    fn unknown_path_is_atomic() {
        let base = presets::adagrad_linear();
        let d = Diff::new(vec![
            DiffOp::set("optimizer.learning_rate", Literal::Float(0.5)),
            DiffOp::set("optimzer.lr", Literal::Float(0.5)),
        ]);
        assert_eq!(
            apply_diff(&base, &d).unwrap_err(),
            ConfigError::UnknownPath("optimzer.lr".into())
        );
        assert_eq!(base.optimizer.learning_rate, 0.1);
    }

    #[test]
    fn invalid_result_is_rejected() {
        let base = presets::adagrad_linear();
        let d = Diff::new(vec![DiffOp::set("optimizer.kind", Literal::Text("rmsprop".into()))]);
        let err = apply_diff(&base, &d).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }), "{err}");
    }

    #[test]
    fn remove_semantics() {
        let base = presets::adagrad_linear();
        let d = Diff::new(vec![DiffOp::remove("optimizer.kind")]);
        assert_eq!(apply_diff(&base, &d).unwrap_err(), ConfigError::NotRemovable("optimizer.kind".into()));
        let mut seeded = base.clone();
        seeded.training.seed = 7;
        let back = apply_diff(&seeded, &Diff::new(vec![DiffOp::remove("training.seed")])).unwrap();
        assert_eq!(back.training.seed, 0);
    }

    #[test]
    fn type_mismatch() {
        let base = presets::adagrad_linear();
        let d = Diff::new(vec![DiffOp::set("optimizer.learning_rate", Literal::Text("0.05".into()))]);
        assert!(matches!(apply_diff(&base, &d), Err(ConfigError::TypeMismatch { .. })));
        let d = Diff::new(vec![DiffOp::set("training.epochs", Literal::Float(2.5))]);
        assert!(matches!(apply_diff(&base, &d), Err(ConfigError::TypeMismatch { .. })));
    }

    #[test]
    fn diff_minimality() {
        let a = presets::adagrad_linear();
        assert!(diff_configs(&a, &a).is_empty());
        let mut b = a.clone();
        b.optimizer.learning_rate = 0.2;
        let d = diff_configs(&a, &b);
        assert_eq!(d.ops, vec![DiffOp::set("optimizer.learning_rate", Literal::Float(0.2))]);
        let rms = apply_diff(&a, &rmsprop_diff()).unwrap();
        assert_eq!(apply_diff(&rms, &diff_configs(&rms, &a)).unwrap(), a);
        assert_eq!(serialize_config(&apply_diff(&a, &diff_configs(&a, &rms)).unwrap()), serialize_config(&rms));
    }

    #[test]
    fn wire_format() {
        let json = serde_json::to_string(&rmsprop_diff()).unwrap();
        assert_eq!(
            json,
            r#"[{"op":"set","path":"optimizer.kind","value":"rmsprop"},{"op":"set","path":"optimizer.decay","value":0.9},{"op":"set","path":"optimizer.momentum","value":0.0}]"#
        );
        let back: Diff = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rmsprop_diff());
        let extra = r#"[{"op":"remove","path":"optimizer.momentum","why":"x"}]"#;
        assert!(serde_json::from_str::<Diff>(extra).is_err());
    }
}
