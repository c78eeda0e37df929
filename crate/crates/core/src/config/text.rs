//! Canonical `path = value` text form.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::schema::{path_type, PathType};
use super::{validate_config, Activation, Block, Config, ConfigError, Entries, Value};

/// Parses canonical config text. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut entries = Entries::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (path, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: "expected `path = value`".into(),
        })?;
        let path = path.trim();
        let value = value.trim();
        let ty = path_type(path).ok_or_else(|| ConfigError::UnknownPathAt {
            line,
            path: path.to_owned(),
        })?;
        let parsed = parse_value(ty, value).map_err(|message| ConfigError::Syntax {
            line,
            message: format!("`{path}`: {message}"),
        })?;
        if entries.insert(path.to_owned(), parsed).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                path: path.to_owned(),
            });
        }
    }
    let config = Config::from_entries(&entries)?;
    let report = validate_config(&config);
    match report.violations.into_iter().next() {
        Some(v) => Err(ConfigError::Invalid {
            path: v.path,
            rule: v.rule,
        }),
        None => Ok(config),
    }
}

/// One line per path, sorted by path, floats in shortest round-trip form.
pub fn serialize_config(c: &Config) -> String {
    let mut out = String::new();
    for (path, value) in c.entries() {
        let _ = writeln!(out, "{path} = {value}");
    }
    out
}

pub(crate) fn parse_value(ty: PathType, text: &str) -> Result<Value, String> {
    match ty {
        PathType::Float => parse_float(text).map(Value::Float),
        PathType::Int => text
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("expected integer, got `{text}`")),
        PathType::Word(allowed) => {
            if allowed.contains(&text) {
                Ok(Value::Word(text.to_owned()))
            } else {
                Err(format!("expected one of {}, got `{text}`", allowed.join("|")))
            }
        }
        PathType::Blocks => parse_blocks(text).map(Value::Blocks),
    }
}

fn parse_float(text: &str) -> Result<f64, String> {
    let is_numeric = !text.is_empty()
        && text
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match text.parse::<f64>() {
        Ok(v) if is_numeric => Ok(v),
        _ => Err(format!("expected number, got `{text}`")),
    }
}

pub fn render_blocks(blocks: &[Block]) -> String {
    let mut out = String::from("[");
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match b {
            Block::Dense { units, activation } => {
                let _ = write!(out, "dense({units}, {})", activation.as_str());
            }
            Block::GluGate { units } => {
                let _ = write!(out, "glu_gate({units})");
            }
            Block::LayerNorm => out.push_str("layer_norm"),
        }
    }
    out.push(']');
    out
}

/// Parses `[dense(16, relu), glu_gate(8), layer_norm]`.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, String> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("expected `[block, ...]`, got `{text}`"))?;
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.checked_sub(1).ok_or("unbalanced `)`")?,
            ',' if depth == 0 => {
                items.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err("unbalanced `(`".into());
    }
    let last = &inner[start..];
    if !last.trim().is_empty() || !items.is_empty() {
        items.push(last);
    }
    items.into_iter().map(|s| parse_block(s.trim())).collect()
}

fn parse_block(s: &str) -> Result<Block, String> {
    if s == "layer_norm" {
        return Ok(Block::LayerNorm);
    }
    let (name, args) = s
        .split_once('(')
        .and_then(|(n, rest)| rest.strip_suffix(')').map(|a| (n.trim(), a)))
        .ok_or_else(|| format!("unrecognized block `{s}`"))?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let units = |a: &str| {
        a.parse::<u32>()
            .map_err(|_| format!("block units must be a non-negative integer, got `{a}`"))
    };
    match (name, args.as_slice()) {
        ("dense", [u, act]) => Ok(Block::Dense {
            units: units(u)?,
            activation: Activation::from_name(act)
                .ok_or_else(|| format!("unknown activation `{act}`"))?,
        }),
        ("glu_gate", [u]) => Ok(Block::GluGate { units: units(u)? }),
        _ => Err(format!("unrecognized block `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{presets, OptimizerKind};
    use alloc::string::ToString;

    const ADAGRAD: &str = "\
architecture.blocks = [dense(1, linear)]
optimizer.epsilon = 1e-7
optimizer.kind = adagrad
optimizer.learning_rate = 0.1
reward.click.transform = identity
reward.click.weight = 1.0
training.batch_size = 64
training.epochs = 2
training.seed = 0
";

    #[test]
    fn parse_maps_fields() {
        let c = parse_config(ADAGRAD).unwrap();
        assert_eq!(c.optimizer.kind, OptimizerKind::Adagrad);
        assert_eq!(c.optimizer.learning_rate, 0.1);
        assert_eq!(c, presets::adagrad_linear());
    }

    #[test]
    fn serialize_is_sorted_and_canonical() {
        let text = serialize_config(&presets::adagrad_linear());
        assert_eq!(text, ADAGRAD);
        let kind = text.find("optimizer.kind = adagrad").unwrap();
        let lr = text.find("optimizer.learning_rate = 0.1").unwrap();
        assert!(kind < lr);
    }

    #[test]
    fn empty_text_names_optimizer() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err.to_string(), "missing required section: optimizer");
    }

    #[test]
    fn negative_learning_rate() {
        let text = ADAGRAD.replace("learning_rate = 0.1", "learning_rate = -1.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("learning_rate must be positive"), "{err}");
    }

    #[test]
    fn errors_name_line_and_path() {
        let text = ADAGRAD.replace("optimizer.kind = adagrad", "optimizer.knd = adagrad");
        assert_eq!(
            parse_config(&text).unwrap_err(),
            ConfigError::UnknownPathAt { line: 3, path: "optimizer.knd".into() }
        );
        let text = ADAGRAD.replace("training.epochs = 2", "training.epochs = four");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.starts_with("line 8:") && err.contains("training.epochs"), "{err}");
    }

    #[test]
    fn blocks_round_trip() {
        let text = "[dense(16, relu), glu_gate(8), layer_norm]";
        let blocks = parse_blocks(text).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(render_blocks(&blocks), text);
        assert_eq!(parse_blocks("[]").unwrap(), Vec::new());
        assert!(parse_blocks("[dense(4)]").is_err());
        assert!(parse_blocks("dense(4, relu)").is_err());
    }

    #[test]
    fn float_rendering_round_trips() {
        for x in [0.1, 1.0, 1e-7, 123456.789, 0.9, 3e20] {
            let text = alloc::format!("{x:?}");
            assert_eq!(parse_float(&text).unwrap(), x);
        }
        assert!(parse_float("nan").is_err());
        assert!(parse_float("inf").is_err());
    }
}
