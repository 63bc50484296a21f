//! Output plumbing: canonical JSON emission, plain-text rendering, and the
//! exit-code taxonomy. Reports are accumulated fully before printing so an
//! error never leaves partial output behind.

use hecke_core::{CountsCache, EnumStats, HeckeError};
use serde::Serialize;
use serde_json::Value;

/// Exit codes, documented in the README:
/// 0 success, 1 I/O or internal, 2 usage or parse, 3 budget exceeded,
/// 4 precision exhausted, 5 depth unstable, 6 structural invariant violated,
/// 10 verification failures.
pub const EXIT_VERIFICATION_FAILED: i32 = 10;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(he) = err.downcast_ref::<HeckeError>() {
        return match he {
            HeckeError::InvalidParameter(_) => 2,
            HeckeError::BudgetExceeded(_) => 3,
            HeckeError::PrecisionStarved(_) => 4,
            HeckeError::DepthUnstable(_) => 5,
            HeckeError::Structural(_) => 6,
            HeckeError::Cache(_) => 1,
        };
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return 2;
    }
    1
}

/// Enumeration totals plus cache traffic, reported with every computation.
#[derive(Serialize, Default, Clone, Copy)]
pub struct StatsEcho {
    pub cosets_visited: u64,
    pub evaluation_points: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_corrupted: u64,
}

impl StatsEcho {
    pub fn absorb(&mut self, stats: &EnumStats) {
        self.cosets_visited += stats.cosets_visited;
        self.evaluation_points += stats.evaluation_points;
    }

    pub fn absorb_cache(&mut self, cache: &Option<CountsCache>) {
        if let Some(c) = cache {
            self.cache_hits = c.hits;
            self.cache_misses = c.misses;
            self.cache_corrupted = c.corrupted;
            if c.corrupted > 0 {
                eprintln!(
                    "warning: ignored {} corrupted cache record(s); recomputed",
                    c.corrupted
                );
            }
        }
    }
}

/// Serialize with keys in canonical (sorted) order and a trailing newline;
/// two runs with the same config and seed produce identical bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let v: Value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Plain-text rendering: one "path: value" line per scalar leaf, arrays of
/// scalars inline. Meant for eyes, not machines.
pub fn to_table_text(value: &Value) -> String {
    let mut out = String::new();
    render(value, "", &mut out);
    out
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn render(v: &Value, path: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                render(val, &sub, out);
            }
        }
        Value::Array(items) if items.iter().all(is_scalar) => {
            let rendered: Vec<String> = items.iter().map(render_scalar).collect();
            out.push_str(&format!("{path} = [{}]\n", rendered.join(", ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                render(item, &format!("{path}[{i}]"), out);
            }
        }
        _ => out.push_str(&format!("{path} = {}\n", render_scalar(v))),
    }
}

fn render_scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
