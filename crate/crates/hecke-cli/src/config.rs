//! Run configuration shared by every subcommand: group, arithmetic
//! parameters, resource limits, cache location, and output format.

use std::path::PathBuf;

use hecke_core::{
    precision_for, ComputeOpts, CountsCache, Family, HeckeError, PrecisionContext, Ring, RootDatum,
};
use serde::Serialize;

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum Format {
    /// Canonical JSON, byte-stable for fixed config and seed.
    Json,
    /// Plain text for reading at the terminal.
    Table,
}

#[derive(clap::Args, Clone, Debug)]
pub struct RunArgs {
    /// Group: family then rank, e.g. GL2, SL2, PGL3.
    #[arg(long, env = "HECKE_GROUP", global = true)]
    pub group: Option<String>,

    /// The prime p (>= 5).
    #[arg(long, env = "HECKE_P", default_value_t = 5, global = true)]
    pub p: u64,

    /// Coefficient exponent: coefficients live in Z/p^a.
    #[arg(long, env = "HECKE_A", default_value_t = 1, global = true)]
    pub a: u32,

    /// Working p-adic digits; defaults to a value derived from the input's depth.
    #[arg(long, env = "HECKE_PRECISION", global = true)]
    pub precision: Option<u32>,

    /// Enumeration budget in coset visits.
    #[arg(long, env = "HECKE_BUDGET", global = true)]
    pub budget: Option<u64>,

    /// Probe-depth cap for the derived transform.
    #[arg(long, env = "HECKE_DEPTH_MAX", global = true)]
    pub depth_max: Option<u32>,

    /// Widen every enumeration window by this much (stability experiments).
    #[arg(long, env = "HECKE_WINDOW_EXTRA", default_value_t = 0, global = true)]
    pub window_extra: u32,

    /// Directory for the on-disk enumeration cache; omit to run uncached.
    #[arg(long, env = "HECKE_CACHE_DIR", global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Seed for the randomized verification suites.
    #[arg(long, env = "HECKE_SEED", default_value_t = 0, global = true)]
    pub seed: u64,

    /// Output format.
    #[arg(long, env = "HECKE_FORMAT", value_enum, default_value = "json", global = true)]
    pub format: Format,
}

/// The configuration echoed into every report, so a saved output is
/// self-describing and reruns are reproducible.
#[derive(Serialize)]
pub struct ConfigEcho {
    pub group: Option<String>,
    pub p: u64,
    pub a: u32,
    pub precision: Option<u32>,
    pub budget: u64,
    pub depth_max: Option<u32>,
    pub window_extra: u32,
    pub seed: u64,
}

fn usage(msg: String) -> anyhow::Error {
    HeckeError::InvalidParameter(msg).into()
}

pub fn parse_group(s: &str) -> anyhow::Result<RootDatum> {
    let upper = s.to_ascii_uppercase();
    let split = upper.find(|c: char| c.is_ascii_digit()).unwrap_or(upper.len());
    let (fam, digits) = upper.split_at(split);
    let family = match fam {
        "GL" => Family::GL,
        "SL" => Family::SL,
        "PGL" => Family::PGL,
        _ => return Err(usage(format!("unknown group family {fam:?}; expected GL, SL, or PGL"))),
    };
    let n: usize = digits
        .parse()
        .map_err(|_| usage(format!("bad rank in group {s:?}")))?;
    Ok(RootDatum::new(family, n)?)
}

impl RunArgs {
    pub fn datum(&self) -> anyhow::Result<RootDatum> {
        match &self.group {
            Some(g) => parse_group(g),
            None => Err(usage("--group is required (or set HECKE_GROUP)".into())),
        }
    }

    pub fn opts(&self) -> ComputeOpts {
        let mut o = ComputeOpts::default();
        if let Some(b) = self.budget {
            o.budget = b;
        }
        o.window_extra = self.window_extra;
        o.depth_max = self.depth_max;
        o
    }

    /// Precision context: the explicit override if given, otherwise sized
    /// from the deepest class the run will touch.
    pub fn ctx(&self, depth_hint: u32) -> anyhow::Result<PrecisionContext> {
        match self.precision {
            Some(n) => Ok(PrecisionContext::new(self.p, n, self.a)?),
            None => Ok(precision_for(self.p, self.a, depth_hint)?),
        }
    }

    pub fn ring(&self) -> Ring {
        Ring::ZmodPa { a: self.a }
    }

    pub fn cache(&self) -> anyhow::Result<Option<CountsCache>> {
        match &self.cache_dir {
            Some(dir) => Ok(Some(CountsCache::new(dir)?)),
            None => Ok(None),
        }
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            group: self.group.as_ref().map(|g| g.to_ascii_uppercase()),
            p: self.p,
            a: self.a,
            precision: self.precision,
            budget: self.opts().budget,
            depth_max: self.depth_max,
            window_extra: self.window_extra,
            seed: self.seed,
        }
    }
}

/// Parse a comma-separated cocharacter like "-2,0".
pub fn parse_key(s: &str) -> anyhow::Result<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| usage(format!("bad coordinate {t:?} in {s:?}")))
        })
        .collect()
}
