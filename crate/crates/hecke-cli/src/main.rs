//! `hecke`: command-line workbench for spherical Hecke algebras with Z/p^a
//! coefficients. Computes classical and derived transforms, convolution
//! products, and basis tables, and drives the named verification suites.
//!
//! Output is a single JSON document (or a plain-text rendering with
//! `--format table`), printed only after the whole computation succeeds, so
//! an error never leaves partial output behind.

mod cache_cmd;
mod config;
mod report;
mod verify;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hecke_core::{
    convolve0, convolve_mixed, derived_satake1_all, satake0, Cocharacter, HeckeElem0, HeckeElem1,
    HeckeError, Ring, RootDatum, Satake1Value, Side, TorusDHAElem, TorusElem0,
};
use serde::Serialize;

use config::{parse_key, Format, RunArgs};
use report::{to_canonical_json, to_table_text, StatsEcho, EXIT_VERIFICATION_FAILED};
use verify::Suite;

#[derive(Parser)]
#[command(
    name = "hecke",
    version,
    about = "Spherical Hecke algebras of split p-adic groups with Z/p^a coefficients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Classical transform of a degree-zero element into the torus algebra.
    Satake0(ElementInput),
    /// Derived transform of a degree-one element (rank-one groups).
    Satake1(ElementInput),
    /// Convolution product of two elements; use --mixed when one has degree one.
    Convolve(ConvolveArgs),
    /// Transform every basis class in an antidominant box.
    Table(TableArgs),
    /// Run a named verification suite and report per-check results.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Inspect or empty the on-disk enumeration cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
enum RingArg {
    /// Integer coefficients.
    Int,
    /// Coefficients in Z/p^a (a from --a).
    Mod,
}

impl RingArg {
    fn ring(self, a: u32) -> Ring {
        match self {
            RingArg::Int => Ring::Int,
            RingArg::Mod => Ring::ZmodPa { a },
        }
    }
}

#[derive(clap::Args)]
struct ElementInput {
    /// Basis class as comma-separated coordinates, e.g. "-2,0"; needs --group.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["element", "element_file"])]
    cell: Option<String>,

    /// Element as inline JSON.
    #[arg(long, conflicts_with = "element_file")]
    element: Option<String>,

    /// Path to element JSON, or "-" for stdin.
    #[arg(long)]
    element_file: Option<PathBuf>,

    /// Coefficient ring when building a degree-zero element from --cell.
    #[arg(long, value_enum, default_value = "mod")]
    ring: RingArg,
}

#[derive(clap::Args)]
struct ConvolveArgs {
    /// First operand as a basis class, e.g. "-1,0".
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["f1", "f1_file"])]
    f1_cell: Option<String>,
    /// First operand as inline JSON.
    #[arg(long, conflicts_with = "f1_file")]
    f1: Option<String>,
    /// Path to first operand JSON, or "-" for stdin.
    #[arg(long)]
    f1_file: Option<PathBuf>,

    /// Second operand as a basis class.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["f2", "f2_file"])]
    f2_cell: Option<String>,
    /// Second operand as inline JSON.
    #[arg(long, conflicts_with = "f2_file")]
    f2: Option<String>,
    /// Path to second operand JSON, or "-" for stdin.
    #[arg(long)]
    f2_file: Option<PathBuf>,

    /// Mixed product: names the degree-one operand; the other must have degree zero.
    #[arg(long, value_enum)]
    mixed: Option<MixedOperand>,

    /// Coefficient ring for operands built from cells.
    #[arg(long, value_enum, default_value = "mod")]
    ring: RingArg,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
enum MixedOperand {
    F1,
    F2,
}

#[derive(clap::Args)]
struct TableArgs {
    /// Box height: classes with coordinate spread up to this bound.
    #[arg(long, default_value_t = 2)]
    height: u32,

    /// Which transform to tabulate.
    #[arg(long, value_enum, default_value = "satake0")]
    kind: TableKind,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
enum TableKind {
    Satake0,
    Satake1,
}

#[derive(Subcommand)]
enum CacheAction {
    /// List cache records with sizes.
    List,
    /// Remove every cache record.
    Clear,
}

/// Uniform envelope for computation commands.
#[derive(Serialize)]
struct CommandOutput<I: Serialize, R: Serialize> {
    command: &'static str,
    config: config::ConfigEcho,
    input: I,
    result: R,
    stats: StatsEcho,
}

#[derive(Serialize)]
struct PairInput<A: Serialize, B: Serialize> {
    f1: A,
    f2: B,
}

#[derive(Serialize)]
struct DerivedResult {
    algebra: TorusDHAElem,
    values: Vec<Satake1Value>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    HeckeError::InvalidParameter(msg.into()).into()
}

fn read_source(inline: &Option<String>, file: &Option<PathBuf>) -> anyhow::Result<Option<String>> {
    match (inline, file) {
        (Some(s), None) => Ok(Some(s.clone())),
        (None, Some(path)) if path.as_os_str() == "-" => {
            Ok(Some(std::io::read_to_string(std::io::stdin())?))
        }
        (None, Some(path)) => Ok(Some(
            std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => unreachable!("clap forbids combining inline and file input"),
    }
}

fn check_group(args: &RunArgs, datum: RootDatum) -> anyhow::Result<()> {
    if args.group.is_some() && args.datum()? != datum {
        return Err(usage(format!(
            "--group disagrees with the element's group {:?}{}",
            datum.family, datum.n
        )));
    }
    Ok(())
}

fn load_elem0(
    cell: &Option<String>,
    inline: &Option<String>,
    file: &Option<PathBuf>,
    ring: RingArg,
    args: &RunArgs,
) -> anyhow::Result<HeckeElem0> {
    if let Some(cell) = cell {
        let datum = args.datum()?;
        let key = parse_key(cell)?;
        return Ok(HeckeElem0::basis(datum, args.p, ring.ring(args.a), Cocharacter(key))?);
    }
    match read_source(inline, file)? {
        Some(text) => {
            let f: HeckeElem0 = serde_json::from_str(&text)?;
            check_group(args, f.datum)?;
            Ok(f)
        }
        None => Err(usage("give the element via --cell, --element, or --element-file")),
    }
}

fn load_elem1(
    cell: &Option<String>,
    inline: &Option<String>,
    file: &Option<PathBuf>,
    args: &RunArgs,
) -> anyhow::Result<HeckeElem1> {
    if let Some(cell) = cell {
        let datum = args.datum()?;
        let key = parse_key(cell)?;
        let depth = key.iter().map(|x| x.unsigned_abs() as u32).max().unwrap_or(0);
        let ctx = args.ctx(depth)?;
        return Ok(HeckeElem1::basis(datum, ctx, Cocharacter(key))?);
    }
    match read_source(inline, file)? {
        Some(text) => {
            let f: HeckeElem1 = serde_json::from_str(&text)?;
            check_group(args, f.datum)?;
            Ok(f)
        }
        None => Err(usage("give the element via --cell, --element, or --element-file")),
    }
}

fn emit<T: Serialize>(value: &T, format: Format) -> anyhow::Result<String> {
    match format {
        Format::Json => to_canonical_json(value),
        Format::Table => Ok(to_table_text(&serde_json::to_value(value)?)),
    }
}

fn cmd_satake0(input: &ElementInput, args: &RunArgs) -> anyhow::Result<String> {
    let f = load_elem0(&input.cell, &input.element, &input.element_file, input.ring, args)?;
    let mut cache = args.cache()?;
    let (result, enum_stats) = satake0(&f, cache.as_mut(), &args.opts())?;
    let mut stats = StatsEcho::default();
    stats.absorb(&enum_stats);
    stats.absorb_cache(&cache);
    let out = CommandOutput { command: "satake0", config: args.echo(), input: f, result, stats };
    emit(&out, args.format)
}

fn cmd_satake1(input: &ElementInput, args: &RunArgs) -> anyhow::Result<String> {
    let f = load_elem1(&input.cell, &input.element, &input.element_file, args)?;
    let (algebra, values) = derived_satake1_all(&f, &args.opts())?;
    let out = CommandOutput {
        command: "satake1",
        config: args.echo(),
        input: f,
        result: DerivedResult { algebra, values },
        stats: StatsEcho::default(),
    };
    emit(&out, args.format)
}

fn cmd_convolve(cargs: &ConvolveArgs, args: &RunArgs) -> anyhow::Result<String> {
    match cargs.mixed {
        None => {
            let f1 = load_elem0(&cargs.f1_cell, &cargs.f1, &cargs.f1_file, cargs.ring, args)?;
            let f2 = load_elem0(&cargs.f2_cell, &cargs.f2, &cargs.f2_file, cargs.ring, args)?;
            let result = convolve0(&f1, &f2, &args.opts())?;
            let out = CommandOutput {
                command: "convolve",
                config: args.echo(),
                input: PairInput { f1, f2 },
                result,
                stats: StatsEcho::default(),
            };
            emit(&out, args.format)
        }
        Some(which) => {
            // The degree-zero factor keeps its operand position: t∘f when the
            // degree-one element is f2, f∘t when it is f1.
            let (t, f, side) = match which {
                MixedOperand::F2 => (
                    load_elem0(&cargs.f1_cell, &cargs.f1, &cargs.f1_file, cargs.ring, args)?,
                    load_elem1(&cargs.f2_cell, &cargs.f2, &cargs.f2_file, args)?,
                    Side::Left,
                ),
                MixedOperand::F1 => (
                    load_elem0(&cargs.f2_cell, &cargs.f2, &cargs.f2_file, cargs.ring, args)?,
                    load_elem1(&cargs.f1_cell, &cargs.f1, &cargs.f1_file, args)?,
                    Side::Right,
                ),
            };
            let (result, enum_stats) = convolve_mixed(&t, &f, side, &args.opts())?;
            let mut stats = StatsEcho::default();
            stats.absorb(&enum_stats);
            let input = match which {
                MixedOperand::F2 => PairInput {
                    f1: serde_json::to_value(&t)?,
                    f2: serde_json::to_value(&f)?,
                },
                MixedOperand::F1 => PairInput {
                    f1: serde_json::to_value(&f)?,
                    f2: serde_json::to_value(&t)?,
                },
            };
            let out = CommandOutput {
                command: "convolve",
                config: args.echo(),
                input,
                result,
                stats,
            };
            emit(&out, args.format)
        }
    }
}

#[derive(Serialize)]
struct Table0Entry {
    cell: Vec<i64>,
    transform: TorusElem0,
}

#[derive(Serialize)]
struct Table1Entry {
    cell: Vec<i64>,
    algebra: TorusDHAElem,
    values: Vec<Satake1Value>,
}

#[derive(Serialize)]
struct TableInput {
    height: u32,
    kind: String,
}

fn cmd_table(targs: &TableArgs, args: &RunArgs) -> anyhow::Result<String> {
    let datum = args.datum()?;
    let cells = datum.antidominant_box(targs.height);
    let mut stats = StatsEcho::default();
    let mut cache = args.cache()?;
    let input = TableInput {
        height: targs.height,
        kind: match targs.kind {
            TableKind::Satake0 => "satake0".into(),
            TableKind::Satake1 => "satake1".into(),
        },
    };
    let text = match targs.kind {
        TableKind::Satake0 => {
            let mut entries = Vec::new();
            for cell in cells {
                let t = HeckeElem0::basis(datum, args.p, args.ring(), cell.clone())?;
                let (transform, enum_stats) = satake0(&t, cache.as_mut(), &args.opts())?;
                stats.absorb(&enum_stats);
                entries.push(Table0Entry { cell: cell.0, transform });
            }
            stats.absorb_cache(&cache);
            let out = CommandOutput {
                command: "table",
                config: args.echo(),
                input,
                result: entries,
                stats,
            };
            emit(&out, args.format)?
        }
        TableKind::Satake1 => {
            let ctx = args.ctx(targs.height)?;
            // Degree-one classes exist only from depth two; shallower box
            // cells carry nothing to tabulate.
            let cells: Vec<_> = cells
                .into_iter()
                .filter(|c| c.0.len() != 2 || c.0[1] - c.0[0] >= 2)
                .collect();
            let mut entries = Vec::new();
            for cell in cells {
                let f = HeckeElem1::basis(datum, ctx, cell.clone())?;
                let (algebra, values) = derived_satake1_all(&f, &args.opts())?;
                entries.push(Table1Entry { cell: cell.0, algebra, values });
            }
            let out = CommandOutput {
                command: "table",
                config: args.echo(),
                input,
                result: entries,
                stats,
            };
            emit(&out, args.format)?
        }
    };
    Ok(text)
}

fn cmd_verify(suite: Suite, args: &RunArgs) -> anyhow::Result<(String, i32)> {
    let report = verify::run_suite(suite, args)?;
    let text = emit(&report, args.format)?;
    Ok((text, if report.ok { 0 } else { EXIT_VERIFICATION_FAILED }))
}

fn cmd_cache(action: &CacheAction, args: &RunArgs) -> anyhow::Result<String> {
    let dir = args
        .cache_dir
        .as_ref()
        .ok_or_else(|| usage("cache commands need --cache-dir (or HECKE_CACHE_DIR)"))?;
    // Ensure the directory exists so listing an empty cache succeeds.
    let _ = args.cache()?;
    match action {
        CacheAction::List => emit(&cache_cmd::list(dir)?, args.format),
        CacheAction::Clear => emit(&cache_cmd::clear(dir)?, args.format),
    }
}

fn run(cli: &Cli) -> anyhow::Result<(String, i32)> {
    let args = &cli.run;
    match &cli.command {
        Command::Satake0(input) => Ok((cmd_satake0(input, args)?, 0)),
        Command::Satake1(input) => Ok((cmd_satake1(input, args)?, 0)),
        Command::Convolve(cargs) => Ok((cmd_convolve(cargs, args)?, 0)),
        Command::Table(targs) => Ok((cmd_table(targs, args)?, 0)),
        Command::Verify { suite } => cmd_verify(*suite, args),
        Command::Cache { action } => Ok((cmd_cache(action, args)?, 0)),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, code)) => {
            let mut stdout = std::io::stdout();
            stdout.write_all(text.as_bytes()).expect("stdout");
            stdout.flush().expect("stdout flush");
            std::process::exit(code);
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(report::exit_code(&err));
        }
    }
}
