//! `ctrlk`: batch validation and computation on ctrlk/1 documents.

mod commands;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use ctrlk_core::doc::{canonical_json, Document};

use commands::{LocalizeOp, SpaceOp, TriangularOp, ValidateArgs};
use report::{CliError, Report, Status};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser)]
#[command(name = "ctrlk", version, about = "Exact controlled algebra workbench")]
struct Cli {
    /// Report format; json is canonical (sorted keys).
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write the produced document here instead of embedding it in the report.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a document against the definitions for its kind.
    Validate {
        path: PathBuf,
        /// Expected document kind.
        #[arg(long)]
        kind: Option<String>,
        /// Scale for controlled checks; overrides the document.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Orders document replacing the certificates of a K1 simplex.
        #[arg(long)]
        orders: Option<PathBuf>,
    },
    /// Fold a strict contractible complex into two degrees.
    Fold { path: PathBuf },
    /// Find a triangularizing order for a Volodin path.
    Volodin {
        path: PathBuf,
        /// Replace a plus-minus path by a mode-one path.
        #[arg(long)]
        fix_signs: bool,
        /// Require identity end matrices when fixing signs.
        #[arg(long = "loop")]
        require_loop: bool,
    },
    /// Barycentric geometric cellular chains of a simplicial complex.
    Cellular {
        path: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Enlargements, reductions, frontier reach and excision in a control space.
    #[command(group(ArgGroup::new("op").required(true).args(["enlarge", "reduce", "frontier", "excise"])))]
    Space {
        path: PathBuf,
        /// Y^eps for a comma-separated Y.
        #[arg(long, num_args = 2, value_names = ["SET", "EPS"], allow_hyphen_values = true)]
        enlarge: Option<Vec<String>>,
        /// Y^-eps for a comma-separated Y.
        #[arg(long, num_args = 2, value_names = ["SET", "EPS"], allow_hyphen_values = true)]
        reduce: Option<Vec<String>>,
        /// Fr^eps.
        #[arg(long, value_name = "EPS")]
        frontier: Option<String>,
        /// Check the excision identity for a comma-separated open U.
        #[arg(long, num_args = 2, value_names = ["SET", "EPS"], allow_hyphen_values = true)]
        excise: Option<Vec<String>>,
    },
    /// Triangular morphism calculus.
    Triangular {
        #[arg(value_enum)]
        op: TriOp,
        path: PathBuf,
    },
    /// Support splitting and unipotent factorization of geometric morphisms.
    Localize {
        #[arg(value_enum)]
        op: LocOp,
        path: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Print a document in canonical form.
    Fmt { path: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TriOp {
    Decompose,
    Invert,
    Factor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LocOp {
    Split,
    Unipotent,
}

fn load(path: &Path) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::malformed(format!("cannot read {}: {e}", path.display())))?;
    Ok(Document::parse(&text)?)
}

fn pair(v: Vec<String>) -> (String, String) {
    let mut it = v.into_iter();
    (it.next().unwrap_or_default(), it.next().unwrap_or_default())
}

fn run(command: Command, rep: &mut Report) -> Result<(), CliError> {
    match command {
        Command::Validate { path, kind, epsilon, orders } => {
            let doc = load(&path)?;
            let orders = orders.map(|p| load(&p)).transpose()?;
            commands::validate(rep, doc, ValidateArgs { kind, epsilon, orders })
        }
        Command::Fold { path } => commands::fold(rep, load(&path)?),
        Command::Volodin { path, fix_signs, require_loop } => commands::volodin(rep, load(&path)?, fix_signs, require_loop),
        Command::Cellular { path, epsilon } => commands::cellular(rep, load(&path)?, epsilon),
        Command::Space { path, enlarge, reduce, frontier, excise } => {
            let op = if let Some(v) = enlarge {
                let (a, b) = pair(v);
                SpaceOp::Enlarge(a, b)
            } else if let Some(v) = reduce {
                let (a, b) = pair(v);
                SpaceOp::Reduce(a, b)
            } else if let Some(e) = frontier {
                SpaceOp::Frontier(e)
            } else if let Some(v) = excise {
                let (a, b) = pair(v);
                SpaceOp::Excise(a, b)
            } else {
                return Err(CliError::malformed("no space operation given"));
            };
            commands::space(rep, load(&path)?, op)
        }
        Command::Triangular { op, path } => {
            let op = match op {
                TriOp::Decompose => TriangularOp::Decompose,
                TriOp::Invert => TriangularOp::Invert,
                TriOp::Factor => TriangularOp::Factor,
            };
            commands::triangular(rep, load(&path)?, op)
        }
        Command::Localize { op, path, epsilon } => {
            let op = match op {
                LocOp::Split => LocalizeOp::Split,
                LocOp::Unipotent => LocalizeOp::Unipotent,
            };
            commands::localize(rep, load(&path)?, op, epsilon)
        }
        Command::Fmt { path } => commands::fmt(rep, load(&path)?),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Fold { .. } => "fold",
        Command::Volodin { .. } => "volodin",
        Command::Cellular { .. } => "cellular",
        Command::Space { .. } => "space",
        Command::Triangular { .. } => "triangular",
        Command::Localize { .. } => "localize",
        Command::Fmt { .. } => "fmt",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut rep = Report::new(command_name(&cli.command));
    let result = run(cli.command, &mut rep);
    rep = match result {
        Ok(()) => rep.finish(),
        Err(e) => rep.fail(e),
    };
    if let Some(path) = &cli.output {
        if let Some(out) = rep.output.take() {
            if let Err(e) = std::fs::write(path, canonical_json(&out)) {
                rep = rep.fail(CliError::malformed(format!("cannot write {}: {e}", path.display())));
            }
        }
    }
    let text = match cli.format {
        Format::Json => rep.to_json(),
        Format::Text => {
            let mut t = rep.to_text();
            if let Some(out) = &rep.output {
                t.push_str(&canonical_json(out));
            }
            t
        }
    };
    // a closed pipe is not an error of the command
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    if rep.status == Status::Error {
        if let Some(e) = &rep.error {
            eprintln!("ctrlk: {e}");
        }
    }
    ExitCode::from(rep.status.exit_code() as u8)
}
