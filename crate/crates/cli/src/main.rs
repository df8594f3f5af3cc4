use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use towerzeta::cache::{Counter, LoadOutcome};
use towerzeta::config::{Config, Format};
use towerzeta::curve::curve_from_id;
use towerzeta::kani_rosen::{compute_tower, render_run, TowerConfig};
use towerzeta::verify::verify_paper;
use towerzeta::zeta::lpoly_from_counts;
use towerzeta::Error;

#[derive(Parser)]
#[command(name = "towerzeta", version, about = "Zeta functions of a tower of curves over F4")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Count cache file.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest 4^k * 2^layers counted for one row.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    g_max_leaf: Option<usize>,
    #[arg(long, global = true, value_parser = ["json", "text"])]
    format: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count degree-one places over F_{4^k}.
    Count {
        id: String,
        #[arg(long)]
        k: u32,
        /// Print rows 1..k instead of the single row.
        #[arg(long)]
        table: bool,
    },
    /// Reconstruct the L-polynomial of a curve of genus g from its counts.
    Lpoly {
        id: String,
        #[arg(long)]
        g: usize,
    },
    /// Compute levels 2..n of the tower.
    Tower {
        #[arg(long)]
        n: u32,
    },
    /// Run the acceptance checks.
    VerifyPaper,
    /// Render factor reports through level n from cached counts.
    Report {
        #[arg(long, default_value_t = 6)]
        n: u32,
    },
}

enum Failure {
    Usage(String),
    Verify(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Lib(e) => match e {
                Error::CountInconsistency(_) | Error::RelationFalsified(_) | Error::NoDecomposition(_) => 1,
                Error::Parse(_) | Error::MalformedShift(_) | Error::Domain(_) | Error::Precondition(_) => 2,
                _ => 3,
            },
        }
    }

    fn object(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::Verify(m) => ("verification_failed", m.clone()),
            Failure::Lib(e) => (e.kind(), e.to_string()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

fn config(cli: &Cli) -> Result<Config, Failure> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    c.apply_env(std::env::vars())?;
    if let Some(p) = &cli.cache {
        c.cache_path = Some(p.clone());
    }
    if let Some(t) = cli.threads {
        c.threads = t;
    }
    if let Some(b) = cli.budget {
        c.budget = b;
    }
    if let Some(g) = cli.g_max_leaf {
        c.g_max_leaf = g;
    }
    if let Some(f) = &cli.format {
        c.format = f.parse()?;
    }
    c.validate()?;
    Ok(c)
}

fn counter(c: &Config) -> Result<Counter, Failure> {
    let mut counter = match &c.cache_path {
        Some(p) => {
            let (counter, outcome) = Counter::with_cache(c.count_options(), p)?;
            if let LoadOutcome::Quarantined(q) = outcome {
                eprintln!("warning: unreadable cache moved to {}", q.display());
            }
            counter
        }
        None => Counter::new(c.count_options()),
    };
    counter.set_max_k(c.max_k.clone());
    Ok(counter)
}

fn emit(out: &mut impl Write, s: &str) -> Result<(), Failure> {
    out.write_all(s.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::Lib(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = config(&cli)?;
    if c.threads > 0 {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(c.threads).build_global();
    }
    let mut counter = counter(&c)?;
    let tower_cfg = TowerConfig { g_max_leaf: c.g_max_leaf, ..TowerConfig::default() };
    let mut out = std::io::stdout().lock();
    match cli.cmd {
        Cmd::Count { id, k, table } => {
            if k == 0 {
                return Err(Failure::Usage("k must be at least 1".into()));
            }
            let curve = curve_from_id(&id)?;
            let t = counter.table(&curve, c.cap_k(&id, k))?;
            if t.row(k).is_none() {
                return Err(Failure::Lib(Error::Precondition(format!(
                    "{id}: row k = {k} exceeds the budget of {}",
                    c.budget
                ))));
            }
            let s = if table {
                serde_json::to_string(&t).map_err(Error::from)?
            } else {
                serde_json::to_string(t.row(k).expect("checked")).map_err(Error::from)?
            };
            emit(&mut out, &format!("{s}\n"))?;
        }
        Cmd::Lpoly { id, g } => {
            let curve = curve_from_id(&id)?;
            let t = counter.table(&curve, c.cap_k(&id, g as u32 + 2).max(g as u32))?;
            let l = lpoly_from_counts(&t, g)?;
            let s = match c.format {
                Format::Json => serde_json::to_string(&l).map_err(Error::from)?,
                Format::Text => l.poly().to_string(),
            };
            emit(&mut out, &format!("{s}\n"))?;
        }
        Cmd::Tower { n } | Cmd::Report { n } => {
            let r = compute_tower(n, tower_cfg, &mut counter)?;
            let s = match c.format {
                Format::Json => format!("{}\n", serde_json::to_string(&r).map_err(Error::from)?),
                Format::Text => render_run(&r),
            };
            emit(&mut out, &s)?;
            if let Some(f) = r.failure {
                return Err(Failure::Verify(format!("level {} failed: {}", f.n, f.message)));
            }
        }
        Cmd::VerifyPaper => {
            let v = verify_paper(&mut counter, tower_cfg)?;
            let s = match c.format {
                Format::Json => format!("{}\n", serde_json::to_string(&v.criteria).map_err(Error::from)?),
                Format::Text => v.criteria.iter().map(|c| c.line() + "\n").collect(),
            };
            emit(&mut out, &s)?;
            if !v.all_passed() {
                let failed: Vec<u32> = v.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
                return Err(Failure::Verify(format!("criteria {failed:?} failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let f = Failure::Usage(e.to_string().trim_end().to_string());
            eprintln!("{}", f.object());
            return ExitCode::from(f.code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.object());
            ExitCode::from(f.code())
        }
    }
}
