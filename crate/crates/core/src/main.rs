use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cnls_vortex::config::{parse_config, Experiment};
use cnls_vortex::error::Error;
use cnls_vortex::experiments::run_experiment;
use cnls_vortex::io::{content_hash, write_report, Report};

#[derive(Parser)]
#[command(
    name = "cnls-vortex",
    version,
    about = "Vortex experiments for a two-component coupled Schrödinger system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled radial profile problem
    Profile(Common),
    /// Core-energy constant at each configured outer radius
    Gamma(Common),
    /// Integrate the reduced point-vortex law
    Reduced(Common),
    /// Run the PDE with snapshots, diagnostics and tracking
    Simulate(Common),
    /// Tracked PDE against the reduced law
    Compare(Common),
    /// Track vortices through a directory of snapshots
    Track(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat `key = value` file)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the configuration
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Seed; overrides `seed` in the configuration
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Profile(a) => (Experiment::Profile, a),
        Command::Gamma(a) => (Experiment::Gamma, a),
        Command::Reduced(a) => (Experiment::Reduced, a),
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Compare(a) => (Experiment::Compare, a),
        Command::Track(a) => (Experiment::Track, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(&Error::io(&args.config, e)),
    };
    let parsed = std::str::from_utf8(&text)
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("configuration is not UTF-8: {e}"),
        })
        .and_then(parse_config);
    let out_hint = args.out.clone();
    let mut cfg = match parsed {
        Ok(c) => c,
        Err(e) => {
            let dir = out_hint.unwrap_or_else(|| PathBuf::from("out"));
            let mut report = Report::new(
                kind.name(),
                serde_json::Value::Object(Default::default()),
                content_hash(&text),
            );
            report.fail("config", &e);
            emit(&dir, &report);
            return fail(&e);
        }
    };
    if let Some(want) = cfg.experiment {
        if want != kind {
            let e = Error::Validation {
                key: "experiment".into(),
                message: format!("configuration is for `{want}`, not `{kind}`"),
            };
            return fail(&e);
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run_experiment(kind, &cfg, &text, &out);
    emit(&out, &report);
    if let Some(err) = &report.error {
        eprintln!(
            "error in stage {}: {err}",
            report.stage.as_deref().unwrap_or("?")
        );
    }
    ExitCode::from(report.exit_code as u8)
}

fn emit(dir: &std::path::Path, report: &Report) {
    let path = dir.join("report.json");
    let written = std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(dir, e))
        .and_then(|_| write_report(&path, report));
    match written {
        Ok(()) => println!("{}", path.display()),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
