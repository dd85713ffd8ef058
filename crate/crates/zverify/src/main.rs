use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use zverify::certificate::IDS;
use zverify::config::NumericsConfig;
use zverify::dump::run_dump;
use zverify::report::Report;
use zverify::verify::{parse_ids, run_verify};

#[derive(Parser)]
#[command(name = "zverify", version, about = "Numerical non-degeneracy certificates for a Zakharov blow-up construction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate certificates in dependency order and write the JSON report.
    Verify {
        /// comma-separated certificate ids (default: all)
        #[arg(long, value_name = "ID,...")]
        only: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// report path (default: output.report from the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plain-text tables: profiles | spectrum | multipliers | propagator-residuals.
    Dump {
        what: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// output directory (default: output.dump_dir from the config)
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Merge partial reports of one configuration.
    Report {
        #[arg(long, required = true, num_args = 1.., value_name = "REPORT")]
        merge: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved configuration with all defaults.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<NumericsConfig, String> {
    match path {
        Some(p) => NumericsConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(NumericsConfig::default()),
    }
}

fn write_report(r: &Report, out: &Path) -> Result<(), String> {
    if let Some(d) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
    }
    std::fs::write(out, r.to_json()).map_err(|e| format!("{}: {e}", out.display()))
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.cmd {
        Cmd::Verify { only, config, out } => {
            let cfg = load(config.as_deref())?;
            let ids = match only {
                Some(s) => parse_ids(&s)?,
                None => IDS.to_vec(),
            };
            let ev = run_verify(&ids, &cfg);
            let report = Report::from_evaluated(&cfg, &ev);
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.report));
            write_report(&report, &out)?;
            let secs: Vec<f64> = ev.iter().map(|e| e.seconds).collect();
            print!("{}", report.summary(Some(&secs)));
            println!("report: {}", out.display());
            Ok(report.passed())
        }
        Cmd::Dump { what, config, dir } => {
            let cfg = load(config.as_deref())?;
            let dir = dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dump_dir));
            for p in run_dump(&what, &cfg, &dir).map_err(|e| e.to_string())? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Cmd::Report { merge, out } => {
            let parts = merge
                .iter()
                .map(|p| {
                    let s = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                    Report::from_json(&s).map_err(|e| format!("{}: {e}", p.display()))
                })
                .collect::<Result<Vec<_>, String>>()?;
            let r = Report::merge(&parts)?;
            if let Some(out) = &out {
                write_report(&r, out)?;
            } else {
                print!("{}", r.to_json());
            }
            eprint!("{}", r.summary(None));
            Ok(r.passed())
        }
        Cmd::Config { config } => {
            print!("{}", load(config.as_deref())?.to_toml());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
