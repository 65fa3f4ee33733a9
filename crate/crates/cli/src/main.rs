//! `vasp-attest`: run scenarios, check policies, write golden vectors and
//! summarize traces.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vasp_attest::netsim::{builtin_policy, parse_scenario, run_matrix, Scenario, ScenarioReport};
use vasp_attest::policy::parse_policy;
use vasp_attest::vectors::golden;

/// Scenario failed its expectations, or a policy has diagnostics.
const EXIT_FAILED: u8 = 1;
/// Bad input: unreadable file, parse error, unwritable output.
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "vasp-attest", version, about = "Wallet attestation and VASP compliance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Line-delimited hex of canonical event bytes.
    Trace,
    /// One readable line per event.
    Human,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, or a matrix of scenarios and seeds in parallel.
    Run {
        /// Scenario file; repeat for a matrix.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// Seed; repeat for a matrix.
        #[arg(long, required = true)]
        seed: Vec<u64>,
        /// Directory for traces and reports. Nothing is written without it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory searched for policy files before the built-in overlays.
        #[arg(long)]
        policy_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "trace")]
        format: Format,
    },
    /// Parse and type-check a policy file.
    CheckPolicy { path: PathBuf },
    /// Write one golden vector file per wire type.
    Vectors {
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize reconciliation, assurance levels and audit bundles in a trace.
    Report { trace: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            policy_dir,
            format,
        } => cmd_run(&scenario, &seed, out.as_deref(), policy_dir, format),
        Command::CheckPolicy { path } => cmd_check_policy(&path),
        Command::Vectors { out } => cmd_vectors(&out),
        Command::Report { trace } => cmd_report(&trace),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(
    paths: &[PathBuf],
    seeds: &[u64],
    out: Option<&Path>,
    policy_dir: Option<PathBuf>,
    format: Format,
) -> Result<u8, String> {
    let mut scenarios: Vec<Scenario> = Vec::new();
    for path in paths {
        let sc = parse_scenario(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        scenarios.push(sc);
    }
    let dirs: Vec<PathBuf> = policy_dir
        .into_iter()
        .chain(paths.iter().filter_map(|p| p.parent().map(Path::to_path_buf)))
        .collect();
    let loader = move |file: &str| -> Option<String> {
        if Path::new(file).components().count() != 1 {
            return None;
        }
        dirs.iter()
            .find_map(|d| fs::read_to_string(d.join(file)).ok())
            .or_else(|| builtin_policy(file))
    };
    let jobs: Vec<(&Scenario, u64)> = scenarios
        .iter()
        .flat_map(|sc| seeds.iter().map(move |&seed| (sc, seed)))
        .collect();
    let results = run_matrix(&jobs, &loader);

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let single = jobs.len() == 1;
    let mut all_passed = true;
    for ((sc, seed), result) in jobs.iter().zip(results) {
        let report = result.map_err(|e| format!("scenario {}: {e}", sc.name))?;
        println!(
            "{} seed {seed}: {}",
            report.name,
            if report.passed { "PASS" } else { "FAIL" }
        );
        for failure in &report.failures {
            println!("  {failure}");
        }
        all_passed &= report.passed;
        if let Some(dir) = out {
            let stem = if single {
                String::new()
            } else {
                format!("{}-{seed}.", report.name)
            };
            write_outputs(dir, &stem, &report, format)?;
        }
    }
    Ok(if all_passed { 0 } else { EXIT_FAILED })
}

fn write_outputs(dir: &Path, stem: &str, report: &ScenarioReport, format: Format) -> Result<(), String> {
    match format {
        Format::Trace => write(&dir.join(format!("{stem}trace.hex")), report.trace.to_lines())?,
        Format::Human => write(&dir.join(format!("{stem}trace.txt")), report.trace.render_human())?,
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    write(&dir.join(format!("{stem}reconciliation.json")), json + "\n")?;
    let audit = serde_json::to_string_pretty(&report::audit_bundle(&report.trace)).map_err(|e| e.to_string())?;
    write(&dir.join(format!("{stem}audit.json")), audit + "\n")
}

fn cmd_check_policy(path: &Path) -> Result<u8, String> {
    let source = read(path)?;
    match parse_policy(&source) {
        Ok(program) => {
            println!(
                "{}: ok, policy {}, {} rules",
                path.display(),
                program.id.as_deref().unwrap_or("(unnamed)"),
                program.rules.len()
            );
            Ok(0)
        }
        Err(e) => {
            println!("{}:{e}", path.display());
            Ok(EXIT_FAILED)
        }
    }
}

fn cmd_vectors(out: &Path) -> Result<u8, String> {
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let vectors = golden();
    for v in &vectors {
        write(&out.join(v.file_name()), hex::encode(&v.bytes) + "\n")?;
    }
    println!("wrote {} vectors to {}", vectors.len(), out.display());
    Ok(0)
}

fn cmd_report(path: &Path) -> Result<u8, String> {
    let text = read(path)?;
    let trace = vasp_attest::netsim::Trace::from_lines(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    print!("{}", report::render(&trace));
    Ok(0)
}
