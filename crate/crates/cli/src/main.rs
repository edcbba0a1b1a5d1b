//! `traj` — single binary exposing the pipeline as subcommands.
//!
//! - `traj simulate` writes a seeded synthetic cohort as the four input files
//! - `traj run` executes the full pipeline into a report directory
//! - `traj report` verifies a report directory's hashes and prints a summary

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use traj_core::config::RunConfig;
use traj_core::datamodel::SynthConfig;
use traj_core::evaluation::report::{verify_manifest, Manifest};
use traj_core::pipeline;

#[derive(Parser)]
#[command(
    name = "traj",
    version,
    about = "Within-person symptom trajectory prediction harness"
)]
struct Cli {
    /// Worker-thread cap (falls back to TRAJ_HARNESS_THREADS, then all
    /// cores). Results are identical at any setting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort (events, assessments, demographics,
    /// embeddings) plus a manifest.
    Simulate(SimulateArgs),
    /// Run the pipeline: ingest -> evaluate -> report directory.
    Run(RunArgs),
    /// Verify and summarize a completed report directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Generator config (TOML or JSON). Defaults match the shipped cohort
    /// shape (96 participants, 21 fortnightly assessments).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the number of participants.
    #[arg(long)]
    participants: Option<usize>,
    /// Override assessments per participant.
    #[arg(long)]
    assessments: Option<u32>,
    #[arg(long, default_value = "cohort")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (TOML or JSON); defaults to a seeded synthetic cohort.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Label operationalization: sev_crossing | personal_sd | balanced_tercile.
    #[arg(long)]
    label: Option<String>,
    /// Model family: gbdt | elasticnet.
    #[arg(long)]
    model: Option<String>,
    /// Run the nested feature ablation.
    #[arg(long)]
    ablate: bool,
    /// Run leave-group-out cross-validation (cold start).
    #[arg(long)]
    logo: bool,
    /// Staleness offsets in periods; repeatable (--stale 1 --stale 2).
    #[arg(long)]
    stale: Vec<usize>,
    /// Emit the demographic subgroup report.
    #[arg(long)]
    subgroups: bool,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report directory produced by `traj run`.
    dir: PathBuf,
}

fn read_config_text(path: &Path) -> anyhow::Result<String> {
    Ok(std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?)
}

fn load_run_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = read_config_text(path)?;
    let config = if path.extension().is_some_and(|e| e == "json") {
        RunConfig::from_json(&text)?
    } else {
        RunConfig::from_toml(&text)?
    };
    Ok(config)
}

fn load_synth_config(path: Option<&Path>) -> anyhow::Result<SynthConfig> {
    let Some(path) = path else {
        return Ok(SynthConfig::default());
    };
    let text = read_config_text(path)?;
    let config: SynthConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(config)
}

fn install_thread_pool(requested: Option<usize>) {
    let from_env = std::env::var("TRAJ_HARNESS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = requested.or(from_env) {
        // Ignore failure: the pool can only be configured once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    install_thread_pool(cli.threads);
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Machine-readable failure record on stderr.
            let stage = err
                .downcast_ref::<traj_core::Error>()
                .and_then(|e| e.stage_name())
                .unwrap_or("cli");
            let record = serde_json::json!({
                "error": err.to_string(),
                "stage": stage,
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut synth = load_synth_config(args.config.as_deref())?;
    if let Some(n) = args.participants {
        synth.n_participants = n;
    }
    if let Some(a) = args.assessments {
        synth.assessments_per_participant = a;
    }
    let manifest = pipeline::simulate(&synth, args.seed, &args.out)?;
    println!(
        "simulated cohort: {} participants, {} assessments, {} events, {} embeddings",
        manifest.participants, manifest.assessments, manifest.events, manifest.embeddings
    );
    println!("wrote {} files to {}", manifest.files.len() + 1, args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = load_run_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(label) = args.label {
        config.label.op = label;
    }
    if let Some(model) = args.model {
        config.model.family = model;
    }
    if args.ablate {
        config.scenarios.ablate = true;
    }
    if args.logo {
        config.scenarios.logo = true;
    }
    if !args.stale.is_empty() {
        config.scenarios.stale = args.stale;
    }
    if args.subgroups {
        config.scenarios.subgroups = true;
    }

    let outcome = pipeline::run(&config, &args.out)?;
    println!(
        "run {} complete: label={} model={} seed={}",
        &outcome.manifest.config_hash[..12],
        outcome.manifest.label,
        outcome.manifest.model_family,
        outcome.manifest.seed
    );
    println!(
        "participants={} rows train/val/test = {}/{}/{}",
        outcome.manifest.counts.participants,
        outcome.manifest.counts.rows_train,
        outcome.manifest.counts.rows_val,
        outcome.manifest.counts.rows_test
    );
    println!("{} files in {}", outcome.manifest.files.len() + 1, args.out.display());
    Ok(())
}

// ---- report rendering ----------------------------------------------------

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let manifest: Manifest = verify_manifest(&args.dir)?;
    println!(
        "run {} label={} model={} seed={}",
        &manifest.config_hash[..12.min(manifest.config_hash.len())],
        manifest.label,
        manifest.model_family,
        manifest.seed
    );
    println!(
        "verified {} files against manifest hashes",
        manifest.files.len()
    );
    println!(
        "cohort: {} participants; rows train/val/test = {}/{}/{}; \
         {} periods excluded, {} participants removed",
        manifest.counts.participants,
        manifest.counts.rows_train,
        manifest.counts.rows_val,
        manifest.counts.rows_test,
        manifest.counts.excluded_periods,
        manifest.counts.removed_participants
    );

    println!();
    println!("test metrics (95% CI):");
    print_metric_table(&args.dir.join("table2.csv"))?;

    println!();
    println!("confusion matrices (rows = true class):");
    print_confusion(&args.dir.join("s2_confusion.csv"))?;

    println!();
    match print_metric_table_if_present(&args.dir.join("table4.csv"), "deployment scenarios") {
        Ok(true) => {}
        _ => println!("deployment scenarios: not run"),
    }

    println!();
    if args.dir.join("s4_ablation.csv").exists() {
        println!("feature ablation:");
        print_raw_table(&args.dir.join("s4_ablation.csv"), &[0, 1, 2, 5, 9, 10])?;
    } else {
        println!("ablation: not run");
    }

    println!();
    if args.dir.join("s6_logo_summary.csv").exists() {
        println!("leave-group-out summary:");
        print_raw_table(&args.dir.join("s6_logo_summary.csv"), &[0, 1, 2, 3, 4])?;
    } else {
        println!("LOGO: not run");
    }

    println!();
    if args.dir.join("s9_subgroups.csv").exists() {
        println!("subgroups:");
        print_raw_table(&args.dir.join("s9_subgroups.csv"), &[0, 1, 2, 3, 4, 5])?;
    } else {
        println!("subgroups: not run");
    }

    if !manifest.flags.is_empty() {
        println!();
        println!("flags: {}", manifest.flags.join(", "));
    }
    Ok(())
}

fn read_csv_simple(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect())
}

fn ci_cell(point: &str, lo: &str, hi: &str) -> String {
    if point.is_empty() {
        "—".to_string()
    } else if lo.is_empty() {
        point.to_string()
    } else {
        format!("{point} ({lo}, {hi})")
    }
}

fn print_metric_table(path: &Path) -> anyhow::Result<()> {
    let rows = read_csv_simple(path)?;
    println!(
        "  {:<28} {:>22} {:>22} {:>22} {:>22}",
        "model", "balanced_accuracy", "auc_ovr", "sens_worsening", "ppv_worsening"
    );
    for row in rows.iter().skip(1) {
        if row.len() < 14 {
            continue;
        }
        println!(
            "  {:<28} {:>22} {:>22} {:>22} {:>22}",
            row[0],
            ci_cell(&row[2], &row[3], &row[4]),
            ci_cell(&row[5], &row[6], &row[7]),
            ci_cell(&row[8], &row[9], &row[10]),
            ci_cell(&row[11], &row[12], &row[13]),
        );
    }
    Ok(())
}

fn print_metric_table_if_present(path: &Path, title: &str) -> anyhow::Result<bool> {
    if !path.exists() {
        return Ok(false);
    }
    println!("{title}:");
    let rows = read_csv_simple(path)?;
    println!(
        "  {:<22} {:>6} {:>22} {:>22} {:>22} {:>22}",
        "scenario", "n", "balanced_accuracy", "auc_ovr", "sens_worsening", "ppv_worsening"
    );
    for row in rows.iter().skip(1) {
        if row.len() < 15 {
            continue;
        }
        println!(
            "  {:<22} {:>6} {:>22} {:>22} {:>22} {:>22}",
            row[0],
            row[1],
            ci_cell(&row[2], &row[3], &row[4]),
            ci_cell(&row[5], &row[6], &row[7]),
            ci_cell(&row[8], &row[9], &row[10]),
            ci_cell(&row[11], &row[12], &row[13]),
        );
    }
    Ok(true)
}

fn print_confusion(path: &Path) -> anyhow::Result<()> {
    let rows = read_csv_simple(path)?;
    let mut current_model = String::new();
    for row in rows.iter().skip(1) {
        if row.len() < 6 {
            continue;
        }
        if row[0] != current_model {
            current_model = row[0].clone();
            println!("  {current_model}:");
            println!(
                "    {:<12} {:>10} {:>10} {:>10} {:>8}",
                "", "improving", "stable", "worsening", "total"
            );
        }
        println!(
            "    {:<12} {:>10} {:>10} {:>10} {:>8}",
            row[1], row[2], row[3], row[4], row[5]
        );
    }
    Ok(())
}

fn print_raw_table(path: &Path, keep: &[usize]) -> anyhow::Result<()> {
    let rows = read_csv_simple(path)?;
    for row in &rows {
        let cells: Vec<&str> = keep
            .iter()
            .filter_map(|&i| row.get(i).map(|s| s.as_str()))
            .collect();
        println!("  {}", cells.join("  "));
    }
    Ok(())
}
