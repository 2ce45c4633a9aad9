use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexcom::error::{write_json, Result, WorkbenchError};
use lexcom::experiment::{self, RunFailure};
use lexcom::ingest::{ingest_colors_csv, write_rejects, ColumnMap};
use lexcom::{dataset, plots, ExperimentManifest};

#[derive(Parser)]
#[command(name = "lexcom", version, about = "Color reference-game experiments: data, training, metrics, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment manifest (TOML).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Restrict to one seed from the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the manifest's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest the shared data sets into <out>/data.
    GenData(Common),
    /// Convert a corpus CSV to the canonical Lab CSV, with a rejects file and report.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Use the column layout of the original Colors corpus (HSL).
        #[arg(long)]
        colors_corpus: bool,
    },
    /// Train every pipeline for the selected seeds.
    Train(Common),
    /// Re-evaluate final checkpoints; writes reeval_* files into each run directory.
    Eval(Common),
    /// Compute per-run lexicon metrics.
    Metrics(Common),
    /// Aggregate tables, curves and slope comparisons.
    Report(Common),
    /// Emit SVG plots from a finished run tree.
    Plot(Common),
    /// All stages in order.
    Run(Common),
}

struct Context {
    manifest: ExperimentManifest,
    out: PathBuf,
    seed: Option<u64>,
}

fn context(c: &Common) -> Result<Context> {
    let path = c.manifest.as_ref().ok_or_else(|| WorkbenchError::Config("--manifest is required".into()))?;
    let mut manifest = ExperimentManifest::load(path)?;
    if let Some(s) = c.seed {
        if !manifest.seeds.contains(&s) {
            return Err(WorkbenchError::Config(format!("seed {s} is not in the manifest's seeds")));
        }
    }
    let out = c.out.clone().unwrap_or_else(|| manifest.output_dir.clone());
    manifest.output_dir = out.clone();
    Ok(Context { manifest, out, seed: c.seed })
}

fn report_failures(failures: &[RunFailure]) -> Result<()> {
    for f in failures {
        eprintln!("run {} seed {} failed: {}", f.pipeline, f.seed, f.error);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(WorkbenchError::Run(format!("{} run(s) failed", failures.len())))
    }
}

fn ingest(common: &Common, input: &Path, colors_corpus: bool) -> Result<()> {
    let map = match (&common.manifest, colors_corpus) {
        (_, true) => ColumnMap::colors_corpus(),
        (Some(path), false) => ExperimentManifest::load(path)?.data.column_map,
        (None, false) => ColumnMap::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| WorkbenchError::io(&out, e))?;
    let ingested = ingest_colors_csv(input, &map)?;
    dataset::write_contexts(
        &out.join("contexts.csv"),
        ingested.rows.iter().map(|r| (&r.context, Some(r.word.as_str()))),
    )?;
    write_rejects(&out.join("rejects.csv"), &ingested.rejects)?;
    write_json(&out.join("ingest_report.json"), &ingested.report)?;
    let r = &ingested.report;
    println!(
        "{} rows: {} accepted ({} far / {} split / {} close), {} rejected, {} word types",
        r.input_rows, r.accepted, r.far, r.split, r.close, r.rejected, r.vocabulary_size
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest { common, input, colors_corpus } => return ingest(common, input, *colors_corpus),
        Command::GenData(c) => {
            let ctx = context(c)?;
            std::fs::create_dir_all(&ctx.out).map_err(|e| WorkbenchError::io(&ctx.out, e))?;
            experiment::write_manifest_copy(&ctx.manifest, &ctx.out)?;
            let summary = experiment::prepare_data(&ctx.manifest, &ctx.out)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
        }
        Command::Train(c) => {
            let ctx = context(c)?;
            report_failures(&experiment::train_runs(&ctx.manifest, &ctx.out, ctx.seed)?)?;
        }
        Command::Eval(c) => {
            let ctx = context(c)?;
            for (spec, seed) in experiment::jobs(&ctx.manifest, ctx.seed) {
                let dest = experiment::run_dir(&ctx.out, &spec.config().name, seed);
                experiment::write_reevaluation(&ctx.manifest, &ctx.out, spec, seed, &dest)?;
            }
        }
        Command::Metrics(c) => {
            let ctx = context(c)?;
            report_failures(&experiment::compute_metrics(&ctx.manifest, &ctx.out, ctx.seed)?)?;
        }
        Command::Report(c) => {
            let ctx = context(c)?;
            let agg = experiment::report(&ctx.manifest, &ctx.out, &[])?;
            print_tables(&agg);
            report_failures(&agg.failures)?;
        }
        Command::Plot(c) => {
            let ctx = context(c)?;
            let index = plots::emit_plots(&ctx.manifest, &ctx.out)?;
            for (name, why) in &index.missing {
                eprintln!("plot {name} not drawn: {why}");
            }
            println!("{} plots written to {}", index.written.len(), ctx.out.join(experiment::PLOTS_DIR).display());
        }
        Command::Run(c) => {
            let mut ctx = context(c)?;
            if let Some(s) = ctx.seed {
                ctx.manifest.seeds = vec![s];
            }
            let agg = lexcom::run_experiment(&ctx.manifest, &ctx.out)?;
            print_tables(&agg);
            report_failures(&agg.failures)?;
        }
    }
    Ok(())
}

fn print_tables(agg: &lexcom::Aggregate) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for (title, rows) in [("pipelines", &agg.table1), ("context distributions", &agg.table2)] {
        if rows.is_empty() {
            continue;
        }
        println!("{title}:");
        println!(
            "  {:<10} {:>7} {:>7} {:>7} {:>8} {:>6} {:>11} {:>7}",
            "row", "spk", "lst", "comm", "I_L", "|W|", "beta", "p"
        );
        for r in rows.iter() {
            println!(
                "  {:<10} {:>7} {:>7} {:>7} {:>8} {:>6} {:>11} {:>7}",
                r.row,
                fmt(r.acc_spk.map(|s| s.mean)),
                fmt(r.acc_lst.map(|s| s.mean)),
                fmt(r.acc_comm.map(|s| s.mean)),
                fmt(r.informativeness.map(|s| s.mean)),
                r.diversity.map_or("-".into(), |s| format!("{:.1}", s.mean)),
                r.slope.as_ref().map_or("-".into(), |s| format!("{:.3e}", s.beta)),
                fmt(r.slope.as_ref().map(|s| s.p_value)),
            );
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
