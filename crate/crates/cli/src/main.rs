use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pimsim::amenability::{amenability_report, WorkloadDescriptor, REFERENCE_PEAK_OPS};
use pimsim::harness::{
    aggregate_rows, plot_data_csv, report, reproduce, run_full, sweep, Experiment, Figure, Knob, Report, ResultRow,
};
use pimsim::trace::{validate, CommandStream};
use pimsim::{simulate, SystemConfig};

#[derive(Parser)]
#[command(name = "pimsim", version, about = "Near-bank PIM performance simulator")]
struct Cli {
    /// SystemConfig overrides (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dump generated command streams to this path.
    #[arg(long, global = true)]
    trace_out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a workload descriptor against the amenability heuristics.
    Amenability {
        descriptor: PathBuf,
        #[arg(long)]
        json: bool,
        /// GPU peak throughput in ops/s.
        #[arg(long, default_value_t = REFERENCE_PEAK_OPS)]
        peak_ops: f64,
    },
    /// Run one experiment and print its CSV row.
    Run { experiment: PathBuf },
    /// Run an experiment once per knob value.
    Sweep {
        experiment: PathBuf,
        #[arg(long)]
        knob: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Reproduce a figure (fig5, fig7, fig8, fig9) as a CSV table, or
    /// `aggregate` for the mean baseline and optimized speedups.
    Reproduce { figure: String },
    /// Reassemble result CSVs (stdin when no file is given).
    Report {
        files: Vec<PathBuf>,
        /// Print the per-primitive min/avg/max summary as JSON.
        #[arg(long)]
        summary: bool,
    },
    /// Emit (x, y, series) triples from result CSVs.
    PlotData { files: Vec<PathBuf> },
    /// Validate and time a command-stream text file.
    Simulate { trace: PathBuf },
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig> {
    let cfg = match path {
        Some(p) => SystemConfig::load(p)?,
        None => SystemConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<Experiment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut exp = Experiment::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if exp.id.is_empty() {
        exp.id = exp.primitive.name().to_string();
    }
    if let Some(s) = seed {
        exp.seed = s;
    }
    Ok(exp)
}

fn write_traces(path: &Path, streams: &[CommandStream]) -> Result<()> {
    if streams.len() == 1 {
        fs::write(path, streams[0].to_text())?;
    } else {
        for (i, s) in streams.iter().enumerate() {
            let mut p = path.as_os_str().to_owned();
            p.push(format!(".pch{i}"));
            fs::write(&p, s.to_text())?;
        }
    }
    Ok(())
}

fn read_rows(files: &[PathBuf]) -> Result<Vec<ResultRow>> {
    let mut texts = Vec::new();
    if files.is_empty() {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        texts.push(s);
    }
    for f in files {
        texts.push(fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?);
    }
    let mut rows = Vec::new();
    for t in texts {
        rows.extend(Report::rows_from_csv(&t)?);
    }
    if rows.is_empty() {
        bail!("no result rows");
    }
    Ok(rows)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Amenability {
            descriptor,
            json,
            peak_ops,
        } => {
            let w = WorkloadDescriptor::load(&descriptor)?;
            let r = amenability_report(&w, &cfg, peak_ops);
            if json {
                println!("{}", r.to_json());
            } else {
                print!("{}", r.to_text());
            }
        }
        Cmd::Run { experiment } => {
            let exp = load_experiment(&experiment, cli.seed)?;
            let out = run_full(&exp, &cfg)?;
            if let Some(p) = &cli.trace_out {
                write_traces(p, &out.streams)?;
            }
            print!("{}", report(&[out.row]).to_csv());
        }
        Cmd::Sweep {
            experiment,
            knob,
            values,
        } => {
            let exp = load_experiment(&experiment, cli.seed)?;
            let rows = sweep(&exp, Knob::parse(&knob)?, &values, &cfg)?;
            print!("{}", report(&rows).to_csv());
        }
        Cmd::Reproduce { figure } => {
            let figs = if figure == "aggregate" {
                vec![Figure::Fig5, Figure::Fig7, Figure::Fig8, Figure::Fig9]
            } else {
                vec![Figure::parse(&figure)?]
            };
            let mut rows = Vec::new();
            for f in figs {
                rows.extend(reproduce(f, &cfg).with_context(|| format!("reproducing {figure}"))?);
            }
            if figure == "aggregate" {
                let a = aggregate_rows(&rows);
                println!("config,baseline_speedup,optimized_speedup");
                for (id, b, o) in &a.pairs {
                    println!("{id},{b:.4},{o:.4}");
                }
                println!("mean,{:.4},{:.4}", a.baseline_mean, a.optimized_mean);
            } else {
                print!("{}", report(&rows).to_csv());
            }
        }
        Cmd::Report { files, summary } => {
            let r = report(&read_rows(&files)?);
            if summary {
                println!("{}", r.summary_json());
            } else {
                print!("{}", r.to_csv());
            }
        }
        Cmd::PlotData { files } => print!("{}", plot_data_csv(&report(&read_rows(&files)?).rows)),
        Cmd::Simulate { trace } => {
            let text = fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let s = CommandStream::from_text(&text)?;
            if let Err(v) = validate(&s, &cfg) {
                for x in v.iter().take(20) {
                    eprintln!("{x}");
                }
                bail!("{} validation errors in {}", v.len(), trace.display());
            }
            let r = simulate(&s, &cfg)?;
            println!(
                "commands={} total_ns={:.3} slot_busy_ns={:.3} act_stall_ns={:.3} act_stall_share={:.4} effective_bw={:.3}",
                s.len(),
                r.total_ns,
                r.slot_busy_ns,
                r.act_stall_ns,
                r.act_stall_share(),
                r.effective_bw
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
