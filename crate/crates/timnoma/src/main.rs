//! Thin CLI over the simulation harness: `simulate` runs an SNR sweep and
//! exports its results, `report` regenerates one figure's plot data from an
//! exported run.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use timnoma::harness::{
    export_results, import_results, report_figure, LegSet, SimConfig, SimConfigFile,
};

#[derive(Parser)]
#[command(name = "timnoma", version, about = "Hybrid TIM-NOMA link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo SNR sweep and export CSV and plot data.
    Simulate {
        /// TOML config file mirroring the simulation parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario preset: paper-mimo-4u or paper-siso-5u.
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated SNR grid in dB, e.g. "0,2,4,6".
        #[arg(long)]
        snr: Option<String>,
        /// Frames per SNR point.
        #[arg(long)]
        frames: Option<u64>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for results.csv and figure data.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Legs to run: "hybrid", "tdma" or "hybrid,tdma".
        #[arg(long)]
        legs: Option<String>,
    },
    /// Regenerate one figure's data file from an exported run.
    Report {
        /// Directory written by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Figure number, 3 through 12.
        #[arg(long)]
        figure: u8,
    },
}

fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad SNR value {s:?}"))
        })
        .collect()
}

fn simulate(
    config: Option<PathBuf>,
    preset: Option<String>,
    snr: Option<String>,
    frames: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    legs: Option<String>,
) -> Result<()> {
    let mut file = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            SimConfigFile::from_toml(&text)?
        }
        None => SimConfigFile::default(),
    };
    if preset.is_some() {
        file.preset = preset;
        file.scenario = None;
    }
    if file.preset.is_none() && file.scenario.is_none() {
        anyhow::bail!("pass --config or --preset to choose a scenario");
    }

    let mut sim: SimConfig = file.resolve()?;
    if let Some(list) = snr {
        sim.snr_grid_db = parse_snr_list(&list)?;
    }
    if let Some(n) = frames {
        sim.frames = n;
    }
    if let Some(s) = seed {
        sim.master_seed = s;
    }
    if let Some(dir) = out {
        sim.output_dir = Some(dir);
    }
    if let Some(l) = legs {
        sim.legs = LegSet::parse(&l)?;
    }
    sim.validate()?;

    eprintln!(
        "simulating {} ({} scheme): {} SNR points x {} frames, seed {}",
        sim.scenario_label,
        sim.power.tag(),
        sim.snr_grid_db.len(),
        sim.frames,
        sim.master_seed
    );
    let table = timnoma::harness::run_simulation(&sim)?;

    println!("{:>8} {:>14} {:>14} {:>10}", "snr_db", "hybrid_sum", "tdma_avg", "ratio");
    for row in &table.snr_rows {
        println!(
            "{:>8} {:>14} {:>14} {:>10}",
            row.snr_db,
            row.sum_rate_hybrid.map(|v| format!("{v:.4}")).unwrap_or_default(),
            row.tdma_average_rate.map(|v| format!("{v:.4}")).unwrap_or_default(),
            row.ratio.map(|v| format!("{v:.4}")).unwrap_or_default(),
        );
    }

    let dir = sim.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let written = export_results(&table, &dir)?;
    eprintln!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn report(input: PathBuf, figure: u8) -> Result<()> {
    let table = import_results(&input)
        .with_context(|| format!("cannot load results from {}", input.display()))?;
    let (name, content) = report_figure(&table, figure)?;
    let path = input.join(&name);
    std::fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            preset,
            snr,
            frames,
            seed,
            out,
            legs,
        } => simulate(config, preset, snr, frames, seed, out, legs),
        Command::Report { input, figure } => report(input, figure),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
