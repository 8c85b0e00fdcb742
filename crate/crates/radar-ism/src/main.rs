use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use radar_ism::dataset::SplitSel;
use radar_ism::pipeline::{cmd_eval, cmd_gen, cmd_infer, cmd_rayism, cmd_render, cmd_train, InferMode};
use radar_ism::{Result, RunConfig};
use radar_ism_core::diffnet::Head;

#[derive(Parser)]
#[command(name = "radar-ism", version, about = "Evidential occupancy grids from simulated radar")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-sample work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Soft,
    Ev,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes (overrides io.scenes).
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Run the Ray-ISM baseline.
    Rayism {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitSel,
    },
    /// Train a network on the train split.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Network head (defaults to net.head).
        #[arg(long, value_enum)]
        head: Option<HeadArg>,
    },
    /// Predict belief grids with a trained network.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: InferMode,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitSel,
    },
    /// Score prediction directories against the dataset targets.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitSel,
        #[arg(required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Render a grid file as PPM (belief grids) or PGM (one channel).
    Render {
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        channel: Option<usize>,
        /// Pixels per cell.
        #[arg(long, default_value_t = 8)]
        scale: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.io.threads = t;
    }
    if let Command::Gen { scenes: Some(n), .. } = cli.command {
        cfg.io.scenes = n;
    }
    cfg.validate()?;
    match cli.command {
        Command::Gen { out, .. } => {
            let m = cmd_gen(&cfg, &out)?;
            eprintln!("wrote {} samples to {}", m.samples.len(), out.display());
        }
        Command::Rayism { dataset, out, split } => {
            let info = cmd_rayism(&cfg, &dataset, &out, split)?;
            eprintln!("wrote {} Ray-ISM grids to {}", info.samples.len(), out.display());
        }
        Command::Train { dataset, out, head } => {
            let head = head.map(|h| match h {
                HeadArg::Soft => Head::Softmax3,
                HeadArg::Ev => Head::Evidence2,
            });
            cmd_train(&cfg, &dataset, &out, head, |epoch, metrics| {
                let line: Vec<String> =
                    metrics.iter().filter(|m| m.epoch == epoch).map(|m| format!("{} {:.5}", m.split.name(), m.loss)).collect();
                eprintln!("epoch {epoch}: {}", line.join(", "));
            })?;
        }
        Command::Infer { checkpoint, dataset, out, mode, split } => {
            let info = cmd_infer(&cfg, &checkpoint, &dataset, &out, mode, split)?;
            eprintln!("wrote {} {} grids to {}", info.samples.len(), info.model, out.display());
        }
        Command::Eval { dataset, out, split, predictions } => {
            let rows = cmd_eval(&cfg, &predictions, &dataset, &out, split)?;
            print!("{}", radar_ism_core::eval::render_table(&rows).0);
        }
        Command::Render { grid, out, channel, scale } => cmd_render(&grid, &out, channel, scale)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use radar_ism::Error;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["radar-ism", "gen", "--out", "d", "--seed", "7", "--set", "io.scenes=3"]).unwrap();
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.sets, ["io.scenes=3"]);
        assert!(Cli::try_parse_from(["radar-ism", "infer", "--mode", "ev-s"]).is_err());
    }

    #[test]
    fn usage_errors_map_to_one() {
        assert_eq!(Error::Usage(String::new()).exit_code(), 1);
        assert_eq!(Error::Config(String::new()).exit_code(), 2);
        let _ = Error::Core(radar_ism_core::Error::TotalConflict).exit_code();
    }
}
