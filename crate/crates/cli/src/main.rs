use std::path::PathBuf;
use std::process::ExitCode;

use bgmatte_cli::commands::{cmd_eval, cmd_matte, cmd_restore_bg, cmd_synth, eval_lines};
use bgmatte_cli::{CliError, Config, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bgmatte", version, about = "Video matting with background restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Write bgF/bgM after every frame to <output>/state.
    #[arg(long, global = true)]
    dump_state: bool,
    /// Overrides synth.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ground-truth directory for `eval`.
    #[arg(long, global = true)]
    truth: Option<PathBuf>,
    /// Semantic maps for `restore-bg`; the classical estimator is used otherwise.
    #[arg(long, global = true)]
    semantic: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a labelled synthetic clip.
    Synth,
    /// Matte a PNG frame sequence.
    Matte,
    /// Run background restoration only and dump its state per frame.
    RestoreBg,
    /// Score mattes against ground truth; prints JSON lines.
    Eval,
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("BGMATTE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("BGMATTE_THREADS must be a non-negative integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let io = &mut config.io;
    for (flag, slot) in [
        (cli.input, &mut io.input),
        (cli.output, &mut io.output),
        (cli.truth, &mut io.truth),
        (cli.semantic, &mut io.semantic),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
    }

    match cli.command {
        Command::Synth => {
            for dir in cmd_synth(&config)? {
                println!("{}", dir.display());
            }
        }
        Command::Matte => {
            let s = cmd_matte(&config, cli.dump_state)?;
            println!(
                "{}",
                serde_json::json!({
                    "frames": s.frames,
                    "restored": s.restored,
                    "restorable": s.restorable,
                    "ofd_changed": s.ofd_changed,
                })
            );
        }
        Command::RestoreBg => {
            let state = cmd_restore_bg(&config)?;
            println!(
                "{}",
                serde_json::json!({ "restored": state.restored_count(), "restorable": state.width() * state.height() })
            );
        }
        Command::Eval => {
            let (scores, summary) = cmd_eval(&config)?;
            print!("{}", eval_lines(&scores, &summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().replace('\n', " "));
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::FAILURE
        }
    }
}
