use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tspdraw::pipeline::{self, ErrorClass, PipelineConfig, PipelineError};

/// Color image to multi-pen TSP-art toolpaths and joint trajectories.
#[derive(Debug, Parser)]
#[command(name = "tspdraw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Args)]
struct Opts {
    /// TOML pipeline config; relative paths inside resolve against its
    /// directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input image (overrides the config).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Global seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output and dump directory (overrides the config).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TSP wall-clock budget per channel in seconds; `inf` disables it.
    #[arg(long, global = true)]
    time_budget: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every stage in one pass.
    Run,
    /// Image → channels.txt, channel_<i>.png.
    Split,
    /// channel_<i>.png → stipples_<i>.csv.
    Stipple,
    /// stipples_<i>.csv → tour_<i>.txt.
    Tour,
    /// tour_<i>.txt → path_<i>.txt.
    Optimize,
    /// path_<i>.txt → layout.txt, program.txt, trajectory.csv.
    Plan,
    /// path_<i>.txt → drawing.svg, preview.png, stats.txt.
    Render,
    /// Print the effective config as TOML.
    Config,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn load_config(opts: &Opts) -> Result<PipelineConfig, String> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut cfg = PipelineConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(""));
            resolve(base, &mut cfg.input);
            resolve(base, &mut cfg.out_dir);
            if let Some(file) = cfg.robot.as_mut().and_then(|r| r.chain_file.as_mut()) {
                resolve(base, file);
            }
            cfg
        }
        None => PipelineConfig::default(),
    };
    if let Some(p) = &opts.input {
        cfg.input = p.clone();
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(d) = &opts.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(t) = opts.time_budget {
        cfg.set_time_budget(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: &Command, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    match command {
        Command::Run => {
            let art = pipeline::run_pipeline(cfg)?;
            let t = art.report.totals();
            println!(
                "{} stipples, tour length {:.1}, {} → {} vertices; wrote {}",
                t.points,
                t.tour_length,
                t.vertices_before,
                t.vertices_after,
                cfg.out_dir.display()
            );
        }
        Command::Split => {
            let h = pipeline::run_split(cfg)?;
            println!("{} channels at {}x{}", h.palette.len(), h.width, h.height);
        }
        Command::Stipple => {
            for (i, o) in pipeline::run_stipple(cfg)?.iter().enumerate() {
                println!("channel {i}: {} stipples", o.set.len());
            }
        }
        Command::Tour => {
            for (i, o) in pipeline::run_tour(cfg)?.iter().enumerate() {
                println!("channel {i}: tour length {}", o.tour.length);
            }
        }
        Command::Optimize => {
            for (i, o) in pipeline::run_optimize(cfg)?.iter().enumerate() {
                println!("channel {i}: {} → {} vertices", o.vertices_before, o.vertices_after);
            }
        }
        Command::Plan => {
            let out = pipeline::run_plan(cfg)?;
            println!(
                "{:.1} x {:.1} mm in {} tile(s), {} instructions",
                out.layout.width_mm(),
                out.layout.height_mm(),
                out.layout.tiles,
                out.program.instructions.len()
            );
        }
        Command::Render => {
            let stats = pipeline::run_render(cfg)?;
            println!("{} stipples rendered", stats.totals().points);
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match load_config(&cli.opts) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class {
                ErrorClass::Input => 1,
                ErrorClass::Internal => 2,
            })
        }
    }
}
