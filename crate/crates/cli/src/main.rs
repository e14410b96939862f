use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use ctrlforge::suite::{self, Tag};
use ctrlforge_cli::imaging::{self, Format, RenderJob};
use ctrlforge_cli::serve::{ServeConfig, Server};
use ctrlforge_cli::{bench, inspect, run, solve, PolicyKind};

#[derive(Parser)]
#[command(name = "ctrlforge", version, about = "Continuous-control tasks on a reduced-coordinate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered tasks with their state, action and observation sizes.
    List {
        #[arg(long, default_value = "all")]
        tag: String,
        #[arg(long)]
        json: bool,
    },
    /// Run episodes of a task and report the returns.
    Run {
        /// Task id, e.g. cartpole:swingup.
        task: String,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// random, zero or lqr-optimal (lqr tasks only).
        #[arg(long, default_value = "random")]
        policy: PolicyKind,
        #[arg(long)]
        json: bool,
    },
    /// Write rendered frames of an episode to a directory.
    Render {
        task: String,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long, default_value = "frames")]
        out: PathBuf,
        /// free, a camera index or a camera name.
        #[arg(long, default_value = "free")]
        camera: String,
        #[arg(long, default_value = "84x84")]
        size: String,
        /// rgb, depth or segmentation.
        #[arg(long, default_value = "rgb")]
        mode: String,
        /// Shorthand for --mode segmentation.
        #[arg(long)]
        segmentation: bool,
        /// ppm or png.
        #[arg(long, default_value = "ppm")]
        format: Format,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "zero")]
        policy: PolicyKind,
    },
    /// Time a fixed number of random-policy steps. Without a task, runs
    /// every task carrying --tag.
    Bench {
        task: Option<String>,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value = "benchmarking")]
        tag: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Solve the discrete Riccati equation of an LQR chain.
    LqrSolve {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Solve a scalar problem A,B,Q,R instead of a chain.
        #[arg(long, allow_hyphen_values = true)]
        scalar: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the simulation to the browser viewer over a websocket.
    Serve {
        task: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "zero")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        no_visualize_reward: bool,
    },
    /// Validate or print a model file.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    /// Parse and compile, printing a summary.
    Validate {
        file: Option<PathBuf>,
        /// Use the model of a suite task instead of a file.
        #[arg(long)]
        task: Option<String>,
    },
    /// Print the flattened XML.
    Print {
        file: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
    },
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::List { tag, json: as_json } => {
            let tag = Tag::parse(&tag)?;
            let tasks = suite::tasks_with_tag(tag);
            if as_json {
                let rows: Vec<_> = tasks
                    .iter()
                    .map(|t| {
                        serde_json::json!({
                            "task": t.id(),
                            "state": t.dims.0, "action": t.dims.1, "observation": t.dims.2,
                            "tags": t.tags().iter().map(|g| g.to_string()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                println!("{}", json(&rows));
            } else {
                println!("{:<26} {:>5} {:>6} {:>4}  TAGS", "TASK", "STATE", "ACTION", "OBS");
                for t in tasks {
                    let tags: Vec<String> = t.tags().iter().map(|g| g.to_string()).collect();
                    println!(
                        "{:<26} {:>5} {:>6} {:>4}  {}",
                        t.id(),
                        t.dims.0,
                        t.dims.1,
                        t.dims.2,
                        tags.join(",")
                    );
                }
            }
        }
        Command::Run {
            task,
            episodes,
            seed,
            policy,
            json: as_json,
        } => {
            let report = run(&task, episodes, seed, policy)?;
            println!("{}", if as_json { json(&report) } else { report.to_text() });
        }
        Command::Render {
            task,
            frames,
            out,
            camera,
            size,
            mode,
            segmentation,
            format,
            seed,
            policy,
        } => {
            let job = RenderJob {
                task,
                frames,
                out,
                camera: imaging::parse_camera(&camera),
                size: imaging::parse_size(&size)?,
                mode: imaging::parse_mode(if segmentation { "segmentation" } else { &mode })?,
                format,
                seed,
                policy,
            };
            let written = imaging::render(&job)?;
            println!("wrote {} frame(s) to {}", written.len(), job.out.display());
        }
        Command::Bench {
            task,
            steps,
            tag,
            seed,
            json: as_json,
        } => {
            if steps == 0 {
                bail!("--steps must be at least 1");
            }
            let ids = match task {
                Some(t) => vec![t],
                None => suite::tasks_with_tag(Tag::parse(&tag)?).iter().map(|t| t.id()).collect(),
            };
            let mut reports = Vec::new();
            for id in ids {
                let r = bench(&id, steps, seed)?;
                if !as_json {
                    println!("{:<26} {} steps in {:.3} s, {:.0} steps/s", r.task, r.steps, r.seconds, r.steps_per_sec);
                }
                reports.push(r);
            }
            if as_json {
                println!("{}", json(&reports));
            }
        }
        Command::LqrSolve {
            n,
            m,
            tol,
            scalar,
            json: as_json,
        } => {
            let report = match (scalar, n, m) {
                (Some(s), None, None) => solve::scalar(&s, tol)?,
                (Some(_), _, _) => bail!("--scalar cannot be combined with --n/--m"),
                (None, Some(n), Some(m)) => solve::chain(n, m, tol)?,
                (None, _, _) => bail!("give --n and --m, or --scalar A,B,Q,R"),
            };
            println!("{}", if as_json { json(&report) } else { report.to_text() });
        }
        Command::Serve {
            task,
            port,
            host,
            policy,
            seed,
            speed,
            no_visualize_reward,
        } => {
            let config = ServeConfig {
                task,
                seed,
                policy,
                visualize_reward: !no_visualize_reward,
                speed,
            };
            let server = Server::start(&format!("{host}:{port}"), config)?;
            eprintln!("serving on ws://{}", server.local_addr());
            server.wait();
        }
        Command::Model { action } => match action {
            ModelAction::Validate { file, task } => {
                let line = inspect::with_model(file.as_deref(), task.as_deref(), inspect::validate)?;
                println!("{line}");
            }
            ModelAction::Print { file, task } => {
                let xml = inspect::with_model(file.as_deref(), task.as_deref(), inspect::print)?;
                print!("{xml}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // clap's report spans several lines; keep everything before the usage
            let text = e.to_string();
            let parts: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", parts.join(" "));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', "; "));
            ExitCode::FAILURE
        }
    }
}
