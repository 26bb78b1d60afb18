//! `symroll` command-line front end.
//!
//! Exit status: 0 when residuals are within tolerance, 2 on a residual
//! breach, 1 on any error.

mod config;
mod error;
mod run;
mod trajectory;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symroll::models::{bundled_json, BUNDLED_MODELS};
use symroll::CartanModel;

use config::{Format, RunConfig, DEFAULT_TOL};
use error::{CliError, CliResult};
use trajectory::Trajectory;

#[derive(Debug, Parser)]
#[command(name = "symroll", version, about = "Rolling maps of symmetric spaces and Stiefel manifolds on flat spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a rolling from a config file (or every *.json in a directory).
    Roll {
        #[arg(long)]
        config: PathBuf,
        /// Output file; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Recheck the residuals of a stored trajectory.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Bundled models.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Debug, Subcommand)]
enum ModelsAction {
    /// Names and dimensions of the bundled models.
    List,
    /// Print a model description as JSON.
    Show { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok = 0,
    Error = 1,
    Breach = 2,
}

impl Status {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Ok
        } else {
            Status::Breach
        }
    }

    /// Errors dominate breaches when several runs are combined.
    fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Error, _) | (_, Status::Error) => Status::Error,
            (Status::Breach, _) | (_, Status::Breach) => Status::Breach,
            _ => Status::Ok,
        }
    }
}

/// A bundled model name, a model file, or the name recorded in a file.
fn load_model(name: &str) -> CliResult<(CartanModel, String)> {
    let model = CartanModel::resolve(name)?;
    let reference = if bundled_json(name).is_some() {
        name.to_string()
    } else {
        std::fs::canonicalize(name).map(|p| p.to_string_lossy().into_owned()).unwrap_or_else(|_| name.to_string())
    };
    Ok((model, reference))
}

fn roll_one(config: &RunConfig, out: Option<&Path>, format: Option<Format>) -> CliResult<bool> {
    let (model, reference) = load_model(&config.model)?;
    let grid = config.grid.grid()?;
    let input = config.curve.input(grid, model.manifold_dim(), model.chart_dim())?;
    let output = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .ok_or_else(|| CliError::Usage("no output file: set `output` in the config or pass --out".into()))?;
    let format = format.or(config.format).unwrap_or_else(|| Format::from_path(&output));
    log::info!("rolling {} ({:?}, {} steps) into {}", reference, config.mode, grid.n_steps, output.display());
    let traj = run::compute(&model, &reference, &input, config.mode)?;
    traj.write(&output, format)?;
    let summary = run::evaluate(&model, &traj, config.tolerance.unwrap_or(DEFAULT_TOL))?;
    let mut json = summary.to_json();
    json["output"] = serde_json::json!(output.to_string_lossy());
    println!("{json}");
    Ok(summary.pass)
}

fn report(result: CliResult<bool>, label: Option<&Path>) -> Status {
    match result {
        Ok(pass) => Status::from_pass(pass),
        Err(e) => {
            match label {
                Some(p) => eprintln!("error: {}: {e}", p.display()),
                None => eprintln!("error: {e}"),
            }
            Status::Error
        }
    }
}

fn cmd_roll(config: &Path, out: Option<&Path>, format: Option<Format>) -> Status {
    if !config.is_dir() {
        return report(RunConfig::load(config).and_then(|c| roll_one(&c, out, format)), None);
    }
    if out.is_some() {
        return report(Err(CliError::Usage("--out cannot be used with a config directory".into())), None);
    }
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(config) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => return report(Err(CliError::io(format!("cannot read {}", config.display()), e)), None),
    };
    paths.sort();
    if paths.is_empty() {
        return report(Err(CliError::Usage(format!("no *.json configs in {}", config.display()))), None);
    }
    // independent runs, each with its own output file
    let results: Vec<CliResult<bool>> = std::thread::scope(|scope| {
        let handles: Vec<_> =
            paths.iter().map(|p| scope.spawn(move || RunConfig::load(p).and_then(|c| roll_one(&c, None, format)))).collect();
        handles.into_iter().map(|h| h.join().expect("roll thread panicked")).collect()
    });
    paths.iter().zip(results).map(|(p, r)| report(r, Some(p))).fold(Status::Ok, Status::combine)
}

fn verify(input: &Path, tol: f64) -> CliResult<bool> {
    let traj = Trajectory::read(input)?;
    let (model, _) = load_model(&traj.header.model)?;
    let summary = run::evaluate(&model, &traj, tol)?;
    println!("{}", summary.to_json());
    Ok(summary.pass)
}

fn models(action: &ModelsAction) -> CliResult<bool> {
    match action {
        ModelsAction::List => {
            println!("{:<16} {:<24} {:>6} {:>6}  signature", "name", "embedding", "dim M", "dim V");
            for name in BUNDLED_MODELS {
                let model = CartanModel::resolve(name)?;
                let form = &model.ambient_form;
                println!(
                    "{:<16} {:<24} {:>6} {:>6}  ({},{})",
                    name,
                    model.description.embedding,
                    model.manifold_dim(),
                    form.dim(),
                    form.p(),
                    form.q()
                );
            }
        }
        ModelsAction::Show { name } => {
            let (model, _) = load_model(name)?;
            println!("{}", serde_json::to_string_pretty(&model.description).expect("description serializes"));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Status::Error } else { Status::Ok };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let status = match &cli.command {
        Command::Roll { config, out, format } => cmd_roll(config, out.as_deref(), *format),
        Command::Verify { input, tol } => report(verify(input, *tol), None),
        Command::Models { action } => report(models(action), None),
    };
    ExitCode::from(status as u8)
}
