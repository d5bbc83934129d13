use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pqsim_core::experiments::{ExperimentRegistry, ParamValue, Params, RunOutput};
use pqsim_cli::config::{load_plan, CheckKind, OutputFormat};
use pqsim_cli::{catalog, environment_seed, parse_seed, runner};

#[derive(Debug, Parser)]
#[command(name = "pqsim", version, about = "Post-quantum measurement device simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Records,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => OutputFormat::Text,
            Format::Records => OutputFormat::Records,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckName {
    Closure,
    ProductForm,
    Estimation,
}

impl From<CheckName> for CheckKind {
    fn from(c: CheckName) -> Self {
        match c {
            CheckName::Closure => CheckKind::Closure,
            CheckName::ProductForm => CheckKind::ProductForm,
            CheckName::Estimation => CheckKind::EstimationAssumption,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a TOML configuration file.
    Run {
        config: PathBuf,
        /// Overrides the seed in the file and PQSIM_SEED.
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        /// Overrides the output format in the file.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run a built-in experiment by id.
    Demo {
        name: String,
        #[arg(long)]
        d: Option<i64>,
        #[arg(long)]
        m: Option<i64>,
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        /// Extra parameter as key=value; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// List the device catalog.
    ListDevices {
        #[arg(long)]
        json: bool,
        /// Only kinds whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Run a closure, product-form or estimation-assumption check.
    Check {
        #[arg(value_enum)]
        check: CheckName,
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        /// Check parameter as key=value; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Configuration problems exit with 2, failed runs with 1.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn parse_value(text: &str) -> ParamValue {
    let t = text.trim();
    if let Ok(b) = t.parse::<bool>() {
        return ParamValue::Bool(b);
    }
    if let Ok(i) = t.parse::<i64>() {
        return ParamValue::Int(i);
    }
    if let Ok(x) = t.parse::<f64>() {
        return ParamValue::Real(x);
    }
    if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        let items: Result<Vec<f64>, _> = inner
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>())
            .collect();
        if let Ok(v) = items {
            return ParamValue::List(v);
        }
    }
    ParamValue::Text(t.trim_matches('"').to_string())
}

fn parse_assignments(items: &[String], params: &mut Params) -> anyhow::Result<()> {
    for item in items {
        let Some((k, v)) = item.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{item}`");
        };
        params.set(k.trim(), parse_value(v));
    }
    Ok(())
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    match flag {
        Some(s) => Ok(s),
        None => environment_seed().map_err(|e| config_err(anyhow::anyhow!("PQSIM_SEED: {e}"))),
    }
}

fn emit(output: &RunOutput, format: OutputFormat, path: Option<&Path>) -> Result<(), Failure> {
    let text = runner::render(output, format);
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Run),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Run {
            config,
            seed,
            format,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))
                .map_err(config_err)?;
            let fallback = resolve_seed(None)?;
            let mut plan = load_plan(&text, fallback)
                .map_err(|e| config_err(anyhow::anyhow!("{}: {e}", config.display())))?;
            if let Some(s) = seed {
                plan.seed = s;
            }
            for w in &plan.warnings {
                eprintln!("warning: {w}");
            }
            let output = runner::execute(&plan).map_err(|e| Failure::Run(e.into()))?;
            let format = format.map(Into::into).unwrap_or(plan.output.format);
            emit(&output, format, plan.output.path.as_deref())?;
            Ok(output.exit_code())
        }
        Command::Demo {
            name,
            d,
            m,
            seed,
            set,
            format,
        } => {
            let registry = ExperimentRegistry::with_catalog();
            let experiment = registry.get(&name).map_err(|e| {
                config_err(anyhow::anyhow!("{e}; available: {}", registry.ids().join(", ")))
            })?;
            let mut params = Params::new();
            if let Some(d) = d {
                params.set("d", ParamValue::Int(d));
            }
            if let Some(m) = m {
                params.set("m", ParamValue::Int(m));
            }
            parse_assignments(&set, &mut params).map_err(config_err)?;
            params
                .validate(experiment.id(), &experiment.parameters())
                .map_err(config_err)?;
            let output = experiment
                .run(&params, resolve_seed(seed)?)
                .map_err(|e| Failure::Run(e.into()))?;
            emit(&output, format.into(), None)?;
            Ok(output.exit_code())
        }
        Command::ListDevices { json, filter } => {
            let entries = catalog::catalog(filter.as_deref());
            if json {
                print!("{}", catalog::render_json(&entries));
            } else {
                print!("{}", catalog::render_text(&entries));
            }
            Ok(0)
        }
        Command::Check {
            check,
            seed,
            set,
            format,
        } => {
            let kind: CheckKind = check.into();
            let mut params = Params::new();
            parse_assignments(&set, &mut params).map_err(config_err)?;
            params
                .validate(kind.name(), &runner::check_parameters(kind))
                .map_err(config_err)?;
            let output = runner::run_check(kind, &params, resolve_seed(seed)?)
                .map_err(|e| Failure::Run(e.into()))?;
            emit(&output, format.into(), None)?;
            Ok(output.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
