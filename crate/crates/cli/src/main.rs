use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lindblad_extrap::sampling::ShotMode;
use lindblad_extrap::ExtrapolationMethod;
use lindblad_extrap_cli::config::{AtLeastOne, Format};
use lindblad_extrap_cli::experiment::{cmd_curve, cmd_reproduce, extrapolate_rows, read_curve, write_json};
use lindblad_extrap_cli::verify::{self, Scope, VerifyOptions};
use lindblad_extrap_cli::{exit_code, recipe, ConfigError, Experiment, ExperimentConfig, EXIT_OK, EXIT_RUNTIME};

#[derive(Parser, Debug)]
#[command(name = "lindblad-extrap", version, about = "Step-size extrapolation experiments for Lindblad dynamics")]
struct Cli {
    /// Worker threads for node-level jobs (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the shot seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Curve table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve, sample and write curve + meta.json for a config.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Extrapolate a curve file to zero step size.
    Extrapolate {
        /// curve.csv or curve.json.
        curve: PathBuf,
        #[arg(long, value_enum, default_value = "interpolation")]
        method: MethodArg,
        /// Regression degree (must be below the node count).
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the theory inequalities numerically and write a JSON report.
    Verify {
        #[arg(value_enum, default_value = "all")]
        scope: Scope,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generator bounds for the sequence checks.
        #[arg(long = "l", value_delimiter = ',')]
        l_values: Vec<f64>,
        #[arg(long, default_value_t = 12)]
        i_max: usize,
        #[arg(long, default_value_t = 12)]
        k_max: usize,
        /// Random configurations for the node checks.
        #[arg(long, default_value_t = 1000)]
        configs: usize,
    },
    /// Run a figure recipe on Chebyshev and equidistant grids.
    Reproduce {
        #[arg(value_parser = ["fig1", "fig2", "fig3", "fig4"])]
        figure: String,
        /// Use this config instead of the built-in recipe.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of consecutive shot seeds to compare.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Override shots per node.
    #[arg(long)]
    shots: Option<u64>,
    /// Override the shot-noise model.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ShotMode>,
}

fn parse_mode(s: &str) -> Result<ShotMode, String> {
    s.parse().map_err(|e: lindblad_extrap::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    #[value(alias = "richardson")]
    Interpolation,
    Regression,
}

fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, o: &Overrides) -> Result<()> {
    if let Some(s) = seed {
        cfg.shots.seed = s;
    }
    if let Some(n) = o.shots {
        anyhow::ensure!(n >= 1, ConfigError::plain("--shots must be >= 1"));
        cfg.shots.n_shots = AtLeastOne(n);
    }
    if let Some(m) = o.mode {
        cfg.shots.mode = m;
    }
    Ok(())
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.outputs.directory.clone()).map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(fallback))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(j) = cli.jobs {
        anyhow::ensure!(j >= 1, ConfigError::plain("--jobs must be >= 1"));
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Curve {
            config,
            out,
            overrides,
            dry_run,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_overrides(&mut cfg, cli.seed, &overrides)?;
            let exp = Experiment::new(&cfg)?;
            if dry_run {
                print!("{}", exp.config.to_toml());
                return Ok(EXIT_OK);
            }
            let format = cli.format.unwrap_or(exp.config.outputs.format);
            let dir = out_dir(out, Some(&exp.config), if cfg.name.is_empty() { "curve" } else { &cfg.name });
            let (rows, _) = cmd_curve(&exp, &dir, format)?;
            log::info!("wrote {} nodes to {}", rows.len(), dir.display());
            println!("{}", dir.display());
        }
        Command::Extrapolate {
            curve,
            method,
            degree,
            out,
        } => {
            let method = match (method, degree) {
                (MethodArg::Interpolation, _) => ExtrapolationMethod::Interpolation,
                (MethodArg::Regression, Some(d)) => ExtrapolationMethod::Regression { degree: d },
                (MethodArg::Regression, None) => {
                    return Err(ConfigError::plain("--method regression needs --degree").into())
                }
            };
            let rows = read_curve(&curve)?;
            if let ExtrapolationMethod::Regression { degree } = method {
                anyhow::ensure!(
                    degree < rows.len(),
                    ConfigError::plain(format!("regression degree {degree} must be below the node count {}", rows.len()))
                );
            }
            let result = extrapolate_rows(&rows, method)?;
            let dir = out.unwrap_or_else(|| curve.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir)?;
            write_json(&dir.join("result.json"), &result)?;
            println!(
                "value_at_zero = {:.12e}  gamma_l1 = {:.6e}{}",
                result.value_at_zero,
                result.gamma_l1,
                result.error.map(|e| format!("  error = {e:.3e}")).unwrap_or_default()
            );
        }
        Command::Verify {
            scope,
            out,
            l_values,
            i_max,
            k_max,
            configs,
        } => {
            let mut opts = VerifyOptions {
                i_max,
                k_max,
                node_configs: configs,
                seed: cli.seed.unwrap_or(0),
                ..VerifyOptions::default()
            };
            if !l_values.is_empty() {
                opts.l_values = l_values;
            }
            let report = verify::run(scope, &opts)?;
            let dir = out_dir(out, None, "verify");
            std::fs::create_dir_all(&dir)?;
            write_json(&dir.join("verify.json"), &report)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                println!("FAIL [{}] {}: {:.6e} > {:.6e}", c.scope, c.name, c.value, c.limit);
            }
            println!(
                "verify {}: {} checks, {} failed -> {}",
                report.scope,
                report.n_checks,
                report.n_failed,
                dir.join("verify.json").display()
            );
            if !report.passed {
                return Ok(EXIT_RUNTIME);
            }
        }
        Command::Reproduce {
            figure,
            config,
            out,
            trials,
            overrides,
            dry_run,
        } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => recipe(&figure)?,
            };
            apply_overrides(&mut cfg, cli.seed, &overrides)?;
            let exp = Experiment::new(&cfg)?;
            if dry_run {
                print!("{}", exp.config.to_toml());
                return Ok(EXIT_OK);
            }
            let format = cli.format.unwrap_or(exp.config.outputs.format);
            let dir = out_dir(out, Some(&exp.config), &figure);
            let summary = cmd_reproduce(&exp, &figure, &dir, trials, format)?;
            if summary.noise_surrogate {
                log::warn!("shot noise uses the Gaussian surrogate");
            }
            print_json(&summary)?;
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LINDBLAD_EXTRAP_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
