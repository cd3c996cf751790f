use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use polynash_core::experiment::{median_ratio, write_growth_csv, LstsqExperimentConfig};
use polynash_core::lstsq::median;
use polynash_core::*;

/// Approximate Nash equilibria through polynomial system solving.
#[derive(Parser, Debug)]
#[command(name = "polynash", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Inverse Tsallis exponent, 1/tau.
    #[arg(long, global = true)]
    tau_inv: Option<u32>,
    /// Regularization weight per action, gamma / |A_i|.
    #[arg(long, global = true)]
    gamma_tilde: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with solver settings and optional tau_inv / gamma_tilde.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Builtin game name (chicken, bach_stravinsky, stag_hunt) or a JSON file.
    #[arg(long, global = true)]
    game: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dense Macaulay null space and eigendecomposition.
    SolveExact,
    /// Mini-batch null space and inverse-iteration eigenvalue scan.
    SolveStochastic {
        /// full_batch or bs_100; applied before the config file.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Least-squares solve for two-player games at tau = 1.
    SolveLstsq,
    /// Repeated stochastic solves scored against the dense solution.
    Recover {
        game: String,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Batch least-squares runs over random games.
    LstsqExperiment {
        /// Actions per player, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 5, 10])]
        actions: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0f64, 0.5, 0.25])]
        gamma_tildes: Vec<f64>,
    },
    /// Macaulay matrix sizes over action counts and tau_inv values.
    GrowthTable {
        /// Action-count tuples such as 2x2,2x3,2x2x2.
        #[arg(long, value_delimiter = ',', default_values_t = ["2x2".to_string(), "2x3".to_string(), "3x3".to_string()])]
        shapes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 3, 5, 7, 9])]
        tau_invs: Vec<u32>,
    },
    /// Compares Gumbel-argmax sampling with the closed-form best response at
    /// the uniform profile.
    GumbelCheck {
        #[arg(long, default_value_t = 0)]
        player: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

struct Setup {
    game: Game,
    label: String,
    params: TsallisParams,
    file: Option<ConfigFile>,
}

/// The game, its label and, for builtins, the default `(tau_inv, gamma_tilde)`.
type LoadedGame = (Game, String, Option<(u32, f64)>);

fn load_game(spec: Option<&str>) -> anyhow::Result<LoadedGame> {
    let spec = spec.unwrap_or("chicken");
    if Path::new(spec).is_file() {
        let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
        return Ok((Game::from_json_str(&text)?, spec.to_string(), None));
    }
    Ok((builtin_game(spec)?, spec.to_string(), Some(builtin_params(spec)?)))
}

/// Flags win over the config file, which wins over the game's defaults.
fn setup(g: &Global, game_spec: Option<&str>) -> anyhow::Result<Setup> {
    let (game, label, defaults) = load_game(game_spec.or(g.game.as_deref()))?;
    let file = g.config.as_deref().map(ConfigFile::load).transpose()?;
    let (dt, dg) = defaults.unwrap_or((3, 1.0));
    let tau_inv = g.tau_inv.or(file.as_ref().and_then(|f| f.tau_inv)).unwrap_or(dt);
    let gamma_tilde = g.gamma_tilde.or(file.as_ref().and_then(|f| f.gamma_tilde)).unwrap_or(dg);
    Ok(Setup {
        game,
        label,
        params: TsallisParams::new(tau_inv, gamma_tilde)?,
        file,
    })
}

fn solver_config(g: &Global, file: Option<&ConfigFile>, preset: Option<&str>) -> anyhow::Result<SolverConfig> {
    let mut cfg = match file {
        Some(f) => {
            let mut f = f.clone();
            if preset.is_some() {
                f.preset = preset.map(str::to_string);
            }
            f.solver_config()?
        }
        None => SolverConfig::preset(preset.unwrap_or("full_batch"))?,
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(g: &Global) -> anyhow::Result<Option<&Path>> {
    if let Some(dir) = g.out.as_deref() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        return Ok(Some(dir));
    }
    Ok(None)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let stdout = std::io::stdout();
    match &cli.command {
        Command::SolveExact => {
            let s = setup(g, None)?;
            let (set, diag) = solve_exact_with_diagnostics(&s.game, &s.params, &ExactTolerances::default())?;
            for w in &diag.warnings {
                eprintln!("warning: {w}");
            }
            let json = set.to_json_string()?;
            println!("{json}");
            if let Some(dir) = out_dir(g)? {
                write_file(dir, "solutions.json", &json)?;
                write_file(dir, "diagnostics.json", &serde_json::to_string_pretty(&diag)?)?;
            }
        }
        Command::SolveStochastic { preset } => {
            let s = setup(g, None)?;
            let cfg = solver_config(g, s.file.as_ref(), preset.as_deref())?;
            let (set, diag) = solve_stochastic_with_diagnostics(&s.game, &s.params, &cfg)?;
            for w in &diag.warnings {
                eprintln!("warning: {w}");
            }
            let json = set.to_json_string()?;
            println!("{json}");
            if let Some(dir) = out_dir(g)? {
                write_file(dir, "solutions.json", &json)?;
                write_file(dir, "diagnostics.json", &serde_json::to_string_pretty(&diag)?)?;
                write_file(dir, "config.json", &serde_json::to_string_pretty(&cfg)?)?;
            }
        }
        Command::SolveLstsq => {
            let s = setup(g, None)?;
            if g.tau_inv.is_some_and(|t| t != 1) {
                bail!(Error::InvalidArgument("the least-squares path is defined for tau_inv = 1".into()));
            }
            let result = solve_least_squares_2p(&s.game, s.params.gamma_tilde)?;
            let json = serde_json::to_string_pretty(&result)?;
            println!("{json}");
            if let Some(dir) = out_dir(g)? {
                write_file(dir, "lstsq.json", &json)?;
            }
        }
        Command::Recover { game, preset } => {
            let s = setup(g, Some(game))?;
            let cfg = solver_config(g, s.file.as_ref(), preset.as_deref())?;
            let trials = g.trials.unwrap_or(20);
            let seeds: Vec<u64> = (0..trials as u64).map(|i| derive_seed(cfg.seed, i)).collect();
            let report = experiment::run_recovery_on(&s.game, &s.label, &s.params, &cfg, &seeds)?;
            let a = &report.aggregates;
            let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
            println!(
                "{}: {} trials, success rate {}, mean JS distance {}, {:.1}s",
                s.label,
                a.trials,
                fmt(a.success_rate),
                fmt(a.mean_js),
                a.runtime_secs
            );
            if let Some(dir) = out_dir(g)? {
                write_file(dir, "report.json", &report.to_json_string()?)?;
                report.write_trials_csv(fs::File::create(dir.join("trials.csv"))?)?;
            }
        }
        Command::LstsqExperiment { actions, gamma_tildes } => {
            let cfg = LstsqExperimentConfig {
                action_counts: actions.clone(),
                gamma_tildes: gamma_tildes.clone(),
                num_games: g.trials.unwrap_or(10_000),
                seed: g.seed.unwrap_or(0),
            };
            let (report, cells) = experiment::run_lstsq_experiment(&cfg)?;
            let mut out = stdout.lock();
            writeln!(out, "actions,gamma_tilde,success_rate,median_eps_ls,median_eps_uniform,median_ratio")?;
            for c in &cells {
                let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{:.4},{},{},{}",
                    c.actions_per_player,
                    c.gamma_tilde,
                    c.success_rate,
                    fmt(median(&c.exploitability_samples_ls())),
                    fmt(median(&c.exploitability_samples_uniform())),
                    fmt(median_ratio(c)),
                )?;
            }
            if let Some(dir) = out_dir(g)? {
                write_file(dir, "report.json", &report.to_json_string()?)?;
                report.write_trials_csv(fs::File::create(dir.join("samples.csv"))?)?;
            }
        }
        Command::GrowthTable { shapes, tau_invs } => {
            let parsed: Vec<Vec<usize>> = shapes
                .iter()
                .map(|s| {
                    s.split('x')
                        .map(|n| n.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| Error::InvalidArgument(format!("bad shape '{s}'")))
                })
                .collect::<Result<_, _>>()?;
            let rows = macaulay_growth_table(&parsed, tau_invs)?;
            write_growth_csv(&rows, stdout.lock())?;
            if let Some(dir) = out_dir(g)? {
                write_growth_csv(&rows, fs::File::create(dir.join("growth.csv"))?)?;
            }
        }
        Command::GumbelCheck { player, samples } => {
            let s = setup(g, None)?;
            let profile = StrategyProfile::uniform(&s.game);
            let tv = gumbel_br_check(&s.game, &profile, *player, s.params.tau(), *samples, g.seed.unwrap_or(0))?;
            println!("{tv}");
        }
    }
    Ok(())
}

/// 1 for bad input, 2 when a solver stage fails.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::CapExceeded { .. }
            | Error::DenseBudget { .. }
            | Error::NotEnoughSelectors { .. }
            | Error::RankDeficient { .. }
            | Error::ZeroPseudoinverse
            | Error::FullRank
            | Error::LinearAlgebra(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
