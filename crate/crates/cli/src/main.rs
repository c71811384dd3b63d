//! Command-line workbench: train policies, evaluate them on held-out maps,
//! generate map sets, verify the equilibrium-invariance theory by brute
//! force, render metric plots, and run the gradient-check battery.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage or
//! configuration errors.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use armslab_core::harness::{
    emit_eval_csv, emit_plot, gen_eval_maps, load_policy_checkpoint, read_xy_column,
    run_eval, run_grad_battery, run_training, EvalMode, ExperimentConfig, HarnessError, PlotModel,
    PlotSeries,
};
use armslab_core::harness::EvalModeName;
use armslab_core::gridworld::{load_map, save_map, GridMap};
use armslab_core::theory::{
    apply_return_map_unchecked, check_invariance, random_game, random_mdp,
    random_potential, realized_returns, value_iteration, value_iteration_shaped, GameSizeBounds,
    OrderTransform, TinyGame,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "armslab",
    about = "Reward-shaping workbench for multi-agent gridworld RL",
    version,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies for every configured seed and write metrics and checkpoints.
    Train(TrainArgs),
    /// Evaluate a trained policy checkpoint on a directory of map files.
    Eval(EvalArgs),
    /// Generate a deterministic set of evaluation maps.
    GenMaps(GenMapsArgs),
    /// Brute-force the best-response/Nash invariance checks on random games.
    VerifyTheory(VerifyTheoryArgs),
    /// Render an SVG line chart (mean and std band across seeds) from metric CSVs.
    Plot(PlotArgs),
    /// Compare analytic gradients of every trained loss against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment configuration (TOML). Missing keys take defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
    /// Override the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Force sequential seed execution for bit-exact reproducibility.
    #[arg(long)]
    single_thread: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of `.map` files (see `gen-maps`).
    #[arg(long)]
    maps: PathBuf,
    /// Experiment configuration; supplies agent count, episode length, and
    /// the evaluation action mode.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long, default_value = "eval_report.csv")]
    out: PathBuf,
    /// Base seed for evaluation episodes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenMapsArgs {
    /// Output directory for the map files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    random: usize,
    #[arg(long, default_value_t = 10)]
    maze: usize,
    #[arg(long, default_value_t = 20)]
    width: usize,
    #[arg(long, default_value_t = 20)]
    height: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyTheoryArgs {
    /// Number of random games for the invariance checks.
    #[arg(long, default_value_t = 200)]
    games: usize,
    /// Number of random single-agent problems for the potential-shaping check.
    #[arg(long, default_value_t = 100)]
    mdps: usize,
    /// Random potentials per single-agent problem.
    #[arg(long, default_value_t = 100)]
    potentials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    max_agents: usize,
    #[arg(long, default_value_t = 4)]
    max_states: usize,
    #[arg(long, default_value_t = 3)]
    max_actions: usize,
    #[arg(long, default_value_t = 3)]
    max_horizon: usize,
    /// Games are redrawn until their profile count fits this bound.
    #[arg(long, default_value_t = 20_000)]
    profile_bound: u128,
    /// Summary CSV path.
    #[arg(long, default_value = "theory_summary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Series specification `label=file1,file2,...`; repeatable. Each file
    /// is one seed's CSV.
    #[arg(long = "series", required = true)]
    series: Vec<String>,
    /// Column for the x axis.
    #[arg(long, default_value = "env_steps")]
    x: String,
    /// Column for the y axis.
    #[arg(long, default_value = "cumulative_dense_reward")]
    y: String,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Randomized instances per loss.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::GenMaps(args) => cmd_gen_maps(args),
        Command::VerifyTheory(args) => cmd_verify_theory(args),
        Command::Plot(args) => cmd_plot(args),
        Command::GradCheck(args) => cmd_grad_check(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            // Configuration problems are usage errors.
            if err.downcast_ref::<HarnessError>().map_or(false, |e| matches!(e, HarnessError::Config(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.train.seeds = vec![seed];
    }
    if args.single_thread {
        config.train.single_thread = true;
    }
    let outputs = run_training(&config, &args.out)?;
    for s in &outputs.per_seed {
        let final_reward = s.artifacts.log.final_cumulative_dense_reward();
        println!(
            "seed {}: {} updates, final cumulative dense reward {:.4} -> {}",
            s.seed,
            s.artifacts.log.records.len(),
            final_reward,
            s.dir.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let config = ExperimentConfig::load(&args.config)?;
    let (policy, fov_radius) = load_policy_checkpoint(&args.checkpoint)?;
    let maps = load_map_dir(&args.maps)?;
    let mode = match config.eval.action_mode {
        EvalModeName::Sample => EvalMode::Sample,
        EvalModeName::Greedy => EvalMode::Greedy,
    };
    let seeds: Vec<u64> = config
        .eval
        .seeds
        .iter()
        .map(|s| s.wrapping_add(args.seed))
        .collect();
    let report = run_eval(
        &policy,
        &maps,
        &seeds,
        config.env.n_agents,
        fov_radius,
        config.env.t_max,
        mode,
    )?;
    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    emit_eval_csv(&report, &mut w)?;
    w.flush()?;
    println!(
        "evaluated {} maps: mean throughput {:.5}, mean normalized collisions {:.5}, report -> {}",
        report.per_map.len(),
        report.mean_throughput(),
        report.mean_normalized_collisions(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_map_dir(dir: &PathBuf) -> anyhow::Result<Vec<GridMap>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "map"))
        .collect();
    paths.sort();
    anyhow::ensure!(!paths.is_empty(), "no .map files in {}", dir.display());
    paths
        .iter()
        .map(|p| {
            let mut r = BufReader::new(fs::File::open(p)?);
            Ok(load_map(&mut r)?)
        })
        .collect()
}

fn cmd_gen_maps(args: GenMapsArgs) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(&args.out)?;
    let maps = gen_eval_maps(
        args.random,
        args.maze,
        args.width,
        args.height,
        args.density,
        args.seed,
    )?;
    for (i, map) in maps.iter().enumerate() {
        let kind = if i < args.random { "random" } else { "maze" };
        let path = args.out.join(format!("{i:03}_{kind}.map"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        save_map(map, &mut w)?;
    }
    println!("wrote {} maps to {}", maps.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn transform_list() -> Vec<(String, OrderTransform)> {
    vec![
        ("scale(0.5)".into(), OrderTransform::Scale(0.5)),
        ("scale(2)".into(), OrderTransform::Scale(2.0)),
        ("scale(10)".into(), OrderTransform::Scale(10.0)),
        ("per_step_shift(0.5)".into(), OrderTransform::PerStepShift(0.5)),
    ]
}

fn cmd_verify_theory(args: VerifyTheoryArgs) -> anyhow::Result<ExitCode> {
    let bounds = GameSizeBounds {
        max_agents: args.max_agents,
        max_states: args.max_states,
        max_actions: args.max_actions,
        max_horizon: args.max_horizon,
        profile_bound: args.profile_bound,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut summary = BufWriter::new(fs::File::create(&args.out)?);
    writeln!(summary, "check,instance,transform,result")?;
    let mut failures = 0usize;

    // Best-response and Nash invariance under order-preserving transforms,
    // applied to every agent of every game.
    for game_idx in 0..args.games {
        let game = random_game(&mut rng, &bounds);
        for (name, transform) in transform_list() {
            let transforms: Vec<Option<OrderTransform>> =
                vec![Some(transform.clone()); game.n_agents];
            let report = check_invariance(&game, &transforms)?;
            let ok = report.invariant();
            print_check(&mut summary, "nash_invariance", game_idx, &name, ok)?;
            if !ok {
                failures += 1;
                if let Some(w) = report.witness {
                    eprintln!("game {game_idx} under {name}: {w}");
                }
            }
        }
        // A strictly increasing transform of whole-trajectory returns.
        let monotone =
            OrderTransform::monotone_from_fn(&game, 0, |g| 2.0 * g + 0.125 * g.powi(3))?;
        let mut transforms: Vec<Option<OrderTransform>> = vec![None; game.n_agents];
        transforms[0] = Some(monotone);
        let report = check_invariance(&game, &transforms)?;
        print_check(
            &mut summary,
            "nash_invariance",
            game_idx,
            "monotone_on_returns",
            report.invariant(),
        )?;
        if !report.invariant() {
            failures += 1;
        }
    }

    // Negative control: an order-breaking return map must be caught.
    let control = negative_control_game();
    let returns = realized_returns(&control, 0)?;
    let top = *returns.last().unwrap();
    let pairs: Vec<(f64, f64)> = returns.iter().map(|&g| (g, if g == top { -g } else { g })).collect();
    let broken = apply_return_map_unchecked(&control, 0, pairs);
    let caught = !armslab_core::theory::check_invariance_against(&control, &broken)?.invariant();
    print_check(&mut summary, "negative_control", 0, "negate_best_return", caught)?;
    if !caught {
        failures += 1;
    }

    // Potential-based shaping leaves optimal-action sets exactly unchanged.
    for mdp_idx in 0..args.mdps {
        let mdp = random_mdp(&mut rng, args.max_states, args.max_actions, args.max_horizon);
        let base = value_iteration(&mdp)?;
        let mut ok = true;
        for _ in 0..args.potentials {
            let phi = random_potential(&mut rng, mdp.n_states);
            let shaped = value_iteration_shaped(&mdp, &phi)?;
            if shaped.optimal_actions != base.optimal_actions {
                ok = false;
                break;
            }
        }
        print_check(&mut summary, "pbrs_invariance", mdp_idx, "potential", ok)?;
        if !ok {
            failures += 1;
        }
    }

    summary.flush()?;
    if failures == 0 {
        println!(
            "PASS: {} games x {} transforms, negative control, {} mdps x {} potentials (summary -> {})",
            args.games,
            transform_list().len() + 1,
            args.mdps,
            args.potentials,
            args.out.display()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: {failures} checks failed (summary -> {})", args.out.display());
        Ok(ExitCode::from(1))
    }
}

fn negative_control_game() -> TinyGame {
    TinyGame {
        n_agents: 1,
        n_states: 1,
        actions_per_agent: vec![2],
        transition: vec![0, 0],
        reward: vec![vec![0.5, 1.0]],
        return_maps: vec![None],
        horizon: 1,
        discount: 1.0,
        initial_state: 0,
    }
}

fn print_check<W: Write>(
    summary: &mut W,
    check: &str,
    instance: usize,
    transform: &str,
    ok: bool,
) -> std::io::Result<()> {
    let result = if ok { "PASS" } else { "FAIL" };
    println!("{result} {check} instance={instance} transform={transform}");
    writeln!(summary, "{check},{instance},{transform},{result}")
}

fn cmd_plot(args: PlotArgs) -> anyhow::Result<ExitCode> {
    let mut series = Vec::new();
    for spec in &args.series {
        let (label, files) = spec
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("series spec {spec:?} must be label=file1,file2,..."))?;
        let mut xs: Option<Vec<f64>> = None;
        let mut ys_per_seed = Vec::new();
        for file in files.split(',') {
            let mut r = BufReader::new(fs::File::open(file)?);
            let (x, y) = read_xy_column(&mut r, &args.x, &args.y)?;
            match &xs {
                None => xs = Some(x),
                Some(existing) if *existing != x => {
                    anyhow::bail!("series {label:?}: {file} has a different x axis");
                }
                Some(_) => {}
            }
            ys_per_seed.push(y);
        }
        series.push(PlotSeries {
            name: label.to_string(),
            xs: xs.unwrap_or_default(),
            ys_per_seed,
        });
    }
    let model = PlotModel::build(&series, &args.x, &args.y)?;
    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    emit_plot(&model, &mut w)?;
    w.flush()?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_grad_check(args: GradCheckArgs) -> anyhow::Result<ExitCode> {
    let report = run_grad_battery(args.instances, args.epsilon, args.seed);
    println!("{report}");
    if report.passes(args.threshold) {
        println!("PASS: max relative error {:.3e} < {:.1e}", report.max_rel_err(), args.threshold);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: max relative error {:.3e} >= {:.1e}", report.max_rel_err(), args.threshold);
        Ok(ExitCode::from(1))
    }
}
