//! Command-line interface.
//!
//! Every subcommand takes `--config <path>` (TOML, grammar in
//! [`crate::config`]) and `--seed <u64>` (overrides the config's seed).
//! Exit status: 0 on success, 1 on usage/config errors, 2 on numerical
//! failures. All randomness flows from the seed, so reruns reproduce
//! their artifacts byte for byte. `LIMITRAIN_THREADS` caps worker
//! parallelism (results do not depend on it).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baseline::{linearize_hydraulic, solve_lqr, LqrRecord, LtiStateSpace};
use crate::config::{Config, ImitatorMode, PlantKind};
use crate::controller::{
    train_controller, ControllerMeta, ControllerTrainConfig, RolloutConfig,
};
use crate::dataset::{balance, record_and_extract, split, Dataset, SignalKind, SignalSpec};
use crate::error::{Error, Result};
use crate::eval::{
    compare, run_closed_loop, FeedbackLaw, GainController, NetController,
    RunRecord, ScenarioKey,
};
use crate::imitator::{
    build_structure, construct_exact_hydraulic, construct_exact_linear, construct_exact_saturation,
    construct_exact_stop, fold_unit_scales, hydraulic_structure, max_rollout_deviation,
    train_imitator, ImitatorMeta,
};
use crate::linalg::Mat;
use crate::net::modelfile::{load_net, save_net};
use crate::net::{AdamConfig, Mlp};
use crate::plant::{simulate, AnyPlant, Plant};

#[derive(Parser)]
#[command(
    name = "limitrain",
    version,
    about = "Neural-network controller synthesis for plants with limiters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop simulation of the configured plant; writes a trajectory CSV.
    Simulate(Common),
    /// Record plant responses, balance categories, write the dataset.
    GenData(Common),
    /// Build an imitator: exact construction (--exact) or training (--train).
    BuildImitator {
        #[command(flatten)]
        common: Common,
        /// Construct the imitator analytically from the plant parameters.
        #[arg(long, conflicts_with = "train")]
        exact: bool,
        /// Train the imitator on the generated dataset.
        #[arg(long)]
        train: bool,
    },
    /// Train an imitator from the dataset (same as build-imitator --train).
    TrainImitator(Common),
    /// Train the controller by backpropagation through the frozen imitator.
    TrainController(Common),
    /// Design the LQR baseline on the limiter-free linearization.
    Lqr(Common),
    /// Closed-loop evaluation of an artifact on the true plant.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// What to evaluate: controller | lqr | imitator.
        #[arg(long, default_value = "controller")]
        subject: String,
    },
    /// Evaluate controller and LQR on the same scenario, print the table.
    Compare(Common),
    /// Full hydraulic pipeline with built-in defaults.
    DemoHydraulic {
        #[command(flatten)]
        common: Common,
        /// Train the imitator from data instead of exact construction.
        #[arg(long)]
        train_imitator: bool,
    },
}

/// Entry point for the binary.
pub fn run_from_env() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    run(&args)
}

/// Runs the CLI on an argv-style slice and returns the exit status.
pub fn run(args: &[String]) -> i32 {
    init_thread_pool();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("LIMITRAIN_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(c) => cmd_simulate(&load_config(&c, false)?),
        Command::GenData(c) => cmd_gen_data(&load_config(&c, false)?).map(|_| ()),
        Command::BuildImitator { common, exact, train } => {
            let cfg = load_config(&common, false)?;
            let mode = if train {
                ImitatorMode::Train
            } else if exact {
                ImitatorMode::Exact
            } else {
                cfg.imitator.mode
            };
            cmd_build_imitator(&cfg, mode).map(|_| ())
        }
        Command::TrainImitator(c) => {
            cmd_build_imitator(&load_config(&c, false)?, ImitatorMode::Train).map(|_| ())
        }
        Command::TrainController(c) => cmd_train_controller(&load_config(&c, false)?),
        Command::Lqr(c) => cmd_lqr(&load_config(&c, false)?).map(|_| ()),
        Command::Evaluate { common, subject } => {
            let cfg = load_config(&common, false)?;
            match subject.as_str() {
                "controller" => cmd_evaluate_controller(&cfg, "controller").map(|_| ()),
                "lqr" => cmd_evaluate_lqr(&cfg, "lqr").map(|_| ()),
                "imitator" => cmd_evaluate_imitator(&cfg),
                other => Err(Error::Config(format!(
                    "unknown evaluation subject `{other}` (controller | lqr | imitator)"
                ))),
            }
        }
        Command::Compare(c) => cmd_compare(&load_config(&c, false)?),
        Command::DemoHydraulic { common, train_imitator } => {
            let cfg = load_config(&common, true)?;
            cmd_demo(&cfg, train_imitator)
        }
    }
}

fn load_config(common: &Common, demo: bool) -> Result<Config> {
    let mut cfg = match (&common.config, demo) {
        (Some(path), _) => Config::load(path)?,
        (None, true) => Config::demo_hydraulic(),
        (None, false) => {
            return Err(Error::Config(
                "--config <path> is required for this command".into(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg)
}

fn out_path(cfg: &Config, file: &str) -> PathBuf {
    cfg.output_dir.join(file)
}

fn meta_path(model_path: &Path) -> PathBuf {
    let mut p = model_path.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

fn cmd_simulate(cfg: &Config) -> Result<()> {
    let plant = cfg.plant.build()?;
    let sig = cfg.simulate.signal.as_ref().ok_or_else(|| {
        Error::Config("[simulate.signal] is required (kind, amplitude, frequency, duration)".into())
    })?;
    let spec = SignalSpec {
        kind: sig.kind,
        amplitude: sig.amplitude,
        frequency: sig.frequency,
        duration: sig.duration,
        dt: cfg.plant.dt,
    };
    let samples = spec.samples()?;
    let x0 = resolve_initial_state(&cfg.simulate.initial_state, plant.as_plant())?;
    let traj = simulate(plant.as_plant(), &samples, &x0, samples.len() - 1)?;
    let path = out_path(cfg, &cfg.simulate.file);
    traj.write_csv(&path)?;
    println!("simulate: {} rows -> {}", traj.len(), path.display());
    Ok(())
}

fn resolve_initial_state(configured: &[f64], plant: &dyn Plant) -> Result<Vec<f64>> {
    if configured.is_empty() {
        return Ok(vec![0.0; plant.state_dim()]);
    }
    if configured.len() != plant.state_dim() {
        return Err(Error::Config(format!(
            "initial_state has {} entries, plant expects {}",
            configured.len(),
            plant.state_dim()
        )));
    }
    Ok(configured.to_vec())
}

fn cmd_gen_data(cfg: &Config) -> Result<Dataset> {
    let plant = cfg.plant.build()?;
    let grid = cfg.signals.build_grid(&plant, &cfg.plant)?;
    let ds = record_and_extract(
        plant.as_plant(),
        &grid,
        cfg.dataset.format,
        &cfg.plant.hash(),
        cfg.seed,
    )?;
    let ds = if plant.as_plant().n_limiters() > 0 {
        balance(ds, cfg.dataset.balance_tolerance, cfg.seed)?
    } else {
        ds
    };
    let path = out_path(cfg, &cfg.dataset.file);
    ds.write(&path)?;
    let (no_limit, limited) = ds.category_counts();
    println!(
        "gen-data: {} pairs ({no_limit} no_limit, {limited} limit_reached) -> {}",
        ds.pairs.len(),
        path.display()
    );
    for (cat, count) in ds.subcategory_counts() {
        println!("  {cat}: {count}");
    }
    Ok(ds)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ImitatorBuildReport {
    mode: String,
    hidden_width: usize,
    /// Held-out MSE for trained imitators; exact imitators instead carry
    /// the worst state deviation over a 1000-step probe rollout.
    held_out_mse: Option<f64>,
    max_probe_deviation: Option<f64>,
}

fn cmd_build_imitator(cfg: &Config, mode: ImitatorMode) -> Result<Mlp> {
    let plant = cfg.plant.build()?;
    let spec = plant.imitator_spec(cfg.imitator.feedback);
    let model_path = out_path(cfg, &cfg.imitator.file);

    let (net, report) = match mode {
        ImitatorMode::Exact => {
            let net = match &plant {
                AnyPlant::Saturation(link) => construct_exact_saturation(link),
                AnyPlant::Stop(link) => construct_exact_stop(link)?,
                AnyPlant::Hydraulic(drive) => construct_exact_hydraulic(drive),
                AnyPlant::Linear(lin) => construct_exact_linear(lin),
            };
            let deviation = probe_deviation(&net, &plant, cfg)?;
            // A linear imitator is a single layer with no hidden width.
            let hidden_width = match net.layers().len() {
                0 | 1 => 0,
                n => net.layers()[n - 2].output_dim,
            };
            let report = ImitatorBuildReport {
                mode: "exact".into(),
                hidden_width,
                held_out_mse: None,
                max_probe_deviation: Some(deviation),
            };
            println!(
                "build-imitator: exact construction, max probe deviation {deviation:.3e}"
            );
            (net, report)
        }
        ImitatorMode::Train => {
            let ds_path = out_path(cfg, &cfg.dataset.file);
            if !ds_path.exists() {
                return Err(Error::Config(format!(
                    "dataset {} not found; run gen-data first",
                    ds_path.display()
                )));
            }
            // Training happens on unit-normalized pairs (well-conditioned
            // regardless of the plant's physical scales); the scales are
            // folded back into the weights so the stored imitator maps
            // raw states to raw states. The held-out MSE is reported in
            // normalized units.
            let mut ds = Dataset::read(&ds_path)?;
            let scales = crate::dataset::normalize_unit(&mut ds);
            let structure = match &plant {
                AnyPlant::Hydraulic(_) => hydraulic_structure(),
                _ => build_structure(&spec)?,
            };
            if ds.input_dim() != structure.dims[0]
                || ds.target_dim() != *structure.dims.last().unwrap()
            {
                return Err(Error::Config(format!(
                    "dataset pairs are {}→{} but the imitator structure is {}→{};                      check [dataset] format against [imitator] feedback",
                    ds.input_dim(),
                    ds.target_dim(),
                    structure.dims[0],
                    structure.dims.last().unwrap()
                )));
            }
            let (train_set, test_set) = split(&ds, cfg.dataset.split_ratio, cfg.seed)?;
            let mut net = structure.build_seeded(cfg.seed)?;
            let result = train_imitator(
                &mut net,
                &train_set,
                &test_set,
                &cfg.imitator.train_config(cfg.seed),
            )?;
            fold_unit_scales(&mut net, &scales)?;
            println!(
                "train-imitator: {} epochs, train MSE {:.3e}, held-out MSE {:.3e} (unit-normalized)",
                result.train.epochs_run, result.train.final_loss, result.held_out_mse
            );
            let report = ImitatorBuildReport {
                mode: "train".into(),
                hidden_width: structure.dims[structure.dims.len() - 2],
                held_out_mse: Some(result.held_out_mse),
                max_probe_deviation: None,
            };
            (net, report)
        }
    };

    save_net(&net, &model_path)?;
    let meta = ImitatorMeta {
        n_sat: spec.n_sat,
        n_lin: spec.n_lin,
        feedback_mode: cfg.imitator.feedback,
        dt: cfg.plant.dt,
        candidate_mode: cfg.plant.candidate_mode,
    };
    meta.save(&meta_path(&model_path))?;
    let report_path = out_path(cfg, "imitator_report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!("build-imitator: model -> {}", model_path.display());
    Ok(net)
}

/// Deviation of an exact imitator from the plant over a deterministic
/// probe: a limiter-reaching meander when the plant has limiters, a
/// unit-amplitude meander otherwise.
fn probe_deviation(net: &Mlp, plant: &AnyPlant, cfg: &Config) -> Result<f64> {
    let p = plant.as_plant();
    let tau = cfg.plant.characteristic_time();
    let freq = 1.0 / (2.0 * std::f64::consts::PI * tau);
    let amplitude = if p.n_limiters() > 0 {
        let grid = crate::dataset::default_grid(p, tau)?;
        grid.iter().map(|s| s.amplitude).fold(0.0, f64::max)
    } else {
        1.0
    };
    let n_steps = 1000usize;
    let spec = SignalSpec {
        kind: SignalKind::Meander,
        amplitude,
        frequency: freq,
        duration: (n_steps + 1) as f64 * cfg.plant.dt,
        dt: cfg.plant.dt,
    };
    let samples = spec.samples()?;
    let x0 = vec![0.0; p.state_dim()];
    max_rollout_deviation(net, p, &samples, &x0, n_steps.min(samples.len()))
}

fn load_imitator(cfg: &Config) -> Result<(Mlp, ImitatorMeta)> {
    let model_path = out_path(cfg, &cfg.imitator.file);
    if !model_path.exists() {
        return Err(Error::Config(format!(
            "imitator {} not found; run build-imitator first",
            model_path.display()
        )));
    }
    let net = load_net(&model_path)?;
    let meta = ImitatorMeta::load(&meta_path(&model_path))?;
    Ok((net, meta))
}

fn cmd_train_controller(cfg: &Config) -> Result<()> {
    let plant = cfg.plant.build()?;
    let (imitator, meta) = load_imitator(cfg)?;
    if (meta.dt - cfg.plant.dt).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "imitator was built at dt = {}, plant config says {}",
            meta.dt, cfg.plant.dt
        )));
    }
    // The imitator must be validated before it stands in for the plant.
    let report_path = out_path(cfg, "imitator_report.json");
    if report_path.exists() {
        let report: ImitatorBuildReport =
            serde_json::from_str(&std::fs::read_to_string(&report_path)?)
                .map_err(|e| Error::Format(format!("imitator report: {e}")))?;
        if let Some(mse) = report.held_out_mse {
            if mse > cfg.evaluate.max_imitator_mse {
                return Err(Error::Numerical(format!(
                    "imitator held-out MSE {mse:.3e} exceeds the {:.3e} gate; \
                     retrain it before training a controller on it",
                    cfg.evaluate.max_imitator_mse
                )));
            }
        }
    }

    let spec = cfg.controller.spec(&plant)?;
    let mut controller = spec.build_skeleton(cfg.seed)?;
    let rollout = controller_rollout_config(cfg, &plant)?;
    let train_cfg = ControllerTrainConfig {
        batches: cfg.controller.batches,
        batch_size: cfg.controller.batch_size,
        adam: AdamConfig {
            learning_rate: cfg.controller.learning_rate,
            ..AdamConfig::default()
        },
        target_loss: cfg.controller.target_loss,
        seed: cfg.seed,
    };
    let report = train_controller(&mut controller, &spec, &imitator, &rollout, &train_cfg)?;
    println!(
        "train-controller: {} batches, rollout loss {:.4e} -> {:.4e}",
        report.batches_run,
        report.loss_history.first().copied().unwrap_or(f64::NAN),
        report.final_loss
    );

    let model_path = out_path(cfg, &cfg.controller.file);
    save_net(&controller, &model_path)?;
    ControllerMeta {
        spec,
        rollout,
    }
    .save(&meta_path(&model_path))?;
    std::fs::write(
        out_path(cfg, "controller_report.json"),
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!("train-controller: model -> {}", model_path.display());
    Ok(())
}

fn controller_rollout_config(cfg: &Config, plant: &AnyPlant) -> Result<RolloutConfig> {
    let n = plant.as_plant().state_dim();
    let (init_lo, init_hi) = if cfg.controller.init_lo.is_empty() {
        default_init_box(plant)
    } else {
        (cfg.controller.init_lo.clone(), cfg.controller.init_hi.clone())
    };
    if init_lo.len() != n || init_hi.len() != n {
        return Err(Error::Config(format!(
            "controller init box needs {n} entries per side"
        )));
    }
    Ok(RolloutConfig {
        horizon: cfg.controller.horizon,
        reference: cfg.controller.reference.clone(),
        init_lo,
        init_hi,
        init_scale: cfg.controller.init_scale,
        loss: cfg.controller.loss,
        dt: cfg.plant.dt,
    })
}

/// Initial-state box when the config leaves it empty: limiter bounds for
/// constrained coordinates, unit range otherwise.
fn default_init_box(plant: &AnyPlant) -> (Vec<f64>, Vec<f64>) {
    let p = plant.as_plant();
    let n = p.state_dim();
    let mut hi = vec![1.0; n];
    match plant {
        AnyPlant::Saturation(l) => hi[0] = l.bound,
        AnyPlant::Stop(l) => {
            hi[0] = l.bound;
            hi[1] = 2.0 * l.bound / l.time_constant;
        }
        AnyPlant::Hydraulic(d) => {
            hi[0] = d.params.cradle_bound;
            hi[1] = d.params.pressure_bound;
        }
        AnyPlant::Linear(_) => {}
    }
    let lo = hi.iter().map(|v| -v).collect();
    (lo, hi)
}

fn cmd_lqr(cfg: &Config) -> Result<crate::baseline::LqrSolution> {
    let plant = cfg.plant.build()?;
    let sys = limiter_free_model(cfg, &plant)?;
    let n = sys.order();
    let q = if cfg.lqr.q_diagonal.is_empty() {
        Mat::identity(n)
    } else {
        if cfg.lqr.q_diagonal.len() != n {
            return Err(Error::Config(format!("q_diagonal needs {n} entries")));
        }
        let mut q = Mat::zeros(n, n);
        for (i, v) in cfg.lqr.q_diagonal.iter().enumerate() {
            q.set(i, i, *v);
        }
        q
    };
    let sol = solve_lqr(&sys, &q, cfg.lqr.r, cfg.lqr.tolerance, cfg.lqr.max_iterations)?;
    let record = LqrRecord::new(&sol, &q, cfg.lqr.r);
    let json_path = out_path(cfg, &cfg.lqr.file);
    record.save(&json_path)?;
    let csv_path = out_path(cfg, &cfg.lqr.gain_file);
    std::fs::write(&csv_path, sol.gain_csv())?;
    println!(
        "lqr: residual {:.3e} after {} iterations, gain -> {}",
        sol.residual,
        sol.iterations,
        csv_path.display()
    );
    Ok(sol)
}

/// The linear model the LQR is designed on: limiters removed.
fn limiter_free_model(cfg: &Config, plant: &AnyPlant) -> Result<LtiStateSpace> {
    match plant {
        AnyPlant::Hydraulic(d) => linearize_hydraulic(&d.params),
        AnyPlant::Saturation(l) => {
            let (a_d, b_d) = l.discretized();
            Ok(LtiStateSpace {
                a: Mat::from_rows(&[vec![a_d]])?,
                b: vec![b_d],
                dt: cfg.plant.dt,
            })
        }
        AnyPlant::Stop(l) => {
            let cand = l.candidate_map();
            let a = Mat::from_rows(&[
                vec![cand.at(0, 0), cand.at(0, 1)],
                vec![cand.at(1, 0), cand.at(1, 1)],
            ])?;
            Ok(LtiStateSpace {
                a,
                b: vec![cand.at(0, 2), cand.at(1, 2)],
                dt: cfg.plant.dt,
            })
        }
        AnyPlant::Linear(_) => Err(Error::Config(
            "the LQR baseline needs a state-space plant (saturation, stop, or hydraulic)".into(),
        )),
    }
}

fn evaluation_scenario(cfg: &Config, plant: &AnyPlant) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let p = plant.as_plant();
    let x0 = resolve_initial_state(&cfg.evaluate.initial_state, p)?;
    let n_steps = (cfg.evaluate.duration / cfg.plant.dt).round() as usize;
    if n_steps == 0 {
        return Err(Error::Config("evaluation duration is below one sample".into()));
    }
    let refs = vec![cfg.evaluate.reference; n_steps + 1];
    Ok((x0, refs, n_steps))
}

fn run_evaluation(
    cfg: &Config,
    plant: &AnyPlant,
    law: &mut dyn FeedbackLaw,
    label: &str,
    traj_file: &str,
    metrics_file: &str,
) -> Result<RunRecord> {
    let (x0, refs, n_steps) = evaluation_scenario(cfg, plant)?;
    let (traj, metrics) =
        run_closed_loop(plant.as_plant(), law, &refs, &x0, n_steps, cfg.evaluate.band)?;
    let traj_path = out_path(cfg, traj_file);
    traj.write_csv(&traj_path)?;
    let record = RunRecord {
        label: label.to_string(),
        scenario: ScenarioKey {
            plant_config_hash: cfg.plant.hash(),
            initial_state: x0,
            duration: cfg.evaluate.duration,
            reference: cfg.evaluate.reference,
        },
        metrics,
    };
    std::fs::write(
        out_path(cfg, metrics_file),
        serde_json::to_string_pretty(&record).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    match record.metrics.settling_time {
        Some(t) => println!(
            "evaluate[{label}]: settled in {t:.3} s, overshoot {:.4}, steady-state error {:.3e}",
            record.metrics.overshoot, record.metrics.steady_state_error
        ),
        None => println!(
            "evaluate[{label}]: not settled within {} s (steady-state error {:.3e})",
            cfg.evaluate.duration, record.metrics.steady_state_error
        ),
    }
    println!("evaluate[{label}]: trajectory -> {}", traj_path.display());
    Ok(record)
}

fn cmd_evaluate_controller(cfg: &Config, label: &str) -> Result<RunRecord> {
    let plant = cfg.plant.build()?;
    let model_path = out_path(cfg, &cfg.controller.file);
    if !model_path.exists() {
        return Err(Error::Config(format!(
            "controller {} not found; run train-controller first",
            model_path.display()
        )));
    }
    let net = load_net(&model_path)?;
    let meta = ControllerMeta::load(&meta_path(&model_path))?;
    if (meta.rollout.dt - cfg.plant.dt).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "controller was trained at dt = {}, plant config says {}",
            meta.rollout.dt, cfg.plant.dt
        )));
    }
    let mut law = NetController {
        net: &net,
        spec: &meta.spec,
    };
    run_evaluation(
        cfg,
        &plant,
        &mut law,
        label,
        &cfg.evaluate.trajectory_file,
        &cfg.evaluate.metrics_file,
    )
}

fn cmd_evaluate_lqr(cfg: &Config, label: &str) -> Result<RunRecord> {
    let plant = cfg.plant.build()?;
    let record_path = out_path(cfg, &cfg.lqr.file);
    if !record_path.exists() {
        return Err(Error::Config(format!(
            "LQR record {} not found; run lqr first",
            record_path.display()
        )));
    }
    let record = LqrRecord::load(&record_path)?;
    let mut law = GainController {
        gain: record.gain.clone(),
        regulated: plant.output_index(),
    };
    run_evaluation(
        cfg,
        &plant,
        &mut law,
        label,
        &cfg.evaluate.trajectory_file,
        &cfg.evaluate.metrics_file,
    )
}

fn cmd_evaluate_imitator(cfg: &Config) -> Result<()> {
    let plant = cfg.plant.build()?;
    let (net, _meta) = load_imitator(cfg)?;
    let deviation = probe_deviation(&net, &plant, cfg)?;
    let report = serde_json::json!({ "max_probe_deviation": deviation });
    let path = out_path(cfg, "imitator_eval.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!("evaluate[imitator]: max plant deviation {deviation:.3e} -> {}", path.display());
    Ok(())
}

fn cmd_compare(cfg: &Config) -> Result<()> {
    let a = with_eval_files(cfg, "nn_trajectory.csv", "nn_metrics.json", |c| {
        cmd_evaluate_controller(c, "nn")
    })?;
    let b = with_eval_files(cfg, "lqr_trajectory.csv", "lqr_metrics.json", |c| {
        cmd_evaluate_lqr(c, "lqr")
    })?;
    let table = compare(&a, &b)?;
    print!("{table}");
    std::fs::write(out_path(cfg, "comparison.csv"), table.to_csv_string())?;
    std::fs::write(
        out_path(cfg, "comparison.json"),
        serde_json::to_string_pretty(&table).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!("compare: table -> {}", out_path(cfg, "comparison.csv").display());
    Ok(())
}

fn with_eval_files<F>(cfg: &Config, traj: &str, metrics: &str, f: F) -> Result<RunRecord>
where
    F: FnOnce(&Config) -> Result<RunRecord>,
{
    let mut scoped = cfg.clone();
    scoped.evaluate.trajectory_file = traj.to_string();
    scoped.evaluate.metrics_file = metrics.to_string();
    f(&scoped)
}

/// Mean squared prediction error on raw pairs, with each output residual
/// divided by its column's peak magnitude.
fn normalized_heldout_mse(
    net: &Mlp,
    test: &[crate::dataset::TrainingPair],
    target_scales: &[f64],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidParam("empty held-out split".into()));
    }
    let mut total = 0.0;
    for pair in test {
        let out = net.forward(&pair.input)?;
        let mut acc = 0.0;
        for ((p, t), s) in out.iter().zip(&pair.target).zip(target_scales) {
            let e = if *s > 0.0 { (p - t) / s } else { p - t };
            acc += e * e;
        }
        total += acc / out.len() as f64;
    }
    Ok(total / test.len() as f64)
}

fn cmd_demo(cfg: &Config, train_imitator_flag: bool) -> Result<()> {
    if cfg.plant.kind != PlantKind::Hydraulic {
        return Err(Error::Config("demo-hydraulic needs plant.kind = \"hydraulic\"".into()));
    }
    println!("demo-hydraulic: seed {}, output -> {}", cfg.seed, cfg.output_dir.display());

    let ds = cmd_gen_data(cfg)?;
    let mode = if train_imitator_flag {
        ImitatorMode::Train
    } else {
        cfg.imitator.mode
    };
    let imitator = cmd_build_imitator(cfg, mode)?;

    // Validate the imitator against the held-out split regardless of how
    // it was built; the error is measured in unit-normalized output
    // coordinates so the gate is scale-free.
    let scales = {
        let mut normed = ds.clone();
        crate::dataset::normalize_unit(&mut normed)
    };
    let (_, test_set) = split(&ds, cfg.dataset.split_ratio, cfg.seed)?;
    let held_out = normalized_heldout_mse(&imitator, &test_set, &scales.target)?;
    println!("demo-hydraulic: imitator held-out MSE {held_out:.3e} (unit-normalized)");
    if held_out > cfg.evaluate.max_imitator_mse {
        return Err(Error::Numerical(format!(
            "imitator held-out MSE {held_out:.3e} exceeds the {:.3e} gate",
            cfg.evaluate.max_imitator_mse
        )));
    }

    cmd_train_controller(cfg)?;
    cmd_lqr(cfg)?;
    cmd_compare(cfg)?;
    println!("demo-hydraulic: done");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("limitrain".to_string())
            .chain(args.iter().map(|s| s.to_string()))
            .collect()
    }

    #[test]
    fn missing_config_is_usage_error() {
        assert_eq!(run(&argv(&["gen-data"])), 1);
    }

    #[test]
    fn nonexistent_config_is_usage_error() {
        assert_eq!(run(&argv(&["gen-data", "--config", "/nonexistent.toml"])), 1);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(&argv(&["gen-data", "--frobnicate"])), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&argv(&["--help"])), 0);
    }
}
