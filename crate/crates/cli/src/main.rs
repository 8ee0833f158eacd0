use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wbc::envgen::{derive_seed, generate_scene, read_trace, Env, TraceRecord, TraceWriter};
use wbc::harness::{
    evaluate, load_config, render_field_pgm, render_snapshot, run_episode_traced, Config, PolicyController,
    RenderOptions,
};
use wbc::pathfield::{extract_path, rasterize_world, solve_harmonic, Convergence};
use wbc::policy::Policy;
use wbc::ppo::Trainer;

#[derive(Parser)]
#[command(name = "wbc", version, about = "Whole-body control of a planar mobile manipulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scene seed (and, for training, the training seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "WBC_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a trainer checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint at a fixed tolerance.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sample actions instead of taking the argmax.
        #[arg(long)]
        sample: bool,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write step traces of the first N episodes.
        #[arg(long, default_value_t = 0)]
        traces: usize,
    },
    /// Generate a scene, print it as JSON and render it.
    InspectEnv {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the potential field of a scene and dump it as PGM plus the path as CSV.
    HpfDump {
        #[command(flatten)]
        common: Common,
    },
    /// Render an episode trace to SVG.
    Render {
        #[command(flatten)]
        common: Common,
        /// JSONL trace written by `eval --traces`.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        lidar: bool,
    },
}

fn load(common: &Common) -> Result<Config> {
    let mut config = match &common.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        config.spec.seed = seed;
        config.train.seed = seed;
        config.eval.seed = seed;
    }
    let v = config.violations();
    if !v.is_empty() {
        bail!("invalid config:\n  {}", v.join("\n  "));
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(config)
}

fn train(common: &Common, resume: Option<&Path>) -> Result<()> {
    let config = load(common)?;
    fs::write(common.out.join("config.json"), config.to_json())?;
    let setup = config.train_setup();
    let mut trainer = match resume {
        Some(p) => Trainer::resume(setup, p).with_context(|| format!("resuming from {}", p.display()))?,
        None => Trainer::new(setup)?,
    };
    let last = trainer.train(&common.out, |r| {
        let n = r.episodes.len();
        let success = r
            .episodes
            .iter()
            .filter(|e| e.termination == wbc::reward::Termination::Success)
            .count();
        let mean_return = if n > 0 {
            r.episodes.iter().map(|e| e.episode_return).sum::<f64>() / n as f64
        } else {
            f64::NAN
        };
        println!(
            "update {:>5}  steps {:>9}  episodes {:>4}  success {:>4}  return {:>9.2}  tol {:.3}  pi {:+.4}  vf {:.4}  ent {:.3}  kl {:.4}",
            r.update,
            r.steps,
            n,
            success,
            mean_return,
            r.tolerance,
            r.stats.policy_loss,
            r.stats.value_loss,
            r.stats.entropy,
            r.stats.approx_kl
        );
    })?;
    println!("final checkpoint: {}", last.display());
    Ok(())
}

fn eval(
    common: &Common,
    checkpoint: &Path,
    sample: bool,
    episodes: Option<usize>,
    tolerance: Option<f64>,
    traces: usize,
) -> Result<()> {
    let mut config = load(common)?;
    config.eval.sample |= sample;
    if let Some(n) = episodes {
        config.eval.episodes = n;
    }
    if tolerance.is_some() {
        config.eval.tolerance = tolerance;
    }
    config = config.validate()?;
    let policy = Arc::new(
        Policy::load(config.policy_config(), checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?,
    );
    let controller = PolicyController::new(Arc::clone(&policy), config.eval.sample);
    let env = config.env_config();
    let report = evaluate(
        &controller,
        &env,
        config.eval_tolerance(),
        config.eval.episodes,
        config.eval.seed,
    )?;
    print!("{}", report.to_table());
    fs::write(common.out.join("eval_report.json"), report.to_json())?;
    if traces > 0 {
        let dir = common.out.join("traces");
        fs::create_dir_all(&dir)?;
        let mut env = Env::new(Arc::new(env))?;
        for i in 0..traces.min(config.eval.episodes) as u64 {
            let path = dir.join(format!("episode_{i:04}.jsonl"));
            let mut w = TraceWriter::new(BufWriter::new(File::create(&path)?));
            let mut c = controller.clone();
            run_episode_traced(
                &mut env,
                &mut c,
                derive_seed(config.eval.seed, i),
                config.eval_tolerance(),
                &mut w,
            )?;
            w.into_inner().flush()?;
        }
        println!("traces: {}", dir.display());
    }
    Ok(())
}

fn inspect_env(common: &Common) -> Result<()> {
    let config = load(common)?;
    let env = config.env_config();
    let scene = generate_scene(&env, config.spec.seed)?;
    println!("{}", serde_json::to_string_pretty(&scene)?);
    let path = common.out.join(format!("scene_{}.svg", config.spec.seed));
    render_snapshot(
        &env,
        &scene,
        std::slice::from_ref(&scene.start),
        config.episode.tolerance,
        &RenderOptions {
            lidar: true,
            ..RenderOptions::default()
        },
        &path,
    )?;
    eprintln!("rendered {}", path.display());
    Ok(())
}

fn hpf_dump(common: &Common) -> Result<()> {
    let config = load(common)?;
    let env = config.env_config();
    let scene = generate_scene(&env, config.spec.seed)?;
    let hpf = &config.hpf;
    let field = rasterize_world(
        &scene.world,
        hpf.cell_size,
        config.robot.link_capsule_radius,
        scene.goal.position(),
    )?;
    let (field, stats) = solve_harmonic(field, hpf.omega, Convergence::Absolute(hpf.tolerance), hpf.max_iters)?;
    let pgm = common.out.join(format!("field_{}.pgm", config.spec.seed));
    fs::write(&pgm, render_field_pgm(&field))?;
    let start = wbc::sim::forward_kinematics(&config.robot, &scene.start)?.ee.position();
    let path = extract_path(&field, start)?;
    let csv = common.out.join(format!("path_{}.csv", config.spec.seed));
    let mut out = String::from("x,y\n");
    for p in path.points() {
        out.push_str(&format!("{},{}\n", p.x, p.y));
    }
    fs::write(&csv, out)?;
    println!(
        "grid {}x{}  iterations {}  residual {:.3e}  path length {:.3} m",
        field.width,
        field.height,
        stats.iterations,
        stats.residual,
        path.total_length()
    );
    println!("wrote {} and {}", pgm.display(), csv.display());
    Ok(())
}

fn render(common: &Common, trace: &Path, lidar: bool) -> Result<()> {
    let config = load(common)?;
    let records = read_trace(BufReader::new(
        File::open(trace).with_context(|| format!("opening {}", trace.display()))?,
    ))?;
    let mut scene = None;
    let mut tolerance = config.episode.tolerance;
    let mut states = Vec::new();
    for r in records {
        match r {
            TraceRecord::Episode { tolerance: t, scene: s, .. } => {
                states.push(s.start.clone());
                scene = Some(*s);
                tolerance = t;
            }
            TraceRecord::Step { state, .. } => states.push(state),
        }
    }
    let Some(scene) = scene else {
        bail!("{} has no episode record", trace.display());
    };
    let stem = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let path = common.out.join(format!("{stem}.svg"));
    let options = RenderOptions {
        lidar,
        ..RenderOptions::default()
    };
    render_snapshot(&config.env_config(), &scene, &states, tolerance, &options, &path)?;
    println!("rendered {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { common, resume } => train(common, resume.as_deref()),
        Command::Eval {
            common,
            checkpoint,
            sample,
            episodes,
            tolerance,
            traces,
        } => eval(common, checkpoint, *sample, *episodes, *tolerance, *traces),
        Command::InspectEnv { common } => inspect_env(common),
        Command::HpfDump { common } => hpf_dump(common),
        Command::Render { common, trace, lidar } => render(common, trace, *lidar),
    }
}
