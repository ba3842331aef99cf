use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use inspection_planner::mesh::{write_mesh, BridgeModel, BridgeParams, MeshFormat};
use inspection_planner::pose::{mission, MissionPose, PoseParams};
use inspection_planner::runner::{
    emit_heatmap, poses_from_mission, read_json, resolve_poses, run_plan, run_sweep, write_json,
    write_sweep_csv, FaceVisitReport, RunConfig, Scene, SweepParam, SweepSpec,
};

/// Coverage-constrained UAS inspection path planner.
#[derive(Parser)]
#[command(name = "inspect-plan", version)]
struct Cli {
    /// Log more (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set ga.coverage_goal=0.99`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: &[String]) -> Result<RunConfig> {
        let mut all = self.overrides.clone();
        all.extend_from_slice(extra);
        Ok(RunConfig::load(&self.config, &all)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a path, solve camera poses and write all run artifacts.
    Plan {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Output directory (overrides `output_dir`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Re-solve camera poses for a saved path.
    Poses {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// path.json written by `plan`.
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        fov: Option<f64>,
        /// Treat the FOV as the cone half-angle (true) or full angle (false).
        #[arg(long)]
        fov_literal: Option<bool>,
        #[arg(short, long, default_value = "mission.json")]
        out: PathBuf,
    },
    /// Run a one-parameter sweep with repetitions and write a long CSV.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Parameter name as used in the config, e.g. `fov` or `coverage_goal`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Repetitions per value (default: `repetitions` from the config).
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(short, long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Precompute the visibility matrix cache.
    Visibility {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Cache file (overrides `visibility.cache`).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Write per-face visit counts for a saved path and mission.
    Heatmap {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        mission: PathBuf,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Generate the synthetic multi-span bridge mesh.
    GenBridge {
        /// Bridge parameters (TOML); defaults when omitted.
        #[arg(short, long)]
        params: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// obj or stl (default: from the output extension).
        #[arg(long)]
        format: Option<MeshFormat>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Plan {
            cfg,
            seed,
            repetitions,
            out,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = seed {
                extra.push(format!("seed={s}"));
            }
            if let Some(r) = repetitions {
                extra.push(format!("repetitions={r}"));
            }
            let mut config = cfg.load(&extra)?;
            if let Some(o) = out {
                config.output_dir = std::env::current_dir()?.join(o);
            }
            let summaries = run_plan(&config)?;
            for s in &summaries {
                println!(
                    "seed {}: length {:.3} m, coverage {:.4}, poses {}, feasible {}",
                    s.seed, s.length, s.coverage, s.poses, s.feasible
                );
            }
            println!("wrote {}", config.output_path().display());
            Ok(if summaries.iter().all(|s| s.feasible) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Poses {
            cfg,
            path,
            fov,
            fov_literal,
            out,
        } => {
            let config = cfg.load(&[])?;
            let params = PoseParams {
                fov: fov.unwrap_or(config.poses.fov),
                fov_literal: fov_literal.unwrap_or(config.poses.fov_literal),
            };
            let scene = Scene::prepare(&config)?;
            let (_, poses) = resolve_poses(&scene, &path, &params)?;
            write_json(&out, &mission(&poses))?;
            println!("{} poses -> {}", poses.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            cfg,
            param,
            values,
            repetitions,
            out,
        } => {
            let config = cfg.load(&[])?;
            let spec = SweepSpec {
                param: param.parse::<SweepParam>()?,
                values,
                repetitions: repetitions.unwrap_or(config.repetitions),
            };
            if spec.repetitions == 0 {
                bail!("repetitions must be at least 1");
            }
            let scene = Scene::prepare(&config)?;
            let rows = run_sweep(&config, &scene, &spec);
            create_parent(&out)?;
            let file = File::create(&out).with_context(|| format!("writing {}", out.display()))?;
            write_sweep_csv(&rows, BufWriter::new(file))?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows ({failed} failed) -> {}", rows.len(), out.display());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Visibility { cfg, cache } => {
            let mut config = cfg.load(&[])?;
            if let Some(c) = cache {
                config.visibility.cache = Some(std::env::current_dir()?.join(c));
            }
            let Some(cache) = config.visibility.cache.clone() else {
                bail!("no cache file: pass --cache or set visibility.cache");
            };
            let scene = Scene::prepare(&config)?;
            println!(
                "{} viewpoints x {} faces, {} visible pairs, coverage upper bound {:.4}, cache {:?} -> {}",
                scene.visibility.viewpoints(),
                scene.visibility.faces(),
                scene.visibility.count_ones(),
                scene.coverage_upper_bound(),
                scene.cache_status,
                config.resolve(&cache).display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Heatmap {
            cfg,
            path,
            mission: mission_file,
            out_dir,
        } => {
            let config = cfg.load(&[])?;
            let scene = Scene::prepare(&config)?;
            let export: inspection_planner::path::PathExport = read_json(&path)?;
            let genome = inspection_planner::path::InspectionPath::new(export.vertices, &scene.graph)?;
            let records: Vec<MissionPose> = read_json(&mission_file)?;
            let poses = poses_from_mission(&scene, &records)?;
            let report = FaceVisitReport::new(&genome, &poses, &scene, &config.poses);
            fs::create_dir_all(&out_dir)?;
            let csv_path = out_dir.join("heatmap.csv");
            let ply_path = out_dir.join("heatmap.ply");
            emit_heatmap(
                &report,
                &scene.target,
                BufWriter::new(File::create(&csv_path)?),
                BufWriter::new(File::create(&ply_path)?),
            )?;
            println!("wrote {} and {}", csv_path.display(), ply_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenBridge { params, out, format } => {
            let params: BridgeParams = match params {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => BridgeParams::default(),
            };
            let format = match format.or_else(|| MeshFormat::from_path(&out)) {
                Some(f) => f,
                None => bail!("cannot infer mesh format from {}; pass --format", out.display()),
            };
            let bridge = BridgeModel::<f64>::generate(&params)?;
            create_parent(&out)?;
            write_mesh(&bridge.mesh, format, BufWriter::new(File::create(&out)?))?;
            println!("{} faces -> {}", bridge.mesh.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}
