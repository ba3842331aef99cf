//! End-to-end runs: scene preparation, optimization, pose solving,
//! parameter sweeps and the files each run writes.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BoxConfig, GridConfig, ModelConfig, RegionConfig, RunConfig, SpaceConfig, SweepParam, SweepSpec,
    TemplateConfig, VisibilityConfig,
};

use crate::ga::{evolve, write_stats_csv, GaError, GaOutcome, Problem};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::{
    load_mesh_file, write_ply_with_face_scalar, BridgeModel, MeshError, MeshRole, TriMesh, WeightReport,
};
use crate::path::{default_path_points, CoverageModel, InspectionPath, PathError, PathExport, SpanTemplate};
use crate::pose::{greedy_poses, mission, pose_hits, CameraPose, MissionPose, PoseError, PoseParams};
use crate::viewpoint::{build_graph, GraphError, GridSpec, ViewpointGraph};
use crate::visibility::{compute_visibility, CacheKey, Occluders, VisibilityError, VisibilityMatrix};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(String),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

/// How the visibility matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    Stale,
}

/// Everything derived from the configuration before optimization starts.
pub struct Scene {
    pub target: TriMesh<f64>,
    pub environment: Vec<TriMesh<f64>>,
    pub bridge: Option<BridgeModel<f64>>,
    pub weight_report: WeightReport,
    pub graph: ViewpointGraph<f64>,
    pub visibility: VisibilityMatrix,
    pub cache_status: CacheStatus,
    pub coverage: CoverageModel<f64>,
    pub template: SpanTemplate<f64>,
    pub default_path_points: usize,
}

impl Scene {
    /// Loads or generates the model, builds the viewpoint graph and obtains
    /// the visibility matrix, reusing the configured cache when its key
    /// matches and rewriting it otherwise.
    pub fn prepare(cfg: &RunConfig) -> Result<Self, RunError> {
        let (target, bridge) = load_target(cfg)?;
        let environment = cfg
            .model
            .environment
            .iter()
            .map(|p| {
                let path = cfg.resolve(p);
                load_mesh_file::<f64>(&path, MeshRole::EnvironmentObstacle)
                    .map(|(m, r)| {
                        log_dropped(&path, r.degenerate_dropped);
                        m
                    })
                    .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let specs = cfg
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| r.spec(i))
            .collect::<Result<Vec<_>, _>>()?;
        let (target, weight_report) = target.apply_weights(&specs)?;
        for i in weight_report.empty_regions() {
            log::warn!("regions[{i}] selects no faces");
        }

        let grid = grid_spec(cfg, &target.bounds());
        let scene_meshes: Vec<&TriMesh<f64>> = std::iter::once(&target).chain(&environment).collect();
        let zones: Vec<_> = cfg.space.no_fly_zones.iter().map(BoxConfig::zone).collect();
        let graph = build_graph(&grid, &scene_meshes, cfg.space.safety_distance, &zones)?;
        log::info!(
            "viewpoint graph: {} viewpoints, {} edges ({:?})",
            graph.len(),
            graph.edge_count(),
            graph.filter_stats()
        );

        let extra: &[TriMesh<f64>] = if cfg.visibility.environment_occludes {
            &environment
        } else {
            &[]
        };
        let occluders = Occluders { target: &target, extra };
        let params = cfg.visibility.params();
        let (visibility, cache_status) = match &cfg.visibility.cache {
            None => (compute_visibility(&graph, &occluders, &params)?, CacheStatus::Disabled),
            Some(p) => cached_visibility(&cfg.resolve(p), &graph, &occluders, &params)?,
        };
        let coverage = CoverageModel::new(&target, &visibility, cfg.visibility.coverage_denominator);
        let template = template(cfg, &target, bridge.as_ref(), &graph.bounds());
        let default_path_points = default_path_points(&target.bounds(), cfg.space.grid_interval);
        Ok(Self {
            target,
            environment,
            bridge,
            weight_report,
            graph,
            visibility,
            cache_status,
            coverage,
            template,
            default_path_points,
        })
    }

    /// Coverage reached by visiting every viewpoint; no path can exceed it.
    pub fn coverage_upper_bound(&self) -> f64 {
        let all = InspectionPath::from_vertices_unchecked((0..self.graph.len() as u32).collect());
        self.coverage.coverage(&all, &self.visibility)
    }

    pub fn problem(&self) -> Problem<'_, f64> {
        Problem {
            graph: &self.graph,
            visibility: &self.visibility,
            coverage: &self.coverage,
            template: Some(&self.template),
            default_path_points: self.default_path_points,
        }
    }
}

fn log_dropped(path: &Path, dropped: usize) {
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} degenerate faces", path.display());
    }
}

fn load_target(cfg: &RunConfig) -> Result<(TriMesh<f64>, Option<BridgeModel<f64>>), RunError> {
    match (&cfg.model.mesh, &cfg.model.bridge) {
        (Some(p), _) => {
            let path = cfg.resolve(p);
            let (mesh, report) = load_mesh_file(&path, MeshRole::InspectionObject)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            log_dropped(&path, report.degenerate_dropped);
            Ok((mesh, None))
        }
        (None, Some(params)) => {
            let b = BridgeModel::generate(params)?;
            Ok((b.mesh.clone(), Some(b)))
        }
        (None, None) => Err(RunError::Config("model: one of mesh or bridge is required".into())),
    }
}

/// The lattice box: explicit, or the model bounds padded by the padding
/// (default: visible distance), raised to `min_z` on the lattice.
pub fn grid_spec(cfg: &RunConfig, bounds: &Aabb<f64>) -> GridSpec<f64> {
    let s = &cfg.space;
    let mut grid = match s.grid {
        Some(g) => GridSpec {
            origin: Vec3::from_f64(g.origin),
            extents: Vec3::from_f64(g.extents),
            interval: s.grid_interval,
        },
        None => GridSpec::around(
            *bounds,
            s.padding.unwrap_or(cfg.visibility.visible_distance),
            s.grid_interval,
        ),
    };
    if let Some(min_z) = s.min_z {
        if grid.origin.z < min_z {
            let steps = ((min_z - grid.origin.z) / s.grid_interval - 1e-9).ceil();
            let lift = steps * s.grid_interval;
            grid.origin.z += lift;
            grid.extents.z = (grid.extents.z - lift).max(0.0);
        }
    }
    grid
}

/// Default spans follow the structure but the outer two reach the ends of the
/// viewpoint space, so loops also pass beyond the abutments.
fn template(
    cfg: &RunConfig,
    target: &TriMesh<f64>,
    bridge: Option<&BridgeModel<f64>>,
    space: &Aabb<f64>,
) -> SpanTemplate<f64> {
    let t = &cfg.template;
    let b = target.bounds();
    let mut spans = match (&t.spans, bridge) {
        (Some(s), _) => s.iter().map(|s| (s[0], s[1])).collect(),
        (None, Some(br)) if t.axis == 0 => br.span_intervals.clone(),
        _ => vec![(b.min[t.axis], b.max[t.axis])],
    };
    if t.spans.is_none() {
        if let Some(first) = spans.first_mut() {
            first.0 = first.0.min(space.min[t.axis]);
        }
        if let Some(last) = spans.last_mut() {
            last.1 = last.1.max(space.max[t.axis]);
        }
    }
    let deck_height = match (t.deck_height, bridge) {
        (Some(h), _) => h,
        (None, Some(br)) => br.params.clearance + br.params.deck_thickness / 2.0,
        (None, None) => b.center().z,
    };
    SpanTemplate {
        axis: t.axis,
        spans,
        loops_per_span: t.loops_per_span,
        deck_height,
    }
}

fn cached_visibility(
    path: &Path,
    graph: &ViewpointGraph<f64>,
    occluders: &Occluders<'_, f64>,
    params: &crate::visibility::VisibilityParams<f64>,
) -> Result<(VisibilityMatrix, CacheStatus), RunError> {
    let key = CacheKey::of(graph, occluders, params);
    let status = match File::open(path) {
        Ok(f) => match VisibilityMatrix::load_checked(std::io::BufReader::new(f), key) {
            Ok(m) => {
                log::info!("visibility cache hit: {}", path.display());
                return Ok((m, CacheStatus::Hit));
            }
            Err(e) => {
                log::warn!("recomputing visibility: {e}");
                CacheStatus::Stale
            }
        },
        Err(_) => CacheStatus::Miss,
    };
    let m = compute_visibility(graph, occluders, params)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    }
    let f = File::create(path).map_err(io_err(format!("writing {}", path.display())))?;
    m.save(BufWriter::new(f))?;
    Ok((m, status))
}

/// Machine-readable outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub feasible: bool,
    pub coverage: f64,
    pub length: f64,
    pub poses: usize,
    pub coverage_goal: f64,
    pub population_size: usize,
    pub generations: usize,
    pub fov: f64,
    pub viewpoints: usize,
    pub faces: usize,
    pub wall_time_s: f64,
}

pub struct PlanResult {
    pub outcome: GaOutcome<f64>,
    pub poses: Vec<CameraPose<f64>>,
    pub summary: Summary,
}

/// Optimizes a path for `seed` on a prepared scene and solves its poses.
pub fn plan(cfg: &RunConfig, scene: &Scene, seed: u64) -> Result<PlanResult, RunError> {
    let start = Instant::now();
    let outcome = evolve(&cfg.ga_config(seed), &scene.problem())?;
    let poses = greedy_poses(
        &outcome.best.path,
        &scene.graph,
        &scene.visibility,
        &scene.target,
        &cfg.poses,
    )?;
    let summary = Summary {
        seed,
        feasible: outcome.feasible,
        coverage: outcome.best.coverage,
        length: outcome.best.length,
        poses: poses.len(),
        coverage_goal: cfg.ga.coverage_goal,
        population_size: cfg.ga.population_size,
        generations: cfg.ga.generations,
        fov: cfg.poses.fov,
        viewpoints: scene.graph.len(),
        faces: scene.target.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(PlanResult { outcome, poses, summary })
}

/// Per-face visit counts: distinct path viewpoints that see the face, and
/// chosen poses whose cone contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceVisitReport {
    pub path_visits: Vec<u32>,
    pub pose_hits: Vec<u32>,
}

impl FaceVisitReport {
    pub fn new(
        path: &InspectionPath,
        poses: &[CameraPose<f64>],
        scene: &Scene,
        params: &PoseParams,
    ) -> Self {
        Self {
            path_visits: scene.coverage.visit_counts(path, &scene.visibility),
            pose_hits: pose_hits(poses, &scene.visibility, &scene.target, params),
        }
    }

    pub fn visits(&self) -> Vec<u32> {
        self.path_visits.iter().zip(&self.pose_hits).map(|(a, b)| a + b).collect()
    }
}

/// Writes the per-face CSV and a PLY mesh carrying the visit count.
pub fn emit_heatmap<C: Write, P: Write>(
    report: &FaceVisitReport,
    mesh: &TriMesh<f64>,
    csv_sink: C,
    ply_sink: P,
) -> Result<(), RunError> {
    assert_eq!(report.path_visits.len(), mesh.len(), "one count per face");
    let visits = report.visits();
    let mut w = csv::Writer::from_writer(csv_sink);
    let csv_err = |e: csv::Error| RunError::Output(format!("heatmap csv: {e}"));
    w.write_record(["face", "cx", "cy", "cz", "weight", "visits", "path_visits", "pose_hits"])
        .map_err(csv_err)?;
    for (j, f) in mesh.faces().iter().enumerate() {
        let [x, y, z] = f.centroid.to_f64();
        w.write_record([
            j.to_string(),
            x.to_string(),
            y.to_string(),
            z.to_string(),
            f.weight.to_string(),
            visits[j].to_string(),
            report.path_visits[j].to_string(),
            report.pose_hits[j].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err("heatmap csv"))?;
    write_ply_with_face_scalar(mesh, "visits", &visits, ply_sink).map_err(io_err("heatmap ply"))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(format!("writing {}", path.display())))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), RunError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(io_err(format!("writing {}", path.display())))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, RunError> {
    let f = File::open(path).map_err(io_err(format!("reading {}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// Paths of the files a run writes into its directory.
pub struct RunFiles {
    pub path: PathBuf,
    pub mission: PathBuf,
    pub stats: PathBuf,
    pub heatmap_csv: PathBuf,
    pub heatmap_ply: PathBuf,
    pub summary: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            path: dir.join("path.json"),
            mission: dir.join("mission.json"),
            stats: dir.join("stats.csv"),
            heatmap_csv: dir.join("heatmap.csv"),
            heatmap_ply: dir.join("heatmap.ply"),
            summary: dir.join("summary.json"),
        }
    }
}

impl PlanResult {
    pub fn write(&self, dir: &Path, scene: &Scene, cfg: &RunConfig) -> Result<RunFiles, RunError> {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        let files = RunFiles::in_dir(dir);
        let best = &self.outcome.best;
        write_json(
            &files.path,
            &PathExport::new(&best.path, &scene.graph, best.length, best.coverage, self.outcome.feasible),
        )?;
        write_json(&files.mission, &mission(&self.poses))?;
        write_stats_csv(&self.outcome.stats, create(&files.stats)?)
            .map_err(|e| RunError::Output(format!("{}: {e}", files.stats.display())))?;
        let report = FaceVisitReport::new(&best.path, &self.poses, scene, &cfg.poses);
        emit_heatmap(&report, &scene.target, create(&files.heatmap_csv)?, create(&files.heatmap_ply)?)?;
        write_json(&files.summary, &self.summary)?;
        Ok(files)
    }
}

/// Runs every repetition of `cfg` (seed, seed + 1, ...) and writes each
/// into its own directory under the output directory (directly into it
/// when there is a single repetition).
pub fn run_plan(cfg: &RunConfig) -> Result<Vec<Summary>, RunError> {
    let scene = Scene::prepare(cfg)?;
    let out = cfg.output_path();
    let mut summaries = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed + rep as u64;
        let result = plan(cfg, &scene, seed)?;
        let dir = if cfg.repetitions == 1 {
            out.clone()
        } else {
            out.join(format!("rep_{rep}"))
        };
        result.write(&dir, &scene, cfg)?;
        log::info!(
            "seed {seed}: length {:.2} m, coverage {:.4}, {} poses{}",
            result.summary.length,
            result.summary.coverage,
            result.summary.poses,
            if result.summary.feasible { "" } else { " (coverage goal not met)" }
        );
        summaries.push(result.summary);
    }
    Ok(summaries)
}

/// Re-solves poses for a saved path.
pub fn resolve_poses(
    scene: &Scene,
    path_file: &Path,
    params: &PoseParams,
) -> Result<(InspectionPath, Vec<CameraPose<f64>>), RunError> {
    let export: PathExport = read_json(path_file)?;
    let path = InspectionPath::new(export.vertices, &scene.graph)?;
    let poses = greedy_poses(&path, &scene.graph, &scene.visibility, &scene.target, params)?;
    Ok((path, poses))
}

/// Rebuilds poses from a saved mission, checking them against the graph.
pub fn poses_from_mission(scene: &Scene, records: &[MissionPose]) -> Result<Vec<CameraPose<f64>>, RunError> {
    records
        .iter()
        .map(|m| {
            let v = m.viewpoint as usize;
            if v >= scene.graph.len() {
                return Err(RunError::Config(format!("mission viewpoint {v} is not in the graph")));
            }
            Ok(CameraPose {
                viewpoint: m.viewpoint,
                position: scene.graph.point(v),
                sight: Vec3::new(m.sight_x, m.sight_y, m.sight_z),
                target_face: 0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub length: Option<f64>,
    pub coverage: Option<f64>,
    pub poses: Option<usize>,
    pub feasible: Option<bool>,
    pub runtime_s: Option<f64>,
    pub error: Option<String>,
}

/// Runs every value × repetition cell on one shared scene. Failed cells
/// are recorded with their error and the sweep carries on.
pub fn run_sweep(cfg: &RunConfig, scene: &Scene, spec: &SweepSpec) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(spec.values.len() * spec.repetitions);
    for &value in &spec.values {
        for rep in 0..spec.repetitions {
            let seed = cfg.seed + rep as u64;
            let cell = spec.param.apply(cfg, value).and_then(|c| plan(&c, scene, seed));
            let mut row = SweepRow {
                param: spec.param.name().to_string(),
                value,
                rep,
                seed,
                length: None,
                coverage: None,
                poses: None,
                feasible: None,
                runtime_s: None,
                error: None,
            };
            match cell {
                Ok(r) => {
                    row.length = Some(r.summary.length);
                    row.coverage = Some(r.summary.coverage);
                    row.poses = Some(r.summary.poses);
                    row.feasible = Some(r.summary.feasible);
                    row.runtime_s = Some(r.summary.wall_time_s);
                }
                Err(e) => {
                    log::warn!("{}={value} rep {rep}: {e}", spec.param);
                    row.error = Some(e.to_string());
                }
            }
            rows.push(row);
        }
    }
    rows
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r).map_err(|e| RunError::Output(format!("sweep csv: {e}")))?;
    }
    w.flush().map_err(io_err("sweep csv"))
}
