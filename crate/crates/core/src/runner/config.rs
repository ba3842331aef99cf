//! TOML run configuration, command-line overrides and sweep parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::ga::GaConfig;
use crate::geometry::{Aabb, Vec3};
use crate::mesh::{BridgeParams, RegionSelector, RegionSpec};
use crate::path::CoverageScope;
use crate::pose::PoseParams;
use crate::viewpoint::NoFlyZone;
use crate::visibility::VisibilityParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub visibility: VisibilityConfig,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub template: TemplateConfig,
    #[serde(default)]
    pub poses: PoseParams,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// OBJ or STL file with the structure to inspect.
    pub mesh: Option<PathBuf>,
    /// Synthetic bridge parameters, used instead of `mesh`.
    pub bridge: Option<BridgeParams>,
    /// Obstacle meshes that block viewpoints and, optionally, sight lines.
    #[serde(default)]
    pub environment: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub grid_interval: f64,
    pub safety_distance: f64,
    /// Grid margin around the model; defaults to the visible distance.
    pub padding: Option<f64>,
    /// Lowest allowed viewpoint elevation.
    pub min_z: Option<f64>,
    /// Explicit lattice box, replacing the padded model bounds.
    pub grid: Option<GridConfig>,
    pub no_fly_zones: Vec<BoxConfig>,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            grid_interval: 1.0,
            safety_distance: 0.5,
            padding: None,
            min_z: None,
            grid: None,
            no_fly_zones: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: [f64; 3],
    pub extents: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxConfig {
    pub fn zone(&self) -> NoFlyZone<f64> {
        NoFlyZone {
            min: Vec3::from_f64(self.min),
            max: Vec3::from_f64(self.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityConfig {
    pub visible_distance: f64,
    pub visible_inclination_angle: f64,
    pub occlusion: bool,
    /// Whether environment meshes also block sight lines.
    pub environment_occludes: bool,
    /// `all` faces, or only faces `visible` from some viewpoint.
    pub coverage_denominator: CoverageScope,
    /// Visibility matrix cache file, reused when its key matches.
    pub cache: Option<PathBuf>,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            visible_distance: 10.0,
            visible_inclination_angle: 45.0,
            occlusion: true,
            environment_occludes: true,
            coverage_denominator: CoverageScope::AllFaces,
            cache: None,
        }
    }
}

impl VisibilityConfig {
    pub fn params(&self) -> VisibilityParams<f64> {
        VisibilityParams {
            occlusion: self.occlusion,
            ..VisibilityParams::new(self.visible_distance, self.visible_inclination_angle)
        }
    }
}

/// Span layout for rule-based initialization. Unset fields come from the
/// bridge generator, or from the mesh bounds for file models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub axis: usize,
    pub spans: Option<Vec<[f64; 2]>>,
    pub loops_per_span: usize,
    pub deck_height: Option<f64>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            axis: 0,
            spans: None,
            loops_per_span: 2,
            deck_height: None,
        }
    }
}

/// A weighted face region: either a centroid box or explicit face indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub weight: u32,
    pub min: Option<[f64; 3]>,
    pub max: Option<[f64; 3]>,
    pub faces: Option<Vec<usize>>,
}

impl RegionConfig {
    pub fn spec(&self, index: usize) -> Result<RegionSpec<f64>, RunError> {
        let selector = match (self.min, self.max, &self.faces) {
            (Some(min), Some(max), None) => {
                RegionSelector::Box(Aabb::new(Vec3::from_f64(min), Vec3::from_f64(max)))
            }
            (None, None, Some(f)) => RegionSelector::Faces(f.clone()),
            _ => {
                return Err(RunError::Config(format!(
                    "regions[{index}]: give either min and max, or faces"
                )))
            }
        };
        Ok(RegionSpec {
            selector,
            weight: self.weight,
        })
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        Self::from_toml_with_overrides(text, base_dir, &[])
    }

    /// Parses `text`, then applies `key.path=value` overrides before
    /// deserializing. Override values are TOML literals; bare words are
    /// taken as strings.
    pub fn from_toml_with_overrides(
        text: &str,
        base_dir: &Path,
        overrides: &[String],
    ) -> Result<Self, RunError> {
        let mut tree: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml_with_overrides(&text, &base, overrides)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// GA settings with the run seed filled in.
    pub fn ga_config(&self, seed: u64) -> GaConfig {
        GaConfig {
            seed,
            ..self.ga.clone()
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        match (&self.model.mesh, &self.model.bridge) {
            (Some(_), Some(_)) => return bad("model: give either mesh or bridge, not both".into()),
            (None, None) => return bad("model: one of mesh or bridge is required".into()),
            _ => {}
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let s = &self.space;
        if !(s.grid_interval > 0.0) {
            return bad("space.grid_interval must be positive".into());
        }
        if !(s.safety_distance >= 0.0) {
            return bad("space.safety_distance must be non-negative".into());
        }
        if matches!(s.padding, Some(p) if !(p >= 0.0)) {
            return bad("space.padding must be non-negative".into());
        }
        for (i, z) in s.no_fly_zones.iter().enumerate() {
            if (0..3).any(|a| z.min[a] > z.max[a]) {
                return bad(format!("space.no_fly_zones[{i}]: min exceeds max"));
            }
        }
        self.visibility
            .params()
            .validate()
            .map_err(|e| RunError::Config(format!("visibility: {e}")))?;
        self.ga_config(self.seed).validate()?;
        self.poses.validate()?;
        if self.template.axis > 1 {
            return bad("template.axis must be 0 or 1".into());
        }
        for (i, r) in self.regions.iter().enumerate() {
            r.spec(i)?;
        }
        Ok(())
    }
}

fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<(), RunError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = parse_literal(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = tree;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| RunError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parameters a sweep may vary, named as in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    PopulationSize,
    Generations,
    IndividualEvolutionRate,
    GeneEvolutionRate,
    TournamentSize,
    RuleBasedInitializationProportion,
    CoverageGoal,
    Fov,
}

impl SweepParam {
    pub const ALL: [SweepParam; 8] = [
        SweepParam::PopulationSize,
        SweepParam::Generations,
        SweepParam::IndividualEvolutionRate,
        SweepParam::GeneEvolutionRate,
        SweepParam::TournamentSize,
        SweepParam::RuleBasedInitializationProportion,
        SweepParam::CoverageGoal,
        SweepParam::Fov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PopulationSize => "population_size",
            SweepParam::Generations => "generations",
            SweepParam::IndividualEvolutionRate => "individual_evolution_rate",
            SweepParam::GeneEvolutionRate => "gene_evolution_rate",
            SweepParam::TournamentSize => "tournament_size",
            SweepParam::RuleBasedInitializationProportion => "rule_based_initialization_proportion",
            SweepParam::CoverageGoal => "coverage_goal",
            SweepParam::Fov => "fov",
        }
    }

    /// Returns a copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig, RunError> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(RunError::Config(format!("{} needs a whole number, got {value}", self.name())))
            }
        };
        let mut c = cfg.clone();
        match self {
            SweepParam::PopulationSize => c.ga.population_size = count()?,
            SweepParam::Generations => c.ga.generations = count()?,
            SweepParam::IndividualEvolutionRate => c.ga.ier = value,
            SweepParam::GeneEvolutionRate => c.ga.ger = value,
            SweepParam::TournamentSize => c.ga.tournament_size = count()?,
            SweepParam::RuleBasedInitializationProportion => c.ga.rule_init_proportion = value,
            SweepParam::CoverageGoal => c.ga.coverage_goal = value,
            SweepParam::Fov => c.poses.fov = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            RunError::Config(format!("unknown sweep parameter `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub repetitions: usize,
}
