//! Genetic optimizer over inspection paths: fitness, tournament selection,
//! neighbor-pair crossover and the change/add/delete mutations.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{
    path_length_unchecked, random_init, rule_based_init, CoverageModel, InspectionPath, PathError,
    SpanTemplate,
};
use crate::scalar::Real;
use crate::viewpoint::ViewpointGraph;
use crate::visibility::VisibilityMatrix;

/// Coverage used in place of zero when computing the infeasible penalty.
pub const COVERAGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GaError {
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("rule-based initialization requested but no span template given")]
    MissingTemplate,
    #[error("initialization failed: {0}")]
    Init(#[from] PathError),
    #[error("visibility matrix has {matrix} viewpoints, graph has {graph}")]
    Mismatch { matrix: usize, graph: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Individual evolution rate: probability an operator is applied to a child.
    #[serde(rename = "individual_evolution_rate")]
    pub ier: f64,
    /// Gene evolution rate: per-position probability inside an operator.
    #[serde(rename = "gene_evolution_rate")]
    pub ger: f64,
    pub tournament_size: usize,
    #[serde(rename = "rule_based_initialization_proportion")]
    pub rule_init_proportion: f64,
    pub coverage_goal: f64,
    pub alpha: f64,
    #[serde(skip)]
    pub seed: u64,
    /// Random-walk length; `None` derives it from the model footprint.
    pub initial_path_points: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 125,
            generations: 500,
            ier: 0.75,
            ger: 0.1,
            tournament_size: 25,
            rule_init_proportion: 0.5,
            coverage_goal: 0.95,
            alpha: 1e6,
            seed: 0,
            initial_path_points: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: String| Err(GaError::InvalidConfig(m));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population_size == 0 {
            return bad("population_size must be at least 1".into());
        }
        for (name, v) in [
            ("individual_evolution_rate", self.ier),
            ("gene_evolution_rate", self.ger),
            ("rule_based_initialization_proportion", self.rule_init_proportion),
        ] {
            if !unit(v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad(format!(
                "tournament_size must be in [1, population_size={}], got {}",
                self.population_size, self.tournament_size
            ));
        }
        if !(self.coverage_goal > 0.0 && self.coverage_goal <= 1.0) {
            return bad(format!("coverage_goal must be in (0, 1], got {}", self.coverage_goal));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if matches!(self.initial_path_points, Some(n) if n < 2) {
            return bad("initial_path_points must be at least 2".into());
        }
        Ok(())
    }
}

/// Penalized fitness: `-alpha / coverage` below the goal, `-length` at or
/// above it. Always negative.
pub fn fitness<T: Real>(coverage: T, length: T, goal: T, alpha: T) -> T {
    if coverage >= goal {
        -length
    } else {
        -alpha / coverage.max(T::lit(COVERAGE_EPS))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluated<T> {
    pub path: InspectionPath,
    pub coverage: T,
    pub length: T,
    pub fitness: T,
}

impl<T: Real> Evaluated<T> {
    pub fn feasible(&self, goal: T) -> bool {
        self.coverage >= goal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Shortest feasible length seen up to and including this generation.
    pub best_so_far_length: Option<f64>,
    pub mean_coverage: f64,
    pub feasible_count: usize,
}

/// Writes generation stats as CSV with a header row.
pub fn write_stats_csv<W: Write>(stats: &[GenerationStats], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "generation",
        "best_fitness",
        "best_so_far_length",
        "mean_coverage",
        "feasible_count",
    ])?;
    for s in stats {
        w.write_record([
            s.generation.to_string(),
            s.best_fitness.to_string(),
            s.best_so_far_length.map(|l| l.to_string()).unwrap_or_default(),
            s.mean_coverage.to_string(),
            s.feasible_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `true` if `a` beats `b`: higher fitness, then shorter.
fn better<T: Real>(a: &Evaluated<T>, b: &Evaluated<T>) -> bool {
    a.fitness > b.fitness || (a.fitness == b.fitness && a.length < b.length)
}

/// Index of the winner among `k` individuals drawn without replacement.
/// Ties go to the shorter path, then the lower population index.
pub fn tournament_select<T: Real, R: Rng + ?Sized>(pop: &[Evaluated<T>], k: usize, rng: &mut R) -> usize {
    assert!(k >= 1 && k <= pop.len(), "tournament size out of range");
    let mut best: Option<usize> = None;
    for i in rand::seq::index::sample(rng, pop.len(), k) {
        best = match best {
            None => Some(i),
            Some(b) if better(&pop[i], &pop[b]) || (!better(&pop[b], &pop[i]) && i < b) => Some(i),
            keep => keep,
        };
    }
    best.expect("k >= 1")
}

/// Last position of every vertex on `path`.
fn last_positions(path: &[u32]) -> HashMap<u32, usize> {
    path.iter().enumerate().map(|(i, &v)| (v, i)).collect()
}

/// Furthest position on the other path whose vertex neighbors `v`.
fn furthest_switch<T: Real>(g: &ViewpointGraph<T>, v: u32, other: &HashMap<u32, usize>) -> Option<usize> {
    std::iter::once(&v)
        .chain(g.neighbors(v as usize))
        .filter_map(|w| other.get(w).copied())
        .max()
}

/// Walks `a` from its start; at each position where the other path has a
/// neighboring vertex further along than where it was last left, jumps
/// there with probability `ger`. The vertex just arrived at is not itself a
/// switch point, and each path is only ever entered further along than
/// before, so the walk terminates.
pub fn crossover<T: Real, R: Rng + ?Sized>(
    a: &InspectionPath,
    b: &InspectionPath,
    ger: f64,
    g: &ViewpointGraph<T>,
    rng: &mut R,
) -> InspectionPath {
    let paths = [a.vertices(), b.vertices()];
    let lookup = [last_positions(paths[0]), last_positions(paths[1])];
    // cursor[k]: last position consumed on path k
    let mut cursor: [isize; 2] = [0, -1];
    let mut cur = 0usize;
    let mut child = vec![paths[0][0]];
    let mut just_arrived = false;
    loop {
        let pos = cursor[cur] as usize;
        let here = paths[cur][pos];
        let other = 1 - cur;
        if !just_arrived && ger > 0.0 {
            if let Some(j) = furthest_switch(g, here, &lookup[other]) {
                if j as isize > cursor[other] && rng.random_bool(ger) {
                    cursor[other] = j as isize;
                    cur = other;
                    if paths[cur][j] != here {
                        child.push(paths[cur][j]);
                    }
                    just_arrived = true;
                    continue;
                }
            }
        }
        just_arrived = false;
        if pos + 1 >= paths[cur].len() {
            break;
        }
        cursor[cur] += 1;
        child.push(paths[cur][pos + 1]);
    }
    if child.len() < 2 {
        return a.clone();
    }
    InspectionPath::from_vertices_unchecked(child)
}

/// Replaces each interior vertex, with probability `ger`, by a common
/// neighbor of its (possibly already changed) predecessor and its successor.
pub fn mutate_change<T: Real, R: Rng + ?Sized>(
    p: &InspectionPath,
    ger: f64,
    g: &ViewpointGraph<T>,
    rng: &mut R,
) -> InspectionPath {
    let mut v = p.vertices().to_vec();
    if ger <= 0.0 {
        return p.clone();
    }
    for i in 1..v.len().saturating_sub(1) {
        if rng.random_bool(ger) {
            let common = g.common_neighbors(v[i - 1] as usize, v[i + 1] as usize);
            if let Some(&c) = common.choose(rng) {
                v[i] = c;
            }
        }
    }
    InspectionPath::from_vertices_unchecked(v)
}

/// Inserts, with probability `ger` per consecutive pair, a common neighbor
/// of the pair between them.
pub fn mutate_add<T: Real, R: Rng + ?Sized>(
    p: &InspectionPath,
    ger: f64,
    g: &ViewpointGraph<T>,
    rng: &mut R,
) -> InspectionPath {
    if ger <= 0.0 {
        return p.clone();
    }
    let src = p.vertices();
    let mut out = Vec::with_capacity(src.len() + src.len() / 4 + 1);
    for w in src.windows(2) {
        out.push(w[0]);
        if rng.random_bool(ger) {
            let common = g.common_neighbors(w[0] as usize, w[1] as usize);
            if let Some(&c) = common.choose(rng) {
                out.push(c);
            }
        }
    }
    out.extend(src.last());
    InspectionPath::from_vertices_unchecked(out)
}

/// Deletes each interior vertex, with probability `ger`, when the last kept
/// vertex and the next one are neighbors.
pub fn mutate_delete<T: Real, R: Rng + ?Sized>(
    p: &InspectionPath,
    ger: f64,
    g: &ViewpointGraph<T>,
    rng: &mut R,
) -> InspectionPath {
    let src = p.vertices();
    if ger <= 0.0 || src.len() <= 2 {
        return p.clone();
    }
    let mut out = Vec::with_capacity(src.len());
    out.push(src[0]);
    for i in 1..src.len() - 1 {
        let prev = *out.last().expect("non-empty");
        let removable = g.are_neighbors(prev as usize, src[i + 1] as usize);
        if !(rng.random_bool(ger) && removable) {
            out.push(src[i]);
        }
    }
    out.push(src[src.len() - 1]);
    InspectionPath::from_vertices_unchecked(out)
}

/// RNG for one (generation, slot) pair. Generation 0 seeds the initial
/// population; children of generation `k` use `k + 1`.
pub fn substream(seed: u64, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << 32) | (slot & 0xffff_ffff));
    rng
}

#[derive(Debug, Clone)]
pub struct GaOutcome<T> {
    /// Shortest feasible individual seen, or the best-coverage one if none
    /// reached the goal.
    pub best: Evaluated<T>,
    pub feasible: bool,
    pub stats: Vec<GenerationStats>,
}

/// Everything the optimizer reads besides its config.
pub struct Problem<'a, T> {
    pub graph: &'a ViewpointGraph<T>,
    pub visibility: &'a VisibilityMatrix,
    pub coverage: &'a CoverageModel<T>,
    pub template: Option<&'a SpanTemplate<T>>,
    /// Random-walk length used when the config leaves it unset.
    pub default_path_points: usize,
}

impl<T: Real> Problem<'_, T> {
    pub fn evaluate(&self, path: InspectionPath, cfg: &GaConfig) -> Evaluated<T> {
        let coverage = self.coverage.coverage(&path, self.visibility);
        let length = path_length_unchecked(&path, self.graph);
        let fitness = fitness(coverage, length, T::lit(cfg.coverage_goal), T::lit(cfg.alpha));
        Evaluated {
            path,
            coverage,
            length,
            fitness,
        }
    }
}

fn breed<T: Real>(
    cfg: &GaConfig,
    g: &ViewpointGraph<T>,
    parents: &[Evaluated<T>],
    rng: &mut ChaCha8Rng,
) -> InspectionPath {
    let k = cfg.tournament_size;
    let mut child = if rng.random_bool(cfg.ier) {
        let a = tournament_select(parents, k, rng);
        let b = tournament_select(parents, k, rng);
        crossover(&parents[a].path, &parents[b].path, cfg.ger, g, rng)
    } else {
        parents[tournament_select(parents, k, rng)].path.clone()
    };
    if rng.random_bool(cfg.ier) {
        child = mutate_change(&child, cfg.ger, g, rng);
    }
    if rng.random_bool(cfg.ier) {
        child = mutate_add(&child, cfg.ger, g, rng);
    }
    if rng.random_bool(cfg.ier) {
        child = mutate_delete(&child, cfg.ger, g, rng);
    }
    child
}

struct Tracker<T> {
    goal: T,
    feasible: Option<Evaluated<T>>,
    fallback: Option<Evaluated<T>>,
}

impl<T: Real> Tracker<T> {
    fn observe(&mut self, pop: &[Evaluated<T>]) {
        for e in pop {
            if e.feasible(self.goal) {
                if self.feasible.as_ref().is_none_or(|b| e.length < b.length) {
                    self.feasible = Some(e.clone());
                }
            } else if self.fallback.as_ref().is_none_or(|b| {
                e.coverage > b.coverage || (e.coverage == b.coverage && e.length < b.length)
            }) {
                self.fallback = Some(e.clone());
            }
        }
    }
}

/// Runs the generational loop and returns the best individual with
/// per-generation statistics. Deterministic for a fixed seed regardless of
/// the number of worker threads.
pub fn evolve<T: Real>(cfg: &GaConfig, problem: &Problem<'_, T>) -> Result<GaOutcome<T>, GaError> {
    cfg.validate()?;
    let g = problem.graph;
    if problem.visibility.viewpoints() != g.len() {
        return Err(GaError::Mismatch {
            matrix: problem.visibility.viewpoints(),
            graph: g.len(),
        });
    }
    let n = cfg.population_size;
    let n_rule = (cfg.rule_init_proportion * n as f64).floor() as usize;
    if n_rule > 0 && problem.template.is_none() {
        return Err(GaError::MissingTemplate);
    }
    let points = cfg.initial_path_points.unwrap_or(problem.default_path_points);

    let initial: Vec<InspectionPath> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, 0, i as u64);
            match problem.template {
                Some(t) if i < n_rule => rule_based_init(g, t, &mut rng),
                _ => random_init(g, points, &mut rng),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut pop: Vec<Evaluated<T>> = initial
        .into_par_iter()
        .map(|p| problem.evaluate(p, cfg))
        .collect();

    let goal = T::lit(cfg.coverage_goal);
    let mut tracker = Tracker {
        goal,
        feasible: None,
        fallback: None,
    };
    tracker.observe(&pop);
    let mut stats = Vec::with_capacity(cfg.generations);
    for gen in 0..cfg.generations {
        let parents = &pop;
        let next: Vec<Evaluated<T>> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut rng = substream(cfg.seed, gen as u64 + 1, c as u64);
                problem.evaluate(breed(cfg, g, parents, &mut rng), cfg)
            })
            .collect();
        pop = next;
        tracker.observe(&pop);
        let best_fitness = pop
            .iter()
            .map(|e| e.fitness.as_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_coverage = pop.iter().map(|e| e.coverage.as_f64()).sum::<f64>() / n as f64;
        let s = GenerationStats {
            generation: gen,
            best_fitness,
            best_so_far_length: tracker.feasible.as_ref().map(|e| e.length.as_f64()),
            mean_coverage,
            feasible_count: pop.iter().filter(|e| e.feasible(goal)).count(),
        };
        log::debug!(
            "gen {gen}: best fitness {:.3}, best length {:?}, feasible {}/{n}",
            s.best_fitness,
            s.best_so_far_length,
            s.feasible_count
        );
        stats.push(s);
    }
    let (best, feasible) = match (tracker.feasible, tracker.fallback) {
        (Some(b), _) => (b, true),
        (None, Some(b)) => (b, false),
        (None, None) => unreachable!("population is never empty"),
    };
    Ok(GaOutcome { best, feasible, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::viewpoint::{build_graph, GridSpec};
    use crate::visibility::CacheKey;

    fn plane(n: f64) -> ViewpointGraph<f64> {
        build_graph(
            &GridSpec {
                origin: Vec3::zero(),
                extents: Vec3::new(n, n, 0.0),
                interval: 1.0,
            },
            &[],
            0.0,
            &[],
        )
        .unwrap()
    }

    fn ids(g: &ViewpointGraph<f64>, coords: &[[u32; 2]]) -> InspectionPath {
        let v = coords
            .iter()
            .map(|c| (0..g.len()).find(|&v| g.lattice_coords(v) == [c[0], c[1], 0]).unwrap() as u32)
            .collect();
        InspectionPath::new(v, g).unwrap()
    }

    fn ev(fitness: f64, length: f64) -> Evaluated<f64> {
        Evaluated {
            path: InspectionPath::from_vertices_unchecked(vec![0, 1]),
            coverage: 1.0,
            length,
            fitness,
        }
    }

    #[test]
    fn fitness_branches() {
        assert_eq!(fitness(0.5, 10.0, 0.95, 1e6), -2e6);
        assert_eq!(fitness(0.95, 162.2, 0.95, 1e6), -162.2);
        assert_eq!(fitness(1.0, 10.0, 0.95, 1e6), -10.0);
        assert_eq!(fitness(0.0, 10.0, 0.95, 1e6), -1e6 / COVERAGE_EPS);
    }

    #[test]
    fn tournament_over_all_pairs() {
        let pop = vec![ev(-5.0, 5.0), ev(-3.0, 3.0), ev(-9.0, 9.0)];
        // every unordered pair, via k = 2 draws until all pairs appear
        let mut wins = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3000 {
            *wins.entry(tournament_select(&pop, 2, &mut rng)).or_insert(0) += 1;
        }
        assert!(!wins.contains_key(&2));
        let ratio = wins[&1] as f64 / 3000.0;
        assert!((ratio - 2.0 / 3.0).abs() < 0.05, "{ratio}");
        for _ in 0..20 {
            assert_eq!(tournament_select(&pop, 3, &mut rng), 1);
        }
    }

    #[test]
    fn tournament_ties() {
        let pop = vec![ev(-4.0, 4.0), ev(-4.0, 4.0), ev(-4.0, 3.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tournament_select(&pop, 3, &mut rng), 2);
        let tied = vec![ev(-4.0, 4.0), ev(-4.0, 4.0)];
        assert_eq!(tournament_select(&tied, 2, &mut rng), 0);
    }

    #[test]
    fn crossover_trivial_cases() {
        let g = plane(4.0);
        let a = ids(&g, &[[0, 0], [1, 0], [2, 0], [3, 0]]);
        let b = ids(&g, &[[0, 3], [1, 3], [2, 2], [3, 1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(crossover(&a, &b, 0.0, &g, &mut rng), a);
        for _ in 0..20 {
            assert_eq!(crossover(&a, &a, 1.0, &g, &mut rng), a);
        }
        let far = ids(&g, &[[0, 3], [1, 3]]);
        assert_eq!(crossover(&a, &far, 1.0, &g, &mut rng), a);
    }

    #[test]
    fn crossover_single_switch_point() {
        let g = plane(4.0);
        // L-shapes meeting only between a's corner end and b's second vertex
        let a = ids(&g, &[[0, 3], [0, 2], [0, 1], [0, 0], [1, 0]]);
        let b = ids(&g, &[[3, 0], [2, 1], [2, 2], [2, 3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let child = crossover(&a, &b, 1.0, &g, &mut rng);
        let expect = ids(&g, &[[0, 3], [0, 2], [0, 1], [0, 0], [1, 0], [2, 1], [2, 2], [2, 3]]);
        assert_eq!(child, expect);
        assert!(child.is_continuous(&g));
    }

    #[test]
    fn change_draws_from_intersection() {
        let g = build_graph::<f64>(
            &GridSpec {
                origin: Vec3::zero(),
                extents: Vec3::new(2.0, 2.0, 2.0),
                interval: 1.0,
            },
            &[],
            0.0,
            &[],
        )
        .unwrap();
        let at = |l: [u32; 3]| (0..g.len()).find(|&v| g.lattice_coords(v) == l).unwrap() as u32;
        let p = InspectionPath::new(vec![at([0, 1, 1]), at([1, 1, 1]), at([2, 1, 1])], &g).unwrap();
        // brute-force intersection: lattice points within Chebyshev 1 of both ends
        let expect: Vec<u32> = (0..g.len())
            .filter(|&v| {
                let c = g.lattice_coords(v);
                c[0] == 1
            })
            .map(|v| v as u32)
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let m = mutate_change(&p, 1.0, &g, &mut rng);
            assert!(m.is_continuous(&g));
            assert_eq!(m.vertices()[0], p.vertices()[0]);
            assert_eq!(m.vertices()[2], p.vertices()[2]);
            seen.insert(m.vertices()[1]);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), expect);
        let two = InspectionPath::new(vec![at([0, 0, 0]), at([1, 0, 0])], &g).unwrap();
        assert_eq!(mutate_change(&two, 1.0, &g, &mut rng), two);
    }

    #[test]
    fn add_and_delete() {
        let g = plane(4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ids(&g, &[[0, 0], [1, 0], [2, 0]]);
        assert_eq!(mutate_add(&p, 0.0, &g, &mut rng), p);
        let grown = mutate_add(&p, 1.0, &g, &mut rng);
        assert_eq!(grown.len(), 5);
        assert!(grown.is_continuous(&g));
        let dup = ids(&g, &[[1, 1], [1, 1]]);
        assert_eq!(mutate_add(&dup, 1.0, &g, &mut rng).len(), 3);

        let short = ids(&g, &[[0, 0], [1, 1], [1, 0]]);
        assert_eq!(mutate_delete(&short, 1.0, &g, &mut rng), ids(&g, &[[0, 0], [1, 0]]));
        let straight = ids(&g, &[[0, 0], [1, 0], [2, 0]]);
        for _ in 0..20 {
            assert_eq!(mutate_delete(&straight, 1.0, &g, &mut rng), straight);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            tournament_size: 200,
            ..GaConfig::default()
        };
        assert!(matches!(bad.validate(), Err(GaError::InvalidConfig(m)) if m.contains("tournament_size")));
        let bad = GaConfig {
            coverage_goal: 0.0,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            ier: 1.5,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn toy_problem() -> (ViewpointGraph<f64>, VisibilityMatrix, CoverageModel<f64>) {
        let g = plane(5.0);
        // face j is seen only from lattice column x == j
        let rows: Vec<Vec<bool>> = (0..g.len())
            .map(|v| (0..6).map(|j| g.lattice_coords(v)[0] == j).collect())
            .collect();
        let vm = VisibilityMatrix::from_rows(
            &rows,
            CacheKey {
                params_hash: 0,
                mesh_hash: 0,
                graph_hash: 0,
            },
        );
        let model = CoverageModel::from_parts(vec![1.0; 6], vec![1; 6], vec![true; 6]);
        (g, vm, model)
    }

    #[test]
    fn evolve_zero_generations_and_determinism() {
        let (g, vm, model) = toy_problem();
        let problem = Problem {
            graph: &g,
            visibility: &vm,
            coverage: &model,
            template: None,
            default_path_points: 12,
        };
        let cfg = GaConfig {
            population_size: 20,
            generations: 0,
            tournament_size: 4,
            rule_init_proportion: 0.0,
            coverage_goal: 1.0,
            seed: 11,
            ..GaConfig::default()
        };
        let out = evolve(&cfg, &problem).unwrap();
        assert!(out.stats.is_empty());

        let cfg = GaConfig { generations: 60, ..cfg };
        let a = evolve(&cfg, &problem).unwrap();
        let b = evolve(&cfg, &problem).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.stats, b.stats);
        assert!(a.feasible);
        // the straight sweep across 6 columns is 5 m
        assert!(a.best.length >= 5.0 - 1e-12);
        let lengths: Vec<f64> = a.stats.iter().filter_map(|s| s.best_so_far_length).collect();
        assert!(lengths.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn evolve_requires_template_for_rule_init() {
        let (g, vm, model) = toy_problem();
        let problem = Problem {
            graph: &g,
            visibility: &vm,
            coverage: &model,
            template: None,
            default_path_points: 12,
        };
        let cfg = GaConfig {
            population_size: 4,
            tournament_size: 2,
            ..GaConfig::default()
        };
        assert_eq!(evolve(&cfg, &problem).unwrap_err(), GaError::MissingTemplate);
    }

    #[test]
    fn stats_csv_header_and_blank_length() {
        let stats = vec![GenerationStats {
            generation: 0,
            best_fitness: -2e6,
            best_so_far_length: None,
            mean_coverage: 0.5,
            feasible_count: 0,
        }];
        let mut buf = Vec::new();
        write_stats_csv(&stats, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "generation,best_fitness,best_so_far_length,mean_coverage,feasible_count\n0,-2000000,,0.5,0\n"
        );
    }
}
