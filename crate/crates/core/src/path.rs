//! Inspection paths as walks on the viewpoint graph, their length and
//! weighted area coverage, and the two initialization strategies.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Aabb;
use crate::mesh::TriMesh;
use crate::scalar::Real;
use crate::viewpoint::ViewpointGraph;
use crate::visibility::VisibilityMatrix;

const START_RETRIES: usize = 1000;
const LOOP_RETRIES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("path is discontinuous after position {0}")]
    Discontinuous(usize),
    #[error("path must have at least 2 vertices")]
    TooShort,
    #[error("vertex {0} is not in the viewpoint graph")]
    UnknownVertex(u32),
    #[error("viewpoint graph has no edges to walk on")]
    NoEdges,
    #[error("invalid span template: {0}")]
    InvalidTemplate(String),
    #[error("span {span} has no viewpoints {} the deck", if *.above { "above" } else { "below" })]
    EmptySlab { span: usize, above: bool },
    #[error("could not connect loop points in span {0} (disconnected viewpoint space)")]
    Unreachable(usize),
}

/// Ordered viewpoint indices; the genome evolved by the optimizer.
/// Consecutive entries are equal or adjacent on the graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InspectionPath(Vec<u32>);

impl InspectionPath {
    /// Wraps `vertices` after checking length and continuity on `graph`.
    pub fn new<T: Real>(vertices: Vec<u32>, graph: &ViewpointGraph<T>) -> Result<Self, PathError> {
        let p = Self(vertices);
        p.validate(graph)?;
        Ok(p)
    }

    /// Wraps `vertices` without validation.
    pub fn from_vertices_unchecked(vertices: Vec<u32>) -> Self {
        Self(vertices)
    }

    pub fn validate<T: Real>(&self, graph: &ViewpointGraph<T>) -> Result<(), PathError> {
        if self.0.len() < 2 {
            return Err(PathError::TooShort);
        }
        if let Some(&v) = self.0.iter().find(|&&v| v as usize >= graph.len()) {
            return Err(PathError::UnknownVertex(v));
        }
        match self
            .0
            .windows(2)
            .position(|w| !graph.are_neighbors(w[0] as usize, w[1] as usize))
        {
            Some(i) => Err(PathError::Discontinuous(i)),
            None => Ok(()),
        }
    }

    pub fn is_continuous<T: Real>(&self, graph: &ViewpointGraph<T>) -> bool {
        self.validate(graph).is_ok()
    }

    pub fn vertices(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vertices(self) -> Vec<u32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct vertices, ascending.
    pub fn distinct_vertices(&self) -> Vec<u32> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct vertices in order of first visit.
    pub fn first_visit_order(&self) -> Vec<u32> {
        let mut seen = std::collections::HashSet::with_capacity(self.0.len());
        self.0.iter().copied().filter(|v| seen.insert(*v)).collect()
    }

    /// The path with runs of repeated vertices collapsed to one entry.
    pub fn collapsed(&self) -> Vec<u32> {
        let mut v = self.0.clone();
        v.dedup();
        v
    }
}

/// Sum of Euclidean step lengths; fails if the path is not continuous.
pub fn path_length<T: Real>(p: &InspectionPath, g: &ViewpointGraph<T>) -> Result<T, PathError> {
    p.validate(g)?;
    Ok(path_length_unchecked(p, g))
}

/// [`path_length`] without the continuity check.
pub fn path_length_unchecked<T: Real>(p: &InspectionPath, g: &ViewpointGraph<T>) -> T {
    p.vertices().windows(2).fold(T::zero(), |acc, w| {
        if w[0] == w[1] {
            acc
        } else {
            acc + g.point(w[0] as usize).distance(g.point(w[1] as usize))
        }
    })
}

/// Which faces enter the coverage ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageScope {
    /// Every face of the mesh.
    #[default]
    #[serde(alias = "all")]
    AllFaces,
    /// Only faces visible from at least one viewpoint of the graph.
    #[serde(alias = "visible")]
    VisibleFaces,
}

/// Precomputed face areas, weights and scope for repeated coverage
/// evaluation. Coverage is the area fraction of in-scope faces seen from at
/// least `weight` distinct path viewpoints.
#[derive(Debug, Clone)]
pub struct CoverageModel<T> {
    areas: Vec<T>,
    weights: Vec<u32>,
    in_scope: Vec<bool>,
    total_area: T,
    max_weight: u32,
}

impl<T: Real> CoverageModel<T> {
    pub fn new(mesh: &TriMesh<T>, vm: &VisibilityMatrix, scope: CoverageScope) -> Self {
        let in_scope = match scope {
            CoverageScope::AllFaces => vec![true; mesh.len()],
            CoverageScope::VisibleFaces => vm.visible_from_any(),
        };
        Self::from_parts(
            mesh.faces().iter().map(|f| f.area).collect(),
            mesh.weights().collect(),
            in_scope,
        )
    }

    pub fn from_parts(areas: Vec<T>, weights: Vec<u32>, in_scope: Vec<bool>) -> Self {
        assert_eq!(areas.len(), weights.len());
        assert_eq!(areas.len(), in_scope.len());
        let total_area = areas
            .iter()
            .zip(&in_scope)
            .filter(|(_, &s)| s)
            .fold(T::zero(), |acc, (&a, _)| acc + a);
        let max_weight = weights.iter().copied().max().unwrap_or(1);
        Self {
            areas,
            weights,
            in_scope,
            total_area,
            max_weight,
        }
    }

    pub fn face_count(&self) -> usize {
        self.areas.len()
    }

    pub fn in_scope(&self) -> &[bool] {
        &self.in_scope
    }

    /// Number of distinct path vertices that see each face.
    pub fn visit_counts(&self, p: &InspectionPath, vm: &VisibilityMatrix) -> Vec<u32> {
        let mut counts = vec![0u32; self.areas.len()];
        for v in p.distinct_vertices() {
            for j in vm.visible_faces(v as usize) {
                counts[j] += 1;
            }
        }
        counts
    }

    pub fn coverage(&self, p: &InspectionPath, vm: &VisibilityMatrix) -> T {
        debug_assert_eq!(vm.faces(), self.areas.len());
        if self.total_area <= T::zero() {
            return T::zero();
        }
        let covered = if self.max_weight <= 1 {
            let words = self.areas.len().div_ceil(64);
            let mut seen = vec![0u64; words];
            for v in p.distinct_vertices() {
                for (s, w) in seen.iter_mut().zip(vm.row(v as usize)) {
                    *s |= w;
                }
            }
            (0..self.areas.len())
                .filter(|&j| self.in_scope[j] && seen[j / 64] >> (j % 64) & 1 == 1)
                .fold(T::zero(), |acc, j| acc + self.areas[j])
        } else {
            let counts = self.visit_counts(p, vm);
            (0..self.areas.len())
                .filter(|&j| self.in_scope[j] && counts[j] >= self.weights[j])
                .fold(T::zero(), |acc, j| acc + self.areas[j])
        };
        covered / self.total_area
    }
}

/// Weighted area coverage of `p` over all faces of `mesh`.
pub fn path_coverage<T: Real>(p: &InspectionPath, vm: &VisibilityMatrix, mesh: &TriMesh<T>) -> T {
    CoverageModel::new(mesh, vm, CoverageScope::AllFaces).coverage(p, vm)
}

/// Default initial walk length: the bounding-box perimeter in the
/// horizontal plane, in grid steps.
pub fn default_path_points<T: Real>(bounds: &Aabb<T>, interval: T) -> usize {
    let e = bounds.extent();
    let perimeter = (e.x + e.y) * T::lit(2.0);
    ((perimeter / interval).as_f64().ceil() as usize).max(2)
}

/// Random walk of `n_points` vertices from a uniformly chosen start, each
/// step along a uniformly chosen incident edge.
pub fn random_init<T: Real, R: Rng + ?Sized>(
    g: &ViewpointGraph<T>,
    n_points: usize,
    rng: &mut R,
) -> Result<InspectionPath, PathError> {
    if n_points < 2 {
        return Err(PathError::TooShort);
    }
    if g.edge_count() == 0 {
        return Err(PathError::NoEdges);
    }
    let start = (0..START_RETRIES)
        .map(|_| rng.random_range(0..g.len()))
        .find(|&v| !g.neighbors(v).is_empty())
        .ok_or(PathError::NoEdges)?;
    let mut walk = Vec::with_capacity(n_points);
    walk.push(start as u32);
    let mut cur = start;
    for _ in 1..n_points {
        cur = *g.neighbors(cur).choose(rng).expect("walk stays on non-isolated vertices") as usize;
        walk.push(cur as u32);
    }
    Ok(InspectionPath(walk))
}

/// Span layout for rule-based initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanTemplate<T> {
    /// Axis along the structure (0 = x, 1 = y).
    pub axis: usize,
    /// Span extents along `axis`, ordered and non-overlapping.
    pub spans: Vec<(T, T)>,
    pub loops_per_span: usize,
    /// Elevation separating "above deck" (z > deck_height) from below.
    pub deck_height: T,
}

impl<T: Real> SpanTemplate<T> {
    pub fn validate(&self) -> Result<(), PathError> {
        let bad = |m: &str| Err(PathError::InvalidTemplate(m.into()));
        if self.axis > 1 {
            return bad("axis must be 0 (x) or 1 (y)");
        }
        if self.spans.is_empty() {
            return bad("at least one span is required");
        }
        if self.loops_per_span == 0 {
            return bad("loops_per_span must be at least 1");
        }
        if self.spans.iter().any(|&(a, b)| !(a < b)) {
            return bad("every span needs start < end");
        }
        if self.spans.windows(2).any(|w| w[0].1 > w[1].0) {
            return bad("spans must be ordered and non-overlapping");
        }
        Ok(())
    }
}

/// Loops of four sampled viewpoints (two above the deck, two below) around
/// each span in order, joined by shortest graph paths.
pub fn rule_based_init<T: Real, R: Rng + ?Sized>(
    g: &ViewpointGraph<T>,
    t: &SpanTemplate<T>,
    rng: &mut R,
) -> Result<InspectionPath, PathError> {
    t.validate()?;
    let side = 1 - t.axis;
    let mut walk: Vec<u32> = Vec::new();
    for (si, &(lo, hi)) in t.spans.iter().enumerate() {
        let slab: Vec<u32> = (0..g.len() as u32)
            .filter(|&v| {
                let c = g.point(v as usize)[t.axis];
                lo <= c && c <= hi
            })
            .collect();
        let (above, below): (Vec<u32>, Vec<u32>) = slab
            .iter()
            .partition(|&&v| g.point(v as usize).z > t.deck_height);
        if above.len() < 2 {
            return Err(PathError::EmptySlab { span: si, above: true });
        }
        if below.len() < 2 {
            return Err(PathError::EmptySlab { span: si, above: false });
        }
        let side_mid = {
            let b = Aabb::from_points(slab.iter().map(|&v| g.point(v as usize)));
            (b.min[side] + b.max[side]) * T::lit(0.5)
        };
        for _ in 0..t.loops_per_span {
            let mut attempt = 0;
            let segment = loop {
                attempt += 1;
                if attempt > LOOP_RETRIES {
                    return Err(PathError::Unreachable(si));
                }
                let mut corners: Vec<u32> = above.choose_multiple(rng, 2).copied().collect();
                corners.extend(below.choose_multiple(rng, 2).copied());
                // order corners around the span so the loop encircles it
                let angle = |v: u32| {
                    let p = g.point(v as usize);
                    (p.z - t.deck_height).atan2(p[side] - side_mid).as_f64()
                };
                corners.sort_by(|&a, &b| angle(a).partial_cmp(&angle(b)).unwrap_or(Ordering::Equal));
                if let Some(seg) = connect_loop(g, walk.last().copied(), &corners) {
                    break seg;
                }
            };
            walk.extend(segment);
        }
    }
    walk.dedup();
    if walk.len() < 2 {
        // all four corners collapsed onto one vertex; step to a neighbor
        let v = walk[0] as usize;
        let n = *g.neighbors(v).choose(rng).ok_or(PathError::NoEdges)?;
        walk.push(n);
    }
    Ok(InspectionPath(walk))
}

/// Walk from `from` (if any) to the first corner, around all corners and
/// back to the first. Excludes `from` itself.
fn connect_loop<T: Real>(g: &ViewpointGraph<T>, from: Option<u32>, corners: &[u32]) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = match from {
        Some(f) => f,
        None => {
            out.push(corners[0]);
            corners[0]
        }
    };
    for &next in corners.iter().chain(std::iter::once(&corners[0])).skip(from.is_none() as usize) {
        let leg = shortest_path(g, cur as usize, next as usize)?;
        out.extend(leg.into_iter().skip(1));
        cur = next;
    }
    Some(out)
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: u32,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Uniform-cost search with Euclidean edge weights. Returns the vertex
/// sequence from `from` to `to` inclusive, or `None` if unreachable.
pub fn shortest_path<T: Real>(g: &ViewpointGraph<T>, from: usize, to: usize) -> Option<Vec<u32>> {
    if from == to {
        return Some(vec![from as u32]);
    }
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut prev = vec![u32::MAX; g.len()];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        vertex: from as u32,
    });
    while let Some(Frontier { dist: d, vertex }) = heap.pop() {
        let v = vertex as usize;
        if v == to {
            let mut path = vec![to as u32];
            let mut cur = to;
            while cur != from {
                cur = prev[cur] as usize;
                path.push(cur as u32);
            }
            path.reverse();
            return Some(path);
        }
        if d > dist[v] {
            continue;
        }
        let pv = g.point(v);
        for &w in g.neighbors(v) {
            let nd = d + pv.distance(g.point(w as usize)).as_f64();
            if nd < dist[w as usize] {
                dist[w as usize] = nd;
                prev[w as usize] = vertex;
                heap.push(Frontier { dist: nd, vertex: w });
            }
        }
    }
    None
}

/// JSON export of a path: collapsed waypoints plus the raw genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathExport {
    pub length: f64,
    pub coverage: f64,
    pub feasible: bool,
    pub waypoints: Vec<Waypoint>,
    /// Graph vertex indices of the genome, uncollapsed.
    pub vertices: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PathExport {
    pub fn new<T: Real>(
        p: &InspectionPath,
        g: &ViewpointGraph<T>,
        length: T,
        coverage: T,
        feasible: bool,
    ) -> Self {
        let waypoints = p
            .collapsed()
            .iter()
            .map(|&v| {
                let [x, y, z] = g.point(v as usize).to_f64();
                Waypoint { x, y, z }
            })
            .collect();
        Self {
            length: length.as_f64(),
            coverage: coverage.as_f64(),
            feasible,
            waypoints,
            vertices: p.vertices().to_vec(),
        }
    }
}
