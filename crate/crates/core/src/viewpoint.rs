//! Candidate viewpoint lattice with 26-connectivity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Fingerprint;
use crate::geometry::{Aabb, Point3, Vec3};
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// Direction of the containment ray; deliberately off-axis so rays from
/// lattice points do not run along mesh edges of axis-aligned models.
const PARITY_RAY: [f64; 3] = [0.012_345_7, 0.037_123_9, 1.0];

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid no-fly zone {0}: min exceeds max")]
    InvalidZone(usize),
    #[error("safety distance must be non-negative")]
    InvalidSafetyDistance,
    #[error(
        "no viewpoints survive filtering; most were removed by the {dominant} filter \
         ({} by no-fly zones, {} inside the model, {} within the safety distance)",
        .stats.no_fly_zone, .stats.inside_model, .stats.safety_distance
    )]
    Empty {
        dominant: &'static str,
        stats: FilterStats,
    },
}

/// Regular lattice: `origin + interval·(i, j, k)` for every lattice point
/// inside `origin + [0, extents]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub origin: Point3<T>,
    pub extents: Vec3<T>,
    pub interval: T,
}

impl<T: Real> GridSpec<T> {
    /// Grid covering `bounds` grown by `padding` on every side.
    pub fn around(bounds: Aabb<T>, padding: T, interval: T) -> Self {
        let b = bounds.padded(padding);
        Self {
            origin: b.min,
            extents: b.extent(),
            interval,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.interval > T::zero()) {
            return Err(GraphError::InvalidGrid("interval must be positive".into()));
        }
        if (0..3).any(|a| !(self.extents[a] >= T::zero() && self.extents[a].is_finite())) {
            return Err(GraphError::InvalidGrid(
                "extents must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of lattice points per axis.
    pub fn dims(&self) -> [usize; 3] {
        std::array::from_fn(|a| {
            let n = (self.extents[a] / self.interval).as_f64();
            (n + 1e-9).floor() as usize + 1
        })
    }

    pub fn point(&self, l: [usize; 3]) -> Point3<T> {
        self.origin
            + Vec3::new(
                T::from_usize_lossy(l[0]),
                T::from_usize_lossy(l[1]),
                T::from_usize_lossy(l[2]),
            ) * self.interval
    }
}

/// Axis-aligned region that viewpoints may not occupy (boundary included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoFlyZone<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> NoFlyZone<T> {
    pub fn as_box(&self) -> Aabb<T> {
        Aabb::new(self.min, self.max)
    }

    pub fn contains(&self, p: Point3<T>) -> bool {
        self.as_box().contains(p)
    }
}

/// How many lattice points each filter removed (first failing filter, in
/// the order zones, containment, safety).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub lattice_points: usize,
    pub no_fly_zone: usize,
    pub inside_model: usize,
    pub safety_distance: usize,
}

impl FilterStats {
    fn dominant(&self) -> &'static str {
        let mut best = ("no-fly zone", self.no_fly_zone);
        for cand in [
            ("containment", self.inside_model),
            ("safety distance", self.safety_distance),
        ] {
            if cand.1 > best.1 {
                best = cand;
            }
        }
        best.0
    }
}

#[derive(Clone, Copy)]
enum Rejection {
    Zone,
    Inside,
    Safety,
}

/// Surviving lattice points and their 26-neighborhood adjacency.
#[derive(Debug, Clone)]
pub struct ViewpointGraph<T> {
    grid: GridSpec<T>,
    dims: [usize; 3],
    points: Vec<Point3<T>>,
    lattice: Vec<[u32; 3]>,
    // CSR adjacency; each neighbor list is sorted ascending
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    stats: FilterStats,
}

/// Filters the lattice of `grid` against `scene` and `zones` and connects
/// the survivors.
pub fn build_graph<T: Real>(
    grid: &GridSpec<T>,
    scene: &[&TriMesh<T>],
    safety_distance: T,
    zones: &[NoFlyZone<T>],
) -> Result<ViewpointGraph<T>, GraphError> {
    grid.validate()?;
    if !(safety_distance >= T::zero()) {
        return Err(GraphError::InvalidSafetyDistance);
    }
    if let Some(i) = zones.iter().position(|z| !z.as_box().is_valid()) {
        return Err(GraphError::InvalidZone(i));
    }
    let dims = grid.dims();
    let total = dims[0] * dims[1] * dims[2];
    let ray = Vec3::from_f64(PARITY_RAY);
    let unflatten = |idx: usize| [idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])];

    let verdicts: Vec<Option<Rejection>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let p = grid.point(unflatten(idx));
            if zones.iter().any(|z| z.contains(p)) {
                return Some(Rejection::Zone);
            }
            let crossings: usize = scene.iter().map(|m| m.ray_crossings(p, ray)).sum();
            if crossings % 2 == 1 {
                return Some(Rejection::Inside);
            }
            if safety_distance > T::zero() && scene.iter().any(|m| m.any_face_within(p, safety_distance)) {
                return Some(Rejection::Safety);
            }
            None
        })
        .collect();

    let mut stats = FilterStats {
        lattice_points: total,
        ..FilterStats::default()
    };
    let mut id_of = vec![u32::MAX; total];
    let mut points = Vec::new();
    let mut lattice = Vec::new();
    for (idx, verdict) in verdicts.iter().enumerate() {
        match verdict {
            Some(Rejection::Zone) => stats.no_fly_zone += 1,
            Some(Rejection::Inside) => stats.inside_model += 1,
            Some(Rejection::Safety) => stats.safety_distance += 1,
            None => {
                let l = unflatten(idx);
                id_of[idx] = points.len() as u32;
                points.push(grid.point(l));
                lattice.push(l.map(|c| c as u32));
            }
        }
    }
    if points.is_empty() {
        return Err(GraphError::Empty {
            dominant: stats.dominant(),
            stats,
        });
    }

    let mut offsets = Vec::with_capacity(points.len() + 1);
    let mut neighbors = Vec::with_capacity(points.len() * 26);
    offsets.push(0u32);
    for l in &lattice {
        let mut nb = Vec::with_capacity(26);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let c = [l[0] as i64 + dx, l[1] as i64 + dy, l[2] as i64 + dz];
                    if (0..3).any(|a| c[a] < 0 || c[a] >= dims[a] as i64) {
                        continue;
                    }
                    let idx = c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize);
                    if id_of[idx] != u32::MAX {
                        nb.push(id_of[idx]);
                    }
                }
            }
        }
        nb.sort_unstable();
        neighbors.extend_from_slice(&nb);
        offsets.push(neighbors.len() as u32);
    }
    log::info!(
        "viewpoint graph: {} of {} lattice points kept ({} zone, {} inside, {} safety)",
        points.len(),
        total,
        stats.no_fly_zone,
        stats.inside_model,
        stats.safety_distance
    );
    Ok(ViewpointGraph {
        grid: *grid,
        dims,
        points,
        lattice,
        offsets,
        neighbors,
        stats,
    })
}

impl<T: Real> ViewpointGraph<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, v: usize) -> Point3<T> {
        self.points[v]
    }

    pub fn lattice_coords(&self, v: usize) -> [u32; 3] {
        self.lattice[v]
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn interval(&self) -> T {
        self.grid.interval
    }

    pub fn lattice_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn filter_stats(&self) -> FilterStats {
        self.stats
    }

    /// Adjacent viewpoints of `v`, sorted ascending (excludes `v`).
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Same vertex, or adjacent in the 26-connectivity graph.
    #[inline]
    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        let (la, lb) = (self.lattice[a], self.lattice[b]);
        (0..3).all(|k| la[k].abs_diff(lb[k]) <= 1)
    }

    /// `N(a) ∩ N(b)`, where `N(v)` is `v` plus its adjacent vertices.
    /// Sorted ascending.
    pub fn common_neighbors(&self, a: usize, b: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .neighbors(a)
            .iter()
            .copied()
            .chain(std::iter::once(a as u32))
            .filter(|&x| self.are_neighbors(x as usize, b))
            .collect();
        out.sort_unstable();
        out
    }

    /// Content fingerprint over the grid and surviving points.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new("viewpoint-graph/v1");
        h.write_f64(self.grid.interval.as_f64());
        for c in self.grid.origin.to_f64() {
            h.write_f64(c);
        }
        for d in self.dims {
            h.write_u64(d as u64);
        }
        h.write_u64(self.lattice.len() as u64);
        for l in &self.lattice {
            for c in l {
                h.write_u64(*c as u64);
            }
        }
        h.finish()
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb::from_points(self.points.iter().copied())
    }

    pub fn to_export(&self) -> GraphExport {
        GraphExport {
            interval: self.grid.interval.as_f64(),
            points: self.points.iter().map(|p| p.to_f64()).collect(),
            adjacency: (0..self.len()).map(|v| self.neighbors(v).to_vec()).collect(),
        }
    }
}

/// JSON debugging export of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub interval: f64,
    pub points: Vec<[f64; 3]>,
    pub adjacency: Vec<Vec<u32>>,
}
