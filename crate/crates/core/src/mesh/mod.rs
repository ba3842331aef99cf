//! Triangle meshes of the inspected structure and its surroundings.

mod bridge;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::Bvh;
use crate::digest::Fingerprint;
use crate::geometry::{line_triangle_param, point_triangle_distance, triangle_area_normal};
use crate::geometry::{Aabb, Point3, Vec3};
use crate::scalar::Real;

pub use bridge::{BridgeModel, BridgeParams};
pub use io::{load_mesh, load_mesh_file, write_mesh, write_ply_with_face_scalar, MeshFormat};

/// Faces below this area (m²) are dropped at load time.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Segment parameter margin for occlusion tests; keeps the endpoints from
/// registering as hits on the faces they lie on.
pub const OCCLUSION_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh format error: {0}")]
    Format(String),
    #[error("mesh contains no valid faces")]
    Empty,
    #[error("degenerate triangle (zero area)")]
    DegenerateFace,
    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },
    #[error("invalid region {index}: {reason}")]
    InvalidRegion { index: usize, reason: String },
    #[error("invalid bridge parameters: {0}")]
    InvalidBridge(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeshRole {
    #[default]
    InspectionObject,
    EnvironmentObstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face<T> {
    pub vertex_indices: [usize; 3],
    pub centroid: Point3<T>,
    /// Unit normal, oriented by vertex winding.
    pub normal: Vec3<T>,
    /// Area in m².
    pub area: T,
    /// Number of distinct viewpoints required to count the face as covered.
    pub weight: u32,
}

/// Centroid, unit normal and area of the triangle `indices` into `vertices`.
pub fn face_metrics<T: Real>(
    vertices: &[Point3<T>],
    indices: [usize; 3],
) -> Result<(Point3<T>, Vec3<T>, T), MeshError> {
    let [a, b, c] = indices.map(|i| vertices[i]);
    let centroid = (a + b + c) / T::lit(3.0);
    match triangle_area_normal(a, b, c) {
        Some((area, normal)) if area.as_f64() >= DEGENERATE_AREA => Ok((centroid, normal, area)),
        _ => Err(MeshError::DegenerateFace),
    }
}

/// Result of building a mesh from raw triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub faces_read: usize,
    pub degenerate_dropped: usize,
}

/// An immutable triangle mesh with per-face metrics and a spatial index.
#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    vertices: Vec<Point3<T>>,
    faces: Vec<Face<T>>,
    role: MeshRole,
    bvh: Bvh<T>,
}

impl<T: Real> TriMesh<T> {
    /// Validates the triangles, computes face metrics and drops degenerate
    /// faces. Fails if a vertex index is out of range or nothing survives.
    pub fn from_triangles(
        vertices: Vec<Point3<T>>,
        triangles: &[[usize; 3]],
        role: MeshRole,
    ) -> Result<(Self, LoadReport), MeshError> {
        let mut faces = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (fi, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    vertex: v,
                    count: vertices.len(),
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                dropped += 1;
                continue;
            }
            match face_metrics(&vertices, *tri) {
                Ok((centroid, normal, area)) => faces.push(Face {
                    vertex_indices: *tri,
                    centroid,
                    normal,
                    area,
                    weight: 1,
                }),
                Err(_) => dropped += 1,
            }
        }
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate faces");
        }
        let report = LoadReport {
            faces_read: triangles.len(),
            degenerate_dropped: dropped,
        };
        Ok((Self::assemble(vertices, faces, role), report))
    }

    fn assemble(vertices: Vec<Point3<T>>, faces: Vec<Face<T>>, role: MeshRole) -> Self {
        let boxes: Vec<Aabb<T>> = faces
            .iter()
            .map(|f| Aabb::from_points(f.vertex_indices.map(|i| vertices[i])))
            .collect();
        let bvh = Bvh::build(&boxes);
        Self {
            vertices,
            faces,
            role,
            bvh,
        }
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face<T>] {
        &self.faces
    }

    pub fn face(&self, i: usize) -> &Face<T> {
        &self.faces[i]
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn role(&self) -> MeshRole {
        self.role
    }

    pub fn with_role(mut self, role: MeshRole) -> Self {
        self.role = role;
        self
    }

    pub fn triangle(&self, i: usize) -> [Point3<T>; 3] {
        self.faces[i].vertex_indices.map(|v| self.vertices[v])
    }

    pub fn total_area(&self) -> T {
        self.faces.iter().fold(T::zero(), |s, f| s + f.area)
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb::from_points(
            self.faces
                .iter()
                .flat_map(|f| f.vertex_indices)
                .map(|i| self.vertices[i]),
        )
    }

    pub fn weights(&self) -> impl Iterator<Item = u32> + '_ {
        self.faces.iter().map(|f| f.weight)
    }

    fn face_blocks_segment(&self, face: usize, p: Point3<T>, q: Point3<T>) -> bool {
        let [a, b, c] = self.triangle(face);
        let eps = T::lit(OCCLUSION_EPS);
        match line_triangle_param(p, q - p, a, b, c) {
            Some(t) => t > eps && t < T::one() - eps,
            None => false,
        }
    }

    /// True iff some face other than `exclude` crosses the open segment
    /// `(p, q)`, trimmed by [`OCCLUSION_EPS`] at both ends.
    pub fn segment_occluded(&self, p: Point3<T>, q: Point3<T>, exclude: Option<usize>) -> bool {
        self.bvh.visit_segment(p, q, |f| {
            Some(f) != exclude && self.face_blocks_segment(f, p, q)
        })
    }

    /// Reference implementation of [`Self::segment_occluded`] that tests
    /// every face.
    pub fn segment_occluded_brute(
        &self,
        p: Point3<T>,
        q: Point3<T>,
        exclude: Option<usize>,
    ) -> bool {
        (0..self.faces.len()).any(|f| Some(f) != exclude && self.face_blocks_segment(f, p, q))
    }

    /// Number of faces crossed by the ray `origin + t·dir`, `t > 0`.
    pub fn ray_crossings(&self, origin: Point3<T>, dir: Vec3<T>) -> usize {
        let b = self.bounds();
        let reach = b.extent().norm() + origin.distance(b.center()) + T::one();
        let dir = dir.normalized().unwrap_or_else(|| Vec3::new(T::zero(), T::zero(), T::one()));
        let far = origin + dir * reach;
        let mut count = 0;
        self.bvh.visit_segment(origin, far, |f| {
            let [a, b, c] = self.triangle(f);
            if let Some(t) = line_triangle_param(origin, far - origin, a, b, c) {
                if t > T::zero() && t <= T::one() {
                    count += 1;
                }
            }
            false
        });
        count
    }

    /// True iff some face lies at distance `≤ radius` from `p`.
    pub fn any_face_within(&self, p: Point3<T>, radius: T) -> bool {
        self.bvh.visit_ball(p, radius, |f| {
            let [a, b, c] = self.triangle(f);
            point_triangle_distance(p, a, b, c) <= radius
        })
    }

    /// Exact distance from `p` to the closest face, by full scan.
    pub fn distance_brute(&self, p: Point3<T>) -> T {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                point_triangle_distance(p, a, b, c)
            })
            .fold(T::infinity(), T::min)
    }

    /// Copy of the mesh with the winding of every face reversed.
    pub fn flipped(&self) -> Self {
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.vertex_indices;
                Face {
                    vertex_indices: [a, c, b],
                    normal: -f.normal,
                    ..f.clone()
                }
            })
            .collect();
        Self::assemble(self.vertices.clone(), faces, self.role)
    }

    /// Geometry fingerprint (vertex positions and connectivity; weights and
    /// role excluded).
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new("trimesh/v1");
        h.write_u64(self.faces.len() as u64);
        for f in &self.faces {
            for v in f.vertex_indices {
                for c in self.vertices[v].to_f64() {
                    h.write_f64(c);
                }
            }
        }
        h.finish()
    }

    /// Assigns region weights to faces; see [`RegionSpec`].
    pub fn apply_weights(
        &self,
        regions: &[RegionSpec<T>],
    ) -> Result<(Self, WeightReport), MeshError> {
        for (i, r) in regions.iter().enumerate() {
            r.validate(self.faces.len())
                .map_err(|reason| MeshError::InvalidRegion { index: i, reason })?;
        }
        let mut mesh = self.clone();
        let mut report = WeightReport {
            faces_per_region: vec![0; regions.len()],
        };
        for f in &mut mesh.faces {
            f.weight = 1;
        }
        for (ri, region) in regions.iter().enumerate() {
            match &region.selector {
                RegionSelector::Box(b) => {
                    for f in mesh.faces.iter_mut().filter(|f| b.contains(f.centroid)) {
                        f.weight = region.weight;
                        report.faces_per_region[ri] += 1;
                    }
                }
                RegionSelector::Faces(ids) => {
                    let mut ids = ids.clone();
                    ids.sort_unstable();
                    ids.dedup();
                    for &i in &ids {
                        mesh.faces[i].weight = region.weight;
                    }
                    report.faces_per_region[ri] += ids.len();
                }
            }
            if report.faces_per_region[ri] == 0 {
                log::warn!("weight region {ri} selects no faces");
            }
        }
        Ok((mesh, report))
    }
}

/// Which faces a weight region applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSelector<T> {
    /// Faces whose centroid lies in the closed box.
    Box(Aabb<T>),
    Faces(Vec<usize>),
}

/// A weighted face region. When regions overlap, the one listed last wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec<T> {
    pub selector: RegionSelector<T>,
    pub weight: u32,
}

impl<T: Real> RegionSpec<T> {
    fn validate(&self, face_count: usize) -> Result<(), String> {
        if self.weight < 1 {
            return Err("weight must be at least 1".into());
        }
        match &self.selector {
            RegionSelector::Box(b) if !b.is_valid() => Err("box min exceeds max".into()),
            RegionSelector::Faces(ids) => match ids.iter().find(|&&i| i >= face_count) {
                Some(i) => Err(format!("face index {i} out of range")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// How many faces each region selected (zero means the region was empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightReport {
    pub faces_per_region: Vec<usize>,
}

impl WeightReport {
    pub fn empty_regions(&self) -> Vec<usize> {
        self.faces_per_region
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Axis-aligned unit cube `[0,1]³` offset by `origin`, 12 outward-facing
/// triangles.
pub fn unit_cube<T: Real>(origin: Point3<T>) -> TriMesh<T> {
    let corners: Vec<Point3<T>> = (0..8)
        .map(|i| {
            origin
                + Vec3::new(
                    T::from_usize_lossy(i & 1),
                    T::from_usize_lossy((i >> 1) & 1),
                    T::from_usize_lossy((i >> 2) & 1),
                )
        })
        .collect();
    let tris = [
        [0, 2, 1],
        [1, 2, 3], // z = 0
        [4, 5, 6],
        [5, 7, 6], // z = 1
        [0, 1, 4],
        [1, 5, 4], // y = 0
        [2, 6, 3],
        [3, 6, 7], // y = 1
        [0, 4, 2],
        [2, 4, 6], // x = 0
        [1, 3, 5],
        [3, 7, 5], // x = 1
    ];
    TriMesh::from_triangles(corners, &tris, MeshRole::InspectionObject)
        .expect("cube is valid")
        .0
}

/// Every undirected edge is shared by at most two faces.
pub fn edges_manifold<T: Real>(mesh: &TriMesh<T>) -> bool {
    let mut counts = std::collections::HashMap::new();
    for f in mesh.faces() {
        let [a, b, c] = f.vertex_indices;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *counts.entry((u.min(v), u.max(v))).or_insert(0usize) += 1;
        }
    }
    counts.values().all(|&n| n <= 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Vec3::new(x, y, z)
    }

    fn single(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> TriMesh<f64> {
        TriMesh::from_triangles(vec![a, b, c], &[[0, 1, 2]], MeshRole::InspectionObject)
            .unwrap()
            .0
    }

    #[test]
    fn cube_has_twelve_faces_and_area_six() {
        let cube = unit_cube(Vec3::zero());
        assert_eq!(cube.len(), 12);
        assert_relative_eq!(cube.total_area(), 6.0, epsilon = 1e-12);
        assert!(edges_manifold(&cube));
        // outward normals: normal points away from the cube center
        let c = p(0.5, 0.5, 0.5);
        for f in cube.faces() {
            assert!((f.centroid - c).dot(f.normal) > 0.0);
            assert_relative_eq!(f.normal.norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_triangle_metrics() {
        let m = single(p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.));
        let f = m.face(0);
        assert_relative_eq!(f.area, 0.5);
        assert_relative_eq!(f.normal.z.abs(), 1.0);
        assert_relative_eq!(f.centroid.x, 1.0 / 3.0);
        assert_eq!(f.weight, 1);
    }

    #[test]
    fn face_metric_examples() {
        let verts = vec![p(0., 0., 0.), p(3., 0., 0.), p(0., 4., 0.)];
        assert_relative_eq!(face_metrics(&verts, [0, 1, 2]).unwrap().2, 6.0);
        let s3 = 3f64.sqrt();
        let eq = vec![p(0., 0., 0.), p(2., 0., 0.), p(1., s3, 0.)];
        assert_relative_eq!(face_metrics(&eq, [0, 1, 2]).unwrap().2, s3, epsilon = 1e-12);
        let degenerate = vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)];
        assert!(matches!(
            face_metrics(&degenerate, [0, 1, 2]),
            Err(MeshError::DegenerateFace)
        ));
    }

    #[test]
    fn degenerate_faces_dropped_and_counted() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(2., 0., 0.)];
        let (m, report) = TriMesh::from_triangles(
            verts,
            &[[0, 1, 2], [0, 1, 3], [0, 0, 2]],
            MeshRole::InspectionObject,
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(report.degenerate_dropped, 2);
    }

    #[test]
    fn zero_valid_faces_is_an_error() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)];
        assert!(matches!(
            TriMesh::from_triangles(verts, &[[0, 1, 2]], MeshRole::InspectionObject),
            Err(MeshError::Empty)
        ));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)];
        assert!(matches!(
            TriMesh::from_triangles(verts, &[[0, 1, 5]], MeshRole::InspectionObject),
            Err(MeshError::IndexOutOfRange { vertex: 5, .. })
        ));
    }

    #[test]
    fn wall_occludes_crossing_segment() {
        let wall = single(p(0., -5., -5.), p(0., 5., -5.), p(0., 0., 5.));
        assert!(wall.segment_occluded(p(-1., 0., 0.), p(1., 0., 0.), None));
        assert!(!wall.segment_occluded(p(-1., 0., 0.), p(1., 0., 0.), Some(0)));
        // segment ending on the wall is not occluded by it
        assert!(!wall.segment_occluded(p(-1., 0., 0.), p(0., 0., 0.), None));
    }

    #[test]
    fn segment_missing_cube_is_clear() {
        let cube = unit_cube(Vec3::zero());
        assert!(!cube.segment_occluded(p(-1., -1., 2.), p(3., 3., 2.), None));
        assert!(cube.segment_occluded(p(-1., 0.5, 0.5), p(2., 0.5, 0.5), None));
    }

    #[test]
    fn occlusion_index_matches_brute_force_on_random_segments() {
        let cube = unit_cube(Vec3::zero());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut any_hit = 0;
        for _ in 0..1000 {
            let mut pt = || p(rng.random_range(-1.5..2.5), rng.random_range(-1.5..2.5), rng.random_range(-1.5..2.5));
            let (a, b) = (pt(), pt());
            let exclude = if rng.random_bool(0.3) { Some(rng.random_range(0..12)) } else { None };
            let fast = cube.segment_occluded(a, b, exclude);
            assert_eq!(fast, cube.segment_occluded_brute(a, b, exclude));
            assert_eq!(fast, cube.segment_occluded(b, a, exclude), "symmetry");
            any_hit += fast as usize;
        }
        assert!(any_hit > 100);
    }

    #[test]
    fn ray_parity_detects_inside() {
        let cube = unit_cube(Vec3::zero());
        let dir = p(0.0123, 0.0371, 1.0);
        assert_eq!(cube.ray_crossings(p(0.5, 0.5, 0.5), dir) % 2, 1);
        assert_eq!(cube.ray_crossings(p(0.5, 0.5, -0.5), dir) % 2, 0);
        assert_eq!(cube.ray_crossings(p(3.0, 0.5, 0.5), dir) % 2, 0);
    }

    #[test]
    fn distance_queries_agree() {
        let cube = unit_cube(Vec3::zero());
        let q = p(2.0, 0.5, 0.5);
        assert_relative_eq!(cube.distance_brute(q), 1.0);
        assert!(cube.any_face_within(q, 1.0));
        assert!(!cube.any_face_within(q, 0.99));
    }

    #[test]
    fn flipping_windings_flips_normals_only() {
        let cube = unit_cube::<f64>(Vec3::zero());
        let flipped = cube.flipped();
        for (a, b) in cube.faces().iter().zip(flipped.faces()) {
            assert_relative_eq!(a.area, b.area);
            assert_relative_eq!((a.normal + b.normal).norm(), 0.0);
        }
        assert_ne!(cube.fingerprint(), flipped.fingerprint());
    }

    #[test]
    fn weights_default_whole_box_and_last_wins() {
        let cube = unit_cube(Vec3::zero());
        let (w, _) = cube.apply_weights(&[]).unwrap();
        assert!(w.weights().all(|x| x == 1));

        let all = RegionSpec {
            selector: RegionSelector::Box(Aabb::new(p(-1., -1., -1.), p(2., 2., 2.))),
            weight: 2,
        };
        let (w, _) = cube.apply_weights(std::slice::from_ref(&all)).unwrap();
        assert!(w.weights().all(|x| x == 2));
        assert_relative_eq!(w.total_area(), cube.total_area());

        let top = RegionSpec {
            selector: RegionSelector::Faces(vec![2, 3]),
            weight: 3,
        };
        let (w, report) = cube.apply_weights(&[all, top]).unwrap();
        assert_eq!(w.face(2).weight, 3);
        assert_eq!(w.face(0).weight, 2);
        assert!(report.empty_regions().is_empty());
    }

    #[test]
    fn empty_region_is_reported_not_rejected() {
        let cube = unit_cube(Vec3::zero());
        let far = RegionSpec {
            selector: RegionSelector::Box(Aabb::new(p(10., 10., 10.), p(11., 11., 11.))),
            weight: 2,
        };
        let (w, report) = cube.apply_weights(&[far]).unwrap();
        assert_eq!(report.empty_regions(), vec![0]);
        assert!(w.weights().all(|x| x == 1));
    }

    #[test]
    fn invalid_regions_rejected() {
        let cube = unit_cube(Vec3::zero());
        let bad_box = RegionSpec {
            selector: RegionSelector::Box(Aabb::new(p(1., 0., 0.), p(0., 1., 1.))),
            weight: 2,
        };
        assert!(cube.apply_weights(&[bad_box]).is_err());
        let bad_ids = RegionSpec {
            selector: RegionSelector::Faces(vec![12]),
            weight: 2,
        };
        assert!(cube.apply_weights(&[bad_ids]).is_err());
        let zero = RegionSpec {
            selector: RegionSelector::Faces(vec![0]),
            weight: 0,
        };
        assert!(cube.apply_weights(&[zero]).is_err());
    }
}
