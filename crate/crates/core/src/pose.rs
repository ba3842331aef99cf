//! Camera pose selection along a path: a greedy cover of the faces the path
//! can see, using conical fields of view.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, Vec3};
use crate::mesh::TriMesh;
use crate::path::InspectionPath;
use crate::scalar::Real;
use crate::viewpoint::ViewpointGraph;
use crate::visibility::VisibilityMatrix;

/// Slack on the cone boundary, in degrees.
const ANGLE_SLACK_DEG: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("invalid pose params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseParams {
    /// Field of view in degrees.
    pub fov: f64,
    /// Use `fov` itself as the cone half-angle instead of `fov / 2`.
    pub fov_literal: bool,
}

impl Default for PoseParams {
    fn default() -> Self {
        Self {
            fov: 90.0,
            fov_literal: true,
        }
    }
}

impl PoseParams {
    pub fn new(fov: f64, fov_literal: bool) -> Self {
        Self { fov, fov_literal }
    }

    pub fn half_angle_deg(&self) -> f64 {
        if self.fov_literal {
            self.fov
        } else {
            self.fov / 2.0
        }
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let h = self.half_angle_deg();
        if !(h > 0.0 && h <= 180.0) {
            return Err(PoseError::InvalidParams(format!(
                "cone half-angle must be in (0, 180] degrees, got {h} (fov = {}, fov_literal = {})",
                self.fov, self.fov_literal
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CameraPose<T> {
    pub viewpoint: u32,
    pub position: Point3<T>,
    /// Unit sight direction.
    pub sight: Vec3<T>,
    /// Face the sight was aimed at when the pose was generated.
    pub target_face: usize,
}

/// One pose per distinct path vertex and face visible from it, aimed at
/// the face centroid. Vertices appear in ascending index order.
pub fn candidate_poses<T: Real>(
    path: &InspectionPath,
    mesh: &TriMesh<T>,
    g: &ViewpointGraph<T>,
    vm: &VisibilityMatrix,
) -> Vec<CameraPose<T>> {
    path.distinct_vertices()
        .into_iter()
        .flat_map(|v| {
            vm.visible_faces(v as usize)
                .filter_map(move |j| aim(g, mesh, v, j))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn aim<T: Real>(g: &ViewpointGraph<T>, mesh: &TriMesh<T>, v: u32, j: usize) -> Option<CameraPose<T>> {
    let position = g.point(v as usize);
    let sight = (mesh.face(j).centroid - position).normalized()?;
    Some(CameraPose {
        viewpoint: v,
        position,
        sight,
        target_face: j,
    })
}

fn in_cone<T: Real>(pose: &CameraPose<T>, centroid: Point3<T>, half_deg: f64) -> bool {
    let d = centroid - pose.position;
    if d.norm() <= T::zero() {
        return true;
    }
    pose.sight.angle_to(d).as_f64().to_degrees() <= half_deg + ANGLE_SLACK_DEG
}

/// Faces seen from the pose's viewpoint that lie inside its cone.
pub fn pose_visible_set<T: Real>(
    pose: &CameraPose<T>,
    vm: &VisibilityMatrix,
    mesh: &TriMesh<T>,
    params: &PoseParams,
) -> Vec<usize> {
    let half = params.half_angle_deg();
    vm.visible_faces(pose.viewpoint as usize)
        .filter(|&k| in_cone(pose, mesh.face(k).centroid, half))
        .collect()
}

fn to_bits(faces: &[usize], words: usize) -> Vec<u64> {
    let mut b = vec![0u64; words];
    for &k in faces {
        b[k / 64] |= 1 << (k % 64);
    }
    b
}

fn bits_area<T: Real>(bits: impl Iterator<Item = u64>, areas: &[T]) -> T {
    let mut total = T::zero();
    for (w, mut word) in bits.enumerate() {
        while word != 0 {
            let b = word.trailing_zeros() as usize;
            total = total + areas[w * 64 + b];
            word &= word - 1;
        }
    }
    total
}

fn sight_cmp<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Ordering {
    a.to_f64()
        .partial_cmp(&b.to_f64())
        .unwrap_or(Ordering::Equal)
}

/// Which poses the greedy search chooses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidates {
    /// Only poses aimed at faces visible from their viewpoint.
    Pruned,
    /// Poses from every path vertex toward every face.
    All,
}

/// Greedy cover of the faces visible from the path: repeatedly takes the
/// pose covering the most uncovered area, then orders the chosen poses by
/// the first visit of their viewpoint along the path.
pub fn greedy_poses<T: Real>(
    path: &InspectionPath,
    g: &ViewpointGraph<T>,
    vm: &VisibilityMatrix,
    mesh: &TriMesh<T>,
    params: &PoseParams,
) -> Result<Vec<CameraPose<T>>, PoseError> {
    greedy_poses_with(path, g, vm, mesh, params, Candidates::Pruned)
}

pub fn greedy_poses_with<T: Real>(
    path: &InspectionPath,
    g: &ViewpointGraph<T>,
    vm: &VisibilityMatrix,
    mesh: &TriMesh<T>,
    params: &PoseParams,
    candidates: Candidates,
) -> Result<Vec<CameraPose<T>>, PoseError> {
    params.validate()?;
    let words = mesh.len().div_ceil(64);
    let poses = match candidates {
        Candidates::Pruned => candidate_poses(path, mesh, g, vm),
        Candidates::All => path
            .distinct_vertices()
            .into_iter()
            .flat_map(|v| (0..mesh.len()).filter_map(move |j| aim(g, mesh, v, j)))
            .collect(),
    };
    let sets: Vec<Vec<u64>> = poses
        .par_iter()
        .map(|p| to_bits(&pose_visible_set(p, vm, mesh, params), words))
        .collect();
    let areas: Vec<T> = mesh.faces().iter().map(|f| f.area).collect();

    let mut remaining = vec![0u64; words];
    for v in path.distinct_vertices() {
        for (r, w) in remaining.iter_mut().zip(vm.row(v as usize)) {
            *r |= w;
        }
    }

    let mut chosen: Vec<usize> = Vec::new();
    while remaining.iter().any(|&w| w != 0) {
        let best = sets
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let gain = bits_area(s.iter().zip(&remaining).map(|(a, b)| a & b), &areas);
                let newly = s.iter().zip(&remaining).any(|(a, b)| a & b != 0);
                (i, gain, newly)
            })
            .filter(|&(_, _, newly)| newly)
            .reduce_with(|a, b| {
                let (pa, pb) = (&poses[a.0], &poses[b.0]);
                let ord = b
                    .1
                    .partial_cmp(&a.1)
                    .unwrap_or(Ordering::Equal)
                    .then(pa.viewpoint.cmp(&pb.viewpoint))
                    .then_with(|| sight_cmp(pa.sight, pb.sight))
                    .then(a.0.cmp(&b.0));
                if ord == Ordering::Greater {
                    b
                } else {
                    a
                }
            });
        let Some((i, _, _)) = best else {
            // every remaining face lies outside every cone; cannot happen
            // since each candidate's own target is inside its cone
            break;
        };
        for (r, s) in remaining.iter_mut().zip(&sets[i]) {
            *r &= !s;
        }
        chosen.push(i);
    }

    let order: HashMap<u32, usize> = path
        .first_visit_order()
        .into_iter()
        .enumerate()
        .map(|(pos, v)| (v, pos))
        .collect();
    let mut out: Vec<CameraPose<T>> = chosen.into_iter().map(|i| poses[i]).collect();
    out.sort_by_key(|p| order[&p.viewpoint]);
    Ok(out)
}

/// One mission record; angles in degrees, roll fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionPose {
    pub viewpoint: u32,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub sight_x: f64,
    pub sight_y: f64,
    pub sight_z: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl<T: Real> From<&CameraPose<T>> for MissionPose {
    fn from(p: &CameraPose<T>) -> Self {
        let [x, y, z] = p.position.to_f64();
        let [sx, sy, sz] = p.sight.to_f64();
        Self {
            viewpoint: p.viewpoint,
            x,
            y,
            z,
            sight_x: sx,
            sight_y: sy,
            sight_z: sz,
            yaw_deg: sy.atan2(sx).to_degrees(),
            pitch_deg: sz.clamp(-1.0, 1.0).asin().to_degrees(),
            roll_deg: 0.0,
        }
    }
}

pub fn mission<T: Real>(poses: &[CameraPose<T>]) -> Vec<MissionPose> {
    poses.iter().map(MissionPose::from).collect()
}

/// Number of chosen poses whose cone contains each face.
pub fn pose_hits<T: Real>(
    poses: &[CameraPose<T>],
    vm: &VisibilityMatrix,
    mesh: &TriMesh<T>,
    params: &PoseParams,
) -> Vec<u32> {
    let mut hits = vec![0u32; mesh.len()];
    for p in poses {
        for k in pose_visible_set(p, vm, mesh, params) {
            hits[k] += 1;
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MeshRole, TriMesh};
    use crate::viewpoint::{build_graph, GridSpec};
    use crate::visibility::{compute_visibility, CacheKey, Occluders, VisibilityParams};
    use approx::assert_relative_eq;

    fn key() -> CacheKey {
        CacheKey {
            params_hash: 0,
            mesh_hash: 0,
            graph_hash: 0,
        }
    }

    /// Small upward-facing triangles centred at `centres`.
    fn patches(centres: &[[f64; 3]]) -> TriMesh<f64> {
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for c in centres {
            let b = verts.len();
            verts.push(Vec3::new(c[0] - 0.1, c[1] - 0.1, c[2]));
            verts.push(Vec3::new(c[0] + 0.2, c[1] - 0.1, c[2]));
            verts.push(Vec3::new(c[0] - 0.1, c[1] + 0.2, c[2]));
            tris.push([b, b + 1, b + 2]);
        }
        TriMesh::from_triangles(verts, &tris, MeshRole::InspectionObject).unwrap().0
    }

    fn single_point_graph(p: Vec3<f64>) -> ViewpointGraph<f64> {
        build_graph(
            &GridSpec {
                origin: p,
                extents: Vec3::new(1.0, 0.0, 0.0),
                interval: 1.0,
            },
            &[],
            0.0,
            &[],
        )
        .unwrap()
    }

    #[test]
    fn one_cluster_one_pose() {
        let mesh = patches(&[[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, 0.3, 0.0]]);
        let g = single_point_graph(Vec3::new(0.0, 0.0, 5.0));
        let vm = VisibilityMatrix::from_rows(&[vec![true; 3], vec![false; 3]], key());
        let path = InspectionPath::new(vec![0, 1], &g).unwrap();
        assert_eq!(candidate_poses(&path, &mesh, &g, &vm).len(), 3);
        let poses = greedy_poses(&path, &g, &vm, &mesh, &PoseParams::new(60.0, false)).unwrap();
        assert_eq!(poses.len(), 1);
        assert_relative_eq!(poses[0].sight.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn opposite_clusters_need_two_poses() {
        // clusters 120 degrees apart as seen from the origin
        let a = [5.0, 0.0, 0.0];
        let b = [-2.5, 5.0 * (3f64.sqrt() / 2.0), 0.0];
        let mesh = patches(&[a, b]);
        let g = single_point_graph(Vec3::zero());
        let vm = VisibilityMatrix::from_rows(&[vec![true, true], vec![false, false]], key());
        let path = InspectionPath::new(vec![0, 1], &g).unwrap();
        let poses = greedy_poses(&path, &g, &vm, &mesh, &PoseParams::new(30.0, true)).unwrap();
        assert_eq!(poses.len(), 2);
        // a literal 120 degree half-angle spans both
        let wide = greedy_poses(&path, &g, &vm, &mesh, &PoseParams::new(120.0, true)).unwrap();
        assert_eq!(wide.len(), 1);
    }

    #[test]
    fn target_in_own_set_and_behind_excluded() {
        let mesh = patches(&[[5.0, 0.0, 0.0], [-5.0, 0.0, 0.0]]);
        let g = single_point_graph(Vec3::zero());
        let vm = VisibilityMatrix::from_rows(&[vec![true, true], vec![false, false]], key());
        let path = InspectionPath::new(vec![0, 1], &g).unwrap();
        let params = PoseParams::new(89.0, true);
        for pose in candidate_poses(&path, &mesh, &g, &vm) {
            let set = pose_visible_set(&pose, &vm, &mesh, &params);
            assert_eq!(set, vec![pose.target_face]);
        }
    }

    #[test]
    fn empty_visibility_gives_no_poses() {
        let mesh = patches(&[[5.0, 0.0, 0.0]]);
        let g = single_point_graph(Vec3::zero());
        let vm = VisibilityMatrix::from_rows(&[vec![false], vec![false]], key());
        let path = InspectionPath::new(vec![0, 1], &g).unwrap();
        assert!(greedy_poses(&path, &g, &vm, &mesh, &PoseParams::default()).unwrap().is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(PoseParams::new(120.0, false).validate().is_ok());
        assert!(PoseParams::new(120.0, true).validate().is_ok());
        assert!(PoseParams::new(0.0, true).validate().is_err());
        assert!(PoseParams::new(400.0, false).validate().is_err());
    }

    #[test]
    fn mission_angles() {
        let p = CameraPose {
            viewpoint: 3,
            position: Vec3::new(1.0, 2.0, 3.0),
            sight: Vec3::new(0.0, 1.0, 0.0),
            target_face: 0,
        };
        let m = MissionPose::from(&p);
        assert_relative_eq!(m.yaw_deg, 90.0);
        assert_relative_eq!(m.pitch_deg, 0.0);
        let down = MissionPose::from(&CameraPose {
            sight: Vec3::new(0.0, 0.0, -1.0),
            ..p
        });
        assert_relative_eq!(down.pitch_deg, -90.0);
    }

    #[test]
    fn cube_path_cover_is_complete_and_ordered() {
        let cube = crate::mesh::unit_cube::<f64>(Vec3::new(2.0, 2.0, 2.0));
        let g = build_graph(
            &GridSpec {
                origin: Vec3::zero(),
                extents: Vec3::new(5.0, 5.0, 5.0),
                interval: 1.0,
            },
            &[&cube],
            0.5,
            &[],
        )
        .unwrap();
        let vm = compute_visibility(&g, &Occluders::target_only(&cube), &VisibilityParams::new(10.0, 45.0)).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let path = crate::path::random_init(&g, 60, &mut rng).unwrap();
        let params = PoseParams::new(60.0, false);
        let cands = candidate_poses(&path, &cube, &g, &vm);
        let expected: usize = path
            .distinct_vertices()
            .iter()
            .map(|&v| vm.visible_faces(v as usize).count())
            .sum();
        assert_eq!(cands.len(), expected);
        let poses = greedy_poses(&path, &g, &vm, &cube, &params).unwrap();
        let hits = pose_hits(&poses, &vm, &cube, &params);
        let cm = crate::path::CoverageModel::new(&cube, &vm, crate::path::CoverageScope::AllFaces);
        let visits = cm.visit_counts(&path, &vm);
        for j in 0..cube.len() {
            assert_eq!(hits[j] > 0, visits[j] > 0, "face {j}");
        }
        let order: Vec<u32> = path.first_visit_order();
        let pos: Vec<usize> = poses
            .iter()
            .map(|p| order.iter().position(|&v| v == p.viewpoint).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pruned_candidates_match_full_enumeration() {
        let cube = crate::mesh::unit_cube::<f64>(Vec3::new(2.0, 2.0, 2.0));
        let g = build_graph(
            &GridSpec {
                origin: Vec3::zero(),
                extents: Vec3::new(5.0, 5.0, 5.0),
                interval: 1.0,
            },
            &[&cube],
            0.5,
            &[],
        )
        .unwrap();
        let vm = compute_visibility(&g, &Occluders::target_only(&cube), &VisibilityParams::new(10.0, 45.0)).unwrap();
        let area = |ps: &[CameraPose<f64>], params: &PoseParams| -> Vec<bool> {
            pose_hits(ps, &vm, &cube, params).iter().map(|&h| h > 0).collect()
        };
        let mut differs = 0;
        for seed in 0..20 {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let path = crate::path::random_init(&g, 30, &mut rng).unwrap();
            for params in [PoseParams::new(60.0, false), PoseParams::new(90.0, true)] {
                let pruned = greedy_poses_with(&path, &g, &vm, &cube, &params, Candidates::Pruned).unwrap();
                let full = greedy_poses_with(&path, &g, &vm, &cube, &params, Candidates::All).unwrap();
                assert_eq!(area(&pruned, &params), area(&full, &params));
                if pruned.len() != full.len() {
                    differs += 1;
                }
            }
        }
        assert_eq!(differs, 0);
    }
}
