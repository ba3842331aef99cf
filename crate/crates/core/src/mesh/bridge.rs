//! Synthetic multi-span box-girder bridge generator.
//!
//! The deck is a single closed box spanning all spans; interior piers are
//! closed boxes from the ground (z = 0) up to the deck soffit. Each box face
//! is subdivided into cells no longer than `segment_length` and split along
//! one diagonal, so vertices are shared between adjacent faces of a box.
//! Skew is applied as a shear `x += y·tan(skew)`; faces with an x normal
//! (deck ends, pier sides) grow by `sec(skew)`, all others keep their area.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MeshError, MeshRole, TriMesh};
use crate::geometry::{Aabb, Point3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeParams {
    pub spans: usize,
    /// Length of each span along x (m).
    pub span_length: f64,
    pub deck_width: f64,
    pub deck_thickness: f64,
    /// Height of the deck soffit above the ground (m).
    pub clearance: f64,
    /// Side of the square pier cross-section (m).
    pub pier_size: f64,
    pub skew_deg: f64,
    /// Maximum mesh cell edge along each box axis (m).
    pub segment_length: f64,
}

impl Default for BridgeParams {
    fn default() -> Self {
        Self {
            spans: 3,
            span_length: 7.0,
            deck_width: 4.0,
            deck_thickness: 0.5,
            clearance: 4.0,
            pier_size: 0.6,
            skew_deg: 15.0,
            segment_length: 1.0,
        }
    }
}

impl BridgeParams {
    fn validate(&self) -> Result<(), MeshError> {
        let positive = [
            ("span_length", self.span_length),
            ("deck_width", self.deck_width),
            ("deck_thickness", self.deck_thickness),
            ("clearance", self.clearance),
            ("pier_size", self.pier_size),
            ("segment_length", self.segment_length),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(MeshError::InvalidBridge(format!("{name} must be positive")));
        }
        if self.spans == 0 {
            return Err(MeshError::InvalidBridge("spans must be at least 1".into()));
        }
        if !(self.skew_deg.abs() < 60.0) {
            return Err(MeshError::InvalidBridge("|skew_deg| must be below 60".into()));
        }
        if self.pier_size >= self.span_length {
            return Err(MeshError::InvalidBridge("pier_size must be below span_length".into()));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.spans as f64 * self.span_length
    }

    pub fn deck_top(&self) -> f64 {
        self.clearance + self.deck_thickness
    }
}

/// Generated bridge mesh plus the layout facts planners need.
#[derive(Debug, Clone)]
pub struct BridgeModel<T> {
    pub mesh: TriMesh<T>,
    pub params: BridgeParams,
    /// Span extents along x on the bridge centerline.
    pub span_intervals: Vec<(T, T)>,
    /// Bounding box of the deck (includes the skewed ends).
    pub deck_bounds: Aabb<T>,
}

impl<T: Real> BridgeModel<T> {
    pub fn generate(params: &BridgeParams) -> Result<Self, MeshError> {
        params.validate()?;
        let shear = params.skew_deg.to_radians().tan();
        let mut builder = SoupBuilder::new(shear, params.segment_length);
        let half_w = params.deck_width / 2.0;
        let deck = (
            [0.0, -half_w, params.clearance],
            [params.total_length(), half_w, params.deck_top()],
        );
        builder.add_box(deck.0, deck.1);
        let half_p = params.pier_size / 2.0;
        for k in 1..params.spans {
            let x = k as f64 * params.span_length;
            builder.add_box(
                [x - half_p, -half_p, 0.0],
                [x + half_p, half_p, params.clearance],
            );
        }
        let vertices: Vec<Point3<T>> = builder.vertices.iter().map(|&v| Vec3::from_f64(v)).collect();
        let (mesh, _) =
            TriMesh::from_triangles(vertices, &builder.triangles, MeshRole::InspectionObject)?;
        let span_intervals = (0..params.spans)
            .map(|k| {
                let a = k as f64 * params.span_length;
                (T::lit(a), T::lit(a + params.span_length))
            })
            .collect();
        let skew_dx = half_w * shear.abs();
        let deck_bounds = Aabb::new(
            Vec3::from_f64([-skew_dx, -half_w, params.clearance]),
            Vec3::from_f64([params.total_length() + skew_dx, half_w, params.deck_top()]),
        );
        Ok(Self {
            mesh,
            params: params.clone(),
            span_intervals,
            deck_bounds,
        })
    }

    pub fn deck_top(&self) -> T {
        T::lit(self.params.deck_top())
    }

    /// Centerline x coordinate of each span's midpoint.
    pub fn midspans(&self) -> Vec<T> {
        self.span_intervals
            .iter()
            .map(|&(a, b)| (a + b) * T::lit(0.5))
            .collect()
    }
}

struct SoupBuilder {
    shear: f64,
    segment: f64,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

impl SoupBuilder {
    fn new(shear: f64, segment: f64) -> Self {
        Self {
            shear,
            segment,
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    /// Adds a closed, outward-wound box surface.
    fn add_box(&mut self, lo: [f64; 3], hi: [f64; 3]) {
        let cells: [usize; 3] =
            std::array::from_fn(|a| ((hi[a] - lo[a]) / self.segment - 1e-9).ceil().max(1.0) as usize);
        let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
        let mut vertex = |b: &mut Self, l: [usize; 3]| -> usize {
            *ids.entry(l).or_insert_with(|| {
                let p: [f64; 3] = std::array::from_fn(|a| {
                    if l[a] == cells[a] {
                        hi[a]
                    } else {
                        lo[a] + (hi[a] - lo[a]) * l[a] as f64 / cells[a] as f64
                    }
                });
                b.vertices.push([p[0] + p[1] * b.shear, p[1], p[2]]);
                b.vertices.len() - 1
            })
        };
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [0, cells[axis]] {
                for i in 0..cells[u] {
                    for j in 0..cells[v] {
                        let corner = |di: usize, dj: usize| {
                            let mut l = [0usize; 3];
                            l[axis] = side;
                            l[u] = i + di;
                            l[v] = j + dj;
                            l
                        };
                        let c00 = vertex(self, corner(0, 0));
                        let c10 = vertex(self, corner(1, 0));
                        let c11 = vertex(self, corner(1, 1));
                        let c01 = vertex(self, corner(0, 1));
                        // e_u × e_v = e_axis, so this winding faces +axis
                        if side == 0 {
                            self.triangles.push([c00, c11, c10]);
                            self.triangles.push([c00, c01, c11]);
                        } else {
                            self.triangles.push([c00, c10, c11]);
                            self.triangles.push([c00, c11, c01]);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::edges_manifold;
    use approx::assert_relative_eq;

    #[test]
    fn default_bridge_is_about_five_hundred_faces() {
        let bridge = BridgeModel::<f64>::generate(&BridgeParams::default()).unwrap();
        // deck 21×4×1 cells: 2·(84 + 21 + 4)·2 = 436; piers 1×1×4: (2 + 16)·2 = 36 each
        assert_eq!(bridge.mesh.len(), 436 + 2 * 36);
        assert!(edges_manifold(&bridge.mesh));
    }

    #[test]
    fn deck_fascia_cell_area() {
        let bridge = BridgeModel::<f64>::generate(&BridgeParams::default()).unwrap();
        // fascia faces lie on y = ±w/2 with normal ±y and are 1 m × 0.5 m cells
        let fascia: Vec<_> = bridge
            .mesh
            .faces()
            .iter()
            .filter(|f| (f.centroid.y.abs() - 2.0).abs() < 1e-9 && f.normal.y.abs() > 0.99)
            .collect();
        assert_eq!(fascia.len(), 2 * 21 * 2);
        for f in fascia {
            assert_relative_eq!(f.area, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn shear_scales_only_end_faces() {
        let straight = BridgeParams {
            skew_deg: 0.0,
            ..BridgeParams::default()
        };
        let a = BridgeModel::<f64>::generate(&straight).unwrap().mesh.total_area();
        let b = BridgeModel::<f64>::generate(&BridgeParams::default())
            .unwrap()
            .mesh
            .total_area();
        // deck 2·(21·4 + 21·0.5 + 4·0.5) + piers 2·(2·0.36 + 4·0.6·4)
        assert_relative_eq!(a, 193.0 + 2.0 * (0.72 + 9.6), epsilon = 1e-9);
        // x-normal faces: deck ends 2·4·0.5, pier faces 2·2·(0.6·4)
        let x_faces = 4.0 + 9.6;
        let sec = 1.0 / 15f64.to_radians().cos();
        assert_relative_eq!(b - a, x_faces * (sec - 1.0), epsilon = 1e-9);
    }

    #[test]
    fn outward_normals_on_deck() {
        let bridge = BridgeModel::<f64>::generate(&BridgeParams::default()).unwrap();
        let top = bridge.deck_top();
        for f in bridge.mesh.faces() {
            if (f.centroid.z - top).abs() < 1e-9 {
                assert!(f.normal.z > 0.99);
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = BridgeParams {
            spans: 0,
            ..BridgeParams::default()
        };
        assert!(BridgeModel::<f64>::generate(&bad).is_err());
        let bad = BridgeParams {
            deck_width: -1.0,
            ..BridgeParams::default()
        };
        assert!(BridgeModel::<f64>::generate(&bad).is_err());
    }
}
