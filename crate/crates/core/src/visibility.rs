//! Viewpoint × face visibility: distance, inclination and occlusion tests,
//! precomputed into a packed bit matrix that can be cached on disk.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Fingerprint;
use crate::geometry::Point3;
use crate::mesh::TriMesh;
use crate::scalar::Real;
use crate::viewpoint::ViewpointGraph;

const MAGIC: &[u8; 8] = b"VISMAT\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VisibilityError {
    #[error("invalid visibility parameters: {0}")]
    InvalidParams(String),
    #[error("visibility cache format error: {0}")]
    Format(String),
    #[error("stale visibility cache: {0} changed since it was written")]
    Stale(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams<T> {
    /// Maximum viewpoint-to-centroid distance (m).
    pub vis_dist: T,
    /// Maximum angle between the sight line and the face normal line (deg).
    pub vis_angle_deg: T,
    pub occlusion: bool,
}

impl<T: Real> VisibilityParams<T> {
    pub fn new(vis_dist: T, vis_angle_deg: T) -> Self {
        Self {
            vis_dist,
            vis_angle_deg,
            occlusion: true,
        }
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        if !(self.vis_dist > T::zero()) {
            return Err(VisibilityError::InvalidParams("vis_dist must be positive".into()));
        }
        if !(self.vis_angle_deg > T::zero() && self.vis_angle_deg <= T::lit(90.0)) {
            return Err(VisibilityError::InvalidParams(
                "vis_angle must lie in (0, 90] degrees".into(),
            ));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new("visibility-params/v1");
        h.write_f64(self.vis_dist.as_f64());
        h.write_f64(self.vis_angle_deg.as_f64());
        h.write_u64(self.occlusion as u64);
        h.finish()
    }
}

/// The inspected mesh plus any extra meshes that may block sight lines.
#[derive(Debug, Clone, Copy)]
pub struct Occluders<'a, T> {
    pub target: &'a TriMesh<T>,
    pub extra: &'a [TriMesh<T>],
}

impl<'a, T: Real> Occluders<'a, T> {
    pub fn target_only(target: &'a TriMesh<T>) -> Self {
        Self { target, extra: &[] }
    }

    /// Fingerprint over every mesh that influences the matrix.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new("occluders/v1");
        h.write_u64(self.target.fingerprint());
        h.write_u64(self.extra.len() as u64);
        for m in self.extra {
            h.write_u64(m.fingerprint());
        }
        h.finish()
    }

    fn blocked(&self, vp: Point3<T>, face: usize) -> bool {
        let c = self.target.face(face).centroid;
        self.target.segment_occluded(vp, c, Some(face))
            || self.extra.iter().any(|m| m.segment_occluded(vp, c, None))
    }
}

/// Distance and inclination tests only.
#[inline]
fn within_cone<T: Real>(vp: Point3<T>, centroid: Point3<T>, normal: Point3<T>, params: &VisibilityParams<T>, cos_limit: T) -> bool {
    let d = centroid - vp;
    let dist = d.norm();
    if dist > params.vis_dist {
        return false;
    }
    let along = d.dot(normal).abs();
    // sight line lying in the face plane
    if along <= T::epsilon() * T::lit(64.0) * dist.max(T::one()) {
        return false;
    }
    // unsigned angle to the normal line ≤ vis_angle ⇔ |cos| ≥ cos(vis_angle)
    along >= (cos_limit - T::epsilon() * T::lit(8.0)) * dist
}

fn cos_limit<T: Real>(params: &VisibilityParams<T>) -> T {
    params.vis_angle_deg.to_radians().cos()
}

/// Whether face `face` of the target mesh is visible from `vp`.
pub fn face_visible<T: Real>(
    vp: Point3<T>,
    face: usize,
    occluders: &Occluders<'_, T>,
    params: &VisibilityParams<T>,
) -> bool {
    let f = occluders.target.face(face);
    within_cone(vp, f.centroid, f.normal, params, cos_limit(params))
        && !(params.occlusion && occluders.blocked(vp, face))
}

/// Identifies the inputs a matrix was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub params_hash: u64,
    pub mesh_hash: u64,
    pub graph_hash: u64,
}

impl CacheKey {
    pub fn of<T: Real>(
        graph: &ViewpointGraph<T>,
        occluders: &Occluders<'_, T>,
        params: &VisibilityParams<T>,
    ) -> Self {
        Self {
            params_hash: params.fingerprint(),
            mesh_hash: occluders.fingerprint(),
            graph_hash: graph.fingerprint(),
        }
    }
}

/// Packed `|VP| × |F|` bit matrix, row-major by viewpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMatrix {
    viewpoints: usize,
    faces: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    key: CacheKey,
}

/// Evaluates [`face_visible`] for every viewpoint and face. Rows are
/// computed in parallel; the result does not depend on the schedule.
pub fn compute_visibility<T: Real>(
    graph: &ViewpointGraph<T>,
    occluders: &Occluders<'_, T>,
    params: &VisibilityParams<T>,
) -> Result<VisibilityMatrix, VisibilityError> {
    params.validate()?;
    let faces = occluders.target.len();
    let words_per_row = faces.div_ceil(64);
    let cos_lim = cos_limit(params);
    let mesh = occluders.target;
    let rows: Vec<Vec<u64>> = (0..graph.len())
        .into_par_iter()
        .map(|i| {
            let vp = graph.point(i);
            let mut row = vec![0u64; words_per_row];
            for (j, f) in mesh.faces().iter().enumerate() {
                if within_cone(vp, f.centroid, f.normal, params, cos_lim)
                    && !(params.occlusion && occluders.blocked(vp, j))
                {
                    row[j / 64] |= 1u64 << (j % 64);
                }
            }
            row
        })
        .collect();
    Ok(VisibilityMatrix {
        viewpoints: graph.len(),
        faces,
        words_per_row,
        bits: rows.concat(),
        key: CacheKey::of(graph, occluders, params),
    })
}

impl VisibilityMatrix {
    /// Builds a matrix from explicit rows (`rows[i][j]` = face `j` visible
    /// from viewpoint `i`).
    pub fn from_rows(rows: &[Vec<bool>], key: CacheKey) -> Self {
        let faces = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == faces), "ragged rows");
        let words_per_row = faces.div_ceil(64);
        let mut bits = vec![0u64; rows.len() * words_per_row];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v {
                    bits[i * words_per_row + j / 64] |= 1u64 << (j % 64);
                }
            }
        }
        Self {
            viewpoints: rows.len(),
            faces,
            words_per_row,
            bits,
            key,
        }
    }

    pub fn viewpoints(&self) -> usize {
        self.viewpoints
    }

    pub fn faces(&self) -> usize {
        self.faces
    }

    pub fn key(&self) -> CacheKey {
        self.key
    }

    #[inline]
    pub fn get(&self, viewpoint: usize, face: usize) -> bool {
        self.row(viewpoint)[face / 64] >> (face % 64) & 1 == 1
    }

    #[inline]
    pub fn row(&self, viewpoint: usize) -> &[u64] {
        let s = viewpoint * self.words_per_row;
        &self.bits[s..s + self.words_per_row]
    }

    /// Faces visible from `viewpoint`, ascending.
    pub fn visible_faces(&self, viewpoint: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(viewpoint).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Per face: visible from at least one viewpoint of the graph.
    pub fn visible_from_any(&self) -> Vec<bool> {
        let mut acc = vec![0u64; self.words_per_row];
        for i in 0..self.viewpoints {
            for (a, w) in acc.iter_mut().zip(self.row(i)) {
                *a |= w;
            }
        }
        (0..self.faces).map(|j| acc[j / 64] >> (j % 64) & 1 == 1).collect()
    }

    /// Serializes the matrix: fixed header (magic, version, |VP|, |F|,
    /// three input hashes), the packed rows as little-endian words, and a
    /// payload checksum.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), VisibilityError> {
        let mut header = Vec::with_capacity(56);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&0u32.to_le_bytes());
        for v in [
            self.viewpoints as u64,
            self.faces as u64,
            self.key.params_hash,
            self.key.mesh_hash,
            self.key.graph_hash,
        ] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&header)?;
        let mut payload = Vec::with_capacity(self.bits.len() * 8);
        for w in &self.bits {
            payload.extend_from_slice(&w.to_le_bytes());
        }
        sink.write_all(&payload)?;
        sink.write_all(&checksum(&header, &payload).to_le_bytes())?;
        sink.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`Self::save`], without checking it
    /// against current inputs.
    pub fn load<R: Read>(mut source: R) -> Result<Self, VisibilityError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        let fmt = |m: &str| VisibilityError::Format(m.to_string());
        if bytes.len() < 56 + 8 {
            return Err(fmt("file too short for header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(fmt("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(VisibilityError::Format(format!("unsupported version {version}")));
        }
        let viewpoints = usize::try_from(u64_at(16)).map_err(|_| fmt("viewpoint count overflow"))?;
        let faces = usize::try_from(u64_at(24)).map_err(|_| fmt("face count overflow"))?;
        let key = CacheKey {
            params_hash: u64_at(32),
            mesh_hash: u64_at(40),
            graph_hash: u64_at(48),
        };
        let words_per_row = faces.div_ceil(64);
        let words = viewpoints
            .checked_mul(words_per_row)
            .ok_or_else(|| fmt("matrix size overflow"))?;
        let expected_len = words
            .checked_mul(8)
            .and_then(|n| n.checked_add(56 + 8))
            .ok_or_else(|| fmt("matrix size overflow"))?;
        if bytes.len() != expected_len {
            return Err(VisibilityError::Format(format!(
                "expected {expected_len} bytes, found {}",
                bytes.len()
            )));
        }
        let (header, rest) = bytes.split_at(56);
        let (payload, tail) = rest.split_at(words * 8);
        if checksum(header, payload) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(fmt("checksum mismatch"));
        }
        let bits: Vec<u64> = payload
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        // padding bits past the last face must be clear
        if faces % 64 != 0 {
            let mask = !0u64 << (faces % 64);
            if (0..viewpoints).any(|i| bits[i * words_per_row + words_per_row - 1] & mask != 0) {
                return Err(fmt("padding bits set"));
            }
        }
        Ok(Self {
            viewpoints,
            faces,
            words_per_row,
            bits,
            key,
        })
    }

    /// Loads a cached matrix and rejects it unless it was computed from the
    /// inputs identified by `expected`.
    pub fn load_checked<R: Read>(source: R, expected: CacheKey) -> Result<Self, VisibilityError> {
        let m = Self::load(source)?;
        if m.key.params_hash != expected.params_hash {
            return Err(VisibilityError::Stale("visibility parameters"));
        }
        if m.key.mesh_hash != expected.mesh_hash {
            return Err(VisibilityError::Stale("mesh"));
        }
        if m.key.graph_hash != expected.graph_hash {
            return Err(VisibilityError::Stale("viewpoint graph"));
        }
        Ok(m)
    }
}

fn checksum(header: &[u8], payload: &[u8]) -> u64 {
    let mut h = Fingerprint::new("vismat-payload");
    h.write_bytes(header);
    h.write_bytes(payload);
    h.finish()
}
