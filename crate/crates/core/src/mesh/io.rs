//! Reading and writing triangle meshes (Wavefront OBJ, STL, ASCII PLY).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{LoadReport, MeshError, MeshRole, TriMesh};
use crate::geometry::{Point3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    Obj,
    /// STL, ASCII or binary (detected from content).
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "stl" => Some(Self::Stl),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Self::Obj),
            "stl" => Ok(Self::Stl),
            other => Err(format!("unknown mesh format `{other}` (expected obj or stl)")),
        }
    }
}

/// Parses a triangle mesh from `source`.
pub fn load_mesh<T: Real, R: Read>(
    mut source: R,
    format: MeshFormat,
    role: MeshRole,
) -> Result<(TriMesh<T>, LoadReport), MeshError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let (vertices, tris) = match format {
        MeshFormat::Obj => parse_obj(&bytes)?,
        MeshFormat::Stl => parse_stl(&bytes)?,
    };
    let report_faces = tris.len();
    let (mesh, report) = TriMesh::from_triangles(vertices, &tris, role)?;
    debug_assert_eq!(report.faces_read, report_faces);
    Ok((mesh, report))
}

pub fn load_mesh_file<T: Real>(
    path: &Path,
    role: MeshRole,
) -> Result<(TriMesh<T>, LoadReport), MeshError> {
    let format = MeshFormat::from_path(path).ok_or_else(|| {
        MeshError::Format(format!("cannot infer mesh format from {}", path.display()))
    })?;
    load_mesh(BufReader::new(File::open(path)?), format, role)
}

type Soup<T> = (Vec<Point3<T>>, Vec<[usize; 3]>);

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, MeshError> {
    tok.ok_or_else(|| MeshError::Format(format!("line {line}: missing coordinate")))?
        .parse::<f64>()
        .map_err(|e| MeshError::Format(format!("line {line}: {e}")))
}

fn parse_obj<T: Real>(bytes: &[u8]) -> Result<Soup<T>, MeshError> {
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    for (ln, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line?;
        let ln = ln + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), ln)?;
                let y = parse_f64(toks.next(), ln)?;
                let z = parse_f64(toks.next(), ln)?;
                vertices.push(Vec3::from_f64([x, y, z]));
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(MeshError::Format(format!(
                        "line {ln}: face has {} vertices; only triangles are supported",
                        refs.len()
                    )));
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let idx_str = r.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|e| MeshError::Format(format!("line {ln}: bad index `{r}`: {e}")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(MeshError::Format(format!("line {ln}: bad index `{r}`")));
                    }
                    *slot = resolved as usize;
                }
                tris.push(tri);
            }
            _ => {}
        }
    }
    Ok((vertices, tris))
}

/// Welds STL's per-facet vertex copies by exact coordinate match.
#[derive(Default)]
struct Welder {
    map: HashMap<[u64; 3], usize>,
    coords: Vec<[f64; 3]>,
}

impl Welder {
    fn index(&mut self, c: [f64; 3]) -> usize {
        let key = c.map(|v| if v == 0.0 { 0 } else { v.to_bits() });
        let next = self.coords.len();
        *self.map.entry(key).or_insert_with(|| {
            self.coords.push(c);
            next
        })
    }

    fn finish<T: Real>(self) -> Vec<Point3<T>> {
        self.coords.into_iter().map(Vec3::from_f64).collect()
    }
}

fn parse_stl<T: Real>(bytes: &[u8]) -> Result<Soup<T>, MeshError> {
    if is_binary_stl(bytes) {
        parse_stl_binary(bytes)
    } else {
        parse_stl_ascii(bytes)
    }
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    // ASCII files that happen to be 84 + 50n bytes long still start with "solid"
    // followed by a "facet" line.
    let size_matches = bytes.len() == 84 + 50 * n;
    let looks_ascii = bytes.starts_with(b"solid")
        && bytes[..bytes.len().min(512)]
            .windows(5)
            .any(|w| w == b"facet");
    size_matches && !looks_ascii
}

fn parse_stl_binary<T: Real>(bytes: &[u8]) -> Result<Soup<T>, MeshError> {
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let mut welder = Welder::default();
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let rec = &bytes[84 + 50 * i..84 + 50 * (i + 1)];
        let read = |k: usize| {
            let o = 12 + 4 * k;
            f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64
        };
        let mut tri = [0usize; 3];
        for (v, slot) in tri.iter_mut().enumerate() {
            *slot = welder.index([read(3 * v), read(3 * v + 1), read(3 * v + 2)]);
        }
        tris.push(tri);
    }
    Ok((welder.finish(), tris))
}

fn parse_stl_ascii<T: Real>(bytes: &[u8]) -> Result<Soup<T>, MeshError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| MeshError::Format("STL is neither valid binary nor ASCII".into()))?;
    if !text.trim_start().starts_with("solid") {
        return Err(MeshError::Format("ASCII STL must start with `solid`".into()));
    }
    let mut welder = Welder::default();
    let mut tris = Vec::new();
    let mut pending: Vec<usize> = Vec::with_capacity(3);
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("vertex") => {
                let x = parse_f64(toks.next(), ln)?;
                let y = parse_f64(toks.next(), ln)?;
                let z = parse_f64(toks.next(), ln)?;
                pending.push(welder.index([x, y, z]));
            }
            Some("endloop") => {
                if pending.len() != 3 {
                    return Err(MeshError::Format(format!(
                        "line {ln}: facet has {} vertices",
                        pending.len()
                    )));
                }
                tris.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            _ => {}
        }
    }
    if !pending.is_empty() {
        return Err(MeshError::Format("truncated facet at end of file".into()));
    }
    Ok((welder.finish(), tris))
}

/// Writes `mesh` as OBJ or ASCII STL.
pub fn write_mesh<T: Real, W: Write>(
    mesh: &TriMesh<T>,
    format: MeshFormat,
    sink: W,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(sink);
    match format {
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                let [x, y, z] = v.to_f64();
                writeln!(w, "v {x} {y} {z}")?;
            }
            for f in mesh.faces() {
                let [a, b, c] = f.vertex_indices;
                writeln!(w, "f {} {} {}", a + 1, b + 1, c + 1)?;
            }
        }
        MeshFormat::Stl => {
            writeln!(w, "solid mesh")?;
            for (i, f) in mesh.faces().iter().enumerate() {
                let [nx, ny, nz] = f.normal.to_f64();
                writeln!(w, "facet normal {nx} {ny} {nz}")?;
                writeln!(w, "  outer loop")?;
                for v in mesh.triangle(i) {
                    let [x, y, z] = v.to_f64();
                    writeln!(w, "    vertex {x} {y} {z}")?;
                }
                writeln!(w, "  endloop")?;
                writeln!(w, "endfacet")?;
            }
            writeln!(w, "endsolid mesh")?;
        }
    }
    w.flush()
}

/// Writes `mesh` as ASCII PLY with one integer property per face.
pub fn write_ply_with_face_scalar<T: Real, W: Write>(
    mesh: &TriMesh<T>,
    name: &str,
    values: &[u32],
    sink: W,
) -> std::io::Result<()> {
    assert_eq!(values.len(), mesh.len(), "one value per face");
    let mut w = BufWriter::new(sink);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "property int {name}")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        let [x, y, z] = v.to_f64();
        writeln!(w, "{x} {y} {z}")?;
    }
    for (f, v) in mesh.faces().iter().zip(values) {
        let [a, b, c] = f.vertex_indices;
        writeln!(w, "3 {a} {b} {c} {v}")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_cube;
    use approx::assert_relative_eq;

    #[test]
    fn obj_round_trip_preserves_geometry() {
        let cube = unit_cube::<f64>(Vec3::zero());
        let mut buf = Vec::new();
        write_mesh(&cube, MeshFormat::Obj, &mut buf).unwrap();
        let (back, report) =
            load_mesh::<f64, _>(&buf[..], MeshFormat::Obj, MeshRole::InspectionObject).unwrap();
        assert_eq!(report.degenerate_dropped, 0);
        assert_eq!(back.fingerprint(), cube.fingerprint());
    }

    #[test]
    fn ascii_stl_welds_vertices() {
        let cube = unit_cube::<f64>(Vec3::zero());
        let mut buf = Vec::new();
        write_mesh(&cube, MeshFormat::Stl, &mut buf).unwrap();
        let (back, _) =
            load_mesh::<f64, _>(&buf[..], MeshFormat::Stl, MeshRole::InspectionObject).unwrap();
        assert_eq!(back.vertices().len(), 8);
        assert_eq!(back.len(), 12);
        assert_relative_eq!(back.total_area(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn binary_stl_single_triangle() {
        let mut buf = vec![0u8; 80];
        buf.extend_from_slice(&1u32.to_le_bytes());
        let coords: [f32; 12] = [0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1., 0.];
        for c in coords {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&[0, 0]);
        let (m, _) =
            load_mesh::<f32, _>(&buf[..], MeshFormat::Stl, MeshRole::InspectionObject).unwrap();
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m.face(0).area, 0.5);
    }

    #[test]
    fn malformed_inputs_are_format_errors() {
        let quads = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(
            load_mesh::<f64, _>(&quads[..], MeshFormat::Obj, MeshRole::InspectionObject),
            Err(MeshError::Format(_))
        ));
        let garbage = b"v 0 zero 0\n";
        assert!(matches!(
            load_mesh::<f64, _>(&garbage[..], MeshFormat::Obj, MeshRole::InspectionObject),
            Err(MeshError::Format(_))
        ));
        let truncated = b"solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\n";
        assert!(matches!(
            load_mesh::<f64, _>(&truncated[..], MeshFormat::Stl, MeshRole::InspectionObject),
            Err(MeshError::Format(_))
        ));
        let empty = b"# nothing\n";
        assert!(matches!(
            load_mesh::<f64, _>(&empty[..], MeshFormat::Obj, MeshRole::InspectionObject),
            Err(MeshError::Empty)
        ));
    }

    #[test]
    fn ply_header_counts() {
        let cube = unit_cube::<f64>(Vec3::zero());
        let mut buf = Vec::new();
        write_ply_with_face_scalar(&cube, "visits", &[1; 12], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element face 12"));
        assert!(text.contains("property int visits"));
        assert_eq!(text.lines().count(), 10 + 8 + 12);
    }
}
