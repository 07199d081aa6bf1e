//! Mesh files (JSON with canonical 17-significant-digit floats), face
//! function files, OBJ export and the `check` report.

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::discrete_ops::{moment_map, moment_map_r, spectral_gap, SpectralOptions};
use crate::error::{Error, Result};
use crate::lattice_grid::{IMat2, QuadGrid};
use crate::mesh_core::{FaceFunction, ImmersionSpec, Mesh};
use crate::pyramid_refine::{immersion_check, TriMesh};

/// Current file format version.
pub const FORMAT_VERSION: u32 = 1;

/// `{:.16e}`: 17 significant digits, enough to round-trip every `f64`.
pub fn canonical_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn ser_f64<S: Serializer>(x: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(serde::ser::Error::custom("non-finite float"));
    }
    RawValue::from_string(canonical_float(x))
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Row<'a>(&'a [f64]);
    impl Serialize for Row<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(self.0.len()))?;
            for &x in self.0 {
                seq.serialize_element(&F(x))?;
            }
            seq.end()
        }
    }
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for r in rows {
        seq.serialize_element(&Row(r))?;
    }
    seq.end()
}

fn ser_opt_rows<S: Serializer>(rows: &Option<Vec<Vec<f64>>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match rows {
        Some(r) => ser_rows(r, s),
        None => s.serialize_none(),
    }
}

fn ser_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&F(x))?;
    }
    seq.end()
}

struct F(f64);
impl Serialize for F {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_f64(self.0, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Quad,
    Tri,
    Face,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    /// Half the ambient dimension (`0` for face-function files).
    pub n: usize,
    #[serde(rename = "N")]
    pub resolution: usize,
    #[serde(rename = "L")]
    pub lattice: IMat2,
    pub kind: MeshKind,
}

/// Where a mesh came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immersion: Option<ImmersionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
}

/// On-disk representation of a quad or tri mesh. Vertices are listed in
/// canonical coset order (the grid's vertex indices), apexes in face order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub header: Header,
    #[serde(serialize_with = "ser_rows")]
    pub vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_rows")]
    pub apexes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn rows_of(data: &[f64], width: usize) -> Vec<Vec<f64>> {
    data.chunks(width).map(|c| c.to_vec()).collect()
}

fn flatten(rows: &[Vec<f64>], width: usize, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Format(format!(
                "{what} {i} has {} coordinates, expected {width}",
                r.len()
            )));
        }
        if let Some(bad) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!("{what} {i} coordinate {bad} is not finite")));
        }
        out.extend_from_slice(r);
    }
    Ok(out)
}

impl MeshFile {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let g = mesh.grid();
        MeshFile {
            header: Header {
                format_version: FORMAT_VERSION,
                n: mesh.n(),
                resolution: g.resolution(),
                lattice: g.deck(),
                kind: MeshKind::Quad,
            },
            vertices: rows_of(mesh.as_slice(), mesh.dim()),
            apexes: None,
            provenance: None,
        }
    }

    pub fn from_trimesh(tm: &TriMesh) -> Self {
        let mut file = MeshFile::from_mesh(&tm.base);
        file.header.kind = MeshKind::Tri;
        file.apexes = Some(rows_of(tm.apexes(), tm.base.dim()));
        file
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Checks version, kind and array shapes.
    pub fn validate(&self) -> Result<Arc<QuadGrid>> {
        let h = &self.header;
        if h.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: h.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if h.n == 0 || h.kind == MeshKind::Face {
            return Err(Error::Format("header does not describe a mesh".into()));
        }
        let grid = Arc::new(QuadGrid::new(h.lattice, h.resolution).map_err(|e| Error::Format(format!("header: {e}")))?);
        if self.vertices.len() != grid.num_vertices() {
            return Err(Error::Format(format!(
                "{} vertices listed, the lattice has {}",
                self.vertices.len(),
                grid.num_vertices()
            )));
        }
        flatten(&self.vertices, 2 * h.n, "vertex")?;
        match (&self.apexes, h.kind) {
            (None, MeshKind::Quad) => {}
            (Some(a), MeshKind::Tri) => {
                if a.len() != grid.num_faces() {
                    return Err(Error::Format(format!(
                        "{} apexes listed, the lattice has {} faces",
                        a.len(),
                        grid.num_faces()
                    )));
                }
                flatten(a, 2 * h.n, "apex")?;
            }
            (Some(_), _) => return Err(Error::Format("apexes present in a quad mesh".into())),
            (None, _) => return Err(Error::Format("tri mesh without apexes".into())),
        }
        Ok(grid)
    }

    /// The base quad mesh.
    pub fn to_mesh(&self) -> Result<Mesh> {
        let grid = self.validate()?;
        Mesh::new(
            grid,
            self.header.n,
            flatten(&self.vertices, 2 * self.header.n, "vertex")?,
        )
    }

    /// The tri mesh (`kind = tri` only).
    pub fn to_trimesh(&self) -> Result<TriMesh> {
        let base = self.to_mesh()?;
        let apexes = self
            .apexes
            .as_ref()
            .ok_or_else(|| Error::Format("not a tri mesh".into()))?;
        TriMesh::new(base, flatten(apexes, 2 * self.header.n, "apex")?)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(contents)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn save_mesh(path: &Path, file: &MeshFile) -> Result<()> {
    file.validate()?;
    let mut text = file.to_json()?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_mesh(path: &Path) -> Result<MeshFile> {
    let text = std::fs::read_to_string(path)?;
    MeshFile::from_json(&text)
}

/// On-disk face function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceFile {
    pub header: Header,
    #[serde(serialize_with = "ser_vec")]
    pub values: Vec<f64>,
}

impl FaceFile {
    pub fn from_face_function(phi: &FaceFunction) -> Self {
        let g = phi.grid();
        FaceFile {
            header: Header {
                format_version: FORMAT_VERSION,
                n: 0,
                resolution: g.resolution(),
                lattice: g.deck(),
                kind: MeshKind::Face,
            },
            values: phi.values().to_vec(),
        }
    }

    pub fn to_face_function(&self) -> Result<FaceFunction> {
        let h = &self.header;
        if h.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: h.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if h.kind != MeshKind::Face {
            return Err(Error::Format("header does not describe a face function".into()));
        }
        let grid = Arc::new(QuadGrid::new(h.lattice, h.resolution).map_err(|e| Error::Format(format!("header: {e}")))?);
        if self.values.len() != grid.num_faces() {
            return Err(Error::Format(format!(
                "{} values listed, the lattice has {} faces",
                self.values.len(),
                grid.num_faces()
            )));
        }
        if let Some(i) = self.values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!("value {i} is not finite")));
        }
        FaceFunction::new(grid, self.values.clone())
    }
}

pub fn save_face_function(path: &Path, phi: &FaceFunction) -> Result<()> {
    let mut text =
        serde_json::to_string(&FaceFile::from_face_function(phi)).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_face_function(path: &Path) -> Result<FaceFunction> {
    let file: FaceFile =
        serde_json::from_reader(BufReader::new(File::open(path)?)).map_err(|e| Error::Format(e.to_string()))?;
    file.to_face_function()
}

/// How `R²ⁿ` points are mapped to `R³` for export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Drop coordinate `drop` and keep the first three remaining ones.
    Drop { drop: usize },
    /// `p ↦ p/‖p‖ ∈ S³ ↦` stereographic projection from `(0, 0, 0, 1)` (`n = 2`).
    RadialStereo,
}

/// Guard distance to the projection pole.
pub const POLE_GUARD: f64 = 1e-6;

/// Stereographic projection of a unit vector of `R⁴` from `(0, 0, 0, 1)`.
pub fn stereographic(q: [f64; 4]) -> [f64; 3] {
    let d = 1.0 - q[3];
    [q[0] / d, q[1] / d, q[2] / d]
}

/// Radial then stereographic projection; returns the image and whether the
/// pole guard fired.
pub fn radial_stereo(p: &[f64]) -> Option<([f64; 3], bool)> {
    let n = crate::mesh_core::norm(p);
    if n == 0.0 {
        return None;
    }
    let mut q = [p[0] / n, p[1] / n, p[2] / n, p[3] / n];
    let near_pole = (q[0].powi(2) + q[1].powi(2) + q[2].powi(2) + (q[3] - 1.0).powi(2)).sqrt() < POLE_GUARD;
    if near_pole {
        q[0] += POLE_GUARD;
        let m = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        q.iter_mut().for_each(|x| *x /= m);
    }
    Some((stereographic(q), near_pole))
}

/// Counts reported by [`export_obj`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExportSummary {
    pub vertices: usize,
    pub faces: usize,
    pub pole_warnings: usize,
}

fn project_all(points: &[f64], dim: usize, proj: Projection) -> Result<(Vec<[f64; 3]>, usize)> {
    let mut out = Vec::with_capacity(points.len() / dim);
    let mut warnings = 0;
    for (i, p) in points.chunks(dim).enumerate() {
        match proj {
            Projection::Drop { drop } => {
                if drop >= dim || dim < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "cannot drop coordinate {drop} of {dim}"
                    )));
                }
                let kept: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| *c != drop)
                    .map(|(_, x)| *x)
                    .collect();
                out.push([kept[0], kept[1], kept[2]]);
            }
            Projection::RadialStereo => {
                if dim != 4 {
                    return Err(Error::InvalidArgument("radial stereographic export needs n = 2".into()));
                }
                let (img, guarded) = radial_stereo(p).ok_or(Error::ProjectionOrigin(i))?;
                warnings += guarded as usize;
                out.push(img);
            }
        }
    }
    if warnings > 0 {
        log::warn!("{warnings} vertices were moved away from the projection pole");
    }
    Ok((out, warnings))
}

/// Writes an OBJ file. Quad meshes are written as native quads or split
/// into two triangles along `Dᵘ`; tri meshes as four triangles per face,
/// apexes numbered after the base vertices.
pub fn export_obj(
    path: &Path,
    base: &Mesh,
    apexes: Option<&[f64]>,
    proj: Projection,
    native_quads: bool,
) -> Result<ExportSummary> {
    let grid = base.grid();
    let dim = base.dim();
    let mut points = base.as_slice().to_vec();
    if let Some(a) = apexes {
        if a.len() != grid.num_faces() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.num_faces() * dim,
                got: a.len(),
            });
        }
        points.extend_from_slice(a);
    }
    let (coords, pole_warnings) = project_all(&points, dim, proj)?;
    let mut text = String::new();
    for c in &coords {
        text.push_str(&format!("v {} {} {}\n", c[0], c[1], c[2]));
    }
    let nv = grid.num_vertices();
    let mut faces = 0;
    for f in 0..grid.num_faces() {
        let [a, b, c, d] = grid.face_vertices(f).map(|v| v + 1);
        if apexes.is_some() {
            let p = nv + f + 1;
            for (x, y) in [(a, b), (b, c), (c, d), (d, a)] {
                text.push_str(&format!("f {p} {x} {y}\n"));
                faces += 1;
            }
        } else if native_quads {
            text.push_str(&format!("f {a} {b} {c} {d}\n"));
            faces += 1;
        } else {
            text.push_str(&format!("f {a} {b} {c}\nf {a} {c} {d}\n"));
            faces += 2;
        }
    }
    write_atomic(path, text.as_bytes())?;
    Ok(ExportSummary {
        vertices: coords.len(),
        faces,
        pole_warnings,
    })
}

/// Diagnostics of a mesh file, as printed by `isomesh check`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub kind: MeshKind,
    pub max_density: f64,
    /// `Σ_f μ_N(f)`, zero by Stokes.
    pub stokes_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_triangle_residual: Option<f64>,
    /// Offending triangulation vertices (tri meshes only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub immersion_failures: Option<Vec<usize>>,
}

/// Computes the `check` diagnostics of a loaded file.
pub fn check_report(file: &MeshFile, with_gap: bool) -> Result<CheckReport> {
    let mesh = file.to_mesh()?;
    let gap = if with_gap {
        Some(spectral_gap(
            &mesh,
            &[FaceFunction::ones(mesh.grid().clone())],
            SpectralOptions::default(),
        )?)
    } else {
        None
    };
    let (residual, failures) = if file.header.kind == MeshKind::Tri {
        let tm = file.to_trimesh()?;
        (Some(tm.max_residual()), Some(immersion_check(&tm)))
    } else {
        (None, None)
    };
    Ok(CheckReport {
        kind: file.header.kind,
        max_density: moment_map_r(&mesh).max_abs(),
        stokes_sum: moment_map(&mesh).sum(),
        spectral_gap: gap,
        max_triangle_residual: residual,
        immersion_failures: failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_core::{sample_immersion, Immersion};
    use crate::pyramid_refine::{refine, DEFAULT_TOL};
    use crate::test_util::{random_mesh, rng};
    use rand::Rng;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn canonical_floats_round_trip() {
        let mut r = rng(41);
        for _ in 0..10_000 {
            let x = f64::from_bits(r.random::<u64>());
            if x.is_finite() {
                assert_eq!(canonical_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
            }
        }
        for x in [0.0, -0.0, 1.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, 0.1] {
            let text = serde_json::to_string(&F(x)).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn mesh_round_trip_is_bitwise() {
        let d = dir();
        let g = Arc::new(QuadGrid::new([[6, -2], [2, 6]], 4).unwrap());
        let m = random_mesh(&g, 3, &mut rng(42));
        let path = d.path().join("m.json");
        save_mesh(&path, &MeshFile::from_mesh(&m)).unwrap();
        let back = load_mesh(&path).unwrap().to_mesh().unwrap();
        assert!(back.grid().same_as(m.grid()));
        assert!(back
            .as_slice()
            .iter()
            .zip(m.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        // Deterministic bytes.
        let again = d.path().join("m2.json");
        save_mesh(&again, &load_mesh(&path).unwrap()).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn trimesh_round_trip() {
        let imm = Immersion::product_of_circles(1.0, 0.6);
        let tau = sample_immersion(&imm, &Arc::new(imm.grid(4).unwrap())).unwrap();
        let tm = refine(&tau, DEFAULT_TOL).unwrap();
        let d = dir();
        let path = d.path().join("t.json");
        let file = MeshFile::from_trimesh(&tm).with_provenance(Provenance {
            immersion: Some(imm.to_spec()),
            config: None,
            run_id: Some("r1".into()),
        });
        save_mesh(&path, &file).unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(loaded, file);
        assert_eq!(loaded.to_trimesh().unwrap().apexes(), tm.apexes());
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let g = Arc::new(QuadGrid::square(2).unwrap());
        let m = random_mesh(&g, 2, &mut rng(43));
        let text = MeshFile::from_mesh(&m).to_json().unwrap();
        assert!(matches!(
            MeshFile::from_json(&text.replacen("header", "heder", 1)),
            Err(Error::Format(_))
        ));
        let mut file = MeshFile::from_mesh(&m);
        file.vertices[1].pop();
        match MeshFile::from_json(&file.to_json().unwrap()) {
            Err(Error::Format(msg)) => assert!(msg.contains("vertex 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let mut file = MeshFile::from_mesh(&m);
        file.header.format_version = 7;
        assert!(matches!(
            MeshFile::from_json(&file.to_json().unwrap()),
            Err(Error::VersionMismatch { found: 7, .. })
        ));
        let mut file = MeshFile::from_mesh(&m);
        file.vertices.pop();
        assert!(matches!(
            MeshFile::from_json(&file.to_json().unwrap()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn face_function_round_trip() {
        let g = Arc::new(QuadGrid::square(4).unwrap());
        let phi = crate::test_util::random_face_function(&g, &mut rng(44));
        let d = dir();
        let p = d.path().join("phi.json");
        save_face_function(&p, &phi).unwrap();
        assert_eq!(load_face_function(&p).unwrap().values(), phi.values());
    }

    #[test]
    fn stereographic_closed_form() {
        let mut r = rng(45);
        for _ in 0..100 {
            let p: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
            let n = crate::mesh_core::norm(&p);
            let (img, guarded) = radial_stereo(&p).unwrap();
            assert!(!guarded);
            let w = p[3] / n;
            for i in 0..3 {
                assert!((img[i] - p[i] / n / (1.0 - w)).abs() <= 1e-12 * (1.0 + img[i].abs()));
            }
        }
        let (img, guarded) = radial_stereo(&[0.0, 0.0, 0.0, 3.0]).unwrap();
        assert!(guarded && img.iter().all(|x| x.is_finite()));
        assert!(radial_stereo(&[0.0; 4]).is_none());
    }

    #[test]
    fn obj_counts_and_origin_error() {
        let imm = Immersion::product_of_circles(1.0, 0.6);
        let tau = sample_immersion(&imm, &Arc::new(imm.grid(4).unwrap())).unwrap();
        let d = dir();
        let p = d.path().join("m.obj");
        let s = export_obj(&p, &tau, None, Projection::RadialStereo, false).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 16);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 32);
        assert_eq!((s.vertices, s.faces), (16, 32));
        let tm = refine(&tau, DEFAULT_TOL).unwrap();
        let s = export_obj(&p, &tau, Some(tm.apexes()), Projection::Drop { drop: 3 }, false).unwrap();
        assert_eq!((s.vertices, s.faces), (32, 64));
        let mut zeroed = tau.clone();
        zeroed.point_mut(5).iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(
            export_obj(&p, &zeroed, None, Projection::RadialStereo, true),
            Err(Error::ProjectionOrigin(5))
        ));
    }

    #[test]
    fn check_matches_in_process_values() {
        let imm = Immersion::product_of_circles(1.0, 0.6);
        let tau = sample_immersion(&imm, &Arc::new(imm.grid(8).unwrap())).unwrap();
        let d = dir();
        let p = d.path().join("m.json");
        save_mesh(&p, &MeshFile::from_mesh(&tau)).unwrap();
        let rep = check_report(&load_mesh(&p).unwrap(), false).unwrap();
        assert!((rep.max_density - moment_map_r(&tau).max_abs()).abs() <= 1e-14);
        assert!(rep.stokes_sum.abs() <= 1e-10);
    }
}
