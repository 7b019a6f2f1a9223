//! Closed triangulated hull surfaces with cached integration data, plus a
//! strict line-oriented ASCII file format:
//!
//! ```text
//! nv nt
//! x y z          (nv vertex lines, meters, body frame)
//! i j k          (nt triangle lines, 0-based, CCW seen from outside)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::Vector3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh is not closed: {0}")]
    Open(String),
    #[error("mesh normals are not outward oriented (signed volume {volume:.3e} <= 0)")]
    Orientation { volume: f64 },
    #[error("triangle {index} is degenerate (area {area:.3e} m^2)")]
    Degenerate { index: usize, area: f64 },
    #[error("mesh parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("mesh io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-triangle integration cache: outward area vector and the three
/// edge-midpoint Gauss points, all in the body frame.
#[derive(Debug, Clone)]
pub struct Triangle {
    pub indices: [usize; 3],
    pub area_vector: Vector3,
    pub gauss_points: [Vector3; 3],
}

#[derive(Debug, Clone)]
pub struct HullMesh {
    vertices: Vec<Vector3>,
    triangles: Vec<Triangle>,
    volume: f64,
    centroid: Vector3,
}

const MIN_TRIANGLE_AREA: f64 = 1e-8;

impl HullMesh {
    /// Builds and validates a mesh: closed surface (every directed edge
    /// matched by its reverse exactly once), outward orientation, and no
    /// degenerate triangles.
    pub fn new(vertices: Vec<Vector3>, indices: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut edges: HashMap<(usize, usize), i64> = HashMap::new();
        let mut triangles = Vec::with_capacity(indices.len());
        let mut volume6 = 0.0;
        let mut centroid_weighted = Vector3::zeros();

        for (t, idx) in indices.iter().enumerate() {
            for &i in idx {
                if i >= nv {
                    return Err(MeshError::Parse {
                        line: 0,
                        reason: format!("triangle {t} references vertex {i} out of {nv}"),
                    });
                }
            }
            let [a, b, c] = *idx;
            if a == b || b == c || a == c {
                return Err(MeshError::Degenerate { index: t, area: 0.0 });
            }
            let (va, vb, vc) = (vertices[a], vertices[b], vertices[c]);
            let area_vector = 0.5 * (vb - va).cross(&(vc - va));
            let area = area_vector.norm();
            if area <= MIN_TRIANGLE_AREA {
                return Err(MeshError::Degenerate { index: t, area });
            }
            for (i, j) in [(a, b), (b, c), (c, a)] {
                *edges.entry((i.min(j), i.max(j))).or_insert(0) += if i < j { 1 } else { -1 };
            }
            let tet6 = va.dot(&vb.cross(&vc));
            volume6 += tet6;
            centroid_weighted += (va + vb + vc) / 4.0 * tet6;

            triangles.push(Triangle {
                indices: *idx,
                area_vector,
                gauss_points: [
                    (va + vb) * 0.5,
                    (vb + vc) * 0.5,
                    (vc + va) * 0.5,
                ],
            });
        }

        // closure: each undirected edge must be traversed once in each
        // direction, so the signed counts all cancel
        let mut edge_uses: HashMap<(usize, usize), usize> = HashMap::new();
        for idx in &indices {
            let [a, b, c] = *idx;
            for (i, j) in [(a, b), (b, c), (c, a)] {
                *edge_uses.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        for (edge, &signed) in &edges {
            let uses = edge_uses[edge];
            if uses != 2 || signed != 0 {
                return Err(MeshError::Open(format!(
                    "edge {:?} used {} time(s) with orientation imbalance {}",
                    edge, uses, signed
                )));
            }
        }

        let volume = volume6 / 6.0;
        if volume <= 0.0 {
            return Err(MeshError::Orientation { volume });
        }
        let centroid = centroid_weighted / volume6;
        Ok(Self {
            vertices,
            triangles,
            volume,
            centroid,
        })
    }

    pub fn vertices(&self) -> &[Vector3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Enclosed volume [m^3] from the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Volume centroid, body frame [m].
    pub fn volume_centroid(&self) -> Vector3 {
        self.centroid
    }

    /// Strict parse of the ASCII format; trailing garbage is rejected.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text.lines().enumerate();
        let (first_no, header) = lines
            .next()
            .ok_or_else(|| MeshError::Parse {
                line: 1,
                reason: "empty file".into(),
            })?;
        let mut it = header.split_whitespace();
        let nv: usize = parse_field(it.next(), first_no + 1, "vertex count")?;
        let nt: usize = parse_field(it.next(), first_no + 1, "triangle count")?;
        if it.next().is_some() {
            return Err(MeshError::Parse {
                line: first_no + 1,
                reason: "trailing tokens after header".into(),
            });
        }

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (no, line) = lines.next().ok_or_else(|| MeshError::Parse {
                line: first_no + 1,
                reason: format!("expected {nv} vertex lines"),
            })?;
            let mut it = line.split_whitespace();
            let x: f64 = parse_field(it.next(), no + 1, "x")?;
            let y: f64 = parse_field(it.next(), no + 1, "y")?;
            let z: f64 = parse_field(it.next(), no + 1, "z")?;
            if it.next().is_some() {
                return Err(MeshError::Parse {
                    line: no + 1,
                    reason: "trailing tokens on vertex line".into(),
                });
            }
            vertices.push(Vector3::new(x, y, z));
        }

        let mut indices = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (no, line) = lines.next().ok_or_else(|| MeshError::Parse {
                line: first_no + 1,
                reason: format!("expected {nt} triangle lines"),
            })?;
            let mut it = line.split_whitespace();
            let i: usize = parse_field(it.next(), no + 1, "i")?;
            let j: usize = parse_field(it.next(), no + 1, "j")?;
            let k: usize = parse_field(it.next(), no + 1, "k")?;
            if it.next().is_some() {
                return Err(MeshError::Parse {
                    line: no + 1,
                    reason: "trailing tokens on triangle line".into(),
                });
            }
            indices.push([i, j, k]);
        }

        if let Some((no, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(MeshError::Parse {
                line: no + 1,
                reason: format!("trailing garbage: {:?}", line.trim()),
            });
        }

        Self::new(vertices, indices)
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.9} {:.9} {:.9}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t.indices[0], t.indices[1], t.indices[2]);
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(
    token: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, MeshError> {
    let tok = token.ok_or_else(|| MeshError::Parse {
        line,
        reason: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        reason: format!("cannot parse {what} from {tok:?}"),
    })
}

/// Procedural analytic meshes for tests and demos.
pub mod generate {
    use super::HullMesh;
    use crate::Vector3;

    /// Icosphere of radius 1 centered at the body origin; `subdivisions`
    /// level n gives 20 * 4^n triangles.
    pub fn unit_sphere(subdivisions: usize) -> HullMesh {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector3> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];

        for _ in 0..subdivisions {
            let mut midpoint: std::collections::HashMap<(usize, usize), usize> =
                std::collections::HashMap::new();
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let v = ((vertices[a] + vertices[b]) * 0.5).normalize();
                    vertices.push(v);
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.push([a, ab, ca]);
                next.push([b, bc, ab]);
                next.push([c, ca, bc]);
                next.push([ab, bc, ca]);
            }
            faces = next;
        }

        HullMesh::new(vertices, faces).expect("icosphere is closed by construction")
    }

    /// Axis-aligned closed box centered at the origin with the given full
    /// extents.
    pub fn box_mesh(extents: Vector3) -> HullMesh {
        let h = extents * 0.5;
        let v = |sx: f64, sy: f64, sz: f64| Vector3::new(sx * h.x, sy * h.y, sz * h.z);
        let vertices = vec![
            v(-1.0, -1.0, -1.0),
            v(1.0, -1.0, -1.0),
            v(1.0, 1.0, -1.0),
            v(-1.0, 1.0, -1.0),
            v(-1.0, -1.0, 1.0),
            v(1.0, -1.0, 1.0),
            v(1.0, 1.0, 1.0),
            v(-1.0, 1.0, 1.0),
        ];
        // CCW seen from outside; z here is the body axis (down)
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2], // -z face
            [4, 5, 6],
            [4, 6, 7], // +z face
            [0, 1, 5],
            [0, 5, 4], // -y face
            [2, 3, 7],
            [2, 7, 6], // +y face
            [1, 2, 6],
            [1, 6, 5], // +x face
            [3, 0, 4],
            [3, 4, 7], // -x face
        ];
        HullMesh::new(vertices, faces).expect("box is closed by construction")
    }

    /// Demo approximation of a generic submarine outer surface: an
    /// axisymmetric hull of revolution with the given length and beam plus
    /// a faired sail bump. Intended for wave-load demos, not validation.
    pub fn demo_submarine(length: f64, beam: f64, n_axial: usize, n_theta: usize) -> HullMesh {
        assert!(n_axial >= 8 && n_theta >= 8);
        let half = length * 0.5;
        let r_max = beam * 0.5;
        // smooth radius profile: elliptic nose, parallel middle, cubic tail
        let radius = |x: f64| -> f64 {
            let s = (x + half) / length; // 0 at tail, 1 at nose
            let profile = if s > 0.8 {
                let t = (s - 0.8) / 0.2;
                (1.0 - t * t).max(0.0).sqrt()
            } else if s < 0.35 {
                let t = s / 0.35;
                t.powf(0.7)
            } else {
                1.0
            };
            (r_max * profile).max(0.0)
        };
        // sail: local bump on top (negative body z) around 0.15 L fwd
        let sail = |x: f64, theta: f64| -> f64 {
            let s = (x - 0.15 * length * 0.5) / (0.12 * length);
            let axial = (1.0 - s * s).max(0.0);
            // top of the hull is theta = 0 (body z negative)
            let up = theta.cos().max(0.0).powi(4);
            0.35 * r_max * axial * up
        };

        let mut vertices = vec![Vector3::new(half, 0.0, 0.0)]; // nose apex
        for ix in 1..n_axial {
            let x = half - length * ix as f64 / n_axial as f64;
            let r = radius(x).max(1e-3);
            for it in 0..n_theta {
                let theta = 2.0 * std::f64::consts::PI * it as f64 / n_theta as f64;
                let rr = r + sail(x, theta);
                // theta = 0 points to +y (starboard); top of the hull is -z
                vertices.push(Vector3::new(x, rr * theta.sin(), -rr * theta.cos()));
            }
        }
        let tail_apex = vertices.len();
        vertices.push(Vector3::new(-half, 0.0, 0.0));

        let ring = |ix: usize, it: usize| 1 + (ix - 1) * n_theta + (it % n_theta);
        let mut faces = Vec::new();
        for it in 0..n_theta {
            faces.push([0, ring(1, it), ring(1, it + 1)]);
        }
        for ix in 1..(n_axial - 1) {
            for it in 0..n_theta {
                let a = ring(ix, it);
                let b = ring(ix, it + 1);
                let c = ring(ix + 1, it);
                let d = ring(ix + 1, it + 1);
                faces.push([a, c, b]);
                faces.push([b, c, d]);
            }
        }
        for it in 0..n_theta {
            faces.push([tail_apex, ring(n_axial - 1, it + 1), ring(n_axial - 1, it)]);
        }
        HullMesh::new(vertices, faces).expect("hull of revolution is closed")
    }
}
