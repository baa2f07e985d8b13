use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::VoxelGrid;
use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

/// Indexed triangle mesh in world units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    /// Set by constructors that guarantee a closed two-manifold surface.
    pub closed: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            triangles,
            closed: false,
        };
        mesh.validate_indices()?;
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn validate_indices(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::invalid(format!(
                    "triangle {t} references vertex out of range ({tri:?}, {n} vertices)"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Volume enclosed by the surface (divergence theorem); positive when
    /// triangles wind counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Every undirected edge is shared by exactly two triangles and every
    /// directed edge appears once (consistent orientation).
    pub fn is_edge_manifold(&self) -> bool {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                if a == b {
                    return false;
                }
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Undirected edge-use counts; a watertight mesh uses each edge twice.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        !edges.is_empty() && edges.values().all(|&n| n == 2)
    }

    pub fn has_degenerate_triangles(&self, eps: f64) -> bool {
        (0..self.triangles.len()).any(|t| self.triangle_area(t) <= eps)
    }

    /// Appends `other`, offsetting its indices. The result is closed iff both are.
    pub fn append(&mut self, other: &TriMesh) {
        let closed = (self.closed || self.is_empty()) && (other.closed || other.is_empty());
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        self.closed = closed && !self.is_empty();
    }

    pub fn merged<'a>(parts: impl IntoIterator<Item = &'a TriMesh>) -> TriMesh {
        let mut out = TriMesh::default();
        for p in parts {
            out.append(p);
        }
        out
    }

    pub fn bounding_box(&self) -> Option<(Point3, Point3)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        Some((lo, hi))
    }

    /// Draws `n` points uniformly by area.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Point3>> {
        let mut cdf = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.triangle_area(t);
            cdf.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::Degenerate("mesh has zero surface area".into()));
        }
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.gen::<f64>() * total;
            let t = cdf.partition_point(|&c| c < x).min(cdf.len() - 1);
            let [a, b, c] = self.triangle(t);
            let r1: f64 = rng.gen::<f64>().sqrt();
            let r2: f64 = rng.gen();
            let wa = 1.0 - r1;
            let wb = r1 * (1.0 - r2);
            let wc = r1 * r2;
            pts.push([
                wa * a[0] + wb * b[0] + wc * c[0],
                wa * a[1] + wb * b[1] + wc * c[1],
                wa * a[2] + wb * b[2] + wc * c[2],
            ]);
        }
        Ok(pts)
    }

    /// Boundary faces of the occupied cells, two triangles per exposed face,
    /// wound outward. Vertices on the cell lattice are shared.
    pub fn from_voxels(grid: &VoxelGrid) -> TriMesh {
        let frame = *grid.frame();
        let mut index: HashMap<[usize; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut vid = |c: [usize; 3], vertices: &mut Vec<Point3>| -> u32 {
            *index.entry(c).or_insert_with(|| {
                vertices.push(frame.to_world([c[0] as f64, c[1] as f64, c[2] as f64]));
                (vertices.len() - 1) as u32
            })
        };
        for idx in grid.iter_occupied() {
            for axis in 0..3 {
                for dir in [-1isize, 1] {
                    let mut n = [idx[0] as isize, idx[1] as isize, idx[2] as isize];
                    n[axis] += dir;
                    if grid.get_signed(n) {
                        continue;
                    }
                    let u = (axis + 1) % 3;
                    let v = (axis + 2) % 3;
                    let mut base = idx;
                    if dir > 0 {
                        base[axis] += 1;
                    }
                    let corner = |du: usize, dv: usize| {
                        let mut c = base;
                        c[u] += du;
                        c[v] += dv;
                        c
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    let ids: Vec<u32> = q.iter().map(|&c| vid(c, &mut vertices)).collect();
                    // (u, v, axis) is right-handed, so 0-1-2-3 faces +axis.
                    if dir > 0 {
                        triangles.push([ids[0], ids[1], ids[2]]);
                        triangles.push([ids[0], ids[2], ids[3]]);
                    } else {
                        triangles.push([ids[0], ids[2], ids[1]]);
                        triangles.push([ids[0], ids[3], ids[2]]);
                    }
                }
            }
        }
        TriMesh {
            vertices,
            triangles,
            closed: false,
        }
    }

    /// Axis-aligned box mesh, 12 triangles wound outward.
    pub fn cuboid(lo: Point3, hi: Point3) -> TriMesh {
        let v = |x: usize, y: usize, z: usize| {
            [
                if x == 0 { lo[0] } else { hi[0] },
                if y == 0 { lo[1] } else { hi[1] },
                if z == 0 { lo[2] } else { hi[2] },
            ]
        };
        let vertices = vec![
            v(0, 0, 0),
            v(1, 0, 0),
            v(1, 1, 0),
            v(0, 1, 0),
            v(0, 0, 1),
            v(1, 0, 1),
            v(1, 1, 1),
            v(0, 1, 1),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriMesh {
            vertices,
            triangles,
            closed: true,
        }
    }

    /// Icosphere by repeated midpoint subdivision.
    pub fn icosphere(center: Point3, radius: f64, subdivisions: usize) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Point3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut tris: Vec<[u32; 3]> = vec![
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
        let unit = |p: Point3| {
            let n = norm(p);
            [p[0] / n, p[1] / n, p[2] / n]
        };
        for v in verts.iter_mut() {
            *v = unit(*v);
        }
        for _ in 0..subdivisions {
            let mut mids: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(tris.len() * 4);
            let mut mid = |a: u32, b: u32, verts: &mut Vec<Point3>| -> u32 {
                *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let pa = verts[a as usize];
                    let pb = verts[b as usize];
                    verts.push(unit([
                        (pa[0] + pb[0]) * 0.5,
                        (pa[1] + pb[1]) * 0.5,
                        (pa[2] + pb[2]) * 0.5,
                    ]));
                    (verts.len() - 1) as u32
                })
            };
            for [a, b, c] in tris {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let vertices = verts
            .into_iter()
            .map(|p| {
                [
                    center[0] + radius * p[0],
                    center[1] + radius * p[1],
                    center[2] + radius * p[2],
                ]
            })
            .collect();
        TriMesh {
            vertices,
            triangles: tris,
            closed: true,
        }
    }

    /// Parses Wavefront OBJ; only `v` and triangular `f` records are accepted.
    pub fn read_obj<R: BufRead>(reader: R, source_name: &str) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: lineno + 1,
                message,
            };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut toks = trimmed.split_whitespace();
            match toks.next() {
                Some("v") => {
                    let coords: Vec<f64> = toks
                        .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                        .collect::<Result<_>>()?;
                    if coords.len() < 3 {
                        return Err(err("vertex needs 3 coordinates".into()));
                    }
                    vertices.push([coords[0], coords[1], coords[2]]);
                }
                Some("f") => {
                    let idx: Vec<u32> = toks
                        .map(|t| {
                            let head = t.split('/').next().unwrap_or(t);
                            let i: i64 = head
                                .parse()
                                .map_err(|e| err(format!("bad face index {t:?}: {e}")))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            if resolved < 0 {
                                return Err(err(format!("face index {i} out of range")));
                            }
                            Ok(resolved as u32)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(err(format!("only triangular faces are supported, got {} vertices", idx.len())));
                    }
                    triangles.push([idx[0], idx[1], idx[2]]);
                }
                Some(other) => {
                    return Err(err(format!("unsupported record {other:?}")));
                }
                None => {}
            }
        }
        TriMesh::new(vertices, triangles).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: e.to_string(),
        })
    }

    /// Parses OFF with triangular faces only.
    pub fn read_off<R: BufRead>(reader: R, source_name: &str) -> Result<TriMesh> {
        let mut tokens: Vec<(usize, String)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(|t| (lineno + 1, t.to_string())));
        }
        let mut it = tokens.into_iter();
        let err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        match it.next() {
            Some((_, h)) if h == "OFF" => {}
            Some((l, h)) => return Err(err(l, format!("expected OFF header, got {h:?}"))),
            None => return Err(err(0, "empty file".into())),
        }
        let mut next_num = |what: &str| -> Result<(usize, String)> {
            it.next().ok_or_else(|| err(0, format!("unexpected end of file reading {what}")))
        };
        let parse_usize = |(l, t): (usize, String)| -> Result<usize> {
            t.parse().map_err(|e| err(l, format!("bad integer {t:?}: {e}")))
        };
        let parse_f64 = |(l, t): (usize, String)| -> Result<f64> {
            t.parse().map_err(|e| err(l, format!("bad number {t:?}: {e}")))
        };
        let nv = parse_usize(next_num("vertex count")?)?;
        let nf = parse_usize(next_num("face count")?)?;
        let _ne = parse_usize(next_num("edge count")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let x = parse_f64(next_num("vertex")?)?;
            let y = parse_f64(next_num("vertex")?)?;
            let z = parse_f64(next_num("vertex")?)?;
            vertices.push([x, y, z]);
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let tok = next_num("face")?;
            let line = tok.0;
            let k = parse_usize(tok)?;
            if k != 3 {
                return Err(err(line, format!("only triangular faces are supported, got {k}")));
            }
            let a = parse_usize(next_num("face")?)? as u32;
            let b = parse_usize(next_num("face")?)? as u32;
            let c = parse_usize(next_num("face")?)? as u32;
            triangles.push([a, b, c]);
        }
        TriMesh::new(vertices, triangles).map_err(|e| err(0, e.to_string()))
    }

    /// Loads OBJ or OFF by file extension.
    pub fn load(path: &std::path::Path) -> Result<TriMesh> {
        let name = path.display().to_string();
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ext) if ext == "obj" => TriMesh::read_obj(reader, &name),
            Some(ext) if ext == "off" => TriMesh::read_off(reader, &name),
            _ => Err(Error::Format(format!("{name}: expected .obj or .off"))),
        }
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn save_obj(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_obj(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
