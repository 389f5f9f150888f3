use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inr::{MlpNetwork, ScalarVolume};

use super::tables::{CORNERS, EDGES, TRI_TABLE};
use super::ActiveCellSet;

/// Triangles with at most this area are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Validation(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 3]; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Undirected edges with the number of triangles using each.
    pub fn edge_use_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut counts = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_use_counts().values().all(|&c| c == 2)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_area(&self.triangle_points(t))).sum()
    }
}

fn triangle_area(p: &[[f64; 3]; 3]) -> f64 {
    let u = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
    let v = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
    let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchingCubesOutput {
    pub mesh: TriangleMesh,
    /// For each triangle, the index (into the cell set) of the cell that
    /// produced it.
    pub triangle_cells: Vec<u32>,
    /// Distinct corner points evaluated.
    pub corner_evals: u64,
}

/// Network values at the distinct lattice corners of a cell set.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerValues {
    keys: Vec<u64>,
    values: Vec<f64>,
}

impl CornerValues {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn get(&self, key: u64) -> f64 {
        self.values[self.keys.binary_search(&key).expect("corner of an active cell")]
    }
}

/// Evaluate the network once per distinct corner of `cells`, in key order.
pub fn evaluate_corners(net: &MlpNetwork, cells: &ActiveCellSet) -> Result<CornerValues> {
    const CHUNK: usize = 4096;
    if net.input_dim() != 3 {
        return Err(Error::InvalidArgument("marching cubes needs a 3-D network".into()));
    }
    let lattice = cells.lattice();
    let keys = cells.corner_keys();
    let chunks: Vec<Vec<f64>> = keys
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut pts = Vec::with_capacity(chunk.len() * 3);
            for &k in chunk {
                pts.extend(lattice.point(lattice.corner_index(k)));
            }
            let mut out = vec![0.0; chunk.len()];
            net.forward_batch(&pts, &mut out)
                .expect("lattice points have the network's dimension");
            out
        })
        .collect();
    Ok(CornerValues { keys, values: chunks.concat() })
}

/// Corner values looked up in a dense corner grid of the same lattice.
pub fn corner_values_from_grid(grid: &ScalarVolume, cells: &ActiveCellSet) -> Result<CornerValues> {
    let n = cells.lattice().cells_per_axis() as usize + 1;
    if grid.dims() != [n, n, n] {
        return Err(Error::DimensionMismatch {
            context: "corner grid size",
            expected: n,
            actual: grid.dims()[0],
        });
    }
    let keys = cells.corner_keys();
    let values = keys
        .iter()
        .map(|&k| {
            let [i, j, l] = cells.lattice().corner_index(k);
            grid.get(i as usize, j as usize, l as usize)
        })
        .collect();
    Ok(CornerValues { keys, values })
}

/// Marching cubes over the given cells. Corner `<= iso` counts as inside.
pub fn marching_cubes(net: &MlpNetwork, cells: &ActiveCellSet, iso: f64) -> Result<MarchingCubesOutput> {
    let corners = evaluate_corners(net, cells)?;
    triangulate(cells, &corners, iso)
}

/// The table-driven triangulation step of [`marching_cubes`].
pub fn triangulate(cells: &ActiveCellSet, corners: &CornerValues, iso: f64) -> Result<MarchingCubesOutput> {
    let lattice = cells.lattice();
    let value_at = |idx: [u32; 3]| corners.get(lattice.corner_key(idx));

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut vertex_ids: HashMap<[u64; 3], u32> = HashMap::new();
    let mut triangles = Vec::new();
    let mut triangle_cells = Vec::new();

    for (ci, &cell) in cells.cells().iter().enumerate() {
        let corner_idx = CORNERS.map(|o| [cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]]);
        let v = corner_idx.map(value_at);
        let mut case = 0usize;
        for (bit, &val) in v.iter().enumerate() {
            if val <= iso {
                case |= 1 << bit;
            }
        }
        let row = &TRI_TABLE[case];
        if row[0] < 0 {
            continue;
        }
        let mut edge_vertex = [u32::MAX; 12];
        for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
            let mut ids = [0u32; 3];
            for (slot, &e) in tri.iter().enumerate() {
                let e = e as usize;
                if edge_vertex[e] == u32::MAX {
                    let [a, b] = EDGES[e];
                    // Interpolate from the lower lattice end so that a shared
                    // edge gives the same bits from every cell.
                    let (a, b) = if lattice.corner_key(corner_idx[a]) < lattice.corner_key(corner_idx[b]) {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    let p = lattice.point(corner_idx[a]);
                    let q = lattice.point(corner_idx[b]);
                    let s = (iso - v[a]) / (v[b] - v[a]);
                    let point = [0, 1, 2].map(|d| p[d] + s * (q[d] - p[d]) + 0.0);
                    let key = point.map(f64::to_bits);
                    let id = *vertex_ids.entry(key).or_insert_with(|| {
                        vertices.push(point);
                        (vertices.len() - 1) as u32
                    });
                    edge_vertex[e] = id;
                }
                ids[slot] = edge_vertex[e];
            }
            if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
                triangles.push(ids);
                triangle_cells.push(ci as u32);
            }
        }
    }
    Ok(MarchingCubesOutput {
        mesh: TriangleMesh::new(vertices, triangles)?,
        triangle_cells,
        corner_evals: corners.len() as u64,
    })
}

/// Wavefront OBJ text: a header comment, `v` lines, then 1-based `f` lines.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::from("# nira mesh\n");
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn export_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}

/// Parse the subset of OBJ written by [`write_obj`] (`v` and triangular `f`).
pub fn read_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .map(|p| p.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(format!("line {}", lineno + 1), e.to_string()))?;
                if c.len() != 3 {
                    return Err(Error::parse(format!("line {}", lineno + 1), "vertex needs 3 coordinates"));
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<u32> = parts
                    .map(|p| p.split('/').next().unwrap_or("").parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(format!("line {}", lineno + 1), e.to_string()))?;
                if idx.len() != 3 || idx.contains(&0) {
                    return Err(Error::parse(format!("line {}", lineno + 1), "face needs 3 one-based indices"));
                }
                triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}
