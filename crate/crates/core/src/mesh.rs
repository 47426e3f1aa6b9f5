//! Conforming simplicial meshes of bounded domains in `R^n`, `n ∈ {1,2,3}`,
//! with facet adjacency, boundary detection and induced orientations.
//!
//! Each facet carries a canonical orthonormal tangential frame computed once
//! from its sorted vertex tuple; every side (cell, local facet) stores an
//! outward unit normal and a ±1 sign relating the side's induced boundary
//! orientation to the canonical frame. Traces from the two sides of a facet
//! can therefore be compared coefficient-wise in one shared frame.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One (cell, local facet) incidence of a facet.
#[derive(Debug, Clone)]
pub struct FacetSide {
    /// Cell id.
    pub cell: usize,
    /// Local facet index in the cell (the facet opposite vertex `local`).
    pub local: usize,
    /// Outward unit normal seen from this cell.
    pub normal: DVector<f64>,
    /// Sign of `det [ν | t₁ | … | t_{n−1}]`: +1 when the canonical frame
    /// agrees with the outward-normal-first induced orientation.
    pub orientation_sign: f64,
}

/// Canonical geometric frame of a facet, shared by both sides.
#[derive(Debug, Clone)]
pub struct FacetFrame {
    /// Facet centroid; origin of the frame coordinates.
    pub origin: DVector<f64>,
    /// Orthonormal tangent vectors (n−1 of them; empty for point facets).
    pub tangents: Vec<DVector<f64>>,
    /// (n−1)-dimensional measure; 1 for point facets (counting measure).
    pub measure: f64,
    /// Diameter of the facet; 1 for point facets.
    pub diameter: f64,
    /// Facet vertex coordinates expressed in the frame.
    pub ref_vertices: Vec<DVector<f64>>,
}

/// A facet of the triangulation with its side records.
#[derive(Debug, Clone)]
pub struct Facet {
    /// Canonical vertex tuple, sorted ascending.
    pub vertices: Vec<usize>,
    /// One side for boundary facets, two for interior ones. `sides[0]` is
    /// the `e⁺` side by convention.
    pub sides: Vec<FacetSide>,
    pub boundary: bool,
    pub frame: FacetFrame,
}

/// A conforming simplicial mesh. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    n: usize,
    vertices: Vec<DVector<f64>>,
    cells: Vec<Vec<usize>>,
    facets: Vec<Facet>,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    n: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
}

impl SimplicialMesh {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertex(&self, v: usize) -> &DVector<f64> {
        &self.vertices[v]
    }

    /// Vertex ids of a cell (n+1 of them, positively oriented).
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_vertices(&self, c: usize) -> Vec<DVector<f64>> {
        self.cells[c].iter().map(|&v| self.vertices[v].clone()).collect()
    }

    pub fn cell_centroid(&self, c: usize) -> DVector<f64> {
        let vs = self.cell_vertices(c);
        let mut acc = DVector::zeros(self.n);
        for v in &vs {
            acc += v;
        }
        acc / (vs.len() as f64)
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let vs = self.cell_vertices(c);
        let mut d: f64 = 0.0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                d = d.max((&vs[i] - &vs[j]).norm());
            }
        }
        d
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let vs = self.cell_vertices(c);
        simplex_volume(&vs).abs()
    }

    /// Facet (id, side index) pairs for the given cell, ordered by the
    /// local facet index.
    pub fn cell_facets(&self, c: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n + 1);
        for (fi, f) in self.facets.iter().enumerate() {
            for (si, s) in f.sides.iter().enumerate() {
                if s.cell == c {
                    out.push((s.local, fi, si));
                }
            }
        }
        out.sort_unstable();
        out.into_iter().map(|(_, fi, si)| (fi, si)).collect()
    }

    /// Loads a mesh from the JSON format
    /// `{ "n": int, "vertices": [[x...]...], "cells": [[id...]...] }`.
    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MeshFile = serde_json::from_str(&text)?;
        let vertices = file
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != file.n {
                    Err(Error::Validation(format!(
                        "vertex {i} has {} coordinates, expected {}",
                        v.len(),
                        file.n
                    )))
                } else {
                    Ok(DVector::from_column_slice(v))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        build_mesh(file.n, vertices, file.cells)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = MeshFile {
            n: self.n,
            vertices: self.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
            cells: self.cells.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }
}

/// Signed volume of the simplex spanned by `vs` (n+1 points in R^n).
fn simplex_volume(vs: &[DVector<f64>]) -> f64 {
    let n = vs[0].len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m.set_column(j, &(&vs[j + 1] - &vs[0]));
    }
    let mut fact = 1.0;
    for i in 1..=n {
        fact *= i as f64;
    }
    m.determinant() / fact
}

/// Builds a mesh from raw vertex and cell data.
///
/// Cells are reoriented (one transposition if needed) so that the stored
/// vertex tuple is positively oriented. Facets, side records, boundary
/// flags and frames are derived deterministically from the input order.
pub fn build_mesh(
    n: usize,
    vertices: Vec<DVector<f64>>,
    cells: Vec<Vec<usize>>,
) -> Result<SimplicialMesh> {
    if !(1..=3).contains(&n) {
        return Err(Error::Usage(format!("ambient dimension {n} not in 1..=3")));
    }
    for (i, v) in vertices.iter().enumerate() {
        if v.len() != n {
            return Err(Error::Validation(format!(
                "vertex {i} has {} coordinates, expected {n}",
                v.len()
            )));
        }
    }
    let mut oriented = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        if cell.len() != n + 1 {
            return Err(Error::Validation(format!(
                "cell {ci} has {} vertices, expected {}",
                cell.len(),
                n + 1
            )));
        }
        for &v in cell {
            if v >= vertices.len() {
                return Err(Error::Validation(format!(
                    "cell {ci} refers to missing vertex {v}"
                )));
            }
        }
        let vs: Vec<_> = cell.iter().map(|&v| vertices[v].clone()).collect();
        let vol = simplex_volume(&vs);
        let diam: f64 = {
            let mut d: f64 = 0.0;
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    d = d.max((&vs[i] - &vs[j]).norm());
                }
            }
            d
        };
        if vol.abs() <= 1e-12 * diam.powi(n as i32).max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!("cell {ci} is degenerate")));
        }
        let mut cell = cell.clone();
        if vol < 0.0 {
            cell.swap(n - 1, n);
        }
        oriented.push(cell);
    }

    // facet discovery: facet opposite local vertex i of each cell
    let mut by_key: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for (ci, cell) in oriented.iter().enumerate() {
        for local in 0..=n {
            let mut key: Vec<usize> = cell
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != local)
                .map(|(_, &v)| v)
                .collect();
            key.sort_unstable();
            by_key.entry(key).or_default().push((ci, local));
        }
    }

    let mut facets = Vec::with_capacity(by_key.len());
    for (key, incidences) in by_key {
        if incidences.len() > 2 {
            return Err(Error::Validation(format!(
                "facet {key:?} is shared by {} cells",
                incidences.len()
            )));
        }
        let frame = facet_frame(n, &vertices, &key);
        let mut sides = Vec::with_capacity(incidences.len());
        for (ci, local) in &incidences {
            let opposite = &vertices[oriented[*ci][*local]];
            let normal = outward_normal(&frame, opposite)?;
            let orientation_sign = frame_orientation_sign(n, &normal, &frame.tangents);
            sides.push(FacetSide {
                cell: *ci,
                local: *local,
                normal,
                orientation_sign,
            });
        }
        let boundary = sides.len() == 1;
        facets.push(Facet {
            vertices: key,
            sides,
            boundary,
            frame,
        });
    }

    Ok(SimplicialMesh {
        n,
        vertices,
        cells: oriented,
        facets,
    })
}

fn facet_frame(n: usize, vertices: &[DVector<f64>], key: &[usize]) -> FacetFrame {
    let vs: Vec<DVector<f64>> = key.iter().map(|&v| vertices[v].clone()).collect();
    let mut origin = DVector::zeros(n);
    for v in &vs {
        origin += v;
    }
    origin /= vs.len() as f64;

    // Gram–Schmidt over edges from the first (lowest-id) vertex
    let mut tangents: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for j in 1..vs.len() {
        let mut t = &vs[j] - &vs[0];
        for prev in &tangents {
            let p = prev.dot(&t);
            t -= prev * p;
        }
        let norm = t.norm();
        if norm > 1e-14 {
            tangents.push(t / norm);
        }
    }

    let measure = if n == 1 {
        1.0
    } else {
        // sqrt(det Gram(E)) / (n-1)!
        let m = vs.len() - 1;
        let mut e = DMatrix::zeros(n, m);
        for j in 0..m {
            e.set_column(j, &(&vs[j + 1] - &vs[0]));
        }
        let gram = e.transpose() * &e;
        let mut fact = 1.0;
        for i in 1..=m {
            fact *= i as f64;
        }
        gram.determinant().max(0.0).sqrt() / fact
    };

    let diameter = if n == 1 {
        1.0
    } else {
        let mut d: f64 = 0.0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                d = d.max((&vs[i] - &vs[j]).norm());
            }
        }
        d
    };

    let ref_vertices = vs
        .iter()
        .map(|v| DVector::from_iterator(n - 1, tangents.iter().map(|t| t.dot(&(v - &origin)))))
        .collect();

    FacetFrame {
        origin,
        tangents,
        measure,
        diameter,
        ref_vertices,
    }
}

fn outward_normal(frame: &FacetFrame, opposite: &DVector<f64>) -> Result<DVector<f64>> {
    // component of (origin − opposite) orthogonal to the tangent space
    let mut u = &frame.origin - opposite;
    for t in &frame.tangents {
        let p = t.dot(&u);
        u -= t * p;
    }
    let norm = u.norm();
    if norm <= 1e-14 {
        return Err(Error::Validation(
            "cell is degenerate: opposite vertex lies in facet plane".into(),
        ));
    }
    Ok(u / norm)
}

fn frame_orientation_sign(n: usize, normal: &DVector<f64>, tangents: &[DVector<f64>]) -> f64 {
    let mut m = DMatrix::zeros(n, n);
    m.set_column(0, normal);
    for (j, t) in tangents.iter().enumerate() {
        m.set_column(j + 1, t);
    }
    if m.determinant() >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Two congruent regular n-simplices sharing a common facet, mirror images
/// of each other across the shared facet. Edge length 1.
pub fn equilateral_pair(n: usize) -> Result<SimplicialMesh> {
    match n {
        1 => {
            let vs = vec![
                DVector::from_column_slice(&[-1.0]),
                DVector::from_column_slice(&[0.0]),
                DVector::from_column_slice(&[1.0]),
            ];
            build_mesh(1, vs, vec![vec![0, 1], vec![1, 2]])
        }
        2 => {
            let h = 3.0_f64.sqrt() / 2.0;
            let vs = vec![
                DVector::from_column_slice(&[-0.5, 0.0]),
                DVector::from_column_slice(&[0.5, 0.0]),
                DVector::from_column_slice(&[0.0, h]),
                DVector::from_column_slice(&[0.0, -h]),
            ];
            build_mesh(2, vs, vec![vec![0, 1, 2], vec![0, 1, 3]])
        }
        3 => {
            let r = 1.0 / 3.0_f64.sqrt();
            let h = (2.0 / 3.0_f64).sqrt();
            let c = 3.0_f64.sqrt() / 2.0;
            let vs = vec![
                DVector::from_column_slice(&[0.0, r, 0.0]),
                DVector::from_column_slice(&[-c * r, -r / 2.0, 0.0]),
                DVector::from_column_slice(&[c * r, -r / 2.0, 0.0]),
                DVector::from_column_slice(&[0.0, 0.0, h]),
                DVector::from_column_slice(&[0.0, 0.0, -h]),
            ];
            build_mesh(3, vs, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 4]])
        }
        _ => Err(Error::Usage(format!("equilateral_pair: n={n} not in 1..=3"))),
    }
}

/// The reference n-simplex (vertices at the origin and the unit points).
pub fn reference_simplex(n: usize) -> Result<SimplicialMesh> {
    let mut vs = vec![DVector::zeros(n)];
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        vs.push(v);
    }
    build_mesh(n, vs, vec![(0..=n).collect()])
}

/// Uniform subdivision of `[a, b]` into `m` cells.
pub fn interval_mesh(a: f64, b: f64, m: usize) -> Result<SimplicialMesh> {
    if m == 0 || b <= a {
        return Err(Error::Usage("interval_mesh needs m >= 1 and b > a".into()));
    }
    let vs = (0..=m)
        .map(|i| DVector::from_column_slice(&[a + (b - a) * i as f64 / m as f64]))
        .collect();
    let cells = (0..m).map(|i| vec![i, i + 1]).collect();
    build_mesh(1, vs, cells)
}

/// The unit square split into `2 m²` triangles on an `m × m` grid.
pub fn square_mesh(m: usize) -> Result<SimplicialMesh> {
    if m == 0 {
        return Err(Error::Usage("square_mesh needs m >= 1".into()));
    }
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut vs = Vec::with_capacity((m + 1) * (m + 1));
    for i in 0..=m {
        for j in 0..=m {
            vs.push(DVector::from_column_slice(&[
                i as f64 / m as f64,
                j as f64 / m as f64,
            ]));
        }
    }
    let mut cells = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.push(vec![idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build_mesh(2, vs, cells)
}

/// The unit cube split into 6 tetrahedra (Kuhn subdivision).
pub fn cube_mesh() -> Result<SimplicialMesh> {
    let corner = |b: [usize; 3]| b[0] * 4 + b[1] * 2 + b[2];
    let mut vs = Vec::with_capacity(8);
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                vs.push(DVector::from_column_slice(&[x as f64, y as f64, z as f64]));
            }
        }
    }
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6);
    for p in perms {
        let mut b = [0usize; 3];
        let mut cell = vec![corner(b)];
        for &axis in &p {
            b[axis] = 1;
            cell.push(corner(b));
        }
        cells.push(cell);
    }
    build_mesh(3, vs, cells)
}

/// Facet-sides forming the boundary of the region covered by a cell subset:
/// facets touched by exactly one subset cell (from that cell's side),
/// including domain-boundary facets of subset cells.
pub fn region_boundary(mesh: &SimplicialMesh, cell_subset: &[usize]) -> Result<Vec<(usize, usize)>> {
    if cell_subset.is_empty() {
        return Err(Error::Usage("region_boundary: empty cell subset".into()));
    }
    let in_subset = |c: usize| cell_subset.contains(&c);
    let mut out = Vec::new();
    for (fi, f) in mesh.facets.iter().enumerate() {
        let inside: Vec<usize> = (0..f.sides.len())
            .filter(|&si| in_subset(f.sides[si].cell))
            .collect();
        if inside.len() == 1 {
            out.push((fi, inside[0]));
        }
    }
    Ok(out)
}
