//! Structured triangulations of the unit square and their uniform (red)
//! refinements.
//!
//! Every square of an `n x n` grid is split by the diagonal running from its
//! lower-left to its upper-right corner. Red refinement of such a mesh
//! reproduces the structured mesh with `2n` subdivisions, so a chain of
//! refinements gives nested meshes and nested finite element spaces.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance used to classify boundary vertices.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the three barycentric coordinates (constant per element).
    pub grad_lambda: [[f64; 2]; 3],
}

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `i` of a triangle is the one opposite its vertex `i`.
    triangle_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    geometry: Vec<ElementGeometry>,
    level: usize,
    divisions: usize,
    parent: Option<Arc<Mesh>>,
    parent_triangle: Vec<usize>,
    h_max: f64,
}

/// Shape statistics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_max: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    /// Largest circumradius / inradius ratio over all triangles.
    pub regularity_ratio: f64,
}

impl Mesh {
    /// `n x n` squares, each split along its lower-left to upper-right diagonal.
    pub fn unit_square(n: usize) -> Result<Arc<Mesh>> {
        if n == 0 {
            return Err(Error::Domain(
                "unit square mesh needs at least one subdivision".into(),
            ));
        }
        let inv = n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / inv, j as f64 / inv]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Arc::new(Self::from_parts(vertices, triangles, 0, n, None, Vec::new())))
    }

    /// Red refinement: every triangle is split into four through its edge
    /// midpoints. New vertices are numbered after the old ones, one per old
    /// edge, in edge order.
    pub fn refine(self: &Arc<Self>) -> Arc<Mesh> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|&[a, b]| {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }));
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent_triangle = Vec::with_capacity(4 * self.triangles.len());
        for (t, (&[a, b, c], &[ea, eb, ec])) in
            self.triangles.iter().zip(&self.triangle_edges).enumerate()
        {
            let (ma, mb, mc) = (nv + ea, nv + eb, nv + ec);
            triangles.push([a, mc, mb]);
            triangles.push([mc, b, ma]);
            triangles.push([mb, ma, c]);
            triangles.push([ma, mb, mc]);
            parent_triangle.extend([t; 4]);
        }
        Arc::new(Self::from_parts(
            vertices,
            triangles,
            self.level + 1,
            2 * self.divisions,
            Some(Arc::clone(self)),
            parent_triangle,
        ))
    }

    /// `unit_square(n)` refined `levels` times.
    pub fn refined_chain(n: usize, levels: usize) -> Result<Vec<Arc<Mesh>>> {
        let mut chain = vec![Self::unit_square(n)?];
        for _ in 0..levels {
            let next = chain.last().unwrap().refine();
            chain.push(next);
        }
        Ok(chain)
    }

    fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        level: usize,
        divisions: usize,
        parent: Option<Arc<Mesh>>,
        parent_triangle: Vec<usize>,
    ) -> Self {
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_count = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut local = [0; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_count.push(0usize);
                    edges.len() - 1
                });
                edge_count[id] += 1;
                *slot = id;
            }
            triangle_edges.push(local);
        }
        let on_boundary = |p: [f64; 2]| {
            p[0].abs() <= BOUNDARY_TOL
                || (p[0] - 1.0).abs() <= BOUNDARY_TOL
                || p[1].abs() <= BOUNDARY_TOL
                || (p[1] - 1.0).abs() <= BOUNDARY_TOL
        };
        let boundary_vertex = vertices.iter().map(|&p| on_boundary(p)).collect();
        let boundary_edge = edge_count.iter().map(|&c| c == 1).collect();
        let geometry = triangles
            .iter()
            .map(|t| element_geometry([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        let h_max = edges
            .iter()
            .map(|&[a, b]| dist(vertices[a], vertices[b]))
            .fold(0.0, f64::max);
        Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_vertex,
            boundary_edge,
            geometry,
            level,
            divisions,
            parent,
            parent_triangle,
            h_max,
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn boundary_edges(&self) -> &[bool] {
        &self.boundary_edge
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Subdivisions per side of the structured mesh.
    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    /// Child triangle to parent triangle map (empty for a root mesh).
    pub fn parent_triangles(&self) -> &[usize] {
        &self.parent_triangle
    }

    /// Number of refinements separating `self` from `ancestor`, if
    /// `ancestor` is `self` or one of its parents.
    pub fn depth_below(&self, ancestor: &Mesh) -> Option<usize> {
        let mut current = self;
        let mut depth = 0;
        loop {
            if std::ptr::eq(current, ancestor) {
                return Some(depth);
            }
            current = current.parent.as_deref()?;
            depth += 1;
        }
    }

    /// For every triangle of `self`, the containing triangle of `ancestor`.
    pub fn ancestor_triangles(&self, ancestor: &Mesh) -> Result<Vec<usize>> {
        let depth = self.depth_below(ancestor).ok_or(Error::AncestryViolation)?;
        let mut map: Vec<usize> = (0..self.num_triangles()).collect();
        let mut current = self;
        for _ in 0..depth {
            for t in map.iter_mut() {
                *t = current.parent_triangle[*t];
            }
            current = current.parent.as_deref().expect("depth checked");
        }
        Ok(map)
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let v0 = self.vertices[self.triangles[t][0]];
        let g = &self.geometry[t].grad_lambda;
        let d = [p[0] - v0[0], p[1] - v0[1]];
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Physical point with barycentric coordinates `lambda` in triangle `t`.
    pub fn point(&self, t: usize, lambda: [f64; 3]) -> [f64; 2] {
        let tri = self.triangles[t];
        let mut p = [0.0; 2];
        for (k, &v) in tri.iter().enumerate() {
            p[0] += lambda[k] * self.vertices[v][0];
            p[1] += lambda[k] * self.vertices[v][1];
        }
        p
    }

    /// Signed area of triangle `t` (positive for counterclockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_angle = f64::INFINITY;
        let mut ratio: f64 = 0.0;
        for &[a, b, c] in &self.triangles {
            let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
            let len = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
            for k in 0..3 {
                let (opp, s1, s2) = (len[k], len[(k + 1) % 3], len[(k + 2) % 3]);
                let cos = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos().to_degrees());
            }
            let area = signed_area(p).abs();
            let semi = 0.5 * (len[0] + len[1] + len[2]);
            let inradius = area / semi;
            let circumradius = len[0] * len[1] * len[2] / (4.0 * area);
            ratio = ratio.max(circumradius / inradius);
        }
        MeshStats {
            h_max: self.h_max,
            min_angle,
            regularity_ratio: ratio,
        }
    }

    /// Plain-text dump: `v x y` per vertex, then `t i j k` per triangle.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

fn element_geometry(p: [[f64; 2]; 3]) -> ElementGeometry {
    let two_a = 2.0 * signed_area(p);
    let g = |i: usize, j: usize| [(p[i][1] - p[j][1]) / two_a, (p[j][0] - p[i][0]) / two_a];
    ElementGeometry {
        area: 0.5 * two_a,
        grad_lambda: [g(1, 2), g(2, 0), g(0, 1)],
    }
}
