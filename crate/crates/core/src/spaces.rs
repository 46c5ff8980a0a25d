//! Mixed finite element spaces and finite element functions.
//!
//! Velocity degrees of freedom are numbered node by node with the two
//! components interleaved (`2 * node + component`); scalar nodes are the mesh
//! vertices, then the edges (quadratic family), then one bubble per triangle
//! (mini family). Pressure is continuous piecewise linear in every family,
//! one degree of freedom per vertex, including the constant mode.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::element::{BasisTable, LocalBasis, MAX_LOCAL};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::par;
use crate::quadrature::TriangleRule;

/// Velocity/pressure element pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementFamily {
    /// P1 velocity enriched with cubic bubbles, P1 pressure.
    Mini,
    /// P2 velocity, P1 pressure.
    TaylorHood2,
    /// P1 velocity, P1 pressure. Not inf-sup stable; only used as a
    /// negative control for the inf-sup estimator.
    EqualOrderP1,
}

impl ElementFamily {
    pub const fn name(self) -> &'static str {
        match self {
            ElementFamily::Mini => "mini",
            ElementFamily::TaylorHood2 => "taylor_hood_2",
            ElementFamily::EqualOrderP1 => "p1p1",
        }
    }

    pub const fn velocity_basis(self) -> LocalBasis {
        match self {
            ElementFamily::Mini => LocalBasis::P1Bubble,
            ElementFamily::TaylorHood2 => LocalBasis::P2,
            ElementFamily::EqualOrderP1 => LocalBasis::P1,
        }
    }

    pub const fn pressure_basis(self) -> LocalBasis {
        LocalBasis::P1
    }

    /// Polynomial degree of the velocity space, bubbles not counted.
    pub const fn velocity_degree(self) -> usize {
        match self {
            ElementFamily::TaylorHood2 => 2,
            _ => 1,
        }
    }

    pub const fn pressure_degree(self) -> usize {
        1
    }

    /// Degree of exactness of the family quadrature. High enough for the
    /// trilinear form to be integrated exactly: products of three velocity
    /// functions with one derivative have degree 8 for the mini element
    /// (cubic bubbles) and 5 for the quadratic pair.
    pub const fn quadrature_degree(self) -> usize {
        match self {
            ElementFamily::Mini => 8,
            ElementFamily::TaylorHood2 => 6,
            ElementFamily::EqualOrderP1 => 4,
        }
    }
}

impl fmt::Display for ElementFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mini" => Ok(ElementFamily::Mini),
            "taylor_hood_2" | "th2" => Ok(ElementFamily::TaylorHood2),
            "p1p1" => Ok(ElementFamily::EqualOrderP1),
            other => Err(Error::Config(format!("unknown element family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

impl FieldKind {
    pub const fn name(self) -> &'static str {
        match self {
            FieldKind::Velocity => "velocity",
            FieldKind::Pressure => "pressure",
        }
    }
}

/// Degree-of-freedom layout of one element family on one mesh.
#[derive(Debug)]
pub struct MixedSpace {
    mesh: Arc<Mesh>,
    family: ElementFamily,
    node_points: Vec<[f64; 2]>,
    cell_nodes: Vec<usize>,
    dirichlet: Vec<bool>,
    rule: TriangleRule,
    velocity_table: BasisTable,
    pressure_table: BasisTable,
}

impl MixedSpace {
    pub fn new(mesh: Arc<Mesh>, family: ElementFamily) -> Arc<Self> {
        let basis = family.velocity_basis();
        let nloc = basis.len();
        let nv = mesh.num_vertices();
        let mut node_points: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let mut node_boundary: Vec<bool> = mesh.boundary_vertices().to_vec();
        let mut cell_nodes = Vec::with_capacity(nloc * mesh.num_triangles());
        match family {
            ElementFamily::TaylorHood2 => {
                for (&[a, b], &bnd) in mesh.edges().iter().zip(mesh.boundary_edges()) {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    node_points.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    node_boundary.push(bnd);
                }
                for (tri, te) in mesh.triangles().iter().zip(mesh.triangle_edges()) {
                    cell_nodes.extend_from_slice(tri);
                    cell_nodes.extend(te.iter().map(|&e| nv + e));
                }
            }
            ElementFamily::Mini => {
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    node_points.push(mesh.point(t, [1.0 / 3.0; 3]));
                    node_boundary.push(false);
                    cell_nodes.extend_from_slice(tri);
                    cell_nodes.push(nv + t);
                }
            }
            ElementFamily::EqualOrderP1 => {
                for tri in mesh.triangles() {
                    cell_nodes.extend_from_slice(tri);
                }
            }
        }
        let dirichlet = node_boundary.iter().flat_map(|&b| [b, b]).collect();
        let rule = TriangleRule::with_degree(family.quadrature_degree());
        let velocity_table = BasisTable::new(basis, rule.points());
        let pressure_table = BasisTable::new(family.pressure_basis(), rule.points());
        Arc::new(MixedSpace {
            mesh,
            family,
            node_points,
            cell_nodes,
            dirichlet,
            rule,
            velocity_table,
            pressure_table,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_triangles()
    }

    /// Scalar velocity nodes (vertices, edges or bubbles).
    pub fn num_velocity_nodes(&self) -> usize {
        self.node_points.len()
    }

    pub fn velocity_dofs(&self) -> usize {
        2 * self.node_points.len()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn dofs(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::Velocity => self.velocity_dofs(),
            FieldKind::Pressure => self.pressure_dofs(),
        }
    }

    /// Nodal point of each scalar velocity node (barycenter for bubbles).
    pub fn node_points(&self) -> &[[f64; 2]] {
        &self.node_points
    }

    /// `true` for velocity degrees of freedom on the boundary.
    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn free_velocity_dofs(&self) -> usize {
        self.dirichlet.iter().filter(|&&b| !b).count()
    }

    /// Scalar velocity nodes of element `t`, in local order.
    #[inline]
    pub fn velocity_nodes(&self, t: usize) -> &[usize] {
        let n = self.family.velocity_basis().len();
        &self.cell_nodes[t * n..(t + 1) * n]
    }

    /// Pressure nodes (vertices) of element `t`.
    #[inline]
    pub fn pressure_nodes(&self, t: usize) -> &[usize; 3] {
        &self.mesh.triangles()[t]
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn velocity_table(&self) -> &BasisTable {
        &self.velocity_table
    }

    pub fn pressure_table(&self) -> &BasisTable {
        &self.pressure_table
    }

    /// Zeroes the boundary entries of a velocity vector.
    pub fn apply_mask(&self, v: &mut [f64]) {
        for (x, &m) in v.iter_mut().zip(&self.dirichlet) {
            if m {
                *x = 0.0;
            }
        }
    }
}

/// Convenience wrapper for [`MixedSpace::new`].
pub fn build_space(mesh: Arc<Mesh>, family: ElementFamily) -> Arc<MixedSpace> {
    MixedSpace::new(mesh, family)
}

/// Bubble contributions of an ancestor mini space carried by a prolonged
/// function: the coarse bubbles are not representable in the fine mini
/// space, so they are kept and evaluated exactly on the fine mesh.
#[derive(Debug, Clone)]
pub struct AncestorBubbles {
    space: Arc<MixedSpace>,
    coefficients: Vec<[f64; 2]>,
}

impl AncestorBubbles {
    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    /// Bubble coefficient per ancestor element and component.
    pub fn coefficients(&self) -> &[[f64; 2]] {
        &self.coefficients
    }
}

/// Coefficient vector tagged with its space and kind.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<MixedSpace>,
    kind: FieldKind,
    coefficients: Vec<f64>,
    ancestor_bubbles: Vec<AncestorBubbles>,
}

/// Value and gradient of a field at a point. Pressure uses component 0;
/// `gradient[c][d]` is the derivative of component `c` along `x_d`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluation {
    pub value: [f64; 2],
    pub gradient: [[f64; 2]; 2],
}

/// Values and gradients of a field at every quadrature point of every
/// element of some mesh (index `element * n_points + q`).
#[derive(Debug, Clone)]
pub struct QuadField {
    n_points: usize,
    data: Vec<Evaluation>,
}

impl QuadField {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn at(&self, element: usize, q: usize) -> &Evaluation {
        &self.data[element * self.n_points + q]
    }

    pub fn as_slice(&self) -> &[Evaluation] {
        &self.data
    }

    /// Field from analytic values: `f(x, y)` at each mapped point.
    pub fn from_fn<F>(mesh: &Mesh, points: &[[f64; 3]], f: F) -> Self
    where
        F: Fn([f64; 2]) -> Evaluation + Sync + Send,
    {
        let nq = points.len();
        let data = par::map_collect(mesh.num_triangles() * nq, |i| {
            let (e, q) = (i / nq, i % nq);
            f(mesh.point(e, points[q]))
        });
        QuadField { n_points: nq, data }
    }
}

#[derive(Clone, Copy)]
struct SampleOptions {
    own_bubbles: bool,
    ancestors: bool,
}

impl FeFunction {
    pub fn zeros(space: Arc<MixedSpace>, kind: FieldKind) -> Self {
        let n = space.dofs(kind);
        FeFunction {
            space,
            kind,
            coefficients: vec![0.0; n],
            ancestor_bubbles: Vec::new(),
        }
    }

    pub fn from_coefficients(
        space: Arc<MixedSpace>,
        kind: FieldKind,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let n = space.dofs(kind);
        if coefficients.len() != n {
            return Err(Error::Domain(format!(
                "{} coefficient vector has length {}, expected {n}",
                kind.name(),
                coefficients.len()
            )));
        }
        Ok(FeFunction {
            space,
            kind,
            coefficients,
            ancestor_bubbles: Vec::new(),
        })
    }

    /// Nodal interpolant of a velocity field (bubble coefficients zero).
    pub fn interpolate_velocity<F>(space: Arc<MixedSpace>, f: F) -> Self
    where
        F: Fn(f64, f64) -> [f64; 2],
    {
        let mut c = vec![0.0; space.velocity_dofs()];
        let n_nodal = match space.family() {
            ElementFamily::Mini => space.mesh().num_vertices(),
            _ => space.num_velocity_nodes(),
        };
        for (k, p) in space.node_points().iter().take(n_nodal).enumerate() {
            let v = f(p[0], p[1]);
            c[2 * k] = v[0];
            c[2 * k + 1] = v[1];
        }
        FeFunction::from_coefficients(space, FieldKind::Velocity, c).expect("sized")
    }

    /// Nodal interpolant of a scalar field in the pressure space.
    pub fn interpolate_pressure<F>(space: Arc<MixedSpace>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64,
    {
        let c = space.mesh().vertices().iter().map(|p| f(p[0], p[1])).collect();
        FeFunction::from_coefficients(space, FieldKind::Pressure, c).expect("sized")
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn ancestor_bubbles(&self) -> &[AncestorBubbles] {
        &self.ancestor_bubbles
    }

    fn expect_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name(),
                actual: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Evaluates the basis expansion at barycentric point `lambda` of
    /// element `element` of this function's own mesh.
    pub fn evaluate(&self, element: usize, lambda: [f64; 3]) -> Result<Evaluation> {
        let count = self.space.num_elements();
        if element >= count {
            return Err(Error::ElementOutOfRange {
                index: element,
                count,
            });
        }
        let mut out = self.eval_local(element, lambda, true);
        for anc in &self.ancestor_bubbles {
            let at = self.space.mesh().ancestor_triangles(anc.space.mesh())?[element];
            let p = self.space.mesh().point(element, lambda);
            add_bubble(&mut out, anc, at, anc.space.mesh().barycentric(at, p));
        }
        Ok(out)
    }

    fn eval_local(&self, element: usize, lambda: [f64; 3], own_bubbles: bool) -> Evaluation {
        let space = &*self.space;
        let geom = &space.mesh().geometry()[element];
        let (basis, nodes): (LocalBasis, &[usize]) = match self.kind {
            FieldKind::Velocity => (space.family().velocity_basis(), space.velocity_nodes(element)),
            FieldKind::Pressure => (LocalBasis::P1, space.pressure_nodes(element)),
        };
        let mut vals = [0.0; MAX_LOCAL];
        let mut dl = [[0.0; 3]; MAX_LOCAL];
        basis.eval(lambda, &mut vals, &mut dl);
        let n = if !own_bubbles && basis == LocalBasis::P1Bubble { 3 } else { basis.len() };
        let mut out = Evaluation::default();
        for k in 0..n {
            let g = crate::element::physical_gradient(&dl[k], geom);
            match self.kind {
                FieldKind::Velocity => {
                    for c in 0..2 {
                        let a = self.coefficients[2 * nodes[k] + c];
                        out.value[c] += a * vals[k];
                        out.gradient[c][0] += a * g[0];
                        out.gradient[c][1] += a * g[1];
                    }
                }
                FieldKind::Pressure => {
                    let a = self.coefficients[nodes[k]];
                    out.value[0] += a * vals[k];
                    out.gradient[0][0] += a * g[0];
                    out.gradient[0][1] += a * g[1];
                }
            }
        }
        out
    }

    /// Values and gradients at the given barycentric points of every element
    /// of `target`, which must be this function's mesh or a refinement of it.
    pub fn sample(&self, target: &Mesh, points: &[[f64; 3]]) -> Result<QuadField> {
        self.sample_with(
            target,
            points,
            SampleOptions {
                own_bubbles: true,
                ancestors: true,
            },
        )
    }

    /// Samples at the family quadrature points of `space`.
    pub fn sample_on(&self, space: &MixedSpace) -> Result<QuadField> {
        self.sample(space.mesh(), space.rule().points())
    }

    fn sample_with(&self, target: &Mesh, points: &[[f64; 3]], opts: SampleOptions) -> Result<QuadField> {
        let own_mesh = &**self.space.mesh();
        let map = target.ancestor_triangles(own_mesh)?;
        let same = std::ptr::eq(target, own_mesh);
        let ancestors: Vec<(Vec<usize>, &AncestorBubbles)> = if opts.ancestors {
            self.ancestor_bubbles
                .iter()
                .map(|a| Ok((target.ancestor_triangles(a.space.mesh())?, a)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let nq = points.len();
        let data = par::map_collect(target.num_triangles() * nq, |i| {
            let (e, q) = (i / nq, i % nq);
            let ce = map[e];
            let p = target.point(e, points[q]);
            let lc = if same { points[q] } else { own_mesh.barycentric(ce, p) };
            let mut out = self.eval_local(ce, lc, opts.own_bubbles);
            for (amap, anc) in &ancestors {
                let at = amap[e];
                add_bubble(&mut out, anc, at, anc.space.mesh().barycentric(at, p));
            }
            out
        });
        Ok(QuadField { n_points: nq, data })
    }

    /// Embeds this function into the nested space `fine` (same family, mesh
    /// equal to or refining this function's mesh) without changing it as a
    /// function on the domain.
    pub fn prolong(&self, fine: &Arc<MixedSpace>) -> Result<FeFunction> {
        if self.space.family() != fine.family() {
            return Err(Error::FamilyMismatch(self.space.family().name(), fine.family().name()));
        }
        let fine_mesh = &**fine.mesh();
        if fine_mesh.depth_below(self.space.mesh()).is_none() {
            return Err(Error::AncestryViolation);
        }
        if Arc::ptr_eq(fine, &self.space) {
            return Ok(self.clone());
        }
        match self.kind {
            FieldKind::Pressure => {
                let nodes = LocalBasis::P1.nodes();
                let s = self.sample_with(fine_mesh, nodes, SampleOptions { own_bubbles: true, ancestors: true })?;
                let mut c = vec![0.0; fine.pressure_dofs()];
                for t in 0..fine.num_elements() {
                    for (k, &v) in fine.pressure_nodes(t).iter().enumerate() {
                        c[v] = s.at(t, k).value[0];
                    }
                }
                FeFunction::from_coefficients(Arc::clone(fine), FieldKind::Pressure, c)
            }
            FieldKind::Velocity => {
                let basis = fine.family().velocity_basis();
                let is_mini = basis == LocalBasis::P1Bubble;
                let nodes = &basis.nodes()[..if is_mini { 3 } else { basis.len() }];
                let opts = SampleOptions {
                    own_bubbles: !is_mini,
                    ancestors: !is_mini,
                };
                let s = self.sample_with(fine_mesh, nodes, opts)?;
                let mut c = vec![0.0; fine.velocity_dofs()];
                for t in 0..fine.num_elements() {
                    for (k, &v) in fine.velocity_nodes(t).iter().take(nodes.len()).enumerate() {
                        let val = s.at(t, k).value;
                        c[2 * v] = val[0];
                        c[2 * v + 1] = val[1];
                    }
                }
                let mut out = FeFunction::from_coefficients(Arc::clone(fine), FieldKind::Velocity, c)?;
                if is_mini {
                    out.ancestor_bubbles = self.ancestor_bubbles.clone();
                    let nv = self.space.mesh().num_vertices();
                    let own: Vec<[f64; 2]> = (0..self.space.num_elements())
                        .map(|t| [self.coefficients[2 * (nv + t)], self.coefficients[2 * (nv + t) + 1]])
                        .collect();
                    if own.iter().any(|b| b[0] != 0.0 || b[1] != 0.0) {
                        out.ancestor_bubbles.push(AncestorBubbles {
                            space: Arc::clone(&self.space),
                            coefficients: own,
                        });
                    }
                }
                Ok(out)
            }
        }
    }

    /// `self + alpha * other` for functions on the same space.
    pub fn axpy(&mut self, alpha: f64, other: &FeFunction) -> Result<()> {
        self.expect_kind(other.kind)?;
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::Domain("axpy on different spaces".into()));
        }
        for (a, b) in self.coefficients.iter_mut().zip(&other.coefficients) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Checks that this is a velocity field.
    pub fn require_velocity(&self) -> Result<()> {
        self.expect_kind(FieldKind::Velocity)
    }
}

fn add_bubble(out: &mut Evaluation, anc: &AncestorBubbles, t: usize, l: [f64; 3]) {
    let geom = &anc.space.mesh().geometry()[t];
    let b = 27.0 * l[0] * l[1] * l[2];
    let dl = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
    let g = crate::element::physical_gradient(&dl, geom);
    for c in 0..2 {
        let a = anc.coefficients[t][c];
        out.value[c] += a * b;
        out.gradient[c][0] += a * g[0];
        out.gradient[c][1] += a * g[1];
    }
}
