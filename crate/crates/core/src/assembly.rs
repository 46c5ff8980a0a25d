//! Finite element operators, the skew-symmetric trilinear form and
//! the discrete Leray projection.
//!
//! Element contributions are computed in parallel into a buffer indexed by
//! element and then scattered into precomputed CSR positions in element
//! order, so the assembled values do not depend on the thread count.

use std::sync::Arc;

use crate::element::MAX_LOCAL;
use crate::error::{Error, Result};
use crate::par;
use crate::saddle::{solve_saddle, Gauge, SaddleSystem};
use crate::spaces::{Evaluation, FeFunction, FieldKind, MixedSpace, QuadField};
use crate::sparse::{Pattern, SparseMatrix};

/// Bilinear forms of the mixed problem on one space. Matrices are stored
/// without Dirichlet elimination; the saddle solver applies the mask.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// Velocity mass matrix `(phi_j, phi_i)`.
    pub mass: SparseMatrix,
    /// Vector Laplacian `(grad phi_j, grad phi_i)`.
    pub stiffness: SparseMatrix,
    /// Pressure-divergence coupling `(q_i, div phi_j)`, pressure rows.
    pub divergence: SparseMatrix,
    /// Pressure mass matrix `(q_j, q_i)`.
    pub pressure_mass: SparseMatrix,
}

/// How the convection term is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionMode {
    /// `((w . grad) phi_j + 1/2 (div w) phi_j, phi_i)`.
    Skew,
    /// `((w . grad) phi_j, phi_i)`.
    Plain,
    /// Both halves of the derivative of `b(u, u, .)` at `w`.
    NewtonPair,
}

#[derive(Debug, Clone)]
pub enum Convection {
    Single(SparseMatrix),
    /// `(advection by w, reaction against grad w)`: the first matrix is
    /// `b(w, phi_j, phi_i)`, the second `b(phi_j, w, phi_i)`.
    Pair(SparseMatrix, SparseMatrix),
}

/// Scatter maps for one space.
#[derive(Debug)]
pub struct Assembler {
    space: Arc<MixedSpace>,
    vv: Pattern,
    vv_pos: Vec<usize>,
    pv: Pattern,
    pv_pos: Vec<usize>,
    pp: Pattern,
    pp_pos: Vec<usize>,
}

impl Assembler {
    pub fn new(space: Arc<MixedSpace>) -> Self {
        let ne = space.num_elements();
        let nd = local_velocity_dofs(&space);
        let nu = space.velocity_dofs();
        let np = space.pressure_dofs();
        let vdofs = |t: usize| -> Vec<usize> {
            space.velocity_nodes(t).iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect()
        };
        let mut vv_pairs = Vec::with_capacity(ne * nd * nd);
        let mut pv_pairs = Vec::with_capacity(ne * 3 * nd);
        let mut pp_pairs = Vec::with_capacity(ne * 9);
        for t in 0..ne {
            let vd = vdofs(t);
            let pd = space.pressure_nodes(t);
            for &i in &vd {
                vv_pairs.extend(vd.iter().map(|&j| (i, j)));
            }
            for &i in pd {
                pv_pairs.extend(vd.iter().map(|&j| (i, j)));
                pp_pairs.extend(pd.iter().map(|&j| (i, j)));
            }
        }
        let vv = Pattern::from_pairs(nu, nu, vv_pairs);
        let pv = Pattern::from_pairs(np, nu, pv_pairs);
        let pp = Pattern::from_pairs(np, np, pp_pairs);
        let mut vv_pos = Vec::with_capacity(ne * nd * nd);
        let mut pv_pos = Vec::with_capacity(ne * 3 * nd);
        let mut pp_pos = Vec::with_capacity(ne * 9);
        for t in 0..ne {
            let vd = vdofs(t);
            let pd = space.pressure_nodes(t);
            for &i in &vd {
                vv_pos.extend(vd.iter().map(|&j| vv.position(i, j).unwrap()));
            }
            for &i in pd {
                pv_pos.extend(vd.iter().map(|&j| pv.position(i, j).unwrap()));
                pp_pos.extend(pd.iter().map(|&j| pp.position(i, j).unwrap()));
            }
        }
        Assembler {
            space,
            vv,
            vv_pos,
            pv,
            pv_pos,
            pp,
            pp_pos,
        }
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    /// Pattern shared by all velocity-velocity matrices of this space.
    pub fn velocity_pattern(&self) -> &Pattern {
        &self.vv
    }

    fn scatter(pattern: &Pattern, positions: &[usize], local: &[f64]) -> SparseMatrix {
        let mut m = pattern.zeros();
        let vals = m.values_mut();
        for (&p, &v) in positions.iter().zip(local) {
            vals[p] += v;
        }
        m
    }

    fn assemble_vv<F>(&self, kernel: F) -> SparseMatrix
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let nd = local_velocity_dofs(&self.space);
        let mut buf = vec![0.0; self.space.num_elements() * nd * nd];
        par::fill_chunks(&mut buf, nd * nd, kernel);
        Self::scatter(&self.vv, &self.vv_pos, &buf)
    }

    pub fn operators(&self) -> OperatorSet {
        let sp = &*self.space;
        let nloc = sp.family().velocity_basis().len();
        let nd = 2 * nloc;
        let vt = sp.velocity_table();
        let pt = sp.pressure_table();
        let weights = sp.rule().weights();

        let mass = self.assemble_vv(|t, out| {
            let area = sp.mesh().geometry()[t].area;
            for (q, &wq) in weights.iter().enumerate() {
                let phi = vt.values(q);
                let w = wq * area;
                for a in 0..nloc {
                    for b in 0..nloc {
                        let v = w * (phi[a] * phi[b]);
                        out[(2 * a) * nd + 2 * b] += v;
                        out[(2 * a + 1) * nd + 2 * b + 1] += v;
                    }
                }
            }
        });
        let stiffness = self.assemble_vv(|t, out| {
            let geom = &sp.mesh().geometry()[t];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for (q, &wq) in weights.iter().enumerate() {
                vt.gradients(q, geom, &mut g[..nloc]);
                let w = wq * geom.area;
                for a in 0..nloc {
                    for b in 0..nloc {
                        let v = w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        out[(2 * a) * nd + 2 * b] += v;
                        out[(2 * a + 1) * nd + 2 * b + 1] += v;
                    }
                }
            }
        });

        let mut buf = vec![0.0; sp.num_elements() * 3 * nd];
        par::fill_chunks(&mut buf, 3 * nd, |t, out| {
            let geom = &sp.mesh().geometry()[t];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for (q, &wq) in weights.iter().enumerate() {
                vt.gradients(q, geom, &mut g[..nloc]);
                let psi = pt.values(q);
                let w = wq * geom.area;
                for i in 0..3 {
                    for b in 0..nloc {
                        out[i * nd + 2 * b] += w * psi[i] * g[b][0];
                        out[i * nd + 2 * b + 1] += w * psi[i] * g[b][1];
                    }
                }
            }
        });
        let divergence = Self::scatter(&self.pv, &self.pv_pos, &buf);

        let mut buf = vec![0.0; sp.num_elements() * 9];
        par::fill_chunks(&mut buf, 9, |t, out| {
            let area = sp.mesh().geometry()[t].area;
            for (q, &wq) in weights.iter().enumerate() {
                let psi = pt.values(q);
                for i in 0..3 {
                    for j in 0..3 {
                        out[3 * i + j] += wq * area * (psi[i] * psi[j]);
                    }
                }
            }
        });
        let pressure_mass = Self::scatter(&self.pp, &self.pp_pos, &buf);

        OperatorSet {
            mass,
            stiffness,
            divergence,
            pressure_mass,
        }
    }

    /// Convection matrix for a convecting field sampled at this space's
    /// quadrature points.
    pub fn convection(&self, w: &QuadField, mode: ConvectionMode) -> Convection {
        match mode {
            ConvectionMode::Skew => Convection::Single(self.advection(w, 0.5)),
            ConvectionMode::Plain => Convection::Single(self.advection(w, 0.0)),
            ConvectionMode::NewtonPair => Convection::Pair(self.advection(w, 0.5), self.reaction_pair(w)),
        }
    }

    /// `((w . grad) phi_j + theta (div w) phi_j, phi_i)`, componentwise.
    pub fn advection(&self, w: &QuadField, theta: f64) -> SparseMatrix {
        let sp = &*self.space;
        let nloc = sp.family().velocity_basis().len();
        let nd = 2 * nloc;
        let vt = sp.velocity_table();
        let weights = sp.rule().weights();
        self.assemble_vv(|t, out| {
            let geom = &sp.mesh().geometry()[t];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for (q, &wq) in weights.iter().enumerate() {
                vt.gradients(q, geom, &mut g[..nloc]);
                let phi = vt.values(q);
                let ev = w.at(t, q);
                let div = ev.gradient[0][0] + ev.gradient[1][1];
                let wt = wq * geom.area;
                for b in 0..nloc {
                    let trial = ev.value[0] * g[b][0] + ev.value[1] * g[b][1] + theta * div * phi[b];
                    for a in 0..nloc {
                        let v = wt * trial * phi[a];
                        out[(2 * a) * nd + 2 * b] += v;
                        out[(2 * a + 1) * nd + 2 * b + 1] += v;
                    }
                }
            }
        })
    }

    /// `((w . grad) phi_j... )` with `theta = 1/2` reaction only:
    /// `1/2 ((div w) phi_j, phi_i)`.
    pub fn divergence_reaction(&self, w: &QuadField) -> SparseMatrix {
        let sp = &*self.space;
        let nloc = sp.family().velocity_basis().len();
        let nd = 2 * nloc;
        let vt = sp.velocity_table();
        let weights = sp.rule().weights();
        self.assemble_vv(|t, out| {
            let area = sp.mesh().geometry()[t].area;
            for (q, &wq) in weights.iter().enumerate() {
                let phi = vt.values(q);
                let ev = w.at(t, q);
                let div = ev.gradient[0][0] + ev.gradient[1][1];
                for a in 0..nloc {
                    for b in 0..nloc {
                        let v = 0.5 * wq * area * div * (phi[a] * phi[b]);
                        out[(2 * a) * nd + 2 * b] += v;
                        out[(2 * a + 1) * nd + 2 * b + 1] += v;
                    }
                }
            }
        })
    }

    /// `b(phi_j, w, phi_i) = ((phi_j . grad) w + 1/2 (div phi_j) w, phi_i)`.
    fn reaction_pair(&self, w: &QuadField) -> SparseMatrix {
        let sp = &*self.space;
        let nloc = sp.family().velocity_basis().len();
        let nd = 2 * nloc;
        let vt = sp.velocity_table();
        let weights = sp.rule().weights();
        self.assemble_vv(|t, out| {
            let geom = &sp.mesh().geometry()[t];
            let mut g = [[0.0; 2]; MAX_LOCAL];
            for (q, &wq) in weights.iter().enumerate() {
                vt.gradients(q, geom, &mut g[..nloc]);
                let phi = vt.values(q);
                let ev = w.at(t, q);
                let wt = wq * geom.area;
                for a in 0..nloc {
                    for b in 0..nloc {
                        for c in 0..2 {
                            for d in 0..2 {
                                // trial phi_b e_d, test phi_a e_c
                                let v = phi[b] * ev.gradient[c][d] + 0.5 * g[b][d] * ev.value[c];
                                out[(2 * a + c) * nd + 2 * b + d] += wt * v * phi[a];
                            }
                        }
                    }
                }
            }
        })
    }

    /// `(g, phi_i)` for vector values given at this space's quadrature points.
    pub fn load_from_values(&self, values: &[[f64; 2]]) -> Vec<f64> {
        let sp = &*self.space;
        let nloc = sp.family().velocity_basis().len();
        let nd = 2 * nloc;
        let vt = sp.velocity_table();
        let weights = sp.rule().weights();
        let nq = weights.len();
        let mut buf = vec![0.0; sp.num_elements() * nd];
        par::fill_chunks(&mut buf, nd, |t, out| {
            let area = sp.mesh().geometry()[t].area;
            for (q, &wq) in weights.iter().enumerate() {
                let phi = vt.values(q);
                let v = values[t * nq + q];
                for a in 0..nloc {
                    out[2 * a] += wq * area * v[0] * phi[a];
                    out[2 * a + 1] += wq * area * v[1] * phi[a];
                }
            }
        });
        let mut f = vec![0.0; sp.velocity_dofs()];
        for t in 0..sp.num_elements() {
            for (a, &k) in sp.velocity_nodes(t).iter().enumerate() {
                f[2 * k] += buf[t * nd + 2 * a];
                f[2 * k + 1] += buf[t * nd + 2 * a + 1];
            }
        }
        f
    }

    /// `(f(x, y), phi_i)` for an analytic source.
    pub fn load<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(f64, f64) -> [f64; 2] + Sync + Send,
    {
        let sp = &*self.space;
        let pts = sp.rule().points();
        let nq = pts.len();
        let values = par::map_collect(sp.num_elements() * nq, |i| {
            let p = sp.mesh().point(i / nq, pts[i % nq]);
            f(p[0], p[1])
        });
        self.load_from_values(&values)
    }

    /// `b(w, w, phi_i)`.
    pub fn trilinear_load(&self, w: &QuadField) -> Vec<f64> {
        let values: Vec<[f64; 2]> = w.as_slice().iter().map(|e| skew_flux(e, e)).collect();
        self.load_from_values(&values)
    }

    /// `((w . grad) w, phi_i)`.
    pub fn advection_load(&self, w: &QuadField) -> Vec<f64> {
        let values: Vec<[f64; 2]> = w.as_slice().iter().map(|e| advect(e, e)).collect();
        self.load_from_values(&values)
    }
}

fn local_velocity_dofs(space: &MixedSpace) -> usize {
    2 * space.family().velocity_basis().len()
}

#[inline]
fn advect(u: &Evaluation, v: &Evaluation) -> [f64; 2] {
    [
        u.value[0] * v.gradient[0][0] + u.value[1] * v.gradient[0][1],
        u.value[0] * v.gradient[1][0] + u.value[1] * v.gradient[1][1],
    ]
}

/// `F(u, v) = (u . grad) v + 1/2 (div u) v` at a point.
#[inline]
fn skew_flux(u: &Evaluation, v: &Evaluation) -> [f64; 2] {
    let a = advect(u, v);
    let div = u.gradient[0][0] + u.gradient[1][1];
    [a[0] + 0.5 * div * v.value[0], a[1] + 0.5 * div * v.value[1]]
}

/// Assembles mass, stiffness, divergence and pressure mass matrices.
pub fn assemble_operators(space: &Arc<MixedSpace>) -> OperatorSet {
    Assembler::new(Arc::clone(space)).operators()
}

/// Convection matrix on `space` for the velocity `w`, which may live on
/// `space` or on an ancestor space of the same family.
pub fn convection_matrix(w: &FeFunction, space: &Arc<MixedSpace>, mode: ConvectionMode) -> Result<Convection> {
    w.require_velocity()?;
    let field = w.sample_on(space)?;
    Ok(Assembler::new(Arc::clone(space)).convection(&field, mode))
}

/// `b(u, v, w) = ((u . grad) v + 1/2 (div u) v, w)`. `v` and `w` share a
/// space; `u` may be defined on an ancestor mesh.
pub fn trilinear_b(u: &FeFunction, v: &FeFunction, w: &FeFunction) -> Result<f64> {
    for f in [u, v, w] {
        f.require_velocity()?;
    }
    let sp = v.space();
    if !Arc::ptr_eq(sp, w.space()) {
        return Err(Error::Domain("trilinear form: v and w must share a space".into()));
    }
    let fu = u.sample_on(sp)?;
    let fv = v.sample_on(sp)?;
    let fw = w.sample_on(sp)?;
    let weights = sp.rule().weights();
    let nq = weights.len();
    let parts = par::map_collect(sp.num_elements(), |t| {
        let area = sp.mesh().geometry()[t].area;
        let mut s = 0.0;
        for (q, &wq) in weights.iter().enumerate() {
            let i = t * nq + q;
            let f = skew_flux(&fu.as_slice()[i], &fv.as_slice()[i]);
            let z = fw.as_slice()[i].value;
            s += wq * area * (f[0] * z[0] + f[1] * z[1]);
        }
        s
    });
    Ok(parts.iter().sum())
}

/// L2-orthogonal projection onto the discretely divergence-free velocities:
/// `(u_h, phi) - (lambda, div phi) = (g, phi)`, `(div u_h, q) = 0`.
pub fn discrete_leray_projection<F>(g: F, space: &Arc<MixedSpace>) -> Result<FeFunction>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync + Send,
{
    let asm = Assembler::new(Arc::clone(space));
    let rhs = asm.load(g);
    project_load(&asm, rhs)
}

/// Discrete Leray projection of a finite element velocity (possibly on an
/// ancestor space).
pub fn discrete_leray_projection_of(u: &FeFunction, space: &Arc<MixedSpace>) -> Result<FeFunction> {
    u.require_velocity()?;
    let asm = Assembler::new(Arc::clone(space));
    let field = u.sample_on(space)?;
    let values: Vec<[f64; 2]> = field.as_slice().iter().map(|e| e.value).collect();
    project_load(&asm, asm.load_from_values(&values))
}

fn project_load(asm: &Assembler, rhs: Vec<f64>) -> Result<FeFunction> {
    let space = asm.space();
    let ops = asm.operators();
    let rhs_p = vec![0.0; space.pressure_dofs()];
    let sol = solve_saddle(&SaddleSystem {
        k: &ops.mass,
        b: &ops.divergence,
        pressure_mass: &ops.pressure_mass,
        dirichlet: space.dirichlet_mask(),
        rhs_u: &rhs,
        rhs_p: &rhs_p,
        gauge: Gauge::LagrangeMean,
    })?;
    FeFunction::from_coefficients(Arc::clone(space), FieldKind::Velocity, sol.velocity)
}

/// `sqrt(u^T M u)` with the consistent mass matrix.
pub fn mass_norm(mass: &SparseMatrix, u: &[f64]) -> f64 {
    mass.bilinear(u, u).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::spaces::ElementFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, fam: ElementFamily) -> Arc<MixedSpace> {
        MixedSpace::new(Mesh::unit_square(n).unwrap(), fam)
    }

    fn random_masked(sp: &Arc<MixedSpace>, rng: &mut ChaCha8Rng) -> FeFunction {
        let mut c: Vec<f64> = (0..sp.velocity_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        sp.apply_mask(&mut c);
        FeFunction::from_coefficients(Arc::clone(sp), FieldKind::Velocity, c).unwrap()
    }

    #[test]
    fn p1_pressure_mass_sums_to_area() {
        let sp = space(4, ElementFamily::TaylorHood2);
        let ops = assemble_operators(&sp);
        let total: f64 = ops.pressure_mass.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_triangle_p1_mass_matches_exact_integrals() {
        // exact: int l_i l_j = area (1 + delta_ij) / 12
        let sp = space(1, ElementFamily::EqualOrderP1);
        let asm = Assembler::new(sp.clone());
        let ops = asm.operators();
        let area = sp.mesh().geometry()[0].area;
        // vertex 2 of the mesh (1,0) belongs to triangle 0 only
        let v = 1;
        assert!((ops.pressure_mass.get(v, v) - area * 2.0 / 12.0).abs() < 1e-15);
        let [a, b, _] = sp.mesh().triangles()[0];
        assert_eq!((a, b), (0, 1));
        // edge (0,1) lies in triangle 0 only
        assert!((ops.pressure_mass.get(0, 1) - area / 12.0).abs() < 1e-15);
    }

    #[test]
    fn stiffness_symmetric_and_annihilates_constants() {
        for fam in [ElementFamily::TaylorHood2, ElementFamily::Mini] {
            let sp = space(4, fam);
            let ops = assemble_operators(&sp);
            assert_eq!(ops.stiffness.asymmetry(), 0.0);
            assert_eq!(ops.mass.asymmetry(), 0.0);
            let ones: Vec<f64> = (0..sp.velocity_dofs()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
            let n_nodal = if fam == ElementFamily::Mini { sp.mesh().num_vertices() } else { sp.num_velocity_nodes() };
            let ones: Vec<f64> = ones.iter().enumerate().map(|(i, &v)| if i / 2 < n_nodal { v } else { 0.0 }).collect();
            let r = ops.stiffness.mul_vec(&ones);
            assert!(r.iter().all(|v| v.abs() < 1e-12));
            // mass integrates the constant field (1, 0)
            assert!((ops.mass.bilinear(&ones, &ones) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_symmetry_of_trilinear_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fam in [ElementFamily::TaylorHood2, ElementFamily::Mini] {
            let sp = space(3, fam);
            for _ in 0..5 {
                let (u, v, w) = (random_masked(&sp, &mut rng), random_masked(&sp, &mut rng), random_masked(&sp, &mut rng));
                let a = trilinear_b(&u, &v, &w).unwrap();
                let b = trilinear_b(&u, &w, &v).unwrap();
                assert!((a + b).abs() < 1e-12, "{fam}: {a} {b}");
                assert!(trilinear_b(&u, &v, &v).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convection_modes_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for fam in [ElementFamily::TaylorHood2, ElementFamily::Mini] {
            let sp = space(3, fam);
            let asm = Assembler::new(sp.clone());
            let w = random_masked(&sp, &mut rng);
            let field = w.sample_on(&sp).unwrap();
            let Convection::Single(skew) = asm.convection(&field, ConvectionMode::Skew) else { panic!() };
            let Convection::Single(plain) = asm.convection(&field, ConvectionMode::Plain) else { panic!() };
            let mut sum = plain.clone();
            sum.add_scaled(1.0, &asm.divergence_reaction(&field));
            assert!(skew.max_abs_diff(&sum) < 1e-12);

            // matrix entries agree with the trilinear form on random vectors
            let (x, y) = (random_masked(&sp, &mut rng), random_masked(&sp, &mut rng));
            let direct = trilinear_b(&w, &x, &y).unwrap();
            assert!((skew.bilinear(y.coefficients(), x.coefficients()) - direct).abs() < 1e-12);
            let Convection::Pair(n1, n2) = asm.convection(&field, ConvectionMode::NewtonPair) else { panic!() };
            let second = trilinear_b(&x, &w, &y).unwrap();
            assert!((n1.bilinear(y.coefficients(), x.coefficients()) - direct).abs() < 1e-12);
            assert!((n2.bilinear(y.coefficients(), x.coefficients()) - second).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_gives_zero_convection() {
        let sp = space(2, ElementFamily::TaylorHood2);
        let w = FeFunction::zeros(sp.clone(), FieldKind::Velocity);
        for mode in [ConvectionMode::Skew, ConvectionMode::Plain, ConvectionMode::NewtonPair] {
            match convection_matrix(&w, &sp, mode).unwrap() {
                Convection::Single(m) => assert_eq!(m.max_abs(), 0.0),
                Convection::Pair(a, b) => assert_eq!(a.max_abs().max(b.max_abs()), 0.0),
            }
        }
    }

    #[test]
    fn convection_skew_quadratic_form_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = space(4, ElementFamily::Mini);
        let w = random_masked(&sp, &mut rng);
        let Convection::Single(n) = convection_matrix(&w, &sp, ConvectionMode::Skew).unwrap() else { panic!() };
        for _ in 0..20 {
            let x = random_masked(&sp, &mut rng);
            let c = x.coefficients();
            assert!(n.bilinear(c, c).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        for fam in [ElementFamily::TaylorHood2, ElementFamily::Mini] {
            let sp = space(4, fam);
            let g = |x: f64, y: f64| [x.sin() * y, x * y * y];
            let p = discrete_leray_projection(g, &sp).unwrap();
            let ops = assemble_operators(&sp);
            let div = ops.divergence.mul_vec(p.coefficients());
            assert!(div.iter().all(|v| v.abs() < 1e-10));
            let again = discrete_leray_projection_of(&p, &sp).unwrap();
            for (a, b) in again.coefficients().iter().zip(p.coefficients()) {
                assert!((a - b).abs() < 1e-10);
            }
            // ||g||_0^2 = int sin^2(x) y^2 + x^2 y^4 = (1/2 - sin(2)/4)/3 + 1/15
            let g_norm = ((0.5 - 2f64.sin() / 4.0) / 3.0 + 1.0 / 15.0).sqrt();
            assert!(mass_norm(&ops.mass, p.coefficients()) <= g_norm + 1e-10);
        }
    }
}
