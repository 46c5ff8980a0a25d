//! Shared helpers for the integration tests: a dense brute-force oracle for
//! single time steps, built from its own quadrature loops and Gaussian
//! elimination, plus small utilities.

#![allow(dead_code)]

use std::sync::Arc;

use twogrid::quadrature::TriangleRule;
use twogrid::spaces::Evaluation;
use twogrid::stepper::{FineConvection, FineMethod, LevelState, SchemeConfig, TimeScheme};
use twogrid::{FeFunction, FieldKind, Mesh, MixedSpace};

pub type Dense = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting. `None` when a pivot falls
/// below `1e-12` times the largest entry.
pub fn dense_solve(mut a: Dense, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Value and gradient of `f` at barycentric point `lambda` of element `t` of
/// `mesh`, which must be the mesh of `f` or a refinement of it.
pub fn eval_on(f: &FeFunction, mesh: &Mesh, t: usize, lambda: [f64; 3]) -> Evaluation {
    let own = f.space().mesh();
    if std::ptr::eq(&**own, mesh) {
        return f.evaluate(t, lambda).unwrap();
    }
    let at = mesh.ancestor_triangles(own).unwrap()[t];
    let p = mesh.point(t, lambda);
    f.evaluate(at, own.barycentric(at, p)).unwrap()
}

fn div(e: &Evaluation) -> f64 {
    e.gradient[0][0] + e.gradient[1][1]
}

/// `(u . grad) v + theta (div u) v`.
fn flux(u: &Evaluation, v: &Evaluation, theta: f64) -> [f64; 2] {
    let d = div(u);
    [0, 1].map(|c| u.value[0] * v.gradient[c][0] + u.value[1] * v.gradient[c][1] + theta * d * v.value[c])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Quadrature data of one element: weights and, per point, the local
/// velocity and pressure basis evaluations.
struct ElementData {
    weights: Vec<f64>,
    lambdas: Vec<[f64; 3]>,
    vel: Vec<Vec<(usize, Evaluation)>>,
    pre: Vec<Vec<(usize, Evaluation)>>,
}

/// Dense brute-force discretization of one space, independent of the
/// library assembly: every integral is a loop over a degree-10 rule with
/// basis functions obtained by evaluating unit coefficient vectors.
pub struct DenseOracle {
    pub space: Arc<MixedSpace>,
    pub mass: Dense,
    pub stiffness: Dense,
    /// `B[k][j] = (psi_k, div phi_j)`.
    pub divergence: Dense,
    pub pressure_weights: Vec<f64>,
    elements: Vec<ElementData>,
}

impl DenseOracle {
    pub fn new(space: &Arc<MixedSpace>) -> Self {
        let rule = TriangleRule::with_degree(10);
        let mesh = space.mesh();
        let nu = space.velocity_dofs();
        let np = space.pressure_dofs();
        let unit = |kind: FieldKind, n: usize, i: usize| {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            FeFunction::from_coefficients(Arc::clone(space), kind, c).unwrap()
        };
        let vunit: Vec<FeFunction> = (0..nu).map(|i| unit(FieldKind::Velocity, nu, i)).collect();
        let punit: Vec<FeFunction> = (0..np).map(|i| unit(FieldKind::Pressure, np, i)).collect();

        let mut elements = Vec::new();
        for t in 0..mesh.num_triangles() {
            let area = mesh.geometry()[t].area;
            let mut vdofs: Vec<usize> = Vec::new();
            for &node in space.velocity_nodes(t) {
                vdofs.push(2 * node);
                vdofs.push(2 * node + 1);
            }
            let pdofs = space.pressure_nodes(t).to_vec();
            let mut data = ElementData {
                weights: Vec::new(),
                lambdas: Vec::new(),
                vel: Vec::new(),
                pre: Vec::new(),
            };
            for (q, l) in rule.points().iter().enumerate() {
                data.weights.push(rule.weights()[q] * area);
                data.lambdas.push(*l);
                data.vel.push(vdofs.iter().map(|&d| (d, vunit[d].evaluate(t, *l).unwrap())).collect());
                data.pre.push(pdofs.iter().map(|&d| (d, punit[d].evaluate(t, *l).unwrap())).collect());
            }
            elements.push(data);
        }

        let mut mass = vec![vec![0.0; nu]; nu];
        let mut stiffness = vec![vec![0.0; nu]; nu];
        let mut divergence = vec![vec![0.0; nu]; np];
        let mut pressure_weights = vec![0.0; np];
        for e in &elements {
            for q in 0..e.weights.len() {
                let w = e.weights[q];
                for (i, pi) in &e.vel[q] {
                    for (j, pj) in &e.vel[q] {
                        mass[*i][*j] += w * dot(pi.value, pj.value);
                        let g: f64 = (0..2)
                            .flat_map(|c| (0..2).map(move |d| (c, d)))
                            .map(|(c, d)| pi.gradient[c][d] * pj.gradient[c][d])
                            .sum();
                        stiffness[*i][*j] += w * g;
                    }
                }
                for (k, psi) in &e.pre[q] {
                    pressure_weights[*k] += w * psi.value[0];
                    for (j, pj) in &e.vel[q] {
                        divergence[*k][*j] += w * psi.value[0] * div(pj);
                    }
                }
            }
        }
        DenseOracle {
            space: Arc::clone(space),
            mass,
            stiffness,
            divergence,
            pressure_weights,
            elements,
        }
    }

    fn free(&self) -> Vec<usize> {
        let mask = self.space.dirichlet_mask();
        (0..mask.len()).filter(|&i| !mask[i]).collect()
    }

    /// `(g(x, y), phi_i)` for every velocity dof.
    pub fn load(&self, g: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mesh = self.space.mesh();
        let mut out = vec![0.0; self.space.velocity_dofs()];
        for (t, e) in self.elements.iter().enumerate() {
            for q in 0..e.weights.len() {
                let p = mesh.point(t, e.lambdas[q]);
                let v = g(p[0], p[1]);
                for (i, pi) in &e.vel[q] {
                    out[*i] += e.weights[q] * dot(v, pi.value);
                }
            }
        }
        out
    }

    /// `(F(t, q), phi_i)` where `F` is evaluated from values and gradients at
    /// each quadrature point of element `t`.
    fn field_load(&self, g: impl Fn(usize, [f64; 3]) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.space.velocity_dofs()];
        for (t, e) in self.elements.iter().enumerate() {
            for q in 0..e.weights.len() {
                let v = g(t, e.lambdas[q]);
                for (i, pi) in &e.vel[q] {
                    out[*i] += e.weights[q] * dot(v, pi.value);
                }
            }
        }
        out
    }

    /// `((u . grad) v + theta (div u) v, phi_i)`.
    pub fn convection_load(&self, u: &FeFunction, v: &FeFunction, theta: f64) -> Vec<f64> {
        let mesh = self.space.mesh();
        self.field_load(|t, l| flux(&eval_on(u, mesh, t, l), &eval_on(v, mesh, t, l), theta))
    }

    /// Matrix of `phi_j -> ((w . grad) phi_j + theta (div w) phi_j, phi_i)`
    /// and, when `newton`, plus `((phi_j . grad) w + 1/2 (div phi_j) w, phi_i)`.
    pub fn convection_matrix(&self, w: &FeFunction, theta: f64, newton: bool) -> Dense {
        let nu = self.space.velocity_dofs();
        let mesh = self.space.mesh();
        let mut m = vec![vec![0.0; nu]; nu];
        for (t, e) in self.elements.iter().enumerate() {
            for q in 0..e.weights.len() {
                let we = eval_on(w, mesh, t, e.lambdas[q]);
                for (j, pj) in &e.vel[q] {
                    let mut f = flux(&we, pj, theta);
                    if newton {
                        let g = flux(pj, &we, 0.5);
                        f = [f[0] + g[0], f[1] + g[1]];
                    }
                    for (i, pi) in &e.vel[q] {
                        m[*i][*j] += e.weights[q] * dot(f, pi.value);
                    }
                }
            }
        }
        m
    }

    /// Solves `K u - B^T p = r`, `B u = 0`, `m^T p = 0` over the free dofs.
    pub fn linear_saddle(&self, k: &Dense, r: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let free = self.free();
        let nf = free.len();
        let np = self.pressure_weights.len();
        let n = nf + np + 1;
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (a_row, &i) in free.iter().enumerate() {
            for (a_col, &j) in free.iter().enumerate() {
                a[a_row][a_col] = k[i][j];
            }
            for kk in 0..np {
                a[a_row][nf + kk] = -self.divergence[kk][i];
                a[nf + kk][a_row] = self.divergence[kk][i];
            }
            b[a_row] = r[i];
        }
        for kk in 0..np {
            a[nf + kk][n - 1] = self.pressure_weights[kk];
            a[n - 1][nf + kk] = self.pressure_weights[kk];
        }
        let x = dense_solve(a, b)?;
        let mut u = vec![0.0; self.space.velocity_dofs()];
        for (a_row, &i) in free.iter().enumerate() {
            u[i] = x[a_row];
        }
        Some((u, x[nf..nf + np].to_vec()))
    }

    fn velocity(&self, c: Vec<f64>) -> FeFunction {
        FeFunction::from_coefficients(Arc::clone(&self.space), FieldKind::Velocity, c).unwrap()
    }
}

fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `(c0, hist)` with the time derivative `(c0 u - hist) / dt`.
fn weights(cfg: &SchemeConfig, cur: &LevelState) -> (f64, Vec<f64>) {
    let un = cur.velocity.coefficients();
    match (cfg.scheme, &cur.previous) {
        (TimeScheme::Bdf2, Some(prev)) => (
            1.5,
            un.iter().zip(prev.coefficients()).map(|(a, b)| 2.0 * a - 0.5 * b).collect(),
        ),
        _ => (1.0, un.to_vec()),
    }
}

/// `F + M hist / dt` and the time-derivative coefficient.
fn explicit_part(o: &DenseOracle, cfg: &SchemeConfig, cur: &LevelState, f: &dyn Fn(f64, f64) -> [f64; 2]) -> (f64, Vec<f64>) {
    let (c0, hist) = weights(cfg, cur);
    let mh = matvec(&o.mass, &hist);
    let load = o.load(f);
    (c0, load.iter().zip(&mh).map(|(l, m)| l + m / cfg.dt).collect())
}

/// Brute-force nonlinear step: Newton's method with a finite-difference
/// Jacobian on the full dense residual, solved by Gaussian elimination.
pub fn coarse_step_oracle(
    o: &DenseOracle,
    cur: &LevelState,
    cfg: &SchemeConfig,
    f: &dyn Fn(f64, f64) -> [f64; 2],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let free = o.free();
    let nf = free.len();
    let np = o.pressure_weights.len();
    let n = nf + np + 1;
    let (c0, rhs) = explicit_part(o, cfg, cur, f);

    let unpack = |z: &[f64]| {
        let mut u = vec![0.0; o.space.velocity_dofs()];
        for (a, &i) in free.iter().enumerate() {
            u[i] = z[a];
        }
        u
    };
    let residual = |z: &[f64]| -> Vec<f64> {
        let u = unpack(z);
        let p = &z[nf..nf + np];
        let uf = o.velocity(u.clone());
        let conv = o.convection_load(&uf, &uf, 0.5);
        let mu = matvec(&o.mass, &u);
        let au = matvec(&o.stiffness, &u);
        let mut r = vec![0.0; n];
        for (a, &i) in free.iter().enumerate() {
            let btp: f64 = (0..np).map(|k| o.divergence[k][i] * p[k]).sum();
            r[a] = c0 / cfg.dt * mu[i] + au[i] + conv[i] - btp - rhs[i];
        }
        for k in 0..np {
            let bu: f64 = free.iter().map(|&i| o.divergence[k][i] * u[i]).sum();
            r[nf + k] = bu + o.pressure_weights[k] * z[n - 1];
        }
        r[n - 1] = (0..np).map(|k| o.pressure_weights[k] * p[k]).sum();
        r
    };

    let mut z = vec![0.0; n];
    for (a, &i) in free.iter().enumerate() {
        z[a] = cur.velocity.coefficients()[i];
    }
    let mut r = residual(&z);
    for _ in 0..40 {
        if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-14 {
            break;
        }
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let h = 1e-7 * (1.0 + z[j].abs());
            let mut zp = z.clone();
            zp[j] += h;
            let rp = residual(&zp);
            for i in 0..n {
                jac[i][j] = (rp[i] - r[i]) / h;
            }
        }
        let dz = dense_solve(jac, r.iter().map(|v| -v).collect())?;
        z.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
        r = residual(&z);
    }
    Some((unpack(&z), z[nf..nf + np].to_vec()))
}

/// Brute-force linear fine step about the coarse velocity `w`.
pub fn fine_step_oracle(
    o: &DenseOracle,
    method: FineMethod,
    cur: &LevelState,
    w: &FeFunction,
    cfg: &SchemeConfig,
    f: &dyn Fn(f64, f64) -> [f64; 2],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let (c0, mut rhs) = explicit_part(o, cfg, cur, f);
    let nu = o.space.velocity_dofs();
    let mut k: Dense = (0..nu)
        .map(|i| (0..nu).map(|j| c0 / cfg.dt * o.mass[i][j] + o.stiffness[i][j]).collect())
        .collect();
    let conv = match method {
        FineMethod::Oseen => {
            let theta = if cfg.fine_convection == FineConvection::Skew { 0.5 } else { 0.0 };
            Some(o.convection_matrix(w, theta, false))
        }
        FineMethod::Newton => {
            let extra = o.convection_load(w, w, 0.5);
            rhs.iter_mut().zip(&extra).for_each(|(r, e)| *r += e);
            Some(o.convection_matrix(w, 0.5, true))
        }
        FineMethod::Dpp => {
            let extra = o.convection_load(w, w, 0.0);
            rhs.iter_mut().zip(&extra).for_each(|(r, e)| *r -= e);
            None
        }
    };
    if let Some(c) = conv {
        for i in 0..nu {
            for j in 0..nu {
                k[i][j] += c[i][j];
            }
        }
    }
    o.linear_saddle(&k, &rhs)
}

/// Low-degree forcing, integrated exactly by every quadrature rule in use.
pub fn simple_forcing(t: f64, x: f64, y: f64) -> [f64; 2] {
    [1.0 + t * x * y, t * (1.0 - x) - 0.5 * y]
}

pub fn unit_square(n: usize) -> Arc<Mesh> {
    Mesh::unit_square(n).unwrap()
}
