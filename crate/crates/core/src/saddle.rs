//! Saddle-point solves with a pressure gauge, and the numerical inf-sup
//! estimator.
//!
//! The assembled system is
//!
//! ```text
//! [  K   -B^T ] [u]   [f]
//! [ -B    0   ] [p] = [g]
//! ```
//!
//! with `B_ij = (q_i, div phi_j)`. Dirichlet rows and columns of `K` are
//! replaced by the identity, masked columns of `B` dropped, and the pressure
//! constant is fixed either by a Lagrange multiplier on the mean or by
//! pinning one node. Both gauges return the zero-mean representative.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Par, Side};

use crate::assembly::assemble_operators;
use crate::error::{Error, Result};
use crate::spaces::MixedSpace;
use crate::sparse::SparseMatrix;

/// Relative residual accepted from the direct solver.
pub const RTOL: f64 = 1e-10;

/// How the pressure constant is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    /// Extra multiplier row enforcing `int p = 0`.
    #[default]
    LagrangeMean,
    /// Pressure node 0 fixed to zero, mean subtracted afterwards.
    PinAndShift,
}

/// Borrowed description of one saddle-point system.
#[derive(Debug, Clone, Copy)]
pub struct SaddleSystem<'a> {
    pub k: &'a SparseMatrix,
    pub b: &'a SparseMatrix,
    pub pressure_mass: &'a SparseMatrix,
    pub dirichlet: &'a [bool],
    pub rhs_u: &'a [f64],
    /// Right-hand side of the `-B u` rows.
    pub rhs_p: &'a [f64],
    pub gauge: Gauge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    /// Zero-mean pressure.
    pub pressure: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    K(usize),
    NegB(usize),
    One,
    Mean(usize),
}

/// Column-compressed layout of the full system for one set of patterns.
#[derive(Debug)]
struct Structure {
    k_cols: Arc<[usize]>,
    b_cols: Arc<[usize]>,
    mask: Vec<bool>,
    gauge: Gauge,
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    slots: Vec<Slot>,
    lu: SymbolicLu<usize>,
}

impl Structure {
    fn matches(&self, sys: &SaddleSystem<'_>) -> bool {
        Arc::ptr_eq(&self.k_cols, &sys.k.pattern().col_indices)
            && Arc::ptr_eq(&self.b_cols, &sys.b.pattern().col_indices)
            && self.gauge == sys.gauge
            && self.mask == sys.dirichlet
    }

    fn build(sys: &SaddleSystem<'_>) -> Result<Self> {
        let nu = sys.k.nrows();
        let np = sys.b.nrows();
        let extra = usize::from(sys.gauge == Gauge::LagrangeMean);
        let n = nu + np + extra;
        let mask = sys.dirichlet;
        let mut entries: Vec<(usize, usize, Slot)> = Vec::with_capacity(sys.k.nnz() + 2 * sys.b.nnz() + 2 * np + nu);
        let mut idx = 0;
        for r in 0..nu {
            for (c, _) in sys.k.row(r) {
                if !mask[r] && !mask[c] {
                    entries.push((c, r, Slot::K(idx)));
                }
                idx += 1;
            }
            if mask[r] {
                entries.push((r, r, Slot::One));
            }
        }
        let pinned = |i: usize| sys.gauge == Gauge::PinAndShift && i == 0;
        let mut idx = 0;
        for i in 0..np {
            for (j, _) in sys.b.row(i) {
                if !mask[j] && !pinned(i) {
                    entries.push((j, nu + i, Slot::NegB(idx)));
                    entries.push((nu + i, j, Slot::NegB(idx)));
                }
                idx += 1;
            }
        }
        match sys.gauge {
            Gauge::PinAndShift => entries.push((nu, nu, Slot::One)),
            Gauge::LagrangeMean => {
                for j in 0..np {
                    entries.push((nu + j, nu + np, Slot::Mean(j)));
                    entries.push((nu + np, nu + j, Slot::Mean(j)));
                }
            }
        }
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Domain("duplicate entry in saddle structure".into()));
        }
        let mut col_ptr = vec![0usize; n + 1];
        for &(c, _, _) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = entries.iter().map(|&(_, r, _)| r).collect();
        let slots = entries.into_iter().map(|(_, _, s)| s).collect();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| Error::Domain(format!("symbolic factorization: {e:?}")))?;
        Ok(Structure {
            k_cols: sys.k.pattern().col_indices,
            b_cols: sys.b.pattern().col_indices,
            mask: mask.to_vec(),
            gauge: sys.gauge,
            n,
            symbolic,
            slots,
            lu,
        })
    }

    fn values(&self, sys: &SaddleSystem<'_>, mean: &[f64]) -> Vec<f64> {
        let (kv, bv) = (sys.k.values(), sys.b.values());
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::K(i) => kv[i],
                Slot::NegB(i) => -bv[i],
                Slot::One => 1.0,
                Slot::Mean(j) => mean[j],
            })
            .collect()
    }

    fn mul(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let (cp, ri) = (self.symbolic.col_ptr(), self.symbolic.row_idx());
        for c in 0..self.n {
            for k in cp[c]..cp[c + 1] {
                y[ri[k]] += vals[k] * x[c];
            }
        }
        y
    }
}

/// Direct saddle solver that reuses the symbolic factorization while the
/// block patterns, mask and gauge stay the same.
#[derive(Debug, Default)]
pub struct SaddleSolver {
    structure: Option<Structure>,
}

impl SaddleSolver {
    pub fn new() -> Self {
        faer::set_global_parallelism(Par::Seq);
        SaddleSolver { structure: None }
    }

    pub fn solve(&mut self, sys: &SaddleSystem<'_>) -> Result<SaddleSolution> {
        let nu = sys.k.nrows();
        let np = sys.b.nrows();
        if sys.k.ncols() != nu || sys.b.ncols() != nu || sys.dirichlet.len() != nu || sys.rhs_u.len() != nu {
            return Err(Error::Domain("velocity block dimensions disagree".into()));
        }
        if sys.rhs_p.len() != np || sys.pressure_mass.nrows() != np {
            return Err(Error::Domain("pressure block dimensions disagree".into()));
        }
        if !sys.k.is_finite() || !sys.rhs_u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("velocity block"));
        }
        if !sys.b.is_finite() || !sys.rhs_p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("pressure block"));
        }
        if !self.structure.as_ref().is_some_and(|s| s.matches(sys)) {
            self.structure = Some(Structure::build(sys)?);
        }
        let st = self.structure.as_ref().expect("built above");
        let ones = vec![1.0; np];
        let mean = sys.pressure_mass.mul_vec(&ones);
        let vals = st.values(sys, &mean);
        let mat = SparseColMatRef::new(st.symbolic.as_ref(), &vals);
        let lu = match Lu::try_new_with_symbolic(st.lu.clone(), mat) {
            Ok(lu) => lu,
            Err(LuError::SymbolicSingular { .. }) => return Err(Error::SingularBlock { block: singular_block(sys) }),
            Err(e) => return Err(Error::Domain(format!("numeric factorization: {e:?}"))),
        };

        let mut rhs = vec![0.0; st.n];
        for i in 0..nu {
            if !sys.dirichlet[i] {
                rhs[i] = sys.rhs_u[i];
            }
        }
        rhs[nu..nu + np].copy_from_slice(sys.rhs_p);
        if sys.gauge == Gauge::PinAndShift {
            rhs[nu] = 0.0;
        }
        let rhs_norm = norm(&rhs);

        let solve = |b: &[f64]| -> Vec<f64> {
            let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
            lu.solve_in_place(m.as_mut());
            (0..b.len()).map(|i| m[(i, 0)]).collect()
        };
        let mut x = solve(&rhs);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularBlock { block: singular_block(sys) });
        }
        let mut res = residual(st, &vals, &rhs, &x);
        for _ in 0..3 {
            if norm(&res) <= RTOL * rhs_norm {
                break;
            }
            let dx = solve(&res);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let r = residual(st, &vals, &rhs, &cand);
            if norm(&r) >= norm(&res) {
                break;
            }
            x = cand;
            res = r;
        }
        let r = norm(&res);
        if r > RTOL * rhs_norm {
            // distinguish rounding at the level of the matrix entries from a
            // genuinely failed solve
            let scale = max_abs(&vals) * max_abs(&x) + max_abs(&rhs);
            if !(max_abs(&res) <= 1e-13 * scale) {
                return Err(Error::Residual {
                    residual: r,
                    tolerance: RTOL * rhs_norm,
                });
            }
        }

        let velocity = x[..nu].to_vec();
        let mut pressure = x[nu..nu + np].to_vec();
        subtract_mean(&mut pressure, &mean);
        Ok(SaddleSolution { velocity, pressure })
    }
}

fn residual(st: &Structure, vals: &[f64], rhs: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = st.mul(vals, x);
    rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Subtracts `(m^T p) / sum(m)` with `m = Mp 1`.
pub fn subtract_mean(p: &mut [f64], mean_weights: &[f64]) {
    let total: f64 = mean_weights.iter().sum();
    let avg = p.iter().zip(mean_weights).map(|(a, b)| a * b).sum::<f64>() / total;
    p.iter_mut().for_each(|v| *v -= avg);
}

/// Names the block responsible for a singular system: the velocity block
/// if the masked `K` alone cannot be factorized, the pressure block
/// otherwise.
fn singular_block(sys: &SaddleSystem<'_>) -> &'static str {
    let nu = sys.k.nrows();
    let mut t = Vec::new();
    for r in 0..nu {
        if sys.dirichlet[r] {
            t.push(faer::sparse::Triplet::new(r, r, 1.0));
            continue;
        }
        for (c, v) in sys.k.row(r) {
            if !sys.dirichlet[c] {
                t.push(faer::sparse::Triplet::new(r, c, v));
            }
        }
    }
    let ok = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(nu, nu, &t)
        .ok()
        .and_then(|m| m.sp_lu().ok())
        .is_some_and(|lu| {
            let mut b = Mat::<f64>::from_fn(nu, 1, |i, _| 1.0 + i as f64);
            lu.solve_in_place(b.as_mut());
            (0..nu).all(|i| b[(i, 0)].is_finite())
        });
    if ok {
        "pressure"
    } else {
        "velocity"
    }
}

/// Solves one saddle system with a fresh factorization.
pub fn solve_saddle(sys: &SaddleSystem<'_>) -> Result<SaddleSolution> {
    SaddleSolver::new().solve(sys)
}

/// Discrete inf-sup constant `beta_h`: square root of the smallest
/// eigenvalue of `B A^{-1} B^T` relative to the pressure mass matrix, with
/// the constant pressure mode removed. Dense; small meshes only.
pub fn infsup_estimate(space: &Arc<MixedSpace>) -> Result<f64> {
    faer::set_global_parallelism(Par::Seq);
    let ops = assemble_operators(space);
    let mask = space.dirichlet_mask();
    let nu = space.velocity_dofs();
    let np = space.pressure_dofs();

    let mut t = Vec::new();
    for r in 0..nu {
        if mask[r] {
            t.push(faer::sparse::Triplet::new(r, r, 1.0));
            continue;
        }
        for (c, v) in ops.stiffness.row(r) {
            if !mask[c] {
                t.push(faer::sparse::Triplet::new(r, c, v));
            }
        }
    }
    let a = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(nu, nu, &t)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Eigen(format!("stiffness factorization: {e:?}")))?;

    // columns of B^T with masked velocity rows removed
    let mut bt = Mat::<f64>::zeros(nu, np);
    for i in 0..np {
        for (j, v) in ops.divergence.row(i) {
            if !mask[j] {
                bt[(j, i)] = v;
            }
        }
    }
    let mut x = bt.clone();
    llt.solve_in_place(x.as_mut());
    let mut s = bt.transpose() * &x;

    let ones = vec![1.0; np];
    let m = ops.pressure_mass.mul_vec(&ones);
    let total: f64 = m.iter().sum();
    const SHIFT: f64 = 10.0;
    for i in 0..np {
        for j in 0..np {
            s[(i, j)] += SHIFT * m[i] * m[j] / total;
        }
    }

    let mp = Mat::<f64>::from_fn(np, np, |i, j| ops.pressure_mass.get(i, j));
    let eig = mp
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("pressure mass: {e:?}")))?;
    let (q, lam) = (eig.U(), eig.S());
    let w = Mat::<f64>::from_fn(np, np, |i, j| q[(i, j)] / lam[j].sqrt());
    let c = w.transpose() * &s * &w;
    let c = Mat::<f64>::from_fn(np, np, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let ev = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("Schur complement: {e:?}")))?;
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min.max(0.0).sqrt())
}
