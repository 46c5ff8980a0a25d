//! Time stepping: the coarse nonlinear Galerkin step and the fine-level
//! linearized steps, with backward Euler or two-step BDF.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{discrete_leray_projection, Assembler, OperatorSet};
use crate::error::{Error, Result};
use crate::saddle::{Gauge, SaddleSolver, SaddleSystem};
use crate::spaces::{FeFunction, FieldKind, MixedSpace};
use crate::sparse::SparseMatrix;

/// Forcing `f(t, x, y)`.
pub type Forcing<'a> = &'a (dyn Fn(f64, f64, f64) -> [f64; 2] + Sync + Send);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    BackwardEuler,
    Bdf2,
}

impl TimeScheme {
    pub const fn name(self) -> &'static str {
        match self {
            TimeScheme::BackwardEuler => "backward_euler",
            TimeScheme::Bdf2 => "bdf2",
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward_euler" | "be" => Ok(TimeScheme::BackwardEuler),
            "bdf2" => Ok(TimeScheme::Bdf2),
            other => Err(Error::Config(format!("unknown time scheme `{other}`"))),
        }
    }
}

/// Convection form of the fine Oseen step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FineConvection {
    /// `((u_H . grad) u, v)`.
    #[default]
    Plain,
    /// `b(u_H, u, v)`.
    Skew,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: TimeScheme,
    pub dt: f64,
    pub steps: usize,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub fine_convection: FineConvection,
    pub gauge: Gauge,
}

impl SchemeConfig {
    /// `steps` uniform steps up to `final_time`.
    pub fn new(scheme: TimeScheme, final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(Error::Config("number of time steps must be positive".into()));
        }
        if scheme == TimeScheme::Bdf2 && steps < 2 {
            return Err(Error::Config("bdf2 needs at least two steps".into()));
        }
        Ok(SchemeConfig {
            scheme,
            dt: final_time / steps as f64,
            steps,
            newton_tol: 1e-10,
            newton_max_iters: 20,
            fine_convection: FineConvection::Plain,
            gauge: Gauge::LagrangeMean,
        })
    }

    pub fn with_fine_convection(mut self, c: FineConvection) -> Self {
        self.fine_convection = c;
        self
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Time of step `n`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Discrete state of one level at one time level.
#[derive(Debug, Clone)]
pub struct LevelState {
    pub velocity: FeFunction,
    /// Unset before the first step.
    pub pressure: Option<FeFunction>,
    /// Velocity at the previous time level (BDF2 only).
    pub previous: Option<FeFunction>,
}

impl LevelState {
    pub fn new(velocity: FeFunction) -> Self {
        LevelState {
            velocity,
            pressure: None,
            previous: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoGridState {
    pub step: usize,
    pub t: f64,
    pub coarse: LevelState,
    /// Absent for coarse-only runs.
    pub fine: Option<LevelState>,
}

/// Assembled time-independent operators and a cached solver for one space.
#[derive(Debug)]
pub struct Level {
    space: Arc<MixedSpace>,
    asm: Assembler,
    ops: OperatorSet,
    solver: SaddleSolver,
}

impl Level {
    pub fn new(space: Arc<MixedSpace>) -> Self {
        let asm = Assembler::new(Arc::clone(&space));
        let ops = asm.operators();
        Level {
            space,
            asm,
            ops,
            solver: SaddleSolver::new(),
        }
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn assembler(&self) -> &Assembler {
        &self.asm
    }

    fn solve(&mut self, cfg: &SchemeConfig, k: &SparseMatrix, rhs_u: &[f64], rhs_p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let sol = self.solver.solve(&SaddleSystem {
            k,
            b: &self.ops.divergence,
            pressure_mass: &self.ops.pressure_mass,
            dirichlet: self.space.dirichlet_mask(),
            rhs_u,
            rhs_p,
            gauge: cfg.gauge,
        })?;
        Ok((sol.velocity, sol.pressure))
    }

    fn velocity(&self, c: Vec<f64>) -> FeFunction {
        FeFunction::from_coefficients(Arc::clone(&self.space), FieldKind::Velocity, c).expect("sized")
    }

    fn pressure(&self, c: Vec<f64>) -> FeFunction {
        FeFunction::from_coefficients(Arc::clone(&self.space), FieldKind::Pressure, c).expect("sized")
    }
}

/// Time-derivative weights: `(c0 u - hist) / dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWeights {
    pub c0: f64,
    pub hist: Vec<f64>,
}

/// Backward Euler when no previous level is available (first step), BDF2
/// coefficients `(3/2, -2, 1/2)` otherwise.
pub fn time_weights(cfg: &SchemeConfig, cur: &LevelState) -> TimeWeights {
    let un = cur.velocity.coefficients();
    match (cfg.scheme, &cur.previous) {
        (TimeScheme::Bdf2, Some(prev)) => TimeWeights {
            c0: 1.5,
            hist: un
                .iter()
                .zip(prev.coefficients())
                .map(|(a, b)| 2.0 * a - 0.5 * b)
                .collect(),
        },
        _ => TimeWeights {
            c0: 1.0,
            hist: un.to_vec(),
        },
    }
}

fn next_state(cfg: &SchemeConfig, cur: &LevelState, velocity: FeFunction, pressure: FeFunction) -> LevelState {
    LevelState {
        velocity,
        pressure: Some(pressure),
        previous: (cfg.scheme == TimeScheme::Bdf2).then(|| cur.velocity.clone()),
    }
}

/// `F + M hist / dt`: the part of the momentum right-hand side that does
/// not depend on the unknown.
fn explicit_rhs(level: &Level, cfg: &SchemeConfig, w: &TimeWeights, f: Forcing<'_>, t: f64) -> Vec<f64> {
    let mut rhs = level.asm.load(|x, y| f(t, x, y));
    let mh = level.ops.mass.mul_vec(&w.hist);
    for (r, m) in rhs.iter_mut().zip(&mh) {
        *r += m / cfg.dt;
    }
    rhs
}

/// Both levels start from the discrete Leray projection of `u0` onto
/// their own space.
pub fn init_state<F>(u0: F, coarse: &Arc<MixedSpace>, fine: Option<&Arc<MixedSpace>>) -> Result<TwoGridState>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync + Send,
{
    if let Some(fine) = fine {
        if fine.mesh().depth_below(coarse.mesh()).is_none() {
            return Err(Error::AncestryViolation);
        }
        if fine.family() != coarse.family() {
            return Err(Error::FamilyMismatch(coarse.family().name(), fine.family().name()));
        }
    }
    let uc = discrete_leray_projection(&u0, coarse)?;
    let uf = match fine {
        Some(f) if Arc::ptr_eq(f, coarse) => Some(uc.clone()),
        Some(f) => Some(discrete_leray_projection(&u0, f)?),
        None => None,
    };
    Ok(TwoGridState {
        step: 0,
        t: 0.0,
        coarse: LevelState::new(uc),
        fine: uf.map(LevelState::new),
    })
}

/// Implicit nonlinear Galerkin step to `t_next` by damped Newton iteration
/// on the velocity-pressure system.
pub fn coarse_step(level: &mut Level, cur: &LevelState, cfg: &SchemeConfig, f: Forcing<'_>, t_next: f64) -> Result<LevelState> {
    let w = time_weights(cfg, cur);
    let rhs0 = explicit_rhs(level, cfg, &w, f, t_next);
    let sp = Arc::clone(&level.space);
    let mask = sp.dirichlet_mask().to_vec();
    let np = sp.pressure_dofs();

    let mut u: Vec<f64> = match (&cur.previous, cfg.scheme) {
        (Some(prev), TimeScheme::Bdf2) => cur
            .velocity
            .coefficients()
            .iter()
            .zip(prev.coefficients())
            .map(|(a, b)| 2.0 * a - b)
            .collect(),
        _ => cur.velocity.coefficients().to_vec(),
    };
    let mut p: Vec<f64> = match &cur.pressure {
        Some(p) => p.coefficients().to_vec(),
        None => vec![0.0; np],
    };

    // momentum residual F - G(u) + B^T p (free rows) and continuity B u
    let residual = |level: &Level, u: &[f64], p: &[f64]| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let uf = level.velocity(u.to_vec());
        let field = uf.sample_on(&level.space)?;
        let g_conv = level.asm.advection(&field, 0.5).mul_vec(u);
        let mu = level.ops.mass.mul_vec(u);
        let au = level.ops.stiffness.mul_vec(u);
        let btp = level.ops.divergence.transpose_mul_vec(p);
        let mut r: Vec<f64> = (0..u.len())
            .map(|i| rhs0[i] - (w.c0 / cfg.dt * mu[i] + au[i] + g_conv[i]) + btp[i])
            .collect();
        for (x, &m) in r.iter_mut().zip(&mask) {
            if m {
                *x = 0.0;
            }
        }
        let bu = level.ops.divergence.mul_vec(u);
        let norm = r.iter().chain(&bu).map(|x| x * x).sum::<f64>().sqrt();
        Ok((r, bu, norm))
    };

    let (_, _, mut res) = residual(level, &u, &p)?;
    let mut iters = 0;
    while iters == 0 || !(res <= cfg.newton_tol) {
        if iters >= cfg.newton_max_iters || !res.is_finite() {
            return Err(Error::NewtonDiverged {
                iterations: iters,
                residual: res,
            });
        }
        iters += 1;
        let uf = level.velocity(u.clone());
        let field = uf.sample_on(&level.space)?;
        let n1 = level.asm.advection(&field, 0.5);
        let g_conv = n1.mul_vec(&u);
        let mut jac = SparseMatrix::linear_combination(&[(w.c0 / cfg.dt, &level.ops.mass), (1.0, &level.ops.stiffness), (1.0, &n1)]);
        let crate::assembly::Convection::Pair(_, n2) = level.asm.convection(&field, crate::assembly::ConvectionMode::NewtonPair) else {
            unreachable!()
        };
        jac.add_scaled(1.0, &n2);
        let mu = level.ops.mass.mul_vec(&u);
        let au = level.ops.stiffness.mul_vec(&u);
        let rhs: Vec<f64> = (0..u.len())
            .map(|i| rhs0[i] - (w.c0 / cfg.dt * mu[i] + au[i] + g_conv[i]))
            .collect();
        let bu = level.ops.divergence.mul_vec(&u);
        let (du, p_new) = level.solve(cfg, &jac, &rhs, &bu)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=5 {
            let ut: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + lambda * d).collect();
            let pt: Vec<f64> = p.iter().zip(&p_new).map(|(a, b)| a + lambda * (b - a)).collect();
            let (_, _, rt) = residual(level, &ut, &pt)?;
            let better = rt < res;
            accepted = Some((ut, pt, rt));
            if better {
                break;
            }
            lambda *= 0.5;
        }
        let (ut, pt, rt) = accepted.expect("at least one trial");
        u = ut;
        p = pt;
        res = rt;
    }
    Ok(next_state(cfg, cur, level.velocity(u), level.pressure(p)))
}

/// Fine-level linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineMethod {
    /// Oseen problem convected by the coarse velocity.
    Oseen,
    /// One Newton step from the coarse velocity.
    Newton,
    /// Stokes problem with the coarse convection on the right-hand side.
    Dpp,
}

/// One linear fine-level step to `t_next`, linearized about the coarse
/// velocity `u_coarse` at the same time level.
pub fn fine_step(
    method: FineMethod,
    level: &mut Level,
    cur: &LevelState,
    u_coarse: &FeFunction,
    cfg: &SchemeConfig,
    f: Forcing<'_>,
    t_next: f64,
) -> Result<LevelState> {
    u_coarse.require_velocity()?;
    let w = time_weights(cfg, cur);
    let mut rhs = explicit_rhs(level, cfg, &w, f, t_next);
    let field = u_coarse.sample_on(&level.space)?;
    let base = [(w.c0 / cfg.dt, &level.ops.mass), (1.0, &level.ops.stiffness)];
    let k = match method {
        FineMethod::Oseen => {
            let theta = match cfg.fine_convection {
                FineConvection::Plain => 0.0,
                FineConvection::Skew => 0.5,
            };
            let n = level.asm.advection(&field, theta);
            SparseMatrix::linear_combination(&[base[0], base[1], (1.0, &n)])
        }
        FineMethod::Newton => {
            let crate::assembly::Convection::Pair(n1, n2) = level.asm.convection(&field, crate::assembly::ConvectionMode::NewtonPair) else {
                unreachable!()
            };
            let extra = level.asm.trilinear_load(&field);
            rhs.iter_mut().zip(&extra).for_each(|(r, e)| *r += e);
            SparseMatrix::linear_combination(&[base[0], base[1], (1.0, &n1), (1.0, &n2)])
        }
        FineMethod::Dpp => {
            let extra = level.asm.advection_load(&field);
            rhs.iter_mut().zip(&extra).for_each(|(r, e)| *r -= e);
            SparseMatrix::linear_combination(&base)
        }
    };
    let zeros = vec![0.0; level.space.pressure_dofs()];
    let (u, p) = level.solve(cfg, &k, &rhs, &zeros)?;
    Ok(next_state(cfg, cur, level.velocity(u), level.pressure(p)))
}

pub fn fine_step_oseen(level: &mut Level, cur: &LevelState, u_coarse: &FeFunction, cfg: &SchemeConfig, f: Forcing<'_>, t_next: f64) -> Result<LevelState> {
    fine_step(FineMethod::Oseen, level, cur, u_coarse, cfg, f, t_next)
}

pub fn fine_step_newton(level: &mut Level, cur: &LevelState, u_coarse: &FeFunction, cfg: &SchemeConfig, f: Forcing<'_>, t_next: f64) -> Result<LevelState> {
    fine_step(FineMethod::Newton, level, cur, u_coarse, cfg, f, t_next)
}

pub fn fine_step_dpp(level: &mut Level, cur: &LevelState, u_coarse: &FeFunction, cfg: &SchemeConfig, f: Forcing<'_>, t_next: f64) -> Result<LevelState> {
    fine_step(FineMethod::Dpp, level, cur, u_coarse, cfg, f, t_next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Coarse nonlinear Galerkin only.
    GalerkinOnly,
    /// Fine Oseen step.
    Alg1,
    /// Fine Newton step.
    Alg2,
    /// Dynamical postprocessing.
    Dpp,
}

impl Algorithm {
    pub const fn name(self) -> &'static str {
        match self {
            Algorithm::GalerkinOnly => "galerkin_only",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Dpp => "dpp",
        }
    }

    pub const fn fine_method(self) -> Option<FineMethod> {
        match self {
            Algorithm::GalerkinOnly => None,
            Algorithm::Alg1 => Some(FineMethod::Oseen),
            Algorithm::Alg2 => Some(FineMethod::Newton),
            Algorithm::Dpp => Some(FineMethod::Dpp),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galerkin_only" => Ok(Algorithm::GalerkinOnly),
            "alg1" => Ok(Algorithm::Alg1),
            "alg2" => Ok(Algorithm::Alg2),
            "dpp" => Ok(Algorithm::Dpp),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Which states a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Record {
    #[default]
    FinalOnly,
    EveryStep,
}

pub struct RunPlan<'a> {
    pub algorithm: Algorithm,
    pub coarse: Arc<MixedSpace>,
    /// Ignored by [`Algorithm::GalerkinOnly`].
    pub fine: Arc<MixedSpace>,
    pub cfg: SchemeConfig,
    pub u0: &'a (dyn Fn(f64, f64) -> [f64; 2] + Sync + Send),
    pub forcing: Forcing<'a>,
    pub record: Record,
}

/// States in time order; the first is the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<TwoGridState>,
}

impl Trajectory {
    pub fn last(&self) -> &TwoGridState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Runs `steps` time steps, advancing the coarse level first and then the
/// fine level at each step.
pub fn run_two_grid(plan: &RunPlan<'_>) -> Result<Trajectory> {
    run_steps(plan, plan.cfg.steps)
}

/// Like [`run_two_grid`] with an explicit step count (zero returns the
/// initial state).
pub fn run_steps(plan: &RunPlan<'_>, steps: usize) -> Result<Trajectory> {
    let method = plan.algorithm.fine_method();
    let fine_space = method.map(|_| &plan.fine);
    let mut state = init_state(plan.u0, &plan.coarse, fine_space)?;
    let mut coarse = Level::new(Arc::clone(&plan.coarse));
    let mut fine = match method {
        Some(_) if Arc::ptr_eq(&plan.fine, &plan.coarse) => Some(Level::new(Arc::clone(&plan.coarse))),
        Some(_) => Some(Level::new(Arc::clone(&plan.fine))),
        None => None,
    };
    let mut snapshots = vec![state.clone()];
    let cfg = &plan.cfg;
    for n in 0..steps {
        let t_next = cfg.time(n + 1);
        let c = coarse_step(&mut coarse, &state.coarse, cfg, plan.forcing, t_next)?;
        if let (Some(m), Some(level), Some(cur)) = (method, fine.as_mut(), state.fine.as_ref()) {
            let next = fine_step(m, level, cur, &c.velocity, cfg, plan.forcing, t_next)?;
            state.fine = Some(next);
        }
        state.coarse = c;
        state.step = n + 1;
        state.t = t_next;
        if plan.record == Record::EveryStep || n + 1 == steps {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory { snapshots })
}

/// `sqrt(u^T M u)`.
pub fn energy(level: &Level, u: &FeFunction) -> f64 {
    crate::assembly::mass_norm(&level.ops.mass, u.coefficients())
}
