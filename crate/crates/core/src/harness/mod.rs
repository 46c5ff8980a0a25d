//! Convergence studies: one simulation per fine level, errors at the final
//! time, observed rates and report files.

pub mod plan;
pub mod report;

use std::sync::Arc;
use std::time::Instant;

pub use plan::{couple_h, Coupling, DtRule, StudyPlan};
pub use report::{emit_report, parse_csv, to_csv, to_svg, ReportFormat, CSV_HEADER};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::mms::{case_by_name, error_norms, ManufacturedCase};
use crate::par;
use crate::spaces::{ElementFamily, MixedSpace};
use crate::stepper::{run_two_grid, Algorithm, FineConvection, Record, RunPlan, SchemeConfig, TimeScheme};

/// Least-squares slope of `log(error)` against `log(size)`.
pub fn estimate_rate(errors: &[f64], sizes: &[f64]) -> Result<f64> {
    if errors.len() != sizes.len() || errors.len() < 2 {
        return Err(Error::Domain("rate estimation needs two or more paired values".into()));
    }
    if errors.iter().chain(sizes).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("rate estimation needs positive finite values".into()));
    }
    if sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("sizes must be strictly decreasing".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    if x.len() == 2 {
        return Ok((y[0] - y[1]) / (x[0] - x[1]));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Rates for several error columns sharing the same sizes.
pub fn estimate_rates(columns: &[Vec<f64>], sizes: &[f64]) -> Result<Vec<f64>> {
    columns.iter().map(|c| estimate_rate(c, sizes)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    /// Fine subdivisions.
    pub n: usize,
    pub coarse_n: usize,
    pub steps: usize,
    pub h: f64,
    pub coarse_h: f64,
    pub dt: f64,
    pub vel_l2: f64,
    pub vel_h1: f64,
    pub p_l2: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub vel_l2: f64,
    pub vel_h1: f64,
    pub p_l2: f64,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub plan: StudyPlan,
    pub rows: Vec<StudyRow>,
    /// Present when there are at least three rows.
    pub rates: Option<Rates>,
    pub version: &'static str,
}

impl StudyReport {
    /// Whether every error column strictly decreases from row to row.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].vel_l2 < w[0].vel_l2 && w[1].vel_h1 < w[0].vel_h1 && w[1].p_l2 < w[0].p_l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StudyOptions {
    /// Run cells one after another and write zero wall times, so that
    /// the CSV is reproducible bit for bit.
    pub serial: bool,
    pub fine_convection: FineConvection,
}

/// One simulation of a study.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub algorithm: Algorithm,
    pub family: ElementFamily,
    pub case: Arc<dyn ManufacturedCase>,
    pub n: usize,
    /// Equal to `n` for coarse-only runs.
    pub coarse_n: usize,
    pub scheme: TimeScheme,
    pub steps: usize,
    pub final_time: f64,
    pub fine_convection: FineConvection,
}

/// Runs one cell and measures the errors of the finest computed level at
/// the final time.
pub fn run_cell(spec: &CellSpec) -> Result<StudyRow> {
    let start = Instant::now();
    if spec.coarse_n == 0 || !spec.n.is_multiple_of(spec.coarse_n) || !(spec.n / spec.coarse_n).is_power_of_two() {
        return Err(Error::ChainTooShort(format!("n = {} is not a dyadic refinement of {}", spec.n, spec.coarse_n)));
    }
    let levels = (spec.n / spec.coarse_n).trailing_zeros() as usize;
    let chain = Mesh::refined_chain(spec.coarse_n, levels)?;
    let coarse = MixedSpace::new(Arc::clone(&chain[0]), spec.family);
    let fine = if levels == 0 {
        Arc::clone(&coarse)
    } else {
        MixedSpace::new(Arc::clone(chain.last().expect("non-empty chain")), spec.family)
    };
    let cfg = SchemeConfig::new(spec.scheme, spec.final_time, spec.steps)?.with_fine_convection(spec.fine_convection);
    let case = Arc::clone(&spec.case);
    let forcing = move |t: f64, x: f64, y: f64| case.forcing(t, x, y);
    let case0 = Arc::clone(&spec.case);
    let u0 = move |x: f64, y: f64| case0.velocity(0.0, x, y);
    let plan = RunPlan {
        algorithm: spec.algorithm,
        coarse,
        fine,
        cfg,
        u0: &u0,
        forcing: &forcing,
        record: Record::FinalOnly,
    };
    let traj = run_two_grid(&plan)?;
    let last = traj.last();
    let level = last.fine.as_ref().unwrap_or(&last.coarse);
    let t = cfg.final_time();
    let e = error_norms(&level.velocity, level.pressure.as_ref(), spec.case.as_ref(), t)?;
    if ![e.vel_l2, e.vel_h1, e.p_l2].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("error norms"));
    }
    let measured_n = if spec.algorithm == Algorithm::GalerkinOnly { spec.coarse_n } else { spec.n };
    Ok(StudyRow {
        n: measured_n,
        coarse_n: spec.coarse_n,
        steps: spec.steps,
        h: 1.0 / measured_n as f64,
        coarse_h: 1.0 / spec.coarse_n as f64,
        dt: cfg.dt,
        vel_l2: e.vel_l2,
        vel_h1: e.vel_h1,
        p_l2: e.p_l2,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Cell for fine level `n` of a plan.
pub fn cell_for(plan: &StudyPlan, n: usize, fine_convection: FineConvection) -> Result<CellSpec> {
    let coarse_n = match plan.algorithm {
        Algorithm::GalerkinOnly => n,
        _ => couple_h(n, plan.coupling)?,
    };
    Ok(CellSpec {
        algorithm: plan.algorithm,
        family: plan.family,
        case: case_by_name(&plan.case)?,
        n,
        coarse_n,
        scheme: plan.scheme,
        steps: plan.dt_rule.steps(n),
        final_time: plan.final_time,
        fine_convection,
    })
}

/// Runs every level of a plan. Cell failures are reported with the level.
pub fn run_convergence_study(plan: &StudyPlan, opts: StudyOptions) -> Result<StudyReport> {
    plan.validate()?;
    let cells: Vec<CellSpec> = plan
        .levels
        .iter()
        .map(|&n| cell_for(plan, n, opts.fine_convection))
        .collect::<Result<_>>()?;
    let run = |c: &CellSpec| {
        run_cell(c).map_err(|e| Error::Cell {
            n: c.n,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<StudyRow>> = if opts.serial {
        cells.iter().map(run).collect()
    } else {
        par::map_slice(&cells, run)
    };
    let mut rows: Vec<StudyRow> = results.into_iter().collect::<Result<_>>()?;
    if opts.serial {
        rows.iter_mut().for_each(|r| r.wall_s = 0.0);
    }
    let rates = rates_of(&rows)?;
    Ok(StudyReport {
        plan: plan.clone(),
        rows,
        rates,
        version: env!("CARGO_PKG_VERSION"),
    })
}

/// Rates from the values as written to the CSV.
pub fn rates_of(rows: &[StudyRow]) -> Result<Option<Rates>> {
    if rows.len() < 3 {
        return Ok(None);
    }
    let r = report::round12;
    let h: Vec<f64> = rows.iter().map(|x| r(x.h)).collect();
    let col = |f: fn(&StudyRow) -> f64| -> Result<f64> {
        let e: Vec<f64> = rows.iter().map(|x| r(f(x))).collect();
        estimate_rate(&e, &h)
    };
    Ok(Some(Rates {
        vel_l2: col(|x| x.vel_l2)?,
        vel_h1: col(|x| x.vel_h1)?,
        p_l2: col(|x| x.p_l2)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_geometric_data() {
        let r = estimate_rate(&[4.0, 1.0, 0.25], &[1.0, 0.5, 0.25]).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
        assert_eq!(estimate_rate(&[3.0, 3.0, 3.0], &[1.0, 0.5, 0.25]).unwrap(), 0.0);
        let two = estimate_rate(&[1.0, 0.125], &[0.5, 0.25]).unwrap();
        assert!((two - 3.0).abs() < 1e-14);
    }

    #[test]
    fn bad_inputs() {
        assert!(estimate_rate(&[1.0], &[1.0]).is_err());
        assert!(estimate_rate(&[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(estimate_rate(&[1.0, 1.0], &[0.5, 1.0]).is_err());
        assert!(estimate_rate(&[1.0, 1.0, 2.0], &[1.0, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn noisy_power_law_recovers_exponent(
            p in 0.5f64..4.0,
            c in 0.01f64..100.0,
            noise in prop::collection::vec(-0.01f64..0.01, 4),
        ) {
            let sizes = [0.125f64, 0.0625, 0.03125, 0.015625];
            let errs: Vec<f64> = sizes.iter().zip(&noise).map(|(h, e)| c * h.powf(p) * (1.0 + e)).collect();
            let r = estimate_rate(&errs, &sizes).unwrap();
            prop_assert!((r - p).abs() <= 0.05);
        }

        #[test]
        fn rate_is_scale_invariant(scale in 1e-3f64..1e3) {
            let sizes = [1.0, 0.5, 0.25, 0.125];
            let errs = [1.0, 0.3, 0.11, 0.02];
            let a = estimate_rate(&errs, &sizes).unwrap();
            let scaled: Vec<f64> = errs.iter().map(|e| e * scale).collect();
            let b = estimate_rate(&scaled, &sizes).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
