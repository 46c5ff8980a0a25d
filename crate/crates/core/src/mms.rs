//! Manufactured solutions and error norms.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::TriangleRule;
use crate::spaces::{FeFunction, FieldKind};

/// Degree of exactness of the rule used for error norms.
pub const ERROR_QUADRATURE_DEGREE: usize = 10;

/// Exact velocity, pressure and the forcing that makes them solve
/// `u_t - lap u + (u . grad) u + grad p = f` with `u = 0` on the boundary.
pub trait ManufacturedCase: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2];
    /// `gradient[c][d] = d u_c / d x_d`.
    fn velocity_gradient(&self, t: f64, x: f64, y: f64) -> [[f64; 2]; 2];
    /// Zero-mean pressure.
    fn pressure(&self, t: f64, x: f64, y: f64) -> f64;
    fn forcing(&self, t: f64, x: f64, y: f64) -> [f64; 2];
    fn notes(&self) -> &str {
        ""
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsValues {
    pub u: [f64; 2],
    pub p: f64,
    pub f: [f64; 2],
}

pub fn mms_eval(case: &dyn ManufacturedCase, t: f64, x: f64, y: f64) -> MmsValues {
    MmsValues {
        u: case.velocity(t, x, y),
        p: case.pressure(t, x, y),
        f: case.forcing(t, x, y),
    }
}

/// `s(x) = x^2 (1 - x)^2` and its first three derivatives.
#[inline]
fn quartic(x: f64) -> [f64; 4] {
    [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        2.0 - 12.0 * x * (1.0 - x),
        -12.0 + 24.0 * x,
    ]
}

/// Velocity `g(t) curl(s(x) s(y))` for a time factor `g`, with
/// its gradient, Laplacian and convective derivative (all without `g`).
struct Stream {
    u: [f64; 2],
    grad: [[f64; 2]; 2],
    lap: [f64; 2],
    conv: [f64; 2],
}

fn stream(x: f64, y: f64) -> Stream {
    let [sx, dx, ddx, dddx] = quartic(x);
    let [sy, dy, ddy, dddy] = quartic(y);
    Stream {
        u: [sx * dy, -dx * sy],
        grad: [[dx * dy, sx * ddy], [-ddx * sy, -dx * dy]],
        lap: [ddx * dy + sx * dddy, -(dddx * sy + dx * ddy)],
        conv: [sx * dx * (dy * dy - sy * ddy), sy * dy * (dx * dx - sx * ddx)],
    }
}

/// Stream function `g(t) x^2(1-x)^2 y^2(1-y)^2` with `g = 1 + sin(t)/2`,
/// pressure `g(t) (x^3 + y^3 - 1/2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolyStream;

impl PolyStream {
    fn g(t: f64) -> (f64, f64) {
        (1.0 + 0.5 * t.sin(), 0.5 * t.cos())
    }
}

impl ManufacturedCase for PolyStream {
    fn name(&self) -> &str {
        "polystream"
    }

    fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let (g, _) = Self::g(t);
        let s = stream(x, y);
        [g * s.u[0], g * s.u[1]]
    }

    fn velocity_gradient(&self, t: f64, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (g, _) = Self::g(t);
        let s = stream(x, y);
        s.grad.map(|r| r.map(|v| g * v))
    }

    fn pressure(&self, t: f64, x: f64, y: f64) -> f64 {
        Self::g(t).0 * (x.powi(3) + y.powi(3) - 0.5)
    }

    fn forcing(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let (g, dg) = Self::g(t);
        let s = stream(x, y);
        let gp = [3.0 * x * x, 3.0 * y * y];
        std::array::from_fn(|c| dg * s.u[c] - g * s.lap[c] + g * g * s.conv[c] + g * gp[c])
    }

    fn notes(&self) -> &str {
        "polynomial, time-periodic amplitude; smooth in space and time"
    }
}

/// Steady flow with the same stream function (no time factor) and
/// pressure `x - 1/2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StokesPoly;

impl ManufacturedCase for StokesPoly {
    fn name(&self) -> &str {
        "stokes_poly"
    }

    fn velocity(&self, _t: f64, x: f64, y: f64) -> [f64; 2] {
        stream(x, y).u
    }

    fn velocity_gradient(&self, _t: f64, x: f64, y: f64) -> [[f64; 2]; 2] {
        stream(x, y).grad
    }

    fn pressure(&self, _t: f64, x: f64, _y: f64) -> f64 {
        x - 0.5
    }

    fn forcing(&self, _t: f64, x: f64, y: f64) -> [f64; 2] {
        let s = stream(x, y);
        [-s.lap[0] + s.conv[0] + 1.0, -s.lap[1] + s.conv[1]]
    }

    fn notes(&self) -> &str {
        "steady polynomial solution"
    }
}

/// Names accepted by [`case_by_name`].
pub const CASE_NAMES: &[&str] = &["polystream", "stokes_poly"];

pub fn case_by_name(name: &str) -> Result<Arc<dyn ManufacturedCase>> {
    match name {
        "polystream" => Ok(Arc::new(PolyStream)),
        "stokes_poly" => Ok(Arc::new(StokesPoly)),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub vel_l2: f64,
    /// Full H1 norm of the velocity error.
    pub vel_h1: f64,
    pub vel_h1_semi: f64,
    /// L2 norm of the pressure error modulo constants (NaN if no pressure
    /// was given).
    pub p_l2: f64,
}

/// Velocity and pressure errors at time `t`, integrated with a fixed
/// degree-10 rule on the velocity's mesh.
pub fn error_norms(u: &FeFunction, p: Option<&FeFunction>, case: &dyn ManufacturedCase, t: f64) -> Result<ErrorNorms> {
    error_norms_with_degree(u, p, case, t, ERROR_QUADRATURE_DEGREE)
}

pub fn error_norms_with_degree(
    u: &FeFunction,
    p: Option<&FeFunction>,
    case: &dyn ManufacturedCase,
    t: f64,
    degree: usize,
) -> Result<ErrorNorms> {
    u.require_velocity()?;
    let mesh = u.space().mesh();
    let rule = TriangleRule::with_degree(degree);
    let fu = u.sample(mesh, rule.points())?;
    let fp = match p {
        Some(p) => {
            if p.kind() != FieldKind::Pressure {
                return Err(Error::KindMismatch {
                    expected: "pressure",
                    actual: p.kind().name(),
                });
            }
            Some(p.sample(mesh, rule.points())?)
        }
        None => None,
    };
    let quad = |g: &(dyn Fn(usize, usize, [f64; 2]) -> [f64; 3] + Sync)| -> [f64; 3] {
        let parts = par::map_collect(mesh.num_triangles(), |e| {
            let area = mesh.geometry()[e].area;
            let mut acc = [0.0; 3];
            for (q, (&l, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let v = g(e, q, mesh.point(e, l));
                for k in 0..3 {
                    acc[k] += w * area * v[k];
                }
            }
            acc
        });
        parts.iter().fold([0.0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    };
    // [l2^2, semi^2, area]
    let s = quad(&|e, q, pt| {
        let ev = fu.at(e, q);
        let ue = case.velocity(t, pt[0], pt[1]);
        let ge = case.velocity_gradient(t, pt[0], pt[1]);
        let mut l2 = 0.0;
        let mut semi = 0.0;
        for c in 0..2 {
            l2 += (ev.value[c] - ue[c]).powi(2);
            for d in 0..2 {
                semi += (ev.gradient[c][d] - ge[c][d]).powi(2);
            }
        }
        [l2, semi, 1.0]
    });
    let vel_l2 = s[0].sqrt();
    let vel_h1_semi = s[1].sqrt();
    let p_l2 = match &fp {
        Some(fp) => {
            let m = quad(&|e, q, pt| [fp.at(e, q).value[0], case.pressure(t, pt[0], pt[1]), 0.0]);
            let (mh, me) = (m[0] / s[2], m[1] / s[2]);
            let d = quad(&|e, q, pt| {
                let v = (fp.at(e, q).value[0] - mh) - (case.pressure(t, pt[0], pt[1]) - me);
                [v * v, 0.0, 0.0]
            });
            d[0].sqrt()
        }
        None => f64::NAN,
    };
    Ok(ErrorNorms {
        vel_l2,
        vel_h1: (s[0] + s[1]).sqrt(),
        vel_h1_semi,
        p_l2,
    })
}
