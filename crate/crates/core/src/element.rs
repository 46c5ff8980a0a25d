//! Local shape functions written in barycentric coordinates.

use crate::mesh::ElementGeometry;

/// Largest number of local shape functions of any supported basis.
pub const MAX_LOCAL: usize = 6;

/// Scalar local bases on a triangle.
///
/// Node ordering: the three vertices first; for [`LocalBasis::P2`] the
/// midpoints of the edges opposite vertex 0, 1, 2 follow; for
/// [`LocalBasis::P1Bubble`] the interior bubble `27 l0 l1 l2` is last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalBasis {
    P1,
    P2,
    P1Bubble,
}

impl LocalBasis {
    pub const fn len(self) -> usize {
        match self {
            LocalBasis::P1 => 3,
            LocalBasis::P2 => 6,
            LocalBasis::P1Bubble => 4,
        }
    }

    /// Values and derivatives with respect to each barycentric coordinate,
    /// the three coordinates treated as independent variables.
    pub fn eval(self, l: [f64; 3], values: &mut [f64], dl: &mut [[f64; 3]]) {
        match self {
            LocalBasis::P1 => {
                for i in 0..3 {
                    values[i] = l[i];
                    dl[i] = [0.0; 3];
                    dl[i][i] = 1.0;
                }
            }
            LocalBasis::P2 => {
                for i in 0..3 {
                    values[i] = l[i] * (2.0 * l[i] - 1.0);
                    dl[i] = [0.0; 3];
                    dl[i][i] = 4.0 * l[i] - 1.0;
                }
                for k in 0..3 {
                    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                    values[3 + k] = 4.0 * l[i] * l[j];
                    dl[3 + k] = [0.0; 3];
                    dl[3 + k][i] = 4.0 * l[j];
                    dl[3 + k][j] = 4.0 * l[i];
                }
            }
            LocalBasis::P1Bubble => {
                for i in 0..3 {
                    values[i] = l[i];
                    dl[i] = [0.0; 3];
                    dl[i][i] = 1.0;
                }
                values[3] = 27.0 * l[0] * l[1] * l[2];
                dl[3] = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
            }
        }
    }

    /// Barycentric coordinates of the local nodal points (the bubble is
    /// attached to the barycenter).
    pub fn nodes(self) -> &'static [[f64; 3]] {
        const T: f64 = 1.0 / 3.0;
        match self {
            LocalBasis::P1 => &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            LocalBasis::P2 => &[
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.5, 0.5],
                [0.5, 0.0, 0.5],
                [0.5, 0.5, 0.0],
            ],
            LocalBasis::P1Bubble => &[
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [T, T, T],
            ],
        }
    }
}

/// Physical gradient from barycentric derivatives.
#[inline]
pub fn physical_gradient(dl: &[f64; 3], geom: &ElementGeometry) -> [f64; 2] {
    let g = &geom.grad_lambda;
    [
        dl[0] * g[0][0] + dl[1] * g[1][0] + dl[2] * g[2][0],
        dl[0] * g[0][1] + dl[1] * g[1][1] + dl[2] * g[2][1],
    ]
}

/// A basis tabulated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    basis: LocalBasis,
    n_points: usize,
    values: Vec<f64>,
    dl: Vec<[f64; 3]>,
}

impl BasisTable {
    pub fn new(basis: LocalBasis, points: &[[f64; 3]]) -> Self {
        let n = basis.len();
        let mut values = vec![0.0; n * points.len()];
        let mut dl = vec![[0.0; 3]; n * points.len()];
        for (q, &p) in points.iter().enumerate() {
            basis.eval(p, &mut values[q * n..(q + 1) * n], &mut dl[q * n..(q + 1) * n]);
        }
        BasisTable {
            basis,
            n_points: points.len(),
            values,
            dl,
        }
    }

    pub fn basis(&self) -> LocalBasis {
        self.basis
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Shape function values at point `q`.
    #[inline]
    pub fn values(&self, q: usize) -> &[f64] {
        let n = self.basis.len();
        &self.values[q * n..(q + 1) * n]
    }

    /// Barycentric derivatives at point `q`.
    #[inline]
    pub fn dl(&self, q: usize) -> &[[f64; 3]] {
        let n = self.basis.len();
        &self.dl[q * n..(q + 1) * n]
    }

    /// Physical gradients at point `q` on an element.
    #[inline]
    pub fn gradients(&self, q: usize, geom: &ElementGeometry, out: &mut [[f64; 2]]) {
        for (o, d) in out.iter_mut().zip(self.dl(q)) {
            *o = physical_gradient(d, geom);
        }
    }
}
