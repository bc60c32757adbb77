use nalgebra::{DMatrix, DVector};

use super::basis::{SplineBasis, DEGREE};

/// Gram matrix of basis second derivatives, `P[j][k] = ∫ B_j'' B_k'' du`
/// over the unit interval.
///
/// Kept alongside a square root `R` with `P = RᵀR`: one row per quadrature
/// node holding the weighted second derivatives there.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    matrix: DMatrix<f64>,
    root: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthonormal eigenvectors (columns) and eigenvalues, from the SVD of
    /// the root. Eigenvalues below `1e-10` of the largest are set to exactly
    /// zero: the affine null space.
    pub fn eigen(&self) -> (DMatrix<f64>, DVector<f64>) {
        let svd = self.root.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        let values = svd.singular_values.map(|s| s * s);
        let top = values.amax();
        let values = values.map(|d| if d <= 1e-10 * top { 0.0 } else { d });
        (v_t.transpose(), values)
    }

    /// `cᵀ P c`, evaluated as `‖R c‖²`.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        (&self.root * DVector::from_column_slice(c)).norm_squared()
    }
}

/// Second derivatives of a cubic are linear on each knot span, so the
/// integrand is quadratic there and two Gauss points per span are exact.
pub fn curvature_penalty(basis: &SplineBasis) -> PenaltyMatrix {
    let dim = basis.dimension();
    let knots = basis.unit_knots();
    let spans: Vec<usize> = (DEGREE..dim).filter(|&s| knots[s + 1] > knots[s]).collect();
    let mut root = DMatrix::zeros(2 * spans.len(), dim);
    let offset = 0.5 / 3f64.sqrt();
    for (k, &span) in spans.iter().enumerate() {
        let (a, b) = (knots[span], knots[span + 1]);
        let len = b - a;
        let mid = 0.5 * (a + b);
        let w = (0.5 * len).sqrt();
        for (q, node) in [mid - offset * len, mid + offset * len].into_iter().enumerate() {
            let [_, _, d2] = basis.unit_derivatives::<3>(node);
            for (i, v) in d2.values.iter().enumerate() {
                root[(2 * k + q, d2.first + i)] = w * v;
            }
        }
    }
    let matrix = root.transpose() * &root;
    PenaltyMatrix { matrix, root }
}
