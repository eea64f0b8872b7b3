//! Planar rotor: P = R^2 \ {0} Euclidean, G = SO(2) acting by rotation on
//! both P and V = R^2, gauge chi(Q) = Q^2 (second coordinate), so the gauge
//! surface is the positive x-axis and the free surface coordinate is x = |Q|.

use super::{AdaptedPoint, DerivativeProvider, StepCoeffs, GroupKind, Model, StructureConstants};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct PlanarRotor {
    /// V(Q, f) = v_const + v_coupling * (Q . f); both terms are invariant
    /// because P and V rotate together.
    pub v_const: f64,
    pub v_coupling: f64,
}

impl PlanarRotor {
    pub fn new() -> Self {
        Self {
            v_const: 0.0,
            v_coupling: 0.0,
        }
    }

    pub fn with_potential(v_const: f64, v_coupling: f64) -> Self {
        Self { v_const, v_coupling }
    }

    fn rot(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    }
}

impl Default for PlanarRotor {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for PlanarRotor {
    fn name(&self) -> &str {
        "planar-rotor"
    }

    fn dim_p(&self) -> usize {
        2
    }

    fn dim_v(&self) -> usize {
        2
    }

    fn group(&self) -> GroupKind {
        GroupKind::So2
    }

    fn derivative_provider(&self) -> DerivativeProvider {
        DerivativeProvider::Analytic
    }

    fn metric_p(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn metric_v(&self) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn metric_p_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]
    }

    fn metric_p_hess(&self, _q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        vec![vec![DMatrix::zeros(2, 2); 2]; 2]
    }

    fn action(&self, q: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        Self::rot(a[0]) * q
    }

    fn action_jacobian_q(&self, _q: &DVector<f64>, a: &DVector<f64>) -> DMatrix<f64> {
        Self::rot(a[0])
    }

    fn rep(&self, a: &DVector<f64>) -> DMatrix<f64> {
        Self::rot(a[0])
    }

    fn generators(&self) -> Vec<DMatrix<f64>> {
        vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])]
    }

    fn structure_constants(&self) -> StructureConstants {
        StructureConstants::zeros(1)
    }

    fn killing_p(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[-q[1], q[0]])
    }

    fn killing_p_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[-1.0, 0.0]),
        ]
    }

    fn killing_p_hess(&self, _q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        vec![vec![DMatrix::zeros(2, 1); 2]; 2]
    }

    fn gauge(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, q[1])
    }

    fn gauge_grad(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0])
    }

    fn gauge_hess(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(2, 2)]
    }

    fn gauge_is_linear(&self) -> bool {
        true
    }

    fn surface_basis(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0])
    }

    fn potential(&self, q: &DVector<f64>, f: &DVector<f64>) -> f64 {
        self.v_const + self.v_coupling * q.dot(f)
    }

    fn chart_ok(&self, q: &DVector<f64>) -> bool {
        q.norm() > self.chart_exit_radius()
    }

    fn split(&self, q: &DVector<f64>, f: &DVector<f64>) -> AdaptedPoint {
        let a = q[1].atan2(q[0]);
        let r = q.norm();
        AdaptedPoint {
            q_star: DVector::from_column_slice(&[r, 0.0]),
            f_tilde: Self::rot(-a) * f,
            a: DVector::from_element(1, a),
        }
    }

    fn fast_coeffs(&self, q_star: &DVector<f64>, ft: &DVector<f64>) -> Option<StepCoeffs> {
        let x = q_star[0];
        let (u, w) = (ft[0], ft[1]);
        let d = x * x + u * u + w * w;
        let x2 = x * x;
        Some(StepCoeffs {
            drift_q: DVector::from_column_slice(&[0.5 / x, 0.0]),
            drift_v: DVector::from_column_slice(&[-0.5 * u / x2, -0.5 * w / x2]),
            j2_q: DVector::from_column_slice(&[0.5 * x / d, 0.0]),
            j2_v: DVector::from_column_slice(&[0.5 * u / d, 0.5 * w / d]),
            noise_qq: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            noise_vq: DMatrix::from_row_slice(2, 2, &[0.0, w / x, 0.0, -u / x]),
            noise_vv: DMatrix::identity(2, 2),
            drift_g: DVector::zeros(1),
            noise_gq: DMatrix::from_row_slice(1, 2, &[0.0, 1.0 / x]),
            sigma_q: DVector::from_column_slice(&[2.0 * x / d, 0.0]),
            sigma_v: DVector::from_column_slice(&[2.0 * u / d, 2.0 * w / d]),
            grad_sigma_sq: 4.0 / d,
            weight_integrand: 3.0 / d,
            sigma: d.ln(),
            det_d: d,
            g_lam_lam: DMatrix::from_element(1, 1, 1.0 / x2),
            oexp_drift_lin: DVector::zeros(1),
            oexp_noise_q: DMatrix::from_row_slice(1, 2, &[0.0, 1.0 / x - x / d]),
            oexp_noise_v: DMatrix::from_row_slice(1, 2, &[w / d, -u / d]),
        })
    }
}
