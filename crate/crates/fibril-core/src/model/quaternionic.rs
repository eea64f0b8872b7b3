//! Quaternionic model: P = R^4 \ {0} Euclidean with SU(2) acting by right
//! quaternion multiplication, V = R^3 with the adjoint representation,
//! gauge chi^alpha(Q) = Q^{1+alpha}, so the gauge surface is the positive
//! real-quaternion axis.
//!
//! Normalization. The action generators are the unit quaternions e_alpha =
//! (i, j, k), giving structure constants c^gamma_{alpha beta} = 2 eps_{alpha
//! beta gamma}. The adjoint representation compatible with the joint right
//! action (Q, v) -> (Q g, g^{-1} v g) then has generators (Jbar_alpha)^b_c =
//! -2 eps_{b alpha c}, and G_ab = (1/4) I makes the orbit metric come out as
//! det d = r^2 (r^2 + |f|^2)^2 on the gauge surface.

use super::group::{exp_quat, log_quat, quat_mul};
use super::{AdaptedPoint, DerivativeProvider, GroupKind, Model, StructureConstants};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Default)]
pub struct Quaternionic;

impl Quaternionic {
    pub fn new() -> Self {
        Self
    }

    /// Right-multiplication matrices R_alpha with Q e_alpha = R_alpha Q.
    fn right_mul(alpha: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(4, 4);
        let mut e = [0.0; 4];
        e[1 + alpha] = 1.0;
        for b in 0..4 {
            let mut q = [0.0; 4];
            q[b] = 1.0;
            let col = quat_mul(&q, &e);
            for i in 0..4 {
                m[(i, b)] = col[i];
            }
        }
        m
    }
}

impl Model for Quaternionic {
    fn name(&self) -> &str {
        "quaternionic-adjoint"
    }

    fn dim_p(&self) -> usize {
        4
    }

    fn dim_v(&self) -> usize {
        3
    }

    fn group(&self) -> GroupKind {
        GroupKind::Su2
    }

    fn derivative_provider(&self) -> DerivativeProvider {
        DerivativeProvider::Analytic
    }

    fn metric_p(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(4, 4)
    }

    fn metric_v(&self) -> DMatrix<f64> {
        DMatrix::identity(3, 3) * 0.25
    }

    fn metric_p_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(4, 4); 4]
    }

    fn metric_p_hess(&self, _q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        vec![vec![DMatrix::zeros(4, 4); 4]; 4]
    }

    fn action(&self, q: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let g = exp_quat(a);
        let p = quat_mul(&[q[0], q[1], q[2], q[3]], &g);
        DVector::from_column_slice(&p)
    }

    fn action_jacobian_q(&self, _q: &DVector<f64>, a: &DVector<f64>) -> DMatrix<f64> {
        // F(Q, a) = Q g(a) is linear in Q.
        let g = exp_quat(a);
        let mut m = DMatrix::zeros(4, 4);
        for b in 0..4 {
            let mut q = [0.0; 4];
            q[b] = 1.0;
            let col = quat_mul(&q, &g);
            for i in 0..4 {
                m[(i, b)] = col[i];
            }
        }
        m
    }

    fn rep(&self, a: &DVector<f64>) -> DMatrix<f64> {
        // Dbar(a) = exp(a . Jbar): rotation about a-hat by angle -2|a|.
        let r = a.norm();
        if r < 1e-300 {
            return DMatrix::identity(3, 3);
        }
        let n = [a[0] / r, a[1] / r, a[2] / r];
        let phi = 2.0 * r;
        let (s, c) = (phi.sin(), phi.cos());
        let mut hat = DMatrix::zeros(3, 3);
        hat[(0, 1)] = -n[2];
        hat[(0, 2)] = n[1];
        hat[(1, 0)] = n[2];
        hat[(1, 2)] = -n[0];
        hat[(2, 0)] = -n[1];
        hat[(2, 1)] = n[0];
        DMatrix::identity(3, 3) - &hat * s + &hat * &hat * (1.0 - c)
    }

    fn generators(&self) -> Vec<DMatrix<f64>> {
        (0..3)
            .map(|alpha| {
                let mut j = DMatrix::zeros(3, 3);
                let e = [(alpha + 1) % 3, (alpha + 2) % 3];
                // (Jbar_alpha)^b_c = -2 eps_{b alpha c}
                j[(e[0], e[1])] = -2.0 * eps(e[0], alpha, e[1]);
                j[(e[1], e[0])] = -2.0 * eps(e[1], alpha, e[0]);
                j
            })
            .collect()
    }

    fn structure_constants(&self) -> StructureConstants {
        StructureConstants::su2()
    }

    fn killing_p(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let qq = [q[0], q[1], q[2], q[3]];
        let mut k = DMatrix::zeros(4, 3);
        for alpha in 0..3 {
            let mut e = [0.0; 4];
            e[1 + alpha] = 1.0;
            let col = quat_mul(&qq, &e);
            for i in 0..4 {
                k[(i, alpha)] = col[i];
            }
        }
        k
    }

    fn killing_p_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        (0..4)
            .map(|b| {
                let mut m = DMatrix::zeros(4, 3);
                for alpha in 0..3 {
                    let r = Self::right_mul(alpha);
                    for i in 0..4 {
                        m[(i, alpha)] = r[(i, b)];
                    }
                }
                m
            })
            .collect()
    }

    fn killing_p_hess(&self, _q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        vec![vec![DMatrix::zeros(4, 3); 4]; 4]
    }

    fn gauge(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_column_slice(&[q[1], q[2], q[3]])
    }

    fn gauge_grad(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(3, 4);
        g[(0, 1)] = 1.0;
        g[(1, 2)] = 1.0;
        g[(2, 3)] = 1.0;
        g
    }

    fn gauge_hess(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(4, 4); 3]
    }

    fn gauge_is_linear(&self) -> bool {
        true
    }

    fn surface_basis(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0])
    }

    fn chart_ok(&self, q: &DVector<f64>) -> bool {
        q.norm() > self.chart_exit_radius()
    }

    fn split(&self, q: &DVector<f64>, f: &DVector<f64>) -> AdaptedPoint {
        let r = q.norm();
        let g = [q[0] / r, q[1] / r, q[2] / r, q[3] / r];
        let a = log_quat(&g);
        let mut q_star = DVector::zeros(4);
        q_star[0] = r;
        let f_tilde = self.rep(&-a.clone()) * f;
        AdaptedPoint { q_star, f_tilde, a }
    }
}

fn eps(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_action_and_rep() {
        let m = Quaternionic::new();
        let q = DVector::from_column_slice(&[1.3, 0.2, -0.4, 0.7]);
        let a0 = DVector::zeros(3);
        assert_abs_diff_eq!(m.action(&q, &a0), q, epsilon = 1e-15);
        assert_abs_diff_eq!(m.rep(&a0), DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn killing_at_axis_point_is_scaled_imaginary_directions() {
        let m = Quaternionic::new();
        let r = 1.7;
        let q = DVector::from_column_slice(&[r, 0.0, 0.0, 0.0]);
        let k = m.killing_p(&q);
        for alpha in 0..3 {
            for i in 0..4 {
                let expect = if i == 1 + alpha { r } else { 0.0 };
                assert_abs_diff_eq!(k[(i, alpha)], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn generator_commutators_match_negative_structure_constants() {
        let m = Quaternionic::new();
        let j = m.generators();
        let c = m.structure_constants();
        for alpha in 0..3 {
            for beta in 0..3 {
                let comm = &j[alpha] * &j[beta] - &j[beta] * &j[alpha];
                let mut expect = DMatrix::zeros(3, 3);
                for gamma in 0..3 {
                    expect += &j[gamma] * (-c.get(gamma, alpha, beta));
                }
                assert_abs_diff_eq!(comm, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rep_derivative_matches_generators() {
        let m = Quaternionic::new();
        let h = 1e-6;
        for alpha in 0..3 {
            let mut ap = DVector::zeros(3);
            let mut am = DVector::zeros(3);
            ap[alpha] += h;
            am[alpha] -= h;
            let fd = (m.rep(&ap) - m.rep(&am)) / (2.0 * h);
            assert_abs_diff_eq!(fd, m.generators()[alpha], epsilon = 1e-9);
        }
    }

    #[test]
    fn split_assemble_round_trip() {
        let m = Quaternionic::new();
        let q = DVector::from_column_slice(&[0.9, 0.3, -0.2, 0.5]);
        let f = DVector::from_column_slice(&[0.4, -0.7, 0.1]);
        let p = m.split(&q, &f);
        assert_abs_diff_eq!(m.gauge(&p.q_star).norm(), 0.0, epsilon = 1e-12);
        let (q2, f2) = m.assemble(&p);
        assert_abs_diff_eq!(q2, q, epsilon = 1e-12);
        assert_abs_diff_eq!(f2, f, epsilon = 1e-12);
    }
}
