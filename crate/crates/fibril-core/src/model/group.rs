//! Group charts for the two compact groups the built-in models use.
//!
//! Both groups are parametrized by canonical coordinates of the first kind
//! (the exponential map). For SU(2) the chart is the ball |a| <= pi in R^3,
//! with the right-invariant frame matrices in closed Rodrigues form.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GroupKind {
    So2,
    Su2,
}

impl GroupKind {
    pub fn dim(self) -> usize {
        match self {
            GroupKind::So2 => 1,
            GroupKind::Su2 => 3,
        }
    }

    /// Coordinate Haar volume of the chart, integral of |det u_bar| over the chart.
    pub fn chart_volume(self) -> f64 {
        match self {
            GroupKind::So2 => std::f64::consts::TAU,
            // int_{|a|<=pi} (sin|a|/|a|)^2 d^3a = 4 pi int_0^pi sin^2 r dr = 2 pi^2
            GroupKind::Su2 => 2.0 * std::f64::consts::PI * std::f64::consts::PI,
        }
    }

    pub fn compose(self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self {
            GroupKind::So2 => DVector::from_element(1, wrap_angle(a[0] + b[0])),
            GroupKind::Su2 => {
                let q = quat_mul(&exp_quat(a), &exp_quat(b));
                log_quat(&q)
            }
        }
    }

    pub fn inverse(self, a: &DVector<f64>) -> DVector<f64> {
        -a.clone()
    }

    pub fn wrap(self, a: &DVector<f64>) -> DVector<f64> {
        match self {
            GroupKind::So2 => DVector::from_element(1, wrap_angle(a[0])),
            GroupKind::Su2 => a.clone(),
        }
    }

    pub fn chart_ok(self, a: &DVector<f64>) -> bool {
        match self {
            GroupKind::So2 => a[0].is_finite(),
            GroupKind::Su2 => a.norm() < 0.98 * std::f64::consts::PI,
        }
    }

    /// u_bar(a): right frame matrix, d/da^mu Dbar(a) = Dbar(a) Jbar_beta u_bar^beta_mu.
    pub fn u_bar(self, a: &DVector<f64>) -> DMatrix<f64> {
        match self {
            GroupKind::So2 => DMatrix::identity(1, 1),
            GroupKind::Su2 => {
                let (n, phi) = axis_angle(a);
                // ubar = I + (1-cos phi)/phi N + (1 - sin phi/phi) N^2
                let (c1, c2) = if phi < 1e-6 {
                    (phi / 2.0 - phi.powi(3) / 24.0, phi * phi / 6.0)
                } else {
                    ((1.0 - phi.cos()) / phi, 1.0 - phi.sin() / phi)
                };
                rodrigues(&n, 1.0, c1, c2)
            }
        }
    }

    /// v_bar = u_bar^{-1}, in closed form.
    pub fn v_bar(self, a: &DVector<f64>) -> DMatrix<f64> {
        match self {
            GroupKind::So2 => DMatrix::identity(1, 1),
            GroupKind::Su2 => {
                let (n, phi) = axis_angle(a);
                rodrigues(&n, 1.0, -phi / 2.0, cot_defect(phi))
            }
        }
    }

    /// Adjoint representation rho(a) = u_bar(a) u(a)^{-1}.
    pub fn adjoint(self, a: &DVector<f64>) -> DMatrix<f64> {
        match self {
            GroupKind::So2 => DMatrix::identity(1, 1),
            GroupKind::Su2 => {
                let (n, phi) = axis_angle(a);
                rodrigues(&n, 1.0, phi.sin(), 1.0 - phi.cos())
            }
        }
    }

    /// Left frame matrix u(a) = u_bar(a)^T for these charts.
    pub fn u_left(self, a: &DVector<f64>) -> DMatrix<f64> {
        self.u_bar(a).transpose()
    }

    /// Derivatives of v_bar with respect to the group coordinates.
    pub fn v_bar_grad(self, a: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match self {
            GroupKind::So2 => vec![DMatrix::zeros(1, 1)],
            GroupKind::Su2 => su2_v_bar_grad(a),
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU);
    if x == 0.0 {
        x = std::f64::consts::TAU;
    }
    x - std::f64::consts::PI
}

fn axis_angle(a: &DVector<f64>) -> (Vector3<f64>, f64) {
    let r = a.norm();
    let n = if r < 1e-300 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(a[0], a[1], a[2]) / r
    };
    (n, 2.0 * r)
}

fn hat(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0)
}

fn rodrigues(n: &Vector3<f64>, c0: f64, c1: f64, c2: f64) -> DMatrix<f64> {
    let nh = hat(n);
    let m = Matrix3::identity() * c0 + nh * c1 + nh * nh * c2;
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// 1 - (phi/2) cot(phi/2), series-stabilized near 0.
fn cot_defect(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        p2 / 12.0 + p2 * p2 / 720.0 + p2 * p2 * p2 / 30240.0
    } else {
        let h = phi / 2.0;
        1.0 - h * h.cos() / h.sin()
    }
}

/// d/dphi of cot_defect.
fn cot_defect_prime(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        phi / 6.0 + p2 * phi / 180.0 + p2 * p2 * phi / 5040.0
    } else {
        let h = phi / 2.0;
        let s = h.sin();
        -0.5 * (h.cos() / s - h / (s * s))
    }
}

fn su2_v_bar_grad(a: &DVector<f64>) -> Vec<DMatrix<f64>> {
    // v_bar = I - C/2 + g(phi) C^2 with C = 2 [a]_x, phi = 2|a|,
    // g(phi) = cot_defect(phi)/phi^2 (g(0) = 1/12).
    let r = a.norm();
    let av = Vector3::new(a[0], a[1], a[2]);
    let c = hat(&av) * 2.0;
    let phi = 2.0 * r;
    let (g, gp) = if phi < 1e-2 {
        let p2 = phi * phi;
        (
            1.0 / 12.0 + p2 / 720.0 + p2 * p2 / 30240.0,
            phi / 360.0 + p2 * phi / 7560.0,
        )
    } else {
        let cd = cot_defect(phi);
        (cd / (phi * phi), (cot_defect_prime(phi) - 2.0 * cd / phi) / (phi * phi))
    };
    (0..3)
        .map(|beta| {
            let e = Vector3::new(
                if beta == 0 { 1.0 } else { 0.0 },
                if beta == 1 { 1.0 } else { 0.0 },
                if beta == 2 { 1.0 } else { 0.0 },
            );
            let dc = hat(&e) * 2.0;
            let dphi = if r < 1e-300 { 0.0 } else { 2.0 * a[beta] / r };
            let m = -dc / 2.0 + (c * c) * (gp * dphi) + (dc * c + c * dc) * g;
            DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
        })
        .collect()
}

// ---- quaternion helpers (w, x, y, z), unit quaternions model SU(2) ----

pub fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn exp_quat(a: &DVector<f64>) -> [f64; 4] {
    let r = a.norm();
    if r < 1e-300 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let s = r.sin() / r;
    [r.cos(), s * a[0], s * a[1], s * a[2]]
}

pub fn log_quat(q: &[f64; 4]) -> DVector<f64> {
    let v = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if v < 1e-300 {
        return DVector::zeros(3);
    }
    let theta = v.atan2(q[0]);
    let theta = if theta < 0.0 {
        theta + std::f64::consts::PI
    } else {
        theta
    };
    DVector::from_vec(vec![theta * q[1] / v, theta * q[2] / v, theta * q[3] / v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn su2_frames_invert_each_other() {
        let a = dv(&[0.3, -0.7, 0.45]);
        let u = GroupKind::Su2.u_bar(&a);
        let v = GroupKind::Su2.v_bar(&a);
        let id = &u * &v;
        assert_abs_diff_eq!(id, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn su2_adjoint_is_ubar_times_left_inverse() {
        let a = dv(&[0.2, 0.5, -0.3]);
        let rho = GroupKind::Su2.adjoint(&a);
        let u = GroupKind::Su2.u_bar(&a);
        let ul = GroupKind::Su2.u_left(&a);
        let check = &u * ul.try_inverse().unwrap();
        assert_abs_diff_eq!(rho, check, epsilon = 1e-12);
    }

    #[test]
    fn su2_vbar_grad_matches_finite_differences() {
        let a = dv(&[0.4, -0.2, 0.6]);
        let grads = GroupKind::Su2.v_bar_grad(&a);
        let h = 1e-6;
        for beta in 0..3 {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[beta] += h;
            am[beta] -= h;
            let fd = (GroupKind::Su2.v_bar(&ap) - GroupKind::Su2.v_bar(&am)) / (2.0 * h);
            assert_abs_diff_eq!(grads[beta], fd, epsilon = 5e-9);
        }
    }

    #[test]
    fn su2_compose_matches_quaternion_product() {
        let a = dv(&[0.3, 0.1, -0.2]);
        let b = dv(&[-0.5, 0.25, 0.4]);
        let c = GroupKind::Su2.compose(&a, &b);
        let q = quat_mul(&exp_quat(&a), &exp_quat(&b));
        let qc = exp_quat(&c);
        for i in 0..4 {
            assert_abs_diff_eq!(q[i], qc[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_log_round_trip_small_angles() {
        for r in [1e-9, 1e-3, 0.5, 2.0, 3.0] {
            let a = dv(&[r, 0.2 * r, -0.3 * r]);
            let back = log_quat(&exp_quat(&a));
            if a.norm() < std::f64::consts::PI {
                assert_abs_diff_eq!(a, back, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn so2_wrap() {
        assert_abs_diff_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(-0.1), -0.1);
    }
}
