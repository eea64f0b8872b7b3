//! Declarative polynomial models on P = R^2 \ {0} with the SO(2) rotation
//! action. The metric is G_AB = alpha(s) delta_AB + beta(s) Q_A Q_B with
//! s = |Q|^2 and alpha, beta Laurent polynomials in s, which is isometric
//! under rotations by construction. The gauge pins one coordinate, the
//! V-representation is either the standard rotation or trivial, and the
//! potential is a polynomial in the invariants.
//!
//! File schema (TOML):
//!
//! ```toml
//! kind = "polynomial-so2"
//! n_v = 2
//! rep = "standard"            # or "trivial"
//! metric_v = [[1.0, 0.0], [0.0, 1.0]]
//! alpha = [{ c = 1.0, pow = 0 }]       # alpha(s) = sum c * s^pow
//! beta = []
//! gauge_coord = 1                       # chi = Q^{gauge_coord}
//! potential = [{ c = 0.1, s = 1, f2 = 0, qf = 0 }]  # c * s^s * |f|^{2 f2} * (Q.f)^qf
//! ```

use super::{AdaptedPoint, DerivativeProvider, GroupKind, Model, StructureConstants};
use crate::error::ModelError;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct LaurentTerm {
    pub c: f64,
    pub pow: i32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PotentialTerm {
    pub c: f64,
    #[serde(default)]
    pub s: u32,
    #[serde(default)]
    pub f2: u32,
    #[serde(default)]
    pub qf: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PolyModelFile {
    pub kind: String,
    pub n_v: usize,
    pub rep: String,
    pub metric_v: Vec<Vec<f64>>,
    #[serde(default)]
    pub alpha: Vec<LaurentTerm>,
    #[serde(default)]
    pub beta: Vec<LaurentTerm>,
    pub gauge_coord: usize,
    #[serde(default)]
    pub potential: Vec<PotentialTerm>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RepKind {
    Standard,
    Trivial,
}

#[derive(Debug, Clone)]
struct Laurent(Vec<(f64, i32)>);

impl Laurent {
    fn eval(&self, s: f64) -> f64 {
        self.0.iter().map(|&(c, p)| c * s.powi(p)).sum()
    }

    fn d1(&self, s: f64) -> f64 {
        self.0
            .iter()
            .map(|&(c, p)| c * f64::from(p) * s.powi(p - 1))
            .sum()
    }

    fn d2(&self, s: f64) -> f64 {
        self.0
            .iter()
            .map(|&(c, p)| c * f64::from(p) * f64::from(p - 1) * s.powi(p - 2))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct PolyModel {
    name: String,
    n_v: usize,
    rep: RepKind,
    metric_v: DMatrix<f64>,
    alpha: Laurent,
    beta: Laurent,
    gauge_coord: usize,
    potential: Vec<PotentialTerm>,
}

impl PolyModel {
    pub fn from_file(f: PolyModelFile) -> Result<Self, ModelError> {
        if f.kind != "polynomial-so2" {
            return Err(ModelError::BadDefinition(format!(
                "unsupported kind `{}` (expected polynomial-so2)",
                f.kind
            )));
        }
        let rep = match f.rep.as_str() {
            "standard" => RepKind::Standard,
            "trivial" => RepKind::Trivial,
            other => {
                return Err(ModelError::BadDefinition(format!(
                    "unsupported rep `{other}`"
                )))
            }
        };
        if rep == RepKind::Standard && f.n_v != 2 {
            return Err(ModelError::BadDefinition(
                "standard rep requires n_v = 2".into(),
            ));
        }
        if f.gauge_coord > 1 {
            return Err(ModelError::BadDefinition(
                "gauge_coord must be 0 or 1".into(),
            ));
        }
        if f.metric_v.len() != f.n_v || f.metric_v.iter().any(|r| r.len() != f.n_v) {
            return Err(ModelError::BadDefinition("metric_v shape mismatch".into()));
        }
        let gv = DMatrix::from_fn(f.n_v, f.n_v, |i, j| f.metric_v[i][j]);
        if gv.clone().cholesky().is_none() {
            return Err(ModelError::NonPositiveDefiniteMetric { space: "V" });
        }
        if f.alpha.is_empty() {
            return Err(ModelError::BadDefinition("alpha must be nonempty".into()));
        }
        Ok(Self {
            name: f.name.unwrap_or_else(|| "polynomial-so2".into()),
            n_v: f.n_v,
            rep,
            metric_v: gv,
            alpha: Laurent(f.alpha.iter().map(|t| (t.c, t.pow)).collect()),
            beta: Laurent(f.beta.iter().map(|t| (t.c, t.pow)).collect()),
            gauge_coord: f.gauge_coord,
            potential: f.potential,
        })
    }

    /// Built-in constant-d test model: G_AB = delta_AB / s (so gamma = 1)
    /// with a trivial V-representation (gamma' = 0), hence d = 1 everywhere.
    pub fn constant_d() -> Self {
        Self {
            name: "constant-d".into(),
            n_v: 2,
            rep: RepKind::Trivial,
            metric_v: DMatrix::identity(2, 2),
            alpha: Laurent(vec![(1.0, -1)]),
            beta: Laurent(vec![]),
            gauge_coord: 1,
            potential: vec![],
        }
    }

    fn rot(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    }
}

impl Model for PolyModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim_p(&self) -> usize {
        2
    }

    fn dim_v(&self) -> usize {
        self.n_v
    }

    fn group(&self) -> GroupKind {
        GroupKind::So2
    }

    fn derivative_provider(&self) -> DerivativeProvider {
        DerivativeProvider::Analytic
    }

    fn metric_p(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let s = q.norm_squared();
        let (al, be) = (self.alpha.eval(s), self.beta.eval(s));
        DMatrix::identity(2, 2) * al + q * q.transpose() * be
    }

    fn metric_p_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let s = q.norm_squared();
        let (a1, b0, b1) = (self.alpha.d1(s), self.beta.eval(s), self.beta.d1(s));
        let qqt = q * q.transpose();
        (0..2)
            .map(|c| {
                let mut e = DVector::zeros(2);
                e[c] = 1.0;
                DMatrix::identity(2, 2) * (2.0 * q[c] * a1)
                    + &qqt * (2.0 * q[c] * b1)
                    + (&e * q.transpose() + q * e.transpose()) * b0
            })
            .collect()
    }

    fn metric_p_hess(&self, q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        let s = q.norm_squared();
        let (a1, a2) = (self.alpha.d1(s), self.alpha.d2(s));
        let (b0, b1, b2) = (self.beta.eval(s), self.beta.d1(s), self.beta.d2(s));
        let qqt = q * q.transpose();
        let id = DMatrix::<f64>::identity(2, 2);
        (0..2)
            .map(|c| {
                let mut ec = DVector::zeros(2);
                ec[c] = 1.0;
                (0..2)
                    .map(|dd| {
                        let mut ed = DVector::zeros(2);
                        ed[dd] = 1.0;
                        let dl = if c == dd { 1.0 } else { 0.0 };
                        let sym_c = &ec * q.transpose() + q * ec.transpose();
                        let sym_d = &ed * q.transpose() + q * ed.transpose();
                        let sym_cd = &ec * ed.transpose() + &ed * ec.transpose();
                        &id * (2.0 * dl * a1 + 4.0 * q[c] * q[dd] * a2)
                            + &qqt * (2.0 * dl * b1 + 4.0 * q[c] * q[dd] * b2)
                            + sym_c * (2.0 * q[dd] * b1)
                            + sym_d * (2.0 * q[c] * b1)
                            + sym_cd * b0
                    })
                    .collect()
            })
            .collect()
    }

    fn metric_v(&self) -> DMatrix<f64> {
        self.metric_v.clone()
    }

    fn action(&self, q: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        Self::rot(a[0]) * q
    }

    fn action_jacobian_q(&self, _q: &DVector<f64>, a: &DVector<f64>) -> DMatrix<f64> {
        Self::rot(a[0])
    }

    fn rep(&self, a: &DVector<f64>) -> DMatrix<f64> {
        match self.rep {
            RepKind::Standard => Self::rot(a[0]),
            RepKind::Trivial => DMatrix::identity(self.n_v, self.n_v),
        }
    }

    fn generators(&self) -> Vec<DMatrix<f64>> {
        match self.rep {
            RepKind::Standard => vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])],
            RepKind::Trivial => vec![DMatrix::zeros(self.n_v, self.n_v)],
        }
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
        DVector::from_element(1, q[self.gauge_coord])
    }

    fn gauge_grad(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(1, 2);
        g[(0, self.gauge_coord)] = 1.0;
        g
    }

    fn gauge_hess(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(2, 2)]
    }

    fn gauge_is_linear(&self) -> bool {
        true
    }

    fn surface_basis(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let free = 1 - self.gauge_coord;
        let mut b = DMatrix::zeros(2, 1);
        b[(free, 0)] = 1.0;
        b
    }

    fn potential(&self, q: &DVector<f64>, f: &DVector<f64>) -> f64 {
        let s = q.norm_squared();
        let f2 = f.norm_squared();
        let qf = if self.rep == RepKind::Standard {
            q.dot(f)
        } else {
            0.0
        };
        self.potential
            .iter()
            .map(|t| t.c * s.powi(t.s as i32) * f2.powi(t.f2 as i32) * qf.powi(t.qf as i32))
            .sum()
    }

    fn chart_ok(&self, q: &DVector<f64>) -> bool {
        q.norm() > self.chart_exit_radius()
    }

    fn split(&self, q: &DVector<f64>, f: &DVector<f64>) -> AdaptedPoint {
        // group coordinate carrying Q to the surface {Q^{gauge_coord} = 0}
        // with positive free coordinate
        let (free, pinned) = (1 - self.gauge_coord, self.gauge_coord);
        let a = if free == 0 {
            q[pinned].atan2(q[free])
        } else {
            -q[pinned].atan2(q[free])
        };
        let mut q_star = DVector::zeros(2);
        q_star[free] = q.norm();
        AdaptedPoint {
            q_star,
            f_tilde: self.rep(&DVector::from_element(1, -a)) * f,
            a: DVector::from_element(1, a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_d_metric_and_gamma() {
        let m = PolyModel::constant_d();
        let q = DVector::from_column_slice(&[1.3, -0.4]);
        let g = m.metric_p(&q);
        let s = q.norm_squared();
        assert_abs_diff_eq!(g[(0, 0)], 1.0 / s, epsilon = 1e-14);
        let k = m.killing_p(&q);
        let gamma = (k.transpose() * g * k)[(0, 0)];
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn metric_grad_hess_match_finite_differences() {
        let m = PolyModel::from_file(PolyModelFile {
            kind: "polynomial-so2".into(),
            n_v: 2,
            rep: "standard".into(),
            metric_v: vec![vec![1.0, 0.2], vec![0.2, 2.0]],
            alpha: vec![LaurentTerm { c: 1.0, pow: 0 }, LaurentTerm { c: 0.3, pow: 1 }],
            beta: vec![LaurentTerm { c: 0.1, pow: -1 }],
            gauge_coord: 1,
            potential: vec![],
            name: None,
        })
        .unwrap();
        let q = DVector::from_column_slice(&[0.9, 0.5]);
        let grad = m.metric_p_grad(&q);
        let h = 1e-6;
        for c in 0..2 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[c] += h;
            qm[c] -= h;
            let fd = (m.metric_p(&qp) - m.metric_p(&qm)) / (2.0 * h);
            assert_abs_diff_eq!(grad[c], fd, epsilon = 1e-7);
        }
        let hess = m.metric_p_hess(&q);
        for c in 0..2 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[c] += h;
            qm[c] -= h;
            let gp = m.metric_p_grad(&qp);
            let gm = m.metric_p_grad(&qm);
            for dd in 0..2 {
                let fd = (&gp[dd] - &gm[dd]) / (2.0 * h);
                assert_abs_diff_eq!(hess[c][dd], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn split_lands_on_surface() {
        let m = PolyModel::constant_d();
        let q = DVector::from_column_slice(&[-0.8, 1.1]);
        let f = DVector::from_column_slice(&[0.3, 0.4]);
        let p = m.split(&q, &f);
        assert_abs_diff_eq!(m.gauge(&p.q_star)[0], 0.0, epsilon = 1e-12);
        assert!(p.q_star[0] > 0.0);
        let (q2, f2) = m.assemble(&p);
        assert_abs_diff_eq!(q2, q, epsilon = 1e-12);
        assert_abs_diff_eq!(f2, f, epsilon = 1e-12);
    }
}
