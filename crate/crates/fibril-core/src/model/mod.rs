//! Model definitions: the manifold P x V, the group action, the gauge
//! surface and the potential, plus the derivative providers the geometry
//! layer consumes.

mod group;
mod planar;
mod poly;
mod quaternionic;
pub mod validate;

pub use group::{exp_quat, log_quat, quat_mul, wrap_angle, GroupKind};
pub use planar::PlanarRotor;
pub use poly::{PolyModel, PolyModelFile};
pub use quaternionic::Quaternionic;
pub use validate::{validate_model, ValidationReport};

use crate::error::ModelError;
use nalgebra::{DMatrix, DVector};

/// A point in adapted coordinates (Q*, f~, a).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdaptedPoint {
    pub q_star: DVector<f64>,
    pub f_tilde: DVector<f64>,
    pub a: DVector<f64>,
}

impl AdaptedPoint {
    pub fn on_surface(q_star: DVector<f64>, f_tilde: DVector<f64>, dim_g: usize) -> Self {
        Self {
            q_star,
            f_tilde,
            a: DVector::zeros(dim_g),
        }
    }
}

/// Structure constants c^gamma_{alpha beta}, antisymmetric in (alpha, beta).
#[derive(Debug, Clone)]
pub struct StructureConstants {
    dim: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn set(&mut self, gamma: usize, alpha: usize, beta: usize, v: f64) {
        let n = self.dim;
        self.data[(gamma * n + alpha) * n + beta] = v;
    }

    pub fn get(&self, gamma: usize, alpha: usize, beta: usize) -> f64 {
        let n = self.dim;
        self.data[(gamma * n + alpha) * n + beta]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// su(2) with quaternion right-multiplication generators: c^gamma_{alpha beta} = 2 eps_{alpha beta gamma}.
    pub fn su2() -> Self {
        let mut c = Self::zeros(3);
        for (a, b, g) in [(0usize, 1usize, 2usize), (1, 2, 0), (2, 0, 1)] {
            c.set(g, a, b, 2.0);
            c.set(g, b, a, -2.0);
        }
        c
    }
}

/// Central-difference step: relative 1e-5 with absolute floor 1e-8.
pub(crate) fn fd_step(x: f64) -> f64 {
    (1e-5 * x.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DerivativeProvider {
    Analytic,
    FiniteDifference,
}

/// Closed-form per-step coefficients a model may provide for its reduced and
/// adapted processes. Implementations must match the generic geometry route;
/// `tests` assert the agreement at random points.
pub struct StepCoeffs {
    /// Divergence-form drift (includes j2), (Q*, f~) components on the free basis.
    pub drift_q: DVector<f64>,
    pub drift_v: DVector<f64>,
    pub j2_q: DVector<f64>,
    pub j2_v: DVector<f64>,
    /// Noise rows: dQ*_free = noise_qq . dW_P ; df~ = noise_vq . dW_P + noise_vv . dW_V
    pub noise_qq: DMatrix<f64>,
    pub noise_vq: DMatrix<f64>,
    pub noise_vv: DMatrix<f64>,
    /// Group direction: drift and noise row(s) Lambda Xi.
    pub drift_g: DVector<f64>,
    pub noise_gq: DMatrix<f64>,
    /// sigma gradient on the free basis and on V, and the weight integrands.
    pub sigma_q: DVector<f64>,
    pub sigma_v: DVector<f64>,
    pub grad_sigma_sq: f64,
    /// Delta~_Sigma sigma + 1/4 <d sigma, d sigma> (the closed-weight integrand).
    pub weight_integrand: f64,
    pub sigma: f64,
    pub det_d: f64,
    /// Ordered-exponential couplings: Gamma2^{alpha nu} = G Lambda Lambda,
    /// the J-linear drift coefficient, and the noise coupling rows.
    pub g_lam_lam: DMatrix<f64>,
    pub oexp_drift_lin: DVector<f64>,
    pub oexp_noise_q: DMatrix<f64>,
    pub oexp_noise_v: DMatrix<f64>,
}

/// A concrete manifold + action + gauge + potential definition.
///
/// Derivative methods default to central finite differences of the value
/// methods; analytic models override them.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;
    fn dim_p(&self) -> usize;
    fn dim_v(&self) -> usize;
    fn group(&self) -> GroupKind;
    fn dim_g(&self) -> usize {
        self.group().dim()
    }
    fn derivative_provider(&self) -> DerivativeProvider {
        DerivativeProvider::FiniteDifference
    }

    // ---- metric ----
    fn metric_p(&self, q: &DVector<f64>) -> DMatrix<f64>;
    fn metric_v(&self) -> DMatrix<f64>;

    fn metric_p_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        fd_grad_mat(q, |x| self.metric_p(x))
    }

    fn metric_p_hess(&self, q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        fd_hess_mat(q, |x| self.metric_p(x))
    }

    // ---- group action on P ----
    fn action(&self, q: &DVector<f64>, a: &DVector<f64>) -> DVector<f64>;

    fn action_jacobian_q(&self, q: &DVector<f64>, a: &DVector<f64>) -> DMatrix<f64> {
        let n = q.len();
        let mut jac = DMatrix::zeros(n, n);
        for b in 0..n {
            let h = fd_step(q[b]);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[b] += h;
            qm[b] -= h;
            let col = (self.action(&qp, a) - self.action(&qm, a)) / (2.0 * h);
            for i in 0..n {
                jac[(i, b)] = col[i];
            }
        }
        jac
    }

    // ---- representation on V ----
    fn rep(&self, a: &DVector<f64>) -> DMatrix<f64>;
    fn generators(&self) -> Vec<DMatrix<f64>>;
    fn structure_constants(&self) -> StructureConstants;

    // ---- Killing data ----
    fn killing_p(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let ng = self.dim_g();
        let np = self.dim_p();
        let mut k = DMatrix::zeros(np, ng);
        for alpha in 0..ng {
            let h = 1e-6;
            let mut ap = DVector::zeros(ng);
            let mut am = DVector::zeros(ng);
            ap[alpha] += h;
            am[alpha] -= h;
            let col = (self.action(q, &ap) - self.action(q, &am)) / (2.0 * h);
            for i in 0..np {
                k[(i, alpha)] = col[i];
            }
        }
        k
    }

    fn killing_p_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        fd_grad_mat(q, |x| self.killing_p(x))
    }

    fn killing_p_hess(&self, q: &DVector<f64>) -> Vec<Vec<DMatrix<f64>>> {
        fd_hess_mat(q, |x| self.killing_p(x))
    }

    // ---- gauge ----
    fn gauge(&self, q: &DVector<f64>) -> DVector<f64>;

    fn gauge_grad(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (ng, np) = (self.dim_g(), self.dim_p());
        let mut g = DMatrix::zeros(ng, np);
        for b in 0..np {
            let h = fd_step(q[b]);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[b] += h;
            qm[b] -= h;
            let col = (self.gauge(&qp) - self.gauge(&qm)) / (2.0 * h);
            for mu in 0..ng {
                g[(mu, b)] = col[mu];
            }
        }
        g
    }

    fn gauge_hess(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (ng, np) = (self.dim_g(), self.dim_p());
        let grads = fd_grad_mat(q, |x| self.gauge_grad(x));
        (0..ng)
            .map(|mu| DMatrix::from_fn(np, np, |a, b| grads[b][(mu, a)]))
            .collect()
    }

    fn gauge_is_linear(&self) -> bool {
        false
    }

    /// Columns span ker(gauge_grad) at q; the free basis used for the
    /// surface determinant H and for density estimation on the surface.
    fn surface_basis(&self, q: &DVector<f64>) -> DMatrix<f64> {
        kernel_basis(&self.gauge_grad(q))
    }

    // ---- potential and chart ----
    fn potential(&self, _q: &DVector<f64>, _f: &DVector<f64>) -> f64 {
        0.0
    }

    fn chart_ok(&self, q: &DVector<f64>) -> bool {
        q.norm() > 1e-6
    }

    /// pi'_Sigma: adapted coordinates of an ambient point (p, v).
    fn split(&self, q: &DVector<f64>, f: &DVector<f64>) -> AdaptedPoint;

    /// phi~: ambient coordinates of an adapted point.
    fn assemble(&self, p: &AdaptedPoint) -> (DVector<f64>, DVector<f64>) {
        (self.action(&p.q_star, &p.a), self.rep(&p.a) * &p.f_tilde)
    }

    /// Optional closed-form stepping coefficients (hot simulation path).
    fn fast_coeffs(&self, _q_free: &DVector<f64>, _f: &DVector<f64>) -> Option<StepCoeffs> {
        None
    }

    /// Lower bound on the free radial coordinate before a path is declared
    /// to have left the chart.
    fn chart_exit_radius(&self) -> f64 {
        0.05
    }
}

/// Load a built-in model by name, or a polynomial model from `name.toml`.
pub fn by_name(name: &str) -> Result<Box<dyn Model>, ModelError> {
    match name {
        "planar-rotor" => Ok(Box::new(PlanarRotor::new())),
        "quaternionic-adjoint" => Ok(Box::new(Quaternionic::new())),
        "constant-d" => Ok(Box::new(PolyModel::constant_d())),
        other => {
            if other.ends_with(".toml") {
                let text = std::fs::read_to_string(other)
                    .map_err(|e| ModelError::BadDefinition(format!("{other}: {e}")))?;
                let file: PolyModelFile = toml::from_str(&text)
                    .map_err(|e| ModelError::BadDefinition(format!("{other}: {e}")))?;
                Ok(Box::new(PolyModel::from_file(file)?))
            } else {
                Err(ModelError::UnknownModel(other.to_string()))
            }
        }
    }
}

fn fd_grad_mat<F>(q: &DVector<f64>, f: F) -> Vec<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    (0..q.len())
        .map(|b| {
            let h = fd_step(q[b]);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[b] += h;
            qm[b] -= h;
            (f(&qp) - f(&qm)) / (2.0 * h)
        })
        .collect()
}

fn fd_hess_mat<F>(q: &DVector<f64>, f: F) -> Vec<Vec<DMatrix<f64>>>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = q.len();
    (0..n)
        .map(|b| {
            let hb = (1e-4 * q[b].abs()).max(1e-6);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[b] += hb;
            qm[b] -= hb;
            let gp = fd_grad_mat(&qp, &f);
            let gm = fd_grad_mat(&qm, &f);
            (0..n)
                .map(|c| (&gp[c] - &gm[c]) / (2.0 * hb))
                .collect()
        })
        .collect()
}

/// Orthonormal basis of ker(rows) via full SVD.
fn kernel_basis(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let np = rows.ncols();
    let ng = rows.nrows();
    let svd = rows.clone().svd(true, true);
    let vt = svd.v_t.expect("svd");
    let mut basis = DMatrix::zeros(np, np - ng);
    for (j, row) in (ng..np).enumerate() {
        for i in 0..np {
            basis[(i, j)] = vt[(row, i)];
        }
    }
    basis
}
