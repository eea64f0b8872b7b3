//! Tensor assembly at adapted points: Killing fields, Faddeev-Popov data,
//! projectors, orbit metric, horizontal metric and projector, mechanical
//! connection, adapted-metric blocks, pseudoinverse and determinant factors,
//! together with the first-derivative jets the drift formulas consume.

mod jet;

pub use jet::{MJet, SJet};

use crate::error::GeometryError;
use crate::model::{AdaptedPoint, DerivativeProvider, Model};
use nalgebra::{DMatrix, DVector};

/// Maximum Faddeev-Popov condition number before the gauge surface is
/// declared non-transversal at the point.
pub const FP_COND_LIMIT: f64 = 1e12;

/// Surface membership tolerance for adapted points.
pub const SURFACE_TOL: f64 = 1e-8;

/// Every tensor the drift and reduction formulas need at one adapted point.
#[derive(Debug, Clone)]
pub struct Frame {
    pub q: DVector<f64>,
    pub f: DVector<f64>,

    pub g_p: DMatrix<f64>,
    pub g_p_inv: DMatrix<f64>,
    pub g_v: DMatrix<f64>,
    pub g_v_inv: DMatrix<f64>,

    /// Killing field components K^A_alpha on P and K^a_alpha on V.
    pub k_p: DMatrix<f64>,
    pub k_v: DMatrix<f64>,

    pub chi: DVector<f64>,
    pub chi_grad: DMatrix<f64>,
    pub fp: DMatrix<f64>,
    pub fp_inv: DMatrix<f64>,
    pub fp_cond: f64,
    /// Lambda^nu_E = (Phi^-1)^nu_mu chi^mu_E.
    pub lambda: DMatrix<f64>,

    pub n_pp: DMatrix<f64>,
    pub n_vp: DMatrix<f64>,
    pub p_bot: DMatrix<f64>,

    pub gamma: DMatrix<f64>,
    pub gamma_inv: DMatrix<f64>,
    pub gamma_prime: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub d_inv: DMatrix<f64>,
    pub det_d: f64,
    pub sigma: f64,

    pub gh_pp: DMatrix<f64>,
    pub gh_pv: DMatrix<f64>,
    pub gh_vv: DMatrix<f64>,

    pub pi_pp: DMatrix<f64>,
    pub pi_pv: DMatrix<f64>,
    pub pi_vp: DMatrix<f64>,
    pub pi_vv: DMatrix<f64>,

    /// Mechanical connection A^alpha_D, A^alpha_p (d-inverse weighting).
    pub a_d_p: DMatrix<f64>,
    pub a_d_v: DMatrix<f64>,
    /// gamma-inverse variant used by Eq-style assemblies and group drifts.
    pub a_gam: DMatrix<f64>,

    pub h_pp: DMatrix<f64>,
    pub h_vp: DMatrix<f64>,
    pub h_vv: DMatrix<f64>,

    /// G^{BC} Lambda^alpha_B Lambda^nu_C.
    pub g_lam_lam: DMatrix<f64>,

    /// Columns span ker(chi_grad): the free surface directions.
    pub basis: DMatrix<f64>,
    /// Surface block determinant H and the volume density sqrt(d H).
    pub h_det: f64,
    pub vol: f64,
}

impl Frame {
    pub fn dim_p(&self) -> usize {
        self.g_p.nrows()
    }

    pub fn dim_v(&self) -> usize {
        self.g_v.nrows()
    }

    pub fn dim_g(&self) -> usize {
        self.d.nrows()
    }
}

/// Killing vector fields at a chart point: K^A_alpha = dF^A/da|_e and
/// K^a_alpha = (Jbar_alpha)^a_c f^c.
pub fn killing_fields(
    m: &dyn Model,
    q: &DVector<f64>,
    f: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.killing_p(q), killing_v(m, f))
}

pub(crate) fn killing_v(m: &dyn Model, f: &DVector<f64>) -> DMatrix<f64> {
    let gens = m.generators();
    let mut k = DMatrix::zeros(m.dim_v(), m.dim_g());
    for (alpha, j) in gens.iter().enumerate() {
        let col = j * f;
        for i in 0..m.dim_v() {
            k[(i, alpha)] = col[i];
        }
    }
    k
}

/// Faddeev-Popov matrix Phi^beta_mu = K^A_mu d chi^beta / d Q^A and its inverse.
pub fn faddeev_popov(
    m: &dyn Model,
    q: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), GeometryError> {
    let fp = m.gauge_grad(q) * m.killing_p(q);
    let cond = condition_number(&fp);
    if !cond.is_finite() || cond > FP_COND_LIMIT {
        return Err(GeometryError::SingularFaddeevPopov { cond });
    }
    let fp_inv = fp
        .clone()
        .try_inverse()
        .ok_or(GeometryError::SingularFaddeevPopov { cond: f64::INFINITY })?;
    Ok((fp, fp_inv))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Assemble every frame tensor at a general chart point (also used off the
/// gauge surface, where the Q*-derivative rule needs the ambient extension).
pub fn tensors_at(
    m: &dyn Model,
    q: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<Frame, GeometryError> {
    let (np, nv, ng) = (m.dim_p(), m.dim_v(), m.dim_g());
    let g_p = m.metric_p(q);
    let g_p_inv = g_p
        .clone()
        .cholesky()
        .ok_or(GeometryError::NonPositiveOrbitMetric)?
        .inverse();
    let g_v = m.metric_v();
    let g_v_inv = g_v
        .clone()
        .cholesky()
        .ok_or(GeometryError::NonPositiveOrbitMetric)?
        .inverse();

    let k_p = m.killing_p(q);
    let k_v = killing_v(m, f);
    let chi = m.gauge(q);
    let chi_grad = m.gauge_grad(q);

    let (fp, fp_inv) = faddeev_popov(m, q)?;
    let fp_cond = condition_number(&fp);
    let lambda = &fp_inv * &chi_grad;

    let n_pp = DMatrix::identity(np, np) - &k_p * &lambda;
    let n_vp = -(&k_v * &lambda);

    // G-orthogonal projector onto ker(chi_grad)
    let cgc = &chi_grad * &g_p_inv * chi_grad.transpose();
    let cgc_inv = cgc
        .cholesky()
        .ok_or(GeometryError::SingularFaddeevPopov { cond: f64::INFINITY })?
        .inverse();
    let p_bot = DMatrix::identity(np, np) - &g_p_inv * chi_grad.transpose() * cgc_inv * &chi_grad;

    let gkp = &g_p * &k_p;
    let gkv = &g_v * &k_v;
    let gamma = k_p.transpose() * &gkp;
    let gamma_prime = k_v.transpose() * &gkv;
    let d = &gamma + &gamma_prime;
    let d_chol = d.clone().cholesky().ok_or(GeometryError::NonPositiveOrbitMetric)?;
    let det_d = d_chol
        .l()
        .diagonal()
        .iter()
        .map(|x| x * x)
        .product::<f64>();
    let d_inv = d_chol.inverse();
    let gamma_inv = gamma
        .clone()
        .cholesky()
        .ok_or(GeometryError::NonPositiveOrbitMetric)?
        .inverse();

    let gh_pp = &g_p - &gkp * &d_inv * gkp.transpose();
    let gh_pv = -(&gkp * &d_inv * gkv.transpose());
    let gh_vv = &g_v - &gkv * &d_inv * gkv.transpose();

    let pi_pp = DMatrix::identity(np, np) - &k_p * &d_inv * gkp.transpose();
    let pi_pv = -(&k_p * &d_inv * gkv.transpose());
    let pi_vp = -(&k_v * &d_inv * gkp.transpose());
    let pi_vv = DMatrix::identity(nv, nv) - &k_v * &d_inv * gkv.transpose();

    let a_d_p = &d_inv * gkp.transpose();
    let a_d_v = &d_inv * gkv.transpose();
    let a_gam = &gamma_inv * gkp.transpose();

    let h_pp = &n_pp * &g_p_inv * n_pp.transpose();
    let h_vp = &n_vp * &g_p_inv * n_pp.transpose();
    let h_vv = &g_v_inv + &n_vp * &g_p_inv * n_vp.transpose();

    let g_lam_lam = &lambda * &g_p_inv * lambda.transpose();

    let basis = m.surface_basis(q);
    let h_det = surface_det(&basis, &gh_pp, &gh_pv, &gh_vv);
    if !(h_det > 0.0) {
        return Err(GeometryError::NonPositiveOrbitMetric);
    }
    let vol = (det_d * h_det).sqrt();

    Ok(Frame {
        q: q.clone(),
        f: f.clone(),
        g_p,
        g_p_inv,
        g_v,
        g_v_inv,
        k_p,
        k_v,
        chi,
        chi_grad,
        fp,
        fp_inv,
        fp_cond,
        lambda,
        n_pp,
        n_vp,
        p_bot,
        gamma,
        gamma_inv,
        gamma_prime,
        d,
        d_inv,
        det_d,
        sigma: det_d.ln(),
        gh_pp,
        gh_pv,
        gh_vv,
        pi_pp,
        pi_pv,
        pi_vp,
        pi_vv,
        a_d_p,
        a_d_v,
        a_gam,
        h_pp,
        h_vp,
        h_vv,
        g_lam_lam,
        basis,
        h_det,
        vol,
    })
}

/// The spec-level frame operation: requires the point to sit on the gauge
/// surface within `SURFACE_TOL`.
pub fn frame(m: &dyn Model, p: &AdaptedPoint) -> Result<Frame, GeometryError> {
    let chi = m.gauge(&p.q_star);
    let chi_max = chi.amax();
    if chi_max > SURFACE_TOL {
        return Err(GeometryError::OffSurface {
            chi_max,
            tol: SURFACE_TOL,
        });
    }
    tensors_at(m, &p.q_star, &p.f_tilde)
}

/// Determinant of the horizontal-metric block restricted to the surface
/// basis and the vector space.
fn surface_det(
    basis: &DMatrix<f64>,
    gh_pp: &DMatrix<f64>,
    gh_pv: &DMatrix<f64>,
    gh_vv: &DMatrix<f64>,
) -> f64 {
    let nb = basis.ncols();
    let nv = gh_vv.nrows();
    let top = basis.transpose() * gh_pp * basis;
    let cross = basis.transpose() * gh_pv;
    let mut ms = DMatrix::zeros(nb + nv, nb + nv);
    ms.view_mut((0, 0), (nb, nb)).copy_from(&top);
    ms.view_mut((0, nb), (nb, nv)).copy_from(&cross);
    ms.view_mut((nb, 0), (nv, nb)).copy_from(&cross.transpose());
    ms.view_mut((nb, nb), (nv, nv)).copy_from(gh_vv);
    ms.determinant()
}

// ---------------------------------------------------------------------------
// First-derivative jets of the frame
// ---------------------------------------------------------------------------

/// Frame values together with raw first derivatives along the chart
/// directions (n_P Q-directions followed by n_V f-directions), and the raw
/// second derivatives of sigma = ln det d. Consumers apply the P_perp
/// projection rule to Q-direction slots.
#[derive(Debug, Clone)]
pub struct FrameJet {
    pub frame: Frame,
    pub d_n_pp: Vec<DMatrix<f64>>,
    pub d_n_vp: Vec<DMatrix<f64>>,
    pub d_p_bot: Vec<DMatrix<f64>>,
    pub d_gh_pp: Vec<DMatrix<f64>>,
    pub d_gh_pv: Vec<DMatrix<f64>>,
    pub d_gh_vv: Vec<DMatrix<f64>>,
    pub d_h_pp: Vec<DMatrix<f64>>,
    pub d_h_vp: Vec<DMatrix<f64>>,
    pub d_h_vv: Vec<DMatrix<f64>>,
    /// h^{AC} A_gamma^nu_C (n_P x n_G) and its derivatives (group drifts).
    pub ha_gam: DMatrix<f64>,
    pub d_ha_gam: Vec<DMatrix<f64>>,
    pub d_vol: Vec<f64>,
    pub d_sigma: Vec<f64>,
    pub sigma_hess: DMatrix<f64>,
}

impl FrameJet {
    pub fn ndirs(&self) -> usize {
        self.d_sigma.len()
    }
}

/// Build the frame jet, picking the provider declared by the model.
pub fn frame_jet(m: &dyn Model, q: &DVector<f64>, f: &DVector<f64>) -> Result<FrameJet, GeometryError> {
    match m.derivative_provider() {
        DerivativeProvider::Analytic => frame_jet_analytic(m, q, f),
        DerivativeProvider::FiniteDifference => frame_jet_fd(m, q, f),
    }
}

fn frame_jet_analytic(
    m: &dyn Model,
    q: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<FrameJet, GeometryError> {
    let (np, nv, ng) = (m.dim_p(), m.dim_v(), m.dim_g());
    let nd = np + nv;
    let frame = tensors_at(m, q, f)?;

    // model-level jets
    let gp = MJet::new(frame.g_p.clone(), {
        let mut d: Vec<DMatrix<f64>> = m.metric_p_grad(q);
        d.extend(std::iter::repeat_n(DMatrix::zeros(np, np), nv));
        d
    });
    let kp = MJet::new(frame.k_p.clone(), {
        let mut d = m.killing_p_grad(q);
        d.extend(std::iter::repeat_n(DMatrix::zeros(np, ng), nv));
        d
    });
    let gens = m.generators();
    let kv = MJet::new(frame.k_v.clone(), {
        let mut d = vec![DMatrix::zeros(nv, ng); np];
        for mdir in 0..nv {
            let mut dm = DMatrix::zeros(nv, ng);
            for (alpha, j) in gens.iter().enumerate() {
                for i in 0..nv {
                    dm[(i, alpha)] = j[(i, mdir)];
                }
            }
            d.push(dm);
        }
        d
    });
    let chi_g = MJet::new(frame.chi_grad.clone(), {
        let hess = m.gauge_hess(q);
        let mut d = Vec::with_capacity(nd);
        for b in 0..np {
            d.push(DMatrix::from_fn(ng, np, |mu, a| hess[mu][(a, b)]));
        }
        d.extend(std::iter::repeat_n(DMatrix::zeros(ng, np), nv));
        d
    });
    let gv = MJet::constant(frame.g_v.clone(), nd);
    let gp_inv = gp.inverse().ok_or(GeometryError::NonPositiveOrbitMetric)?;
    let gv_inv = MJet::constant(frame.g_v_inv.clone(), nd);
    let id_p = MJet::constant(DMatrix::identity(np, np), nd);

    let phi = chi_g.mul(&kp);
    let phi_inv = phi
        .inverse()
        .ok_or(GeometryError::SingularFaddeevPopov { cond: f64::INFINITY })?;
    let lam = phi_inv.mul(&chi_g);
    let n_pp = id_p.sub(&kp.mul(&lam));
    let n_vp = kv.mul(&lam).neg();

    let gkp = gp.mul(&kp);
    let gkv = gv.mul(&kv);
    let gamma = kp.transpose().mul(&gkp);
    let gamma_prime = kv.transpose().mul(&gkv);
    let d_orb = gamma.add(&gamma_prime);
    let d_inv = d_orb.inverse().ok_or(GeometryError::NonPositiveOrbitMetric)?;
    let sigma_jet = d_orb.log_det().ok_or(GeometryError::NonPositiveOrbitMetric)?;

    let gh_pp = gp.sub(&gkp.mul(&d_inv).mul(&gkp.transpose()));
    let gh_pv = gkp.mul(&d_inv).mul(&gkv.transpose()).neg();
    let gh_vv = gv.sub(&gkv.mul(&d_inv).mul(&gkv.transpose()));

    let h_pp = n_pp.mul(&gp_inv).mul(&n_pp.transpose());
    let h_vp = n_vp.mul(&gp_inv).mul(&n_pp.transpose());
    let h_vv = gv_inv.add(&n_vp.mul(&gp_inv).mul(&n_vp.transpose()));

    // P_perp jet
    let cgc = chi_g.mul(&gp_inv).mul(&chi_g.transpose());
    let cgc_inv = cgc
        .inverse()
        .ok_or(GeometryError::SingularFaddeevPopov { cond: f64::INFINITY })?;
    let p_bot = id_p.sub(&gp_inv.mul(&chi_g.transpose()).mul(&cgc_inv).mul(&chi_g));

    // A_gamma and its h-contraction
    let gamma_inv = gamma.inverse().ok_or(GeometryError::NonPositiveOrbitMetric)?;
    let a_gam = gamma_inv.mul(&gkp.transpose());
    let ha_gam = h_pp.mul(&a_gam.transpose());

    // H and vol jets
    let basis = MJet::constant(frame.basis.clone(), nd);
    let top = basis.transpose().mul(&gh_pp).mul(&basis);
    let cross = basis.transpose().mul(&gh_pv);
    let nb = frame.basis.ncols();
    let mut ms_v = DMatrix::zeros(nb + nv, nb + nv);
    ms_v.view_mut((0, 0), (nb, nb)).copy_from(&top.v);
    ms_v.view_mut((0, nb), (nb, nv)).copy_from(&cross.v);
    ms_v.view_mut((nb, 0), (nv, nb)).copy_from(&cross.v.transpose());
    ms_v.view_mut((nb, nb), (nv, nv)).copy_from(&gh_vv.v);
    let ms_d: Vec<DMatrix<f64>> = (0..nd)
        .map(|k| {
            let mut dm = DMatrix::zeros(nb + nv, nb + nv);
            dm.view_mut((0, 0), (nb, nb)).copy_from(&top.d[k]);
            dm.view_mut((0, nb), (nb, nv)).copy_from(&cross.d[k]);
            dm.view_mut((nb, 0), (nv, nb)).copy_from(&cross.d[k].transpose());
            dm.view_mut((nb, nb), (nv, nv)).copy_from(&gh_vv.d[k]);
            dm
        })
        .collect();
    let h_jet = MJet::new(ms_v, ms_d)
        .det()
        .ok_or(GeometryError::NonPositiveOrbitMetric)?;
    let det_d_jet = SJet {
        v: frame.det_d,
        d: sigma_jet.d.iter().map(|s| s * frame.det_d).collect(),
    };
    let vol_jet = det_d_jet.mul(&h_jet).sqrt();

    // sigma second derivatives: raw hessian of ln det d
    let sigma_hess = sigma_hessian(m, q, f, &d_orb, &d_inv);

    Ok(FrameJet {
        frame,
        d_n_pp: n_pp.d,
        d_n_vp: n_vp.d,
        d_p_bot: p_bot.d,
        d_gh_pp: gh_pp.d,
        d_gh_pv: gh_pv.d,
        d_gh_vv: gh_vv.d,
        d_h_pp: h_pp.d,
        d_h_vp: h_vp.d,
        d_h_vv: h_vv.d,
        ha_gam: ha_gam.v,
        d_ha_gam: ha_gam.d,
        d_vol: vol_jet.d,
        d_sigma: sigma_jet.d,
        sigma_hess,
    })
}

/// Raw second derivatives of sigma = ln det d over the nd chart directions.
fn sigma_hessian(
    m: &dyn Model,
    q: &DVector<f64>,
    f: &DVector<f64>,
    d_orb: &MJet,
    d_inv: &MJet,
) -> DMatrix<f64> {
    let (np, nv, ng) = (m.dim_p(), m.dim_v(), m.dim_g());
    let nd = np + nv;
    let g = m.metric_p(q);
    let dg = m.metric_p_grad(q);
    let hg = m.metric_p_hess(q);
    let k = m.killing_p(q);
    let dk = m.killing_p_grad(q);
    let hk = m.killing_p_hess(q);
    let gv = m.metric_v();
    let gens = m.generators();
    let dkv: Vec<DMatrix<f64>> = (0..nv)
        .map(|mdir| {
            DMatrix::from_fn(nv, ng, |i, alpha| gens[alpha][(i, mdir)])
        })
        .collect();

    // second derivatives of d: QQ block from gamma, ff block from gamma'
    let second = |c: usize, e: usize| -> DMatrix<f64> {
        if c < np && e < np {
            // gamma_{,ce} with K(q), G(q)
            let kc = &dk[c];
            let ke = &dk[e];
            let kce = &hk[c][e];
            kce.transpose() * &g * &k
                + kc.transpose() * &dg[e] * &k
                + kc.transpose() * &g * ke
                + ke.transpose() * &dg[c] * &k
                + k.transpose() * &hg[c][e] * &k
                + k.transpose() * &dg[c] * ke
                + ke.transpose() * &g * kc
                + k.transpose() * &dg[e] * kc
                + k.transpose() * &g * kce
        } else if c >= np && e >= np {
            let kc = &dkv[c - np];
            let ke = &dkv[e - np];
            kc.transpose() * &gv * ke + ke.transpose() * &gv * kc
        } else {
            DMatrix::zeros(ng, ng)
        }
    };

    DMatrix::from_fn(nd, nd, |cdir, edir| {
        let t1 = -(&d_inv.v * &d_orb.d[edir] * &d_inv.v * &d_orb.d[cdir]).trace();
        let t2 = (&d_inv.v * second(cdir, edir)).trace();
        t1 + t2
    })
}

fn frame_jet_fd(m: &dyn Model, q: &DVector<f64>, f: &DVector<f64>) -> Result<FrameJet, GeometryError> {
    let (np, nv) = (m.dim_p(), m.dim_v());
    let nd = np + nv;
    let frame = tensors_at(m, q, f)?;

    let shift = |dir: usize, h: f64| -> (DVector<f64>, DVector<f64>) {
        let mut qq = q.clone();
        let mut ff = f.clone();
        if dir < np {
            qq[dir] += h;
        } else {
            ff[dir - np] += h;
        }
        (qq, ff)
    };
    let step = |dir: usize| -> f64 {
        let x = if dir < np { q[dir] } else { f[dir - np] };
        crate::model::fd_step(x)
    };

    let mut plus = Vec::with_capacity(nd);
    let mut minus = Vec::with_capacity(nd);
    for dir in 0..nd {
        let h = step(dir);
        let (qp, fp) = shift(dir, h);
        let (qm, fm) = shift(dir, -h);
        plus.push((tensors_at(m, &qp, &fp)?, h));
        minus.push(tensors_at(m, &qm, &fm)?);
    }

    macro_rules! fd_field {
        ($field:ident) => {
            (0..nd)
                .map(|dir| (&plus[dir].0.$field - &minus[dir].$field) / (2.0 * plus[dir].1))
                .collect::<Vec<_>>()
        };
    }

    let d_vol = (0..nd)
        .map(|dir| (plus[dir].0.vol - minus[dir].vol) / (2.0 * plus[dir].1))
        .collect::<Vec<f64>>();
    let d_sigma = (0..nd)
        .map(|dir| (plus[dir].0.sigma - minus[dir].sigma) / (2.0 * plus[dir].1))
        .collect::<Vec<f64>>();

    // second derivatives of sigma by nested central differences (wider step)
    let mut sigma_hess = DMatrix::zeros(nd, nd);
    for cdir in 0..nd {
        let hc = 10.0 * step(cdir);
        let (qp, fp) = shift(cdir, hc);
        let (qm, fm) = shift(cdir, -hc);
        for edir in 0..nd {
            let he = 10.0 * step(edir);
            let shift2 = |base_q: &DVector<f64>, base_f: &DVector<f64>, h: f64| {
                let mut qq = base_q.clone();
                let mut ff = base_f.clone();
                if edir < np {
                    qq[edir] += h;
                } else {
                    ff[edir - np] += h;
                }
                (qq, ff)
            };
            let eval = |qq: &DVector<f64>, ff: &DVector<f64>| -> Result<f64, GeometryError> {
                Ok(tensors_at(m, qq, ff)?.sigma)
            };
            let (qpp, fpp) = shift2(&qp, &fp, he);
            let (qpm, fpm) = shift2(&qp, &fp, -he);
            let (qmp, fmp) = shift2(&qm, &fm, he);
            let (qmm, fmm) = shift2(&qm, &fm, -he);
            sigma_hess[(cdir, edir)] = (eval(&qpp, &fpp)? - eval(&qpm, &fpm)? - eval(&qmp, &fmp)?
                + eval(&qmm, &fmm)?)
                / (4.0 * hc * he);
        }
    }

    let ha_gam = &frame.h_pp * frame.a_gam.transpose();
    let d_h_pp: Vec<DMatrix<f64>> = fd_field!(h_pp);
    let d_ha_gam = (0..nd)
        .map(|dir| {
            let hap = &plus[dir].0.h_pp * plus[dir].0.a_gam.transpose();
            let ham = &minus[dir].h_pp * minus[dir].a_gam.transpose();
            (hap - ham) / (2.0 * plus[dir].1)
        })
        .collect();

    Ok(FrameJet {
        d_n_pp: fd_field!(n_pp),
        d_n_vp: fd_field!(n_vp),
        d_p_bot: fd_field!(p_bot),
        d_gh_pp: fd_field!(gh_pp),
        d_gh_pv: fd_field!(gh_pv),
        d_gh_vv: fd_field!(gh_vv),
        d_h_pp,
        d_h_vp: fd_field!(h_vp),
        d_h_vv: fd_field!(h_vv),
        ha_gam,
        d_ha_gam,
        d_vol,
        d_sigma,
        sigma_hess,
        frame,
    })
}

// ---------------------------------------------------------------------------
// sigma and its projected derivatives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SigmaDerivs {
    pub sigma: f64,
    /// P_perp-projected Q*-gradient and the plain f-gradient.
    pub d_q: DVector<f64>,
    pub d_v: DVector<f64>,
    /// Second derivatives with the projection rule applied twice (QQ), once (Qf).
    pub d_qq: DMatrix<f64>,
    pub d_qv: DMatrix<f64>,
    pub d_vv: DMatrix<f64>,
}

/// sigma = ln det d and its surface derivatives at an adapted point.
pub fn sigma_and_derivatives(m: &dyn Model, p: &AdaptedPoint) -> Result<SigmaDerivs, GeometryError> {
    let jet = frame_jet(m, &p.q_star, &p.f_tilde)?;
    Ok(sigma_from_jet(&jet))
}

pub fn sigma_from_jet(jet: &FrameJet) -> SigmaDerivs {
    let fr = &jet.frame;
    let np = fr.dim_p();
    let nv = fr.dim_v();
    let pb = &fr.p_bot;

    let raw_q = DVector::from_fn(np, |dd, _| jet.d_sigma[dd]);
    let d_q = pb.transpose() * &raw_q;
    let d_v = DVector::from_fn(nv, |mm, _| jet.d_sigma[np + mm]);

    // sigma_AB = P^D_A d_D (P^E_B sigma_E) = P^D_A (dP^E_B sigma_E + P^E_B sigma_DE)
    let mut d_qq = DMatrix::zeros(np, np);
    for a in 0..np {
        for b in 0..np {
            let mut acc = 0.0;
            for dd in 0..np {
                let mut inner = 0.0;
                for e in 0..np {
                    inner += jet.d_p_bot[dd][(e, b)] * jet.d_sigma[e]
                        + pb[(e, b)] * jet.sigma_hess[(dd, e)];
                }
                acc += pb[(dd, a)] * inner;
            }
            d_qq[(a, b)] = acc;
        }
    }
    // sigma_Ab = P^D_A sigma_{D, b-raw}
    let mut d_qv = DMatrix::zeros(np, nv);
    for a in 0..np {
        for b in 0..nv {
            let mut acc = 0.0;
            for dd in 0..np {
                acc += pb[(dd, a)] * jet.sigma_hess[(dd, np + b)];
            }
            d_qv[(a, b)] = acc;
        }
    }
    let d_vv = DMatrix::from_fn(nv, nv, |a, b| jet.sigma_hess[(np + a, np + b)]);

    SigmaDerivs {
        sigma: fr.sigma,
        d_q,
        d_v,
        d_qq,
        d_qv,
        d_vv,
    }
}

// ---------------------------------------------------------------------------
// Full-metric assemblies and the determinant factorization
// ---------------------------------------------------------------------------

/// The adapted-coordinate metric as a full (n_P + n_V + n_G)^2 matrix.
/// Both off-diagonal group blocks carry the P_perp dressing, which is the
/// symmetric completion that satisfies the pseudoinversion identity.
pub fn adapted_metric(m: &dyn Model, p: &AdaptedPoint) -> Result<DMatrix<f64>, GeometryError> {
    let fr = frame(m, p)?;
    let ubar = m.group().u_bar(&p.a);
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let mut g = DMatrix::zeros(np + nv + ng, np + nv + ng);
    let pgp = fr.p_bot.transpose() * &fr.g_p * &fr.p_bot;
    let pgku = fr.p_bot.transpose() * &fr.g_p * &fr.k_p * &ubar;
    let gvku = &fr.g_v * &fr.k_v * &ubar;
    let dd = ubar.transpose() * &fr.d * &ubar;
    g.view_mut((0, 0), (np, np)).copy_from(&pgp);
    g.view_mut((0, np + nv), (np, ng)).copy_from(&pgku);
    g.view_mut((np, np), (nv, nv)).copy_from(&fr.g_v);
    g.view_mut((np, np + nv), (nv, ng)).copy_from(&gvku);
    g.view_mut((np + nv, 0), (ng, np)).copy_from(&pgku.transpose());
    g.view_mut((np + nv, np), (ng, nv)).copy_from(&gvku.transpose());
    g.view_mut((np + nv, np + nv), (ng, ng)).copy_from(&dd);
    Ok(g)
}

/// The same metric assembled through the mechanical connection blocks.
pub fn adapted_metric_connection_form(
    m: &dyn Model,
    p: &AdaptedPoint,
) -> Result<DMatrix<f64>, GeometryError> {
    let fr = frame(m, p)?;
    let ubar = m.group().u_bar(&p.a);
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let mut g = DMatrix::zeros(np + nv + ng, np + nv + ng);
    let core = &fr.gh_pp + fr.a_d_p.transpose() * &fr.d * &fr.a_d_p;
    let pgp = fr.p_bot.transpose() * core * &fr.p_bot;
    let pqa = fr.p_bot.transpose() * fr.a_d_p.transpose() * &fr.d * &ubar;
    let va = fr.a_d_v.transpose() * &fr.d * &ubar;
    let dd = ubar.transpose() * &fr.d * &ubar;
    g.view_mut((0, 0), (np, np)).copy_from(&pgp);
    g.view_mut((0, np + nv), (np, ng)).copy_from(&pqa);
    g.view_mut((np, np), (nv, nv)).copy_from(&fr.g_v);
    g.view_mut((np, np + nv), (nv, ng)).copy_from(&va);
    g.view_mut((np + nv, 0), (ng, np)).copy_from(&pqa.transpose());
    g.view_mut((np + nv, np), (ng, nv)).copy_from(&va.transpose());
    g.view_mut((np + nv, np + nv), (ng, ng)).copy_from(&dd);
    Ok(g)
}

/// The pseudoinverse of the adapted metric.
pub fn adapted_pseudoinverse(m: &dyn Model, p: &AdaptedPoint) -> Result<DMatrix<f64>, GeometryError> {
    let fr = frame(m, p)?;
    let vbar = m.group().v_bar(&p.a);
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let gi = &fr.g_p_inv;
    let mut g = DMatrix::zeros(np + nv + ng, np + nv + ng);
    let b00 = &fr.h_pp;
    let b01 = -(&fr.n_pp * gi * fr.lambda.transpose() * fr.k_v.transpose());
    let b02 = &fr.n_pp * gi * fr.lambda.transpose() * vbar.transpose();
    let b11 = &fr.g_v_inv + &fr.n_vp * gi * fr.n_vp.transpose();
    let b12 = -(&fr.k_v * &fr.lambda * gi * fr.lambda.transpose() * vbar.transpose());
    let b22 = &vbar * &fr.lambda * gi * fr.lambda.transpose() * vbar.transpose();
    g.view_mut((0, 0), (np, np)).copy_from(b00);
    g.view_mut((0, np), (np, nv)).copy_from(&b01);
    g.view_mut((0, np + nv), (np, ng)).copy_from(&b02);
    g.view_mut((np, 0), (nv, np)).copy_from(&b01.transpose());
    g.view_mut((np, np), (nv, nv)).copy_from(&b11);
    g.view_mut((np, np + nv), (nv, ng)).copy_from(&b12);
    g.view_mut((np + nv, 0), (ng, np)).copy_from(&b02.transpose());
    g.view_mut((np + nv, np), (ng, nv)).copy_from(&b12.transpose());
    g.view_mut((np + nv, np + nv), (ng, ng)).copy_from(&b22);
    Ok(g)
}

/// The pseudoinverse assembled through the gamma-weighted connection,
/// equal to `adapted_pseudoinverse` by the two contraction identities.
pub fn adapted_pseudoinverse_connection_form(
    m: &dyn Model,
    p: &AdaptedPoint,
) -> Result<DMatrix<f64>, GeometryError> {
    let fr = frame(m, p)?;
    let vbar = m.group().v_bar(&p.a);
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let gi = &fr.g_p_inv;
    let ha = &fr.h_pp * fr.a_gam.transpose(); // h^{CB} contracted into A_gamma
    let mut g = DMatrix::zeros(np + nv + ng, np + nv + ng);
    let b01 = &ha * fr.k_v.transpose();
    let b02 = -(&ha * vbar.transpose());
    let b11 = &fr.g_v_inv + &fr.n_vp * gi * fr.n_vp.transpose();
    let b12 = -(&fr.k_v * &fr.lambda * gi * fr.lambda.transpose() * vbar.transpose());
    let b22 = &vbar * &fr.lambda * gi * fr.lambda.transpose() * vbar.transpose();
    g.view_mut((0, 0), (np, np)).copy_from(&fr.h_pp);
    g.view_mut((0, np), (np, nv)).copy_from(&b01);
    g.view_mut((0, np + nv), (np, ng)).copy_from(&b02);
    g.view_mut((np, 0), (nv, np)).copy_from(&b01.transpose());
    g.view_mut((np, np), (nv, nv)).copy_from(&b11);
    g.view_mut((np, np + nv), (nv, ng)).copy_from(&b12);
    g.view_mut((np + nv, 0), (ng, np)).copy_from(&b02.transpose());
    g.view_mut((np + nv, np), (ng, nv)).copy_from(&b12.transpose());
    g.view_mut((np + nv, np + nv), (ng, ng)).copy_from(&b22);
    Ok(g)
}

/// Target of the pseudoinversion: diag(P_perp, I, I).
pub fn pseudoinversion_target(m: &dyn Model, p: &AdaptedPoint) -> Result<DMatrix<f64>, GeometryError> {
    let fr = frame(m, p)?;
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let mut t = DMatrix::zeros(np + nv + ng, np + nv + ng);
    t.view_mut((0, 0), (np, np)).copy_from(&fr.p_bot);
    t.view_mut((np, np), (nv, nv))
        .copy_from(&DMatrix::identity(nv, nv));
    t.view_mut((np + nv, np + nv), (ng, ng))
        .copy_from(&DMatrix::identity(ng, ng));
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct DetFactorization {
    /// det of the adapted metric restricted to the surface basis (direct).
    pub det_direct: f64,
    pub det_d: f64,
    pub det_u_bar: f64,
    pub h_factor: f64,
    /// det_d * det_u_bar^2 * h_factor
    pub det_factored: f64,
}

/// Determinant factorization det G~ = d (det u_bar)^2 H, with the direct
/// determinant evaluated on the surface-adapted basis (free Q* directions,
/// V, and the group block).
pub fn det_factorization(m: &dyn Model, p: &AdaptedPoint) -> Result<DetFactorization, GeometryError> {
    let fr = frame(m, p)?;
    let full = adapted_metric(m, p)?;
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let nb = fr.basis.ncols();
    let mut sel = DMatrix::zeros(np + nv + ng, nb + nv + ng);
    sel.view_mut((0, 0), (np, nb)).copy_from(&fr.basis);
    sel.view_mut((np, nb), (nv + ng, nv + ng))
        .copy_from(&DMatrix::identity(nv + ng, nv + ng));
    let restricted = sel.transpose() * full * sel;
    let det_direct = restricted.determinant();
    let det_u_bar = m.group().u_bar(&p.a).determinant();
    let det_factored = fr.det_d * det_u_bar * det_u_bar * fr.h_det;
    Ok(DetFactorization {
        det_direct,
        det_d: fr.det_d,
        det_u_bar,
        h_factor: fr.h_det,
        det_factored,
    })
}
