//! Drift ingredients on the gauge surface: divergence-form drifts, the
//! orbit mean-curvature projection j2, the orbit-space mean-curvature
//! normal j1, horizontal Christoffel contractions, and the reduction
//! Jacobian integrand.

use crate::error::GeometryError;
use crate::geometry::{frame_jet, sigma_from_jet, tensors_at, Frame, FrameJet, SigmaDerivs};
use crate::model::{AdaptedPoint, Model};
use nalgebra::{DMatrix, DVector};

/// All drift pieces at one adapted point, without the mu^2 kappa prefactors.
#[derive(Debug, Clone)]
pub struct DriftBundle {
    pub b_div_q: DVector<f64>,
    pub b_div_v: DVector<f64>,
    /// Group-direction divergence drift at a = identity (v_bar = I, and the
    /// v_bar-derivative term evaluated there).
    pub b_div_g: DVector<f64>,
    pub j2_q: DVector<f64>,
    pub j2_v: DVector<f64>,
    pub j1_q: DVector<f64>,
    pub j1_v: DVector<f64>,
    pub christoffel_q: DVector<f64>,
    pub christoffel_v: DVector<f64>,
    pub jacobian: JacobianIntegrand,
}

/// The scalar ingredients of the reduction Jacobian at a point.
#[derive(Debug, Clone, Copy)]
pub struct JacobianIntegrand {
    /// Delta^H_Sigma sigma (without the j1 terms).
    pub lap_h_sigma: f64,
    /// Delta~_Sigma sigma = Delta^H_Sigma sigma + 2 j1 . d sigma.
    pub lap_tilde_sigma: f64,
    /// <d sigma, d sigma>_Sigma.
    pub grad_sigma_sq: f64,
}

impl JacobianIntegrand {
    /// J = -(1/8) mu^2 kappa (Delta^H sigma + 1/4 <ds,ds>); the caller
    /// supplies the scale.
    pub fn j_value(&self, mu2kappa: f64) -> f64 {
        -0.125 * mu2kappa * (self.lap_h_sigma + 0.25 * self.grad_sigma_sq)
    }

    /// Integrand of the closed-form log-weight: Delta~ sigma + 1/4 <ds,ds>.
    pub fn weight_integrand(&self) -> f64 {
        self.lap_tilde_sigma + 0.25 * self.grad_sigma_sq
    }
}

/// Project a list of raw direction derivatives: the Q*-derivative along A
/// is P_perp^D_A times the raw derivative along D.
fn project_q<T>(raw: &[T], p_bot: &DMatrix<f64>) -> Vec<T>
where
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Clone + Default,
{
    let np = p_bot.nrows();
    (0..np)
        .map(|a| {
            let mut acc = T::default();
            for dd in 0..np {
                let w = p_bot[(dd, a)];
                if w != 0.0 {
                    acc = acc + raw[dd].clone() * w;
                }
            }
            acc
        })
        .collect()
}

fn project_q_mats(raw: &[DMatrix<f64>], p_bot: &DMatrix<f64>, rows: usize, cols: usize) -> Vec<DMatrix<f64>> {
    let np = p_bot.nrows();
    (0..np)
        .map(|a| {
            let mut acc = DMatrix::zeros(rows, cols);
            for dd in 0..np {
                let w = p_bot[(dd, a)];
                if w != 0.0 {
                    acc += &raw[dd] * w;
                }
            }
            acc
        })
        .collect()
}

/// Lower-index horizontal Christoffel symbols HGamma_{B~ M~ D~} from
/// P_perp-projected derivatives of the horizontal metric blocks, over the
/// multi-index (P directions, then V directions).
pub struct HorizontalChristoffel {
    /// lower[b][m][d]
    pub lower: Vec<Vec<Vec<f64>>>,
    /// Contraction h^{B~ M~} HGamma^{D~}_{B~ M~} with the canonical
    /// block-diagonal ambient lift.
    pub contraction: DVector<f64>,
}

pub fn horizontal_christoffel(jet: &FrameJet) -> HorizontalChristoffel {
    let fr = &jet.frame;
    let (np, nv) = (fr.dim_p(), fr.dim_v());
    let nd = np + nv;

    // full horizontal metric and its projected derivatives
    let gh_full = |pp: &DMatrix<f64>, pv: &DMatrix<f64>, vv: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(nd, nd);
        m.view_mut((0, 0), (np, np)).copy_from(pp);
        m.view_mut((0, np), (np, nv)).copy_from(pv);
        m.view_mut((np, 0), (nv, np)).copy_from(&pv.transpose());
        m.view_mut((np, np), (nv, nv)).copy_from(vv);
        m
    };
    let raw: Vec<DMatrix<f64>> = (0..nd)
        .map(|dir| gh_full(&jet.d_gh_pp[dir], &jet.d_gh_pv[dir], &jet.d_gh_vv[dir]))
        .collect();
    let mut dgh = project_q_mats(&raw[..np], &fr.p_bot, nd, nd);
    dgh.extend_from_slice(&raw[np..]);

    let mut lower = vec![vec![vec![0.0; nd]; nd]; nd];
    for b in 0..nd {
        for mm in 0..nd {
            for dd in 0..nd {
                lower[b][mm][dd] =
                    0.5 * (dgh[mm][(b, dd)] + dgh[b][(mm, dd)] - dgh[dd][(b, mm)]);
            }
        }
    }

    // canonical lift with the block-diagonal ambient inverse metric
    let mut ginv = DMatrix::zeros(nd, nd);
    ginv.view_mut((0, 0), (np, np)).copy_from(&fr.g_p_inv);
    ginv.view_mut((np, np), (nv, nv)).copy_from(&fr.g_v_inv);

    let mut h_full = DMatrix::zeros(nd, nd);
    h_full.view_mut((0, 0), (np, np)).copy_from(&fr.h_pp);
    h_full
        .view_mut((0, np), (np, nv))
        .copy_from(&fr.h_vp.transpose());
    h_full.view_mut((np, 0), (nv, np)).copy_from(&fr.h_vp);
    h_full.view_mut((np, np), (nv, nv)).copy_from(&fr.h_vv);

    let mut contraction = DVector::zeros(nd);
    for dup in 0..nd {
        let mut acc = 0.0;
        for b in 0..nd {
            for mm in 0..nd {
                let h = h_full[(b, mm)];
                if h != 0.0 {
                    let mut up = 0.0;
                    for dl in 0..nd {
                        up += ginv[(dup, dl)] * lower[b][mm][dl];
                    }
                    acc += h * up;
                }
            }
        }
        contraction[dup] = acc;
    }

    HorizontalChristoffel { lower, contraction }
}

/// -1/2 h^{B~ M~} HGamma^._{B~ M~}, split into P and V components.
pub fn horizontal_christoffel_contractions(
    m: &dyn Model,
    p: &AdaptedPoint,
) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
    let jet = frame_jet(m, &p.q_star, &p.f_tilde)?;
    let hc = horizontal_christoffel(&jet);
    Ok(split_contraction(&hc.contraction, jet.frame.dim_p()))
}

fn split_contraction(c: &DVector<f64>, np: usize) -> (DVector<f64>, DVector<f64>) {
    let nv = c.len() - np;
    (
        DVector::from_fn(np, |i, _| -0.5 * c[i]),
        DVector::from_fn(nv, |i, _| -0.5 * c[np + i]),
    )
}

/// Divergence-form drifts of the adapted-coordinate equations, evaluated
/// from the frame jet (the 1/2 is included; mu^2 kappa is not).
pub fn drift_divergence_form(jet: &FrameJet) -> (DVector<f64>, DVector<f64>) {
    let fr = &jet.frame;
    let (np, nv) = (fr.dim_p(), fr.dim_v());
    let vol = fr.vol;

    // d(vol * X)[dir] = dvol[dir] X + vol dX[dir], projected in Q-dirs
    let dvh_pp_raw: Vec<DMatrix<f64>> = (0..np)
        .map(|dir| &fr.h_pp * jet.d_vol[dir] + &jet.d_h_pp[dir] * vol)
        .collect();
    let dvh_pp = project_q_mats(&dvh_pp_raw, &fr.p_bot, np, np);
    let dvh_vp_raw: Vec<DMatrix<f64>> = (0..np)
        .map(|dir| &fr.h_vp * jet.d_vol[dir] + &jet.d_h_vp[dir] * vol)
        .collect();
    let dvh_vp_q = project_q_mats(&dvh_vp_raw, &fr.p_bot, nv, np);

    let mut b_q = DVector::zeros(np);
    for bb in 0..np {
        let mut acc = 0.0;
        for a in 0..np {
            acc += dvh_pp[a][(a, bb)];
        }
        for a in 0..nv {
            let dir = np + a;
            acc += jet.d_vol[dir] * fr.h_vp[(a, bb)] + vol * jet.d_h_vp[dir][(a, bb)];
        }
        b_q[bb] = 0.5 * acc / vol;
    }

    let mut b_v = DVector::zeros(nv);
    for bb in 0..nv {
        let mut acc = 0.0;
        for a in 0..np {
            // h^{A b} = h_vp[(b, A)]
            acc += dvh_vp_q[a][(bb, a)];
        }
        for a in 0..nv {
            let dir = np + a;
            acc += jet.d_vol[dir] * fr.h_vv[(a, bb)] + vol * jet.d_h_vv[dir][(a, bb)];
        }
        b_v[bb] = 0.5 * acc / vol;
    }
    (b_q, b_v)
}

/// The two group-direction divergence coefficients (per J_nu / per v_bar
/// application): c^nu = -1/(2 vol) [ sum_A D_A(vol h^{AC} Agam^nu_C)
/// + G Lambda Lambda^{nu mu} sum_b d_b(vol K^b_mu) ].
pub fn group_divergence_coefficients(jet: &FrameJet, m: &dyn Model) -> DVector<f64> {
    let fr = &jet.frame;
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let vol = fr.vol;

    let dvh_raw: Vec<DMatrix<f64>> = (0..np)
        .map(|dir| &jet.ha_gam * jet.d_vol[dir] + &jet.d_ha_gam[dir] * vol)
        .collect();
    let dvh = project_q_mats(&dvh_raw, &fr.p_bot, np, ng);

    let gens = m.generators();
    let mut c = DVector::zeros(ng);
    for nu in 0..ng {
        let mut acc = 0.0;
        for a in 0..np {
            acc += dvh[a][(a, nu)];
        }
        let mut fterm = 0.0;
        for mu in 0..ng {
            let mut div_k = 0.0;
            for b in 0..nv {
                div_k += jet.d_vol[np + b] * fr.k_v[(b, mu)] + vol * gens[mu][(b, b)];
            }
            fterm += fr.g_lam_lam[(nu, mu)] * div_k;
        }
        c[nu] = -0.5 * (acc + fterm) / vol;
    }
    c
}

/// j2 in the sigma form: 1/4 (X1 X1^T) grad sigma.
pub fn j2_sigma_form(jet: &FrameJet) -> (DVector<f64>, DVector<f64>) {
    let fr = &jet.frame;
    let sd = sigma_from_jet(jet);
    let q = (&fr.h_pp * &sd.d_q + fr.h_vp.transpose() * &sd.d_v) * 0.25;
    let v = (&fr.h_vp * &sd.d_q + &fr.h_vv * &sd.d_v) * 0.25;
    (q, v)
}

/// Christoffel symbols of metric_p at q.
pub fn christoffel_p(m: &dyn Model, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let np = m.dim_p();
    let g_inv = m
        .metric_p(q)
        .cholesky()
        .expect("metric_p must be positive definite")
        .inverse();
    let dg = m.metric_p_grad(q);
    (0..np)
        .map(|c| {
            DMatrix::from_fn(np, np, |a, b| {
                let mut acc = 0.0;
                for e in 0..np {
                    acc += 0.5
                        * g_inv[(c, e)]
                        * (dg[a][(e, b)] + dg[b][(e, a)] - dg[e][(a, b)]);
                }
                acc
            })
        })
        .collect()
}

/// Covariant orbit second derivatives (nabla_{K_alpha} K_beta) on P and V.
pub fn orbit_nabla_kk(
    m: &dyn Model,
    fr: &Frame,
) -> (Vec<Vec<DVector<f64>>>, Vec<Vec<DVector<f64>>>) {
    let (nv, ng) = (fr.dim_v(), fr.dim_g());
    let np = fr.dim_p();
    let dk = m.killing_p_grad(&fr.q);
    let gamma_sym = christoffel_p(m, &fr.q);
    let gens = m.generators();

    let p_part: Vec<Vec<DVector<f64>>> = (0..ng)
        .map(|alpha| {
            (0..ng)
                .map(|beta| {
                    DVector::from_fn(np, |c, _| {
                        let mut acc = 0.0;
                        for a in 0..np {
                            acc += fr.k_p[(a, alpha)] * dk[a][(c, beta)];
                            for b in 0..np {
                                acc += fr.k_p[(a, alpha)]
                                    * fr.k_p[(b, beta)]
                                    * gamma_sym[c][(a, b)];
                            }
                        }
                        acc
                    })
                })
                .collect()
        })
        .collect();
    let v_part: Vec<Vec<DVector<f64>>> = (0..ng)
        .map(|alpha| {
            (0..ng)
                .map(|beta| {
                    let col = &gens[beta] * fr.k_v.column(alpha);
                    DVector::from_fn(nv, |c, _| col[c])
                })
                .collect()
        })
        .collect();
    (p_part, v_part)
}

/// The orbit mean-curvature vector in the adapted basis: components along
/// (Q*, f~, a)-directions at group coordinate a of the point.
pub fn orbit_mean_curvature(
    m: &dyn Model,
    p: &AdaptedPoint,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>), GeometryError> {
    let fr = tensors_at(m, &p.q_star, &p.f_tilde)?;
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let (nkk_p, nkk_v) = orbit_nabla_kk(m, &fr);

    let mut dkk_p = DVector::zeros(np);
    let mut dkk_v = DVector::zeros(nv);
    for alpha in 0..ng {
        for beta in 0..ng {
            let w = fr.d_inv[(alpha, beta)];
            dkk_p += &nkk_p[alpha][beta] * w;
            dkk_v += &nkk_v[alpha][beta] * w;
        }
    }

    let mu_q = (&fr.n_pp * &dkk_p) * 0.5;
    let mu_v = (&fr.n_vp * &dkk_p + &dkk_v) * 0.5;
    let vbar = m.group().v_bar(&p.a);
    // Lambda Pi~ contractions of both parts
    let lam_pi_p = &fr.lambda * &fr.pi_pp;
    let lam_pi_v = &fr.lambda * &fr.pi_pv;
    let mu_a = (&vbar * (lam_pi_p * &dkk_p + lam_pi_v * &dkk_v)) * 0.5;
    Ok((mu_q, mu_v, mu_a))
}

/// j2 in the mean-curvature (projection) form.
pub fn j2_curvature_form(
    m: &dyn Model,
    p: &AdaptedPoint,
) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
    let fr = tensors_at(m, &p.q_star, &p.f_tilde)?;
    let (np, nv, ng) = (fr.dim_p(), fr.dim_v(), fr.dim_g());
    let (nkk_p, nkk_v) = orbit_nabla_kk(m, &fr);
    let mut dkk_p = DVector::zeros(np);
    let mut dkk_v = DVector::zeros(nv);
    for alpha in 0..ng {
        for beta in 0..ng {
            let w = fr.d_inv[(alpha, beta)];
            dkk_p += &nkk_p[alpha][beta] * w;
            dkk_v += &nkk_v[alpha][beta] * w;
        }
    }
    // -1/2 G^{CC'} N^L_{C'} N^{B'}_C G_{B B'} (...)^B  ==  -1/2 (N G^{-1} N^T G dkk)^L
    let sandwich = &fr.n_pp * &fr.g_p_inv * fr.n_pp.transpose() * &fr.g_p;
    let j2_q = -(sandwich * &dkk_p) * 0.5;
    let j2_v = -((&fr.n_vp * &dkk_p) + &dkk_v) * 0.5;
    Ok((j2_q, j2_v))
}

/// j1 via the N-derivative representations.
pub fn j1_from_jet(jet: &FrameJet, hc: &HorizontalChristoffel) -> (DVector<f64>, DVector<f64>) {
    let fr = &jet.frame;
    let (np, nv) = (fr.dim_p(), fr.dim_v());
    let dn_pp = project_q_mats(&jet.d_n_pp[..np], &fr.p_bot, np, np);
    let dn_vp = project_q_mats(&jet.d_n_vp[..np], &fr.p_bot, nv, np);

    let hg = &hc.contraction;
    let mut j1_q = DVector::zeros(np);
    for a in 0..np {
        let mut t1 = 0.0;
        for b in 0..np {
            for mm in 0..np {
                t1 += fr.h_pp[(b, mm)] * dn_pp[mm][(a, b)];
            }
        }
        let mut nc = 0.0;
        for c in 0..np {
            nc += fr.n_pp[(a, c)] * hg[c];
        }
        j1_q[a] = 0.5 * t1 + 0.5 * (hg[a] - nc);
    }
    let mut j1_v = DVector::zeros(nv);
    for a in 0..nv {
        let mut t1 = 0.0;
        for c in 0..np {
            for mm in 0..np {
                t1 += fr.h_pp[(c, mm)] * dn_vp[mm][(a, c)];
            }
        }
        let mut nc = 0.0;
        for c in 0..np {
            nc += fr.n_vp[(a, c)] * hg[c];
        }
        j1_v[a] = 0.5 * t1 - 0.5 * nc;
    }
    (j1_q, j1_v)
}

/// The pre-elimination form of j1^a: -1/2 N^a_C (h^{BM} N^C_{B,M} + hGamma^C).
pub fn j1_v_projected_form(jet: &FrameJet, hc: &HorizontalChristoffel) -> DVector<f64> {
    let fr = &jet.frame;
    let (np, nv) = (fr.dim_p(), fr.dim_v());
    let dn_pp = project_q_mats(&jet.d_n_pp[..np], &fr.p_bot, np, np);
    let hg = &hc.contraction;
    DVector::from_fn(nv, |a, _| {
        let mut acc = 0.0;
        for c in 0..np {
            let mut inner = hg[c];
            for b in 0..np {
                for mm in 0..np {
                    inner += fr.h_pp[(b, mm)] * dn_pp[mm][(c, b)];
                }
            }
            acc += fr.n_vp[(a, c)] * inner;
        }
        -0.5 * acc
    })
}

/// jacobian integrand pieces from the jet.
pub fn jacobian_from_jet(
    jet: &FrameJet,
    hc: &HorizontalChristoffel,
    sd: &SigmaDerivs,
    j1_q: &DVector<f64>,
    j1_v: &DVector<f64>,
) -> JacobianIntegrand {
    let fr = &jet.frame;
    let (np, nv) = (fr.dim_p(), fr.dim_v());
    let hg = &hc.contraction;

    let mut lap = 0.0;
    for a in 0..np {
        for b in 0..np {
            lap += fr.h_pp[(a, b)] * sd.d_qq[(a, b)];
        }
    }
    for a in 0..np {
        for b in 0..nv {
            lap += 2.0 * fr.h_vp[(b, a)] * sd.d_qv[(a, b)];
        }
    }
    for a in 0..nv {
        for b in 0..nv {
            lap += fr.h_vv[(a, b)] * sd.d_vv[(a, b)];
        }
    }
    for a in 0..np {
        lap -= hg[a] * sd.d_q[a];
    }
    for a in 0..nv {
        lap -= hg[np + a] * sd.d_v[a];
    }

    let grad_sq = (sd.d_q.transpose() * &fr.h_pp * &sd.d_q)[(0, 0)]
        + 2.0 * (sd.d_v.transpose() * &fr.h_vp * &sd.d_q)[(0, 0)]
        + (sd.d_v.transpose() * &fr.h_vv * &sd.d_v)[(0, 0)];

    let lap_tilde = lap + 2.0 * (j1_q.dot(&sd.d_q) + j1_v.dot(&sd.d_v));

    JacobianIntegrand {
        lap_h_sigma: lap,
        lap_tilde_sigma: lap_tilde,
        grad_sigma_sq: grad_sq,
    }
}

/// The spec-level jacobian operation.
pub fn jacobian_integrand(m: &dyn Model, p: &AdaptedPoint) -> Result<JacobianIntegrand, GeometryError> {
    let jet = frame_jet(m, &p.q_star, &p.f_tilde)?;
    let hc = horizontal_christoffel(&jet);
    let sd = sigma_from_jet(&jet);
    let (j1_q, j1_v) = j1_from_jet(&jet, &hc);
    Ok(jacobian_from_jet(&jet, &hc, &sd, &j1_q, &j1_v))
}

/// Everything at once (shared jet), the main entry point for tests and the
/// generic stepper.
pub fn drift_bundle(m: &dyn Model, p: &AdaptedPoint) -> Result<DriftBundle, GeometryError> {
    let jet = frame_jet(m, &p.q_star, &p.f_tilde)?;
    let hc = horizontal_christoffel(&jet);
    let sd = sigma_from_jet(&jet);
    let (b_div_q, b_div_v) = drift_divergence_form(&jet);
    let (j2_q, j2_v) = j2_sigma_form(&jet);
    let (j1_q, j1_v) = j1_from_jet(&jet, &hc);
    let (christoffel_q, christoffel_v) = split_contraction(&hc.contraction, jet.frame.dim_p());
    let jacobian = jacobian_from_jet(&jet, &hc, &sd, &j1_q, &j1_v);
    let b_div_g = group_divergence_coefficients(&jet, m);
    Ok(DriftBundle {
        b_div_q,
        b_div_v,
        b_div_g,
        j2_q,
        j2_v,
        j1_q,
        j1_v,
        christoffel_q,
        christoffel_v,
        jacobian,
    })
}
