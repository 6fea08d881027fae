//! Primal-dual interior-point core on the homogeneous self-dual embedding.
//!
//! The reduced LMI problem `min ĉᵀt s.t. Ĉ_b + Σ_j t_j Â_{b,j} ⪰ 0` is the
//! dual side of the internal conic pair
//!
//! ```text
//! (P) min ⟨c, x⟩   s.t. A x = b τ,  x ⪰ 0
//! (D) max bᵀ y     s.t. c τ − Aᵀ y = s ⪰ 0
//! ```
//!
//! with `c = svec(Ĉ)`, row `j` of `A` equal to `−svec(Â_j)`, `b = −ĉ` and
//! `t = y/τ`. The embedding couples (P) and (D) with the homogenizing pair
//! `(τ, κ)`; one path-following solve then ends either at `τ > 0` (optimal
//! pair) or at `κ > 0` with a Farkas-type ray certifying that the LMI
//! problem is infeasible or unbounded.
//!
//! Search directions use Nesterov–Todd scaling: with `W S W = X` and
//! `W = G Gᵀ`, the scaled iterates `Gᵀ S G = G⁻¹ X G⁻ᵀ = D` coincide and are
//! diagonal, which makes the Lyapunov correction of the Mehrotra second-order
//! term a pointwise division. The Newton system is condensed onto the Schur
//! complement `M = Ã Ãᵀ`, `Ã_j = svec(Gᵀ A_j G)`, and factored by dense
//! Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::presolve::ReducedSdp;
use super::{CertificateQuality, SdpOptions, SdpStatus};
use crate::par;

/// Length of the scaled vectorization of an `n × n` symmetric matrix.
pub fn svec_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of the lower-triangle entry `(i, j)`, `i ≥ j`, in column-major
/// svec order.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    (j * (2 * n + 1 - j)) / 2 + (i - j)
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut p = 0;
    for j in 0..n {
        out[p] = m[(j, j)];
        p += 1;
        for i in j + 1..n {
            out[p] = SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            p += 1;
        }
    }
}

fn sym_from_svec(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut p = 0;
    for j in 0..n {
        m[(j, j)] = v[p];
        p += 1;
        for i in j + 1..n {
            let x = v[p] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            p += 1;
        }
    }
    m
}

pub(super) struct HsdOutcome {
    pub status: SdpStatus,
    pub t: Vec<f64>,
    /// Realized PSD values of the active blocks, in their reduced order.
    pub block_values: Vec<DMatrix<f64>>,
    pub pobj: f64,
    pub dobj: f64,
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub certificate: Option<CertificateQuality>,
    pub note: Option<String>,
}

struct BlockShape {
    dim: usize,
    offset: usize,
}

/// Per-iteration Nesterov–Todd scaling data of one block.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    d: DVector<f64>,
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
    /// Scaled block images `G⁻¹ ΔX G⁻ᵀ` and `Gᵀ ΔS G`.
    dx_scaled: Vec<DMatrix<f64>>,
    ds_scaled: Vec<DMatrix<f64>>,
}

pub(super) fn solve_reduced(red: &ReducedSdp, opts: &SdpOptions) -> HsdOutcome {
    let k = red.obj.len();
    let shapes: Vec<BlockShape> = {
        let mut off = 0;
        red.active
            .iter()
            .map(|ab| {
                let s = BlockShape {
                    dim: ab.dim,
                    offset: off,
                };
                off += svec_dim(ab.dim);
                s
            })
            .collect()
    };
    let t_total: usize = red.active.iter().map(|ab| svec_dim(ab.dim)).sum();
    let nu: f64 = red.active.iter().map(|ab| ab.dim as f64).sum();

    // internal data, with per-row equilibration and global b/c scaling
    let mut a = DMatrix::zeros(k, t_total);
    let mut scratch = vec![0.0; t_total];
    for j in 0..k {
        for (ab, shape) in red.active.iter().zip(&shapes) {
            let mat = ab.coeffs[j].to_dense(ab.dim);
            svec_into(&mat, &mut scratch[shape.offset..shape.offset + svec_dim(ab.dim)]);
        }
        for (col, &v) in scratch.iter().enumerate() {
            a[(j, col)] = -v;
        }
    }
    let mut row_scale = vec![1.0; k];
    for j in 0..k {
        let top = a.row(j).amax();
        if top > 1e-12 {
            row_scale[j] = top;
            let mut row = a.row_mut(j);
            row /= top;
        }
    }
    let mut b = DVector::from_fn(k, |j, _| -red.obj[j] / row_scale[j]);
    let beta_b = b.amax().max(1.0);
    b /= beta_b;
    let mut c = DVector::zeros(t_total);
    for (ab, shape) in red.active.iter().zip(&shapes) {
        svec_into(
            &ab.constant,
            &mut scratch[shape.offset..shape.offset + svec_dim(ab.dim)],
        );
        for p in 0..svec_dim(ab.dim) {
            c[shape.offset + p] = scratch[shape.offset + p];
        }
    }
    let beta_c = c.amax().max(1.0);
    c /= beta_c;

    // starting point on the central ray
    let mut x = DVector::zeros(t_total);
    let mut s = DVector::zeros(t_total);
    for (ab, shape) in red.active.iter().zip(&shapes) {
        for dindex in 0..ab.dim {
            let pos = shape.offset + svec_index(ab.dim, dindex, dindex);
            x[pos] = 1.0;
            s[pos] = 1.0;
        }
    }
    let mut y = DVector::zeros(k);
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;
    let mu0 = (x.dot(&s) + tau * kappa) / (nu + 1.0);

    let norm_b = 1.0 + b.norm();
    let norm_c = 1.0 + c.norm();

    let unscale_t = |y: &DVector<f64>, tau: f64| -> Vec<f64> {
        (0..k)
            .map(|j| y[j] * beta_c / (row_scale[j] * tau))
            .collect()
    };
    let realized_blocks = |s: &DVector<f64>, tau: f64| -> Vec<DMatrix<f64>> {
        shapes
            .iter()
            .map(|shape| {
                let slice = &s.as_slice()[shape.offset..shape.offset + svec_dim(shape.dim)];
                sym_from_svec(slice, shape.dim) * (beta_c / tau)
            })
            .collect()
    };

    let mut best_note: Option<String> = None;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        // residuals of the embedding
        let r_p = &a * &x - &b * tau;
        let r_d = a.transpose() * &y + &s - &c * tau;
        let r_g = -c.dot(&x) + b.dot(&y) - kappa;
        let mu = (x.dot(&s) + tau * kappa) / (nu + 1.0);

        let pobj_int = c.dot(&x) / tau;
        let dobj_int = b.dot(&y) / tau;
        let prim_res = r_p.norm() / (tau * norm_b);
        let dual_res = r_d.norm() / (tau * norm_c);
        let rel_gap = (pobj_int - dobj_int).abs() / (1.0 + pobj_int.abs() + dobj_int.abs());

        if prim_res <= opts.tol_feas && dual_res <= opts.tol_feas && rel_gap <= opts.tol_gap {
            let scale_obj = beta_b * beta_c;
            return HsdOutcome {
                status: SdpStatus::Optimal,
                t: unscale_t(&y, tau),
                block_values: realized_blocks(&s, tau),
                pobj: -dobj_int * scale_obj,
                dobj: -pobj_int * scale_obj,
                primal_feas: dual_res,
                dual_feas: prim_res,
                rel_gap,
                iterations: iter,
                certificate: None,
                note: best_note,
            };
        }

        // Farkas-type certificates become meaningful once the embedding has
        // contracted; τ → 0 with κ bounded away flags the infeasible branch
        if mu <= 1e-2 * mu0 {
            let by = b.dot(&y);
            if by > 0.0 {
                let res = (a.transpose() * &y + &s).norm();
                if res <= opts.tol_feas.max(1e-9) * by * norm_c {
                    return HsdOutcome {
                        status: SdpStatus::DualInfeasibleOrUnbounded,
                        t: unscale_t(&y, tau.max(1e-300)),
                        block_values: Vec::new(),
                        pobj: f64::NEG_INFINITY,
                        dobj: f64::NEG_INFINITY,
                        primal_feas: f64::NAN,
                        dual_feas: f64::NAN,
                        rel_gap: f64::NAN,
                        iterations: iter,
                        certificate: Some(CertificateQuality {
                            violation: by / y.norm().max(1e-300),
                            residual: res / y.norm().max(1e-300),
                        }),
                        note: Some("objective ray certifies unboundedness".into()),
                    };
                }
            }
            let cx = c.dot(&x);
            if cx < 0.0 {
                let res = (&a * &x).norm();
                if res <= opts.tol_feas.max(1e-9) * (-cx) * norm_b {
                    return HsdOutcome {
                        status: SdpStatus::PrimalInfeasible,
                        t: vec![0.0; k],
                        block_values: Vec::new(),
                        pobj: f64::INFINITY,
                        dobj: f64::INFINITY,
                        primal_feas: f64::NAN,
                        dual_feas: f64::NAN,
                        rel_gap: f64::NAN,
                        iterations: iter,
                        certificate: Some(CertificateQuality {
                            violation: -cx / x.norm().max(1e-300),
                            residual: res / x.norm().max(1e-300),
                        }),
                        note: Some("separating ray certifies infeasibility".into()),
                    };
                }
            }
        }

        // Nesterov-Todd scaling per block
        let mut scalings = Vec::with_capacity(shapes.len());
        let mut breakdown: Option<String> = None;
        for shape in &shapes {
            let n = shape.dim;
            let xm = sym_from_svec(&x.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
            let sm = sym_from_svec(&s.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
            let (lx, ls) = match (cholesky_psd(&xm), cholesky_psd(&sm)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    breakdown = Some("iterate left the cone (Cholesky failed)".into());
                    break;
                }
            };
            let m_nt = ls.transpose() * &lx;
            let svd = match m_nt.try_svd(true, true, 1e-14, 10_000) {
                Some(svd) => svd,
                None => {
                    breakdown = Some("SVD of the scaling point failed".into());
                    break;
                }
            };
            let u = svd.u.unwrap();
            let v_t = svd.v_t.unwrap();
            let d = svd.singular_values.clone();
            if d.iter().any(|&di| di <= 0.0) {
                breakdown = Some("singular NT scaling".into());
                break;
            }
            let d_isqrt = DMatrix::from_diagonal(&d.map(|di| 1.0 / di.sqrt()));
            let g = &lx * v_t.transpose() * &d_isqrt;
            let g_inv = &d_isqrt * u.transpose() * ls.transpose();
            scalings.push(Scaling { g, g_inv, d });
        }
        if let Some(msg) = breakdown {
            return abnormal_exit(red, &shapes, &y, &s, tau, msg, iter, beta_c, &row_scale);
        }

        // scaled constraint rows and the Schur complement M = Ã Ãᵀ
        let rows: Vec<Vec<f64>> = par::map_range(k, |j| {
            let mut row = vec![0.0; t_total];
            for (shape, sc) in shapes.iter().zip(&scalings) {
                let n = shape.dim;
                let am = sym_from_svec(&a.row(j).transpose().as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
                let scaled = sc.g.transpose() * am * &sc.g;
                svec_into(&scaled, &mut row[shape.offset..shape.offset + svec_dim(n)]);
            }
            row
        });
        let a_tilde = DMatrix::from_fn(k, t_total, |r, cidx| rows[r][cidx]);
        let m = &a_tilde * a_tilde.transpose();

        // scale(C) and the projections q, ω
        let mut cs = DVector::zeros(t_total);
        for (shape, sc) in shapes.iter().zip(&scalings) {
            let n = shape.dim;
            let cm = sym_from_svec(&c.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
            let scaled = sc.g.transpose() * cm * &sc.g;
            svec_into(&scaled, &mut scratch[shape.offset..shape.offset + svec_dim(n)]);
            for p in 0..svec_dim(n) {
                cs[shape.offset + p] = scratch[shape.offset + p];
            }
        }
        let q = &a_tilde * &cs;
        let omega = cs.dot(&cs);

        let solve_newton = |m_chol: &Cholesky<f64, Dyn>,
                            rp: &DVector<f64>,
                            rd: &DVector<f64>,
                            rg: f64,
                            rc_scaled: &[DMatrix<f64>],
                            rtk: f64|
         -> Option<Direction> {
            // unscale the complementarity residual and scale r_d
            let mut r_c = DVector::zeros(t_total);
            let mut s_rd = DVector::zeros(t_total);
            for ((shape, sc), rc) in shapes.iter().zip(&scalings).zip(rc_scaled) {
                let n = shape.dim;
                let un = &sc.g * rc * sc.g.transpose();
                let mut buf = vec![0.0; svec_dim(n)];
                svec_into(&un, &mut buf);
                for (p, &v) in buf.iter().enumerate() {
                    r_c[shape.offset + p] = v;
                }
                let rdm =
                    sym_from_svec(&rd.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
                let sc_rd = sc.g.transpose() * rdm * &sc.g;
                svec_into(&sc_rd, &mut buf);
                for (p, &v) in buf.iter().enumerate() {
                    s_rd[shape.offset + p] = v;
                }
            }
            let r1 = rp - &a * &r_c + &a_tilde * &s_rd;
            let r2 = rg + c.dot(&r_c) - cs.dot(&s_rd) + rtk / tau;
            let g1 = m_chol.solve(&r1);
            let g2 = m_chol.solve(&(&q + &b));
            let denom = (&b - &q).dot(&g2) + omega + kappa / tau;
            if denom <= 0.0 || !denom.is_finite() {
                return None;
            }
            let dtau = (r2 - (&b - &q).dot(&g1)) / denom;
            let dy = &g1 + &g2 * dtau;
            let ds = rd - a.transpose() * &dy + &c * dtau;
            // Δx = r_C − svec(W ΔS W), via the scaled image of ΔS
            let mut dx = r_c.clone();
            let mut ds_scaled = Vec::with_capacity(shapes.len());
            let mut dx_scaled = Vec::with_capacity(shapes.len());
            for (shape, sc) in shapes.iter().zip(&scalings) {
                let n = shape.dim;
                let dsm =
                    sym_from_svec(&ds.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
                let ds_sc = sc.g.transpose() * dsm * &sc.g;
                let w_ds_w = &sc.g * &ds_sc * sc.g.transpose();
                let mut buf = vec![0.0; svec_dim(n)];
                svec_into(&w_ds_w, &mut buf);
                for (p, &v) in buf.iter().enumerate() {
                    dx[shape.offset + p] -= v;
                }
                ds_scaled.push(ds_sc);
                let dxm =
                    sym_from_svec(&dx.as_slice()[shape.offset..shape.offset + svec_dim(n)], n);
                dx_scaled.push(&sc.g_inv * dxm * sc.g_inv.transpose());
            }
            let dkappa = (rtk - kappa * dtau) / tau;
            Some(Direction {
                dx,
                dy,
                ds,
                dtau,
                dkappa,
                dx_scaled,
                ds_scaled,
            })
        };

        let step_bound = |dir: &Direction| -> f64 {
            let mut rate = 0.0_f64;
            for ((shape, sc), (dxs, dss)) in shapes
                .iter()
                .zip(&scalings)
                .zip(dir.dx_scaled.iter().zip(&dir.ds_scaled))
            {
                let n = shape.dim;
                for matv in [dxs, dss] {
                    let mut e = DMatrix::zeros(n, n);
                    for i in 0..n {
                        for jj in 0..n {
                            e[(i, jj)] = matv[(i, jj)] / (sc.d[i] * sc.d[jj]).sqrt();
                        }
                    }
                    let lam = super::min_eigenvalue(&e);
                    rate = rate.max(-lam);
                }
            }
            if dir.dtau < 0.0 {
                rate = rate.max(-dir.dtau / tau);
            }
            if dir.dkappa < 0.0 {
                rate = rate.max(-dir.dkappa / kappa);
            }
            if rate > 0.0 {
                1.0 / rate
            } else {
                f64::INFINITY
            }
        };

        // predictor / corrector, retried with an escalating ridge on the
        // Schur complement when roundoff makes the condensed system
        // numerically indefinite
        let rc_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| -DMatrix::from_diagonal(&sc.d))
            .collect();
        let trace_avg = m.trace().abs() / k as f64;
        let mut combined: Option<Direction> = None;
        let mut ridge = 0.0_f64;
        for _attempt in 0..4 {
            let mut m_reg = m.clone();
            if ridge > 0.0 {
                for idx in 0..k {
                    m_reg[(idx, idx)] += ridge;
                }
            }
            let escalate = |r: f64| {
                if r == 0.0 {
                    1e-14 * trace_avg.max(1e-300)
                } else {
                    r * 1e4
                }
            };
            let m_chol = match Cholesky::new(m_reg) {
                Some(ch) => ch,
                None => {
                    ridge = escalate(ridge);
                    continue;
                }
            };
            let aff = match solve_newton(&m_chol, &(-&r_p), &(-&r_d), -r_g, &rc_aff, -tau * kappa)
            {
                Some(dir) => dir,
                None => {
                    ridge = escalate(ridge);
                    continue;
                }
            };
            let alpha_aff = step_bound(&aff).min(1.0);
            let mu_aff = ((&x + &aff.dx * alpha_aff).dot(&(&s + &aff.ds * alpha_aff))
                + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa))
                / (nu + 1.0);
            let sigma = ((mu_aff / mu).max(0.0).powi(3)).min(1.0);

            // combined direction with the Mehrotra second-order correction
            let eta = 1.0 - sigma;
            let rc_comb: Vec<DMatrix<f64>> = scalings
                .iter()
                .zip(aff.dx_scaled.iter().zip(&aff.ds_scaled))
                .map(|(sc, (dxs, dss))| {
                    let n = sc.d.len();
                    let cross = dxs * dss;
                    let mut num = DMatrix::zeros(n, n);
                    for i in 0..n {
                        for jj in 0..n {
                            let mut v = -(cross[(i, jj)] + cross[(jj, i)]);
                            if i == jj {
                                v += 2.0 * sigma * mu - 2.0 * sc.d[i] * sc.d[i];
                            }
                            num[(i, jj)] = v / (sc.d[i] + sc.d[jj]);
                        }
                    }
                    num
                })
                .collect();
            let rtk_comb = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
            match solve_newton(
                &m_chol,
                &(-&r_p * eta),
                &(-&r_d * eta),
                -r_g * eta,
                &rc_comb,
                rtk_comb,
            ) {
                Some(dir) => {
                    combined = Some(dir);
                    break;
                }
                None => {
                    ridge = escalate(ridge);
                    continue;
                }
            }
        }
        let dir = match combined {
            Some(dir) => dir,
            None => {
                return abnormal_exit(
                    red,
                    &shapes,
                    &y,
                    &s,
                    tau,
                    "Newton system stayed indefinite under regularization".into(),
                    iter,
                    beta_c,
                    &row_scale,
                )
            }
        };
        let alpha = (0.98 * step_bound(&dir)).min(1.0);
        if alpha < 1e-10 {
            return abnormal_exit(
                red,
                &shapes,
                &y,
                &s,
                tau,
                format!("step length collapsed at iteration {iter}"),
                iter,
                beta_c,
                &row_scale,
            );
        }

        x += &dir.dx * alpha;
        s += &dir.ds * alpha;
        y += &dir.dy * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if tau <= 0.0 || kappa <= 0.0 {
            return abnormal_exit(
                red,
                &shapes,
                &y,
                &s,
                tau.max(1e-300),
                "homogenizing variables left the positive orthant".into(),
                iter,
                beta_c,
                &row_scale,
            );
        }
        best_note = None;
    }

    abnormal_exit(
        red,
        &shapes,
        &y,
        &s,
        tau,
        format!("no convergence within {} iterations", opts.max_iter),
        iterations,
        beta_c,
        &row_scale,
    )
}

#[allow(clippy::too_many_arguments)]
fn abnormal_exit(
    _red: &ReducedSdp,
    shapes: &[BlockShape],
    y: &DVector<f64>,
    s: &DVector<f64>,
    tau: f64,
    msg: String,
    iter: usize,
    beta_c: f64,
    row_scale: &[f64],
) -> HsdOutcome {
    let t: Vec<f64> = (0..y.len())
        .map(|j| y[j] * beta_c / (row_scale[j] * tau))
        .collect();
    let block_values = shapes
        .iter()
        .map(|shape| {
            let slice = &s.as_slice()[shape.offset..shape.offset + svec_dim(shape.dim)];
            sym_from_svec(slice, shape.dim) * (beta_c / tau)
        })
        .collect();
    HsdOutcome {
        status: SdpStatus::MaxIterations,
        t,
        block_values,
        pobj: f64::NAN,
        dobj: f64::NAN,
        primal_feas: f64::NAN,
        dual_feas: f64::NAN,
        rel_gap: f64::NAN,
        iterations: iter,
        certificate: None,
        note: Some(msg),
    }
}

fn cholesky_psd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|ch| ch.l())
}

fn cholesky_with_jitter(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let trace_avg = m.trace().abs() / n as f64;
    let mut jitter = 0.0;
    for attempt in 0..4 {
        let mut try_m = m.clone();
        if attempt > 0 {
            jitter = if jitter == 0.0 {
                1e-14 * trace_avg.max(1e-300)
            } else {
                jitter * 1e4
            };
            for i in 0..n {
                try_m[(i, i)] += jitter;
            }
        }
        if let Some(ch) = Cholesky::new(try_m) {
            return Some(ch);
        }
    }
    None
}
