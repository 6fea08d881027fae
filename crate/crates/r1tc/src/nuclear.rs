//! Nuclear-norm relaxation of the rank-1 matrix recovery problem.
//!
//! The partial matrix `X = a bᵀ` is relaxed to minimizing
//! `Trace(W1) + Trace(W2)` over the PSD block `[[W1, X], [Xᵀ, W2]]` subject
//! to the minor equalities and the anchor normalization `X[î,ĵ] = 1`. When
//! the optimal `X` is numerically rank one its top singular pair yields the
//! factors; otherwise the spectrum is handed back so the caller can escalate
//! to the moment method. For symmetric tensors the block is a single `V`
//! with nuclear norm `Trace(V)`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::reduction::{build_minors, build_minors_symmetric, MinorConstraint};
use crate::sdp::{
    self, svec_index, BlockMap, Equality, SdpOptions, SdpProblem, SdpStatus, SparseSym,
};
use crate::strong::{back_solve_c, BackSolve};
use crate::tensor::{
    anchor_index, residual, AnchorSelection, CompletionResult, Method, PartialTensor, Status,
};

/// Default threshold on σ₂/σ₁ (or λ₂/λ₁) below which the optimal matrix
/// counts as rank one.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Optimal matrix of the relaxation together with its rank analysis.
/// `factors` is set exactly when `numerical_rank == 1`.
#[derive(Debug, Clone)]
pub struct NuclearOutcome {
    pub matrix: DMatrix<f64>,
    /// Singular values (eigenvalues in the symmetric case), nonincreasing.
    pub spectrum: Vec<f64>,
    pub numerical_rank: usize,
    pub factors: Option<(Vec<f64>, Vec<f64>)>,
}

/// Why the nuclear path did not produce a completion.
#[derive(Debug)]
pub enum NuclearFailure {
    /// The relaxation solved but its optimum is not rank one.
    RankFailure(NuclearOutcome),
    /// The SDP did not reach optimality (the anchor-normalized model can be
    /// infeasible even for completable tensors, so nothing is concluded),
    /// or the extracted factors failed the slice back-solve.
    Deferred { reason: String },
}

fn x_var(n1: usize, big_n: usize, i: usize, j: usize) -> usize {
    // X[i, j] sits at Z[n1 + j, i], always strictly lower triangle
    svec_index(big_n, n1 + j, i)
}

fn minor_equalities(
    rows: &[MinorConstraint],
    var_of: impl Fn(usize, usize) -> usize,
) -> Vec<Equality> {
    rows.iter()
        .map(|row| Equality {
            coeffs: vec![
                (var_of(row.second.0, row.second.1), row.coeff_first),
                (var_of(row.first.0, row.first.1), row.coeff_second),
            ],
            rhs: 0.0,
        })
        .collect()
}

/// Resolve the normalization entry: the max-magnitude anchor by default, or
/// a caller-chosen observed nonzero entry. The completion problem itself is
/// invariant under this choice, but relaxation optima are not, so an
/// explicit override is occasionally useful for cross-checking against other
/// implementations.
fn pick_anchor(
    t: &PartialTensor,
    over: Option<(usize, usize, usize)>,
) -> Result<crate::tensor::AnchorIndex> {
    match over {
        None => match anchor_index(t)? {
            AnchorSelection::Entry(a) => Ok(a),
            AnchorSelection::AllZero => Err(crate::error::Error::EmptyObservations),
        },
        Some((i, j, k)) => match t.get(i, j, k) {
            Some(v) if v != 0.0 => Ok(crate::tensor::AnchorIndex {
                index: (i, j, k),
                value: v,
            }),
            _ => Err(crate::error::Error::InvalidAnchor {
                i: i + 1,
                j: j + 1,
                k: k + 1,
            }),
        },
    }
}

/// SDP form of the nuclear relaxation: one PSD block `[[W1, X], [Xᵀ, W2]]`
/// of size `n1 + n2`, objective `Trace(W1) + Trace(W2)`, equalities = all
/// minor constraints plus `X[anchor] = 1`.
pub fn build_nuclear_sdp(t: &PartialTensor) -> Result<SdpProblem> {
    build_nuclear_sdp_with_anchor(t, None)
}

/// [`build_nuclear_sdp`] with an explicit normalization entry (0-based).
pub fn build_nuclear_sdp_with_anchor(
    t: &PartialTensor,
    anchor_override: Option<(usize, usize, usize)>,
) -> Result<SdpProblem> {
    let anchor = pick_anchor(t, anchor_override)?;
    let (n1, n2, _) = t.dims();
    let big_n = n1 + n2;
    let num_vars = big_n * (big_n + 1) / 2;
    let coeffs: Vec<SparseSym> = (0..num_vars).map(|_| SparseSym::new()).collect();
    let mut block = BlockMap {
        dim: big_n,
        constant: SparseSym::new(),
        coeffs,
    };
    for j in 0..big_n {
        for i in j..big_n {
            block.coeffs[svec_index(big_n, i, j)].push(i, j, 1.0);
        }
    }
    let mut objective = vec![0.0; num_vars];
    for i in 0..big_n {
        objective[svec_index(big_n, i, i)] = 1.0;
    }
    let system = build_minors(t);
    let mut equalities = minor_equalities(&system.rows, |i, j| x_var(n1, big_n, i, j));
    let (ai, aj, _) = anchor.index;
    equalities.push(Equality {
        coeffs: vec![(x_var(n1, big_n, ai, aj), 1.0)],
        rhs: 1.0,
    });
    Ok(SdpProblem {
        num_vars,
        objective,
        blocks: vec![block],
        equalities,
    })
}

/// Symmetric variant: single PSD block `V` of size `n`, objective
/// `Trace(V)`, minors over unordered pairs plus `V[anchor] = 1`.
pub fn build_nuclear_sdp_symmetric(t: &PartialTensor) -> Result<SdpProblem> {
    build_nuclear_sdp_symmetric_with_anchor(t, None)
}

/// [`build_nuclear_sdp_symmetric`] with an explicit normalization entry
/// (0-based).
pub fn build_nuclear_sdp_symmetric_with_anchor(
    t: &PartialTensor,
    anchor_override: Option<(usize, usize, usize)>,
) -> Result<SdpProblem> {
    let anchor = pick_anchor(t, anchor_override)?;
    let n = t.dims().0;
    let num_vars = n * (n + 1) / 2;
    let coeffs: Vec<SparseSym> = (0..num_vars).map(|_| SparseSym::new()).collect();
    let mut block = BlockMap {
        dim: n,
        constant: SparseSym::new(),
        coeffs,
    };
    for j in 0..n {
        for i in j..n {
            block.coeffs[svec_index(n, i, j)].push(i, j, 1.0);
        }
    }
    let mut objective = vec![0.0; num_vars];
    for i in 0..n {
        objective[svec_index(n, i, i)] = 1.0;
    }
    let var_of = |i: usize, j: usize| svec_index(n, i.max(j), i.min(j));
    let system = build_minors_symmetric(t)?;
    let mut equalities = minor_equalities(&system.rows, var_of);
    let (ai, aj, _) = anchor.index;
    equalities.push(Equality {
        coeffs: vec![(var_of(ai, aj), 1.0)],
        rhs: 1.0,
    });
    Ok(SdpProblem {
        num_vars,
        objective,
        blocks: vec![block],
        equalities,
    })
}

fn all_zero_result(t: &PartialTensor) -> CompletionResult {
    let (n1, n2, n3) = t.dims();
    let mut r = CompletionResult::completed(
        Method::Nuclear,
        vec![0.0; n1],
        vec![0.0; n2],
        vec![0.0; n3],
        0.0,
    );
    r.c_determined = Some(vec![false; n3]);
    r
}

/// Solve the nuclear relaxation and extract factors when the optimum is
/// rank one.
pub fn solve_nuclear(
    t: &PartialTensor,
    tol_rank: f64,
    tol: f64,
    sdp_opts: &SdpOptions,
) -> Result<std::result::Result<CompletionResult, NuclearFailure>> {
    solve_nuclear_with_anchor(t, None, tol_rank, tol, sdp_opts)
}

/// [`solve_nuclear`] with an explicit normalization entry (0-based).
pub fn solve_nuclear_with_anchor(
    t: &PartialTensor,
    anchor_override: Option<(usize, usize, usize)>,
    tol_rank: f64,
    tol: f64,
    sdp_opts: &SdpOptions,
) -> Result<std::result::Result<CompletionResult, NuclearFailure>> {
    if matches!(anchor_index(t)?, AnchorSelection::AllZero) {
        return Ok(Ok(all_zero_result(t)));
    }
    let anchor = pick_anchor(t, anchor_override)?;
    let problem = build_nuclear_sdp_with_anchor(t, anchor_override)?;
    let sol = sdp::solve(&problem, sdp_opts)?;
    if sol.status != SdpStatus::Optimal {
        return Ok(Err(NuclearFailure::Deferred {
            reason: format!("relaxation SDP ended with {:?}", sol.status),
        }));
    }
    let (n1, n2, _) = t.dims();
    let z = &sol.block_values[0];
    let x = z.view((0, n1), (n1, n2)).into_owned();

    let svd = x.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&p, &q| {
        svd.singular_values[q]
            .partial_cmp(&svd.singular_values[p])
            .unwrap()
    });
    let spectrum: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma1 = spectrum[0];
    let numerical_rank = if sigma1 <= 0.0 {
        0
    } else {
        spectrum.iter().filter(|&&s| s > tol_rank * sigma1).count()
    };
    if numerical_rank != 1 {
        return Ok(Err(NuclearFailure::RankFailure(NuclearOutcome {
            matrix: x,
            spectrum,
            numerical_rank,
            factors: None,
        })));
    }

    let (ai, _, _) = anchor.index;
    let u = svd.u.as_ref().unwrap().column(order[0]).into_owned();
    let v = svd.v_t.as_ref().unwrap().row(order[0]).transpose();
    // X ≈ σ₁ u vᵀ with X[î,ĵ] = 1; scale so a[î] = 1, which forces b[ĵ] ≈ 1
    if u[ai].abs() < 1e-8 {
        return Ok(Err(NuclearFailure::Deferred {
            reason: "top singular vector vanishes at the anchor row".into(),
        }));
    }
    let a: Vec<f64> = (0..n1).map(|i| u[i] / u[ai]).collect();
    let b: Vec<f64> = (0..n2).map(|j| sigma1 * u[ai] * v[j]).collect();
    let (c, determined) = match back_solve_c(t, &a, &b, tol) {
        BackSolve::Solved { c, determined } => (c, determined),
        BackSolve::Infeasible { k } => {
            return Ok(Err(NuclearFailure::Deferred {
                reason: format!("rank-1 factors contradict slice {}", k + 1),
            }))
        }
    };
    let res = residual(t, &a, &b, &c)?;
    if res > tol {
        return Ok(Err(NuclearFailure::Deferred {
            reason: format!("extracted factors leave residual {res:.3e}"),
        }));
    }
    let mut result = CompletionResult::completed(Method::Nuclear, a, b, c, res);
    result.c_determined = Some(determined);
    Ok(Ok(result))
}

/// Symmetric nuclear relaxation: trace minimization over `V ⪰ 0`, rank-1
/// extraction via the top eigenpair, cube scale `τ` by least squares and
/// `a = b = c = ∛τ · v`.
pub fn solve_nuclear_symmetric(
    t: &PartialTensor,
    tol_rank: f64,
    tol: f64,
    sdp_opts: &SdpOptions,
) -> Result<std::result::Result<CompletionResult, NuclearFailure>> {
    solve_nuclear_symmetric_with_anchor(t, None, tol_rank, tol, sdp_opts)
}

/// [`solve_nuclear_symmetric`] with an explicit normalization entry
/// (0-based).
pub fn solve_nuclear_symmetric_with_anchor(
    t: &PartialTensor,
    anchor_override: Option<(usize, usize, usize)>,
    tol_rank: f64,
    tol: f64,
    sdp_opts: &SdpOptions,
) -> Result<std::result::Result<CompletionResult, NuclearFailure>> {
    if matches!(anchor_index(t)?, AnchorSelection::AllZero) {
        return Ok(Ok(all_zero_result(t)));
    }
    let anchor = pick_anchor(t, anchor_override)?;
    let problem = build_nuclear_sdp_symmetric_with_anchor(t, anchor_override)?;
    let sol = sdp::solve(&problem, sdp_opts)?;
    if sol.status != SdpStatus::Optimal {
        return Ok(Err(NuclearFailure::Deferred {
            reason: format!("relaxation SDP ended with {:?}", sol.status),
        }));
    }
    let n = t.dims().0;
    let v_mat = sol.block_values[0].clone();
    let eig = nalgebra::SymmetricEigen::new(v_mat.clone());
    let mut pairs: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    pairs.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
    let spectrum: Vec<f64> = pairs.iter().map(|&(l, _)| l).collect();
    let lambda1 = spectrum[0];
    let numerical_rank = if lambda1 <= 0.0 {
        0
    } else {
        spectrum.iter().filter(|&&l| l > tol_rank * lambda1).count()
    };
    if numerical_rank != 1 {
        return Ok(Err(NuclearFailure::RankFailure(NuclearOutcome {
            matrix: v_mat,
            spectrum,
            numerical_rank,
            factors: None,
        })));
    }
    let (ai, _, _) = anchor.index;
    let u = eig.eigenvectors.column(pairs[0].1);
    let mut v: Vec<f64> = (0..n).map(|i| lambda1.sqrt() * u[i]).collect();
    if v[ai] == 0.0 {
        return Ok(Err(NuclearFailure::Deferred {
            reason: "top eigenvector vanishes at the anchor".into(),
        }));
    }
    if v[ai] < 0.0 {
        for vi in v.iter_mut() {
            *vi = -*vi;
        }
    }
    // τ from least squares over A[i,j,k] ≈ τ v_i v_j v_k
    let mut num = 0.0;
    let mut den = 0.0;
    for ((i, j, k), val) in t.iter() {
        let m = v[i] * v[j] * v[k];
        num += m * val;
        den += m * m;
    }
    if den <= tol * tol {
        return Ok(Err(NuclearFailure::Deferred {
            reason: "degenerate cube-scale system".into(),
        }));
    }
    let tau = num / den;
    let scale = tau.cbrt();
    let factor: Vec<f64> = v.iter().map(|&x| scale * x).collect();
    let res = residual(t, &factor, &factor, &factor)?;
    if res > tol {
        return Ok(Err(NuclearFailure::Deferred {
            reason: format!("extracted factors leave residual {res:.3e}"),
        }));
    }
    let mut result =
        CompletionResult::completed(Method::Nuclear, factor.clone(), factor.clone(), factor, res);
    result.v = Some(v);
    result.tau = Some(tau);
    result.c_determined = Some(vec![true; n]);
    debug_assert_eq!(result.status, Status::Completed);
    Ok(Ok(result))
}
