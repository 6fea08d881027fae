//! Self-contained dense semidefinite programming solver.
//!
//! Problems are stated in linear-matrix-inequality form over a free variable
//! vector `y`:
//!
//! ```text
//! minimize    objective · y
//! subject to  C_b + Σ_i y_i · A_{b,i}  ⪰ 0      for every block b
//!             e · y = d                          for every equality
//! ```
//!
//! [`solve`] first eliminates the equalities exactly (they are resolved into
//! an affine parameterization of `y`, so returned solutions satisfy them to
//! rounding), then runs a primal-dual interior-point method with
//! Nesterov–Todd scaling and a Mehrotra predictor-corrector on the
//! homogeneous self-dual embedding of the reduced problem. The embedding
//! makes infeasibility a first-class exit: an infeasible problem terminates
//! with [`SdpStatus::PrimalInfeasible`] and a certificate quality report
//! rather than a failed solve.

mod hsd;
mod presolve;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use hsd::{svec_dim, svec_index};

/// Symmetric matrix stored as its lower triangle, one entry per (i ≥ j)
/// position; the value applies to both `(i,j)` and `(j,i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = (i.max(j) as u32, i.min(j) as u32);
        self.entries.push((i, j, v));
    }

    pub fn from_entries(entries: &[(usize, usize, f64)]) -> Self {
        let mut s = Self::new();
        for &(i, j, v) in entries {
            s.push(i, j, v);
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, _, v)| v == 0.0)
    }

    /// `out += w · self`, applied symmetrically.
    pub fn add_scaled_to(&self, out: &mut DMatrix<f64>, w: f64) {
        for &(i, j, v) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            out[(i, j)] += w * v;
            if i != j {
                out[(j, i)] += w * v;
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        self.add_scaled_to(&mut m, 1.0);
        m
    }
}

/// One PSD block of an [`SdpProblem`]: the affine map
/// `y ↦ constant + Σ_i y_i coeffs[i]`.
#[derive(Debug, Clone)]
pub struct BlockMap {
    pub dim: usize,
    pub constant: SparseSym,
    pub coeffs: Vec<SparseSym>,
}

/// A sparse equality row `Σ (coeff · y_var) = rhs`.
#[derive(Debug, Clone)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Block LMI-form semidefinite program; see the module docs for the layout.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<BlockMap>,
    pub equalities: Vec<Equality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// No `y` satisfies the constraints (equalities inconsistent, or the
    /// LMI system admits a separating dual ray).
    PrimalInfeasible,
    /// The objective is unbounded below on the feasible set (equivalently
    /// the conic dual is infeasible).
    DualInfeasibleOrUnbounded,
    /// Iteration limit or numerical breakdown before any certificate.
    MaxIterations,
}

/// Feasibility and gap scalars of a solve, measured on the returned point.
#[derive(Debug, Clone, Copy, Default)]
pub struct KktResiduals {
    /// Feasibility of the returned `y` against the block constraints
    /// (scaled residual of the interior-point dual equation).
    pub primal_feas: f64,
    /// Feasibility of the internal dual iterate (certifies the bound
    /// `dual_obj`).
    pub dual_feas: f64,
    /// Relative duality gap.
    pub rel_gap: f64,
    /// Max-norm residual of the equality rows at the returned `y`.
    pub equality_residual: f64,
    /// Smallest eigenvalue over all returned block values.
    pub min_block_eig: f64,
}

/// Quality of an infeasibility certificate: `violation` is the positive
/// objective of the separating ray and `residual` how well the ray satisfies
/// the homogeneous system (0 = exact Farkas certificate).
#[derive(Debug, Clone, Copy)]
pub struct CertificateQuality {
    pub violation: f64,
    pub residual: f64,
}

/// Solver output. `status == Optimal` guarantees the invariants
/// `min_block_eig ≥ −tol_feas`, `equality_residual ≤ tol_feas` (scaled) and
/// `rel_gap ≤ tol_gap`.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    pub block_values: Vec<DMatrix<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub certificate: Option<CertificateQuality>,
    /// Note on early or abnormal exits (presolve infeasibility, numerical
    /// breakdown, ...).
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
        }
    }
}

fn validate(p: &SdpProblem) -> Result<()> {
    if p.num_vars == 0 && p.blocks.is_empty() {
        return Err(Error::SdpShape(
            "problem needs at least one variable or one block".into(),
        ));
    }
    if p.objective.len() != p.num_vars {
        return Err(Error::SdpShape(format!(
            "objective length {} != num_vars {}",
            p.objective.len(),
            p.num_vars
        )));
    }
    for (b, block) in p.blocks.iter().enumerate() {
        if block.dim == 0 {
            return Err(Error::SdpShape(format!("block {b} has dimension 0")));
        }
        if block.coeffs.len() != p.num_vars {
            return Err(Error::SdpShape(format!(
                "block {b} has {} coefficient matrices for {} variables",
                block.coeffs.len(),
                p.num_vars
            )));
        }
        let ok = |s: &SparseSym| s.entries.iter().all(|&(i, _, _)| (i as usize) < block.dim);
        if !ok(&block.constant) || !block.coeffs.iter().all(ok) {
            return Err(Error::SdpShape(format!(
                "block {b} has an entry outside its {0}×{0} shape",
                block.dim
            )));
        }
    }
    for (r, eq) in p.equalities.iter().enumerate() {
        if eq.coeffs.iter().any(|&(v, _)| v >= p.num_vars) {
            return Err(Error::SdpShape(format!(
                "equality {r} references a variable out of range"
            )));
        }
    }
    Ok(())
}

/// Solve the semidefinite program; defaults are `tol_feas = tol_gap = 1e-8`
/// and `max_iter = 200`. Errors only on malformed input; solver outcomes
/// (including infeasibility and breakdown) are reported through
/// [`SdpSolution::status`].
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    validate(p)?;
    match presolve::reduce(p, opts.tol_feas) {
        presolve::Presolved::Infeasible { violation, note } => Ok(SdpSolution {
            status: SdpStatus::PrimalInfeasible,
            y: vec![0.0; p.num_vars],
            block_values: Vec::new(),
            primal_obj: f64::INFINITY,
            dual_obj: f64::INFINITY,
            kkt: KktResiduals::default(),
            iterations: 0,
            certificate: Some(CertificateQuality {
                violation,
                residual: 0.0,
            }),
            note: Some(note),
        }),
        presolve::Presolved::Unbounded { note } => Ok(SdpSolution {
            status: SdpStatus::DualInfeasibleOrUnbounded,
            y: vec![0.0; p.num_vars],
            block_values: Vec::new(),
            primal_obj: f64::NEG_INFINITY,
            dual_obj: f64::NEG_INFINITY,
            kkt: KktResiduals::default(),
            iterations: 0,
            certificate: None,
            note: Some(note),
        }),
        presolve::Presolved::Fixed { y, note } => Ok(assemble_fixed_solution(p, y, note, opts)),
        presolve::Presolved::Reduced(red) => {
            let outcome = hsd::solve_reduced(&red, opts);
            Ok(presolve::expand_solution(p, &red, outcome, opts))
        }
    }
}

/// All variables were pinned by the equalities; only block feasibility is
/// left to check.
fn assemble_fixed_solution(
    p: &SdpProblem,
    y: Vec<f64>,
    note: String,
    opts: &SdpOptions,
) -> SdpSolution {
    let block_values: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .map(|b| {
            let mut m = b.constant.to_dense(b.dim);
            for (i, coeff) in b.coeffs.iter().enumerate() {
                coeff.add_scaled_to(&mut m, y[i]);
            }
            m
        })
        .collect();
    let min_eig = block_values
        .iter()
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let scale = block_values
        .iter()
        .map(|m| m.amax())
        .fold(1.0_f64, f64::max);
    let obj: f64 = p.objective.iter().zip(&y).map(|(c, v)| c * v).sum();
    if min_eig < -opts.tol_feas * scale {
        SdpSolution {
            status: SdpStatus::PrimalInfeasible,
            y,
            block_values,
            primal_obj: f64::INFINITY,
            dual_obj: f64::INFINITY,
            kkt: KktResiduals {
                min_block_eig: min_eig,
                ..Default::default()
            },
            iterations: 0,
            certificate: Some(CertificateQuality {
                violation: -min_eig,
                residual: 0.0,
            }),
            note: Some(format!(
                "{note}; a fully pinned block has eigenvalue {min_eig:.3e}"
            )),
        }
    } else {
        SdpSolution {
            status: SdpStatus::Optimal,
            y,
            block_values,
            primal_obj: obj,
            dual_obj: obj,
            kkt: KktResiduals {
                min_block_eig: min_eig,
                ..Default::default()
            },
            iterations: 0,
            certificate: None,
            note: Some(note),
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Plain-text dump (sizes, then matrices row-major) for cross-checking a
/// problem against external solvers. Not a stability-guaranteed format.
pub fn dump_problem(p: &SdpProblem) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "vars {}", p.num_vars);
    let _ = writeln!(out, "blocks {}", p.blocks.len());
    let _ = writeln!(out, "equalities {}", p.equalities.len());
    let objective: Vec<String> = p.objective.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "objective {}", objective.join(" "));
    for (bi, b) in p.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {bi} dim {}", b.dim);
        let mut dump_mat = |label: String, s: &SparseSym| {
            let m = s.to_dense(b.dim);
            let _ = writeln!(out, "{label}");
            for r in 0..b.dim {
                let row: Vec<String> = (0..b.dim).map(|c| m[(r, c)].to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        dump_mat("constant".to_string(), &b.constant);
        for (i, c) in b.coeffs.iter().enumerate() {
            dump_mat(format!("coeff {i}"), c);
        }
    }
    for eq in &p.equalities {
        let terms: Vec<String> = eq.coeffs.iter().map(|(v, c)| format!("{c}*y{v}")).collect();
        let _ = writeln!(out, "eq {} = {}", terms.join(" + "), eq.rhs);
    }
    out
}

#[cfg(test)]
mod tests;
