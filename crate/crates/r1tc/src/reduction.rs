//! The homogeneous linear system in the partial matrix entries `X_Ω̃` built
//! from all 2×2 minors of the per-slice data/product matrices, its numerical
//! nullspace, and the strong-completability decision.
//!
//! For `A = a ⊗ b ⊗ c` and any two observations `(i_s,j_s,k)`, `(i_t,j_t,k)`
//! in one slice, the products `X_ij = a_i b_j` satisfy
//! `A[i_s,j_s,k]·X[i_t,j_t] − A[i_t,j_t,k]·X[i_s,j_s] = 0`. When the
//! solution space of this system is one-dimensional the completion problem
//! reduces to rank-1 matrix completion on the spanning vector.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{anchor_index, slice_groups, AnchorSelection, PartialTensor};

/// Default relative singular-value tolerance for rank decisions.
pub const DEFAULT_NULLSPACE_TOL: f64 = 1e-8;

/// One vanishing 2×2 minor: `coeff_first · X[second] + coeff_second · X[first] = 0`
/// with `coeff_first = A[first, k]` and `coeff_second = −A[second, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorConstraint {
    pub k: usize,
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub coeff_first: f64,
    pub coeff_second: f64,
}

/// The full minor system over the distinct pairs Ω̃ (ordered
/// lexicographically). For symmetric tensors the variables are unordered
/// pairs `(i ≤ j)`, identifying `V[i,j] = V[j,i]`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub variables: Vec<(usize, usize)>,
    pub rows: Vec<MinorConstraint>,
    index: BTreeMap<(usize, usize), usize>,
    symmetric: bool,
}

impl ConstraintSystem {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Column of a pair in the dense matrix.
    pub fn var_position(&self, pair: (usize, usize)) -> Option<usize> {
        let key = if self.symmetric {
            unordered(pair)
        } else {
            pair
        };
        self.index.get(&key).copied()
    }

    /// Dense coefficient matrix, one row per minor, one column per pair.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.variables.len());
        for (r, row) in self.rows.iter().enumerate() {
            let cf = self.var_position(row.first).expect("member pair indexed");
            let cs = self.var_position(row.second).expect("member pair indexed");
            // both coefficients can land on one column (symmetric identification)
            m[(r, cs)] += row.coeff_first;
            m[(r, cf)] += row.coeff_second;
        }
        m
    }
}

fn unordered(p: (usize, usize)) -> (usize, usize) {
    (p.0.min(p.1), p.0.max(p.1))
}

fn build(t: &PartialTensor, symmetric: bool) -> ConstraintSystem {
    let mut pairs: Vec<(usize, usize)> = t
        .iter()
        .map(|((i, j, _), _)| if symmetric { unordered((i, j)) } else { (i, j) })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let index: BTreeMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(p, &v)| (v, p)).collect();

    let mut rows = Vec::new();
    for group in slice_groups(t) {
        let members = &group.members;
        for s in 0..members.len() {
            for mt in s + 1..members.len() {
                let (is, js) = members[s];
                let (it, jt) = members[mt];
                rows.push(MinorConstraint {
                    k: group.k,
                    first: (is, js),
                    second: (it, jt),
                    coeff_first: t.get(is, js, group.k).unwrap(),
                    coeff_second: -t.get(it, jt, group.k).unwrap(),
                });
            }
        }
    }
    ConstraintSystem {
        variables: pairs,
        rows,
        index,
        symmetric,
    }
}

/// All `Σ_k C(m_k, 2)` minor constraints of `t`, enumerated with `s < t` in
/// lexicographic member order within each slice.
pub fn build_minors(t: &PartialTensor) -> ConstraintSystem {
    build(t, false)
}

/// Symmetric variant over unordered pairs. Errors if `t` is not symmetric.
pub fn build_minors_symmetric(t: &PartialTensor) -> Result<ConstraintSystem> {
    if !t.symmetric() {
        return Err(Error::NotSymmetric);
    }
    Ok(build(t, true))
}

/// Numerical nullspace of the minor system via singular value decomposition.
///
/// Rows are scaled to unit Euclidean norm first; singular values at most
/// `tol · max(σ₁, 1)` count as zero. Returns an orthonormal basis of the
/// nullspace and its dimension.
pub fn nullspace(system: &ConstraintSystem, tol: f64) -> (Vec<DVector<f64>>, usize) {
    let m = system.num_vars();
    if m == 0 {
        return (Vec::new(), 0);
    }
    let mut mat = system.matrix();
    for r in 0..mat.nrows() {
        let norm = mat.row(r).norm();
        if norm > 0.0 {
            let mut row = mat.row_mut(r);
            row /= norm;
        }
    }
    nullspace_of_matrix(&mat, tol)
}

/// Nullspace of an arbitrary dense matrix with the same thresholding rule.
pub(crate) fn nullspace_of_matrix(mat: &DMatrix<f64>, tol: f64) -> (Vec<DVector<f64>>, usize) {
    let m = mat.ncols();
    if mat.nrows() == 0 {
        let basis = (0..m)
            .map(|i| DVector::from_fn(m, |r, _| if r == i { 1.0 } else { 0.0 }))
            .collect();
        return (basis, m);
    }
    // pad with zero rows so the SVD carries a full set of right singular
    // vectors even when the system is wide
    let padded = if mat.nrows() < m {
        let mut p = DMatrix::zeros(m, m);
        p.rows_mut(0, mat.nrows()).copy_from(mat);
        p
    } else {
        mat.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .unwrap()
    });
    let sigma_max = svd.singular_values[order[0]];
    let threshold = tol * sigma_max.max(1.0);
    let mut basis = Vec::new();
    for &i in &order {
        if svd.singular_values[i] <= threshold {
            basis.push(v_t.row(i).transpose());
        }
    }
    let dim = basis.len();
    (basis, dim)
}

/// The spanning solution of a one-dimensional minor system, normalized to 1
/// at the anchor pair. For symmetric tensors `w` is keyed by ordered pairs
/// (both orders of each unordered pair are present with equal values).
#[derive(Debug, Clone)]
pub struct StrongData {
    pub w: BTreeMap<(usize, usize), f64>,
    pub nullspace_dim: usize,
}

/// Outcome of the strong-completability test.
#[derive(Debug, Clone)]
pub enum StrongOutcome {
    Strong(StrongData),
    /// The solution space is not a line (dimension 0 means only X = 0
    /// solves, which rules out any completion with a nonzero anchor).
    NotStrong { dim: usize },
    /// The solution space is a line but its anchor coordinate vanishes, so
    /// the scaling `X[anchor] = 1` is impossible.
    AnchorCoordinateZero,
}

/// Decide strong completability: a one-dimensional solution space whose
/// spanning vector has a usable anchor coordinate.
pub fn strong_data(t: &PartialTensor, tol: f64) -> Result<StrongOutcome> {
    let anchor = match anchor_index(t)? {
        AnchorSelection::Entry(a) => a,
        // callers complete the all-zero tensor directly; the anchor scaling
        // is meaningless here
        AnchorSelection::AllZero => return Ok(StrongOutcome::AnchorCoordinateZero),
    };
    let system = if t.symmetric() {
        build_minors_symmetric(t)?
    } else {
        build_minors(t)
    };
    let (basis, dim) = nullspace(&system, tol);
    if dim != 1 {
        return Ok(StrongOutcome::NotStrong { dim });
    }
    let span = &basis[0];
    let (ai, aj, _) = anchor.index;
    let pos = system
        .var_position((ai, aj))
        .expect("anchor pair is observed");
    let max_coord = span.amax();
    if span[pos].abs() <= tol * max_coord.max(1.0) {
        return Ok(StrongOutcome::AnchorCoordinateZero);
    }
    let scale = 1.0 / span[pos];
    let mut w = BTreeMap::new();
    for (p, &pair) in system.variables.iter().enumerate() {
        let value = span[p] * scale;
        w.insert(pair, value);
        if t.symmetric() {
            w.insert((pair.1, pair.0), value);
        }
    }
    Ok(StrongOutcome::Strong(StrongData {
        w,
        nullspace_dim: 1,
    }))
}
