//! Exact elimination of the equality rows before the interior-point core.
//!
//! Every equality `Σ c_i y_i = d` is folded into an affine parameterization
//! `y = y0 + P·t` over a reduced free vector `t`. Rows that resolve to at
//! most two not-yet-pinned classes are absorbed by an affine union-find
//! (each variable is `mult · t_root + off`); anything denser falls through
//! to a dense SVD-based elimination. Inconsistent rows surface as
//! `Infeasible` — in exact arithmetic that already certifies the SDP has no
//! feasible point, before any cone comes into play.

use nalgebra::{DMatrix, DVector};

use super::{
    min_eigenvalue, CertificateQuality, KktResiduals, SdpOptions, SdpProblem, SdpSolution,
    SdpStatus, SparseSym,
};

/// Coefficients with magnitude below this (after row normalization) are
/// treated as zero when deciding whether a row pins or merges classes.
const ZERO_COEFF: f64 = 1e-11;
/// Relative tolerance for consistency checks of redundant rows.
const CONSISTENCY_TOL: f64 = 1e-8;

pub(super) struct ActiveBlock {
    /// Position in the original problem's block list.
    pub index: usize,
    pub dim: usize,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<SparseSym>,
}

pub(super) struct ReducedSdp {
    /// `y = y0 + Σ_j t_j · cols[j]`.
    pub y0: Vec<f64>,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub obj: Vec<f64>,
    pub obj_const: f64,
    pub active: Vec<ActiveBlock>,
    /// Constants of blocks no reduced variable touches (already verified
    /// feasible), keyed by original block position.
    pub fixed_blocks: Vec<(usize, DMatrix<f64>)>,
}

pub(super) enum Presolved {
    Reduced(ReducedSdp),
    /// Equalities (or a fully pinned block) admit no solution.
    Infeasible { violation: f64, note: String },
    Unbounded { note: String },
    /// Equalities pin every variable.
    Fixed { y: Vec<f64>, note: String },
}

struct AffineUf {
    parent: Vec<usize>,
    mult: Vec<f64>,
    off: Vec<f64>,
    pin: Vec<Option<f64>>,
}

impl AffineUf {
    fn new(n: usize) -> Self {
        AffineUf {
            parent: (0..n).collect(),
            mult: vec![1.0; n],
            off: vec![0.0; n],
            pin: vec![None; n],
        }
    }

    /// Resolve `y_i = m · t_root + o` with path compression.
    fn find(&mut self, i: usize) -> (usize, f64, f64) {
        if self.parent[i] == i {
            return (i, self.mult[i], self.off[i]);
        }
        let (root, pm, po) = self.find(self.parent[i]);
        // y_i = mult_i · y_parent + off_i = mult_i (pm t + po) + off_i
        let m = self.mult[i] * pm;
        let o = self.mult[i] * po + self.off[i];
        self.parent[i] = root;
        self.mult[i] = m;
        self.off[i] = o;
        (root, m, o)
    }

    fn pin_root(&mut self, root: usize, value: f64, mag: f64) -> Result<(), f64> {
        match self.pin[root] {
            None => {
                self.pin[root] = Some(value);
                Ok(())
            }
            Some(existing) => {
                let dev = (existing - value).abs();
                if dev <= CONSISTENCY_TOL * mag.max(existing.abs()).max(1.0) {
                    Ok(())
                } else {
                    Err(dev)
                }
            }
        }
    }
}

/// Fold a row into the union-find. `Ok(true)` = absorbed, `Ok(false)` =
/// still has 3+ free classes, `Err(violation)` = inconsistent.
fn absorb_row(
    uf: &mut AffineUf,
    coeffs: &[(usize, f64)],
    rhs: f64,
) -> Result<bool, f64> {
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(2);
    let mut rhs = rhs;
    let mut mag = rhs.abs();
    for &(var, c) in coeffs {
        if c == 0.0 {
            continue;
        }
        let (root, m, o) = uf.find(var);
        rhs -= c * o;
        mag += (c * o).abs();
        if let Some(pin) = uf.pin[root] {
            rhs -= c * m * pin;
            mag += (c * m * pin).abs();
            continue;
        }
        let coeff = c * m;
        mag += coeff.abs();
        match terms.iter_mut().find(|(r, _)| *r == root) {
            Some((_, acc)) => *acc += coeff,
            None => terms.push((root, coeff)),
        }
    }
    let scale = mag.max(1.0);
    terms.retain(|&(_, c)| c.abs() > ZERO_COEFF * scale);
    match terms.len() {
        0 => {
            if rhs.abs() <= CONSISTENCY_TOL * scale {
                Ok(true)
            } else {
                Err(rhs.abs())
            }
        }
        1 => {
            let (root, a) = terms[0];
            uf.pin_root(root, rhs / a, mag / a.abs())
                .map(|_| true)
        }
        2 => {
            // attach the larger-coefficient root as child so |mult| <= 1
            let ((r1, a1), (r2, a2)) = (terms[0], terms[1]);
            let (child, ac, other, ao) = if a1.abs() >= a2.abs() {
                (r1, a1, r2, a2)
            } else {
                (r2, a2, r1, a1)
            };
            uf.parent[child] = other;
            uf.mult[child] = -ao / ac;
            uf.off[child] = rhs / ac;
            uf.pin[child] = None;
            Ok(true)
        }
        _ => Ok(false),
    }
}

/// Eliminate the equalities of `p` and assemble the reduced LMI problem.
pub(super) fn reduce(p: &SdpProblem, tol_feas: f64) -> Presolved {
    let m = p.num_vars;
    let mut uf = AffineUf::new(m);

    // normalize rows so tolerance checks see O(1) coefficients
    let mut pending: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for eq in &p.equalities {
        let mut coeffs: Vec<(usize, f64)> =
            eq.coeffs.iter().filter(|&&(_, c)| c != 0.0).copied().collect();
        let mut rhs = eq.rhs;
        let top = coeffs
            .iter()
            .map(|&(_, c)| c.abs())
            .fold(0.0_f64, f64::max);
        if top > 0.0 {
            for (_, c) in coeffs.iter_mut() {
                *c /= top;
            }
            rhs /= top;
        }
        pending.push((coeffs, rhs));
    }

    // pass until stable: rows may resolve to <=2 classes only after pins
    // from other rows land
    loop {
        let mut progressed = false;
        let mut still: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for (coeffs, rhs) in pending {
            match absorb_row(&mut uf, &coeffs, rhs) {
                Ok(true) => progressed = true,
                Ok(false) => still.push((coeffs, rhs)),
                Err(violation) => {
                    return Presolved::Infeasible {
                        violation,
                        note: "equality system is inconsistent".into(),
                    }
                }
            }
        }
        pending = still;
        if pending.is_empty() || !progressed {
            break;
        }
    }

    // map surviving free roots to provisional parameter slots
    let mut slot_of_root: Vec<Option<usize>> = vec![None; m];
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..m {
        let (root, _, _) = uf.find(i);
        if uf.pin[root].is_none() && slot_of_root[root].is_none() {
            slot_of_root[root] = Some(roots.len());
            roots.push(root);
        }
    }

    // parameterization over the provisional slots
    let mut y0 = vec![0.0; m];
    let mut weights: Vec<(usize, usize, f64)> = Vec::new(); // (var, slot, weight)
    for i in 0..m {
        let (root, mult, off) = uf.find(i);
        match uf.pin[root] {
            Some(v) => y0[i] = mult * v + off,
            None => {
                y0[i] = off;
                weights.push((i, slot_of_root[root].unwrap(), mult));
            }
        }
    }

    // rows the union-find could not absorb: dense elimination over the slots
    if !pending.is_empty() {
        match dense_eliminate(&mut y0, &mut weights, roots.len(), &pending, &mut uf) {
            Ok(()) => {}
            Err(violation) => {
                return Presolved::Infeasible {
                    violation,
                    note: "equality system is inconsistent (dense elimination)".into(),
                }
            }
        }
    }

    finish(p, y0, weights, tol_feas)
}

/// Substitute the affine map into leftover rows, solve the dense system over
/// the slots, and rewrite `y0`/`weights` over the reduced parameters.
fn dense_eliminate(
    y0: &mut [f64],
    weights: &mut Vec<(usize, usize, f64)>,
    num_slots: usize,
    rows: &[(Vec<(usize, f64)>, f64)],
    uf: &mut AffineUf,
) -> Result<(), f64> {
    // slot and weight of every free variable
    let mut slot_of_var: Vec<Option<(usize, f64)>> = vec![None; y0.len()];
    for &(var, slot, w) in weights.iter() {
        slot_of_var[var] = Some((slot, w));
    }
    let mut e = DMatrix::zeros(rows.len(), num_slots);
    let mut d = DVector::zeros(rows.len());
    for (r, (coeffs, rhs)) in rows.iter().enumerate() {
        let mut acc = *rhs;
        for &(var, c) in coeffs {
            let (root, mult, off) = uf.find(var);
            acc -= c * off;
            match slot_of_var[var] {
                Some((slot, w)) => e[(r, slot)] += c * w,
                None => {
                    if let Some(pin) = uf.pin[root] {
                        acc -= c * mult * pin;
                    }
                }
            }
        }
        d[r] = acc;
    }
    // minimum-norm particular solution and nullspace via SVD
    let svd = e.clone().svd(true, true);
    let tol = 1e-10
        * svd
            .singular_values
            .iter()
            .fold(1.0_f64, |a, &s| a.max(s));
    let particular = svd.solve(&d, tol).map_err(|_| f64::INFINITY)?;
    let res = (&e * &particular - &d).amax();
    if res > CONSISTENCY_TOL * (1.0 + d.amax()) {
        return Err(res);
    }
    let (null_basis, _) = crate::reduction::nullspace_of_matrix(&e, 1e-10);

    // rewrite: t_slot = particular[slot] + Σ_u basis_u[slot] · u
    let mut new_weights: Vec<(usize, usize, f64)> = Vec::new();
    for &(var, slot, w) in weights.iter() {
        y0[var] += w * particular[slot];
        for (u, base) in null_basis.iter().enumerate() {
            let coeff = w * base[slot];
            if coeff != 0.0 {
                new_weights.push((var, u, coeff));
            }
        }
    }
    *weights = new_weights;
    Ok(())
}

/// Build the reduced blocks/objective from the affine map and classify.
fn finish(
    p: &SdpProblem,
    y0: Vec<f64>,
    weights: Vec<(usize, usize, f64)>,
    tol_feas: f64,
) -> Presolved {
    let num_slots = weights.iter().map(|&(_, s, _)| s + 1).max().unwrap_or(0);

    // per-slot sparse columns, rescaled to max weight 1
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_slots];
    for &(var, slot, w) in &weights {
        if w != 0.0 {
            cols[slot].push((var, w));
        }
    }
    for col in cols.iter_mut() {
        let top = col.iter().map(|&(_, w)| w.abs()).fold(0.0_f64, f64::max);
        if top > 0.0 {
            for (_, w) in col.iter_mut() {
                *w /= top;
            }
        }
    }

    // reduced constants and coefficient matrices
    let mut constants: Vec<DMatrix<f64>> = Vec::with_capacity(p.blocks.len());
    for block in &p.blocks {
        let mut c = block.constant.to_dense(block.dim);
        for (i, coeff) in block.coeffs.iter().enumerate() {
            if y0[i] != 0.0 {
                coeff.add_scaled_to(&mut c, y0[i]);
            }
        }
        constants.push(c);
    }
    let mut reduced_coeffs: Vec<Vec<SparseSym>> = Vec::with_capacity(p.blocks.len());
    for block in &p.blocks {
        let per_slot: Vec<SparseSym> = cols
            .iter()
            .map(|col| {
                let mut acc: std::collections::BTreeMap<(u32, u32), f64> =
                    std::collections::BTreeMap::new();
                for &(var, w) in col {
                    for &(i, j, v) in &block.coeffs[var].entries {
                        *acc.entry((i, j)).or_insert(0.0) += w * v;
                    }
                }
                SparseSym {
                    entries: acc
                        .into_iter()
                        .filter(|&(_, v)| v != 0.0)
                        .map(|((i, j), v)| (i, j, v))
                        .collect(),
                }
            })
            .collect();
        reduced_coeffs.push(per_slot);
    }

    // blocks no slot touches are pure feasibility checks; test them before
    // any unboundedness verdict so an infeasible constant block wins
    let mut fixed_blocks = Vec::new();
    let mut touched_blocks = Vec::new();
    for (bi, _) in p.blocks.iter().enumerate() {
        let touched = (0..num_slots).any(|s| !reduced_coeffs[bi][s].is_zero());
        if touched {
            touched_blocks.push(bi);
        } else {
            let c = &constants[bi];
            let min_eig = min_eigenvalue(c);
            if min_eig < -tol_feas * c.amax().max(1.0) {
                return Presolved::Infeasible {
                    violation: -min_eig,
                    note: format!(
                        "block {bi} is pinned by the equalities and has eigenvalue {min_eig:.3e}"
                    ),
                };
            }
            fixed_blocks.push((bi, constants[bi].clone()));
        }
    }

    // drop slots that touch no block: harmless if their objective is zero,
    // otherwise the problem is unbounded below
    let mut obj = vec![0.0; num_slots];
    for (slot, col) in cols.iter().enumerate() {
        obj[slot] = col.iter().map(|&(var, w)| p.objective[var] * w).sum();
    }
    let obj_const: f64 = p.objective.iter().zip(&y0).map(|(c, v)| c * v).sum();
    let obj_scale = obj.iter().fold(1.0_f64, |a, &c| a.max(c.abs()));
    let mut keep: Vec<usize> = Vec::new();
    for slot in 0..num_slots {
        let touches = reduced_coeffs.iter().any(|rc| !rc[slot].is_zero());
        if touches {
            keep.push(slot);
        } else if obj[slot].abs() > 1e-12 * obj_scale {
            return Presolved::Unbounded {
                note: format!(
                    "free direction with objective coefficient {:.3e} touches no block",
                    obj[slot]
                ),
            };
        }
    }

    let mut active = Vec::new();
    for bi in touched_blocks {
        let block = &p.blocks[bi];
        active.push(ActiveBlock {
            index: bi,
            dim: block.dim,
            constant: constants[bi].clone(),
            coeffs: keep
                .iter()
                .map(|&s| reduced_coeffs[bi][s].clone())
                .collect(),
        });
    }

    if keep.is_empty() {
        return Presolved::Fixed {
            y: y0,
            note: "all variables pinned by the equality system".into(),
        };
    }

    Presolved::Reduced(ReducedSdp {
        y0,
        cols: keep.iter().map(|&s| cols[s].clone()).collect(),
        obj: keep.iter().map(|&s| obj[s]).collect(),
        obj_const,
        active,
        fixed_blocks,
    })
}

/// Map a reduced solve back onto the original variables and blocks.
pub(super) fn expand_solution(
    p: &SdpProblem,
    red: &ReducedSdp,
    outcome: super::hsd::HsdOutcome,
    _opts: &SdpOptions,
) -> SdpSolution {
    let mut y = red.y0.clone();
    for (col, &tj) in red.cols.iter().zip(&outcome.t) {
        for &(var, w) in col {
            y[var] += w * tj;
        }
    }
    let mut equality_residual = 0.0_f64;
    for eq in &p.equalities {
        let lhs: f64 = eq.coeffs.iter().map(|&(v, c)| c * y[v]).sum();
        equality_residual = equality_residual.max((lhs - eq.rhs).abs() / (1.0 + eq.rhs.abs()));
    }

    let mut block_values: Vec<DMatrix<f64>> = p
        .blocks
        .iter()
        .map(|b| DMatrix::zeros(b.dim, b.dim))
        .collect();
    for (ab, realized) in red.active.iter().zip(&outcome.block_values) {
        block_values[ab.index] = realized.clone();
    }
    for (bi, constant) in &red.fixed_blocks {
        block_values[*bi] = constant.clone();
    }
    let min_block_eig = block_values
        .iter()
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);

    let optimal = outcome.status == SdpStatus::Optimal;
    SdpSolution {
        status: outcome.status,
        y,
        block_values,
        primal_obj: if optimal {
            outcome.pobj + red.obj_const
        } else {
            outcome.pobj
        },
        dual_obj: if optimal {
            outcome.dobj + red.obj_const
        } else {
            outcome.dobj
        },
        kkt: KktResiduals {
            primal_feas: outcome.primal_feas,
            dual_feas: outcome.dual_feas,
            rel_gap: outcome.rel_gap,
            equality_residual,
            min_block_eig,
        },
        iterations: outcome.iterations,
        certificate: outcome.certificate,
        note: outcome.note,
    }
}

use super::hsd::HsdOutcome;
