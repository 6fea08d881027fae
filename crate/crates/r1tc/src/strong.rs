//! Completion of strongly rank-1 completable tensors: once the minor system
//! pins the products `a_i b_j` on Ω̃ (up to the anchor scaling), a
//! breadth-first traversal of the bipartite observation graph recovers `a`
//! and `b` by ratio propagation, and `c` follows slice by slice from a least
//! squares back-solve.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::Result;
use crate::reduction::{strong_data, StrongOutcome};
use crate::tensor::{
    anchor_index, residual, slice_groups, AnchorSelection, CompletionResult, Method,
    PartialTensor, Status,
};

/// Relative consistency required of `a_i b_j` against `w_ij` after the
/// traversal. Violations mean the solution line is not an outer product.
const EDGE_CONSISTENCY_TOL: f64 = 1e-10;

/// Bipartite graph `G(V1, V2, Ω̃)`: row indices on the left, column indices
/// on the right, one edge per observed pair.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    pub left: BTreeSet<usize>,
    pub right: BTreeSet<usize>,
    pub edges: Vec<(usize, usize)>,
    adj_left: BTreeMap<usize, Vec<usize>>,
    adj_right: BTreeMap<usize, Vec<usize>>,
}

impl BipartiteGraph {
    pub fn from_pairs(edges: Vec<(usize, usize)>) -> Self {
        let mut adj_left: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut adj_right: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(i, j) in &edges {
            adj_left.entry(i).or_default().push(j);
            adj_right.entry(j).or_default().push(i);
        }
        for list in adj_left.values_mut().chain(adj_right.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        BipartiteGraph {
            left: adj_left.keys().copied().collect(),
            right: adj_right.keys().copied().collect(),
            edges,
            adj_left,
            adj_right,
        }
    }

    pub fn of_tensor(t: &PartialTensor) -> Self {
        Self::from_pairs(t.projected_pairs())
    }
}

/// Breadth-first reachability: true when a single component covers V1 ∪ V2.
pub fn is_connected(g: &BipartiteGraph) -> bool {
    if g.edges.is_empty() {
        return false;
    }
    let start = *g.left.iter().next().unwrap();
    let mut seen_left = BTreeSet::new();
    let mut seen_right = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen_left.insert(start);
    queue.push_back(Vertex::Left(start));
    while let Some(v) = queue.pop_front() {
        match v {
            Vertex::Left(i) => {
                for &j in &g.adj_left[&i] {
                    if seen_right.insert(j) {
                        queue.push_back(Vertex::Right(j));
                    }
                }
            }
            Vertex::Right(j) => {
                for &i in &g.adj_right[&j] {
                    if seen_left.insert(i) {
                        queue.push_back(Vertex::Left(i));
                    }
                }
            }
        }
    }
    seen_left.len() == g.left.len() && seen_right.len() == g.right.len()
}

#[derive(Debug, Clone, Copy)]
enum Vertex {
    Left(usize),
    Right(usize),
}

/// Why the iterative path handed the instance to a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub enum StrongDefer {
    /// Solution space of the minor system is not a line.
    NotStrong { dim: usize },
    /// The spanning vector vanishes at the anchor pair.
    AnchorCoordinateZero,
    /// Bipartite observation graph has more than one component.
    Disconnected,
    /// A traversal step would divide by a (numerically) zero value.
    ZeroEdge,
    /// The spanning vector is not consistent with any outer product, or the
    /// recovered factors contradict an observed slice.
    Inconsistent,
    /// Symmetric instance whose row/column ratio is negative, so no real
    /// `v vᵀ` matches the line.
    NegativeSymmetricScale,
}

/// Recover `a`, `b` from the edge values `w` by the ratio formula, starting
/// from `a[anchor.0] = b[anchor.1] = 1`. Unused row or column indices (no
/// observation touches them) are reported as 0.
pub fn iterative_complete(
    w: &BTreeMap<(usize, usize), f64>,
    g: &BipartiteGraph,
    anchor: (usize, usize),
    dims: (usize, usize),
    zero_tol: f64,
) -> std::result::Result<(Vec<f64>, Vec<f64>), StrongDefer> {
    let mut a: Vec<Option<f64>> = vec![None; dims.0];
    let mut b: Vec<Option<f64>> = vec![None; dims.1];
    a[anchor.0] = Some(1.0);
    b[anchor.1] = Some(1.0);
    let mut queue = VecDeque::new();
    queue.push_back(Vertex::Left(anchor.0));
    queue.push_back(Vertex::Right(anchor.1));
    while let Some(v) = queue.pop_front() {
        match v {
            Vertex::Left(i) => {
                let ai = a[i].unwrap();
                for &j in &g.adj_left[&i] {
                    if b[j].is_none() {
                        if ai.abs() < zero_tol {
                            return Err(StrongDefer::ZeroEdge);
                        }
                        b[j] = Some(w[&(i, j)] / ai);
                        queue.push_back(Vertex::Right(j));
                    }
                }
            }
            Vertex::Right(j) => {
                let bj = b[j].unwrap();
                for &i in &g.adj_right[&j] {
                    if a[i].is_none() {
                        if bj.abs() < zero_tol {
                            return Err(StrongDefer::ZeroEdge);
                        }
                        a[i] = Some(w[&(i, j)] / bj);
                        queue.push_back(Vertex::Left(i));
                    }
                }
            }
        }
    }
    if g.left.iter().any(|&i| a[i].is_none()) || g.right.iter().any(|&j| b[j].is_none()) {
        return Err(StrongDefer::Disconnected);
    }
    let a: Vec<f64> = a.into_iter().map(|x| x.unwrap_or(0.0)).collect();
    let b: Vec<f64> = b.into_iter().map(|x| x.unwrap_or(0.0)).collect();
    // every edge, traversed or not, must agree with the assigned products
    for (&(i, j), &wij) in w {
        if (a[i] * b[j] - wij).abs() > EDGE_CONSISTENCY_TOL * wij.abs().max(1.0) {
            return Err(StrongDefer::Inconsistent);
        }
    }
    Ok((a, b))
}

/// Result of the per-slice back-solve for `c`.
#[derive(Debug, Clone, PartialEq)]
pub enum BackSolve {
    Solved {
        c: Vec<f64>,
        /// `false` marks slices whose coefficient vector vanished together
        /// with the data, so `c[k] = 0` was a free choice.
        determined: Vec<bool>,
    },
    /// Some slice has a zero coefficient vector but nonzero data, or the
    /// least squares fit leaves a residual above tolerance.
    Infeasible { k: usize },
}

/// Solve `A[i,j,k] = (a_i b_j) · c_k` for each slice by least squares,
/// accepting only fits that reproduce the slice to `tol`.
pub fn back_solve_c(t: &PartialTensor, a: &[f64], b: &[f64], tol: f64) -> BackSolve {
    let n3 = t.dims().2;
    let mut c = vec![0.0; n3];
    let mut determined = vec![false; n3];
    for group in slice_groups(t) {
        let k = group.k;
        let mut uu = 0.0;
        let mut ur = 0.0;
        let mut r_inf = 0.0_f64;
        for &(i, j) in &group.members {
            let u = a[i] * b[j];
            let r = t.get(i, j, k).unwrap();
            uu += u * u;
            ur += u * r;
            r_inf = r_inf.max(r.abs());
        }
        if uu.sqrt() > tol {
            let ck = ur / uu;
            let mut worst = 0.0_f64;
            for &(i, j) in &group.members {
                let u = a[i] * b[j];
                let r = t.get(i, j, k).unwrap();
                worst = worst.max((r - ck * u).abs());
            }
            if worst > tol * r_inf.max(1.0) {
                return BackSolve::Infeasible { k };
            }
            c[k] = ck;
            determined[k] = true;
        } else if r_inf > tol {
            return BackSolve::Infeasible { k };
        }
        // zero coefficients with zero data leave c[k] = 0, undetermined
    }
    BackSolve::Solved { c, determined }
}

/// Full iterative pipeline: strong data → connectivity → traversal →
/// back-solve. Any deferral is surfaced so the caller can fall back to a
/// relaxation.
pub fn complete_strong(
    t: &PartialTensor,
    tol: f64,
    nullspace_tol: f64,
) -> Result<std::result::Result<CompletionResult, StrongDefer>> {
    let anchor = match anchor_index(t)? {
        AnchorSelection::Entry(a) => a,
        AnchorSelection::AllZero => {
            let (n1, n2, n3) = t.dims();
            let mut r = CompletionResult::completed(
                Method::Iterative,
                vec![0.0; n1],
                vec![0.0; n2],
                vec![0.0; n3],
                0.0,
            );
            r.c_determined = Some(vec![false; n3]);
            return Ok(Ok(r));
        }
    };
    let data = match strong_data(t, nullspace_tol)? {
        StrongOutcome::Strong(d) => d,
        StrongOutcome::NotStrong { dim } => return Ok(Err(StrongDefer::NotStrong { dim })),
        StrongOutcome::AnchorCoordinateZero => {
            return Ok(Err(StrongDefer::AnchorCoordinateZero))
        }
    };
    let graph = if t.symmetric() {
        // closure puts both orders of every pair in w
        BipartiteGraph::from_pairs(data.w.keys().copied().collect())
    } else {
        BipartiteGraph::of_tensor(t)
    };
    if !is_connected(&graph) {
        return Ok(Err(StrongDefer::Disconnected));
    }
    let (ai, aj, _) = anchor.index;
    let (n1, n2, n3) = t.dims();
    let (a, b) = match iterative_complete(&data.w, &graph, (ai, aj), (n1, n2), tol) {
        Ok(pair) => pair,
        Err(defer) => return Ok(Err(defer)),
    };

    if t.symmetric() {
        return Ok(finish_symmetric(t, &graph, &a, &b, tol));
    }

    let (c, determined) = match back_solve_c(t, &a, &b, tol) {
        BackSolve::Solved { c, determined } => (c, determined),
        BackSolve::Infeasible { .. } => return Ok(Err(StrongDefer::Inconsistent)),
    };
    let res = residual(t, &a, &b, &c)?;
    if res > tol {
        return Ok(Err(StrongDefer::Inconsistent));
    }
    let mut result = CompletionResult::completed(Method::Iterative, a, b, c, res);
    result.c_determined = Some(determined);
    Ok(Ok(result))
}

/// Reconcile the bipartite factors of a symmetric instance into `v vᵀ` and
/// solve for the cube scale τ, so that `a = b = c = ∛τ · v`.
fn finish_symmetric(
    t: &PartialTensor,
    graph: &BipartiteGraph,
    a: &[f64],
    b: &[f64],
    tol: f64,
) -> std::result::Result<CompletionResult, StrongDefer> {
    let n = t.dims().0;
    // closure makes V1 = V2; on a consistent line a_i / b_i is one constant
    let mut lambda = None;
    for &i in &graph.left {
        if b[i].abs() > tol {
            let li = a[i] / b[i];
            match lambda {
                None => lambda = Some(li),
                Some(l) => {
                    if (li - l).abs() > 1e-8 * l.abs().max(1.0) {
                        return Err(StrongDefer::Inconsistent);
                    }
                }
            }
        }
    }
    let lambda = match lambda {
        Some(l) if l > tol => l,
        Some(_) => return Err(StrongDefer::NegativeSymmetricScale),
        None => return Err(StrongDefer::ZeroEdge),
    };
    let mut v = vec![0.0; n];
    for i in 0..n {
        v[i] = a[i] / lambda.sqrt();
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
        return Err(StrongDefer::Inconsistent);
    }
    let tau = num / den;
    let scale = tau.cbrt();
    let factor: Vec<f64> = v.iter().map(|&x| scale * x).collect();
    let res = match residual(t, &factor, &factor, &factor) {
        Ok(r) => r,
        Err(_) => return Err(StrongDefer::Inconsistent),
    };
    if res > tol {
        return Err(StrongDefer::Inconsistent);
    }
    let mut result = CompletionResult::completed(
        Method::Iterative,
        factor.clone(),
        factor.clone(),
        factor,
        res,
    );
    result.v = Some(v);
    result.tau = Some(tau);
    result.c_determined = Some(vec![true; n]);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_3_1, example_3_2ii, from_triples, minimal_infeasible};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_3_1_graph_is_connected() {
        let g = BipartiteGraph::of_tensor(&example_3_1());
        assert_eq!(g.edges.len(), 6);
        assert!(is_connected(&g));
    }

    #[test]
    fn single_edge_is_connected_two_components_are_not() {
        assert!(is_connected(&BipartiteGraph::from_pairs(vec![(0, 0)])));
        assert!(!is_connected(&BipartiteGraph::from_pairs(vec![
            (0, 0),
            (1, 1)
        ])));
    }

    #[test]
    fn traversal_recovers_example_3_1_factors() {
        let w = BTreeMap::from([
            ((0usize, 0usize), 1.0),
            ((0, 2), -1.0),
            ((1, 1), 1.0),
            ((1, 2), 1.0),
            ((2, 0), 1.0),
            ((2, 1), -1.0),
        ]);
        let g = BipartiteGraph::from_pairs(w.keys().copied().collect());
        let (a, b) = iterative_complete(&w, &g, (0, 0), (3, 3), 1e-10).unwrap();
        assert_eq!(a, vec![1.0, -1.0, 1.0]);
        assert_eq!(b, vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn traversal_on_single_edge() {
        let w = BTreeMap::from([((0usize, 0usize), 1.0)]);
        let g = BipartiteGraph::from_pairs(vec![(0, 0)]);
        let (a, b) = iterative_complete(&w, &g, (0, 0), (1, 1), 1e-10).unwrap();
        assert_eq!((a, b), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn traversal_recovers_random_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 6;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            // random connected Ω̃: a spanning double-star plus extras
            let mut edges = vec![(0, 0)];
            for i in 1..n {
                edges.push((i, 0));
                edges.push((0, i));
            }
            for _ in 0..n {
                edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
            }
            edges.sort_unstable();
            edges.dedup();
            // normalize at the anchor (0,0)
            let scale = a[0] * b[0];
            let w: BTreeMap<(usize, usize), f64> = edges
                .iter()
                .map(|&(i, j)| ((i, j), a[i] * b[j] / scale))
                .collect();
            let g = BipartiteGraph::from_pairs(edges);
            let (ra, rb) = iterative_complete(&w, &g, (0, 0), (n, n), 1e-12).unwrap();
            for i in 0..n {
                assert!((ra[i] - a[i] / a[0]).abs() < 1e-10);
                assert!((rb[i] - b[i] / b[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn traversal_rejects_inconsistent_line() {
        // w of the minimal infeasible instance: dim 1 but not an outer product
        let w = BTreeMap::from([
            ((0usize, 0usize), 1.0),
            ((0, 1), 1.0),
            ((1, 0), 1.0),
            ((1, 1), -1.0),
        ]);
        let g = BipartiteGraph::from_pairs(w.keys().copied().collect());
        assert_eq!(
            iterative_complete(&w, &g, (0, 0), (2, 2), 1e-10),
            Err(StrongDefer::Inconsistent)
        );
    }

    #[test]
    fn traversal_signals_zero_edge() {
        let w = BTreeMap::from([((0usize, 0usize), 1.0), ((0, 1), 0.0), ((1, 1), 1.0)]);
        let g = BipartiteGraph::from_pairs(w.keys().copied().collect());
        // b[1] = 0 is assigned, then a[1] = w[1,1]/b[1] divides by zero
        assert_eq!(
            iterative_complete(&w, &g, (0, 0), (2, 2), 1e-10),
            Err(StrongDefer::ZeroEdge)
        );
    }

    #[test]
    fn back_solve_example_3_1() {
        let t = example_3_1();
        let a = [1.0, -1.0, 1.0];
        let b = [1.0, -1.0, -1.0];
        match back_solve_c(&t, &a, &b, 1e-10) {
            BackSolve::Solved { c, determined } => {
                assert_eq!(c, vec![-1.0, -1.0, 1.0]);
                assert_eq!(determined, vec![true, true, true]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn back_solve_leaves_empty_slices_free() {
        // slices 3 and 5 of the 5×5×5 moment example carry no data
        let t = crate::fixtures::example_7_3();
        let a = [1.0, 2.0, 3.0, 1.0, 1.0];
        let b = [1.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0];
        match back_solve_c(&t, &a, &b, 1e-9) {
            BackSolve::Solved { c, determined } => {
                for (got, want) in c.iter().zip([3.0, 3.0, 0.0, 6.0, 0.0]) {
                    assert!((got - want).abs() < 1e-9);
                }
                assert_eq!(determined, vec![true, true, false, true, false]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn back_solve_zero_coefficients_with_data_is_infeasible() {
        let t = from_triples((1, 1, 1), &[(1, 1, 1, 1.0)]);
        assert_eq!(
            back_solve_c(&t, &[0.0], &[1.0], 1e-10),
            BackSolve::Infeasible { k: 0 }
        );
    }

    #[test]
    fn complete_strong_solves_example_3_1() {
        let r = complete_strong(&example_3_1(), 1e-6, 1e-8).unwrap().unwrap();
        assert_eq!(r.status, Status::Completed);
        assert_eq!(r.method, Method::Iterative);
        assert!(r.residual.unwrap() <= 1e-12);
        for (got, want) in [
            (r.a.unwrap(), vec![1.0, -1.0, 1.0]),
            (r.b.unwrap(), vec![1.0, -1.0, -1.0]),
            (r.c.unwrap(), vec![-1.0, -1.0, 1.0]),
        ] {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-11, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn complete_strong_defers_on_example_3_2ii() {
        let defer = complete_strong(&example_3_2ii(), 1e-6, 1e-8)
            .unwrap()
            .unwrap_err();
        assert_eq!(defer, StrongDefer::NotStrong { dim: 2 });
    }

    #[test]
    fn complete_strong_defers_on_infeasible_line() {
        let defer = complete_strong(&minimal_infeasible(), 1e-6, 1e-8)
            .unwrap()
            .unwrap_err();
        assert_eq!(defer, StrongDefer::Inconsistent);
    }

    #[test]
    fn complete_strong_is_scale_equivalent() {
        // rescaling the generator (a,b,c) -> (ta, sb, c/(ts)) leaves the
        // completed products unchanged
        let t = example_3_1();
        let r = complete_strong(&t, 1e-6, 1e-8).unwrap().unwrap();
        let (a, b, c) = (r.a.unwrap(), r.b.unwrap(), r.c.unwrap());
        for ((i, j, k), v) in t.iter() {
            assert!((a[i] * b[j] * c[k] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_strong_handles_all_zero() {
        let t = from_triples((2, 2, 2), &[(1, 1, 1, 0.0), (2, 2, 2, 0.0)]);
        let r = complete_strong(&t, 1e-6, 1e-8).unwrap().unwrap();
        assert_eq!(r.status, Status::Completed);
        assert_eq!(r.a.unwrap(), vec![0.0, 0.0]);
        assert_eq!(r.residual.unwrap(), 0.0);
    }

    #[test]
    fn symmetric_strong_completion_recovers_v() {
        let v = [1.0, 3.0, 4.0, 5.0, 2.0];
        let mut t = crate::tensor::PartialTensor::new_symmetric(5);
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    t.insert(i, j, k, v[i] * v[j] * v[k]).unwrap();
                }
            }
        }
        let r = complete_strong(&t, 1e-6, 1e-8).unwrap().unwrap();
        assert_eq!(r.status, Status::Completed);
        let a = r.a.unwrap();
        for (got, want) in a.iter().zip(v) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(r.v.is_some() && r.tau.is_some());
    }

    #[test]
    fn traversal_is_path_independent_on_consistent_data() {
        // same instance, anchor reachable through different edges: products
        // are path independent, so a DFS-like order gives the same factors
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 5;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..2.0)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                edges.push((i, j));
            }
        }
        let scale = a[0] * b[0];
        let w: BTreeMap<(usize, usize), f64> = edges
            .iter()
            .map(|&(i, j)| ((i, j), a[i] * b[j] / scale))
            .collect();
        let g = BipartiteGraph::from_pairs(edges.clone());
        let (a1, b1) = iterative_complete(&w, &g, (0, 0), (n, n), 1e-12).unwrap();
        let mut rev = edges;
        rev.reverse();
        let g2 = BipartiteGraph::from_pairs(rev);
        let (a2, b2) = iterative_complete(&w, &g2, (0, 0), (n, n), 1e-12).unwrap();
        for i in 0..n {
            assert!((a1[i] - a2[i]).abs() < 1e-12);
            assert!((b1[i] - b2[i]).abs() < 1e-12);
        }
    }
}
