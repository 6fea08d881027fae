use super::*;

fn solve_default(p: &SdpProblem) -> SdpSolution {
    solve(p, &SdpOptions::default()).unwrap()
}

/// min y s.t. [[y, 1], [1, y]] ⪰ 0; the block is PSD iff y ≥ 1.
fn scalar_psd_problem() -> SdpProblem {
    SdpProblem {
        num_vars: 1,
        objective: vec![1.0],
        blocks: vec![BlockMap {
            dim: 2,
            constant: SparseSym::from_entries(&[(1, 0, 1.0)]),
            coeffs: vec![SparseSym::from_entries(&[(0, 0, 1.0), (1, 1, 1.0)])],
        }],
        equalities: vec![],
    }
}

/// min trace(X) over 2×2 PSD X with X₁₁ = 1; variables are the matrix
/// entries (x11, x21, x22).
fn trace_problem() -> SdpProblem {
    SdpProblem {
        num_vars: 3,
        objective: vec![1.0, 0.0, 1.0],
        blocks: vec![BlockMap {
            dim: 2,
            constant: SparseSym::new(),
            coeffs: vec![
                SparseSym::from_entries(&[(0, 0, 1.0)]),
                SparseSym::from_entries(&[(1, 0, 1.0)]),
                SparseSym::from_entries(&[(1, 1, 1.0)]),
            ],
        }],
        equalities: vec![Equality {
            coeffs: vec![(0, 1.0)],
            rhs: 1.0,
        }],
    }
}

#[test]
fn scalar_psd_reaches_closed_form() {
    let sol = solve_default(&scalar_psd_problem());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.y[0] - 1.0).abs() < 1e-7, "y = {}", sol.y[0]);
    assert!((sol.primal_obj - 1.0).abs() < 1e-7);
    assert!(sol.kkt.min_block_eig >= -1e-8);
    assert!(sol.kkt.rel_gap <= 1e-8);
}

#[test]
fn trace_minimization_reaches_closed_form() {
    let sol = solve_default(&trace_problem());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_obj - 1.0).abs() < 1e-7);
    assert!((sol.y[0] - 1.0).abs() < 1e-9); // pinned exactly by presolve
    assert!(sol.y[1].abs() < 1e-6);
    assert!(sol.y[2].abs() < 1e-6);
    assert!(sol.kkt.equality_residual <= 1e-12);
}

#[test]
fn constant_negative_block_is_primal_infeasible() {
    let p = SdpProblem {
        num_vars: 1,
        objective: vec![1.0],
        blocks: vec![BlockMap {
            dim: 2,
            constant: SparseSym::from_entries(&[(0, 0, -1.0), (1, 1, -1.0)]),
            coeffs: vec![SparseSym::new()],
        }],
        equalities: vec![],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    let cert = sol.certificate.unwrap();
    assert!(cert.violation >= 0.99);
}

#[test]
fn conflicting_scalar_bounds_are_detected_by_the_embedding() {
    // y ≥ 4 and y ≤ 3 as two 1×1 blocks
    let p = SdpProblem {
        num_vars: 1,
        objective: vec![0.0],
        blocks: vec![
            BlockMap {
                dim: 1,
                constant: SparseSym::from_entries(&[(0, 0, -4.0)]),
                coeffs: vec![SparseSym::from_entries(&[(0, 0, 1.0)])],
            },
            BlockMap {
                dim: 1,
                constant: SparseSym::from_entries(&[(0, 0, 3.0)]),
                coeffs: vec![SparseSym::from_entries(&[(0, 0, -1.0)])],
            },
        ],
        equalities: vec![],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
}

#[test]
fn inconsistent_equalities_are_primal_infeasible() {
    let p = SdpProblem {
        num_vars: 2,
        objective: vec![0.0, 0.0],
        blocks: vec![BlockMap {
            dim: 1,
            constant: SparseSym::new(),
            coeffs: vec![
                SparseSym::from_entries(&[(0, 0, 1.0)]),
                SparseSym::new(),
            ],
        }],
        equalities: vec![
            Equality {
                coeffs: vec![(0, 1.0), (1, -1.0)],
                rhs: 0.0,
            },
            Equality {
                coeffs: vec![(0, 1.0), (1, 1.0)],
                rhs: 2.0,
            },
            Equality {
                coeffs: vec![(1, 1.0)],
                rhs: 3.0,
            },
        ],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    assert!(sol.certificate.unwrap().violation > 0.5);
}

#[test]
fn unbounded_objective_direction_is_flagged() {
    // y₂ touches no block but has a nonzero objective coefficient
    let p = SdpProblem {
        num_vars: 2,
        objective: vec![0.0, 1.0],
        blocks: vec![BlockMap {
            dim: 1,
            constant: SparseSym::from_entries(&[(0, 0, 1.0)]),
            coeffs: vec![SparseSym::from_entries(&[(0, 0, 1.0)]), SparseSym::new()],
        }],
        equalities: vec![],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::DualInfeasibleOrUnbounded);
}

#[test]
fn unbounded_cone_direction_is_flagged() {
    // min −y with only y ≥ 0 as constraint
    let p = SdpProblem {
        num_vars: 1,
        objective: vec![-1.0],
        blocks: vec![BlockMap {
            dim: 1,
            constant: SparseSym::new(),
            coeffs: vec![SparseSym::from_entries(&[(0, 0, 1.0)])],
        }],
        equalities: vec![],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::DualInfeasibleOrUnbounded);
}

#[test]
fn dense_equality_rows_are_eliminated() {
    // y1 + y2 + y3 = 3 and y1 + 2 y2 + 4 y3 = 6 over diag(y1, y2, y3) ⪰ 0
    let p = SdpProblem {
        num_vars: 3,
        objective: vec![1.0, 0.0, 0.0],
        blocks: vec![BlockMap {
            dim: 3,
            constant: SparseSym::new(),
            coeffs: vec![
                SparseSym::from_entries(&[(0, 0, 1.0)]),
                SparseSym::from_entries(&[(1, 1, 1.0)]),
                SparseSym::from_entries(&[(2, 2, 1.0)]),
            ],
        }],
        equalities: vec![
            Equality {
                coeffs: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
                rhs: 3.0,
            },
            Equality {
                coeffs: vec![(0, 1.0), (1, 2.0), (2, 4.0)],
                rhs: 6.0,
            },
        ],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    // family y = (2t, 3−3t, t) for t ∈ [0, 1]; min y1 at t = 0
    assert!(sol.primal_obj.abs() < 1e-6, "obj = {}", sol.primal_obj);
    assert!((sol.y[1] - 3.0).abs() < 1e-5);
    assert!(sol.kkt.equality_residual < 1e-8);
}

#[test]
fn fully_pinned_feasible_problem_short_circuits() {
    let p = SdpProblem {
        num_vars: 1,
        objective: vec![2.0],
        blocks: vec![BlockMap {
            dim: 1,
            constant: SparseSym::new(),
            coeffs: vec![SparseSym::from_entries(&[(0, 0, 1.0)])],
        }],
        equalities: vec![Equality {
            coeffs: vec![(0, 1.0)],
            rhs: 5.0,
        }],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert_eq!(sol.y, vec![5.0]);
    assert_eq!(sol.primal_obj, 10.0);
    assert_eq!(sol.iterations, 0);
}

#[test]
fn repeated_solves_agree() {
    let p = scalar_psd_problem();
    let s1 = solve_default(&p);
    let s2 = solve_default(&p);
    assert!((s1.primal_obj - s2.primal_obj).abs() <= 1e-9);
    assert_eq!(s1.iterations, s2.iterations);
}

#[test]
fn malformed_problems_error_before_iterating() {
    // coefficient list length mismatch
    let p = SdpProblem {
        num_vars: 2,
        objective: vec![0.0, 0.0],
        blocks: vec![BlockMap {
            dim: 1,
            constant: SparseSym::new(),
            coeffs: vec![SparseSym::new()],
        }],
        equalities: vec![],
    };
    assert!(solve(&p, &SdpOptions::default()).is_err());

    let p2 = SdpProblem {
        num_vars: 1,
        objective: vec![0.0, 1.0],
        blocks: vec![],
        equalities: vec![],
    };
    assert!(solve(&p2, &SdpOptions::default()).is_err());
}

#[test]
fn two_block_problem_with_coupling() {
    // min y1 + y2 with [[y1, 1], [1, y2]] ⪰ 0: optimum at y1 = y2 = 1
    let p = SdpProblem {
        num_vars: 2,
        objective: vec![1.0, 1.0],
        blocks: vec![BlockMap {
            dim: 2,
            constant: SparseSym::from_entries(&[(1, 0, 1.0)]),
            coeffs: vec![
                SparseSym::from_entries(&[(0, 0, 1.0)]),
                SparseSym::from_entries(&[(1, 1, 1.0)]),
            ],
        }],
        equalities: vec![],
    };
    let sol = solve_default(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_obj - 2.0).abs() < 1e-6);
    assert!((sol.y[0] * sol.y[1] - 1.0).abs() < 1e-5);
}

#[test]
fn random_bounded_instances_certify_their_own_optimum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for trial in 0..10 {
        let n = 4;
        let m = 5;
        // strictly feasible: C = S0 − Σ y0_i A_i with S0 ≻ 0;
        // bounded: c_i = ⟨A_i, Z0⟩ with Z0 ≻ 0
        let rand_sym = |rng: &mut rand_chacha::ChaCha8Rng, scale: f64| {
            let mut s = SparseSym::new();
            for i in 0..n {
                for j in 0..=i {
                    s.push(i, j, scale * rng.gen_range(-1.0..1.0));
                }
            }
            s
        };
        let spd_dense = |rng: &mut rand_chacha::ChaCha8Rng| {
            let g = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            &g * g.transpose() + nalgebra::DMatrix::identity(n, n) * 0.5
        };
        let coeffs: Vec<SparseSym> = (0..m).map(|_| rand_sym(&mut rng, 1.0)).collect();
        let y0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s0 = spd_dense(&mut rng);
        let z0 = spd_dense(&mut rng);
        let mut c_mat = s0.clone();
        for (i, a_i) in coeffs.iter().enumerate() {
            a_i.add_scaled_to(&mut c_mat, -y0[i]);
        }
        let mut constant = SparseSym::new();
        for i in 0..n {
            for j in 0..=i {
                constant.push(i, j, c_mat[(i, j)]);
            }
        }
        let objective: Vec<f64> = coeffs
            .iter()
            .map(|a_i| {
                let d = a_i.to_dense(n);
                (0..n)
                    .flat_map(|r| (0..n).map(move |cc| (r, cc)))
                    .map(|(r, cc)| d[(r, cc)] * z0[(r, cc)])
                    .sum()
            })
            .collect();
        let p = SdpProblem {
            num_vars: m,
            objective,
            blocks: vec![BlockMap {
                dim: n,
                constant,
                coeffs,
            }],
            equalities: vec![],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal, "trial {trial}");
        assert!(sol.kkt.rel_gap <= 1e-7, "trial {trial}: {:?}", sol.kkt);
        assert!(sol.kkt.min_block_eig >= -1e-7, "trial {trial}");
        // duality sandwich: certified bound within gap of achieved value
        assert!(sol.primal_obj + 1e-6 >= sol.dual_obj);
    }
}
