//! Shared test tensors (unit tests only). All are entered 1-based, matching
//! the text format.

use crate::tensor::PartialTensor;

pub fn from_triples(
    dims: (usize, usize, usize),
    entries: &[(usize, usize, usize, f64)],
) -> PartialTensor {
    let mut t = PartialTensor::new(dims.0, dims.1, dims.2);
    for &(i, j, k, v) in entries {
        t.insert(i - 1, j - 1, k - 1, v).unwrap();
    }
    t
}

pub fn from_triples_symmetric(n: usize, entries: &[(usize, usize, usize, f64)]) -> PartialTensor {
    let mut t = PartialTensor::new_symmetric(n);
    for &(i, j, k, v) in entries {
        t.insert(i - 1, j - 1, k - 1, v).unwrap();
    }
    t
}

/// 3×3×3, strongly completable, completed by a=(1,-1,1), b=(1,-1,-1),
/// c=(-1,-1,1).
pub fn example_3_1() -> PartialTensor {
    from_triples(
        (3, 3, 3),
        &[
            (1, 1, 1, -1.0),
            (2, 2, 1, -1.0),
            (3, 1, 1, -1.0),
            (1, 3, 2, 1.0),
            (3, 1, 2, -1.0),
            (2, 3, 3, 1.0),
            (3, 1, 3, 1.0),
            (3, 2, 3, -1.0),
        ],
    )
}

/// 4×4×4 with twelve entries; its nuclear relaxation is rank-1 with
/// a*=(1,1/2,1/2,1/2), b*=(1,1,2,1), c*=(2,4,2,2).
pub fn example_3_2i() -> PartialTensor {
    from_triples(
        (4, 4, 4),
        &[
            (1, 2, 1, 2.0),
            (1, 3, 1, 4.0),
            (4, 4, 1, 1.0),
            (1, 1, 2, 4.0),
            (2, 3, 2, 4.0),
            (3, 2, 2, 2.0),
            (4, 1, 2, 2.0),
            (3, 4, 3, 1.0),
            (4, 1, 3, 1.0),
            (4, 2, 3, 1.0),
            (4, 4, 3, 1.0),
            (1, 1, 4, 2.0),
        ],
    )
}

/// 3×3×3 with five entries; completable, but its nuclear relaxation returns
/// a rank-3 matrix.
pub fn example_3_2ii() -> PartialTensor {
    from_triples(
        (3, 3, 3),
        &[
            (1, 3, 1, 4.0),
            (2, 2, 2, 2.0),
            (1, 3, 3, 4.0),
            (2, 1, 3, 1.0),
            (3, 2, 3, 1.0),
        ],
    )
}

/// 5×5×5 with ten entries; not strongly completable, solved by the moment
/// method with a*=(1,2,3,1,1), b*=(1,1/3,1/3,2/3,1/3), c*=(3,3,0,6,0)
/// (a₃ is unconstrained by Ω and c₃, c₅ are free).
pub fn example_7_3() -> PartialTensor {
    from_triples(
        (5, 5, 5),
        &[
            (1, 1, 1, 3.0),
            (1, 5, 1, 1.0),
            (2, 4, 1, 4.0),
            (4, 2, 1, 1.0),
            (4, 5, 1, 1.0),
            (5, 2, 1, 1.0),
            (5, 2, 2, 1.0),
            (5, 4, 2, 2.0),
            (2, 3, 4, 4.0),
            (4, 1, 4, 6.0),
        ],
    )
}

/// Symmetric 5×5×5; nuclear relaxation is rank 3, moment method recovers
/// v* = (1,3,4,5,2) with tau = 1.
pub fn example_7_4() -> PartialTensor {
    from_triples_symmetric(
        5,
        &[
            (1, 5, 1, 2.0),
            (2, 2, 1, 9.0),
            (5, 4, 1, 10.0),
            (2, 2, 2, 27.0),
            (3, 3, 3, 64.0),
            (3, 5, 3, 32.0),
            (5, 1, 3, 8.0),
            (5, 4, 3, 40.0),
            (4, 5, 4, 50.0),
            (1, 1, 5, 2.0),
            (2, 3, 5, 24.0),
        ],
    )
}

/// Smallest instance with no rank-1 completion: the minor system forces the
/// anchor coordinate of the solution line to vanish.
pub fn minimal_infeasible() -> PartialTensor {
    from_triples(
        (2, 2, 1),
        &[
            (1, 1, 1, 1.0),
            (1, 2, 1, 1.0),
            (2, 1, 1, 1.0),
            (2, 2, 1, -1.0),
        ],
    )
}

/// Printed optimum of the nuclear relaxation for `example_7_4` (rank 3).
pub fn example_7_4_printed_v() -> [[f64; 5]; 5] {
    [
        [0.1961, 0.2547, 0.7845, 0.9806, 1.0000],
        [0.2547, 4.5000, 2.3534, 1.2739, 1.2991],
        [0.7845, 2.3534, 8.0000, 3.9222, 4.0000],
        [0.9806, 1.2739, 3.9222, 4.9028, 5.0000],
        [1.0000, 1.2991, 4.0000, 5.0000, 5.0991],
    ]
}
