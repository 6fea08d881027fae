//! Monomial bookkeeping for the moment relaxations: exponent vectors of all
//! monomials up to a degree, in graded lexicographic order (ascending total
//! degree; within a degree, earlier variables carry higher exponents first,
//! so for two variables the order is `1, x1, x2, x1², x1x2, x2², ...`).

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub n_vars: usize,
    pub degree: usize,
    pub exponents: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn fill_degree(n: usize, d: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if n == 1 {
        prefix.push(d as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=d).rev() {
        prefix.push(e as u8);
        fill_degree(n - 1, d - e, prefix, out);
        prefix.pop();
    }
}

impl MonomialBasis {
    pub fn new(n_vars: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        if n_vars == 0 {
            exponents.push(Vec::new());
        } else {
            for d in 0..=degree {
                let mut prefix = Vec::with_capacity(n_vars);
                fill_degree(n_vars, d, &mut prefix, &mut exponents);
            }
        }
        let index = exponents
            .iter()
            .enumerate()
            .map(|(p, e)| (e.clone(), p))
            .collect();
        MonomialBasis {
            n_vars,
            degree,
            exponents,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn position(&self, exp: &[u8]) -> Option<usize> {
        self.index.get(exp).copied()
    }

    /// Position of `x_v` (degree-one monomial of variable `v`).
    pub fn position_of_var(&self, v: usize) -> usize {
        // degree-one monomials sit right after the constant, in variable order
        1 + v
    }
}

/// Choose(n + d, d), the number of monomials in `n` variables of degree ≤ d.
pub fn basis_len(n: usize, d: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 1..=d {
        num *= n + i;
        den *= i;
    }
    num / den
}

pub fn add_exponents(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
