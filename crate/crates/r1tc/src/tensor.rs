//! Core data model: partially observed cubic tensors, anchor selection,
//! slice grouping, residual evaluation, and the text file format.
//!
//! Indices are 0-based everywhere inside the crate. The text format and the
//! JSON output use 1-based indices; conversion happens only in the parse and
//! serialize routines of this module.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partially observed tensor in `R^{n1 x n2 x n3}`: the entry at `(i,j,k)`
/// is known exactly for every key of `entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTensor {
    dims: (usize, usize, usize),
    entries: BTreeMap<(u32, u32, u32), f64>,
    symmetric: bool,
}

/// Observed entries sharing the third index `k`, in lexicographic `(i,j)`
/// order. The groups over all `k` partition Ω.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceGroup {
    pub k: usize,
    pub members: Vec<(usize, usize)>,
}

/// Index and value of an observed entry of largest absolute value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorIndex {
    pub index: (usize, usize, usize),
    pub value: f64,
}

/// Outcome of anchor selection on a nonempty Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorSelection {
    Entry(AnchorIndex),
    /// Every observed value is exactly zero; the zero tensor is the unique
    /// rank-1 completion compatible with Ω and no relaxation is needed.
    AllZero,
}

impl PartialTensor {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        PartialTensor {
            dims: (n1, n2, n3),
            entries: BTreeMap::new(),
            symmetric: false,
        }
    }

    pub fn new_symmetric(n: usize) -> Self {
        PartialTensor {
            dims: (n, n, n),
            entries: BTreeMap::new(),
            symmetric: true,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.entries.get(&(i as u32, j as u32, k as u32)).copied()
    }

    /// Observed entries in lexicographic index order, 0-based.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        self.entries
            .iter()
            .map(|(&(i, j, k), &v)| ((i as usize, j as usize, k as usize), v))
    }

    fn check_range(&self, i: usize, j: usize, k: usize) -> Result<()> {
        if i >= self.dims.0 || j >= self.dims.1 || k >= self.dims.2 {
            return Err(Error::IndexOutOfRange {
                i: i + 1,
                j: j + 1,
                k: k + 1,
                dims: self.dims,
            });
        }
        Ok(())
    }

    /// Insert an observed value at a 0-based index. Re-inserting the same
    /// value is a no-op; a conflicting value is an error. For symmetric
    /// tensors the value is propagated to all index permutations.
    pub fn insert(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        self.check_range(i, j, k)?;
        if self.symmetric {
            for (p, q, r) in permutations3(i, j, k) {
                self.insert_raw(p, q, r, value, true)?;
            }
            Ok(())
        } else {
            self.insert_raw(i, j, k, value, false)
        }
    }

    fn insert_raw(&mut self, i: usize, j: usize, k: usize, value: f64, sym: bool) -> Result<()> {
        let key = (i as u32, j as u32, k as u32);
        if let Some(&old) = self.entries.get(&key) {
            if !values_agree(old, value) {
                return Err(if sym {
                    Error::SymmetryViolation {
                        i: i + 1,
                        j: j + 1,
                        k: k + 1,
                        a: old,
                        b: value,
                    }
                } else {
                    Error::ConflictingEntry {
                        i: i + 1,
                        j: j + 1,
                        k: k + 1,
                        a: old,
                        b: value,
                    }
                });
            }
            return Ok(());
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// The projection Ω̃ = {(i,j) : (i,j,k) ∈ Ω}, sorted lexicographically.
    pub fn projected_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .entries
            .keys()
            .map(|&(i, j, _)| (i as usize, j as usize))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn values_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// All distinct permutations of a triple.
pub(crate) fn permutations3(i: usize, j: usize, k: usize) -> Vec<(usize, usize, usize)> {
    let mut out = vec![
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ];
    out.sort_unstable();
    out.dedup();
    out
}

/// Index of an observed entry of largest absolute value. Ties are broken by
/// the lexicographically smallest index triple, so the result is
/// deterministic and invariant under positive scaling of all entries.
pub fn anchor_index(t: &PartialTensor) -> Result<AnchorSelection> {
    if t.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let mut best: Option<AnchorIndex> = None;
    for (idx, v) in t.iter() {
        let better = match best {
            None => true,
            // strict improvement only: map iteration is lexicographic, so
            // the first attaining triple wins ties
            Some(ref b) => v.abs() > b.value.abs(),
        };
        if better {
            best = Some(AnchorIndex {
                index: idx,
                value: v,
            });
        }
    }
    let best = best.unwrap();
    if best.value == 0.0 {
        Ok(AnchorSelection::AllZero)
    } else {
        Ok(AnchorSelection::Entry(best))
    }
}

/// Decompose Ω into slice groups Ω_k, one group per third index with at
/// least one observation.
pub fn slice_groups(t: &PartialTensor) -> Vec<SliceGroup> {
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for ((i, j, k), _) in t.iter() {
        groups.entry(k).or_default().push((i, j));
    }
    groups
        .into_iter()
        .map(|(k, members)| SliceGroup { k, members })
        .collect()
}

/// Max over Ω of `|A[i,j,k] - a[i] b[j] c[k]|`. Zero exactly when the
/// factors complete the tensor.
pub fn residual(t: &PartialTensor, a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    let (n1, n2, n3) = t.dims;
    for (len, n) in [(a.len(), n1), (b.len(), n2), (c.len(), n3)] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let mut worst = 0.0_f64;
    for ((i, j, k), v) in t.iter() {
        worst = worst.max((v - a[i] * b[j] * c[k]).abs());
    }
    Ok(worst)
}

/// Parse the tensor text format:
///
/// ```text
/// # optional comments
/// dims n1 n2 n3 [symmetric]
/// i j k value        (1-based indices, one observation per line)
/// ```
///
/// Symmetric files are closed under index permutations; listing several
/// permutations of one index with inconsistent values is an error.
pub fn parse_tensor(text: &str) -> Result<PartialTensor> {
    let mut tensor: Option<PartialTensor> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match tensor {
            None => {
                tensor = Some(parse_dims_line(&toks, lineno + 1)?);
            }
            Some(ref mut t) => {
                if toks.len() != 4 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected `i j k value`, got {} tokens", toks.len()),
                    });
                }
                let i = parse_index(toks[0], lineno + 1)?;
                let j = parse_index(toks[1], lineno + 1)?;
                let k = parse_index(toks[2], lineno + 1)?;
                let v: f64 = toks[3].parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad value `{}`", toks[3]),
                })?;
                t.insert(i - 1, j - 1, k - 1, v)?;
            }
        }
    }
    tensor.ok_or(Error::Parse {
        line: 0,
        msg: "missing `dims n1 n2 n3` header".into(),
    })
}

fn parse_dims_line(toks: &[&str], lineno: usize) -> Result<PartialTensor> {
    if toks.first() != Some(&"dims") {
        return Err(Error::Parse {
            line: lineno,
            msg: "first non-comment line must start with `dims`".into(),
        });
    }
    let symmetric = toks.last() == Some(&"symmetric");
    let dim_toks = &toks[1..toks.len() - usize::from(symmetric)];
    if dim_toks.len() != 3 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected 3 dimensions, got {}", dim_toks.len()),
        });
    }
    let mut d = [0usize; 3];
    for (slot, tok) in d.iter_mut().zip(dim_toks) {
        *slot = parse_index(tok, lineno)?;
    }
    if symmetric {
        if d[0] != d[1] || d[1] != d[2] {
            return Err(Error::NotCubic {
                dims: (d[0], d[1], d[2]),
            });
        }
        Ok(PartialTensor::new_symmetric(d[0]))
    } else {
        Ok(PartialTensor::new(d[0], d[1], d[2]))
    }
}

fn parse_index(tok: &str, lineno: usize) -> Result<usize> {
    let n: usize = tok.parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("bad index `{tok}`"),
    })?;
    if n == 0 {
        return Err(Error::Parse {
            line: lineno,
            msg: "indices are 1-based".into(),
        });
    }
    Ok(n)
}

/// Serialize to the text format, entries in lexicographic 1-based order.
/// `parse_tensor(&serialize_tensor(t)) == *t` for every valid tensor.
pub fn serialize_tensor(t: &PartialTensor) -> String {
    let (n1, n2, n3) = t.dims;
    let mut out = String::new();
    let _ = write!(out, "dims {n1} {n2} {n3}");
    if t.symmetric {
        out.push_str(" symmetric");
    }
    out.push('\n');
    for ((i, j, k), v) in t.iter() {
        let _ = writeln!(out, "{} {} {} {}", i + 1, j + 1, k + 1, v);
    }
    out
}

/// Completion status of a [`CompletionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    NoCompletion,
    Inconclusive,
}

/// Which method produced a [`CompletionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Iterative,
    Nuclear,
    Moment,
}

/// A rank-1 completion `A = a ⊗ b ⊗ c` (when `status == Completed`),
/// together with the max-norm residual on the observed entries.
///
/// For symmetric inputs `v` and `tau` are also set, with
/// `a = b = c = tau^(1/3) · v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionResult {
    pub status: Status,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Which entries of `c` were pinned by observations (false = the slice
    /// had no data and the value is a free choice, reported as 0).
    #[serde(skip)]
    pub c_determined: Option<Vec<bool>>,
}

impl CompletionResult {
    pub fn completed(method: Method, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, residual: f64) -> Self {
        CompletionResult {
            status: Status::Completed,
            method,
            a: Some(a),
            b: Some(b),
            c: Some(c),
            residual: Some(residual),
            v: None,
            tau: None,
            c_determined: None,
        }
    }

    pub fn verdict(status: Status, method: Method) -> Self {
        CompletionResult {
            status,
            method,
            a: None,
            b: None,
            c: None,
            residual: None,
            v: None,
            tau: None,
            c_determined: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("completion result serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_3_1, example_3_2i};

    #[test]
    fn anchor_of_example_3_1_is_first_entry() {
        // all entries have magnitude 1; tie broken lexicographically
        let t = example_3_1();
        match anchor_index(&t).unwrap() {
            AnchorSelection::Entry(a) => {
                assert_eq!(a.index, (0, 0, 0));
                assert_eq!(a.value, -1.0);
            }
            AnchorSelection::AllZero => panic!("nonzero tensor"),
        }
    }

    #[test]
    fn anchor_single_entry() {
        let mut t = PartialTensor::new(4, 4, 4);
        t.insert(1, 2, 3, 5.0).unwrap();
        match anchor_index(&t).unwrap() {
            AnchorSelection::Entry(a) => assert_eq!((a.index, a.value), ((1, 2, 3), 5.0)),
            _ => panic!(),
        }
    }

    #[test]
    fn anchor_of_example_3_2i_breaks_ties_lexicographically() {
        // |4| is attained at (1,3,1), (1,1,2), (2,3,2); smallest is (1,1,2)
        let t = example_3_2i();
        match anchor_index(&t).unwrap() {
            AnchorSelection::Entry(a) => {
                assert_eq!(a.index, (0, 0, 1));
                assert_eq!(a.value, 4.0);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn anchor_errors_and_signals() {
        let t = PartialTensor::new(2, 2, 2);
        assert!(matches!(anchor_index(&t), Err(Error::EmptyObservations)));

        let mut z = PartialTensor::new(2, 2, 2);
        z.insert(0, 0, 0, 0.0).unwrap();
        z.insert(1, 1, 1, 0.0).unwrap();
        assert_eq!(anchor_index(&z).unwrap(), AnchorSelection::AllZero);
    }

    #[test]
    fn anchor_invariant_under_positive_scaling() {
        let t = example_3_2i();
        let mut scaled = PartialTensor::new(4, 4, 4);
        for ((i, j, k), v) in t.iter() {
            scaled.insert(i, j, k, 7.5 * v).unwrap();
        }
        let (a, b) = match (anchor_index(&t).unwrap(), anchor_index(&scaled).unwrap()) {
            (AnchorSelection::Entry(a), AnchorSelection::Entry(b)) => (a, b),
            _ => panic!(),
        };
        assert_eq!(a.index, b.index);
    }

    #[test]
    fn slice_groups_of_example_3_1() {
        let t = example_3_1();
        let groups = slice_groups(&t);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].k, 0);
        assert_eq!(groups[0].members, vec![(0, 0), (1, 1), (2, 0)]);
        assert_eq!(groups[1].members.len(), 2);
        assert_eq!(groups[2].members.len(), 3);
    }

    #[test]
    fn slice_groups_full_tensor() {
        let mut t = PartialTensor::new(2, 2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t.insert(i, j, k, 1.0).unwrap();
                }
            }
        }
        let groups = slice_groups(&t);
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.members.len() == 4));
    }

    #[test]
    fn slice_groups_partition_omega() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut t = PartialTensor::new(4, 4, 4);
        let mut inserted = 0;
        while inserted < 10 {
            let (i, j, k) = (rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(0..4));
            if t.get(i, j, k).is_none() {
                t.insert(i, j, k, rng.gen_range(-1.0..1.0)).unwrap();
                inserted += 1;
            }
        }
        let total: usize = slice_groups(&t).iter().map(|g| g.members.len()).sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn residual_of_exact_factors_is_zero() {
        let t = example_3_1();
        let r = residual(&t, &[1.0, -1.0, 1.0], &[1.0, -1.0, -1.0], &[-1.0, -1.0, 1.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn residual_of_zero_factors_is_max_abs() {
        let t = example_3_2i();
        let r = residual(&t, &[0.0; 4], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(r, t.max_abs());
    }

    #[test]
    fn residual_rejects_bad_lengths() {
        let t = example_3_1();
        assert!(residual(&t, &[1.0; 2], &[1.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn parse_example_3_1_from_text() {
        let text = "\
# Example tensor
dims 3 3 3
1 1 1 -1
2 2 1 -1
3 1 1 -1
1 3 2 1
3 1 2 -1
2 3 3 1
3 1 3 1
3 2 3 -1
";
        let t = parse_tensor(text).unwrap();
        assert_eq!(t, example_3_1());
        assert_eq!(t.len(), 8);
    }

    #[test]
    fn parse_empty_body_is_valid() {
        let t = parse_tensor("dims 2 3 4\n").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dims(), (2, 3, 4));
    }

    #[test]
    fn parse_symmetric_closure() {
        let t = parse_tensor("dims 5 5 5 symmetric\n2 3 5 24\n").unwrap();
        assert_eq!(t.len(), 6);
        for (p, q, r) in permutations3(1, 2, 4) {
            assert_eq!(t.get(p, q, r), Some(24.0));
        }
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(parse_tensor("dims 2 2\n").is_err());
        assert!(parse_tensor("dims 2 2 2\n3 1 1 1.0\n").is_err()); // out of range
        assert!(parse_tensor("dims 2 2 2\n1 1 1 1.0\n1 1 1 2.0\n").is_err()); // conflict
        assert!(parse_tensor("dims 2 2 2\n0 1 1 1.0\n").is_err()); // 0-based index
        assert!(parse_tensor("dims 2 2 2\n1 1 1\n").is_err()); // missing value
        assert!(parse_tensor("dims 3 3 3 symmetric\n1 2 3 1.0\n2 1 3 4.0\n").is_err());
        assert!(parse_tensor("dims 2 3 3 symmetric\n").is_err()); // not cubic
    }

    #[test]
    fn serialize_parse_round_trip() {
        let t = example_3_2i();
        let text = serialize_tensor(&t);
        assert_eq!(parse_tensor(&text).unwrap(), t);
        // serialize ∘ parse is the identity on canonical text
        assert_eq!(serialize_tensor(&parse_tensor(&text).unwrap()), text);
    }

    #[test]
    fn completion_result_json_shape() {
        let r = CompletionResult::completed(
            Method::Iterative,
            vec![1.0, -1.0],
            vec![1.0],
            vec![2.0],
            0.0,
        );
        let json = r.to_json();
        assert!(json.contains("\"status\": \"completed\""));
        assert!(json.contains("\"method\": \"iterative\""));
        let back: CompletionResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.status, Status::Completed);

        let v = CompletionResult::verdict(Status::NoCompletion, Method::Moment);
        assert!(!v.to_json().contains("\"a\""));
    }
}
