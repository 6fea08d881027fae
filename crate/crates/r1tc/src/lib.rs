//! Rank-1 completion of partially observed cubic (and reshaped higher-order)
//! tensors.
//!
//! Given a tensor with entries known only on an index set Ω, the crate looks
//! for vectors `a`, `b`, `c` with `A[i,j,k] = a[i]*b[j]*c[k]` on Ω. Three
//! methods are provided, in increasing order of cost:
//!
//! 1. **Iterative completion** ([`strong::complete_strong`]) — when the
//!    homogeneous 2×2-minor system built from the observations has a
//!    one-dimensional solution space and the associated bipartite graph is
//!    connected, the factors follow from a breadth-first ratio traversal.
//! 2. **Nuclear-norm relaxation** ([`nuclear::solve_nuclear`]) — minimizes
//!    the nuclear norm of the partial matrix `X = a bᵀ` subject to the minor
//!    equalities, as a semidefinite program. Succeeds when the optimal matrix
//!    is numerically rank one.
//! 3. **Moment hierarchy** ([`moment::solve_moment`]) — solves moment
//!    relaxations of increasing order for the quadratic feasibility system in
//!    `(a, b)`, extracting the completion from a rank-one moment matrix or
//!    certifying that no completion exists via SDP infeasibility.
//!
//! All semidefinite programs are solved by the embedded dense interior-point
//! solver in [`sdp`], a Nesterov–Todd scaled predictor-corrector on the
//! homogeneous self-dual embedding.
//!
//! The [`complete`] entry point chains the three methods (`iterative` →
//! `nuclear` → `moment`) and is what the `r1tc` binary calls.
//!
//! Trials in [`experiment`] and the hot loops of the SDP solver run on rayon
//! when the default `parallel` feature is enabled; disabling it yields a
//! fully sequential build with identical results.

pub mod error;
pub mod experiment;
pub mod gen;
pub mod higher_order;
pub mod moment;
pub mod nuclear;
pub mod pipeline;
pub mod reduction;
pub mod sdp;
pub mod strong;
pub mod tensor;

pub(crate) mod par;

#[cfg(test)]
pub(crate) mod fixtures;

pub use error::Error;
pub use pipeline::{complete, CompleteOptions};
pub use tensor::{AnchorIndex, CompletionResult, Method, PartialTensor, SliceGroup, Status};
