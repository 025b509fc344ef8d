//! Trust evaluation on directed, typed trust graphs.
//!
//! Users are nodes, trust statements are edges labelled with one of a small
//! set of trust levels. The model propagates node representations along
//! typed trust chains by rotating them in the complex plane (one unit-modulus
//! rotation per relation type), sums chains of the same type, weighs chain
//! types with learned attention separately for the trustee and trustor role
//! of every node, and classifies ordered node pairs with a small MLP.
//!
//! Layout:
//!
//! - [`ndiff`]: dense tensors, a reverse-mode tape, complex-plane kernels,
//!   Adam and a finite-difference gradient checker.
//! - [`graph`]: loading, indexing and splitting trust graphs, chain-type
//!   enumeration and sparse reachability sums.
//! - [`model`]: parameters, the forward pass, ablation variants and
//!   checkpoints.
//! - [`train`]: training loop, metrics, repeated runs, sweeps and
//!   attention-based explanations.
//! - [`selfcheck`]: the invariant suite run by `trustgnn selfcheck`.

pub mod error;
pub mod graph;
pub mod model;
pub mod ndiff;
pub mod selfcheck;
pub mod toy;
pub mod train;

pub use error::{Error, ErrorKind, Result};
