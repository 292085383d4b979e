//! Finite-dimensional operator space norms.
//!
//! Operator spaces are concrete subspaces of matrix algebras. Min (spatial)
//! norms are computed exactly from singular values; completely bounded,
//! weighted, collection-restricted and bilinear norms come back as certified
//! brackets ([`NormEstimate`]) from seeded projected ascent paired with
//! explicit upper bounds.

mod barrier;
pub mod bilinear;
pub mod decomp;
pub mod error;
pub mod estimate;
pub mod io;
pub mod lambdaclass;
pub mod linalg;
pub mod maps;
pub mod quantcheck;
pub mod random;
pub mod space;
pub mod suites;

pub use bilinear::{
    bilinear_amplify, bilinear_lambda_norm, lambda_tensor_norm_lower, matrix_pairing, symmetry_check, weighted_tensor,
    BilinearKind, BilinearMapRep, BilinearWeight, SymmetryReport,
};
pub use decomp::{haagerup_upper, projective_upper, schur_upper, DecompMode, Decomposition};
pub use error::{Error, Result};
pub use estimate::{EstimatorConfig, NormEstimate, Witness};
pub use lambdaclass::{
    ckmn_model_norm, lambda_class_norm, lambda_dual_matrix_norm, sandwich_check, tensor_with_identity,
    LambdaCollection, SandwichReport,
};
pub use maps::{
    cb_norm, induced_norm, lambda_cb_norm, matrix_of_maps_norm, LinearMapRep, MapStructure, WeightKind,
    WeightSequence,
};
pub use space::{min_tensor, ConcreteSpace, MatElement, TensorElement};
