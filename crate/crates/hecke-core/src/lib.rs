//! Hecke algebras of split reductive p-adic groups in type A, with torsion
//! coefficients: exact coset enumeration, the classical Satake transform,
//! and its degree-one derived extension for rank-one groups.

// Elimination routines index two matrices with the same row/column variables;
// iterator rewrites of those loops hide the arithmetic.
#![allow(clippy::needless_range_loop)]

pub mod cache;
pub mod config;
pub mod cosets;
pub mod error;
pub mod hecke0;
pub mod padic;
pub mod pmatrix;
pub mod rank1;
pub mod root_datum;
pub mod torus;

pub use cache::{CountsCache, CountsKey};
pub use config::{precision_for, ComputeOpts};
pub use error::{HeckeError, Result};
pub use hecke0::{
    check_support_cone, convolve0, satake0, satake0_levi, satake0_levi_to_torus,
    transitivity_check, EnumStats, HeckeElem0, LeviDescriptor, LeviElem0, Ring,
    SupportConeReport, TorusElem0, TransitivityReport,
};
pub use padic::{kappa, padic_log, quadratic_nonresidue, teichmuller, PrecisionContext, PScalar};
pub use pmatrix::{int_snf, PMatrix, SmithNormalForm};
pub use rank1::{
    convolve_mixed, derived_satake1, derived_satake1_all, divisibility_report, evaluate_class,
    permutation_transfer, satake_matrix, transfer_abelian, CanonicalGenerator, DivisibilityRow,
    HeckeElem1, OrbitContribution, Satake1Value, SatakeMatrixReport, Side, ZeroKind,
};
pub use root_datum::{Cocharacter, Family, RootDatum};
pub use torus::{TorusCharGenerator, TorusDHAElem};
