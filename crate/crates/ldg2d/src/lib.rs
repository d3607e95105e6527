//! Critical points of the two-dimensional Landau-de Gennes energy with two
//! elastic constants on a disk, under winding-k uniaxial Dirichlet data.
//!
//! The crate computes and classifies:
//!
//! - radially symmetric profiles (two-, three- and five-component branches)
//!   of the reduced one-dimensional energies, with stability diagnostics;
//! - full two-dimensional minimizers on triangulated disks, including
//!   non-radial solutions with split defect pairs;
//! - the large-anisotropy limit constraint and its residuals;
//! - first-order symmetry-breaking corrections for |k| = 1 at small
//!   anisotropy, with the ε² remainder check;
//! - continuation sweeps over the elastic constant and disk radius that
//!   assemble phase-diagram records and bracket transitions.

pub mod elastic;
pub mod field;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod opt;
pub mod perturbation;
pub mod radial;
pub mod sweep;
pub mod tensor;

#[doc(hidden)]
pub mod testutil;

pub use tensor::{MaterialParams, QTensor};
