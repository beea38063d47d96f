//! Numerical workbench for relative eta forms, superconnection Chern
//! characters and indices of boundary problems on a model cylinder fibration.
//!
//! Everything is computed at finite truncation: operators on the circle are
//! represented on Fourier modes `−N..N`, the base is a periodic grid on a torus
//! of dimension 0, 1 or 2, and differential forms on the base are stored
//! componentwise per multi-index.

pub mod base_forms;
pub mod boundary_family;
pub mod cylinder_aps;
pub mod error;
pub mod superconnection;
pub mod zeta_traces;

pub use base_forms::{BaseGrid, ConnectionData, FormField, Mat, MultiIndex, OperatorForm, C64};
pub use boundary_family::{
    assemble_boundary_family, spectral_projection, BoundaryOperatorFamily, GrassmannSection,
    IndexMethod, Potential,
};
pub use error::{Error, Result};
pub use superconnection::{PairSuperconnection, Superconnection};
