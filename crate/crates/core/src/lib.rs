//! Numerical laboratory for ergodic theorems of almost additive fields on
//! Cayley graphs: eigenvalue counting functions of Anderson and quantum
//! percolation Hamiltonians, pattern frequencies, quasi-tilings and
//! Glivenko–Cantelli statistics.

pub mod coloring;
pub mod empirical;
pub mod ergodic;
pub mod error;
pub mod group;
pub mod hamiltonian;
pub mod mix;
pub mod quasi_tiling;
pub mod spectral;

pub use coloring::{ColorSet, ColorSource, Coloring, Pattern};
pub use error::{Error, Result};
pub use group::{Group, GroupElement, GroupKind, LatticeBox, Region, SiteSet};
