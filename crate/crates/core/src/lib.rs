//! Isotropic quadrangular meshes of tori.
//!
//! The crate builds quadrangulations of a flat torus as quotients of the
//! integer grid ([`lattice_grid`]), stores meshes in `R²ⁿ` on them
//! ([`mesh_core`]), computes their symplectic density together with the
//! associated first-order operators ([`discrete_ops`]), and provides two ways
//! of producing isotropic meshes: the discrete moment map flow
//! ([`flow_engine`]) and a fixed-point perturbation of samples of smooth
//! isotropic immersions ([`isoperturb`]). Isotropic quadrangular meshes are
//! refined into isotropic triangulations by [`pyramid_refine`];
//! [`analysis_norms`] hosts discrete Hölder norms, the continuum limit oracle
//! and convergence studies, and [`io`] handles files and exports.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis_norms;
pub mod discrete_ops;
pub mod error;
pub mod flow_engine;
pub mod io;
pub mod isoperturb;
pub mod lattice_grid;
pub mod mesh_core;
pub mod pyramid_refine;

#[doc(hidden)]
pub mod test_util;

pub use error::{Error, Result};
pub use lattice_grid::{approximate_lattice, Component, IMat2, LatticeBasis, QuadGrid};
pub use mesh_core::{
    face_inner, sample_immersion, vertex_inner, FaceFunction, Identification, Immersion, ImmersionSpec, Mesh,
    VertexField,
};
pub use pyramid_refine::TriMesh;
