//! Weak Galerkin finite elements on polygonal and polyhedral meshes for the
//! Poisson problem `-Δu = f`, `u = 0` on the boundary, together with a local
//! `P_{k+2}` lifting post-processor that turns the `{u_0, u_b}` pieces of a WG
//! solution into one polynomial per cell.
//!
//! The pipeline is
//!
//! 1. [`mesh`]: polytopal meshes (perturbed quads, mixed polygons, wedges) and
//!    the simplicial subdivision of each cell,
//! 2. [`quadrature`]: collapsed Gauss-Jacobi rules on simplices, cells, faces,
//! 3. [`poly`]: scaled monomial bases and the local `L^2` projections,
//! 4. [`lambda`]: the H(div) test space with one-piece divergence and normal
//!    traces, and the weak gradient it induces,
//! 5. [`element`]: per-cell matrices, shared between congruent cells,
//! 6. [`solver`]: global assembly and preconditioned CG,
//! 7. [`lifting`]: the `P_{k+2}` lifting operator and its injectivity check,
//! 8. [`study`]: error norms and convergence tables.

pub mod config;
pub mod element;
pub mod error;
pub mod lambda;
pub mod lifting;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod study;

pub use error::{Result, WgError};

/// Points are stored in 3D; 2D meshes keep `z = 0`.
pub type Point = nalgebra::Vector3<f64>;
