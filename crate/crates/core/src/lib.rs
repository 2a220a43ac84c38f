//! H^m-conforming spectral elements on unions of axis-aligned boxes.
//!
//! The one-dimensional basis on `[-1, 1]` consists of `2m` Hermite-type nodal
//! functions and generalized Jacobi bubbles `J_j^{-m,-m}`; element bases are
//! tensor products of affinely scaled copies. Because the nodal functions
//! carry unit derivative values at the endpoints after scaling, the global
//! C^{m-1} space is realized by plain dof sharing between elements.
//!
//! On top of the basis the crate provides:
//!
//! - [`mesh`]: box-union partitions with entity enumeration and refinement
//! - [`dofmap`]: conforming global numbering and H^m_0 clamping
//! - [`interp`]: the tensorized spectral element interpolant and Sobolev errors
//! - [`assembly`] / [`transmission`]: the H² discretization of the Helmholtz
//!   transmission eigenvalue problem as a linear pencil `A x = λ B x`
//! - [`eigsolver`]: dense QZ and shift-invert Krylov–Schur for that pencil
//!
//! ```no_run
//! use hmsem::{mesh::BoxDomain, assembly::Coefficient, transmission::*};
//!
//! let spec = ProblemSpec::new(BoxDomain::cube(2, -0.5, 0.5), 0, 15, Coefficient::Constant(16.0), 1.9);
//! let result = solve_transmission(&spec).unwrap();
//! println!("k1 = {}", result.wavenumbers[0]);
//! ```

pub mod assembly;
pub mod basis1d;
pub mod dofmap;
pub mod eigsolver;
pub mod error;
pub mod interp;
pub mod mesh;
pub mod orthopoly;
pub mod par;
pub mod sparse;
pub mod tensor;
pub mod transmission;

pub use error::{ErrorCategory, Result, SemError};
pub use par::Execution;

pub use num_complex::Complex64;
