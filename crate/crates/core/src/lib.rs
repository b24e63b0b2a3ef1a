#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expansion;
pub mod linalg;
pub mod nodal;
pub mod ode;
pub mod pencil;
pub mod polyring;
pub mod semilinear;

pub use error::{Error, Result};
pub use expansion::{eval_expansion, Expansion};
pub use nodal::{check_admissibility, isolate_real_roots, AdmissibilityVerdict, CrackConfig, Equation, RootSet};
pub use pencil::{eigenfunction, Eigenpair, PencilOrder, PencilSpec};
pub use polyring::{DiffOp, RatPoly, Rational};
pub use semilinear::{FarCondition, ODEProblem, ProfileSolution, Symmetry};
