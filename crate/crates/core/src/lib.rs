//! Weierstrass data, period problems and surface meshes for dihedralized
//! minimal surfaces with planar ends.

pub mod builder;
pub mod periods;
pub mod quadrature;
pub mod theta;
pub mod weierstrass;

pub use num_complex::Complex64;
pub use periods::{
    continuation, solve_family, tau_continuation, DccwParams, DeParams, DksParams, Family, FamilyParams,
    PeriodError, PeriodResidual, SolutionRecord, SolveOptions,
};
pub use quadrature::{PathSegment, QuadError, QuadratureConfig};
pub use theta::TorusModulus;
pub use weierstrass::{EndType, FormError, WeierstrassData};
