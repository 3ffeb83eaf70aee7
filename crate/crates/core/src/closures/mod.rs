//! Conformation-tensor closure models and the quasi-equilibrium machinery
//! they rely on.

pub mod qe;

pub use qe::{
    check_admissible, equilibrium_constant, equilibrium_moment, qe_density, qe_forward, qe_invert_newton,
    NewtonReport, QeIntegrator, QeMoments,
};
pub mod pla;

pub use pla::{pla_build_table, pla_lookup, PlaGridSpec, PlaTable};
pub mod nn;
pub mod dataset;

pub use dataset::{gen_dataset, QeDataset, QeRecord, SamplingSpec};
pub use nn::{nn_infer, nn_load, MlpWeights};
pub mod model;

pub use model::{
    closure_log_density, closure_rhs, integrate_closure, normalized_density_on_grid, polymer_stress,
    ClosureModel, ClosureRunOptions, ClosureTrajectory, FenePVariant,
};
