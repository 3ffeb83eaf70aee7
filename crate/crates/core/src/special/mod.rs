//! Jacobi polynomials, Gauss quadrature, associated Legendre functions and
//! real spherical harmonics. Everything here is a pure function of its inputs.

mod harmonics;
mod jacobi;
mod legendre;

pub use harmonics::{
    azimuthal, azimuthal_dphi, real_spherical_harmonic, real_spherical_harmonic_with_gradient,
    HarmonicIndex,
};
pub use jacobi::{
    gauss_jacobi_rule, gauss_legendre_rule, jacobi_eval, jacobi_eval_with_derivative,
    jacobi_norm_sq, jacobi_weight_integral, QuadratureRule,
};
pub use legendre::{assoc_legendre_norm, assoc_legendre_norm_with_dtheta, LegendreTable};

pub(crate) use jacobi::{jacobi_all_with_derivative, ln_gamma};
