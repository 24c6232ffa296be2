//! Numerical laboratory for the parameter space of degree-d polynomials with
//! marked critical points: Green functions and Lyapunov exponents, discrete
//! bifurcation currents on slices, periodic cycles and the `Per_n(w)` loci,
//! their equidistribution towards the bifurcation current, and the
//! branched-cover decomposition of the maximal entropy measure at escaping
//! parameters.

pub mod cycles;
pub mod equidist;
pub mod error;
pub mod family;
pub mod grid;
pub mod potential;
pub mod roots;
pub mod scalar;
pub mod shift;

pub use error::{Error, Result};
pub use family::{FamilySpec, Parameter};
pub use potential::{CriticalIndexSet, GreenResult};
pub use scalar::Real;

/// Double precision family member, the working type of the slice machinery.
pub type Family64 = family::Family<f64>;
pub type Family32 = family::Family<f32>;
pub type Parameter64 = family::Parameter<f64>;
pub type Potential64<'a> = potential::Potential<'a, f64>;
pub type Complex64 = num_complex::Complex<f64>;
