//! Polynomials, rational transforms, exponential polynomials and Laplace
//! inversion.

mod bromwich;
mod exppoly;
mod invert;
mod lundberg;
mod poly;

pub use bromwich::bromwich_invert;
pub use exppoly::{ExpPoly, Term};
pub use invert::{initial_data, invert_rational, invert_with_roots};
pub use lundberg::{lundberg_polynomial, lundberg_roots};
pub use poly::{poly_roots, Poly, RationalTransform, Root, RootSet};
