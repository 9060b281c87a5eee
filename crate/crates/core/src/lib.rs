//! Generalized Walsh (Chrestenson) systems of order `a`, exact step
//! functions on a-adic grids, and certified constructions of universal
//! double Walsh series in weighted L¹.

pub mod approx1d;
pub mod approx2d;
pub mod cert;
pub mod cyclo;
pub mod digits;
pub mod error;
pub mod grid;
pub mod num;
pub mod transform;
pub mod universal;
pub mod walsh;

pub use error::{Error, Result};
