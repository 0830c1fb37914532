#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod curvature;
pub mod error;
pub mod fmt;
pub mod geometry;
pub mod linalg;
mod ode;
pub mod pde;
pub mod radial;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, Domain, DomainClass, Shape, Sphere};
