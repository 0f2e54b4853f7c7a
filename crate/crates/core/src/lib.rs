//! Numerical toolkit for general L_p projection bodies, the p-integral affine
//! surface area `Phi_{p,tau}` and the affine p-capacity bounds built on it.

pub mod affine;
pub mod bodies;
pub mod capacity;
pub mod cubature;
pub mod error;
pub mod generate;
pub mod quad1d;
pub mod special;
pub mod sphere;
pub mod verify;

pub use bodies::schema::{body_to_json, parse_body, parse_body_str};
pub use bodies::{
    Ball, Body, BoundaryPoint, Ellipsoid, Facet, Polytope, SphericalPoly, StarBody, StarFamily,
};
pub use error::{Error, Result};
pub use special::Params;
pub use sphere::{RuleKind, RuleSpec, SphereRule};
pub use verify::{ChainReport, FuzzConfig, Report, TolerancePolicy};
