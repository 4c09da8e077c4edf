//! Geodesics, Jacobi fields and convexity radii on Riemannian manifolds.

pub mod atlas;
pub mod config;
pub mod convexity;
pub mod error;
pub mod flow;
pub mod geodesic;
pub mod jacobi;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod ode;
pub mod oracle;
pub mod par;
pub mod report;
pub mod segments;
pub mod suite;

pub use atlas::Manifold;
pub use error::{Error, Result};
pub use metric::{ManifoldChart, Point, TangentVector};
