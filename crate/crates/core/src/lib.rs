pub mod bundle;
pub mod catalog;
pub mod chart;
pub mod checks;
pub mod error;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod mongeampere;
pub mod projective;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod section;
pub mod tensor;
pub mod tractor;
pub mod verify;

pub use chart::{Chart, Domain, PointSample};
pub use error::{Error, Result};
pub use expr::Expr;
pub use jet::{Jet, MAX_ORDER};
pub use tensor::{Slot, TensorJet, Weight};
pub use field::WeightedTensorField;
pub use projective::Connection;
pub use catalog::{catalog_geometry, Geometry, GeometrySpec};
pub use bundle::{BundlePoint, BundleSpace};
pub use section::{classify_section, Ambient, WeylSection};
pub use mongeampere::{convexity_certificate, ma_residual, projective_hessian, weyl_from_density, DensityField};
pub use checks::{run_scenario, RunOptions};
pub use report::{Record, ScenarioReport};
pub use scenario::{CheckName, Scenario};
