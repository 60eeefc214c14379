pub mod adapt;
pub mod assembly;
pub mod eigsolver;
pub mod error;
pub mod estimator;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod sourceprob;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::{make_domain, Cell, CellId, DomainTag, Edge, EdgeKind, Mesh};
