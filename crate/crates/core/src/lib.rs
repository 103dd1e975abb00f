pub mod aggregators;
pub mod error;
pub mod exec;
pub mod fkn;
pub mod hyper;
pub mod laplacian;
pub mod metrics;
pub mod model;
pub mod perm;
pub mod repr;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::Model;
