//! Load-profile classification, forecasting and femtocell on/off planning
//! from call detail records.

pub mod error;
pub mod ingest;
pub mod kernels;
pub mod kmeans;
pub mod model_io;
pub mod model_select;
pub mod planner;
pub mod scalar;
mod smo;
pub mod svc;
pub mod svr;
pub mod synthgen;

pub use error::{Error, Result};
pub use ingest::{Granularity, LoadSeries, BINS_PER_DAY};
pub use model_io::Model;
pub use scalar::Scalar;
pub use smo::{Solution, SolverParams};
pub use svc::ClassLabel;

pub type Profile = ingest::Profile<f64>;
pub type Profile32 = ingest::Profile<f32>;
pub type Kernel = kernels::Kernel<f64>;
pub type Kernel32 = kernels::Kernel<f32>;
pub type SvcModel = svc::MulticlassModel<f64>;
pub type SvcModel32 = svc::MulticlassModel<f32>;
pub type BinaryModel = svc::BinaryModel<f64>;
pub type SvcParams = svc::SvcParams<f64>;
pub type KmeansRef = kmeans::KmeansRef<f64>;
pub type KmeansRef32 = kmeans::KmeansRef<f32>;
pub type SvrModel = svr::SvrModel<f64>;
pub type SvrModel32 = svr::SvrModel<f32>;
pub type SvrParams = svr::SvrParams<f64>;
pub type GridSpec = model_select::GridSpec<f64>;
