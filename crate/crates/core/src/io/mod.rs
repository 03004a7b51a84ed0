pub mod config;
pub mod frame;
pub mod report;

pub use config::RunConfig;
pub use frame::{load_frame, LagDirective, TimeSeriesFrame};
pub use report::{DataSettings, FitReport, ModelFile};
