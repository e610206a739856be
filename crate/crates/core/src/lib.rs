//! Conformal prediction intervals for time series built component by
//! component: the series is split by STL into trend, seasonal and remainder
//! parts, each part gets its own regressor and conformal method, and the
//! component intervals are added back together.
//!
//! ```no_run
//! use decomp_conformal::{
//!     generate_synthetic, run_decomposed, HyperParams, Method, MethodAssignment, SplitSpec,
//! };
//!
//! let series = generate_synthetic(3000, 0)?;
//! let split = SplitSpec::from_fractions(series.len(), 0.5, 0.25)?;
//! let assignment = MethodAssignment::new(Method::EnbPI, Method::BinaryPoint, Method::CVPlus, 0.1)?;
//! let run = run_decomposed(&series, &split, &assignment, &HyperParams::default())?;
//! println!("coverage {:.3}, width {:.2}", run.picp, run.piaw);
//! # Ok::<(), decomp_conformal::Error>(())
//! ```

pub mod conformal;
pub mod error;
pub mod eval;
pub mod loess;
pub mod pipeline;
pub mod regress;
pub mod sequential;
pub mod stl;
pub mod types;
pub mod weights;

pub use conformal::{
    conformal_quantile, cv_plus_interval, residual_scores, split_cp_interval, weighted_quantile,
    CvPlus, WeightedScoreSet,
};
pub use error::{Error, Result};
pub use eval::{
    emit_report, generate_synthetic, load_csv, piaw, picp, run_sweep, write_series_csv, CsvSchema,
    DatasetSpec, EvalRow, SummaryRow, SweepConfig, SweepEntry, SweepOutcome,
};
pub use loess::{loess_smooth, LoessConfig};
pub use pipeline::{
    bonferroni_alpha, decompose_for_run, recompose_intervals, run_decomposed, run_raw_baseline,
    ComponentForecast, RunResult,
};
pub use regress::{build_lag_features, fit_linear, LagMatrix, LinearModel};
pub use sequential::{aci_run, aci_step, enbpi_run, AciState, EnbpiConfig, EnbpiState};
pub use stl::{stl_decompose, SeasonalWindow, StlConfig};
pub use types::{
    validate_series, Component, DecompositionResult, HyperParams, Interval, IntervalSeries, Method,
    MethodAssignment, SplitSpec, TestDecomposition, TimeSeries,
};
