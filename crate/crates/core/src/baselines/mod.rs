//! Classical and similarity-based forecasters.

pub mod barycenter;
pub mod dtw;
pub mod holt_winters;
pub mod knn;

pub use barycenter::{dba, euclidean_barycenter, DbaResult};
pub use dtw::{dtw, euclidean, Alignment, Dtw};
pub use holt_winters::{holt_winters_fit, HoltWintersParams, HoltWintersState, SeasonalForm};
pub use knn::{knn_forecast, nearest, CombinerKind, DistanceKind, KnnConfig};
