//! Field instance extraction from per-pixel segmentation masks, and its
//! evaluation.
//!
//! The pipeline takes three probability rasters (field extent, field
//! boundary, distance to boundary), turns them into a label map of
//! individual fields with either a cutoff or a seeded watershed rule, tunes
//! the thresholds against reference fields, and scores the result with
//! pixel and object metrics.

pub mod components;
pub mod config;
pub mod distance;
pub mod edge;
pub mod error;
pub mod extract;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod labelgen;
pub mod loss;
pub mod metrics;
pub mod raster;
pub mod region;
pub mod report;
pub mod synth;
pub mod threshold;
pub mod vectorize;

pub use components::{connected_components, split_components};
pub use distance::euclidean_distance_transform;
pub use edge::{edge_pseudoprobability, pseudoprobability, scharr_magnitude};
pub use error::{Error, Result};
pub use extract::{extract, extract_cutoff, extract_watershed, MaskTriple, Method, ThresholdSet};
pub use fusion::{consensus, mosaic_windows, WindowPrediction};
pub use geometry::{FieldPolygon, FieldPolygonSet, Polygon, Ring};
pub use labelgen::{make_boundary_mask, make_distance_labels, rasterize_polygons, LabelSet};
pub use loss::{multitask_loss, tanimoto, tanimoto_dual, tanimoto_dual_grad};
pub use metrics::{object_metrics, pixel_metrics, wilcoxon_signed_rank, ObjectReport, PixelMetrics};
pub use raster::{standardize, BinaryMask, Connectivity, FieldLabelMap, GeoTransform, GridSpec, Raster};
pub use region::{region_stats, RegionStats};
pub use synth::{degrade, generate_scene, Scene, SceneSpec};
pub use threshold::{
    optimize_extent_threshold, optimize_instance_thresholds, pareto_front, select_threshold, Candidate,
};
pub use vectorize::vectorize;
