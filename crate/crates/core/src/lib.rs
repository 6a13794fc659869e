//! Automated nasal PAP mask sizing.
//!
//! A photograph of a face with a coin fiducial on the forehead goes
//! through trainable HOG detectors (face, nose, coin), small CNN landmark
//! regressors for the nose-width and coin-width endpoints, a px/mm scale
//! derived from the coin's known 28.65 mm diameter, and a size chart that
//! maps the physical nose width to an ESON mask size.
//!
//! Modules follow the pipeline stages: [`ingest`] for manifests and
//! splits, [`synthgen`] for compositing coin training data, [`hogdet`]
//! for detection, [`nnet`] for the CNN engine, [`pipeline`] for the
//! end-to-end chain and [`eval`] for the sizing metrics.

pub mod cli;
pub mod error;
pub mod eval;
pub mod facegen;
pub mod geom;
pub mod hogdet;
pub mod ingest;
pub mod nnet;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod sizing;
pub mod synthgen;

pub use error::{Error, Result, Stage};
pub use geom::{bbox_iou, BBox, LandmarkRole, LandmarkSet, Point2};
pub use raster::Raster;
pub use rng::SeededRng;
pub use sizing::{NearBoundary, SizeBin, SizeChart};
