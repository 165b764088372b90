//! Detection-and-merge toolkit for fragmented layers in UI design drafts.
//!
//! The pipeline parses layered drafts ([`parser`]), renders segmentation maps
//! and fusion images ([`raster`]), cuts detector-sized tiles ([`tiling`]),
//! generates augmented training drafts ([`augment`]), reads merging-area boxes
//! from any detector ([`detector`]), groups the layers inside each box
//! ([`merge`]) and scores both stages ([`metrics`]).

pub mod augment;
pub mod detector;
pub mod draft;
pub mod geometry;
pub mod merge;
pub mod metrics;
pub mod parser;
pub mod raster;
pub mod synth;
pub mod tiling;

pub use draft::{DesignDraft, Layer, LayerType, MergeGroup, Rgb};
pub use geometry::Rect;
pub use parser::{flatten_layers, parse_draft, FlatLayer, FlatLayerList};
