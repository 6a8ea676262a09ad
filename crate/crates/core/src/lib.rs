//! Single-image motion graphics.
//!
//! The pipeline has three stages:
//!
//! 1. [`decompose`] splits a raster into a [`LayeredDocument`]: background,
//!    non-text cutouts, and one layer per text word, using the model clients
//!    in [`clients`].
//! 2. [`planner`] groups the layers, picks an entrance effect per group, and
//!    emits an animation script in the [`animdsl`] language, either from
//!    fixed rules or through a chat LMM.
//! 3. [`timeline`] compiles the script to an absolute schedule and
//!    [`compositor`] rasterizes and encodes the frames.

pub mod animdsl;
pub mod clients;
pub mod compositor;
pub mod decompose;
pub mod document;
pub mod planner;
pub mod raster;
pub mod synth;
pub mod timeline;

pub use document::{LayerImage, LayerKind, LayeredDocument};
pub use raster::{BinaryMask, Rect};
