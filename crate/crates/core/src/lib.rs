//! Physics-informed blade-icing classification for wind-turbine SCADA data.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm of the
//! pipeline: labeling, denoising and balancing, feature engineering, the
//! strong-rule gate with wind-speed segmentation, the three learners, scoring
//! and cross-validation, the two end-to-end flows and a synthetic SCADA
//! generator. File formats and the command line live in the `icewatch` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod evaluation;
pub mod features;
pub mod gate;
pub mod learners;
pub mod pipeline;
pub mod preprocess;
pub mod record;
pub mod rng;
pub mod synth;
