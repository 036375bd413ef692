//! Still-image fire detection.
//!
//! A pixel-color Naive-Bayes classifier over discretized YCbCr values and a
//! superpixel texture classifier (uniform LBP histograms + KNN) each produce
//! a fire mask; the detector reports the pixels flagged by both.
//!
//! The crate also carries two channel-clustering baselines, a pixel-level
//! evaluation harness and a synthetic corpus generator used by the test
//! suites.

pub mod baselines;
pub mod colorcls;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod model;
pub mod pipeline;
pub mod superpixel;
pub mod synth;
pub mod texture;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Binary class label shared by every classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    NotFire,
    Fire,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::NotFire, Class::Fire];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Class::NotFire => 0,
            Class::Fire => 1,
        }
    }

    #[inline]
    pub fn is_fire(self) -> bool {
        self == Class::Fire
    }
}
