//! Planning and analysis toolkit for reconfigurable intelligent surface
//! (RIS) deployments.
//!
//! Two questions are answered here. Over which frequencies can a unit cell
//! still change how it re-radiates (its Bandwidth of Influence)? And where,
//! on a map, does deploying an RIS change a link metric (its Area of
//! Influence)? A Monte-Carlo model of uncoordinated RIS switching between
//! operators is included as well.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod coexist;
pub mod error;
pub mod export;
pub mod influence;
pub mod link;
pub mod localization;
pub mod propagation;
pub mod scene;
pub mod secrecy;
pub mod seed;
pub mod unitcell;

pub use error::{Error, Result};
