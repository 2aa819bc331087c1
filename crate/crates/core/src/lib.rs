//! Principal cross fields, umbilic loci and certified line-field indices for
//! saddle graphs in Euclidean space and the round three-sphere.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x < y)` deliberately rejects NaN.

pub mod analysis;
pub mod catalog;
pub mod cross;
pub mod field;
pub mod index;
pub mod factor;
pub mod jet;
pub mod poly;
pub mod scenario;
pub mod spaceform;
pub mod sphere;
pub mod surfaces;
pub mod umbilic;

pub use cross::CrossSample;
pub use jet::{Disk, Jet2, Point2};
pub use poly::Poly2;
pub use spaceform::Ambient;
