//! Kneading theory, transversality checks and transfer operators for
//! one-parameter and few-parameter families of interval and circle maps.

pub mod error;
pub mod families;
pub mod kneading;
pub mod linalg;
pub mod motionlab;
pub mod plmaps;
pub mod roots;
pub mod solver;
pub mod transfer;
pub mod transversality;

pub use error::{Error, Result};
pub use families::{CoreMap, Deformation, FamilyKind, FamilySpec, Side, SidedPoint};
pub use kneading::{Kneading, KneadingSequence, Order};
pub use transversality::{marked_orbit, MarkedOrbit};
