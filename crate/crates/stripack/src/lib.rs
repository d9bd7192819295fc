//! Strip-packing toolkit.
//!
//! The crate packs axis-aligned integer rectangles into a fixed-width strip
//! without rotation. It provides the exact data model and validator, the
//! 3-Partition hardness gadget (instance construction, canonical packing,
//! solution extraction), the structural machinery of a box-partition
//! repacking pipeline (item classification, height rounding, two-level box
//! partitions, tall-item rearrangement), exact and heuristic baseline
//! solvers, and file/rendering helpers used by the `stripack` CLI.

pub mod bench;
pub mod io;
pub mod model;
pub mod reduction;
pub mod render;
pub mod repack;
pub mod solvers;
pub mod structure;

pub use model::{
    area_lower_bound, total_area, validate_packing, BoxRegion, BoxTag, Coord, Instance, Item,
    Packing, Placement, Rect, ValidationReport,
};
