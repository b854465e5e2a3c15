//! Coordinate-recovery scoring of learned mean codes, plus latent
//! traversals and positional heat maps.

mod metric;
mod pgm;
mod visual;

pub use metric::{
    cartesian_mse, mse_for, polar_mse, represent, rescale_channel, MetricRanges, MetricResult,
    RepresentationMatrix, Rescaled, Task, DEGENERATE_SPAN,
};
pub use pgm::{write_grid_csv, write_pgm, GrayMapping};
pub use visual::{
    heatmap, heatmap_from_codes, traversal_panel, traverse, write_heatmaps, write_traversal,
    TraversalGrid, HEATMAP_CLIP,
};
