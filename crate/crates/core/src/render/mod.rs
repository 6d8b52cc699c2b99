//! Grid export (JSON, CSV) and PNG plots.

mod colormap;
mod colormap_tables;
pub mod contour;
mod document;
mod plot;

pub use colormap::Colormap;
pub use document::{
    export_grid, grid_to_csv, import_grid, read_grid_document, AxisDocument, ExportFormat,
    GridDocument,
};
pub use plot::{render_image, render_plot, PlotArea, PlotOptions, Raster, RenderReport};
