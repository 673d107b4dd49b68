//! Fabrication and visualization outputs of a [`LayerStack`].

mod gcode;
mod mesh;

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::LayerStack;

pub use gcode::{flow_per_mm, parse_gcode, to_gcode, GcodeCommand, GcodeSummary, PrinterProfile, GCODE_HEADER};
pub use mesh::{resample_ring, to_mesh};

/// Default points per contour in exported meshes.
pub const DEFAULT_RESAMPLE_N: usize = 64;

/// Canonical contour document; identical stacks give identical bytes.
pub fn to_contour_json(stack: &LayerStack) -> String {
    stack.to_canonical_json()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Gcode,
    Obj,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Gcode => "gcode",
            ExportFormat::Obj => "obj",
            ExportFormat::Json => "json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Gcode | ExportFormat::Obj => "text/plain; charset=utf-8",
            ExportFormat::Json => "application/json",
        }
    }

    /// Renders `stack` with default printer settings.
    pub fn render(self, stack: &LayerStack) -> Result<String> {
        match self {
            ExportFormat::Gcode => to_gcode(stack, &PrinterProfile::default()),
            ExportFormat::Obj => to_mesh(stack, DEFAULT_RESAMPLE_N),
            ExportFormat::Json => Ok(to_contour_json(stack)),
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcode" => Ok(ExportFormat::Gcode),
            "obj" => Ok(ExportFormat::Obj),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidInput(format!("unsupported format {other:?} (expected gcode, obj or json)"))),
        }
    }
}
