use super::colormap_tables::{MAGMA, VIRIDIS};
use crate::error::{Error, Result};

/// Built-in dark-to-light color ramps, 256 entries each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    #[default]
    Viridis,
    Magma,
    Gray,
}

impl Colormap {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "viridis" => Ok(Colormap::Viridis),
            "magma" => Ok(Colormap::Magma),
            "gray" | "grey" => Ok(Colormap::Gray),
            other => Err(Error::Invalid(format!(
                "unknown colormap '{other}' (available: viridis, magma, gray)"
            ))),
        }
    }

    pub fn entry(self, index: u8) -> [u8; 3] {
        match self {
            Colormap::Viridis => VIRIDIS[index as usize],
            Colormap::Magma => MAGMA[index as usize],
            Colormap::Gray => [index; 3],
        }
    }

    /// Color at `t` in `[0, 1]`; out-of-range inputs are clamped.
    pub fn sample(self, t: f64) -> [u8; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        self.entry((t * 255.0).round() as u8)
    }
}
