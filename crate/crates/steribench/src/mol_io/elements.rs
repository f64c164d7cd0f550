//! Element symbols and van der Waals radii.
//!
//! Radii follow Bondi (1964) for the elements that table covers; everything
//! else falls back to [`FALLBACK_VDW_RADIUS`]. The fallback is only applied
//! by the sterimol module, which logs a warning when it does.

/// Radius used for elements without a tabulated Bondi value, in Å.
pub const FALLBACK_VDW_RADIUS: f64 = 1.50;

/// One row of the element table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementInfo {
    pub atomic_number: u8,
    pub symbol: &'static str,
    bondi_vdw: Option<f64>,
}

impl ElementInfo {
    /// Bondi vdW radius in Å, or the 1.50 Å fallback when untabulated.
    pub fn vdw_radius(&self) -> f64 {
        self.bondi_vdw.unwrap_or(FALLBACK_VDW_RADIUS)
    }

    /// Whether this element carries a tabulated Bondi radius.
    pub fn has_tabulated_radius(&self) -> bool {
        self.bondi_vdw.is_some()
    }
}

macro_rules! elem {
    ($z:expr, $sym:expr) => {
        ElementInfo { atomic_number: $z, symbol: $sym, bondi_vdw: None }
    };
    ($z:expr, $sym:expr, $r:expr) => {
        ElementInfo { atomic_number: $z, symbol: $sym, bondi_vdw: Some($r) }
    };
}

/// Elements accepted by the structure parsers. Symbols and atomic numbers
/// are bijective within the table.
pub static ELEMENTS: &[ElementInfo] = &[
    elem!(1, "H", 1.20),
    elem!(2, "He"),
    elem!(3, "Li"),
    elem!(4, "Be"),
    elem!(5, "B"),
    elem!(6, "C", 1.70),
    elem!(7, "N", 1.55),
    elem!(8, "O", 1.52),
    elem!(9, "F", 1.47),
    elem!(10, "Ne"),
    elem!(11, "Na"),
    elem!(12, "Mg"),
    elem!(13, "Al"),
    elem!(14, "Si"),
    elem!(15, "P"),
    elem!(16, "S", 1.80),
    elem!(17, "Cl", 1.75),
    elem!(18, "Ar"),
    elem!(19, "K"),
    elem!(20, "Ca"),
    elem!(26, "Fe"),
    elem!(29, "Cu"),
    elem!(30, "Zn"),
    elem!(34, "Se"),
    elem!(35, "Br", 1.85),
    elem!(53, "I"),
];

/// Look up an element by symbol. Case is normalized ("CL" and "cl" resolve
/// to chlorine); unknown symbols return `None`.
pub fn by_symbol(symbol: &str) -> Option<&'static ElementInfo> {
    let trimmed = symbol.trim();
    if trimmed.is_empty() || trimmed.len() > 2 {
        return None;
    }
    let mut normalized = String::with_capacity(2);
    let mut chars = trimmed.chars();
    normalized.extend(chars.next().map(|c| c.to_ascii_uppercase()));
    normalized.extend(chars.map(|c| c.to_ascii_lowercase()));
    ELEMENTS.iter().find(|e| e.symbol == normalized)
}

/// Look up an element by atomic number.
pub fn by_atomic_number(z: u8) -> Option<&'static ElementInfo> {
    ELEMENTS.iter().find(|e| e.atomic_number == z)
}
