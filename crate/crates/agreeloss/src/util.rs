//! Small shared helpers.

/// Formats with 17 significant digits so the exact f64 survives a
/// serialize/parse round trip.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}
