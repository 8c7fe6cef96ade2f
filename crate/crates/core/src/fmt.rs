/// Formats a float with at most 9 significant digits, in plain decimal.
///
/// The value is rounded to 9 significant digits first and then printed with
/// the shortest representation that parses back to the rounded value, so
/// `0.1` stays `0.1` and `1.0` prints as `1`.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}
