use alloc::format;
use alloc::string::String;

/// Formats `x` with four significant digits.
pub(crate) fn sig4(x: f64) -> String {
    if x == 0.0 {
        return String::from("0.000");
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = libm::floor(libm::log10(libm::fabs(x))) as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (9.9996 -> 10.000); trim to four.
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    let leading_zeros = if mag < 0 { (-mag) as usize } else { 0 };
    if digits > 4 + leading_zeros && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}
