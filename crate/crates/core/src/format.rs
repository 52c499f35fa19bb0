//! Fixed float formatting for reproducible text output.

/// `x` rounded to 12 significant digits, positional notation, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // round through scientific notation so the digit count is exact
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let rounded: f64 = format!("{mantissa}e{exp}").parse().expect("float");
    if rounded == 0.0 {
        return "0".to_string();
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let mut s = format!("{:.*}", decimals, rounded);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}
