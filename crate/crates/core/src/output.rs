//! Number formatting shared by every emitted artifact.

/// Machine files: 17 significant digits.
pub fn fmt_machine(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{:.16e}", x)
}

/// Human tables: 4 significant digits, positional where readable.
pub fn fmt_table(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..6).contains(&mag) {
        let decimals = (3 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.3e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_table(0.00083), "0.0008300");
        assert_eq!(fmt_table(-2.531), "-2.531");
        assert_eq!(fmt_table(1234.4), "1234");
        assert_eq!(fmt_machine(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_machine(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
