//! Locale-free float formatting shared by every text output.

/// 17 significant digits, `.` separator, exponent form.
pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| f(x)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(f(x).parse::<f64>().unwrap(), x);
        }
    }
}
