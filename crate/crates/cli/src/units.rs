//! Unit-suffixed quantity strings such as `"50 uT"` or `"5.4e-10 cm3/s"`.
//!
//! Every value is converted to the internal unit of its dimension: tesla,
//! angular frequency in rad/s, seconds, cm⁻³, cm³, cm³/s and rad/(s·T).
//! Cyclic units (Hz, MHz/mT) are multiplied by 2π.

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Field,
    /// Relaxation or pumping rate, 1/s.
    Rate,
    /// Angular frequency, rad/s.
    Frequency,
    Time,
    Density,
    Volume,
    RateCoefficient,
    Gyromagnetic,
}

impl Dim {
    /// (suffix, power of ten, cyclic: multiply by 2π)
    fn units(self) -> &'static [(&'static str, i32, bool)] {
        match self {
            Dim::Field => &[
                ("T", 0, false),
                ("mT", -3, false),
                ("uT", -6, false),
                ("µT", -6, false),
                ("μT", -6, false),
                ("nT", -9, false),
                ("pT", -12, false),
                ("fT", -15, false),
                ("G", -4, false),
                ("mG", -7, false),
            ],
            Dim::Rate => &[("1/s", 0, false), ("/s", 0, false), ("s^-1", 0, false), ("s-1", 0, false)],
            Dim::Frequency => &[
                ("rad/s", 0, false),
                ("Hz", 0, true),
                ("kHz", 3, true),
                ("MHz", 6, true),
            ],
            Dim::Time => &[("s", 0, false), ("ms", -3, false), ("us", -6, false), ("µs", -6, false), ("ns", -9, false)],
            Dim::Density => &[("cm-3", 0, false), ("cm^-3", 0, false), ("1/cm3", 0, false), ("/cm3", 0, false), ("m-3", -6, false)],
            Dim::Volume => &[("cm3", 0, false), ("cm^3", 0, false), ("mm3", -3, false), ("m3", 6, false)],
            Dim::RateCoefficient => &[("cm3/s", 0, false), ("cm^3/s", 0, false)],
            Dim::Gyromagnetic => &[
                ("rad/s/T", 0, false),
                ("Hz/T", 0, true),
                ("GHz/T", 9, true),
                ("MHz/mT", 9, true),
                ("kHz/uT", 9, true),
                ("Hz/nT", 9, true),
            ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dim::Field => "magnetic field",
            Dim::Rate => "rate",
            Dim::Frequency => "frequency",
            Dim::Time => "time",
            Dim::Density => "number density",
            Dim::Volume => "volume",
            Dim::RateCoefficient => "rate coefficient",
            Dim::Gyromagnetic => "gyromagnetic ratio",
        }
    }
}

/// Splits `"50 uT"` or `"50uT"` into number and unit and converts.
pub fn parse_quantity(s: &str, dim: Dim) -> Result<f64, String> {
    let s = s.trim();
    let split = number_prefix_len(s);
    if split == 0 {
        return Err(format!("`{s}` does not start with a number"));
    }
    let number = &s[..split];
    let unit = s[split..].trim();
    if unit.is_empty() {
        let names: Vec<&str> = dim.units().iter().map(|u| u.0).collect();
        return Err(format!("`{s}` has no unit; expected a {} in one of {}", dim.name(), names.join(", ")));
    }
    let &(_, pow10, cyclic) = dim.units().iter().find(|u| u.0 == unit).ok_or_else(|| {
        let names: Vec<&str> = dim.units().iter().map(|u| u.0).collect();
        format!("unknown {} unit `{unit}`; expected one of {}", dim.name(), names.join(", "))
    })?;
    // The prefix goes into the decimal exponent so "0.35 nT" parses to exactly 0.35e-9.
    let (mantissa, exp) = match number.find(['e', 'E']) {
        Some(k) => (&number[..k], number[k + 1..].parse::<i32>().map_err(|_| format!("`{number}` is not a number"))?),
        None => (number, 0),
    };
    let value: f64 = format!("{mantissa}e{}", exp + pow10).parse().map_err(|_| format!("`{number}` is not a number"))?;
    let v = if cyclic { value * TAU } else { value };
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

/// Longest prefix that parses as a float literal.
fn number_prefix_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut best = 0;
    let mut end = 0;
    while end < b.len() && matches!(b[end], b'0'..=b'9' | b'.' | b'+' | b'-' | b'e' | b'E') {
        end += 1;
        if s[..end].parse::<f64>().is_ok() {
            best = end;
        }
    }
    best
}

/// Renders an internal value back in the given unit, for messages and metadata.
pub fn format_quantity(v: f64, dim: Dim, unit: &str) -> String {
    let (pow10, cyclic) = dim.units().iter().find(|u| u.0 == unit).map_or((0, false), |u| (u.1, u.2));
    let v = if cyclic { v / TAU } else { v };
    format!("{} {unit}", v / 10f64.powi(pow10))
}
