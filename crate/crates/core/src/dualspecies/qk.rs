//! Potassium (I = 3/2) slowing-down factor versus electron polarization.
//!
//! Frozen from `collision::slowing_down_curve` in averaged mode at
//! γ_e·B/R = 0.05 with 200 trajectories (see `examples/qk_table.rs`). The
//! P = 0 entry repeats P = 0.01 and P = 1 is the stretched-state value 2I + 1.

const TABLE: [(f64, f64); 16] = [
    (0.00, 5.99220),
    (0.01, 5.99220),
    (0.10, 5.95312),
    (0.20, 5.83925),
    (0.30, 5.66345),
    (0.40, 5.44288),
    (0.50, 5.19567),
    (0.60, 4.93804),
    (0.70, 4.68260),
    (0.80, 4.43806),
    (0.85, 4.32164),
    (0.90, 4.20967),
    (0.95, 4.10242),
    (0.98, 4.04038),
    (0.99, 4.02009),
    (1.00, 4.00000),
];

/// Linear interpolation in the frozen table; |P| is clamped to [0, 1].
pub fn potassium_q(p: f64) -> f64 {
    let p = p.abs().min(1.0);
    let k = TABLE.partition_point(|&(x, _)| x <= p).clamp(1, TABLE.len() - 1);
    let (x0, y0) = TABLE[k - 1];
    let (x1, y1) = TABLE[k];
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

/// Sample points of the table.
pub fn potassium_q_table() -> &'static [(f64, f64)] {
    &TABLE
}
