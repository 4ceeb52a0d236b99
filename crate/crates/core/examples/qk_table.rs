//! Regenerates the potassium slowing-down table in `dualspecies::qk`.

use serfsim_core::collision::{duration_for, slowing_down_curve, McConfig, PhiMode};
use serfsim_core::spin::NuclearSpin;
use serfsim_core::GAMMA_E;

fn main() {
    let r_se = 1e6;
    let mut cfg = McConfig {
        spin: NuclearSpin::THREE_HALVES,
        p0: 0.0,
        tip_angle: 0.05,
        b_z: 0.05 * r_se / GAMMA_E,
        r_se,
        duration: 0.0,
        seed: 20240611,
        n_trajectories: 200,
        phi_mode: PhiMode::Averaged,
        gamma_e: GAMMA_E,
        n_samples: 400,
    };
    cfg.duration = duration_for(&cfg, 6.0, 5.0);
    let grid = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.98, 0.99];
    for r in slowing_down_curve(NuclearSpin::THREE_HALVES, &grid, &cfg).unwrap() {
        println!("    ({:.2}, {:.5}), // residual {:.1e}", r.p, r.q, r.fit_residual);
    }
}
