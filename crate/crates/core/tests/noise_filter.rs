//! Raising the noise level shifts the lag-zero eigenvalues by the noise
//! variance along each direction, while the lagged estimator stays put.
//! Scores are drawn before noise, so every noise level sees the same signal.

use hilbert_ts::simulate::{noise_filter_comparison, DgpSpec, NoiseSpec, DEFAULT_SEED};

#[test]
fn lagged_estimator_ignores_white_noise() {
    let sigma = 2.0;
    let clean = DgpSpec { noise: NoiseSpec::none(), ..DgpSpec::reference().with_n(1024) };
    let noisy = DgpSpec { noise: NoiseSpec::grid_white(sigma), ..clean.clone() };
    let a = noise_filter_comparison(&clean, 200, DEFAULT_SEED).unwrap();
    let b = noise_filter_comparison(&noisy, 200, DEFAULT_SEED).unwrap();

    let q = clean.quadrature().unwrap();
    let phi = clean.basis_functions(&q, 2).unwrap();
    for j in 0..2 {
        // ⟨φ, C_ε φ⟩ = σ² Σ_i w_i² φ(u_i)² for noise that is white on the grid.
        let shift: f64 =
            q.weights().iter().zip(phi[j].coeffs().iter()).map(|(w, f)| w * w * f * f).sum::<f64>() * sigma * sigma
                / clean.lambdas[j];
        let r0_shift = b.r0_relative_bias[j] - a.r0_relative_bias[j];
        let s_shift = b.s_hat_relative_bias[j] - a.s_hat_relative_bias[j];
        assert!((r0_shift - shift).abs() < 0.1 * shift, "j={j}: R0 shift {r0_shift}, expected {shift}");
        assert!(s_shift.abs() < 0.25 * r0_shift, "j={j}: S-hat shift {s_shift} vs R0 shift {r0_shift}");
    }
}
