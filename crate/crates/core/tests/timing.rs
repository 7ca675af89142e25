use std::time::Instant;

use maxconc::covariance::CovarianceModel;
use maxconc::sampler::{prepare, Method};

/// Best-of-N seconds per row for the FFT sampler at dimension `p`.
fn seconds_per_row(p: usize) -> f64 {
    let model = CovarianceModel::power_law(1.0, 1.0).unwrap();
    let state = prepare(&model, p, 3, 0).unwrap();
    assert_eq!(state.method(), Method::CirculantFft);
    let rows = (1 << 20) / p as u64;
    let mut out = vec![0.0; p];
    let mut best = f64::INFINITY;
    for trial in 0..7 {
        let t = Instant::now();
        for rep in 0..rows {
            state.sample_row_into(trial * rows + rep, &mut out);
        }
        best = best.min(t.elapsed().as_secs_f64() / rows as f64);
    }
    best
}

#[test]
fn fft_row_cost_scales_like_p_log_p() {
    // Warm caches and the FFT planner first.
    seconds_per_row(1 << 12);
    for p in [1usize << 12, 1 << 14] {
        let ratio = seconds_per_row(4 * p) / seconds_per_row(p);
        assert!(ratio < 5.5, "time ratio between p = {} and 4p is {ratio:.2}", p);
    }
}
