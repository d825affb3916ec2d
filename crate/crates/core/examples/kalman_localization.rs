//! Filter noisy GPS fixes of a car driving at constant velocity.

use coopsim::geometry::Vec2;
use coopsim::sensing::{
    kalman_update, LocalizationEstimate, DEFAULT_GPS_SIGMA, DEFAULT_PROCESS_NOISE,
};
use nalgebra::Matrix4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let dt = 0.05;
    let velocity = Vec2::new(8.0, 0.0);
    let noise = Normal::new(0.0, DEFAULT_GPS_SIGMA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut est = LocalizationEstimate::new(
        Vec2::new(0.0, 0.0),
        Vec2::new(0.0, 0.0),
        Matrix4::identity() * 10.0,
    );
    let (mut raw_err, mut filt_err) = (0.0, 0.0);
    for k in 1..=200 {
        let t = k as f64 * dt;
        let truth = Vec2::new(velocity.x * t, 0.0);
        let fix = Vec2::new(
            truth.x + noise.sample(&mut rng),
            truth.y + noise.sample(&mut rng),
        );
        est = kalman_update(&est, fix, DEFAULT_GPS_SIGMA, DEFAULT_PROCESS_NOISE, dt).unwrap();
        if k > 100 {
            raw_err += fix.distance(truth) / 100.0;
            filt_err += est.position.distance(truth) / 100.0;
        }
        if k % 40 == 0 {
            println!(
                "t={t:4.1}s  truth x={:6.2}  fix x={:6.2}  estimate x={:6.2}  vx={:5.2}  trace P={:.4}",
                truth.x,
                fix.x,
                est.position.x,
                est.velocity.x,
                est.position_trace()
            );
        }
    }
    println!("mean position error over the last 5 s: GPS {raw_err:.3} m, filtered {filt_err:.3} m");
}
