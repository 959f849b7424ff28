//! Noise schedule, forward noising kernel, and the closed-form conditional
//! forward posterior on the signal space.
//!
//! Coefficients per step `t` (1-indexed; `t = 0` is clean data, and
//! `alpha_bar_0 = 1` so the `t = 1` posterior degenerates to the mean):
//!
//! ```text
//! c0(t) = sqrt(alpha_bar_t)                    forward mean factor
//! c1(t) = sqrt(1 - alpha_bar_t)                forward std
//! c2(t) = sqrt(alpha_bar_{t-1}) beta_t / (1 - alpha_bar_t)
//! c3(t) = sqrt(alpha_t) (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
//! c4(t) = sqrt(beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t))
//! ```
//!
//! The identity `c2(t) + c3(t) c0(t) = c0(t-1)` guards the transcription.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("step count must be >= 1")]
    BadStepCount,
    #[error("betas must satisfy 0 < beta_min <= beta_max < 1, got [{0}, {1}]")]
    BadBetaRange(f64, f64),
    #[error("step {t} outside 1..={t_max}")]
    StepOutOfRange { t: usize, t_max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    t_max: usize,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    c0: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    c3: Vec<f64>,
    c4: Vec<f64>,
}

/// Builds a linear-beta schedule with endpoints `beta_min` and `beta_max`
/// inclusive (a single-step schedule uses `beta_min`).
pub fn build_schedule(
    t_max: usize,
    beta_min: f64,
    beta_max: f64,
) -> Result<DiffusionSchedule, ScheduleError> {
    if t_max < 1 {
        return Err(ScheduleError::BadStepCount);
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(ScheduleError::BadBetaRange(beta_min, beta_max));
    }

    let betas: Vec<f64> = (0..t_max)
        .map(|i| {
            if t_max == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (t_max - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(t_max);
    let mut prod = 1.0;
    for &a in &alphas {
        prod *= a;
        alpha_bars.push(prod);
    }

    let bar_prev = |idx: usize| if idx == 0 { 1.0 } else { alpha_bars[idx - 1] };
    let c0: Vec<f64> = alpha_bars.iter().map(|ab| ab.sqrt()).collect();
    let c1: Vec<f64> = alpha_bars.iter().map(|ab| (1.0 - ab).sqrt()).collect();
    let c2: Vec<f64> = (0..t_max)
        .map(|i| bar_prev(i).sqrt() * betas[i] / (1.0 - alpha_bars[i]))
        .collect();
    let c3: Vec<f64> = (0..t_max)
        .map(|i| alphas[i].sqrt() * (1.0 - bar_prev(i)) / (1.0 - alpha_bars[i]))
        .collect();
    let c4: Vec<f64> = (0..t_max)
        .map(|i| (betas[i] * (1.0 - bar_prev(i)) / (1.0 - alpha_bars[i])).sqrt())
        .collect();

    Ok(DiffusionSchedule { t_max, betas, alphas, alpha_bars, c0, c1, c2, c3, c4 })
}

impl DiffusionSchedule {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    fn idx(&self, t: usize) -> usize {
        assert!(
            (1..=self.t_max).contains(&t),
            "step {t} outside 1..={}",
            self.t_max
        );
        t - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[self.idx(t)]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[self.idx(t)]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[self.idx(t)]
    }

    pub fn c0(&self, t: usize) -> f64 {
        self.c0[self.idx(t)]
    }

    pub fn c1(&self, t: usize) -> f64 {
        self.c1[self.idx(t)]
    }

    pub fn c2(&self, t: usize) -> f64 {
        self.c2[self.idx(t)]
    }

    pub fn c3(&self, t: usize) -> f64 {
        self.c3[self.idx(t)]
    }

    pub fn c4(&self, t: usize) -> f64 {
        self.c4[self.idx(t)]
    }

    /// Forward kernel draw: `y_t = c0(t) y0 + c1(t) noise`.
    pub fn q_sample(&self, y0: &[f64], t: usize, noise: &[f64]) -> Vec<f64> {
        assert_eq!(y0.len(), noise.len(), "signal/noise length mismatch");
        let (c0, c1) = (self.c0(t), self.c1(t));
        y0.iter().zip(noise).map(|(y, n)| c0 * y + c1 * n).collect()
    }

    /// Conditional forward posterior parameters for `y_{t-1}` given a clean
    /// prediction and the current noisy signal. At `t = 1` this degenerates
    /// to `(y0_hat, 0)`.
    pub fn posterior_params(&self, y0_hat: &[f64], y_t: &[f64], t: usize) -> (Vec<f64>, f64) {
        assert_eq!(y0_hat.len(), y_t.len(), "signal length mismatch");
        let (c2, c3, c4) = (self.c2(t), self.c3(t), self.c4(t));
        let mu = y0_hat.iter().zip(y_t).map(|(a, b)| c2 * a + c3 * b).collect();
        (mu, c4)
    }
}

/// `mu + sigma * noise`; callers force `sigma = 0` at the final reverse step
/// (which `c4(1) = 0` already guarantees for schedule-derived sigmas).
pub fn posterior_sample(mu: &[f64], sigma: f64, noise: &[f64]) -> Vec<f64> {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    assert_eq!(mu.len(), noise.len(), "mean/noise length mismatch");
    mu.iter().zip(noise).map(|(m, n)| m + sigma * n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn standard() -> DiffusionSchedule {
        build_schedule(100, 1e-4, 0.02).unwrap()
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(build_schedule(0, 1e-4, 0.02).is_err());
        assert!(build_schedule(10, 0.0, 0.02).is_err());
        assert!(build_schedule(10, 0.03, 0.02).is_err());
        assert!(build_schedule(10, 1e-4, 1.0).is_err());
    }

    #[test]
    fn single_step_schedule() {
        let s = build_schedule(1, 0.5, 0.5).unwrap();
        assert!((s.c0(1) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.c1(1) - 0.5f64.sqrt()).abs() < 1e-15);
        // t=1 posterior degenerates: c2=1, c3=0, c4=0 exactly
        assert_eq!(s.c2(1), 1.0);
        assert_eq!(s.c3(1), 0.0);
        assert_eq!(s.c4(1), 0.0);
    }

    #[test]
    fn betas_increase_and_alpha_bars_decrease() {
        let s = standard();
        assert_eq!(s.beta(1), 1e-4);
        assert_eq!(s.beta(100), 0.02);
        for t in 2..=100 {
            assert!(s.beta(t) > s.beta(t - 1));
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.alpha_bar(t) > 0.0 && s.alpha_bar(t) < 1.0);
        }
    }

    #[test]
    fn pythagorean_identity() {
        let s = standard();
        for t in 1..=100 {
            let r = s.c0(t) * s.c0(t) + s.c1(t) * s.c1(t) - 1.0;
            assert!(r.abs() <= 1e-12, "t={t}: {r:e}");
        }
    }

    #[test]
    fn posterior_mean_identity() {
        let s = standard();
        for t in 1..=100 {
            let prev = if t == 1 { 1.0 } else { s.c0(t - 1) };
            let r = s.c2(t) + s.c3(t) * s.c0(t) - prev;
            assert!(r.abs() <= 1e-12, "t={t}: {r:e}");
        }
    }

    #[test]
    fn signal_substantially_destroyed_at_final_step() {
        // Snapshot of the endpoint-inclusive linear schedule; stable across
        // runs and platforms for this build.
        let s = standard();
        assert!((s.c0(100) - 0.6029620618708048).abs() < 1e-12);
        assert!(s.c0(100) < 0.61);
    }

    #[test]
    fn q_sample_is_affine() {
        let s = standard();
        let y0 = [0.3, -1.2, 0.0];
        let zeros = [0.0; 3];
        let noise = [0.5, -0.25, 2.0];
        let t = 40;
        let mean_only = s.q_sample(&y0, t, &zeros);
        for (got, want) in mean_only.iter().zip(&y0) {
            assert!((got - s.c0(t) * want).abs() < 1e-15);
        }
        let noise_only = s.q_sample(&zeros, t, &noise);
        for (got, want) in noise_only.iter().zip(&noise) {
            assert!((got - s.c1(t) * want).abs() < 1e-15);
        }
        let both = s.q_sample(&y0, t, &noise);
        for i in 0..3 {
            assert!((both[i] - (mean_only[i] + noise_only[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_params_examples() {
        let s = standard();
        let zeros = [0.0; 2];
        let (mu, _) = s.posterior_params(&zeros, &zeros, 10);
        assert_eq!(mu, vec![0.0, 0.0]);

        // noiseless trajectory stays on the mean path
        let y0 = [1.0, -0.5];
        for t in 2..=100 {
            let y_t: Vec<f64> = y0.iter().map(|y| s.c0(t) * y).collect();
            let (mu, sigma) = s.posterior_params(&y0, &y_t, t);
            for (m, y) in mu.iter().zip(&y0) {
                assert!((m - s.c0(t - 1) * y).abs() <= 1e-12);
            }
            assert!(sigma > 0.0);
        }

        // linearity in the inputs
        let a = [0.2, 0.4];
        let b = [-0.7, 0.1];
        let (mu1, _) = s.posterior_params(&a, &b, 5);
        let a2: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
        let b2: Vec<f64> = b.iter().map(|x| 3.0 * x).collect();
        let (mu3, _) = s.posterior_params(&a2, &b2, 5);
        for (x, y) in mu1.iter().zip(&mu3) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_sample_basics() {
        let mu = [0.3, -0.8];
        assert_eq!(posterior_sample(&mu, 0.5, &[0.0, 0.0]), vec![0.3, -0.8]);
        assert_eq!(posterior_sample(&mu, 0.0, &[9.0, -9.0]), vec![0.3, -0.8]);
    }

    #[test]
    fn forward_kernel_moments_monte_carlo() {
        let s = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let y0 = 0.8;
        let t = 35;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let eps: f64 = rng.sample(StandardNormal);
            let y = s.q_sample(&[y0], t, &[eps])[0];
            sum += y;
            sumsq += y * y;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((mean - s.c0(t) * y0).abs() < 0.01);
        assert!((var.sqrt() - s.c1(t)).abs() / s.c1(t) < 0.01);
    }

    #[test]
    fn posterior_sample_variance_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(626);
        let sigma = 0.37;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let eps: f64 = rng.sample(StandardNormal);
            let y = posterior_sample(&[1.5], sigma, &[eps])[0];
            sum += y;
            sumsq += y * y;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((var - sigma * sigma).abs() / (sigma * sigma) < 0.02);
    }

    /// Direct draws of `y_t` match composing the stepwise kernel
    /// `y_s = sqrt(alpha_s) y_{s-1} + sqrt(beta_s) eps_s`.
    #[test]
    fn composition_consistency_monte_carlo() {
        let s = build_schedule(10, 1e-3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        let y0 = -1.1;
        let t = 10;
        let n = 50_000;

        let mut direct = Vec::with_capacity(n);
        let mut chained = Vec::with_capacity(n);
        for _ in 0..n {
            let eps: f64 = rng.sample(StandardNormal);
            direct.push(s.q_sample(&[y0], t, &[eps])[0]);
            let mut y = y0;
            for step in 1..=t {
                let eps: f64 = rng.sample(StandardNormal);
                y = s.alpha(step).sqrt() * y + s.beta(step).sqrt() * eps;
            }
            chained.push(y);
        }

        let stats = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
            (m, v)
        };
        let (m_a, v_a) = stats(&direct);
        let (m_b, v_b) = stats(&chained);
        let sd = s.c1(t);
        let mean_se = sd * (2.0 / n as f64).sqrt();
        assert!(
            (m_a - m_b).abs() <= 3.0 * mean_se,
            "means {m_a} vs {m_b} (3se={:.2e})",
            3.0 * mean_se
        );
        let var_se = sd * sd * (2.0 / (n as f64 - 1.0)).sqrt() * 2.0f64.sqrt();
        assert!(
            (v_a - v_b).abs() <= 3.0 * var_se,
            "vars {v_a} vs {v_b} (3se={:.2e})",
            3.0 * var_se
        );
    }
}
