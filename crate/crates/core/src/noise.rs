//! Optional open-loop error injection.
//!
//! Two sources are modelled:
//!
//! - the drive: a per-run scale error on cable travel (a drift proportional
//!   to distance) plus a piecewise-constant speed fluctuation. Both are shared
//!   by every platform clamped to the drive at that moment.
//! - the clamp: an independent zero-mean displacement error for each platform
//!   every time it releases the drive.
//!
//! With the default model a single 1.25 m move has a final error standard
//! deviation of about 0.9 % of travel, so 2 % of travel sits near the 97th
//! percentile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Std of the per-run relative drive scale error.
    pub drift_sigma: f64,
    /// Std of the relative drive speed fluctuation within one period.
    pub jitter_sigma: f64,
    /// Length of a fluctuation period, s.
    pub jitter_period: f64,
    /// Std of the displacement error at each release, m.
    pub release_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            drift_sigma: 0.008,
            jitter_sigma: 0.02,
            jitter_period: 0.5,
            release_sigma: 1.0e-4,
        }
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            drift_sigma: 0.0,
            jitter_sigma: 0.0,
            jitter_period: 1.0,
            release_sigma: 0.0,
        }
    }

    /// Only the drive components; releases are exact.
    pub fn drive_only(&self) -> Self {
        Self {
            release_sigma: 0.0,
            ..self.clone()
        }
    }
}

/// Seeded realization of a [`NoiseModel`].
///
/// The drive and each platform draw from separate ChaCha streams, so a
/// platform's release errors do not depend on how many other platforms exist
/// or when they move.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    model: NoiseModel,
    drive_rng: ChaCha8Rng,
    release_rngs: Vec<ChaCha8Rng>,
    scale: f64,
    period: i64,
    jitter: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl NoiseSource {
    pub fn new(model: NoiseModel, seed: u64, cafes: usize) -> Self {
        let mut drive_rng = ChaCha8Rng::seed_from_u64(seed);
        let release_rngs = (0..cafes)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64 + 1);
                r
            })
            .collect();
        let scale = model.drift_sigma * normal(&mut drive_rng);
        Self {
            model,
            drive_rng,
            release_rngs,
            scale,
            period: -1,
            jitter: 0.0,
        }
    }

    /// Multiplier on nominal drive speed in force at time `t`. Calls must
    /// not go back in time.
    pub fn drive_factor(&mut self, t: f64) -> f64 {
        let period = (t / self.model.jitter_period).floor() as i64;
        while self.period < period {
            self.period += 1;
            self.jitter = self.model.jitter_sigma * normal(&mut self.drive_rng);
        }
        1.0 + self.scale + self.jitter
    }

    /// Displacement error for `cafe` releasing the drive, m.
    pub fn release_error(&mut self, cafe: usize) -> f64 {
        match self.release_rngs.get_mut(cafe) {
            Some(rng) => self.model.release_sigma * normal(rng),
            None => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_repeatable() {
        let mut a = NoiseSource::new(NoiseModel::default(), 7, 2);
        let mut b = NoiseSource::new(NoiseModel::default(), 7, 2);
        for k in 0..100 {
            let t = k as f64 * 0.1;
            assert_eq!(a.drive_factor(t), b.drive_factor(t));
        }
        assert_eq!(a.release_error(1), b.release_error(1));
        let mut c = NoiseSource::new(NoiseModel::default(), 8, 2);
        assert_ne!(c.drive_factor(0.0), NoiseSource::new(NoiseModel::default(), 7, 2).drive_factor(0.0));
    }

    #[test]
    fn constant_within_a_period() {
        let mut n = NoiseSource::new(NoiseModel::default(), 1, 0);
        let f0 = n.drive_factor(0.0);
        assert_eq!(n.drive_factor(0.49), f0);
        assert_ne!(n.drive_factor(0.5), f0);
    }

    #[test]
    fn ideal_is_exact() {
        let mut n = NoiseSource::new(NoiseModel::ideal(), 3, 1);
        assert_eq!(n.drive_factor(12.0), 1.0);
        assert_eq!(n.release_error(0), 0.0);
    }

    #[test]
    fn release_streams_are_independent_of_the_drive() {
        let mut a = NoiseSource::new(NoiseModel::default(), 11, 2);
        let mut b = NoiseSource::new(NoiseModel::default(), 11, 2);
        for k in 0..50 {
            a.drive_factor(k as f64);
        }
        assert_eq!(a.release_error(0), b.release_error(0));
    }
}
