//! Seeded parameter initialization.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;

/// Samples `len` weights uniformly from [-b, b) with b = sqrt(1 / fan_in).
///
/// Consuming values one by one from a caller-supplied seeded RNG keeps
/// initialization reproducible and independent of parameter iteration
/// batching.
pub fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    assert!(fan_in > 0, "fan_in_uniform needs fan_in >= 1");
    let bound = math::sqrt(1.0 / fan_in as f64);
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Zero bias vector; biases start at zero so initial activations are set by
/// the fan-in-scaled weights alone.
pub fn zero_bias(len: usize) -> Vec<f64> {
    vec![0.0; len]
}
