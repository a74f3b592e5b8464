//! Random variate generation on reproducible per-path streams.
//!
//! Streams are ChaCha8 instances keyed by `(seed, stream_id)`: the seed picks
//! the key and the stream id picks ChaCha's 64-bit stream counter, so each
//! simulated path gets its own sequence no matter which thread runs it.
//! The harness uses `stream_id = path_index` and `seed = base_seed + rep`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Result, SabrError};

/// A deterministic random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

/// Uniform variate on the open interval (0, 1).
#[inline]
pub fn sample_uniform(stream: &mut RngStream) -> f64 {
    loop {
        let u: f64 = stream.rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[inline]
pub fn sample_normal(stream: &mut RngStream) -> f64 {
    StandardNormal.sample(&mut stream.rng)
}

/// Unit-scale gamma variate (Marsaglia–Tsang, with the `U^{1/shape}` boost
/// for shapes below one).
#[inline]
pub fn sample_gamma(stream: &mut RngStream, shape: f64) -> Result<f64> {
    let dist = Gamma::new(shape, 1.0).map_err(|_| SabrError::domain("gamma shape", shape))?;
    Ok(dist.sample(&mut stream.rng))
}

/// Poisson variate. Small means use multiplication of uniforms, large
/// means the Ahrens–Dieter normal-deviate rejection scheme; both are exact.
#[inline]
pub fn sample_poisson(stream: &mut RngStream, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|_| SabrError::domain("poisson mean", mean))?;
    let n: f64 = dist.sample(&mut stream.rng);
    Ok(n as u64)
}

/// Intensity and shift of a shifted-Poisson law, whose mass is
/// proportional to `λ^{α+n} e^{-λ} / Γ(n+α+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpParams {
    intensity: f64,
    shift: f64,
}

impl SpParams {
    pub fn new(intensity: f64, shift: f64) -> Result<Self> {
        if !(intensity > 0.0) || !intensity.is_finite() {
            return Err(SabrError::domain("shifted poisson intensity", intensity));
        }
        if !(shift > 0.0) || !shift.is_finite() {
            return Err(SabrError::domain("shifted poisson shift", shift));
        }
        Ok(Self { intensity, shift })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// Shifted-Poisson variate as a gamma-mixed Poisson: draw `X ~ G(shift)`
/// until `X < intensity`, then return `Poisson(intensity - X)`.
///
/// Each attempt is accepted with probability `P_G(intensity; shift)`, so
/// the expected number of gamma draws blows up when that is small.
pub fn sample_shifted_poisson(stream: &mut RngStream, params: SpParams) -> u64 {
    let gamma = Gamma::new(params.shift, 1.0).expect("validated shape");
    loop {
        let x: f64 = gamma.sample(&mut stream.rng);
        if x < params.intensity {
            return sample_poisson(stream, params.intensity - x).expect("positive mean");
        }
    }
}

/// A single gamma draw, reported only if it falls below `bound`.
///
/// `None` happens with probability `1 - P_G(bound; shape)`.
#[inline]
pub fn sample_gamma_conditional_lt(
    stream: &mut RngStream,
    shape: f64,
    bound: f64,
) -> Result<Option<f64>> {
    if !(bound > 0.0) {
        return Err(SabrError::domain("gamma bound", bound));
    }
    let x = sample_gamma(stream, shape)?;
    Ok((x < bound).then_some(x))
}
