//! Synthetic noise injection with ground-truth labels.
//!
//! Two noise sources are modeled after what DVS hardware produces:
//! background activity (BA) noise, uniform over the sensor volume, and hot
//! pixel noise, recurring at a handful of fixed pixels along time. Noise
//! counts are exact fractions of the clean event count, not stochastic.
//!
//! All randomness comes from a seeded ChaCha8 generator, so identical seeds
//! give bitwise-identical outputs on every platform.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Label};

/// Name of the RNG algorithm, echoed into run configs for reproducibility.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// BA noise count as a fraction of the clean event count.
    pub ba_ratio: f64,
    /// Hot pixel noise count as a fraction of the clean event count.
    pub hot_ratio: f64,
    /// Number of distinct hot pixels.
    pub hot_pixel_count: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            ba_ratio: 0.10,
            hot_ratio: 0.02,
            hot_pixel_count: 4,
            seed: 0,
        }
    }
}

fn noise_count(ratio: f64, n_clean: usize) -> usize {
    (ratio * n_clean as f64).round() as usize
}

// Unlabeled originals become real; already-injected noise keeps its label.
fn relabel_real(stream: &EventStream) -> Vec<Event> {
    stream
        .events()
        .iter()
        .map(|e| Event {
            label: if e.label == Label::Noise {
                Label::Noise
            } else {
                Label::Real
            },
            ..*e
        })
        .collect()
}

/// Adds uniformly distributed BA noise. Original events are labeled real.
pub fn add_ba_noise(stream: &EventStream, ratio: f64, seed: u64) -> Result<EventStream> {
    if ratio < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ba ratio must be non-negative, got {ratio}"
        )));
    }
    if stream.is_empty() && ratio > 0.0 {
        return Err(Error::InvalidInput(
            "cannot inject BA noise into an empty stream".into(),
        ));
    }
    let mut events = relabel_real(stream);
    let count = noise_count(ratio, stream.len());
    if count > 0 {
        let (w, h) = (stream.sensor_width(), stream.sensor_height());
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(
                "sensor dimensions must be declared for BA noise".into(),
            ));
        }
        let (t_min, t_max) = (stream.t_min(), stream.t_max());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let x = rng.random_range(0..w);
            let y = rng.random_range(0..h);
            let t = t_min + rng.random::<f64>() * (t_max - t_min);
            events.push(Event {
                x,
                y,
                t,
                label: Label::Noise,
            });
        }
    }
    EventStream::new(events, stream.sensor_width(), stream.sensor_height())
}

/// Adds hot pixel noise: `round(ratio * N)` events spread evenly across
/// `pixel_count` distinct pixels at jittered-regular timestamps.
///
/// Per pixel, the nominal spacing is `(t_max - t_min) / c` for `c` events;
/// each timestamp is jittered by at most 10% of the spacing, so consecutive
/// gaps stay within `[0.8, 1.2]` of nominal and are strictly increasing.
pub fn add_hot_pixel_noise(
    stream: &EventStream,
    ratio: f64,
    pixel_count: usize,
    seed: u64,
) -> Result<EventStream> {
    if ratio < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hot ratio must be non-negative, got {ratio}"
        )));
    }
    add_hot_pixel_noise_count(stream, noise_count(ratio, stream.len()), pixel_count, seed)
}

fn add_hot_pixel_noise_count(
    stream: &EventStream,
    budget: usize,
    pixel_count: usize,
    seed: u64,
) -> Result<EventStream> {
    let mut events = relabel_real(stream);
    if budget > 0 {
        if stream.is_empty() {
            return Err(Error::InvalidInput(
                "cannot inject hot pixel noise into an empty stream".into(),
            ));
        }
        if pixel_count == 0 || pixel_count > budget {
            return Err(Error::InvalidParameter(format!(
                "hot pixel count {pixel_count} outside [1, {budget}]"
            )));
        }
        let (w, h) = (stream.sensor_width(), stream.sensor_height());
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(
                "sensor dimensions must be declared for hot pixel noise".into(),
            ));
        }
        let total_pixels = usize::from(w) * usize::from(h);
        if pixel_count > total_pixels {
            return Err(Error::InvalidParameter(format!(
                "hot pixel count {pixel_count} exceeds sensor pixel count {total_pixels}"
            )));
        }
        let (t_min, t_max) = (stream.t_min(), stream.t_max());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = sample(&mut rng, total_pixels, pixel_count);
        let base = budget / pixel_count;
        let extra = budget % pixel_count;
        for (i, flat) in chosen.iter().enumerate() {
            let x = (flat % usize::from(w)) as u16;
            let y = (flat / usize::from(w)) as u16;
            let c = base + usize::from(i < extra);
            let spacing = (t_max - t_min) / c as f64;
            for j in 0..c {
                let jitter = (rng.random::<f64>() - 0.5) * 0.2; // +/- 10%
                let t = t_min + (j as f64 + 0.5 + jitter) * spacing;
                events.push(Event {
                    x,
                    y,
                    t,
                    label: Label::Noise,
                });
            }
        }
    }
    EventStream::new(events, stream.sensor_width(), stream.sensor_height())
}

/// Applies a full noise spec: labels originals real, then BA, then hot pixels.
pub fn synthesize(stream: &EventStream, spec: &NoiseSpec) -> Result<EventStream> {
    if spec.hot_ratio < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hot ratio must be non-negative, got {}",
            spec.hot_ratio
        )));
    }
    let with_ba = add_ba_noise(stream, spec.ba_ratio, spec.seed)?;
    // Hot count stays relative to the clean stream, not the BA-augmented one.
    let hot_count = noise_count(spec.hot_ratio, stream.len());
    add_hot_pixel_noise_count(
        &with_ba,
        hot_count,
        spec.hot_pixel_count,
        spec.seed.wrapping_add(1),
    )
}
