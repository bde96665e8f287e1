//! Synthetic clean scenes for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::event::{Event, EventStream, Label};

/// A disk of radius ~3 px sweeping diagonally across the sensor, emitting
/// `n` events at uniform time steps over `duration` seconds. Events cluster
/// tightly in space and time, the way a moving edge fires on real hardware,
/// so they form one dense component under a neighborhood graph.
pub fn moving_shape(
    n: usize,
    width: u16,
    height: u16,
    duration: f64,
    seed: u64,
) -> Result<EventStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 8.0;
    let (x0, y0) = (margin, margin);
    let (x1, y1) = (f64::from(width) - margin, f64::from(height) - margin);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let (cx, cy) = (x0 + s * (x1 - x0), y0 + s * (y1 - y0));
        // Uniform offset inside the disk.
        let r = 3.0 * rng.random::<f64>().sqrt();
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        let x = (cx + r * a.cos()).round().clamp(0.0, f64::from(width) - 1.0);
        let y = (cy + r * a.sin()).round().clamp(0.0, f64::from(height) - 1.0);
        events.push(Event {
            x: x as u16,
            y: y as u16,
            t: s * duration,
            label: Label::Unknown,
        });
    }
    EventStream::new(events, width, height)
}
