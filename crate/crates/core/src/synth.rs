//! Synthetic scenario files so the pipeline runs without the public archive.
//!
//! Per-WEC power falls with pairwise proximity through a direction-dependent
//! interaction term, so closer layouts absorb less and the farm total is a
//! smooth function of the 32 coordinates.

use crate::dataset::{
    FarmDataset, FarmRecord, Position, Scenario, WecLayout, SITE_EXTENT, WEC_COUNT,
};
use crate::rng::{PinnedRng, STREAM_SYNTH};

struct Climate {
    /// Isolated-WEC absorbed power, watts.
    base_power: f64,
    /// Dominant wave direction, radians.
    heading: f64,
    /// Interaction decay length, meters.
    decay: f64,
    /// Side of the square the layouts are drawn in.
    spread: f64,
}

fn climate(s: Scenario) -> Climate {
    match s {
        Scenario::Sydney => Climate {
            base_power: 98_000.0,
            heading: 0.3,
            decay: 90.0,
            spread: SITE_EXTENT,
        },
        Scenario::Adelaide => Climate {
            base_power: 92_000.0,
            heading: 1.1,
            decay: 70.0,
            spread: SITE_EXTENT,
        },
        Scenario::Perth => Climate {
            base_power: 91_000.0,
            heading: 2.0,
            decay: 70.0,
            spread: 420.0,
        },
        Scenario::Tasmania => Climate {
            base_power: 245_000.0,
            heading: 0.8,
            decay: 60.0,
            spread: SITE_EXTENT,
        },
    }
}

/// Absorbed power of each WEC in `layout` under the scenario's climate.
pub fn wec_powers(scenario: Scenario, layout: &WecLayout) -> [f64; WEC_COUNT] {
    let c = climate(scenario);
    let p = &layout.positions;
    let mut out = [0.0; WEC_COUNT];
    for i in 0..WEC_COUNT {
        let mut loss = 0.0;
        for j in 0..WEC_COUNT {
            if i == j {
                continue;
            }
            let (dx, dy) = (p[j].x - p[i].x, p[j].y - p[i].y);
            let d = dx.hypot(dy);
            let angle = dy.atan2(dx) - c.heading;
            loss += 0.03 * (-d / c.decay).exp() * (1.0 + 0.5 * (2.0 * angle).cos());
        }
        out[i] = c.base_power * (1.0 - loss).max(0.0);
    }
    out
}

pub fn record_for(scenario: Scenario, layout: WecLayout) -> FarmRecord {
    let powers = wec_powers(scenario, &layout);
    FarmRecord {
        layout,
        powers,
        total_power: powers.iter().sum(),
    }
}

/// `n` random layouts for a scenario.
pub fn synthetic_dataset(scenario: Scenario, n: usize, seed: u64) -> FarmDataset {
    let c = climate(scenario);
    let mut rng = PinnedRng::new(seed ^ ((scenario as u64 + 1) * 0x9E37_79B9), STREAM_SYNTH);
    let records = (0..n)
        .map(|_| {
            let ox = rng.uniform(0.0, SITE_EXTENT - c.spread);
            let oy = rng.uniform(0.0, SITE_EXTENT - c.spread);
            let mut pos = [Position::default(); WEC_COUNT];
            for p in pos.iter_mut() {
                *p = Position::new(
                    ox + rng.uniform(0.0, c.spread),
                    oy + rng.uniform(0.0, c.spread),
                );
            }
            record_for(scenario, WecLayout::new(pos))
        })
        .collect();
    FarmDataset::new(scenario, records, format!("synthetic:{scenario}")).expect("n > 0")
}

/// Records whose powers are an exact linear function of the coordinates.
pub fn linear_dataset(n: usize, seed: u64) -> FarmDataset {
    let mut rng = PinnedRng::new(seed, STREAM_SYNTH);
    let records = (0..n)
        .map(|_| {
            let mut pos = [Position::default(); WEC_COUNT];
            for p in pos.iter_mut() {
                *p = Position::new(rng.uniform(0.0, SITE_EXTENT), rng.uniform(0.0, SITE_EXTENT));
            }
            let mut powers = [0.0; WEC_COUNT];
            for (w, p) in powers.iter_mut().zip(&pos) {
                *w = 50_000.0 + 40.0 * p.x - 25.0 * p.y;
            }
            FarmRecord {
                layout: WecLayout::new(pos),
                powers,
                total_power: powers.iter().sum(),
            }
        })
        .collect();
    FarmDataset::new(Scenario::Sydney, records, "synthetic:linear").expect("n > 0")
}

/// A `side x side` grid in (farm mean distance, total power): row `i` uses a
/// reference layout scaled about the site center so its mean distance steps
/// evenly, column `j` sets the total power. Powers are split evenly.
pub fn grid_dataset(scenario: Scenario, side: usize) -> FarmDataset {
    let center = SITE_EXTENT / 2.0;
    let reference: Vec<Position> = (0..WEC_COUNT)
        .map(|k| {
            let (gx, gy) = ((k % 4) as f64, (k / 4) as f64);
            Position::new(center + (gx - 1.5) * 60.0, center + (gy - 1.5) * 60.0)
        })
        .collect();
    let mut records = Vec::with_capacity(side * side);
    for i in 0..side {
        let scale = 1.0 + 0.1 * i as f64;
        let mut pos = [Position::default(); WEC_COUNT];
        for (p, r) in pos.iter_mut().zip(&reference) {
            *p = Position::new(
                center + (r.x - center) * scale,
                center + (r.y - center) * scale,
            );
        }
        for j in 0..side {
            let total = 1_400_000.0 + 10_000.0 * j as f64;
            let powers = [total / WEC_COUNT as f64; WEC_COUNT];
            records.push(FarmRecord {
                layout: WecLayout::new(pos),
                powers,
                total_power: powers.iter().sum(),
            });
        }
    }
    FarmDataset::new(scenario, records, format!("synthetic-grid:{scenario}")).expect("side > 0")
}

/// Multiplies one record's powers (and total) by `factor`.
pub fn plant_power_extreme(ds: &mut FarmDataset, index: usize, factor: f64) {
    let r = &mut ds.records[index];
    r.powers.iter_mut().for_each(|p| *p *= factor);
    r.total_power = r.powers.iter().sum();
}
