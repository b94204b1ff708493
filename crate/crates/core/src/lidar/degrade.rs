use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{LidarConfig, Point, PointCloudFrame, RawHit};
use crate::rng;

const ZERO_INTENSITY: f64 = 1e-6;

/// Apply range noise, attenuation and random dropoff to one sweep.
///
/// Each ray draws from its own `(seed, tick, ray)` stream, so whether ray
/// 1234 survives does not depend on which other rays hit something.
pub fn degrade(hits: &[RawHit], cfg: &LidarConfig, seed: u64, tick: u64) -> PointCloudFrame {
    let noise = Normal::new(0.0, cfg.noise_stddev).ok();
    let mut points = Vec::with_capacity(hits.len());
    for hit in hits {
        let mut r = rng::keyed2(seed, rng::DOMAIN_LIDAR, tick, hit.ray as u64);
        let eps = match noise {
            Some(n) if cfg.noise_stddev > 0.0 => n.sample(&mut r),
            _ => 0.0,
        };
        let d = (hit.distance + eps).clamp(0.0, cfg.range_max);
        let i = (-cfg.attenuation * d).exp();
        let u_drop: f64 = r.random();
        let u_zero: f64 = r.random();
        if i < cfg.dropoff_intensity_limit {
            if u_drop < cfg.dropoff_rate {
                continue;
            }
            if i < ZERO_INTENSITY && u_zero < cfg.dropoff_zero_intensity {
                continue;
            }
        }
        points.push(Point {
            x: (d * hit.dir[0]) as f32,
            y: (d * hit.dir[1]) as f32,
            z: (d * hit.dir[2]) as f32,
            i: i as f32,
        });
    }
    PointCloudFrame::new(tick, cfg.mount(), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lidar::HitTarget;

    fn hits_at(distances: &[f64]) -> Vec<RawHit> {
        distances
            .iter()
            .enumerate()
            .map(|(k, &d)| RawHit {
                ray: k as u32,
                point: [d, 0.0, 0.0],
                distance: d,
                dir: [1.0, 0.0, 0.0],
                target: HitTarget::Ground,
            })
            .collect()
    }

    #[test]
    fn disabled_degradation_is_exact() {
        let cfg = LidarConfig {
            dropoff_rate: 0.0,
            noise_stddev: 0.0,
            dropoff_zero_intensity: 0.0,
            ..LidarConfig::default()
        };
        let hits = hits_at(&[1.0, 20.0, 99.0]);
        let frame = degrade(&hits, &cfg, 7, 0);
        assert_eq!(frame.points.len(), 3);
        for (p, h) in frame.points.iter().zip(&hits) {
            assert_eq!(p.x, h.distance as f32);
            assert_eq!(p.i, (-0.004 * h.distance).exp() as f32);
        }
    }

    #[test]
    fn everything_dropped_when_nothing_is_exempt() {
        let cfg = LidarConfig {
            dropoff_rate: 1.0,
            dropoff_intensity_limit: 1.01,
            ..LidarConfig::default()
        };
        let frame = degrade(&hits_at(&[0.0, 5.0, 50.0]), &cfg, 1, 0);
        assert!(frame.is_empty());
    }

    #[test]
    fn bright_points_are_exempt() {
        // e^(-0.004·10) ≈ 0.96 ≥ 0.8
        let cfg = LidarConfig {
            dropoff_rate: 1.0,
            ..LidarConfig::default()
        };
        let frame = degrade(&hits_at(&[10.0; 50]), &cfg, 1, 0);
        assert_eq!(frame.len(), 50);
    }

    #[test]
    fn noise_never_exceeds_range() {
        let cfg = LidarConfig {
            noise_stddev: 5.0,
            dropoff_rate: 0.0,
            ..LidarConfig::default()
        };
        let frame = degrade(&hits_at(&[99.9; 500]), &cfg, 3, 0);
        assert!(frame
            .points
            .iter()
            .all(|p| p.x <= 100.0 && p.i >= 0.0 && p.i <= 1.0));
    }

    #[test]
    fn same_seed_same_frame() {
        let cfg = LidarConfig::default();
        let hits = hits_at(&[60.0; 200]);
        assert_eq!(degrade(&hits, &cfg, 9, 4), degrade(&hits, &cfg, 9, 4));
        assert_ne!(degrade(&hits, &cfg, 9, 4), degrade(&hits, &cfg, 9, 5));
    }
}
