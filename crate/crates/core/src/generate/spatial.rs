//! Spatial sampling of actor locations.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::solar::KM_PER_DEGREE;
use super::GenerationConfig;
use crate::model::Location;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
    Clustered,
}

/// Sampled locations and, for clustered layouts, the actors of each cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub locations: Vec<Location>,
    pub clusters: Vec<Vec<usize>>,
}

/// Side of the square area holding `n` actors at the configured density, km.
pub fn area_side_km(config: &GenerationConfig) -> f64 {
    (config.n_actors as f64 / config.density_per_km2).sqrt()
}

/// Cluster sizes within `[lo, hi]` summing to `n`. When no such split exists
/// the fewest clusters of size at most `hi` are used, as even as possible.
pub fn cluster_sizes<R: Rng + ?Sized>(n: usize, lo: usize, hi: usize, rng: &mut R) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let min_count = n.div_ceil(hi);
    let max_count = n / lo;
    if min_count > max_count {
        let base = n / min_count;
        let extra = n % min_count;
        let mut sizes: Vec<usize> = (0..min_count).map(|c| base + usize::from(c < extra)).collect();
        sizes.shuffle(rng);
        return sizes;
    }
    let count = rng.gen_range(min_count..=max_count);
    let mut sizes = vec![lo; count];
    for _ in 0..n - count * lo {
        let open: Vec<usize> = (0..count).filter(|&c| sizes[c] < hi).collect();
        sizes[*open.choose(rng).expect("count >= n / hi leaves room")] += 1;
    }
    sizes
}

/// Locations inside a square of area `n / density` centered on the origin.
/// Clustered members lie in a disk of radius `D_leg / 4` around their
/// cluster center.
pub fn sample_locations<R: Rng + ?Sized>(config: &GenerationConfig, rng: &mut R) -> Placement {
    let n = config.n_actors;
    let side = area_side_km(config);
    let lat0 = config.origin.lat;
    let km_per_lon = KM_PER_DEGREE * lat0.to_radians().cos();
    let to_location = |x: f64, y: f64| {
        Location::new(
            lat0 + (y - side / 2.0) / KM_PER_DEGREE,
            config.origin.lon + (x - side / 2.0) / km_per_lon,
        )
    };
    match config.distribution {
        Distribution::Uniform => Placement {
            locations: (0..n)
                .map(|_| {
                    let x = rng.gen_range(0.0..=side);
                    let y = rng.gen_range(0.0..=side);
                    to_location(x, y)
                })
                .collect(),
            clusters: Vec::new(),
        },
        Distribution::Clustered => {
            let (lo, hi) = config.cluster_size_range;
            let radius = config.legal.max_distance_km / 4.0;
            let margin = radius.min(side / 2.0);
            let mut locations = Vec::with_capacity(n);
            let mut clusters = Vec::new();
            for size in cluster_sizes(n, lo, hi, rng) {
                let cx = rng.gen_range(margin..=side - margin);
                let cy = rng.gen_range(margin..=side - margin);
                let mut members = Vec::with_capacity(size);
                for _ in 0..size {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    members.push(locations.len());
                    locations.push(to_location(cx + r * a.cos(), cy + r * a.sin()));
                }
                clusters.push(members);
            }
            Placement { locations, clusters }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance_km;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(n: usize, distribution: Distribution) -> GenerationConfig {
        GenerationConfig {
            n_actors: n,
            distribution,
            ..GenerationConfig::reference(1, n, 1)
        }
    }

    #[test]
    fn uniform_points_fill_the_square() {
        let c = config(10, Distribution::Uniform);
        assert!((area_side_km(&c).powi(2) - 20.0).abs() < 1e-9);
        let p = sample_locations(&c, &mut ChaCha8Rng::seed_from_u64(5));
        let half = area_side_km(&c) / 2.0 + 1e-9;
        for l in &p.locations {
            let dy = (l.lat - c.origin.lat) * KM_PER_DEGREE;
            let dx = (l.lon - c.origin.lon) * KM_PER_DEGREE * c.origin.lat.to_radians().cos();
            assert!(dx.abs() <= half && dy.abs() <= half, "{dx} {dy}");
        }
        assert_eq!(p.locations.len(), 10);
    }

    #[test]
    fn cluster_sizes_respect_the_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 4..80 {
            if n == 7 {
                continue;
            }
            for _ in 0..5 {
                let s = cluster_sizes(n, 4, 6, &mut rng);
                assert_eq!(s.iter().sum::<usize>(), n);
                assert!(s.iter().all(|&k| (4..=6).contains(&k)), "n={n}: {s:?}");
            }
        }
        for n in [1, 2, 3, 7] {
            let s = cluster_sizes(n, 4, 6, &mut rng);
            assert_eq!(s.iter().sum::<usize>(), n);
            assert!(s.iter().all(|&k| k <= 6));
        }
    }

    #[test]
    fn clustered_members_are_close() {
        let c = config(10, Distribution::Clustered);
        let p = sample_locations(&c, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(p.locations.len(), 10);
        assert!(p.clusters.iter().all(|m| (4..=6).contains(&m.len())));
        for members in &p.clusters {
            for &i in members {
                for &j in members {
                    let d = distance_km(p.locations[i], p.locations[j]).unwrap();
                    assert!(d <= c.legal.max_distance_km / 2.0 + 1e-6);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_points() {
        for d in [Distribution::Uniform, Distribution::Clustered] {
            let c = config(12, d);
            let a = sample_locations(&c, &mut ChaCha8Rng::seed_from_u64(4));
            let b = sample_locations(&c, &mut ChaCha8Rng::seed_from_u64(4));
            assert_eq!(a, b);
        }
    }
}
