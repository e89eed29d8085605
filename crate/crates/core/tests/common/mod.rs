#![allow(dead_code)]

use chrono::NaiveDate;
use loopforge_core::model::{Actor, Instance, LegalParams, Location, ProfileTag, ScenarioSet, Subscription, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hourly(steps: usize) -> TimeGrid {
    TimeGrid {
        step_minutes: 60,
        horizon_steps: steps,
        start_timestamp: NaiveDate::from_ymd_opt(2022, 6, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap(),
    }
}

fn random_actor(rng: &mut ChaCha8Rng, i: usize, steps: usize, location: Location) -> Actor {
    let mut series = |p_zero: f64| -> Vec<f64> {
        (0..steps)
            .map(|_| {
                if rng.gen_bool(p_zero) {
                    0.0
                } else {
                    rng.gen_range(0.0..6.0)
                }
            })
            .collect()
    };
    let production_abs = series(0.5);
    let consumption_abs = series(0.3);
    Actor {
        id: format!("a{i}"),
        location,
        installed_power_kwc: rng.gen_range(0.0..6.0),
        buy_price: (0..steps).map(|_| rng.gen_range(0.07..0.25)).collect(),
        sell_price: (0..steps).map(|_| rng.gen_range(0.06..0.15)).collect(),
        consumption_abs,
        production_abs,
        profile_tag: ProfileTag::Household,
        subscription: Subscription::Small,
    }
}

fn random_legal(rng: &mut ChaCha8Rng) -> LegalParams {
    let mut legal = LegalParams {
        max_installed_power_kwc: rng.gen_range(6.0..20.0),
        force_individual_sc: rng.gen_bool(0.7),
        ..LegalParams::default()
    };
    if rng.gen_bool(0.25) {
        legal.coupled_pairs.push(("a0".into(), "a1".into()));
    }
    legal
}

/// Actors scattered over roughly 2.8 km by 2.8 km, so the 2 km graph is
/// dense but rarely complete.
pub fn random_instance(seed: u64, n: usize, steps: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actors = (0..n)
        .map(|i| {
            let loc = Location::new(45.0 + rng.gen_range(0.0..0.025), 1.0 + rng.gen_range(0.0..0.035));
            random_actor(&mut rng, i, steps, loc)
        })
        .collect();
    let legal = random_legal(&mut rng);
    Instance::new(actors, hourly(steps), ScenarioSet::single(), legal)
}

/// Groups of three to five actors within a few hundred metres, group
/// centres spread over about 6 km.
pub fn clustered_instance(seed: u64, n: usize, steps: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actors = Vec::with_capacity(n);
    while actors.len() < n {
        let size = rng.gen_range(3..=5).min(n - actors.len());
        let (lat, lon) = (45.0 + rng.gen_range(0.0..0.05), 1.0 + rng.gen_range(0.0..0.07));
        for _ in 0..size {
            let loc = Location::new(lat + rng.gen_range(0.0..0.004), lon + rng.gen_range(0.0..0.005));
            let i = actors.len();
            actors.push(random_actor(&mut rng, i, steps, loc));
        }
    }
    let legal = random_legal(&mut rng);
    Instance::new(actors, hourly(steps), ScenarioSet::single(), legal)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
