//! Instance generation: spatial layout, consumption synthesis around
//! reference profiles, clear-sky PV production and tariff assignment.

pub mod profiles;
pub mod solar;
pub mod spatial;
pub mod tariff;

use chrono::{NaiveDate, NaiveDateTime};
use rand::distributions::{Distribution as _, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_instance, Actor, Instance, LegalParams, Location, ProfileTag, ScenarioSet, Subscription, TimeGrid,
};
pub use profiles::{ProfileCategory, ReferenceProfile};
pub use solar::{Exposition, TileCache};
pub use spatial::{sample_locations, Distribution, Placement};
pub use tariff::{assign_prices, TariffCalendar};

/// Share of each prosumer profile among generated actors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMix {
    pub household: f64,
    pub pro1: f64,
    pub pro2: f64,
}

impl Default for ProfileMix {
    fn default() -> Self {
        ProfileMix {
            household: 0.4,
            pro1: 0.4,
            pro2: 0.2,
        }
    }
}

impl ProfileMix {
    /// Actor counts per profile: floor of `rate * n`, with the remaining
    /// actors going to the largest fractional parts (ties in profile order).
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let rates = [self.household, self.pro1, self.pro2];
        let exact: Vec<f64> = rates.iter().map(|r| r * n as f64).collect();
        let mut counts = [0usize; 3];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = (e + 1e-9).floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - counts[a] as f64;
            let fb = exact[b] - counts[b] as f64;
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let assigned: usize = counts.iter().sum();
        for &p in order.iter().cycle().take(n.saturating_sub(assigned)) {
            counts[p] += 1;
        }
        counts
    }
}

/// Installed power range in kWc and reference profile of a prosumer profile.
pub fn profile_spec(tag: &ProfileTag) -> ((f64, f64), ProfileCategory) {
    match tag {
        ProfileTag::Household => ((0.0, 6.0), ProfileCategory::Household),
        ProfileTag::Pro1 => ((6.0, 12.0), ProfileCategory::Pro),
        _ => ((1000.0, 3000.0), ProfileCategory::Pro),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub seed: u64,
    pub n_actors: usize,
    pub density_per_km2: f64,
    pub distribution: Distribution,
    /// Inclusive bounds on cluster sizes.
    pub cluster_size_range: (usize, usize),
    pub profile_mix: ProfileMix,
    pub exposition: Exposition,
    /// Local time of the first step.
    pub start: NaiveDateTime,
    pub days: usize,
    pub step_minutes: u32,
    pub legal: LegalParams,
    pub variation_factor: f64,
    pub rolling_window: usize,
    /// Center of the sampled area.
    pub origin: Location,
    pub utc_offset_hours: f64,
    pub calendar: TariffCalendar,
    pub pro2_subscription: Subscription,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig::reference(0, 10, 7)
    }
}

pub const PRESETS: [&str; 8] = [
    "reference",
    "dens_0_1",
    "dens_2",
    "period_sum",
    "power_1000",
    "power_2000",
    "power_5000",
    "config_wc",
];

impl GenerationConfig {
    /// Base configuration: South-facing 30° panels, 0.5 actors/km², 3 MWc
    /// cap, starting on the first Monday of 2022.
    pub fn reference(seed: u64, n_actors: usize, days: usize) -> Self {
        GenerationConfig {
            seed,
            n_actors,
            density_per_km2: 0.5,
            distribution: Distribution::Uniform,
            cluster_size_range: (4, 6),
            profile_mix: ProfileMix::default(),
            exposition: Exposition::BEST,
            start: date(2022, 1, 3),
            days,
            step_minutes: 60,
            legal: LegalParams::default(),
            variation_factor: 0.3,
            rolling_window: 3,
            origin: Location::new(45.0, 1.0),
            utc_offset_hours: 1.0,
            calendar: TariffCalendar::default(),
            pro2_subscription: Subscription::Small,
        }
    }

    /// Named variant of the reference configuration.
    pub fn preset(name: &str, seed: u64, n_actors: usize, days: usize) -> Result<Self> {
        let mut c = GenerationConfig::reference(seed, n_actors, days);
        match name {
            "reference" => {}
            "dens_0_1" => c.density_per_km2 = 0.1,
            "dens_2" => c.density_per_km2 = 2.0,
            "period_sum" => c.start = date(2022, 6, 20),
            "power_1000" => c.legal.max_installed_power_kwc = 1000.0,
            "power_2000" => c.legal.max_installed_power_kwc = 2000.0,
            "power_5000" => c.legal.max_installed_power_kwc = 5000.0,
            "config_wc" => c.exposition = Exposition::WORST,
            other => {
                return Err(Error::Input(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(c)
    }

    pub fn horizon_steps(&self) -> usize {
        self.days * 24 * 60 / self.step_minutes as usize
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let m = self.profile_mix;
        let rates = [m.household, m.pro1, m.pro2];
        if rates.iter().any(|r| !(*r >= 0.0)) || (rates.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            problems.push(format!("profile rates {rates:?} must be nonnegative and sum to 1"));
        }
        if !(self.density_per_km2 > 0.0 && self.density_per_km2.is_finite()) {
            problems.push(format!("density {} must be positive", self.density_per_km2));
        }
        if self.rolling_window == 0 {
            problems.push("rolling window must be at least 1".into());
        }
        if self.n_actors == 0 || self.days == 0 {
            problems.push("at least one actor and one day are required".into());
        }
        if self.step_minutes == 0
            || self.step_minutes % 30 != 0
            || (self.step_minutes > 60 && self.step_minutes % 60 != 0)
            || 1440 % self.step_minutes != 0
        {
            problems.push(format!(
                "step of {} minutes must be 30, 60 or a divisor of a day in hours",
                self.step_minutes
            ));
        }
        let (lo, hi) = self.cluster_size_range;
        if lo == 0 || lo > hi {
            problems.push(format!("cluster size range ({lo}, {hi}) is empty"));
        }
        if !(0.0..=1.0).contains(&self.variation_factor) {
            problems.push(format!("variation factor {} outside [0, 1]", self.variation_factor));
        }
        if !(self.legal.max_distance_km > 0.0 && self.legal.max_installed_power_kwc > 0.0) {
            problems.push("legal limits must be positive".into());
        }
        if !self.origin.is_valid() {
            problems.push(format!("origin {:?} is not a valid position", self.origin));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(problems.join("; ")))
        }
    }
}

/// Reference consumption curves for both categories.
#[derive(Clone, Debug)]
pub struct ReferenceProfiles {
    pub household: ReferenceProfile,
    pub pro: ReferenceProfile,
}

impl ReferenceProfiles {
    /// Bundled synthetic curves for a calendar year.
    pub fn synthetic(year: i32) -> Self {
        ReferenceProfiles {
            household: ReferenceProfile::synthetic(ProfileCategory::Household, year),
            pro: ReferenceProfile::synthetic(ProfileCategory::Pro, year),
        }
    }

    pub fn get(&self, category: ProfileCategory) -> &ReferenceProfile {
        match category {
            ProfileCategory::Household => &self.household,
            ProfileCategory::Pro => &self.pro,
        }
    }
}

/// Independent random stream for one generation purpose.
fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

const STREAM_MIX: u64 = 1;
const STREAM_POWER: u64 = 2;
const STREAM_SPACE: u64 = 3;
const STREAM_CONSUMPTION: u64 = 1 << 32;

/// Generates a single-scenario instance. Actors are named `a0, a1, ...`.
pub fn generate_instance(config: &GenerationConfig, profiles: &ReferenceProfiles) -> Result<Instance> {
    generate_instance_with_irradiance(config, profiles, None)
}

/// As [`generate_instance`], with measured irradiance replacing the clear-sky
/// model on the tiles listed in a `tile_id,timestamp,poa_wm2` CSV.
pub fn generate_instance_with_irradiance(
    config: &GenerationConfig,
    profiles: &ReferenceProfiles,
    irradiance_csv: Option<&str>,
) -> Result<Instance> {
    config.validate()?;
    let n = config.n_actors;
    let counts = config.profile_mix.counts(n);
    let mut tags: Vec<ProfileTag> = [ProfileTag::Household, ProfileTag::Pro1, ProfileTag::Pro2]
        .into_iter()
        .zip(counts)
        .flat_map(|(tag, c)| std::iter::repeat(tag).take(c))
        .collect();
    tags.shuffle(&mut stream(config.seed, STREAM_MIX));

    let mut power_rng = stream(config.seed, STREAM_POWER);
    let powers: Vec<f64> = tags
        .iter()
        .map(|tag| {
            let ((lo, hi), _) = profile_spec(tag);
            Uniform::new_inclusive(lo, hi).sample(&mut power_rng)
        })
        .collect();
    let placement = sample_locations(config, &mut stream(config.seed, STREAM_SPACE));

    let grid = TimeGrid {
        step_minutes: config.step_minutes,
        horizon_steps: config.horizon_steps(),
        start_timestamp: config.start,
    };
    let half_hours = config.days * 48;
    let factor = config.step_minutes as usize / 30;
    let mut tiles = TileCache::new(grid.clone(), config.exposition, config.utc_offset_hours);
    if let Some(text) = irradiance_csv {
        tiles.load_overrides(text.as_bytes())?;
    }
    let mut actors = Vec::with_capacity(n);
    for (i, tag) in tags.into_iter().enumerate() {
        let (_, category) = profile_spec(&tag);
        let mut rng = stream(config.seed, STREAM_CONSUMPTION + i as u64);
        let fine = profiles::synth_consumption(
            profiles.get(category),
            config.start,
            half_hours,
            config.variation_factor,
            config.rolling_window,
            &mut rng,
        )?;
        let location = placement.locations[i];
        let production = solar::compute_production(powers[i], tiles.irradiance(location)?, &grid);
        let subscription = if tag == ProfileTag::Pro2 {
            config.pro2_subscription
        } else {
            Subscription::Small
        };
        let mut actor = Actor {
            id: format!("a{i}"),
            location,
            installed_power_kwc: powers[i],
            buy_price: Vec::new(),
            sell_price: Vec::new(),
            consumption_abs: profiles::resample_sum(&fine, factor),
            production_abs: production,
            profile_tag: tag,
            subscription,
        };
        let (buy, sell) = assign_prices(&actor, &grid, &config.calendar);
        actor.buy_price = buy;
        actor.sell_price = sell;
        actors.push(actor);
    }
    let instance = Instance::new(actors, grid, ScenarioSet::single(), config.legal.clone());
    let violations = validate_instance(&instance);
    if violations.is_empty() {
        Ok(instance)
    } else {
        Err(Error::InvalidInstance(violations))
    }
}
