//! Reference consumption profiles and per-actor consumption synthesis.

use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROFILE_STEP_MINUTES: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileCategory {
    Household,
    Pro,
}

/// Average consumption of one category over a full year, kWh per 30 minutes.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceProfile {
    pub category: ProfileCategory,
    pub start: NaiveDateTime,
    pub series: Vec<f64>,
}

fn steps_in_year(year: i32) -> usize {
    let days = NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap() - NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
    days.num_days() as usize * 48
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((hour - center) / width).powi(2)).exp()
}

impl ReferenceProfile {
    /// Synthetic stand-in shaped like a typical daily curve of the category:
    /// morning and evening peaks for households, a weekday working-hours
    /// plateau for professionals, both higher in winter.
    pub fn synthetic(category: ProfileCategory, year: i32) -> Self {
        let start = NaiveDate::from_ymd_opt(year, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let series = (0..steps_in_year(year))
            .map(|t| {
                let at = start + Duration::minutes(30 * t as i64);
                let hour = at.hour() as f64 + at.minute() as f64 / 60.0 + 0.25;
                let season = (std::f64::consts::TAU * (at.ordinal() as f64 - 15.0) / 365.0).cos();
                match category {
                    ProfileCategory::Household => {
                        let daily = 0.09
                            + 0.05 * bump(hour, 13.0, 3.0)
                            + 0.14 * bump(hour, 7.75, 1.0)
                            + 0.28 * bump(hour, 19.5, 1.8);
                        daily * (1.0 + 0.35 * season)
                    }
                    ProfileCategory::Pro => {
                        let weekend = matches!(at.weekday(), Weekday::Sat | Weekday::Sun);
                        let open = 1.0 / (1.0 + (-(hour - 8.0) * 2.0).exp()) / (1.0 + ((hour - 19.0) * 2.0).exp());
                        let daily = if weekend {
                            0.12 + 0.08 * open
                        } else {
                            0.12 + 0.75 * open
                        };
                        daily * (1.0 + 0.2 * season)
                    }
                }
            })
            .collect();
        ReferenceProfile {
            category,
            start,
            series,
        }
    }

    /// Reads a CSV with header `timestamp,kwh` holding consecutive 30-minute
    /// steps over one calendar year.
    pub fn from_csv<R: Read>(category: ProfileCategory, reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            timestamp: NaiveDateTime,
            kwh: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut start = None;
        let mut series = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let first = *start.get_or_insert(row.timestamp);
            let expected = first + Duration::minutes(30 * series.len() as i64);
            if row.timestamp != expected {
                return Err(Error::Input(format!(
                    "profile step {} at {} (expected {expected})",
                    series.len(),
                    row.timestamp
                )));
            }
            if !(row.kwh >= 0.0) {
                return Err(Error::Input(format!(
                    "negative consumption {} at {}",
                    row.kwh, row.timestamp
                )));
            }
            series.push(row.kwh);
        }
        let start = start.ok_or_else(|| Error::Input("empty profile".into()))?;
        let profile = ReferenceProfile {
            category,
            start,
            series,
        };
        profile.check()?;
        Ok(profile)
    }

    pub fn check(&self) -> Result<()> {
        let year = self.start.year();
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        if self.start != jan1 || self.series.len() != steps_in_year(year) {
            return Err(Error::Input(format!(
                "profile must cover {year} in 30-minute steps from January 1st ({} steps starting {})",
                self.series.len(),
                self.start
            )));
        }
        if self.series.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Input("profile has negative or missing values".into()));
        }
        Ok(())
    }

    /// Index of the 30-minute step starting at `at`.
    fn index(&self, at: NaiveDateTime) -> Option<usize> {
        let minutes = (at - self.start).num_minutes();
        (minutes >= 0 && minutes % 30 == 0).then_some((minutes / 30) as usize)
    }

    /// Centered rolling mean over `window` steps of the reference, for the
    /// `steps` half-hours starting at `at`. Near the ends of the year the
    /// window is truncated.
    pub fn rolling_mean(&self, at: NaiveDateTime, steps: usize, window: usize) -> Result<Vec<f64>> {
        if window == 0 {
            return Err(Error::Input("rolling window must be at least 1".into()));
        }
        let first = self
            .index(at)
            .filter(|&i| i + steps <= self.series.len())
            .ok_or_else(|| {
                Error::Input(format!(
                    "{steps} half-hour steps from {at} fall outside the reference profile starting {}",
                    self.start
                ))
            })?;
        let before = (window - 1) / 2;
        let after = window - 1 - before;
        Ok((first..first + steps)
            .map(|i| {
                let lo = i.saturating_sub(before);
                let hi = (i + after + 1).min(self.series.len());
                self.series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect())
    }
}

/// Consumption of one actor: rolling mean of the reference times an
/// independent uniform factor in `[1 - v, 1 + v]` per half-hour.
pub fn synth_consumption<R: Rng + ?Sized>(
    profile: &ReferenceProfile,
    at: NaiveDateTime,
    steps: usize,
    variation_factor: f64,
    window: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&variation_factor) {
        return Err(Error::Input(format!(
            "variation factor {variation_factor} outside [0, 1]"
        )));
    }
    let mean = profile.rolling_mean(at, steps, window)?;
    if variation_factor == 0.0 {
        return Ok(mean);
    }
    let u = Uniform::new_inclusive(1.0 - variation_factor, 1.0 + variation_factor);
    Ok(mean.into_iter().map(|m| m * u.sample(rng)).collect())
}

/// Sums consecutive groups of `factor` values.
pub fn resample_sum(series: &[f64], factor: usize) -> Vec<f64> {
    series.chunks(factor).map(|c| c.iter().sum()).collect()
}
