//! Grid tariffs: selling prices by installed power and buying prices by
//! subscription, time of day and season.

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::model::{Actor, ProfileTag, Subscription, TimeGrid};

/// Selling prices in c€/kWh by installed power band.
pub const SELLING_UP_TO_3: f64 = 13.39;
pub const SELLING_3_TO_9: f64 = 13.39;
pub const SELLING_9_TO_36: f64 = 14.58;
pub const SELLING_36_TO_100: f64 = 12.68;
pub const SELLING_FROM_100: f64 = 13.12;

/// Buying prices in c€/kWh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuyingTable {
    pub household_peak: f64,
    pub household_off_peak: f64,
    pub pro_peak: f64,
    pub pro_off_peak: f64,
    pub large_winter_peak: f64,
    pub large_winter_off_peak: f64,
    pub large_summer_peak: f64,
    pub large_summer_off_peak: f64,
}

pub const BUYING: BuyingTable = BuyingTable {
    household_peak: 20.4,
    household_off_peak: 15.13,
    pro_peak: 19.84,
    pro_off_peak: 16.07,
    large_winter_peak: 27.26,
    large_winter_off_peak: 15.16,
    large_summer_peak: 13.63,
    large_summer_off_peak: 7.58,
};

/// Peak hours and winter months.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TariffCalendar {
    /// First peak hour, inclusive.
    pub peak_start_hour: u32,
    /// End of the peak window, exclusive.
    pub peak_end_hour: u32,
    pub winter_months: Vec<u32>,
}

impl Default for TariffCalendar {
    fn default() -> Self {
        TariffCalendar {
            peak_start_hour: 7,
            peak_end_hour: 23,
            winter_months: vec![11, 12, 1, 2, 3],
        }
    }
}

impl TariffCalendar {
    pub fn is_peak(&self, at: NaiveDateTime) -> bool {
        (self.peak_start_hour..self.peak_end_hour).contains(&at.hour())
    }

    pub fn is_winter(&self, at: NaiveDateTime) -> bool {
        self.winter_months.contains(&at.month())
    }
}

/// Selling price in €/kWh for an installation of the given size. Bands
/// are closed on the right except the last two: 36 kWc sells in the
/// 9-36 band and 100 kWc in the top band.
pub fn selling_price(installed_power_kwc: f64) -> f64 {
    let p = installed_power_kwc;
    let cents = if p <= 3.0 {
        SELLING_UP_TO_3
    } else if p <= 9.0 {
        SELLING_3_TO_9
    } else if p <= 36.0 {
        SELLING_9_TO_36
    } else if p < 100.0 {
        SELLING_36_TO_100
    } else {
        SELLING_FROM_100
    };
    cents / 100.0
}

/// Buying price in €/kWh at `at`.
pub fn buying_price(tag: &ProfileTag, subscription: Subscription, calendar: &TariffCalendar, at: NaiveDateTime) -> f64 {
    let peak = calendar.is_peak(at);
    let t = &BUYING;
    let cents = match (subscription, tag) {
        (Subscription::Large, _) => match (calendar.is_winter(at), peak) {
            (true, true) => t.large_winter_peak,
            (true, false) => t.large_winter_off_peak,
            (false, true) => t.large_summer_peak,
            (false, false) => t.large_summer_off_peak,
        },
        (Subscription::Small, ProfileTag::Household) => {
            if peak {
                t.household_peak
            } else {
                t.household_off_peak
            }
        }
        (Subscription::Small, _) => {
            if peak {
                t.pro_peak
            } else {
                t.pro_off_peak
            }
        }
    };
    cents / 100.0
}

/// Buying and selling price series of an actor over the grid, in €/kWh.
pub fn assign_prices(actor: &Actor, grid: &TimeGrid, calendar: &TariffCalendar) -> (Vec<f64>, Vec<f64>) {
    let buy = (0..grid.horizon_steps)
        .map(|t| buying_price(&actor.profile_tag, actor.subscription, calendar, grid.timestamp(t)))
        .collect();
    let sell = vec![selling_price(actor.installed_power_kwc); grid.horizon_steps];
    (buy, sell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(month: u32, hour: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, month, 10)
            .unwrap()
            .and_hms_opt(hour, 30, 0)
            .unwrap()
    }

    #[test]
    fn selling_bands() {
        for (kwc, cents) in [
            (0.0, 13.39),
            (3.0, 13.39),
            (5.0, 13.39),
            (9.0, 13.39),
            (20.0, 14.58),
            (36.0, 14.58),
            (50.0, 12.68),
            (99.9, 12.68),
            (100.0, 13.12),
            (2500.0, 13.12),
        ] {
            assert_eq!(selling_price(kwc), cents / 100.0, "{kwc} kWc");
        }
    }

    #[test]
    fn calendar_boundaries() {
        let c = TariffCalendar::default();
        assert!(!c.is_peak(at(6, 6)));
        assert!(c.is_peak(at(6, 7)));
        assert!(c.is_peak(at(6, 22)));
        assert!(!c.is_peak(at(6, 23)));
        assert!(c.is_winter(at(3, 12)) && !c.is_winter(at(4, 12)) && c.is_winter(at(11, 12)));
    }

    #[test]
    fn buying_table() {
        let c = TariffCalendar::default();
        let cases = [
            (ProfileTag::Household, Subscription::Small, at(1, 12), 20.4),
            (ProfileTag::Household, Subscription::Small, at(7, 3), 15.13),
            (ProfileTag::Pro1, Subscription::Small, at(7, 12), 19.84),
            (ProfileTag::Pro2, Subscription::Small, at(1, 23), 16.07),
            (ProfileTag::Pro2, Subscription::Large, at(12, 8), 27.26),
            (ProfileTag::Pro2, Subscription::Large, at(2, 2), 15.16),
            (ProfileTag::Pro1, Subscription::Large, at(6, 20), 13.63),
            (ProfileTag::Pro2, Subscription::Large, at(8, 0), 7.58),
        ];
        for (tag, sub, when, cents) in cases {
            assert_eq!(
                buying_price(&tag, sub, &c, when),
                cents / 100.0,
                "{tag:?} {sub:?} {when}"
            );
        }
    }
}
