//! Domain data model: actors, time grid, scenarios, legal parameters and the
//! immutable [`Instance`] every model builder consumes.
//!
//! Series are stored flat in row-major `[scenario][timestep]` order. The
//! combined index `k = s * horizon + t` is used throughout the crate and is
//! called a *period*.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geographic position in decimal degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn new(lat: f64, lon: f64) -> Self {
        Location { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileTag {
    Household,
    Pro1,
    Pro2,
    Custom(String),
}

/// Grid subscription size; selects the buying tariff column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subscription {
    /// At most 36 kVA.
    #[default]
    Small,
    /// 36 kVA and above.
    Large,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: String,
    pub location: Location,
    pub installed_power_kwc: f64,
    /// Grid buying price per period, €/kWh.
    pub buy_price: Vec<f64>,
    /// Grid selling price per period, €/kWh.
    pub sell_price: Vec<f64>,
    /// Absolute consumption per period, kWh.
    pub consumption_abs: Vec<f64>,
    /// Absolute production per period, kWh.
    pub production_abs: Vec<f64>,
    pub profile_tag: ProfileTag,
    #[serde(default)]
    pub subscription: Subscription,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step_minutes: u32,
    pub horizon_steps: usize,
    pub start_timestamp: NaiveDateTime,
}

impl TimeGrid {
    pub fn step_hours(&self) -> f64 {
        self.step_minutes as f64 / 60.0
    }

    /// Wall-clock start of step `t`.
    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start_timestamp + Duration::minutes(self.step_minutes as i64 * t as i64)
    }

    pub fn is_valid(&self) -> bool {
        let m = self.step_minutes;
        m > 0 && (60 % m == 0 || m % 60 == 0) && self.horizon_steps >= 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn single() -> Self {
        ScenarioSet {
            probabilities: vec![1.0],
        }
    }

    pub fn count(&self) -> usize {
        self.probabilities.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalParams {
    pub max_distance_km: f64,
    pub max_installed_power_kwc: f64,
    /// Use the net production as circulation bound instead of the absolute one.
    pub force_individual_sc: bool,
    /// Actor-id pairs that must be in the same loop or both outside.
    #[serde(default)]
    pub coupled_pairs: Vec<(String, String)>,
}

impl Default for LegalParams {
    fn default() -> Self {
        LegalParams {
            max_distance_km: 2.0,
            max_installed_power_kwc: 3000.0,
            force_individual_sc: true,
            coupled_pairs: Vec::new(),
        }
    }
}

/// Splits absolute production/consumption into net production and net
/// consumption; at most one of the two is nonzero.
pub fn net_transform(production_abs: f64, consumption_abs: f64) -> (f64, f64) {
    (
        (production_abs - consumption_abs).max(0.0),
        (consumption_abs - production_abs).max(0.0),
    )
}

#[derive(Clone, Debug, Default)]
struct Derived {
    periods: usize,
    net_prod: Vec<f64>,
    net_cons: Vec<f64>,
    bound: Vec<f64>,
    q: Vec<f64>,
    m: Vec<f64>,
}

/// Full optimisation input. Immutable once built; derived quantities (net
/// series, circulation bounds and the big-M constants) are computed on
/// construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "InstanceDoc", into = "InstanceDoc")]
pub struct Instance {
    actors: Vec<Actor>,
    time_grid: TimeGrid,
    scenarios: ScenarioSet,
    legal: LegalParams,
    derived: Derived,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Metadata {
    time_grid: TimeGrid,
    scenarios: ScenarioSet,
    legal: LegalParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceDoc {
    metadata: Metadata,
    actors: Vec<Actor>,
}

impl From<InstanceDoc> for Instance {
    fn from(doc: InstanceDoc) -> Self {
        Instance::new(
            doc.actors,
            doc.metadata.time_grid,
            doc.metadata.scenarios,
            doc.metadata.legal,
        )
    }
}

impl From<Instance> for InstanceDoc {
    fn from(inst: Instance) -> Self {
        InstanceDoc {
            metadata: Metadata {
                time_grid: inst.time_grid,
                scenarios: inst.scenarios,
                legal: inst.legal,
            },
            actors: inst.actors,
        }
    }
}

impl Instance {
    /// Builds an instance. Structural problems are not rejected here; call
    /// [`validate_instance`] before solving.
    pub fn new(actors: Vec<Actor>, time_grid: TimeGrid, scenarios: ScenarioSet, legal: LegalParams) -> Self {
        let mut inst = Instance {
            actors,
            time_grid,
            scenarios,
            legal,
            derived: Derived::default(),
        };
        inst.derived = inst.derive();
        inst
    }

    fn derive(&self) -> Derived {
        let periods = self.scenarios.count() * self.time_grid.horizon_steps;
        let n = self.actors.len();
        let mut d = Derived {
            periods,
            net_prod: vec![0.0; n * periods],
            net_cons: vec![0.0; n * periods],
            bound: vec![0.0; n * periods],
            q: vec![0.0; periods],
            m: vec![0.0; periods],
        };
        let mut sum_p = vec![0.0; periods];
        let mut sum_c = vec![0.0; periods];
        for (i, a) in self.actors.iter().enumerate() {
            for k in 0..periods {
                let pa = a.production_abs.get(k).copied().unwrap_or(0.0);
                let ca = a.consumption_abs.get(k).copied().unwrap_or(0.0);
                let (p, c) = net_transform(pa, ca);
                d.net_prod[i * periods + k] = p;
                d.net_cons[i * periods + k] = c;
                d.bound[i * periods + k] = if self.legal.force_individual_sc { p } else { pa };
                d.q[k] += (p - c).max(0.0);
                sum_p[k] += p;
                sum_c[k] += c;
            }
        }
        for k in 0..periods {
            d.m[k] = sum_p[k].max(sum_c[k]);
        }
        d
    }

    pub fn actors(&self) -> &[Actor] {
        &self.actors
    }

    pub fn n(&self) -> usize {
        self.actors.len()
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    pub fn legal(&self) -> &LegalParams {
        &self.legal
    }

    pub fn horizon(&self) -> usize {
        self.time_grid.horizon_steps
    }

    /// Number of (scenario, timestep) periods.
    pub fn periods(&self) -> usize {
        self.derived.periods
    }

    pub fn period(&self, scenario: usize, step: usize) -> usize {
        scenario * self.horizon() + step
    }

    /// Splits a period index back into (scenario, timestep).
    pub fn split_period(&self, k: usize) -> (usize, usize) {
        (k / self.horizon(), k % self.horizon())
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.scenarios.probabilities[k / self.horizon()]
    }

    /// Net production P_i at period k.
    pub fn net_prod(&self, i: usize, k: usize) -> f64 {
        self.derived.net_prod[i * self.derived.periods + k]
    }

    /// Net consumption C_i at period k.
    pub fn net_cons(&self, i: usize, k: usize) -> f64 {
        self.derived.net_cons[i * self.derived.periods + k]
    }

    pub fn surplus(&self, i: usize, k: usize) -> f64 {
        self.net_prod(i, k) - self.net_cons(i, k)
    }

    /// Circulation bound B_i at period k.
    pub fn bound(&self, i: usize, k: usize) -> f64 {
        self.derived.bound[i * self.derived.periods + k]
    }

    pub fn buy(&self, i: usize, k: usize) -> f64 {
        self.actors[i].buy_price[k]
    }

    pub fn sell(&self, i: usize, k: usize) -> f64 {
        self.actors[i].sell_price[k]
    }

    /// Big-M constant Q: total net surplus at period k.
    pub fn q(&self, k: usize) -> f64 {
        self.derived.q[k]
    }

    /// Big-M constant M: max of total net production and total net consumption.
    pub fn m(&self, k: usize) -> f64 {
        self.derived.m[k]
    }

    /// Flow cap D_ij = min(P_i, C_j) at period k.
    pub fn flow_cap(&self, from: usize, to: usize, k: usize) -> f64 {
        self.net_prod(from, k).min(self.net_cons(to, k))
    }

    /// True when the actor has a net surplus in at least one period.
    pub fn is_candidate_producer(&self, i: usize) -> bool {
        (0..self.periods()).any(|k| self.net_prod(i, k) > self.net_cons(i, k))
    }

    /// True when the actor has a net deficit in at least one period.
    pub fn is_candidate_consumer(&self, i: usize) -> bool {
        (0..self.periods()).any(|k| self.net_cons(i, k) > self.net_prod(i, k))
    }

    pub fn actor_index(&self, id: &str) -> Option<usize> {
        self.actors.iter().position(|a| a.id == id)
    }

    /// Coupled pairs resolved to actor indices; unknown ids are skipped.
    pub fn coupled_indices(&self) -> Vec<(usize, usize)> {
        self.legal
            .coupled_pairs
            .iter()
            .filter_map(|(a, b)| Some((self.actor_index(a)?, self.actor_index(b)?)))
            .collect()
    }

    /// Per-actor cost when trading with the grid only.
    pub fn baseline_actor_cost(&self, i: usize) -> f64 {
        (0..self.periods())
            .map(|k| {
                self.probability(k) * (self.buy(i, k) * self.net_cons(i, k) - self.sell(i, k) * self.net_prod(i, k))
            })
            .sum()
    }

    /// Same instance with a different legal parameter set.
    pub fn with_legal(&self, legal: LegalParams) -> Instance {
        Instance::new(
            self.actors.clone(),
            self.time_grid.clone(),
            self.scenarios.clone(),
            legal,
        )
    }

    /// Restriction of the instance to a subset of actors (in the given order).
    pub fn subset(&self, members: &[usize]) -> Instance {
        let actors = members.iter().map(|&i| self.actors[i].clone()).collect();
        Instance::new(
            actors,
            self.time_grid.clone(),
            self.scenarios.clone(),
            self.legal.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Checks every structural invariant of an instance and returns one message
/// per violation. An empty list means the instance is valid.
pub fn validate_instance(instance: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let tg = instance.time_grid();
    if !tg.is_valid() {
        out.push(format!(
            "time_grid: step_minutes {} / horizon_steps {} invalid",
            tg.step_minutes, tg.horizon_steps
        ));
    }
    let probs = &instance.scenarios().probabilities;
    if probs.is_empty() {
        out.push("scenarios: no scenario".to_string());
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        out.push("scenarios: negative or non-finite probability".to_string());
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        out.push(format!("scenarios: probabilities sum {total}"));
    }
    let legal = instance.legal();
    if !(legal.max_distance_km > 0.0 && legal.max_distance_km.is_finite()) {
        out.push(format!("legal: max_distance_km {}", legal.max_distance_km));
    }
    if !(legal.max_installed_power_kwc > 0.0) {
        out.push(format!(
            "legal: max_installed_power_kwc {}",
            legal.max_installed_power_kwc
        ));
    }

    let expected = probs.len() * tg.horizon_steps;
    let mut seen = HashSet::new();
    for a in instance.actors() {
        if !seen.insert(a.id.as_str()) {
            out.push(format!("actor {}: duplicate id", a.id));
        }
        if !a.location.is_valid() {
            out.push(format!("actor {}: invalid location", a.id));
        }
        if !(a.installed_power_kwc >= 0.0 && a.installed_power_kwc.is_finite()) {
            out.push(format!("actor {}: installed_power_kwc {}", a.id, a.installed_power_kwc));
        }
        for (field, series) in [
            ("buy_price", &a.buy_price),
            ("sell_price", &a.sell_price),
            ("consumption_abs", &a.consumption_abs),
            ("production_abs", &a.production_abs),
        ] {
            if series.len() != expected {
                out.push(format!(
                    "actor {}: {field} has length {} (expected {expected})",
                    a.id,
                    series.len()
                ));
            }
            if series.iter().any(|v| !v.is_finite() || *v < 0.0) {
                out.push(format!("actor {}: {field} has negative or non-finite values", a.id));
            }
        }
    }
    for (x, y) in &legal.coupled_pairs {
        for id in [x, y] {
            if instance.actor_index(id).is_none() {
                out.push(format!("legal: coupled pair references unknown actor {id}"));
            }
        }
    }
    out
}

/// Objective of the zero-loop configuration, where every actor trades its
/// net quantities with the grid.
pub fn baseline_objective(instance: &Instance) -> f64 {
    (0..instance.n()).map(|i| instance.baseline_actor_cost(i)).sum()
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    actor_id: String,
    scenario: usize,
    step: usize,
    consumption_kwh: f64,
    production_kwh: f64,
    buy_eur_kwh: f64,
    sell_eur_kwh: f64,
}

/// Overwrites actor series from a CSV with header
/// `actor_id,scenario,step,consumption_kwh,production_kwh,buy_eur_kwh,sell_eur_kwh`.
/// Series are resized to `scenarios * horizon`; missing rows stay zero.
pub fn import_series_csv<R: Read>(actors: &mut [Actor], scenarios: usize, horizon: usize, reader: R) -> Result<()> {
    let periods = scenarios * horizon;
    let index: HashMap<String, usize> = actors.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();
    for a in actors.iter_mut() {
        for series in [
            &mut a.consumption_abs,
            &mut a.production_abs,
            &mut a.buy_price,
            &mut a.sell_price,
        ] {
            series.clear();
            series.resize(periods, 0.0);
        }
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in rdr.deserialize() {
        let row: SeriesRow = row?;
        let i = *index
            .get(&row.actor_id)
            .ok_or_else(|| Error::Input(format!("series row for unknown actor {}", row.actor_id)))?;
        if row.scenario >= scenarios || row.step >= horizon {
            return Err(Error::Input(format!(
                "series row ({}, {}) outside {scenarios} scenarios x {horizon} steps",
                row.scenario, row.step
            )));
        }
        let k = row.scenario * horizon + row.step;
        let a = &mut actors[i];
        a.consumption_abs[k] = row.consumption_kwh;
        a.production_abs[k] = row.production_kwh;
        a.buy_price[k] = row.buy_eur_kwh;
        a.sell_price[k] = row.sell_eur_kwh;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn grid(steps: usize) -> TimeGrid {
        TimeGrid {
            step_minutes: 60,
            horizon_steps: steps,
            start_timestamp: chrono::NaiveDate::from_ymd_opt(2022, 6, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
        }
    }

    pub fn actor(id: &str, lat: f64, lon: f64, kwc: f64, prod: &[f64], cons: &[f64]) -> Actor {
        let len = prod.len();
        Actor {
            id: id.to_string(),
            location: Location::new(lat, lon),
            installed_power_kwc: kwc,
            buy_price: vec![0.204; len],
            sell_price: vec![0.1339; len],
            consumption_abs: cons.to_vec(),
            production_abs: prod.to_vec(),
            profile_tag: ProfileTag::Household,
            subscription: Subscription::Small,
        }
    }

    /// Producer with 5 kWh surplus next to a consumer needing 5 kWh, 1 km apart.
    pub fn pair() -> Instance {
        Instance::new(
            vec![
                actor("prod", 45.0, 1.0, 3.0, &[5.0], &[0.0]),
                actor("cons", 45.009, 1.0, 0.0, &[0.0], &[5.0]),
            ],
            grid(1),
            ScenarioSet::single(),
            LegalParams::default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn valid_pair_has_no_violations() {
        assert!(validate_instance(&pair()).is_empty());
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let base = pair();
        let mut ok = Instance::new(
            base.actors().to_vec(),
            base.time_grid().clone(),
            ScenarioSet {
                probabilities: vec![0.5, 0.5],
            },
            base.legal().clone(),
        );
        // series must then cover two scenarios
        let mut actors = ok.actors().to_vec();
        for a in &mut actors {
            for s in [
                &mut a.buy_price,
                &mut a.sell_price,
                &mut a.consumption_abs,
                &mut a.production_abs,
            ] {
                let v = s[0];
                s.push(v);
            }
        }
        ok = Instance::new(
            actors.clone(),
            ok.time_grid().clone(),
            ok.scenarios().clone(),
            ok.legal().clone(),
        );
        assert!(validate_instance(&ok).is_empty());

        let bad = Instance::new(
            actors,
            ok.time_grid().clone(),
            ScenarioSet {
                probabilities: vec![0.7, 0.2],
            },
            ok.legal().clone(),
        );
        let v = validate_instance(&bad);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("probabilities sum 0.89"), "{v:?}");
    }

    #[test]
    fn series_length_violation_names_actor() {
        let mut actors = pair().actors().to_vec();
        actors[1].consumption_abs.push(1.0);
        let inst = Instance::new(actors, grid(1), ScenarioSet::single(), LegalParams::default());
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("actor cons") && v[0].contains("consumption_abs"));
    }

    #[test]
    fn baseline_of_single_consumer() {
        let inst = Instance::new(
            vec![actor("a", 45.0, 1.0, 0.0, &[0.0], &[10.0])],
            grid(1),
            ScenarioSet::single(),
            LegalParams::default(),
        );
        assert_relative_eq!(baseline_objective(&inst), 2.04, epsilon = 1e-12);
    }

    #[test]
    fn baseline_of_single_producer() {
        let inst = Instance::new(
            vec![actor("a", 45.0, 1.0, 3.0, &[5.0], &[0.0])],
            grid(1),
            ScenarioSet::single(),
            LegalParams::default(),
        );
        assert_relative_eq!(baseline_objective(&inst), -0.6695, epsilon = 1e-12);
    }

    #[test]
    fn big_m_constants_follow_net_series() {
        let inst = Instance::new(
            vec![
                actor("a", 45.0, 1.0, 3.0, &[7.0, 0.0], &[2.0, 1.0]),
                actor("b", 45.0, 1.0, 3.0, &[1.0, 0.0], &[4.0, 2.0]),
            ],
            grid(2),
            ScenarioSet::single(),
            LegalParams::default(),
        );
        assert_relative_eq!(inst.q(0), 5.0);
        assert_relative_eq!(inst.m(0), 5.0);
        assert_relative_eq!(inst.q(1), 0.0);
        assert_relative_eq!(inst.m(1), 3.0);
        assert_relative_eq!(inst.bound(0, 0), 5.0);
        let unforced = inst.with_legal(LegalParams {
            force_individual_sc: false,
            ..LegalParams::default()
        });
        assert_relative_eq!(unforced.bound(0, 0), 7.0);
    }

    #[test]
    fn json_round_trip_preserves_derived_values() {
        let inst = pair();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back.actors(), inst.actors());
        assert_eq!(back.q(0), inst.q(0));
    }

    #[test]
    fn csv_series_import() {
        let mut actors = pair().actors().to_vec();
        let csv = "actor_id,scenario,step,consumption_kwh,production_kwh,buy_eur_kwh,sell_eur_kwh\n\
                   cons,0,1,3.5,0,0.2,0.1\nprod,0,0,0,9,0.2,0.13\n";
        import_series_csv(&mut actors, 1, 2, csv.as_bytes()).unwrap();
        assert_eq!(actors[1].consumption_abs, vec![0.0, 3.5]);
        assert_eq!(actors[0].production_abs, vec![9.0, 0.0]);
        let err = import_series_csv(
            &mut actors,
            1,
            2,
            "actor_id,scenario,step,consumption_kwh,production_kwh,buy_eur_kwh,sell_eur_kwh\nzz,0,0,1,1,1,1\n"
                .as_bytes(),
        );
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn net_transform_properties(p in 0.0f64..1e4, c in 0.0f64..1e4) {
            let (np, nc) = net_transform(p, c);
            prop_assert!(np.min(nc) == 0.0);
            prop_assert!((np - nc - (p - c)).abs() <= 1e-9 * (1.0 + p + c));
            prop_assert_eq!(net_transform(np, nc), (np, nc));
        }
    }
}
