//! Clear-sky plane-of-array irradiance on fixed-tilt panels, computed once per
//! 10 km² tile and shared by every installation in it.

use std::collections::HashMap;
use std::io::Read;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Location, TimeGrid};

pub const KM_PER_DEGREE: f64 = 111.32;
pub const TILE_AREA_KM2: f64 = 10.0;
const SOLAR_CONSTANT: f64 = 1353.0;
/// Irradiance samples averaged inside each time step.
const SUBSAMPLES: usize = 6;

/// Panel orientation. Azimuth is measured clockwise from North.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exposition {
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
}

impl Exposition {
    /// Best case: 30° facing South.
    pub const BEST: Exposition = Exposition {
        tilt_deg: 30.0,
        azimuth_deg: 180.0,
    };
    /// Worst case: 60° facing North.
    pub const WORST: Exposition = Exposition {
        tilt_deg: 60.0,
        azimuth_deg: 0.0,
    };

    /// Unit normal of the panel in (east, north, up) coordinates.
    fn normal(&self) -> [f64; 3] {
        let (b, g) = (self.tilt_deg.to_radians(), self.azimuth_deg.to_radians());
        [b.sin() * g.sin(), b.sin() * g.cos(), b.cos()]
    }
}

/// Sun direction as an (east, north, up) unit vector at a UTC instant.
pub fn sun_vector(lat_deg: f64, lon_deg: f64, utc: NaiveDateTime) -> [f64; 3] {
    let doy = utc.ordinal() as f64;
    let hours = utc.hour() as f64 + utc.minute() as f64 / 60.0 + utc.second() as f64 / 3600.0;
    let decl = (23.45f64).to_radians() * (std::f64::consts::TAU * (284.0 + doy) / 365.0).sin();
    let b = std::f64::consts::TAU * (doy - 81.0) / 364.0;
    let eot_min = 9.87 * (2.0 * b).sin() - 7.53 * b.cos() - 1.5 * b.sin();
    let solar_time = hours + lon_deg / 15.0 + eot_min / 60.0;
    let omega = (15.0 * (solar_time - 12.0)).to_radians();
    let phi = lat_deg.to_radians();
    [
        -decl.cos() * omega.sin(),
        phi.cos() * decl.sin() - phi.sin() * decl.cos() * omega.cos(),
        phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos(),
    ]
}

/// Cosine of the angle between the sun and the panel normal.
pub fn incidence_cos(lat_deg: f64, lon_deg: f64, utc: NaiveDateTime, exposition: Exposition) -> f64 {
    let s = sun_vector(lat_deg, lon_deg, utc);
    let n = exposition.normal();
    s[0] * n[0] + s[1] * n[1] + s[2] * n[2]
}

/// Clear-sky direct normal irradiance in W/m² for a solar zenith cosine.
/// Kasten-Young air mass, Meinel attenuation.
pub fn clear_sky_dni(cos_zenith: f64, day_of_year: u32) -> f64 {
    if cos_zenith <= 0.0 {
        return 0.0;
    }
    let zenith_deg = cos_zenith.clamp(-1.0, 1.0).acos().to_degrees();
    let air_mass = 1.0 / (cos_zenith + 0.50572 * (96.07995 - zenith_deg).powf(-1.6364));
    let extraterrestrial = SOLAR_CONSTANT * (1.0 + 0.033 * (std::f64::consts::TAU * day_of_year as f64 / 365.0).cos());
    extraterrestrial * 0.7f64.powf(air_mass.powf(0.678))
}

/// Instantaneous plane-of-array irradiance in W/m².
pub fn poa_irradiance(lat_deg: f64, lon_deg: f64, utc: NaiveDateTime, exposition: Exposition) -> f64 {
    let sun = sun_vector(lat_deg, lon_deg, utc);
    if sun[2] <= 0.0 {
        return 0.0;
    }
    let dni = clear_sky_dni(sun[2], utc.ordinal());
    (dni * incidence_cos(lat_deg, lon_deg, utc, exposition)).max(0.0)
}

/// Square tile of [`TILE_AREA_KM2`] containing a location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tile {
    pub row: i64,
    pub col: i64,
}

impl Tile {
    fn side_km() -> f64 {
        TILE_AREA_KM2.sqrt()
    }

    pub fn of(location: Location) -> Tile {
        let side = Tile::side_km();
        let row = (location.lat * KM_PER_DEGREE / side).floor() as i64;
        let col = (location.lon * Tile::km_per_lon_degree(row) / side).floor() as i64;
        Tile { row, col }
    }

    fn km_per_lon_degree(row: i64) -> f64 {
        let lat = (row as f64 + 0.5) * Tile::side_km() / KM_PER_DEGREE;
        KM_PER_DEGREE * lat.to_radians().cos()
    }

    pub fn center(&self) -> Location {
        let side = Tile::side_km();
        Location::new(
            (self.row as f64 + 0.5) * side / KM_PER_DEGREE,
            (self.col as f64 + 0.5) * side / Tile::km_per_lon_degree(self.row),
        )
    }

    pub fn id(&self) -> String {
        format!("r{}_c{}", self.row, self.col)
    }
}

/// Mean plane-of-array irradiance per step of `grid` at the tile center.
/// Grid timestamps are local time at `utc_offset_hours`.
pub fn solar_tile_irradiance(tile: Tile, grid: &TimeGrid, exposition: Exposition, utc_offset_hours: f64) -> Vec<f64> {
    let c = tile.center();
    let step_secs = grid.step_minutes as i64 * 60;
    let offset = Duration::seconds((utc_offset_hours * 3600.0).round() as i64);
    (0..grid.horizon_steps)
        .map(|t| {
            let start = grid.timestamp(t) - offset;
            (0..SUBSAMPLES)
                .map(|j| {
                    let at = start + Duration::seconds(step_secs * (2 * j as i64 + 1) / (2 * SUBSAMPLES as i64));
                    poa_irradiance(c.lat, c.lon, at, exposition)
                })
                .sum::<f64>()
                / SUBSAMPLES as f64
        })
        .collect()
}

/// Energy in kWh per step for an installation under the given irradiance.
pub fn compute_production(installed_power_kwc: f64, poa_wm2: &[f64], grid: &TimeGrid) -> Vec<f64> {
    poa_wm2
        .iter()
        .map(|&g| installed_power_kwc * g / 1000.0 * grid.step_hours())
        .collect()
}

#[derive(Deserialize)]
struct OverrideRow {
    tile_id: String,
    timestamp: NaiveDateTime,
    poa_wm2: f64,
}

/// Per-tile irradiance cache with optional measured series replacing the
/// clear-sky model.
pub struct TileCache {
    grid: TimeGrid,
    exposition: Exposition,
    utc_offset_hours: f64,
    overrides: HashMap<String, HashMap<NaiveDateTime, f64>>,
    tiles: HashMap<Tile, Vec<f64>>,
}

impl TileCache {
    pub fn new(grid: TimeGrid, exposition: Exposition, utc_offset_hours: f64) -> Self {
        TileCache {
            grid,
            exposition,
            utc_offset_hours,
            overrides: HashMap::new(),
            tiles: HashMap::new(),
        }
    }

    /// Loads overrides from a CSV with header `tile_id,timestamp,poa_wm2`.
    /// Timestamps are step starts in grid time.
    pub fn load_overrides<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in rdr.deserialize() {
            let row: OverrideRow = row?;
            if !(row.poa_wm2 >= 0.0) {
                return Err(Error::Input(format!(
                    "negative irradiance {} for tile {} at {}",
                    row.poa_wm2, row.tile_id, row.timestamp
                )));
            }
            self.overrides
                .entry(row.tile_id)
                .or_default()
                .insert(row.timestamp, row.poa_wm2);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Irradiance series for the tile containing `location`.
    pub fn irradiance(&mut self, location: Location) -> Result<&[f64]> {
        let tile = Tile::of(location);
        if !self.tiles.contains_key(&tile) {
            let series = match self.overrides.get(&tile.id()) {
                Some(measured) => (0..self.grid.horizon_steps)
                    .map(|t| {
                        let at = self.grid.timestamp(t);
                        measured.get(&at).copied().ok_or_else(|| {
                            Error::Input(format!(
                                "irradiance override for tile {} has no value at {at}",
                                tile.id()
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?,
                None => solar_tile_irradiance(tile, &self.grid, self.exposition, self.utc_offset_hours),
            };
            self.tiles.insert(tile, series);
        }
        Ok(&self.tiles[&tile])
    }
}
