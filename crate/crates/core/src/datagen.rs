//! Parameter-imputation generators used when authoring benchmark instances.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use thiserror::Error;

pub const EARTH_RADIUS_MILES: f64 = 3958.7613;
pub const DEFAULT_SETUP_RANGE: (i64, i64) = (10_000, 50_000);
pub const NRM_HEADERS: [&str; 4] = ["Product Name", "Revenue", "Demand", "Initial Inventory"];

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("units sold must be nonnegative, got {units} for {product:?}")]
    NegativeUnits { product: String, units: i64 },
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    BadCoordinate { lat: f64, lon: f64 },
    #[error("need at least 2 locations, got {0}")]
    TooFewLocations(usize),
    #[error("cost_per_mile is empty")]
    NoUnitCosts,
    #[error("bad range: {lo} > {hi}")]
    BadRange { lo: i64, hi: i64 },
    #[error("unsupported rng algorithm {0:?}")]
    Algorithm(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Seed plus generator family. Stream `k` of the same spec is always the same sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    #[serde(default = "RngSpec::default_algorithm")]
    pub algorithm: String,
}

impl RngSpec {
    pub const CHACHA8: &'static str = "chacha8";

    fn default_algorithm() -> String {
        Self::CHACHA8.into()
    }

    pub fn new(seed: u64) -> Self {
        RngSpec { seed, algorithm: Self::default_algorithm() }
    }

    /// Independent stream `stream` of this spec.
    pub fn rng(&self, stream: u64) -> Result<ChaCha8Rng, DatagenError> {
        if self.algorithm != Self::CHACHA8 {
            return Err(DatagenError::Algorithm(self.algorithm.clone()));
        }
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        Ok(r)
    }
}

impl Default for RngSpec {
    fn default() -> Self {
        RngSpec::new(42)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesRow {
    pub product: String,
    pub units_sold: i64,
    pub unit_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrmRow {
    pub product: String,
    pub revenue: f64,
    pub demand: i64,
    pub initial_inventory: i64,
}

pub fn round_up_to_multiple_of_10(x: f64) -> i64 {
    ((x / 10.0).ceil() * 10.0) as i64
}

/// Demand is `ceil(u * k)` with `k ~ U(1.2, 1.5)`; inventory is `10u` rounded up to a multiple of 10.
pub fn gen_nrm(rows: &[SalesRow], spec: &RngSpec) -> Result<Vec<NrmRow>, DatagenError> {
    let mut rng = spec.rng(0)?;
    rows.iter()
        .map(|r| {
            if r.units_sold < 0 {
                return Err(DatagenError::NegativeUnits { product: r.product.clone(), units: r.units_sold });
            }
            let u = r.units_sold as f64;
            let k: f64 = rng.random_range(1.2..1.5);
            Ok(NrmRow {
                product: r.product.clone(),
                revenue: r.unit_price,
                demand: (u * k).ceil() as i64,
                initial_inventory: round_up_to_multiple_of_10(u * 10.0),
            })
        })
        .collect()
}

pub fn write_nrm_csv(rows: &[NrmRow], out: impl Write) -> Result<(), DatagenError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NRM_HEADERS)?;
    for r in rows {
        w.write_record([
            r.product.clone(),
            r.revenue.to_string(),
            r.demand.to_string(),
            r.initial_inventory.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    fn check(self) -> Result<Self, DatagenError> {
        if (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon) {
            Ok(self)
        } else {
            Err(DatagenError::BadCoordinate { lat: self.lat, lon: self.lon })
        }
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_MILES`].
pub fn haversine_miles(a: LatLon, b: LatLon) -> Result<f64, DatagenError> {
    let (a, b) = (a.check()?, b.check()?);
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    pub at: LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpCosts {
    pub suppliers: Vec<String>,
    pub customers: Vec<String>,
    /// `costs[i][j]` is supplier `i` to customer `j`.
    pub costs: Vec<Vec<f64>>,
}

/// Shuffles the locations, takes the first half as suppliers and the rest as customers,
/// and prices every lane at distance times a unit cost drawn from `cost_per_mile`.
pub fn gen_tp_costs(locations: &[Location], cost_per_mile: &[f64], spec: &RngSpec) -> Result<TpCosts, DatagenError> {
    if locations.len() < 2 {
        return Err(DatagenError::TooFewLocations(locations.len()));
    }
    if cost_per_mile.is_empty() {
        return Err(DatagenError::NoUnitCosts);
    }
    for l in locations {
        l.at.check()?;
    }
    let mut rng = spec.rng(0)?;
    let mut order: Vec<&Location> = locations.iter().collect();
    order.shuffle(&mut rng);
    let (sup, cus) = order.split_at(order.len() / 2);
    let mut costs = Vec::with_capacity(sup.len());
    for s in sup {
        let mut row = Vec::with_capacity(cus.len());
        for c in cus {
            let unit = *cost_per_mile.choose(&mut rng).expect("nonempty");
            row.push(haversine_miles(s.at, c.at)? * unit);
        }
        costs.push(row);
    }
    Ok(TpCosts {
        suppliers: sup.iter().map(|l| l.name.clone()).collect(),
        customers: cus.iter().map(|l| l.name.clone()).collect(),
        costs,
    })
}

impl TpCosts {
    /// Cost matrix CSV: first column `Supplier`, one column per customer.
    pub fn write_csv(&self, out: impl Write) -> Result<(), DatagenError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["Supplier".to_string()];
        header.extend(self.customers.iter().cloned());
        w.write_record(&header)?;
        for (s, row) in self.suppliers.iter().zip(&self.costs) {
            let mut rec = vec![s.clone()];
            rec.extend(row.iter().map(|c| format!("{c:.2}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Demand per customer column, in column order. Customers with no demand entry are
/// dropped and reported in the second return value.
pub fn customer_demand(customers: &[String], demand: &[(String, f64)]) -> (Vec<(String, f64)>, Vec<String>) {
    let by_region: HashMap<&str, f64> = demand.iter().map(|(r, d)| (r.as_str(), *d)).collect();
    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    for c in customers {
        match by_region.get(c.as_str()) {
            Some(d) => kept.push((c.clone(), *d)),
            None => warnings.push(format!("no demand row for region {c:?}; dropped")),
        }
    }
    (kept, warnings)
}

/// `n` independent uniform integers in `[lo, hi]`.
pub fn gen_flp_setup_costs(n: usize, range: (i64, i64), spec: &RngSpec) -> Result<Vec<i64>, DatagenError> {
    let (lo, hi) = range;
    if lo > hi {
        return Err(DatagenError::BadRange { lo, hi });
    }
    let mut rng = spec.rng(0)?;
    Ok((0..n).map(|_| rng.random_range(lo..=hi)).collect())
}
