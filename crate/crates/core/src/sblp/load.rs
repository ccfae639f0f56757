//! Reads a [`GamInstance`] from the four CSV inputs.
//!
//! | file | columns |
//! |---|---|
//! | `flight.csv` | `OD`, `Departure Time`, `Fare Type`, `Avg Price`, optional `Capacity`, optional `Capacity Coef` |
//! | `od_demand.csv` | `OD`, `Avg Pax` |
//! | `v1.csv` | `OD Pairs`, one `<fare>* (<window>)` column per fare and time window, `No Purchase` |
//! | `v2.csv` | `OD Pairs`, the same fare/window columns as `v1.csv` |
//!
//! ODs are written `(A,B)` or `('A', 'B')`. A window such as `10pm-8am` may wrap
//! midnight; a fare column without a window covers the whole day.

use super::{FlightKey, GamInstance, ProductOption, SblpError, Segment};
use crate::agents::parse_number;
use crate::retrieval::CsvTable;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FLIGHT_FILE: &str = "flight.csv";
pub const DEMAND_FILE: &str = "od_demand.csv";
pub const ATTRACTION_FILE: &str = "v1.csv";
pub const SHADOW_FILE: &str = "v2.csv";

/// How the shadow table is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowMode {
    /// Cells are w itself.
    #[default]
    Absolute,
    /// Cells are w / v.
    Ratio,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub shadow: ShadowMode,
    /// Capacity units per sale by fare type; overrides the `Capacity Coef` column.
    pub consumption: BTreeMap<String, f64>,
    /// Seats per flight when `flight.csv` has no `Capacity` column.
    pub default_capacity: Option<f64>,
}

/// Half-open span of minutes after midnight; `start > end` wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: u32,
    pub end: u32,
}

impl TimeWindow {
    pub const ALL_DAY: TimeWindow = TimeWindow { start: 0, end: 24 * 60 };

    pub fn contains(&self, minute: u32) -> bool {
        if self.start < self.end {
            (self.start..self.end).contains(&minute)
        } else {
            minute >= self.start || minute < self.end
        }
    }

    /// `12-6pm`, `8am-12pm`, `10pm-8am`, `6-10pm`. A bare first endpoint takes the second's suffix.
    pub fn parse(text: &str) -> Option<TimeWindow> {
        let (a, b) = text.trim().split_once('-')?;
        let split = |s: &str| {
            let s = s.trim().to_ascii_lowercase();
            let (num, suf) = match s.strip_suffix("am") {
                Some(n) => (n.trim().to_string(), Some(false)),
                None => match s.strip_suffix("pm") {
                    Some(n) => (n.trim().to_string(), Some(true)),
                    None => (s.clone(), None),
                },
            };
            let (h, m) = match num.split_once(':') {
                Some((h, m)) => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
                None => (num.parse::<u32>().ok()?, 0),
            };
            Some((h, m, suf))
        };
        let (ah, am, asuf) = split(a)?;
        let (bh, bm, bsuf) = split(b)?;
        let to_min = |h: u32, m: u32, pm: Option<bool>| -> Option<u32> {
            let h = match pm {
                None if h <= 24 => h % 24,
                Some(false) if (1..=12).contains(&h) => h % 12,
                Some(true) if (1..=12).contains(&h) => h % 12 + 12,
                _ => return None,
            };
            (m < 60).then_some(h * 60 + m)
        };
        let start = to_min(ah, am, asuf.or(bsuf))?;
        let end = to_min(bh, bm, bsuf)?;
        Some(TimeWindow { start, end })
    }
}

fn minute_of(departure: &str) -> Option<u32> {
    let (h, m) = departure.trim().split_once(':')?;
    let (h, m) = (h.trim().parse::<u32>().ok()?, m.trim().parse::<u32>().ok()?);
    (h < 24 && m < 60).then_some(h * 60 + m)
}

/// `(A,B)`, `('A', 'B')` or `A-B`.
pub fn parse_od(text: &str) -> Option<(String, String)> {
    let t = text.trim().trim_start_matches('(').trim_end_matches(')');
    let (a, b) = t.split_once(',').or_else(|| t.split_once('-'))?;
    let clean = |s: &str| s.trim().trim_matches(['\'', '"', '`', '‘', '’']).trim().to_string();
    let (a, b) = (clean(a), clean(b));
    (!a.is_empty() && !b.is_empty()).then_some((a, b))
}

struct Column {
    fare: String,
    window: TimeWindow,
    idx: usize,
}

fn fare_columns(t: &CsvTable, skip: &[usize]) -> Result<Vec<Column>, SblpError> {
    let mut out = Vec::new();
    for (idx, h) in t.headers.iter().enumerate() {
        if skip.contains(&idx) {
            continue;
        }
        let (fare, window) = match h.find('(') {
            Some(p) => {
                let w = h[p + 1..].trim_end().trim_end_matches(')');
                let window = TimeWindow::parse(w).ok_or_else(|| data(&t.name, format!("bad time window in column {h:?}")))?;
                (h[..p].trim(), window)
            }
            None => (h.trim(), TimeWindow::ALL_DAY),
        };
        out.push(Column { fare: fare.trim_end_matches('*').trim().to_string(), window, idx });
    }
    Ok(out)
}

fn data(file: &str, msg: impl Into<String>) -> SblpError {
    SblpError::Data { file: file.to_string(), msg: msg.into() }
}

fn read(dir: &Path, name: &str) -> Result<CsvTable, SblpError> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(SblpError::MissingFile(p.display().to_string()));
    }
    CsvTable::read(&p).map_err(|e| data(name, e.to_string()))
}

fn col(t: &CsvTable, names: &[&str]) -> Option<usize> {
    t.headers.iter().position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

fn need(t: &CsvTable, names: &[&str]) -> Result<usize, SblpError> {
    col(t, names).ok_or_else(|| data(&t.name, format!("missing column {:?}", names[0])))
}

fn num(t: &CsvTable, row: usize, c: usize) -> Result<f64, SblpError> {
    let cell = &t.rows[row][c];
    parse_number(cell).ok_or_else(|| data(&t.name, format!("row {}: {:?} in column {:?} is not a number", row + 1, cell, t.headers[c])))
}

/// Value of the column whose fare matches and whose window contains `minute`.
fn lookup(t: &CsvTable, cols: &[Column], row: usize, fare: &str, minute: u32) -> Result<f64, SblpError> {
    let hits: Vec<&Column> =
        cols.iter().filter(|c| c.fare.eq_ignore_ascii_case(fare) && c.window.contains(minute)).collect();
    match hits.as_slice() {
        [c] => num(t, row, c.idx),
        [] => Err(data(&t.name, format!("no column for fare {fare:?} at {:02}:{:02}", minute / 60, minute % 60))),
        _ => Err(data(&t.name, format!("overlapping windows for fare {fare:?} at {:02}:{:02}", minute / 60, minute % 60))),
    }
}

fn od_rows(t: &CsvTable, od_col: usize) -> Result<BTreeMap<(String, String), usize>, SblpError> {
    let mut out = BTreeMap::new();
    for (r, row) in t.rows.iter().enumerate() {
        let od = parse_od(&row[od_col]).ok_or_else(|| data(&t.name, format!("row {}: bad OD {:?}", r + 1, row[od_col])))?;
        out.insert(od, r);
    }
    Ok(out)
}

pub fn load_gam_instance(dir: impl AsRef<Path>, opts: &LoadOptions) -> Result<GamInstance, SblpError> {
    let dir = dir.as_ref();
    let flights = read(dir, FLIGHT_FILE)?;
    let demand = read(dir, DEMAND_FILE)?;
    let v1 = read(dir, ATTRACTION_FILE)?;
    let v2 = read(dir, SHADOW_FILE)?;

    let d_od = need(&demand, &["OD", "OD Pairs"])?;
    let d_pax = need(&demand, &["Avg Pax", "Demand"])?;
    let v1_od = need(&v1, &["OD Pairs", "OD"])?;
    let v1_np = col(&v1, &["No Purchase"]);
    let v2_od = need(&v2, &["OD Pairs", "OD"])?;
    let v1_cols = fare_columns(&v1, &[Some(v1_od), v1_np].into_iter().flatten().collect::<Vec<_>>())?;
    let v2_cols = fare_columns(&v2, &[v2_od])?;
    let v1_rows = od_rows(&v1, v1_od)?;
    let v2_rows = od_rows(&v2, v2_od)?;

    let mut segments = Vec::new();
    let mut seg_of = BTreeMap::new();
    for r in 0..demand.rows.len() {
        let od = parse_od(&demand.rows[r][d_od])
            .ok_or_else(|| data(DEMAND_FILE, format!("row {}: bad OD {:?}", r + 1, demand.rows[r][d_od])))?;
        let lambda = num(&demand, r, d_pax)?;
        if lambda < 0.0 {
            return Err(data(DEMAND_FILE, format!("row {}: negative demand", r + 1)));
        }
        let v0 = match (v1_np, v1_rows.get(&od)) {
            (Some(c), Some(&vr)) => num(&v1, vr, c)?,
            _ => 1.0,
        };
        seg_of.insert(od.clone(), segments.len());
        segments.push(Segment { origin: od.0, destination: od.1, demand: lambda, v0 });
    }

    let f_od = need(&flights, &["OD"])?;
    let f_dep = need(&flights, &["Departure Time", "Departure"])?;
    let f_fare = need(&flights, &["Fare Type", "Fare"])?;
    let f_price = need(&flights, &["Avg Price", "Price"])?;
    let f_cap = col(&flights, &["Capacity"]);
    let f_coef = col(&flights, &["Capacity Coef", "Flex Cpy Coef"]);

    let mut options = Vec::new();
    let mut capacity = BTreeMap::new();
    for r in 0..flights.rows.len() {
        let row = &flights.rows[r];
        let at = |m: String| data(FLIGHT_FILE, format!("row {}: {m}", r + 1));
        let od = parse_od(&row[f_od]).ok_or_else(|| at(format!("bad OD {:?}", row[f_od])))?;
        let segment = *seg_of.get(&od).ok_or_else(|| at(format!("OD {:?} missing from {DEMAND_FILE}", row[f_od])))?;
        let departure = row[f_dep].trim().to_string();
        let minute = minute_of(&departure).ok_or_else(|| at(format!("bad departure time {departure:?}")))?;
        let fare = row[f_fare].trim().to_string();
        let price = num(&flights, r, f_price)?;
        let consumption = match opts.consumption.iter().find(|(k, _)| k.eq_ignore_ascii_case(&fare)) {
            Some((_, c)) => *c,
            None => match f_coef {
                Some(c) => num(&flights, r, c)?,
                None => return Err(at(format!("no capacity coefficient for fare {fare:?}"))),
            },
        };
        let cap = match (f_cap, opts.default_capacity) {
            (Some(c), _) => num(&flights, r, c)?,
            (None, Some(c)) => c,
            (None, None) => return Err(at("no Capacity column and no default capacity".into())),
        };
        let key = FlightKey { segment, departure: departure.clone() };
        if let Some(prev) = capacity.insert(key, cap) {
            if prev != cap {
                return Err(at(format!("capacity {cap} disagrees with {prev} on another row of the same flight")));
            }
        }
        let vr = *v1_rows.get(&od).ok_or_else(|| data(ATTRACTION_FILE, format!("no row for OD {}", segments[segment].label())))?;
        let wr = *v2_rows.get(&od).ok_or_else(|| data(SHADOW_FILE, format!("no row for OD {}", segments[segment].label())))?;
        let v = lookup(&v1, &v1_cols, vr, &fare, minute)?;
        let raw_w = lookup(&v2, &v2_cols, wr, &fare, minute)?;
        let w = match opts.shadow {
            ShadowMode::Absolute => raw_w,
            ShadowMode::Ratio => raw_w * v,
        };
        options.push(ProductOption { segment, departure, fare, price, v, w, consumption });
    }
    let inst = GamInstance { segments, options, capacity };
    inst.validate()?;
    Ok(inst)
}
