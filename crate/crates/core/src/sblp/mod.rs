//! Choice-based airline revenue management: attraction-model purchase
//! probabilities, the sales-based LP, and the flight-selection MILP built on it.

mod load;

pub use load::{load_gam_instance, parse_od, LoadOptions, ShadowMode, TimeWindow, DEMAND_FILE, FLIGHT_FILE, SHADOW_FILE, ATTRACTION_FILE};

use crate::model::{Constraint, LinearExpr, LinearModel, ObjSense, RowSense, Variable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SblpError {
    #[error("{file}: {msg}")]
    Data { file: String, msg: String },
    #[error("missing input file {0}")]
    MissingFile(String),
    #[error("option {option} has attraction {v}; must be positive")]
    NonPositiveAttraction { option: String, v: f64 },
    #[error("option {option}: shadow {w} outside [0, {v}]")]
    BadShadow { option: String, v: f64, w: f64 },
    #[error("segment {0}: no-purchase attraction must be positive")]
    BadNoPurchase(String),
    #[error("no options selected")]
    EmptySelection,
    #[error("unknown option index {0}")]
    UnknownOption(usize),
    #[error("no capacity for flight {0}")]
    MissingCapacity(String),
    #[error("segment {0}: an option has w = v, so no finite big-M follows from the data; supply one")]
    NoBigM(String),
    #[error("cardinality Z must be at least 1")]
    ZeroCardinality,
    #[error("unknown flight {0}")]
    UnknownFlight(String),
}

/// Customers of one origin-destination pair on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub origin: String,
    pub destination: String,
    /// Aggregate demand Λ, purchasing and non-purchasing.
    pub demand: f64,
    /// No-purchase attraction v0.
    pub v0: f64,
}

impl Segment {
    pub fn label(&self) -> String {
        format!("({},{})", self.origin, self.destination)
    }

    fn ident(&self) -> String {
        format!("{}{}", ident(&self.origin), ident(&self.destination))
    }
}

/// One fare type on one departure of a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOption {
    pub segment: usize,
    pub departure: String,
    pub fare: String,
    pub price: f64,
    /// Attraction v.
    pub v: f64,
    /// Shadow attraction w, in `[0, v]`.
    pub w: f64,
    /// Capacity units one sale consumes.
    pub consumption: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlightKey {
    pub segment: usize,
    pub departure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamInstance {
    pub segments: Vec<Segment>,
    pub options: Vec<ProductOption>,
    /// Seat capacity c per flight.
    pub capacity: BTreeMap<FlightKey, f64>,
}

fn ident(s: &str) -> String {
    s.chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

impl GamInstance {
    pub fn validate(&self) -> Result<(), SblpError> {
        for s in &self.segments {
            if !(s.v0 > 0.0) {
                return Err(SblpError::BadNoPurchase(s.label()));
            }
        }
        for (i, o) in self.options.iter().enumerate() {
            if o.segment >= self.segments.len() {
                return Err(SblpError::UnknownOption(i));
            }
            if !(o.v > 0.0) {
                return Err(SblpError::NonPositiveAttraction { option: self.option_label(i), v: o.v });
            }
            if !(0.0..=o.v).contains(&o.w) {
                return Err(SblpError::BadShadow { option: self.option_label(i), v: o.v, w: o.w });
            }
        }
        Ok(())
    }

    pub fn option_label(&self, i: usize) -> String {
        let o = &self.options[i];
        format!("{} {} {}", self.segments[o.segment].label(), o.departure, o.fare)
    }

    pub fn flight_label(&self, f: &FlightKey) -> String {
        format!("{} {}", self.segments[f.segment].label(), f.departure)
    }

    /// Selection binary of `f` in the network-planning model.
    pub fn flight_var(&self, f: &FlightKey) -> String {
        y_name(self, f)
    }

    pub fn flight_of(&self, i: usize) -> FlightKey {
        let o = &self.options[i];
        FlightKey { segment: o.segment, departure: o.departure.clone() }
    }

    /// Distinct flights in first-appearance order.
    pub fn flights(&self) -> Vec<FlightKey> {
        let mut seen = BTreeSet::new();
        (0..self.options.len()).map(|i| self.flight_of(i)).filter(|f| seen.insert(f.clone())).collect()
    }

    pub fn airports(&self) -> BTreeSet<String> {
        self.segments.iter().flat_map(|s| [s.origin.clone(), s.destination.clone()]).collect()
    }

    pub fn segment_index(&self, origin: &str, destination: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.origin == origin && s.destination == destination)
    }

    /// Flight by OD and departure time.
    pub fn flight(&self, origin: &str, destination: &str, departure: &str) -> Result<FlightKey, SblpError> {
        let unknown = || SblpError::UnknownFlight(format!("({origin},{destination}) {departure}"));
        let segment = self.segment_index(origin, destination).ok_or_else(unknown)?;
        let f = FlightKey { segment, departure: departure.to_string() };
        if self.options.iter().any(|o| o.segment == segment && o.departure == departure) {
            Ok(f)
        } else {
            Err(unknown())
        }
    }

    /// Indices of every option on the given flights.
    pub fn options_on(&self, flights: &[FlightKey]) -> Vec<usize> {
        let set: BTreeSet<&FlightKey> = flights.iter().collect();
        (0..self.options.len()).filter(|&i| set.contains(&self.flight_of(i))).collect()
    }

    /// ṽ0 = v0 + Σ w over every option of the segment.
    pub fn adjusted_no_purchase(&self, segment: usize) -> f64 {
        self.segments[segment].v0 + self.options.iter().filter(|o| o.segment == segment).map(|o| o.w).sum::<f64>()
    }

    /// Purchase probabilities within `segment` when `offered` (option indices) are on sale.
    pub fn probabilities(&self, segment: usize, offered: &[usize]) -> Result<GamProbs, SblpError> {
        let members: Vec<usize> = (0..self.options.len()).filter(|&i| self.options[i].segment == segment).collect();
        let vw: Vec<(f64, f64)> = members.iter().map(|&i| (self.options[i].v, self.options[i].w)).collect();
        let local = offered
            .iter()
            .map(|i| members.iter().position(|m| m == i).ok_or(SblpError::UnknownOption(*i)))
            .collect::<Result<Vec<_>, _>>()?;
        gam_probabilities(self.segments[segment].v0, &vw, &local)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamProbs {
    /// One entry per offered option, in the order given.
    pub pi: Vec<f64>,
    pub pi0: f64,
}

/// `options` holds `(v, w)` for every product of the segment; `offered` indexes into it.
/// π_h = v_h / (ṽ0 + Σ_{S} (v − w)) with ṽ0 = v0 + Σ_N w, and π0 = 1 − Σ π_h.
pub fn gam_probabilities(v0: f64, options: &[(f64, f64)], offered: &[usize]) -> Result<GamProbs, SblpError> {
    if !(v0 > 0.0) {
        return Err(SblpError::BadNoPurchase("segment".into()));
    }
    for (k, &(v, w)) in options.iter().enumerate() {
        if !(v > 0.0) {
            return Err(SblpError::NonPositiveAttraction { option: k.to_string(), v });
        }
        if !(0.0..=v).contains(&w) {
            return Err(SblpError::BadShadow { option: k.to_string(), v, w });
        }
    }
    let v0_adj = v0 + options.iter().map(|o| o.1).sum::<f64>();
    let mut denom = v0_adj;
    for &h in offered {
        let (v, w) = *options.get(h).ok_or(SblpError::UnknownOption(h))?;
        denom += v - w;
    }
    let pi: Vec<f64> = offered.iter().map(|&h| options[h].0 / denom).collect();
    let pi0 = 1.0 - pi.iter().sum::<f64>();
    Ok(GamProbs { pi, pi0 })
}

fn x_name(inst: &GamInstance, i: usize) -> String {
    let o = &inst.options[i];
    format!("x_{}_{}_{}", inst.segments[o.segment].ident(), ident(&o.departure), ident(&o.fare))
}

fn x0_name(inst: &GamInstance, l: usize) -> String {
    format!("x0_{}", inst.segments[l].ident())
}

fn y_name(inst: &GamInstance, f: &FlightKey) -> String {
    format!("y_{}_{}", inst.segments[f.segment].ident(), ident(&f.departure))
}

/// Sales-based LP over the selected options. Segments without a selected option are left out.
pub fn build_sblp(inst: &GamInstance, selected: &[usize]) -> Result<LinearModel, SblpError> {
    inst.validate()?;
    if selected.is_empty() {
        return Err(SblpError::EmptySelection);
    }
    let mut sel: Vec<usize> = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    if let Some(&bad) = sel.iter().find(|&&i| i >= inst.options.len()) {
        return Err(SblpError::UnknownOption(bad));
    }
    let segments: BTreeSet<usize> = sel.iter().map(|&i| inst.options[i].segment).collect();

    let mut m = LinearModel::new(ObjSense::Maximize);
    m.metadata.insert("problem_type".into(), "SBLP".into());
    for &i in &sel {
        m.add_variable(Variable::continuous(x_name(inst, i)));
        m.objective.terms.push((inst.options[i].price, x_name(inst, i)));
    }
    for &l in &segments {
        m.add_variable(Variable::continuous(x0_name(inst, l)));
    }

    // capacity, one row per flight
    let mut flights: Vec<FlightKey> = Vec::new();
    for &i in &sel {
        let f = inst.flight_of(i);
        if !flights.contains(&f) {
            flights.push(f);
        }
    }
    for f in &flights {
        let c = *inst.capacity.get(f).ok_or_else(|| SblpError::MissingCapacity(inst.flight_label(f)))?;
        let mut e = LinearExpr::new();
        for &i in sel.iter().filter(|&&i| inst.flight_of(i) == *f) {
            e = e.term(inst.options[i].consumption, x_name(inst, i));
        }
        let name = format!("cap_{}_{}", inst.segments[f.segment].ident(), ident(&f.departure));
        m.add_constraint(Constraint::new(name, e, RowSense::Le, c));
    }

    // balance, one row per segment
    for &l in &segments {
        let s = &inst.segments[l];
        let mut e = LinearExpr::new().term(inst.adjusted_no_purchase(l) / s.v0, x0_name(inst, l));
        for &i in sel.iter().filter(|&&i| inst.options[i].segment == l) {
            let o = &inst.options[i];
            e = e.term((o.v - o.w) / o.v, x_name(inst, i));
        }
        m.add_constraint(Constraint::new(format!("bal_{}", s.ident()), e, RowSense::Eq, s.demand));
    }

    // scale, one row per option
    for &i in &sel {
        let o = &inst.options[i];
        let s = &inst.segments[o.segment];
        let e = LinearExpr::new().term(1.0 / o.v, x_name(inst, i)).term(-1.0 / s.v0, x0_name(inst, o.segment));
        m.add_constraint(Constraint::new(format!("scale_{}", &x_name(inst, i)[2..]), e, RowSense::Le, 0.0));
    }
    Ok(m)
}

/// Upper bound on any option's sales in `segment`: Λ · max(1, max_h v_h / ṽ_h).
///
/// The balance row gives (ṽ_h/v_h)·x_h ≤ Λ for every option, so x_h ≤ Λ·v_h/ṽ_h.
/// An option with w = v has ṽ = 0 and the bound is unavailable; `fallback` is used then.
pub fn choose_big_m(inst: &GamInstance, segment: usize, fallback: Option<f64>) -> Result<f64, SblpError> {
    let opts: Vec<&ProductOption> = inst.options.iter().filter(|o| o.segment == segment).collect();
    let lambda = inst.segments[segment].demand;
    if opts.iter().any(|o| o.v - o.w <= 0.0) {
        return fallback.ok_or_else(|| SblpError::NoBigM(inst.segments[segment].label()));
    }
    let ratio = opts.iter().map(|o| o.v / (o.v - o.w)).fold(1.0, f64::max);
    Ok(lambda * ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BigM {
    /// Per option, the smaller of [`choose_big_m`] for its segment and seat capacity over
    /// consumption. `fallback` stands in for the segment bound when it does not exist.
    Auto { fallback: Option<f64> },
    Fixed(f64),
}

impl Default for BigM {
    fn default() -> Self {
        BigM::Auto { fallback: None }
    }
}

/// SBLP over every option on the candidate flights plus flight-selection binaries:
/// `x ≤ M·y`, at most `z` flights, and equal inbound and outbound selections at each airport.
pub fn build_network_planning(
    inst: &GamInstance,
    candidates: &[FlightKey],
    z: usize,
    big_m: BigM,
) -> Result<LinearModel, SblpError> {
    if z == 0 {
        return Err(SblpError::ZeroCardinality);
    }
    let mut flights: Vec<FlightKey> = Vec::new();
    for f in candidates {
        if !flights.contains(f) {
            flights.push(f.clone());
        }
    }
    let sel = inst.options_on(&flights);
    for f in &flights {
        if !sel.iter().any(|&i| inst.flight_of(i) == *f) {
            return Err(SblpError::UnknownFlight(format!("segment {} {}", f.segment, f.departure)));
        }
    }
    let mut m = build_sblp(inst, &sel)?;
    m.metadata.insert("problem_type".into(), "SBLP-NP".into());

    let mut seg_m: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    for f in &flights {
        m.add_variable(Variable::binary(y_name(inst, f)));
        let cap = inst.capacity.get(f).copied();
        for &i in sel.iter().filter(|&&i| inst.flight_of(i) == *f) {
            let big = match big_m {
                BigM::Fixed(v) => v,
                BigM::Auto { fallback } => {
                    let seg = match seg_m.get(&f.segment) {
                        Some(v) => *v,
                        None => {
                            let v = match choose_big_m(inst, f.segment, fallback) {
                                Ok(v) => Some(v),
                                Err(SblpError::NoBigM(_)) => None,
                                Err(e) => return Err(e),
                            };
                            seg_m.insert(f.segment, v);
                            v
                        }
                    };
                    // the capacity row alone caps sales at c / A
                    let by_cap = cap.map(|c| c / inst.options[i].consumption);
                    match (seg, by_cap) {
                        (Some(a), Some(b)) => a.min(b),
                        (Some(a), None) | (None, Some(a)) => a,
                        (None, None) => return Err(SblpError::NoBigM(inst.segments[f.segment].label())),
                    }
                }
            };
            let e = LinearExpr::new().term(1.0, x_name(inst, i)).term(-big, y_name(inst, f));
            m.add_constraint(Constraint::new(format!("bigm_{}", &x_name(inst, i)[2..]), e, RowSense::Le, 0.0));
        }
    }
    let card = LinearExpr::from_terms(flights.iter().map(|f| (1.0, y_name(inst, f))));
    m.add_constraint(Constraint::new("card", card, RowSense::Le, z as f64));

    for o in inst.airports() {
        let mut e = LinearExpr::new();
        for f in &flights {
            let s = &inst.segments[f.segment];
            if s.destination == o {
                e = e.term(1.0, y_name(inst, f));
            }
            if s.origin == o {
                e = e.term(-1.0, y_name(inst, f));
            }
        }
        if !e.terms.is_empty() {
            m.add_constraint(Constraint::new(format!("flow_{}", ident(&o)), e, RowSense::Eq, 0.0));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_milp;

    fn one_segment(w: f64) -> GamInstance {
        let seg = Segment { origin: "A".into(), destination: "B".into(), demand: 100.0, v0: 1.0 };
        let opt = |fare: &str, price, v, cons| ProductOption {
            segment: 0,
            departure: "08:00".into(),
            fare: fare.into(),
            price,
            v,
            w,
            consumption: cons,
        };
        let mut capacity = BTreeMap::new();
        capacity.insert(FlightKey { segment: 0, departure: "08:00".into() }, 30.0);
        GamInstance { segments: vec![seg], options: vec![opt("Eco-flexi", 300.0, 0.5, 2.0), opt("Eco-lite", 100.0, 1.0, 1.0)], capacity }
    }

    #[test]
    fn mnl_reduction() {
        let p = gam_probabilities(1.0, &[(2.0, 0.0)], &[0]).unwrap();
        assert!((p.pi[0] - 2.0 / 3.0).abs() < 1e-15 && (p.pi0 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(gam_probabilities(1.0, &[(2.0, 0.5)], &[]).unwrap().pi0, 1.0);
        assert!(gam_probabilities(1.0, &[(2.0, 2.5)], &[0]).is_err());
        assert!(gam_probabilities(1.0, &[(0.0, 0.0)], &[0]).is_err());
    }

    #[test]
    fn single_option_balance_is_plain_sum() {
        let inst = one_segment(0.0);
        let m = build_sblp(&inst, &[1]).unwrap();
        let bal = m.constraints.iter().find(|c| c.name == "bal_AB").unwrap();
        let mut coefs: Vec<f64> = bal.expr.terms.iter().map(|t| t.0).collect();
        coefs.sort_by(f64::total_cmp);
        assert_eq!(coefs, vec![1.0, 1.0]);
        assert_eq!(bal.rhs, 100.0);
    }

    #[test]
    fn structure_counts_and_capacity_coefficients() {
        let inst = one_segment(0.1);
        let m = build_sblp(&inst, &[0, 1]).unwrap();
        assert_eq!(m.variables.len(), 2 + 1);
        assert_eq!(m.constraints.len(), 1 + 1 + 2);
        let cap = &m.constraints[0];
        assert_eq!(cap.expr.terms.iter().map(|t| t.0).collect::<Vec<_>>(), vec![2.0, 1.0]);
        assert!(matches!(build_sblp(&inst, &[]), Err(SblpError::EmptySelection)));
        assert!(solve_milp(&m).unwrap().has_point());
    }

    #[test]
    fn big_m_rules() {
        assert_eq!(choose_big_m(&one_segment(0.0), 0, None).unwrap(), 100.0);
        let mut inst = one_segment(0.0);
        inst.options[0].w = inst.options[0].v;
        assert!(matches!(choose_big_m(&inst, 0, None), Err(SblpError::NoBigM(_))));
        assert_eq!(choose_big_m(&inst, 0, Some(1e6)).unwrap(), 1e6);
        // max(0.5 / 0.4, 1.0 / 0.9)
        let inst = one_segment(0.1);
        assert!((choose_big_m(&inst, 0, None).unwrap() - 125.0).abs() < 1e-9);
    }
}
