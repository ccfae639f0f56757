mod common;

use common::{close, data_dir, random_gam_instance};
use leanopt::sblp::{
    build_network_planning, build_sblp, gam_probabilities, load_gam_instance, BigM, FlightKey, GamInstance,
    LoadOptions, SblpError, ShadowMode,
};
use leanopt::solver::{brute_force, solve_milp, IntBox, Status};
use proptest::prelude::*;

fn air(consumption: &[(&str, f64)]) -> GamInstance {
    let opts = LoadOptions {
        consumption: consumption.iter().map(|(f, c)| (f.to_string(), *c)).collect(),
        ..LoadOptions::default()
    };
    load_gam_instance(data_dir("sblp/air"), &opts).unwrap()
}

fn flights(inst: &GamInstance, list: &[(&str, &str, &str)]) -> Vec<FlightKey> {
    list.iter().map(|(o, d, t)| inst.flight(o, d, t).unwrap()).collect()
}

const CA_FLIGHTS: [(&str, &str, &str); 7] = [
    ("A", "C", "23:00"),
    ("A", "C", "19:05"),
    ("B", "A", "15:40"),
    ("B", "A", "18:50"),
    ("C", "A", "16:55"),
    ("B", "A", "09:05"),
    ("C", "A", "07:40"),
];

const NP_FLIGHTS: [(&str, &str, &str); 17] = [
    ("B", "A", "06:25"),
    ("A", "B", "06:40"),
    ("C", "A", "07:40"),
    ("A", "B", "07:55"),
    ("C", "A", "08:15"),
    ("B", "A", "09:05"),
    ("A", "C", "09:45"),
    ("A", "B", "11:20"),
    ("B", "A", "15:40"),
    ("C", "A", "16:55"),
    ("A", "B", "17:05"),
    ("A", "C", "17:25"),
    ("C", "A", "18:30"),
    ("B", "A", "18:50"),
    ("A", "C", "19:05"),
    ("A", "B", "19:10"),
    ("B", "A", "20:25"),
];

#[test]
fn od_demand_loads_as_lambda() {
    let inst = air(&[]);
    let lambda = |o, d| inst.segments[inst.segment_index(o, d).unwrap()].demand;
    assert_eq!(lambda("A", "B"), 38965.86);
    assert_eq!(lambda("B", "A"), 33210.71);
    assert_eq!(lambda("A", "C"), 4812.5);
    assert_eq!(lambda("C", "A"), 4807.43);
    assert!(inst.segments.iter().all(|s| s.v0 == 1.0));
    assert_eq!(inst.flights().len(), 19);
}

#[test]
fn time_windows_pick_attraction_columns() {
    let inst = air(&[]);
    let find = |o: &str, d: &str, t: &str, fare: &str| {
        let l = inst.segment_index(o, d).unwrap();
        inst.options.iter().find(|x| x.segment == l && x.departure == t && x.fare == fare).unwrap().clone()
    };
    // 11:20 falls in 8am-12pm, 17:05 in 12-6pm, 23:00 in 10pm-8am
    let ab = find("A", "B", "11:20", "Eco-lite");
    assert_eq!((ab.v, ab.w, ab.price), (0.24677, 0.0, 429.26));
    assert_eq!(find("A", "B", "11:20", "Eco-flexi").price, 1140.3);
    assert_eq!(find("A", "B", "17:05", "Eco-flexi").v, 0.063743);
    assert_eq!(find("C", "A", "16:55", "Eco-flexi").w, 0.026869);
    assert_eq!(find("B", "A", "09:05", "Eco-lite").w, 0.044375);
    assert_eq!(find("A", "B", "06:40", "Eco-lite").w, 0.104684);
}

#[test]
fn published_single_option_probabilities_normalize() {
    let inst = air(&[]);
    let l = inst.segment_index("A", "B").unwrap();
    let h = inst.options.iter().position(|o| o.segment == l && o.departure == "17:05" && o.fare == "Eco-flexi").unwrap();
    assert_eq!((inst.options[h].v, inst.options[h].w), (0.063743, 0.0));
    let p = inst.probabilities(l, &[h]).unwrap();
    assert!((p.pi[0] - 0.063743 / (inst.adjusted_no_purchase(l) + 0.063743)).abs() < 1e-15);
    assert!((p.pi0 + p.pi[0] - 1.0).abs() < 1e-12);
}

#[test]
fn capacity_allocation_query_structure() {
    let inst = air(&[("Eco-flexi", 2.0), ("Eco-lite", 1.0)]);
    let fl = flights(&inst, &CA_FLIGHTS);
    let sel = inst.options_on(&fl);
    assert_eq!(sel.len(), 14);
    let m = build_sblp(&inst, &sel).unwrap();
    let segs = 3; // (A,C), (B,A), (C,A)
    assert_eq!(m.variables.len(), sel.len() + segs);
    assert_eq!(m.constraints.len(), fl.len() + segs + sel.len());
    for c in m.constraints.iter().filter(|c| c.name.starts_with("cap_")) {
        assert_eq!(c.expr.terms.iter().map(|t| t.0).collect::<Vec<_>>(), vec![2.0, 1.0], "{}", c.name);
    }
    let s = solve_milp(&m).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!(m.max_violation(&s.values) < 1e-6);
}

#[test]
fn network_planning_query_honours_z_and_consumption() {
    let inst = air(&[("Eco-flexi", 3.1), ("Eco-lite", 1.0)]);
    let fl = flights(&inst, &NP_FLIGHTS);
    let m = build_network_planning(&inst, &fl, 9, BigM::default()).unwrap();
    let card = m.constraints.iter().find(|c| c.name == "card").unwrap();
    assert_eq!((card.rhs, card.expr.terms.len()), (9.0, 17));
    let cap = m.constraints.iter().find(|c| c.name.starts_with("cap_")).unwrap();
    assert_eq!(cap.expr.terms.iter().map(|t| t.0).collect::<Vec<_>>(), vec![3.1, 1.0]);
    assert_eq!(m.constraints.iter().filter(|c| c.name.starts_with("flow_")).count(), 3);

    let s = solve_milp(&m).unwrap();
    assert_eq!(s.status, Status::Optimal);
    let chosen: Vec<&String> = s.values.iter().filter(|(k, v)| k.starts_with("y_") && **v > 0.5).map(|(k, _)| k).collect();
    assert!(chosen.len() <= 9 && !chosen.is_empty());
    assert!(m.max_violation(&s.values) < 1e-6);
    // never better than offering every candidate
    let full = solve_milp(&build_sblp(&inst, &inst.options_on(&fl)).unwrap()).unwrap();
    assert!(s.objective <= full.objective * (1.0 + 1e-4));
}

#[test]
fn missing_shadow_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["flight.csv", "od_demand.csv", "v1.csv"] {
        std::fs::copy(data_dir("sblp/air").join(f), dir.path().join(f)).unwrap();
    }
    let e = load_gam_instance(dir.path(), &LoadOptions::default()).unwrap_err();
    assert!(matches!(e, SblpError::MissingFile(_)));
    assert!(e.to_string().contains("v2.csv"), "{e}");
}

#[test]
fn ratio_mode_scales_shadow_by_attraction() {
    let abs = air(&[]);
    let ratio = load_gam_instance(data_dir("sblp/air"), &LoadOptions { shadow: ShadowMode::Ratio, ..Default::default() }).unwrap();
    for (a, r) in abs.options.iter().zip(&ratio.options) {
        assert!((r.w - a.w * a.v).abs() < 1e-15);
    }
}

#[test]
fn triangle_pairs_under_flow_conservation() {
    // A<->B and A<->C, one departure each; Z = 2 can only pick a round trip
    let mut inst = random_gam_instance(3);
    inst.options.retain(|o| o.departure.starts_with("06") || o.departure.starts_with("07"));
    inst.capacity.retain(|f, _| f.departure.starts_with("06") || f.departure.starts_with("07"));
    let fl = inst.flights();
    assert_eq!(fl.len(), 4);
    let m = build_network_planning(&inst, &fl, 2, BigM::default()).unwrap();
    let mut bx = IntBox::new();
    for v in m.variables.iter().filter(|v| v.name.starts_with("y_")) {
        bx = bx.with(v.name.clone(), 0, 1);
    }
    let b = brute_force(&m, &bx).unwrap();
    let s = solve_milp(&m).unwrap();
    assert!(close(b.objective, s.objective, 1e-6), "{} vs {}", b.objective, s.objective);
    let on = |n: &str| b.values[n] > 0.5;
    let (ab, ba, ac, ca) = (on("y_AB_0600"), on("y_BA_0705"), on("y_AC_0610"), on("y_CA_0715"));
    assert_eq!(ab, ba);
    assert_eq!(ac, ca);
    assert!(!(ab && ac), "Z = 2 admits only one round trip");
    assert!(ab || ac);
}

#[test]
fn big_m_cap_does_not_cut_optimum() {
    for seed in 0..8 {
        let inst = random_gam_instance(100 + seed);
        let fl = inst.flights();
        let z = fl.len() / 2;
        let auto = solve_milp(&build_network_planning(&inst, &fl, z.max(1), BigM::default()).unwrap()).unwrap();
        let loose = solve_milp(&build_network_planning(&inst, &fl, z.max(1), BigM::Fixed(1e4)).unwrap()).unwrap();
        assert!(close(auto.objective, loose.objective, 1e-4), "seed {seed}: {} vs {}", auto.objective, loose.objective);
    }
}

#[test]
fn relaxation_identity_on_random_networks() {
    for seed in 0..20 {
        let inst = random_gam_instance(seed);
        let fl = inst.flights();
        let sblp = solve_milp(&build_sblp(&inst, &inst.options_on(&fl)).unwrap()).unwrap();
        let np = solve_milp(&build_network_planning(&inst, &fl, fl.len(), BigM::default()).unwrap()).unwrap();
        assert_eq!((sblp.status, np.status), (Status::Optimal, Status::Optimal));
        let rel = (sblp.objective - np.objective).abs() / sblp.objective.abs().max(1.0);
        assert!(rel <= 1e-4, "seed {seed}: {} vs {}", sblp.objective, np.objective);
    }
}

fn gam_case() -> impl Strategy<Value = (f64, Vec<(f64, f64)>, Vec<usize>)> {
    (0.1f64..5.0, prop::collection::vec((0.01f64..5.0, 0.0f64..1.0), 0..12)).prop_flat_map(|(v0, raw)| {
        let opts: Vec<(f64, f64)> = raw.into_iter().map(|(v, r)| (v, v * r)).collect();
        let n = opts.len();
        (Just(v0), Just(opts), prop::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gam_probabilities_normalize((v0, opts, s) in gam_case()) {
        let p = gam_probabilities(v0, &opts, &s).unwrap();
        prop_assert!((p.pi0 + p.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // π0 from its own closed form: (ṽ0 − Σ_S w) / (ṽ0 + Σ_S ṽ)
        let v0t = v0 + opts.iter().map(|o| o.1).sum::<f64>();
        let den = v0t + s.iter().map(|&h| opts[h].0 - opts[h].1).sum::<f64>();
        let pi0 = (v0t - s.iter().map(|&h| opts[h].1).sum::<f64>()) / den;
        prop_assert!((p.pi0 - pi0).abs() <= 1e-12);
        prop_assert!(p.pi.iter().all(|&x| x >= 0.0) && p.pi0 >= -1e-12);
        if s.is_empty() {
            prop_assert_eq!(p.pi0, 1.0);
        }
    }

    #[test]
    fn adding_an_option_never_raises_others((v0, opts, s) in gam_case(), pick: prop::sample::Index) {
        let rest: Vec<usize> = (0..opts.len()).filter(|h| !s.contains(h)).collect();
        prop_assume!(!rest.is_empty());
        let extra = rest[pick.index(rest.len())];
        let before = gam_probabilities(v0, &opts, &s).unwrap();
        let mut s2 = s.clone();
        s2.push(extra);
        let after = gam_probabilities(v0, &opts, &s2).unwrap();
        for (a, b) in after.pi.iter().zip(&before.pi) {
            prop_assert!(*a <= *b + 1e-15);
        }
    }
}

#[test]
fn empty_offer_set_is_all_no_purchase() {
    let p = gam_probabilities(1.0, &[(0.3, 0.1), (0.2, 0.0)], &[]).unwrap();
    assert_eq!((p.pi.len(), p.pi0), (0, 1.0));
}
