use proptest::prelude::*;

use capflp::flow::{build_penalty_network, min_cost_flow, verify_optimality};
use capflp::instance::{generate_euclidean, CapacityProfile, GeneratorParams};
use capflp::oracle::{solution_for, verify_local_optimality};
use capflp::search::nonuniform::{knapsack, penalty_prefix_costs, MenuEntry};
use capflp::search::{improvement_threshold, ScaledCost};
use capflp::{assign, exact_optimum, local_search, CapacityMode, Instance, OpenSet, SearchParams, Variant};

fn instance_strategy(max_facilities: usize, max_clients: usize) -> impl Strategy<Value = Instance> {
    (
        1..=max_facilities,
        1..=max_clients,
        any::<u64>(),
        prop_oneof![
            (1i64..=15).prop_map(|capacity| CapacityProfile::Uniform { capacity }),
            (1i64..=15, 0i64..=10).prop_map(|(lo, w)| CapacityProfile::Random { lo, hi: lo + w }),
        ],
        1i64..=8,
    )
        .prop_map(|(n_facilities, n_clients, seed, capacity, demand_max)| {
            let params = GeneratorParams {
                n_facilities,
                n_clients,
                capacity,
                demand_max,
                ..GeneratorParams::default()
            };
            generate_euclidean(&params, seed).unwrap()
        })
}

fn variant_for(inst: &Instance) -> Variant {
    match inst.capacity_mode {
        CapacityMode::Uniform => Variant::Uniform,
        CapacityMode::Nonuniform => Variant::Nonuniform,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_instances_are_metric(inst in instance_strategy(5, 7)) {
        prop_assert!(inst.validate().ok);
        let c = &inst.service_cost;
        for i in 0..inst.num_facilities() {
            for ip in 0..inst.num_facilities() {
                for j in 0..inst.num_clients() {
                    for jp in 0..inst.num_clients() {
                        prop_assert!(c[i][j] <= c[i][jp] + c[ip][jp] + c[ip][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn generator_is_pure(seed in any::<u64>(), nf in 1usize..6, nc in 1usize..8) {
        let p = GeneratorParams { n_facilities: nf, n_clients: nc, ..GeneratorParams::default() };
        prop_assert_eq!(generate_euclidean(&p, seed).unwrap(), generate_euclidean(&p, seed).unwrap());
    }

    #[test]
    fn json_round_trips(inst in instance_strategy(5, 7)) {
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn inflated_cost_breaks_metric(inst in instance_strategy(4, 5), i in 0usize..4, j in 0usize..5) {
        prop_assume!(inst.num_facilities() >= 2 && inst.num_clients() >= 2);
        let (i, j) = (i % inst.num_facilities(), j % inst.num_clients());
        let mut bad = inst.clone();
        bad.service_cost[i][j] = 4 * inst.service_cost.iter().flatten().max().unwrap() + 1;
        prop_assert!(!bad.validate().ok);
    }

    #[test]
    fn assignments_are_feasible_and_certified(inst in instance_strategy(4, 6), mask in any::<u64>()) {
        let nf = inst.num_facilities();
        let open = OpenSet::from_mask(mask & ((1 << nf) - 1), nf);
        let a = assign(&inst, &open).unwrap();
        prop_assert!(a.check(&inst).is_ok());
        prop_assert!(a.cost_penalty <= inst.all_penalty_cost());
        prop_assert!(a.variable_cost() <= inst.all_penalty_cost());
        let pn = build_penalty_network(&inst, &open).unwrap();
        let flow = min_cost_flow(&pn.network).unwrap();
        prop_assert!(verify_optimality(&pn.network, &flow));
        prop_assert!(flow.certificate_holds(&pn.network));
    }

    #[test]
    fn free_facility_never_hurts(inst in instance_strategy(4, 6), mask in any::<u64>(), extra in 0usize..4) {
        let nf = inst.num_facilities();
        let open = OpenSet::from_mask(mask & ((1 << nf) - 1), nf);
        let extra = extra % nf;
        let mut free = inst.clone();
        free.facilities[extra].open_cost = 0;
        let before = assign(&free, &open).unwrap().total();
        let after = assign(&free, &open.with(extra)).unwrap().total();
        prop_assert!(after <= before);
    }

    #[test]
    fn knapsack_matches_enumeration(
        items in prop::collection::vec((0i64..8, -20i128..40), 0..10),
        budget in 0i64..25,
    ) {
        let (chosen, value) = knapsack(&items, budget);
        let weight: i64 = chosen.iter().map(|&k| items[k].0).sum();
        prop_assert!(weight <= budget);
        prop_assert_eq!(chosen.iter().map(|&k| items[k].1).sum::<ScaledCost>(), value);
        let best = (0u32..1 << items.len())
            .filter_map(|mask| {
                let picked = || items.iter().enumerate().filter(move |(k, _)| mask >> k & 1 == 1);
                (picked().map(|(_, it)| it.0).sum::<i64>() <= budget).then(|| picked().map(|(_, it)| it.1).sum::<ScaledCost>())
            })
            .max()
            .unwrap();
        prop_assert_eq!(value, best);
    }

    #[test]
    fn penalty_prefix_is_cheapest_multiset(
        raw in prop::collection::vec((0i128..50, 1i64..4), 0..6),
        max_units in 0i64..12,
    ) {
        let mut menu: Vec<MenuEntry> = raw
            .iter()
            .enumerate()
            .map(|(k, &(charge, units))| MenuEntry { charge, units, facility: k, client: 0 })
            .collect();
        menu.sort_by_key(|e| (e.charge, e.facility, e.client));
        let prefix = penalty_prefix_costs(&menu, max_units);
        let available: i64 = menu.iter().map(|e| e.units).sum();
        prop_assert_eq!(prefix.len() as i64, available.min(max_units) + 1);

        // Cheapest r units over every per-entry count vector.
        fn cheapest(menu: &[MenuEntry], r: i64) -> Option<ScaledCost> {
            match menu.split_first() {
                None => (r == 0).then_some(0),
                Some((e, rest)) => (0..=e.units.min(r))
                    .filter_map(|q| cheapest(rest, r - q).map(|c| c + e.charge * q as ScaledCost))
                    .min(),
            }
        }
        for (r, &cost) in prefix.iter().enumerate() {
            prop_assert_eq!(Some(cost), cheapest(&menu, r as i64));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_search_descends_to_certified_local_optimum(inst in instance_strategy(5, 7), eps in 0.001f64..0.5) {
        let variant = variant_for(&inst);
        let params = SearchParams { epsilon: eps, ..SearchParams::default() };
        let sol = local_search(&inst, &params, variant).unwrap();
        prop_assert!(sol.local_opt);
        prop_assert_eq!(sol.trace.len(), sol.iterations + 1);
        for w in sol.trace.windows(2) {
            let threshold = improvement_threshold(w[0], eps, inst.num_facilities());
            prop_assert!(w[0] - w[1] >= threshold);
        }
        prop_assert!(sol.assignment.check(&inst).is_ok());
        prop_assert_eq!(sol.total_cost, sol.assignment.total());
        prop_assert_eq!(assign(&inst, &sol.open_set).unwrap().total(), sol.total_cost);
        let report = verify_local_optimality(&inst, &sol, variant, &params).unwrap();
        prop_assert!(report.is_local_opt, "{:?}", report.violating_move);
        prop_assert_eq!(local_search(&inst, &params, variant).unwrap(), sol);
    }

    #[test]
    fn solver_sits_between_optimum_and_bound(inst in instance_strategy(5, 7)) {
        let opt = exact_optimum(&inst).unwrap();
        for variant in [Variant::Uniform, Variant::Nonuniform] {
            if variant == Variant::Uniform && variant_for(&inst) != Variant::Uniform {
                continue;
            }
            let params = SearchParams::default();
            let sol = local_search(&inst, &params, variant).unwrap();
            prop_assert!(opt.optimum_cost <= sol.total_cost);
            let bound = variant.unscaled_bound() + params.epsilon;
            prop_assert!(sol.total_cost as f64 <= bound * opt.optimum_cost as f64);
        }
    }

    #[test]
    fn optimum_is_below_random_subsets(inst in instance_strategy(6, 6), masks in prop::collection::vec(any::<u64>(), 8)) {
        let nf = inst.num_facilities();
        let opt = exact_optimum(&inst).unwrap();
        prop_assert_eq!(assign(&inst, &opt.optimum_open_set).unwrap().total(), opt.optimum_cost);
        for m in masks {
            let s = OpenSet::from_mask(m & ((1 << nf) - 1), nf);
            prop_assert!(opt.optimum_cost <= assign(&inst, &s).unwrap().total());
        }
    }

    #[test]
    fn variable_cost_at_exact_local_optimum_is_at_most_optimum(inst in instance_strategy(4, 6)) {
        let params = SearchParams { epsilon: 1e-12, max_iterations: 1_000_000, ..SearchParams::default() };
        let sol = local_search(&inst, &params, Variant::Nonuniform).unwrap();
        let opt = exact_optimum(&inst).unwrap().optimum_cost;
        prop_assert!(sol.assignment.variable_cost() <= opt);
    }

    #[test]
    fn oracle_optimum_passes_local_check(inst in instance_strategy(5, 6)) {
        let opt = exact_optimum(&inst).unwrap();
        let variant = variant_for(&inst);
        let sol = solution_for(&inst, opt.optimum_open_set, variant, 0.01, 1.0).unwrap();
        let report = verify_local_optimality(&inst, &sol, variant, &SearchParams::default()).unwrap();
        prop_assert!(report.is_local_opt, "{:?}", report.violating_move);
    }
}
