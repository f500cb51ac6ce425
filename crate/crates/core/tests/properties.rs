mod common;

use coverlab::coverage::{concentrability, coverability, DistributionFamily, PolicySet};
use coverlab::family::{bellman_backup, RewardMode};
use coverlab::golf::{confidence_set, Datasets, Transition};
use coverlab::harness::claims::random_instance;
use coverlab::mdp::{occupancy, optimal_values, policy_value, sample_trajectory};
use coverlab::random::random_policy;
use coverlab::{LayeredMdp, ValueFunctionFamily};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> (LayeredMdp, ValueFunctionFamily) {
    random_instance(seed, 4, 4, 3, 6)
}

proptest! {
    // Fixed seed: failures reproduce without a persistence file.
    #![proptest_config(ProptestConfig {
        cases: 128,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x00c0_7e5a),
        ..ProptestConfig::default()
    })]

    #[test]
    fn occupancy_matches_reference_and_normalizes(seed in any::<u64>()) {
        let (mdp, _) = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let pi = random_policy(&mut rng, &mdp, false);
        let m = common::plain(&mdp);
        let reference = common::occupancy(&m, &|h, x| pi.dist(h, x).to_vec());
        let occ = occupancy(&mdp, &pi);
        for h in 0..mdp.horizon() {
            prop_assert!((occ.layer(h).sum() - 1.0).abs() < 1e-12);
            prop_assert!(common::sup_dist(&occ.layer(h).to_rows(), &reference[h]) < 1e-12);
        }
    }

    #[test]
    fn optimal_value_dominates_every_policy(seed in any::<u64>()) {
        let (mdp, _) = instance(seed);
        let m = common::plain(&mdp);
        let (j_star, q_star, _) = common::optimal(&m);
        let opt = optimal_values(&mdp);
        prop_assert!((opt.value - j_star).abs() < 1e-12);
        for h in 0..mdp.horizon() {
            prop_assert!(common::sup_dist(&opt.q[h].to_rows(), &q_star[h]) < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..4 {
            let pi = random_policy(&mut rng, &mdp, false);
            let v = policy_value(&mdp, &pi).value;
            prop_assert!(v <= j_star + 1e-12);
            let reference = common::evaluate(&m, &|h, x| pi.dist(h, x).to_vec()).0;
            prop_assert!((v - reference).abs() < 1e-12);
        }
    }

    #[test]
    fn coverability_orderings(seed in any::<u64>()) {
        let (mdp, fam) = instance(seed);
        let m = common::plain(&mdp);
        let all = coverability(&mdp, &PolicySet::All).value;
        let ind = coverability(&mdp, &PolicySet::induced(&fam)).value;
        prop_assert!((all - common::coverability_all(&m)).abs() < 1e-9);
        prop_assert!(ind <= all + 1e-12);
        // every layer has at least one reachable state and A actions to choose
        prop_assert!(all >= mdp.n_actions() as f64 - 1e-12);
        // coverability is the infimum of concentrability over logging distributions
        let conc = concentrability(&mdp, &PolicySet::induced(&fam), &DistributionFamily::uniform(&mdp)).value;
        prop_assert!(conc >= ind - 1e-9);
    }

    #[test]
    fn backup_matches_reference(seed in any::<u64>()) {
        let (mdp, fam) = instance(seed);
        let m = common::plain(&mdp);
        for k in 0..fam.len() {
            let f = common::member(&fam, k);
            for h in 0..mdp.horizon() {
                let lib = bellman_backup(&mdp, fam.member(k).get(h + 1).copied(), h, RewardMode::Mdp);
                prop_assert!(common::sup_dist(&lib.to_rows(), &common::backup(&m, h, f.get(h + 1))) < 1e-12);
            }
        }
    }

    #[test]
    fn confidence_sets_are_monotone_and_match_replay(seed in any::<u64>(), episodes in 1usize..40) {
        let (mdp, fam) = instance(seed);
        let mut data: Datasets = vec![Vec::new(); mdp.horizon()];
        let mut replay = common::LossReplay::new(&fam);
        let pi = coverlab::Policy::uniform(&mdp);
        for e in 0..episodes {
            let tr = sample_trajectory(&mdp, &pi, seed.wrapping_add(e as u64));
            for (h, s) in tr.steps.iter().enumerate() {
                data[h].push(Transition { x: s.state, a: s.action, r: s.reward, next: s.next_state });
                replay.add(h, s.state, s.action, s.reward, s.next_state);
            }
        }
        let mut prev: Vec<usize> = Vec::new();
        for beta in [0.0, 0.05, 0.5, 2.0, 1e9] {
            let set = confidence_set(&fam, &data, beta);
            prop_assert!(prev.iter().all(|m| set.contains(m)));
            let expect: Vec<usize> = (0..fam.len()).filter(|&m| replay.contains(&fam.member_indices()[m], beta)).collect();
            prop_assert_eq!(&set, &expect);
            prev = set;
        }
        prop_assert_eq!(prev.len(), fam.len());
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let (mdp, fam) = instance(seed);
        let back = LayeredMdp::from_json(&mdp.to_json()).unwrap();
        prop_assert_eq!(&back, &mdp);
        let fback = ValueFunctionFamily::from_json(&fam.to_json()).unwrap();
        prop_assert_eq!(&fback, &fam);
    }
}
