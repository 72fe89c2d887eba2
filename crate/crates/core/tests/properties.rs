use proptest::prelude::*;
use vdwlab_core::exec;
use vdwlab_core::stability::{charge_group_decompose, verify_minimal_group, zero_subset_witness};
use vdwlab_core::symmetry::Permutation;
use vdwlab_core::Exec;

proptest! {
    #[test]
    fn witness_sums_to_a_multiple_of_z(k in prop::collection::vec(-1000i64..1000, 1..12)) {
        let z = k.len() as i64;
        let w = zero_subset_witness(&k).unwrap();
        prop_assert!(!w.is_empty());
        prop_assert!(w.windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(w.iter().map(|&i| k[i]).sum::<i64>().rem_euclid(z), 0);
    }

    #[test]
    fn decomposition_groups_are_minimal(half in prop::collection::vec(1i32..=3, 1..5)) {
        // Pair every charge with its negative, then mix in a balanced triple.
        let mut charges: Vec<i32> = half.iter().flat_map(|&c| [c, -c]).collect();
        charges.extend([1, 1, -2]);
        let d = charge_group_decompose(&charges, 3).unwrap();
        let mut seen: Vec<usize> = d.groups.concat();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..charges.len()).collect::<Vec<_>>());
        for g in &d.groups {
            let sub: Vec<i32> = g.iter().map(|&i| charges[i]).collect();
            prop_assert_eq!(sub.iter().sum::<i32>(), 0);
            prop_assert!(verify_minimal_group(&sub).unwrap());
        }
        prop_assert!(d.max_group_size <= d.bound);
    }

    #[test]
    fn sign_is_multiplicative(
        a in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        b in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let (p, q) = (Permutation::new(a).unwrap(), Permutation::new(b).unwrap());
        prop_assert_eq!(p.then(&q).sign(), p.sign() * q.sign());
        prop_assert_eq!(p.inverse().sign(), p.sign());
    }

    #[test]
    fn serial_and_parallel_reductions_agree(v in prop::collection::vec(-1e3f64..1e3, 0..20_000)) {
        prop_assert_eq!(exec::dot(Exec::Serial, &v, &v).to_bits(), exec::dot(Exec::Parallel, &v, &v).to_bits());
    }
}
