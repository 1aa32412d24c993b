use han_ddi::hin::{EntityKind, Relation};
use han_ddi::metapath::{brute_force_path_count, builtin_specs, commuting_matrix, neighbor_graph};
use han_ddi::synth::random_hin;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn commuting_counts_equal_path_enumeration(seed in any::<u64>()) {
        let hin = random_hin(&mut ChaCha8Rng::seed_from_u64(seed), 20).unwrap();
        let n = hin.drug_count();
        for spec in builtin_specs() {
            let m = commuting_matrix(&hin, &spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(m.get(i, j), brute_force_path_count(&hin, &spec, i, j).unwrap(),
                        "{} at ({}, {})", spec.name(), i, j);
                }
            }
        }
    }

    #[test]
    fn palindromic_paths_are_symmetric(seed in any::<u64>()) {
        let hin = random_hin(&mut ChaCha8Rng::seed_from_u64(seed), 12).unwrap();
        for spec in builtin_specs() {
            prop_assert!(spec.is_palindromic());
            let m = commuting_matrix(&hin, &spec).unwrap();
            prop_assert!(m.counts.is_symmetric());
            let g = neighbor_graph(&m, 1).unwrap();
            prop_assert!(g.adjacency.is_symmetric());
            for i in 0..hin.drug_count() {
                prop_assert!(g.adjacency.get(i, i));
                for j in g.neighbors(i).filter(|&j| j != i) {
                    prop_assert!(m.get(i, j) >= 1);
                }
            }
        }
    }

    #[test]
    fn diagonals_are_degrees(seed in any::<u64>()) {
        let hin = random_hin(&mut ChaCha8Rng::seed_from_u64(seed), 15).unwrap();
        let specs = builtin_specs();
        let did1 = commuting_matrix(&hin, &specs[0]).unwrap();
        let did3 = commuting_matrix(&hin, &specs[2]).unwrap();
        let degree = |rel: Relation, i: usize| {
            let m = hin.relation(rel);
            (0..m.cols()).filter(|&k| m.contains(i, k)).count() as u64
        };
        for i in 0..hin.count(EntityKind::Drug) {
            prop_assert_eq!(did1.get(i, i), degree(Relation::T, i));
            prop_assert_eq!(did3.get(i, i), degree(Relation::H, i));
        }
    }
}

#[test]
fn table_of_builtin_products() {
    let names: Vec<String> = builtin_specs().iter().map(|s| s.to_string()).collect();
    assert_eq!(names.len(), 4);
    let steps: Vec<usize> = builtin_specs().iter().map(|s| s.steps().len()).collect();
    assert_eq!(steps, [2, 3, 2, 2]);
}
