//! Nash enumeration against a brute-force grid scan.

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sce_core::equilibrium::solve_full_ne;

const STEP: f64 = 1e-3;

#[test]
fn enumeration_matches_grid_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (g, n) in [1, 2, 2, 3, 3, 3].into_iter().enumerate() {
        let spec = random_grid_game(&mut rng, n, STEP);
        let ne = solve_full_ne(&spec).unwrap();
        let grid = grid_fixed_points(&spec, STEP, 1.0);
        assert_eq!(ne.len(), grid.len(), "game {g}: {:?} vs grid {grid:?}", ne.records);
        for p in &grid {
            let near = ne.records.iter().map(|r| max_dist(&r.actions, p)).fold(f64::INFINITY, f64::min);
            assert!(near <= 2.0 * STEP, "game {g}: grid point {p:?} is {near} from every NE");
        }
    }
}

#[test]
fn oracle_enumerator_agrees_on_reference_networks() {
    for gamma in [0.2, -0.6] {
        let spec = sce_core::GameSpec::uniform(fig1(gamma), 0.1).unwrap();
        let oracle = oracle_nash(spec.net().matrix(), spec.alpha());
        let ne = solve_full_ne(&spec).unwrap();
        assert_eq!(oracle.len(), ne.len());
        for (a, r) in oracle.iter().zip(&ne.records) {
            assert!(max_dist(a, &r.actions) < 1e-12);
        }
    }
}
