mod common;

use common::{brute_force, random_lp, Oracle};
use spectemp::lp::{lp_solve, LpStatus};

#[test]
fn matches_vertex_enumeration() {
    let mut counts = [0usize; 3];
    for seed in 0..500 {
        let lp = random_lp(seed);
        let oracle = brute_force(&lp);
        let sol = lp_solve(&lp).unwrap();
        assert_eq!(sol.status, oracle.status(), "seed {seed}: {lp:?}");
        match oracle {
            Oracle::Optimal(obj) => {
                counts[0] += 1;
                assert!(
                    (sol.objective - obj).abs() <= 1e-6,
                    "seed {seed}: {} vs {obj}",
                    sol.objective
                );
                let r = &sol.residuals;
                let b_norm = lp
                    .b_eq
                    .iter()
                    .chain(lp.b_in.iter())
                    .fold(0.0f64, |a, &b| a.max(b.abs()));
                assert!(r.primal <= 1e-7 * (1.0 + b_norm), "seed {seed}: primal {}", r.primal);
                assert!(
                    r.gap.abs() <= 1e-7 * (1.0 + sol.objective.abs()),
                    "seed {seed}: gap {}",
                    r.gap
                );
                assert!(r.dual_objective <= sol.objective + 1e-7 * (1.0 + sol.objective.abs()));
            }
            Oracle::Infeasible => counts[1] += 1,
            Oracle::Unbounded => counts[2] += 1,
        }
        if sol.status == LpStatus::NumericalFailure {
            panic!("seed {seed}: numerical failure");
        }
    }
    eprintln!("optimal/infeasible/unbounded = {counts:?}");
    assert!(counts.iter().all(|&c| c > 20), "{counts:?}");
}
