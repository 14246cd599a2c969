use std::sync::Arc;

use alexr::algorithms::{run, AlexrConfig, Averaging, BaselineConfig, BaselineVariant, PsiMode, Solver, SolverConfig};
use alexr::instances::{build_gdro, build_hard_nonsmooth, build_synthetic_gdro, Divergence, GdroOptions};
use alexr::problem::evaluate_objective;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn any_solver() -> impl Strategy<Value = SolverConfig> {
    let alexr = (0.5f64..20.0, 0.1f64..5.0, 0.0f64..0.95, 1usize..5, 1usize..4, any::<u64>(), any::<bool>()).prop_map(
        |(eta, tau, theta, s, b, seed, uniform)| {
            SolverConfig::Alexr(AlexrConfig {
                eta,
                tau,
                theta,
                outer_batch: s,
                inner_batch: b,
                iterations: 30,
                psi_mode: PsiMode::Quadratic,
                seed,
                averaging: if uniform { Averaging::Uniform } else { Averaging::Last },
                x0: 0.0,
            })
        },
    );
    let baseline = (0usize..5, 0.01f64..1.0, 0.05f64..0.95, 1usize..5, 1usize..4, any::<u64>()).prop_map(
        |(v, step, gamma, s, b, seed)| {
            let variant = [
                BaselineVariant::Bsgd,
                BaselineVariant::Sox,
                BaselineVariant::Msvr,
                BaselineVariant::SgdErm,
                BaselineVariant::SgdUw,
            ][v];
            SolverConfig::Baseline(BaselineConfig {
                variant,
                step,
                gamma,
                outer_batch: s,
                inner_batch: b,
                iterations: 30,
                seed,
                averaging: Averaging::Last,
                x0: 0.0,
            })
        },
    );
    prop_oneof![alexr, baseline]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Iterates stay in the box, oracle counts grow by a fixed amount per step,
    /// and a run is a pure function of its config.
    #[test]
    fn solver_contracts(cfg in any_solver()) {
        let data = Arc::new(build_synthetic_gdro(5, 3, 20, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
        let p = build_gdro(data, Divergence::Cvar { alpha: 0.4 }, GdroOptions::new(0.01)).unwrap();
        let mut solver = Solver::new(&p, cfg.clone()).unwrap();
        for t in 1..=30u64 {
            solver.step().unwrap();
            prop_assert!(p.domain().contains(&solver.state().x));
            prop_assert_eq!(solver.state().oracle_count, t * cfg.oracle_per_step());
        }
        let a = run(&p, &cfg, 7).unwrap();
        let b = run(&p, &cfg, 7).unwrap();
        prop_assert_eq!(a.metrics(), b.metrics());
        prop_assert_eq!(&a.x_last, &solver.state().x);
        prop_assert!(a.rows.iter().all(|r| r.objective.unwrap().is_finite()));
    }
}

#[test]
fn alexr_reduces_the_nonsmooth_gap() {
    let h = build_hard_nonsmooth(20, 0.5, 1.0, 1.0, 1.0).unwrap();
    let f0 = evaluate_objective(&h.problem, &vec![0.0; 20]).unwrap() - h.f_star;
    let alexr = SolverConfig::Alexr(AlexrConfig::convex(0.02, 1.0, 1.0, 0.0, 4, 1, 20_000, 3).unwrap());
    let rec = run(&h.problem, &alexr, 20_000).unwrap();
    let gap = rec.rows.last().unwrap().gap.unwrap();
    assert!(gap < 0.1 * f0, "gap {gap} vs initial {f0}");
}
