//! Cross-checks the internal branch-and-bound against an independent MILP
//! solver (scipy/HiGHS) fed through the LP-format export. The reference
//! solver is required: a missing python3/scipy is a hard failure, not a skip.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use laserplan::astro::{KeplerianElements, StateVector};
use laserplan::ilp::{build_model, export_model, solve, SolveStatus};
use laserplan::pla::{DebrisBody, LaserSystem};
use laserplan::teg::{
    build_altitude_change_grid, build_baseline_grid, generate_debris_teg, DebrisTeg,
    EngagementCombo, EngagementRules, LayerDirection, PlatformSlotGrid, TegLimits, TegNode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn reference_objective(lp_text: &str) -> Option<f64> {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/support/solve_lp.py");
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    file.write_all(lp_text.as_bytes()).expect("write model");
    let out = Command::new("python3")
        .arg(&script)
        .arg(file.path())
        .output()
        .expect("python3 must be available for the reference cross-check");
    assert!(
        out.status.success(),
        "reference solver failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");
    let line = stdout.trim();
    if line == "infeasible" {
        None
    } else {
        Some(line.parse().expect("objective float"))
    }
}

fn coast_node(parent: usize) -> TegNode {
    TegNode {
        state: StateVector::SENTINEL,
        parent,
        edge_reward: 0.0,
        combo: EngagementCombo { members: Vec::new() },
        deorbit: false,
    }
}

fn eng_node(parent: usize, reward: f64, members: Vec<(usize, usize)>) -> TegNode {
    TegNode {
        state: StateVector::SENTINEL,
        parent,
        edge_reward: reward,
        combo: EngagementCombo { members },
        deorbit: false,
    }
}

/// Same deterministic family as the unit-level oracle tests: real altitude
/// grids, synthetic engagement trees with mixed-sign rewards.
fn random_instance(
    seed: u64,
) -> (Vec<DebrisTeg>, Vec<PlatformSlotGrid>, Vec<usize>, Vec<f64>, usize) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let num_platforms = rng.gen_range(1..=2usize);
    let num_debris = rng.gen_range(1..=2usize);
    let window = rng.gen_range(2..=3usize);
    let slots = rng.gen_range(2..=3usize);
    let start = 1usize;
    let grids: Vec<_> = (0..num_platforms)
        .map(|p| {
            let elems = KeplerianElements::circular(
                7104.8,
                42.33,
                10.0 + 5.0 * p as f64,
                25.0 + 40.0 * p as f64,
            );
            build_altitude_change_grid(
                &elems,
                1,
                slots as u32,
                40.0,
                LayerDirection::Up,
                6478.137,
                start + window + 1,
                180.0,
            )
            .unwrap()
        })
        .collect();
    let current: Vec<usize> = (0..num_platforms).map(|_| rng.gen_range(0..slots)).collect();
    let budgets: Vec<f64> =
        (0..num_platforms).map(|_| [0.0, 0.02, 0.05, 0.5][rng.gen_range(0..4)]).collect();
    let rewards = [0.3, 0.7, 100.0, -5.0];
    let tegs: Vec<DebrisTeg> = (0..num_debris)
        .map(|d| {
            let mut layers = vec![vec![coast_node(usize::MAX)]];
            for t in 0..window {
                let parents = layers.last().unwrap().len();
                let mut layer = Vec::new();
                for parent in 0..parents {
                    layer.push(coast_node(parent));
                    if rng.gen_bool(0.6) {
                        let k = rng.gen_range(1..=num_platforms.min(2));
                        let mut chosen: Vec<usize> = (0..num_platforms).collect();
                        while chosen.len() > k {
                            let drop = rng.gen_range(0..chosen.len());
                            chosen.remove(drop);
                        }
                        let members: Vec<(usize, usize)> = chosen
                            .iter()
                            .map(|&p| {
                                let s =
                                    if t == 0 { current[p] } else { rng.gen_range(0..slots) };
                                (p, s)
                            })
                            .collect();
                        let reward = rewards[rng.gen_range(0..rewards.len())];
                        layer.push(eng_node(parent, reward, members));
                    }
                }
                layers.push(layer);
            }
            DebrisTeg { debris_id: d, start_step: start, layers, truncated_at: None }
        })
        .collect();
    (tegs, grids, current, budgets, window)
}

#[test]
fn internal_solver_matches_reference_on_a_real_deorbit_instance() {
    let platform = KeplerianElements::circular(7320.0, 0.0, 0.0, 0.0);
    let debris_el = KeplerianElements::circular(7000.0, 0.0, 0.0, 0.0);
    let grid = build_baseline_grid(&platform, 4, 180.0).unwrap();
    let laser = LaserSystem { u_max_km: 321.0, ..LaserSystem::default() };
    let teg = generate_debris_teg(
        &DebrisBody { id: 7, areal_density_kg_m2: 0.2 },
        &debris_el.to_state(),
        0,
        2,
        180.0,
        &[grid.clone()],
        &[0],
        &laser,
        &EngagementRules::default(),
        &[],
        &TegLimits::default(),
    )
    .unwrap();
    let model = build_model(&[teg], &[grid], &[0], &[2.0], 0, 2, true).unwrap();
    let internal = solve(&model, None).unwrap();
    assert_eq!(internal.status, SolveStatus::Optimal);
    let external = reference_objective(&export_model(&model)).expect("feasible model");
    assert!(
        (internal.objective - external).abs() <= 1e-6 * external.abs().max(1.0),
        "internal {} vs reference {}",
        internal.objective,
        external
    );
    assert_eq!(internal.objective, 100.0);
}

#[test]
fn internal_solver_matches_reference_across_random_instances() {
    for seed in 100..112u64 {
        let (tegs, grids, current, budgets, window) = random_instance(seed);
        for strict in [true, false] {
            let model =
                build_model(&tegs, &grids, &current, &budgets, 1, window, strict).unwrap();
            let internal = solve(&model, None).unwrap();
            assert_eq!(internal.status, SolveStatus::Optimal, "seed {seed}");
            let external =
                reference_objective(&export_model(&model)).expect("always feasible");
            assert!(
                (internal.objective - external).abs() <= 1e-6 * external.abs().max(1.0),
                "seed {seed} strict {strict}: internal {} vs reference {}",
                internal.objective,
                external
            );
        }
    }
}
