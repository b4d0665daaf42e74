use laserplan::rhs::run_rhs;
use laserplan::scenario::{build_mission, load_scenario};

#[test]
#[ignore]
fn probe_desk_breakup() {
    let t0 = std::time::Instant::now();
    for seed in 0..10u64 {
        let mut vs = Vec::new();
        for name in ["breakup_desk_baseline", "breakup_desk_reconfig"] {
            let mut config =
                load_scenario(format!("../../scenarios/{name}.toml")).unwrap();
            config.seed = seed;
            let mission = build_mission(&config).unwrap();
            let log = run_rhs(&mission.setup, &mission.rhs).unwrap();
            vs.push((log.total_v, log.total_deorbits, log.final_budgets_kms.clone()));
        }
        println!(
            "seed {seed}: base V={:.3} d={} | reconfig V={:.3} d={} budgets={:?}",
            vs[0].0, vs[0].1, vs[1].0, vs[1].1, vs[1].2
        );
    }
    println!("elapsed: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn probe_hop_costs() {
    let config = load_scenario("../../scenarios/breakup_desk_reconfig.toml").unwrap();
    let mission = build_mission(&config).unwrap();
    let grid = &mission.setup.grids[0];
    for t in 0..7 {
        let down = grid.cost(t, 0, 2);
        let up = grid.cost(t, 0, 1);
        println!("depart t={t}: 7400->7200 {down:.4} km/s, 7400->7600 {up:.4} km/s");
    }
}

#[test]
#[ignore]
fn probe_static_desk() {
    for name in ["static_desk_baseline", "static_desk_reconfig"] {
        let config = load_scenario(format!("../../scenarios/{name}.toml")).unwrap();
        let mission = build_mission(&config).unwrap();
        let log = run_rhs(&mission.setup, &mission.rhs).unwrap();
        println!(
            "{name}: V={:.6} deorbits={} engagements={} budgets={:?}",
            log.total_v, log.total_deorbits, log.total_engagements, log.final_budgets_kms
        );
    }
}
