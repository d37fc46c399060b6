//! Acceptance criteria 1–10 over the shipped configs. Prints one line per
//! criterion and exits non-zero when any criterion fails.

use std::time::Instant;

use fabric::sim::config::ExperimentConfig;
use fabric::sim::experiments::{run_experiment, ExperimentRun};
use fabric::Vector;
use fabric_cli::export::trajectory_csv;
use fabric_cli::verify::{run_suite, shipped_config, Row, Suite, CONFIGS, DEFAULT_SEED};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn config(name: &str, overrides: &[&str]) -> ExperimentConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    shipped_config(name, &o).unwrap_or_else(|e| panic!("{e}"))
}

fn run(name: &str, overrides: &[&str]) -> ExperimentRun {
    run_experiment(&config(name, overrides)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn value(run: &ExperimentRun, key: &str) -> f64 {
    *run.summary.get(key).unwrap_or_else(|| panic!("{}: no summary key {key}", run.name))
}

fn path_consistency() -> Outcome {
    let t = Instant::now();
    let r = run("path_consistency", &[]);
    let secs = t.elapsed().as_secs_f64();
    let d = value(&r, "frechet_max");
    outcome(d < 1e-3 && secs < 5.0, format!("max Frechet {d:.3e} (< 1e-3), runtime {secs:.2} s (< 5 s)"))
}

fn commutation() -> Outcome {
    let t = Instant::now();
    let r = run("commutation_polar", &[]);
    let secs = t.elapsed().as_secs_f64();
    let acc = value(&r, "max_commutation_deviation");
    let route = value(&r, "max_route_deviation");
    let rank = value(&r, "random_states_rank_deficient");
    outcome(
        acc < 1e-8 && route < 1e-6 && rank == 0.0 && secs < 10.0,
        format!("acceleration {acc:.3e} (< 1e-8), rollouts {route:.3e} (< 1e-6), runtime {secs:.2} s (< 10 s)"),
    )
}

fn conservation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in [
        "layered_A_fabric",
        "layered_B_fabric",
        "layered_C_fabric",
        "layered_D_fabric",
        "layered_E_fabric",
        "commutation_polar",
    ] {
        let r = run(name, &[]);
        let drift = value(&r, "max_energy_drift");
        let rate = value(&r, "max_rate_residual");
        let violations = r.barrier_violations();
        let good = drift < 1e-4 && rate < 1e-10 && violations == 0;
        ok &= good;
        parts.push(format!("{name}: drift {drift:.2e}, rate {rate:.2e}, violations {violations}"));
    }
    outcome(ok, parts.join("; "))
}

fn dissipation() -> Outcome {
    let r = run("layered_A", &["speed_control.eta=1", "forcing.register_priority_energy=false"]);
    let d = value(&r, "max_dissipation_residual");
    outcome(d < 1e-6, format!("layered_A, eta = 1: max relative residual {d:.3e} (< 1e-6)"))
}

/// Rollouts that come within 0.1 of the target with `‖q̇‖ < 1e-3` before 16 s.
fn converged(run: &ExperimentRun, target: &Vector) -> usize {
    run.rollouts
        .iter()
        .filter(|r| {
            r.times.iter().zip(r.positions.iter().zip(&r.velocities)).any(|(t, (q, v))| {
                *t < 16.0
                    && (Vector::from_column_slice(q) - target).norm() < 0.1
                    && Vector::from_column_slice(v).norm() < 1e-3
            })
        })
        .count()
}

fn convergence() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["layered_A", "layered_B", "layered_C", "layered_D", "layered_E"] {
        let cfg = config(name, &[]);
        let target = Vector::from_column_slice(cfg.forcing.as_ref().and_then(|f| f.target.as_ref()).expect("target"));
        let r = run_experiment(&cfg).expect("shipped config is valid");
        let n = converged(&r, &target);
        let mut good = n == r.rollouts.len() && r.barrier_violations() == 0;
        let mut line = format!("{name} {n}/{}", r.rollouts.len());
        if name == "layered_B" {
            let m = value(&r, "max_abs_coordinate");
            good &= m < 4.0;
            line.push_str(&format!(" max |q| {m:.3}"));
        }
        if name == "layered_C" {
            let m = value(&r, "min_obstacle_distance");
            good &= m > 0.0;
            line.push_str(&format!(" obstacle distance {m:.3}"));
        }
        ok &= good;
        parts.push(line);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(ok && secs < 60.0, format!("{}; runtime {secs:.1} s (< 60 s)", parts.join(", ")))
}

fn rows_named(rows: &[Row], names: &[&str]) -> Outcome {
    let picked: Vec<&Row> = rows.iter().filter(|r| names.contains(&r.property.as_str())).collect();
    assert_eq!(picked.len(), names.len(), "missing verify rows");
    let passed = picked.iter().all(|r| r.passed);
    let detail = picked
        .iter()
        .map(|r| {
            let mut s = format!("{} {:.2e} (tol {:.0e})", r.property, r.max_deviation, r.tolerance);
            if !r.passed {
                s.push_str(&format!(" at {}", r.detail));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(passed, detail)
}

fn arms() -> Outcome {
    let reach = run("arm_goal_reaching", &[]);
    let plain = run("arm_goal_reaching_no_redundancy", &[]);
    let shape = run("arm_behavior_shaping", &[]);
    let reached = [&reach, &plain, &shape].map(|r| value(r, "goals_reached"));
    let with = value(&reach, "mean_rest_config_distance");
    let without = value(&plain, "mean_rest_config_distance");
    let height = value(&shape, "min_mid_transit_height");
    let threshold = value(&shape, "lift_threshold");
    let ok = reached.iter().all(|n| *n == 5.0) && with < without && height > threshold;
    outcome(
        ok,
        format!(
            "goals reached {}/{}/{} of 5, rest distance {with:.3} vs {without:.3} without redundancy resolution, \
             mid-transit height {height:.4} vs threshold {threshold:.4}",
            reached[0], reached[1], reached[2]
        ),
    )
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for (name, _) in CONFIGS {
        let csvs = |r: ExperimentRun| r.rollouts.iter().map(trajectory_csv).collect::<Vec<_>>();
        if csvs(run(name, &[])) != csvs(run(name, &[])) {
            differing.push(*name);
        }
    }
    if differing.is_empty() {
        outcome(true, format!("{} configs run twice, CSVs identical", CONFIGS.len()))
    } else {
        outcome(false, format!("CSVs differ for {}", differing.join(", ")))
    }
}

fn main() {
    let energies = run_suite(Suite::Energies, DEFAULT_SEED);
    let energization = run_suite(Suite::Energization, DEFAULT_SEED);
    let mut homogeneity_rows = energization.clone();
    homogeneity_rows.extend(energies.iter().cloned());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("path consistency", Box::new(path_consistency)),
        ("commutation", Box::new(commutation)),
        ("energy conservation", Box::new(conservation)),
        ("dissipation", Box::new(dissipation)),
        ("forced convergence", Box::new(convergence)),
        (
            "homogeneity",
            Box::new(move || {
                rows_named(
                    &homogeneity_rows,
                    &[
                        "HD2 of built-in generators",
                        "HD2 of resolved root generators",
                        "Finsler H_e = L_e",
                        "Finsler M_e degree-0 homogeneity",
                    ],
                )
            }),
        ),
        (
            "oracle equivalence",
            Box::new(move || rows_named(&energies, &["EL terms vs finite-difference oracle (ratio)"])),
        ),
        (
            "projector properties",
            Box::new(move || rows_named(&energization, &["P_e idempotence (Frobenius)", "xd^T P_e r = 0"])),
        ),
        ("arm experiments", Box::new(arms)),
        ("determinism", Box::new(determinism)),
    ];

    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name}: {}", i + 1, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: criteria {failed:?} fail");
        std::process::exit(1);
    }
}
