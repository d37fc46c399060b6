//! Front end for fabric experiments: config loading, batch runs, CSV and
//! manifest export, SVG plots and property suites.

pub mod config;
pub mod export;
pub mod plot;
pub mod verify;

use std::path::Path;

use fabric::sim::config::PlotStyle;
use fabric::sim::experiments::run_experiment;

/// Exit status for a bad config or a missing manifest.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for a runtime barrier violation or failed property.
pub const EXIT_FAILURE: i32 = 1;

/// Caps the global worker pool at `FABRIC_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("FABRIC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn cmd_run(config_path: &Path, out_dir: &Path, overrides: &[String], seed: Option<u64>) -> i32 {
    let mut overrides = overrides.to_vec();
    if let Some(s) = seed {
        overrides.push(format!("experiment.seed={s}"));
    }
    let (cfg, _) = match config::read_config(config_path, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let run = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return EXIT_USAGE;
        }
    };
    let manifest = match export::write_run(out_dir, &cfg, &overrides, &run) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: writing {}: {e}", out_dir.display());
            return EXIT_FAILURE;
        }
    };
    for style in &cfg.output.plots {
        if let Err(e) = plot::plot_run(out_dir, &manifest, *style) {
            eprintln!("warning: {e}");
        }
    }
    println!("{}: {} rollouts written to {}", run.name, run.rollouts.len(), out_dir.display());
    for (k, v) in &run.summary {
        println!("  {k} = {v}");
    }
    let violations = run.barrier_violations();
    if violations > 0 {
        eprintln!("{violations} rollout(s) ended in a barrier violation");
        EXIT_FAILURE
    } else {
        0
    }
}

pub fn cmd_plot(run_dir: &Path, style: PlotStyle) -> i32 {
    let manifest = match export::read_manifest(run_dir) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match plot::plot_run(run_dir, &manifest, style) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn cmd_verify(suite: verify::Suite, seed: Option<u64>) -> i32 {
    let rows = verify::run_suite(suite, seed.unwrap_or(verify::DEFAULT_SEED));
    print!("{}", verify::format_table(&rows));
    if rows.iter().all(|r| r.passed) {
        0
    } else {
        EXIT_FAILURE
    }
}
