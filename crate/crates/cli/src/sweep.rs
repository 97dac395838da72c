//! Parameter sweeps: one run per (value, repeat) with isolated output
//! directories and seeds, aggregated into `sweep.csv` and a tidy
//! `sweep_plot.csv` for plotting accuracy against the swept parameter.

use std::io::Write;
use std::sync::Mutex;

use wsgat_core::extract::{window_size_from_fraction, Method};

use crate::config::{FileConfig, Overrides, ResolvedRun, SweepSection, SweepVariable};
use crate::runner::execute_run;
use crate::CliError;

struct PointResult {
    value: f64,
    nodes_or_depth: usize,
    accuracy: f64, // NaN marks a failed point
}

pub fn execute_sweep(
    file: &FileConfig,
    over: &Overrides,
    sweep: &SweepSection,
    parallel: usize,
) -> Result<(), CliError> {
    // Resolve once up front to validate the config and locate the dataset.
    let base = crate::config::resolve(file, over, "runs/sweep")?;
    let sweep_dir = base.out_dir.clone();
    std::fs::create_dir_all(&sweep_dir)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("creating sweep dir: {e}")))?;

    let mut jobs: Vec<(usize, f64, usize)> = Vec::new(); // (job idx, value, repeat)
    for &value in &sweep.values {
        for rep in 0..sweep.repeats {
            jobs.push((jobs.len(), value, rep));
        }
    }

    let results: Mutex<Vec<Option<(f64, usize, f64)>>> =
        Mutex::new(vec![None; jobs.len()]);
    let any_failed = Mutex::new(false);

    let run_job = |&(idx, value, rep): &(usize, f64, usize)| {
        let outcome = run_point(&base, file, over, sweep.variable, value, rep);
        match outcome {
            Ok((nodes_or_depth, accuracy)) => {
                results.lock().unwrap()[idx] = Some((value, nodes_or_depth, accuracy));
            }
            Err(e) => {
                eprintln!("sweep point value={value} repeat={rep} failed: {e}");
                let nodes_or_depth = describe_point(&base, sweep.variable, value);
                results.lock().unwrap()[idx] = Some((value, nodes_or_depth, f64::NAN));
                *any_failed.lock().unwrap() = true;
            }
        }
    };

    if parallel <= 1 {
        jobs.iter().for_each(run_job);
    } else {
        std::thread::scope(|scope| {
            for chunk in jobs.chunks(jobs.len().div_ceil(parallel)) {
                scope.spawn(|| chunk.iter().for_each(run_job));
            }
        });
    }

    let results: Vec<PointResult> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| {
            let (value, nodes_or_depth, accuracy) = r.expect("every job records a result");
            PointResult {
                value,
                nodes_or_depth,
                accuracy,
            }
        })
        .collect();

    write_tables(&sweep_dir, sweep, &results)?;
    if *any_failed.lock().unwrap() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "one or more sweep points failed; see NaN rows in sweep.csv"
        )));
    }
    Ok(())
}

/// Runs one sweep point in its own subdirectory with its own seed.
fn run_point(
    base: &ResolvedRun,
    file: &FileConfig,
    over: &Overrides,
    variable: SweepVariable,
    value: f64,
    rep: usize,
) -> Result<(usize, f64), CliError> {
    let mut point_file = file.clone();
    match variable {
        SweepVariable::WindowFraction => {
            point_file.extraction.method = Some(Method::SlidingWindow);
            point_file.extraction.window_fraction = Some(value);
            point_file.extraction.window_size = None;
            point_file.extraction.step_size = None;
        }
        SweepVariable::DepthLimit => {
            point_file.extraction.method = Some(Method::Bfs);
            point_file.extraction.depth_limit = Some(value as usize);
        }
    }
    let mut point_over = over.clone();
    point_over.seed = Some(base.seed + rep as u64);
    point_over.out = Some(
        base.out_dir
            .join(format!("point_{value}"))
            .join(format!("rep_{rep}")),
    );
    let rc = crate::config::resolve(&point_file, &point_over, "unused")?;
    let nodes_or_depth = match variable {
        SweepVariable::WindowFraction => rc.ext.window_size,
        SweepVariable::DepthLimit => rc.ext.depth_limit,
    };
    let out = execute_run(&rc, true)?;
    println!(
        "sweep point value={value} rep={rep}: accuracy {}",
        out.accuracy
    );
    Ok((nodes_or_depth, out.accuracy))
}

fn describe_point(base: &ResolvedRun, variable: SweepVariable, value: f64) -> usize {
    match variable {
        SweepVariable::WindowFraction => {
            window_size_from_fraction(&base.ds, value).unwrap_or(0)
        }
        SweepVariable::DepthLimit => value as usize,
    }
}

fn write_tables(
    dir: &std::path::Path,
    sweep: &SweepSection,
    results: &[PointResult],
) -> Result<(), CliError> {
    let rt = |e: std::io::Error| CliError::Runtime(e.into());

    let mut plot = String::from("value,nodes_or_depth,accuracy\n");
    for r in results {
        plot.push_str(&format!("{},{},{}\n", r.value, r.nodes_or_depth, r.accuracy));
    }
    std::fs::write(dir.join("sweep_plot.csv"), plot).map_err(rt)?;

    let mut table = std::fs::File::create(dir.join("sweep.csv")).map_err(rt)?;
    writeln!(table, "value,nodes_or_depth,accuracy_mean,accuracy_std").map_err(rt)?;
    for &value in &sweep.values {
        let points: Vec<&PointResult> =
            results.iter().filter(|r| r.value == value).collect();
        let nodes_or_depth = points.first().map_or(0, |p| p.nodes_or_depth);
        let accs: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let std = if accs.len() > 1 {
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
                / (accs.len() - 1) as f64;
            var.sqrt()
        } else {
            0.0
        };
        writeln!(table, "{value},{nodes_or_depth},{mean},{std}").map_err(rt)?;
    }
    Ok(())
}
