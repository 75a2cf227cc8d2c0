//! The four CLI verbs: simulate, compare, verify, export.
//!
//! All file writes are whole-file atomic (write to a temp file in the target
//! directory, then rename). Exit-code contract: 0 on success, 1 when a run
//! or check fails, 2 for invalid scenarios or usage.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use funnel_cbf::verify::SamplePlan;
use funnel_cbf::{
    alpha_from_bounds, check_relative_degree_one, compare_runs, compute_metrics, error_ratio_bound,
    estimate_bounds, inclusion_check, invariance_check, simulate_closed_loop, witness_check,
    Metrics, PlantModel, SampleBox, Trajectory, TrajectoryStatus,
};

pub use crate::scenario::Overrides;
use crate::scenario::{
    load_scenario, resolve_output_box, resolve_q_bar, resolve_state_box, CliError, LoadedScenario,
};
use crate::svg::{render_plot, Trace};

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::invalid(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| CliError::invalid(format!("cannot create temp file: {e}")))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::invalid(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

fn status_name(status: TrajectoryStatus) -> String {
    match status {
        TrajectoryStatus::Completed => "completed".to_string(),
        TrajectoryStatus::Violated(t) => format!("violated at t={t}"),
        TrajectoryStatus::Diverged(t) => format!("diverged at t={t}"),
    }
}

fn metrics_block(name: &str, traj: &Trajectory, metrics: Option<&Metrics>) -> String {
    let mut s = format!(
        "scenario: {name}\nstatus: {}\ngrid_points: {}\n",
        status_name(traj.status),
        traj.len()
    );
    if let Some(m) = metrics {
        s.push_str(&format!(
            "min_barrier: {:.16e}\nmax_ratio: {:.16e}\ninput_mse: {:.16e}\nsup_input_norm: {:.16e}\n",
            m.min_barrier, m.max_ratio, m.input_mse, m.sup_input_norm
        ));
    }
    s
}

fn trace_points(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.outputs.iter().map(|y| (y[0], y[1])).collect()
}

fn run_scenario(loaded: &LoadedScenario) -> Result<Trajectory, CliError> {
    simulate_closed_loop(
        &loaded.plant,
        &loaded.boundary,
        &loaded.reference,
        &loaded.sim,
    )
    .map_err(|e| CliError::invalid(format!("simulation rejected: {e}")))
}

/// `simulate <scenario>`: run the closed loop, write trajectory CSV, a
/// metrics summary, and (unless suppressed) an SVG plot of tube and trace.
pub fn cmd_simulate(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let loaded = load_scenario(path, overrides)?;
    let traj = run_scenario(&loaded)?;
    let out = PathBuf::from(&loaded.output_dir);

    let mut csv = Vec::new();
    traj.write_csv(&mut csv)
        .map_err(|e| CliError::invalid(format!("csv serialization failed: {e}")))?;
    write_atomic(&out.join("trajectory.csv"), &csv)?;

    let metrics = compute_metrics(&traj, loaded.input_ref()).ok();
    write_atomic(
        &out.join("metrics.txt"),
        metrics_block(&loaded.spec.name, &traj, metrics.as_ref()).as_bytes(),
    )?;

    if !loaded.no_plot {
        let svg = render_plot(
            &loaded.boundary,
            &loaded.reference,
            loaded.sim.t0,
            loaded.sim.horizon,
            &[Trace {
                label: "closed-loop output",
                color: "#c23b22",
                points: trace_points(&traj),
            }],
        );
        write_atomic(&out.join("plot.svg"), svg.as_bytes())?;
    }

    println!(
        "{}",
        metrics_block(&loaded.spec.name, &traj, metrics.as_ref()).trim_end()
    );
    println!("artifacts: {}", out.display());
    match traj.status {
        TrajectoryStatus::Completed => Ok(()),
        status => Err(CliError::run(format!(
            "run did not complete: {}",
            status_name(status)
        ))),
    }
}

/// `compare <a> <b>`: run two scenarios sharing everything but the
/// controller, print both metrics and the input-MSE reduction of `b`
/// against baseline `a`, and write a combined CSV.
pub fn cmd_compare(path_a: &Path, path_b: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let a = load_scenario(path_a, overrides)?;
    let b = load_scenario(path_b, overrides)?;

    let shared = [
        (a.spec.plant == b.spec.plant, "plant"),
        (a.spec.funnel == b.spec.funnel, "funnel"),
        (a.spec.reference == b.spec.reference, "reference"),
        (a.spec.sim.horizon == b.spec.sim.horizon, "horizon"),
        (a.spec.sim.step == b.spec.sim.step, "step"),
        (
            a.spec.controller.u_ref() == b.spec.controller.u_ref(),
            "u_ref source",
        ),
    ];
    if let Some((_, field)) = shared.iter().find(|(ok, _)| !ok) {
        return Err(CliError::invalid(format!(
            "scenarios disagree on shared field '{field}'"
        )));
    }

    // Runs are independent pure evaluations; execute them concurrently.
    let (traj_a, traj_b) = std::thread::scope(|scope| {
        let ha = scope.spawn(|| run_scenario(&a));
        let hb = scope.spawn(|| run_scenario(&b));
        (
            ha.join().expect("run thread"),
            hb.join().expect("run thread"),
        )
    });
    let (traj_a, traj_b) = (traj_a?, traj_b?);

    let m_a = compute_metrics(&traj_a, a.input_ref())
        .map_err(|e| CliError::run(format!("baseline run unusable: {e}")))?;
    let m_b = compute_metrics(&traj_b, b.input_ref())
        .map_err(|e| CliError::run(format!("candidate run unusable: {e}")))?;
    let reduction =
        compare_runs(&m_a, &m_b).map_err(|e| CliError::run(format!("comparison failed: {e}")))?;

    let mut report = String::new();
    report.push_str(&metrics_block(&a.spec.name, &traj_a, Some(&m_a)));
    report.push('\n');
    report.push_str(&metrics_block(&b.spec.name, &traj_b, Some(&m_b)));
    report.push_str(&format!("\ninput_mse_reduction: {reduction:.16e}\n"));
    print!("{report}");

    let out = PathBuf::from(overrides.out_dir.clone().unwrap_or_else(|| {
        a.spec
            .output_dir
            .clone()
            .unwrap_or_else(|| format!("out/compare_{}_{}", a.spec.name, b.spec.name))
    }));
    let m = a.plant.output_dim();
    let mut csv = String::from("t");
    for i in 1..=m {
        csv.push_str(&format!(",ua{i}"));
    }
    for i in 1..=m {
        csv.push_str(&format!(",ub{i}"));
    }
    for i in 1..=m {
        csv.push_str(&format!(",ur{i}"));
    }
    csv.push_str(",ratio_a,ratio_b,b_a,b_b\n");
    let u_ref = a.input_ref();
    for i in 0..traj_a.len().min(traj_b.len()) {
        let t = traj_a.times[i];
        csv.push_str(&format!("{t:.16e}"));
        for v in traj_a.inputs[i].iter() {
            csv.push_str(&format!(",{v:.16e}"));
        }
        for v in traj_b.inputs[i].iter() {
            csv.push_str(&format!(",{v:.16e}"));
        }
        for v in u_ref.eval(t, m).iter() {
            csv.push_str(&format!(",{v:.16e}"));
        }
        csv.push_str(&format!(
            ",{:.16e},{:.16e},{:.16e},{:.16e}\n",
            traj_a.ratios[i], traj_b.ratios[i], traj_a.barriers[i], traj_b.barriers[i]
        ));
    }
    write_atomic(&out.join("compare.csv"), csv.as_bytes())?;
    write_atomic(&out.join("compare.txt"), report.as_bytes())?;
    println!("artifacts: {}", out.display());
    Ok(())
}

/// `verify <scenario>`: run the structural checks, the inclusion and
/// witness samplers, and the containment-ratio analysis; write a report
/// and a per-sample CSV. Exit 0 only when every check passes.
pub fn cmd_verify(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let loaded = load_scenario(path, overrides)?;
    let nf = PlantModel::normal_form_by_label(&loaded.spec.plant)
        .map_err(|e| CliError::invalid(format!("no normal form available: {e}")))?;
    let gains = loaded.sim.controller.gains();
    let q_bar = resolve_q_bar(&loaded);
    let (sample_count, witness_samples, seed) = loaded
        .spec
        .verify
        .as_ref()
        .map(|v| (v.sample_count, v.witness_samples, v.seed))
        .unwrap_or((10_000, 1_000, 0));
    let seed = overrides.seed.unwrap_or(seed);

    let mut report = String::new();
    let mut all_pass = true;
    let mut first_failure: Option<String> = None;
    report.push_str(&format!(
        "scenario: {}\nplant: {}\nseed: {seed}\nsamples: {sample_count}\nq_bar: {q_bar:.16e}\n",
        loaded.spec.name, loaded.spec.plant
    ));

    // Structural definiteness over the configured state box (falling back
    // to the bounding box of the sampled region).
    let state_box = resolve_state_box(&loaded).unwrap_or_else(|| {
        let radius = loaded.boundary.psi_sup() + loaded.reference.y_r_sup();
        let m = loaded.plant.output_dim();
        let n = loaded.plant.state_dim();
        let mut lower = vec![-radius; n];
        let mut upper = vec![radius; n];
        for i in m..n {
            lower[i] = -q_bar;
            upper[i] = q_bar;
        }
        SampleBox::new(lower, upper)
    });
    let rel = check_relative_degree_one(&loaded.plant, &state_box, sample_count)
        .map_err(|e| CliError::invalid(format!("definiteness check rejected: {e}")))?;
    report.push_str(&format!(
        "check relative-degree: {} (min symmetric eigenvalue {:.16e} over {} samples)\n",
        if rel.pass { "PASS" } else { "FAIL" },
        rel.min_eigenvalue,
        rel.samples
    ));
    if !rel.pass {
        all_pass = false;
        first_failure.get_or_insert_with(|| "relative-degree".into());
    }

    // Everything below needs model bounds; a structural failure there ends
    // the report early but still writes it.
    let bounds = if rel.pass {
        match estimate_bounds(
            &nf,
            &loaded.boundary,
            &loaded.reference,
            q_bar,
            sample_count.max(1000),
            resolve_output_box(&loaded).as_ref(),
        ) {
            Ok(b) => Some(b),
            Err(e) => {
                report.push_str(&format!("check model-bounds: FAIL ({e})\n"));
                all_pass = false;
                first_failure.get_or_insert_with(|| "model-bounds".into());
                None
            }
        }
    } else {
        None
    };

    let mut samples_csv: Vec<u8> = Vec::new();
    if let Some(bounds) = &bounds {
        report.push_str(&format!(
            "check model-bounds: PASS (f_bar {:.16e}, g_underbar {:.16e}, output_radius {:.16e})\n",
            bounds.f_bar, bounds.g_underbar, bounds.output_radius
        ));
        let alpha = alpha_from_bounds(bounds, &loaded.boundary, gains);
        report.push_str(&format!("alpha slope: {:.16e}\n", alpha.slope()));

        let plan = SamplePlan {
            horizon: loaded.sim.horizon,
            q_bar,
            sample_count,
            seed,
        };
        let inclusion = inclusion_check(
            &nf,
            &loaded.boundary,
            &loaded.reference,
            gains,
            alpha,
            &plan,
        );
        report.push_str(&format!(
            "check inclusion: {} ({} violations / {} samples, worst margin {:.16e})\n",
            if inclusion.violations == 0 {
                "PASS"
            } else {
                "FAIL"
            },
            inclusion.violations,
            inclusion.samples,
            inclusion.worst_margin
        ));
        if inclusion.violations != 0 {
            all_pass = false;
            first_failure.get_or_insert_with(|| "inclusion".into());
        }
        inclusion
            .write_samples_csv(&mut samples_csv)
            .map_err(|e| CliError::invalid(format!("sample csv failed: {e}")))?;

        let witness_plan = SamplePlan {
            sample_count: witness_samples,
            ..plan
        };
        match witness_check(&nf, &loaded.boundary, &loaded.reference, &witness_plan) {
            Ok(witness) => {
                report.push_str(&format!(
                    "check witness-margin: {} (min margin {:.16e} over {} samples, threshold {:.16e})\n",
                    if witness.pass { "PASS" } else { "FAIL" },
                    witness.min_margin,
                    witness.samples,
                    witness.threshold
                ));
                if !witness.pass {
                    all_pass = false;
                    first_failure.get_or_insert_with(|| "witness-margin".into());
                }
            }
            Err(e) => {
                report.push_str(&format!("check witness-margin: FAIL ({e})\n"));
                all_pass = false;
                first_failure.get_or_insert_with(|| "witness-margin".into());
            }
        }

        let e0 = loaded.initial_ratio();
        match error_ratio_bound(bounds, &loaded.boundary, &loaded.reference, gains, e0) {
            Ok(eps) => {
                report.push_str(&format!("epsilon bound: {eps:.16e}\n"));
                let traj = run_scenario(&loaded)?;
                match traj.status {
                    TrajectoryStatus::Completed => {
                        let inv = invariance_check(&traj, eps);
                        report.push_str(&format!(
                            "check invariance: {} (max ratio {:.16e} vs epsilon {:.16e})\n",
                            if inv.holds { "PASS" } else { "FAIL" },
                            inv.max_ratio,
                            inv.epsilon
                        ));
                        if !inv.holds {
                            all_pass = false;
                            first_failure.get_or_insert_with(|| "invariance".into());
                        }
                        let metrics = compute_metrics(&traj, loaded.input_ref())
                            .expect("completed trajectory");
                        let input_bound = gains.k_max() * loaded.boundary.psi_sup()
                            / ((1.0 - eps * eps) * loaded.boundary.psi_inf());
                        let ok = metrics.sup_input_norm <= input_bound + 1e-6;
                        report.push_str(&format!(
                            "check input-bound: {} (sup input norm {:.16e} vs bound {:.16e})\n",
                            if ok { "PASS" } else { "FAIL" },
                            metrics.sup_input_norm,
                            input_bound
                        ));
                        if !ok {
                            all_pass = false;
                            first_failure.get_or_insert_with(|| "input-bound".into());
                        }
                    }
                    status => {
                        report.push_str(&format!(
                            "check invariance: FAIL (run {})\n",
                            status_name(status)
                        ));
                        all_pass = false;
                        first_failure.get_or_insert_with(|| "invariance".into());
                    }
                }
            }
            Err(e) => {
                report.push_str(&format!("epsilon bound: FAIL ({e})\n"));
                all_pass = false;
                first_failure.get_or_insert_with(|| "epsilon-bound".into());
            }
        }
    }

    report.push_str(&format!(
        "overall: {}\n",
        if all_pass { "PASS" } else { "FAIL" }
    ));
    print!("{report}");

    let out = PathBuf::from(&loaded.output_dir);
    write_atomic(&out.join("verify_report.txt"), report.as_bytes())?;
    if !samples_csv.is_empty() {
        write_atomic(&out.join("verify_samples.csv"), &samples_csv)?;
    }
    println!("artifacts: {}", out.display());

    if all_pass {
        Ok(())
    } else {
        Err(CliError::run(format!(
            "verification failed at check '{}'",
            first_failure.unwrap_or_else(|| "unknown".into())
        )))
    }
}

fn parse_trajectory_csv(path: &Path, m: usize) -> Result<Vec<(f64, DVector<f64>)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::invalid("empty trajectory csv".to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let y_idx: Vec<usize> = (1..=m)
        .map(|i| {
            cols.iter()
                .position(|c| *c == format!("y{i}"))
                .ok_or_else(|| CliError::invalid(format!("column y{i} missing in csv header")))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| CliError::invalid(format!("csv line {}: {e}", ln + 2)))
        };
        let t = parse(fields[0])?;
        let mut y = DVector::zeros(m);
        for (j, idx) in y_idx.iter().enumerate() {
            y[j] = parse(fields[*idx])?;
        }
        rows.push((t, y));
    }
    Ok(rows)
}

/// `export <scenario> --from <csv> --out <svg>`: re-render the tube plot
/// from a stored trajectory without re-simulating.
pub fn cmd_export(
    path: &Path,
    from: &Path,
    out: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let loaded = load_scenario(path, overrides)?;
    let rows = parse_trajectory_csv(from, loaded.plant.output_dim())?;
    if rows.is_empty() {
        return Err(CliError::invalid(
            "trajectory csv has no data rows".to_string(),
        ));
    }
    let svg = render_plot(
        &loaded.boundary,
        &loaded.reference,
        loaded.sim.t0,
        loaded.sim.horizon,
        &[Trace {
            label: "closed-loop output",
            color: "#c23b22",
            points: rows.iter().map(|(_, y)| (y[0], y[1])).collect(),
        }],
    );
    write_atomic(out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
