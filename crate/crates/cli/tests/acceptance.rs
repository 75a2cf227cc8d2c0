//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Every tolerance is pinned in code here. Run with `--nocapture` to see the
//! per-criterion lines and measured values.

use std::path::{Path, PathBuf};
use std::time::Instant;

use funnel_cbf::plant::{linear, usv};
use funnel_cbf::sampling::uniform_grid;
use funnel_cbf::verify::{endpoint_consistency_check, SamplePlan};
use funnel_cbf::{
    alpha_from_bounds, barrier_gradient, barrier_time_derivative, barrier_value, compare_runs,
    compute_metrics, error_ratio_bound, estimate_bounds, inclusion_check, invariance_check,
    recovery_run, safety_filter, simulate_closed_loop, witness_check, CandidateControlSet,
    GainInterval, SetOrigin, Trajectory, TrajectoryStatus,
};
use funnel_cbf_cli::scenario::{load_scenario, resolve_output_box, resolve_q_bar, Overrides};
use funnel_cbf_cli::{cmd_simulate, cmd_verify};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> funnel_cbf_cli::LoadedScenario {
    load_scenario(&scenarios_dir().join(name), &Overrides::default()).expect("scenario loads")
}

fn run(loaded: &funnel_cbf_cli::LoadedScenario) -> Trajectory {
    simulate_closed_loop(
        &loaded.plant,
        &loaded.boundary,
        &loaded.reference,
        &loaded.sim,
    )
    .expect("simulation starts")
}

struct Criterion {
    number: u32,
    label: &'static str,
}

impl Criterion {
    fn pass(&self, detail: String) {
        println!("ACCEPTANCE {} PASS [{}]: {detail}", self.number, self.label);
    }

    fn check(&self, ok: bool, detail: String) {
        if ok {
            self.pass(detail);
        } else {
            println!("ACCEPTANCE {} FAIL [{}]: {detail}", self.number, self.label);
            panic!("acceptance criterion {} failed: {detail}", self.number);
        }
    }
}

#[test]
fn acceptance_1_usv_safety_reproduction() {
    let c = Criterion {
        number: 1,
        label: "USV safety: both controllers complete [0,10] strictly inside the tube",
    };
    let mut details = Vec::new();
    for name in ["usv_funnel.json", "usv_cbf.json"] {
        let loaded = load(name);
        assert_eq!(loaded.sim.step, 1e-3, "criterion grid is h=1e-3");
        let t0 = Instant::now();
        let traj = run(&loaded);
        let elapsed = t0.elapsed();
        let ok = traj.status == TrajectoryStatus::Completed
            && traj.len() == 10_001
            && traj.ratios.iter().all(|r| *r < 1.0)
            && elapsed.as_secs_f64() < 10.0;
        details.push(format!(
            "{name}: status={:?} max_ratio={:.6} runtime={:.2}s",
            traj.status,
            traj.max_ratio(),
            elapsed.as_secs_f64()
        ));
        if !ok {
            c.check(false, details.join("; "));
        }
    }
    c.pass(details.join("; "));
}

#[test]
fn acceptance_2_input_mse_reduction() {
    let c = Criterion {
        number: 2,
        label: "input-MSE reduction of the filter against the funnel baseline >= 0.60",
    };
    let funnel = load("usv_funnel.json");
    let filter = load("usv_cbf.json");
    let a = compute_metrics(&run(&funnel), funnel.input_ref()).expect("baseline completes");
    let b = compute_metrics(&run(&filter), filter.input_ref()).expect("filter completes");
    let reduction = compare_runs(&a, &b).expect("baseline MSE positive");
    // Known blocking gap, kept as an honest failure: the benchmark's drift
    // has unit norm everywhere and is deliberately excluded from u_r, so
    // every tube-keeping controller pays mean ||u - u_r||^2 ~ 1.2 fighting
    // it; the funnel baseline's surcharge over that floor is at most ~0.2
    // within grid-refinement-stable initial states. Measured maximum over
    // the scanned initial-state families: ~0.35; the 0.60 band is out of
    // reach for every initial state, and the headline 84 % farther still.
    c.check(
        reduction >= 0.60,
        format!(
            "measured reduction {reduction:.4} (funnel mse {:.4}, filter mse {:.4})",
            a.input_mse, b.input_mse
        ),
    );
}

#[test]
fn acceptance_3_inclusion_and_endpoint_consistency() {
    let c = Criterion {
        number: 3,
        label: "candidate-set inclusion on the linear demo: 0 violations, endpoints decide",
    };
    let loaded = load("linear_cbf.json");
    let nf = linear::plant();
    let gains = loaded.sim.controller.gains();
    let q_bar = resolve_q_bar(&loaded);
    let t0 = Instant::now();
    let bounds = estimate_bounds(
        &nf,
        &loaded.boundary,
        &loaded.reference,
        q_bar,
        10_000,
        resolve_output_box(&loaded).as_ref(),
    )
    .expect("bounds exist for the linear demo");
    let alpha = alpha_from_bounds(&bounds, &loaded.boundary, gains);
    let plan = SamplePlan {
        horizon: loaded.sim.horizon,
        q_bar,
        sample_count: 10_000,
        seed: 42,
    };
    let report = inclusion_check(
        &nf,
        &loaded.boundary,
        &loaded.reference,
        gains,
        alpha,
        &plan,
    );
    let consistency_plan = SamplePlan {
        sample_count: 1_000,
        ..plan
    };
    let discrepancies = endpoint_consistency_check(
        &nf,
        &loaded.boundary,
        &loaded.reference,
        gains,
        alpha,
        &consistency_plan,
        10,
    );
    let elapsed = t0.elapsed();
    c.check(
        report.violations == 0 && discrepancies == 0 && elapsed.as_secs_f64() < 5.0,
        format!(
            "{} violations / {} samples (worst margin {:.3e}), {} endpoint discrepancies, runtime {:.2}s",
            report.violations,
            report.samples,
            report.worst_margin,
            discrepancies,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_4_witness_margins_on_both_plants() {
    let c = Criterion {
        number: 4,
        label: "model-based witness margin >= c*psi_inf^2 - 1e-9 at 1e3 interior samples",
    };
    let mut details = Vec::new();
    // Linear demo, scenario funnel/reference.
    let loaded = load("linear_cbf.json");
    let plan = SamplePlan {
        horizon: loaded.sim.horizon,
        q_bar: resolve_q_bar(&loaded),
        sample_count: 1_000,
        seed: 42,
    };
    let report =
        witness_check(&linear::plant(), &loaded.boundary, &loaded.reference, &plan).unwrap();
    details.push(format!(
        "linear-demo: min margin {:.6} vs threshold {:.6}",
        report.min_margin, report.threshold
    ));
    let linear_ok = report.pass;

    // Surface vessel, scenario funnel/reference.
    let loaded = load("usv_cbf.json");
    let plan = SamplePlan {
        horizon: loaded.sim.horizon,
        q_bar: 0.0,
        sample_count: 1_000,
        seed: 42,
    };
    let report = witness_check(
        &usv::normal_form(),
        &loaded.boundary,
        &loaded.reference,
        &plan,
    )
    .unwrap();
    details.push(format!(
        "usv: min margin {:.6} vs threshold {:.6}",
        report.min_margin, report.threshold
    ));
    c.check(linear_ok && report.pass, details.join("; "));
}

#[test]
fn acceptance_5_containment_ratio_and_input_bound() {
    let c = Criterion {
        number: 5,
        label: "linear demo stays below the computed containment ratio with bounded input",
    };
    let loaded = load("linear_cbf.json");
    let gains = loaded.sim.controller.gains();
    let bounds = estimate_bounds(
        &linear::plant(),
        &loaded.boundary,
        &loaded.reference,
        resolve_q_bar(&loaded),
        10_000,
        None,
    )
    .expect("bounds exist");
    let eps = error_ratio_bound(
        &bounds,
        &loaded.boundary,
        &loaded.reference,
        gains,
        loaded.initial_ratio(),
    )
    .expect("epsilon exists");
    let traj = run(&loaded);
    let inv = invariance_check(&traj, eps);
    let metrics = compute_metrics(&traj, loaded.input_ref()).expect("run completes");
    let input_bound =
        gains.k_max() * loaded.boundary.psi_sup() / ((1.0 - eps * eps) * loaded.boundary.psi_inf());
    c.check(
        eps < 1.0 && inv.holds && metrics.sup_input_norm <= input_bound + 1e-6,
        format!(
            "epsilon {eps:.5}, max ratio {:.5}, sup input {:.4} vs bound {:.4}",
            inv.max_ratio, metrics.sup_input_norm, input_bound
        ),
    );
}

#[test]
fn acceptance_6_filter_matches_brute_force_oracle() {
    let c = Criterion {
        number: 6,
        label: "closed-form filter objective within 1e-9 of a 1e4-point gain-grid oracle",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1_000 {
        let m = rng.random_range(1..=5);
        let direction = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let denominator = rng.random_range(1e-3..2.0);
        let k_min = 10f64.powf(rng.random_range(-3.0..0.0));
        let k_max = k_min * 10f64.powf(rng.random_range(0.0..4.0));
        let gains = GainInterval::new(k_min, k_max).unwrap();
        let set =
            CandidateControlSet::from_parts(direction, denominator, gains, SetOrigin::Interior)
                .unwrap();
        let u_ref = DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0));

        let closed = (safety_filter(&set, &u_ref).input - &u_ref).norm_squared();
        let d = set.unit_element();
        let oracle = (0..10_000)
            .map(|i| {
                let k = k_min + (k_max - k_min) * i as f64 / 9_999.0;
                (&d * k - &u_ref).norm_squared()
            })
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(closed - oracle);
    }
    c.check(
        worst_gap <= 1e-9,
        format!("worst objective excess over the oracle: {worst_gap:.3e}"),
    );
}

#[test]
fn acceptance_7_barrier_derivative_consistency() {
    let c = Criterion {
        number: 7,
        label: "barrier gradient and time derivative match central differences to 1e-6",
    };
    let grid = uniform_grid(0.0, 10.0, 1e-2);
    let boundary = usv::funnel(&grid).unwrap();
    let reference = usv::reference(&grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let t = rng.random_range(0.1..9.9);
        let y = reference.y_r(t) + DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let grad = barrier_gradient(t, &y, &reference);
        for i in 0..3 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let fd = (barrier_value(t, &yp, &boundary, &reference)
                - barrier_value(t, &ym, &boundary, &reference))
                / (2.0 * h);
            worst = worst.max((grad[i] - fd).abs());
        }
        let fd = (barrier_value(t + h, &y, &boundary, &reference)
            - barrier_value(t - h, &y, &boundary, &reference))
            / (2.0 * h);
        worst = worst.max((barrier_time_derivative(t, &y, &boundary, &reference) - fd).abs());
    }
    c.check(worst < 1e-6, format!("worst deviation {worst:.3e}"));
}

#[test]
fn acceptance_8_saturated_filter_recovery() {
    let c = Criterion {
        number: 8,
        label: "saturated filter recovers into the tube and stays; weak gains may fail",
    };
    let loaded = load("linear_recovery.json");
    assert!(loaded.initial_ratio() > 1.0, "recovery starts outside");
    let out = recovery_run(
        &loaded.plant,
        &loaded.boundary,
        &loaded.reference,
        &loaded.sim,
    )
    .expect("saturated controller accepted");
    let entered = out.entered_at;
    let strong_ok = out.trajectory.status == TrajectoryStatus::Completed
        && entered.is_some()
        && out.remains_interior;

    // Negative control: deliberately weak gains, documented as allowed to
    // fail to re-enter.
    let weak = load("linear_recovery_weak.json");
    let weak_out = recovery_run(&weak.plant, &weak.boundary, &weak.reference, &weak.sim)
        .expect("saturated controller accepted");
    c.check(
        strong_ok,
        format!(
            "entered at {:?}, remains interior {}; weak-gain control entered at {:?} (allowed to fail), remains {}",
            entered, out.remains_interior, weak_out.entered_at, weak_out.remains_interior
        ),
    );
}

#[test]
fn acceptance_9_csv_determinism() {
    let c = Criterion {
        number: 9,
        label: "identical scenario and seed produce byte-identical CSV artifacts",
    };
    let tmp = tempfile::tempdir().expect("temp dir");
    let run_once = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let sim_dir = tmp.path().join(format!("sim-{tag}"));
        let ver_dir = tmp.path().join(format!("ver-{tag}"));
        cmd_simulate(
            &scenarios_dir().join("usv_cbf.json"),
            &Overrides {
                out_dir: Some(sim_dir.to_string_lossy().into_owned()),
                no_plot: true,
                ..Default::default()
            },
        )
        .expect("simulate succeeds");
        cmd_verify(
            &scenarios_dir().join("linear_cbf.json"),
            &Overrides {
                out_dir: Some(ver_dir.to_string_lossy().into_owned()),
                seed: Some(42),
                ..Default::default()
            },
        )
        .expect("verify succeeds");
        (
            std::fs::read(sim_dir.join("trajectory.csv")).unwrap(),
            std::fs::read(ver_dir.join("verify_samples.csv")).unwrap(),
            std::fs::read(ver_dir.join("verify_report.txt")).unwrap(),
        )
    };
    let (sim_a, ver_a, rep_a) = run_once("a");
    let (sim_b, ver_b, rep_b) = run_once("b");
    c.check(
        sim_a == sim_b && ver_a == ver_b && rep_a == rep_b,
        format!(
            "trajectory.csv {} bytes identical: {}; verify_samples.csv {} bytes identical: {}; verify_report.txt identical: {}",
            sim_a.len(),
            sim_a == sim_b,
            ver_a.len(),
            ver_a == ver_b,
            rep_a == rep_b
        ),
    );
}
