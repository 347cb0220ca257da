//! Acceptance suite: eight criteria, evaluated in order, one PASS/FAIL line
//! each. Run with `cargo test -p crowdtrack --test acceptance -- --nocapture`
//! to see the lines and measurements even when everything passes.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;

use crowdtrack::calibration::{
    compare_optimizers, replay_error, select_from_fits, select_model, Method, OptimizerBenchmark, OptimizerSpec,
    SelectionMode,
};
use crowdtrack::dataset::{Record, SourceTag, TrajectoryDataset};
use crowdtrack::evaluation::{clear_mot, evaluate, rms_error, MatchConfig};
use crowdtrack::models::rvo::{rvo_new_velocity, solve_velocity, OrcaLine, RvoNeighbor};
use crowdtrack::models::{AgentParams, ModelConstants, ModelKind, ModelParams};
use crowdtrack::rng::substream;
use crowdtrack::scenario::Scenario;
use crowdtrack::synthesis::{generate, sample_template_params, DensityClass, ScenarioTemplate, TemplateKind, TrackingSuite};
use crowdtrack::tracking::{track, NoiseModel, TrackOutput, TrackerConfig};
use crowdtrack::{AgentState, Snapshot, StateHistory, Vec2};

#[derive(Default)]
struct Ledger {
    results: Vec<(usize, bool)>,
}

impl Ledger {
    fn record(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        println!("criterion {id} {}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((id, pass));
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// ---------------------------------------------------------------- criterion 1

/// Window length for recovery: the full 60-frame scene (k = 59).
const RECOVERY_K: usize = 59;

fn criterion_1(ledger: &mut Ledger) {
    let started = Instant::now();
    let constants = ModelConstants::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in ModelKind::ALL {
        let (mut global_ok, mut agents_ok, mut agents_total) = (0, 0, 0);
        for seed in 0..20u64 {
            let agents = 8 + (seed as usize * 7) % 13;
            let template = ScenarioTemplate::new(TemplateKind::ALL[seed as usize % 4], agents, DensityClass::Medium, seed);
            let params = sample_template_params(&template, kind, seed + 100);
            let generated = generate(&template, kind, &params, 60, &constants).expect("scene generates");
            let mut window = StateHistory::new(RECOVERY_K, generated.scenario.dt).unwrap();
            for s in generated.ground_truth.snapshots().into_values() {
                window.push(s).unwrap();
            }
            let spec = OptimizerSpec::new(Method::Genetic, 20, seed);
            let per_agent = select_model(&window, &generated.scenario, &spec, SelectionMode::PerAgent, &constants).unwrap();
            // Global mode selects from the same fits.
            let global =
                select_from_fits(per_agent.fits.values().cloned().collect(), SelectionMode::Global, 1e-9);
            global_ok += (global.best_kind == kind) as usize;

            // Interacting agents: those constant velocity cannot replay.
            let lin = &per_agent.fits[&ModelKind::Lin].per_agent_error;
            for (id, model) in &per_agent.agent_models {
                if kind == ModelKind::Lin || lin[id] > 1e-3 * RECOVERY_K as f64 {
                    agents_total += 1;
                    agents_ok += (*model == kind) as usize;
                }
            }
        }
        let rate = agents_ok as f64 / agents_total.max(1) as f64;
        pass &= rate >= 0.9 && global_ok >= 18;
        lines.push(format!("{} per-agent {agents_ok}/{agents_total} ({:.1}%) global {global_ok}/20", kind, 100.0 * rate));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 300.0;
    ledger.record(1, "model recovery", pass, format!("{}; {elapsed:.0} s (limit 300 s)", lines.join("; ")));
}

// ------------------------------------------------------------ criteria 2 to 4

struct Arm {
    success: Vec<f64>,
    rms: Vec<f64>,
    particles: Vec<f64>,
    wall: Vec<f64>,
    filter: Vec<f64>,
    steps_per_second: Vec<f64>,
}

impl Arm {
    fn new() -> Self {
        Self { success: vec![], rms: vec![], particles: vec![], wall: vec![], filter: vec![], steps_per_second: vec![] }
    }

    fn push(&mut self, out: &TrackOutput, success: f64, rms: f64) {
        self.success.push(success);
        self.rms.push(rms);
        self.particles.push(out.mean_particles());
        self.wall.push(out.wall_time);
        self.filter.push(out.wall_time - out.calibration_time);
        self.steps_per_second.push(out.steps_per_second());
    }
}

fn criteria_2_to_4(ledger: &mut Ledger) {
    let suite = TrackingSuite::default();
    let constants = ModelConstants::default();
    let matching = MatchConfig::default();
    let (mut mixture, mut lin, mut constant) = (Arm::new(), Arm::new(), Arm::new());
    for seed in 0..10u64 {
        let case = suite.case(seed, &constants).expect("suite scene generates");
        let base = TrackerConfig { seed, ..Default::default() };
        let runs: [(&mut Arm, TrackerConfig); 3] = [
            (&mut mixture, base.clone()),
            (&mut lin, TrackerConfig { forced_model: Some(ModelKind::Lin), ..base.clone() }),
            (&mut constant, {
                let mut c = base.clone();
                c.particles.adaptive = false;
                c
            }),
        ];
        for (arm, config) in runs {
            let out = track(&case.observations, &case.generated.scenario, &config).unwrap();
            let report = evaluate(&case.generated.ground_truth, &out.estimates, &matching).unwrap();
            arm.push(&out, report.success_rate, report.rms_error);
        }
    }
    let n_max = TrackerConfig::default().particles.n_max as f64;

    // 2: mixture versus forced LIN.
    let gaps: Vec<f64> = mixture.success.iter().zip(&lin.success).map(|(m, l)| m - l).collect();
    let st_gap = median(&gaps);
    let rms_wins = mixture.rms.iter().zip(&lin.rms).filter(|(m, l)| m < l).count();
    ledger.record(
        2,
        "mixture beats forced LIN",
        st_gap >= 0.05 && rms_wins >= 8,
        format!(
            "median ST gap {:.1} pp (need >= 5.0; mixture ST {:.3}, LIN ST {:.3}); RMS lower on {rms_wins}/10 seeds \
             (need >= 8; mean RMS mixture {:.4} m, LIN {:.4} m)",
            100.0 * st_gap,
            mean(&mixture.success),
            mean(&lin.success),
            mean(&mixture.rms),
            mean(&lin.rms)
        ),
    );

    // 3: adaptive particle economy.
    let particles = mean(&mixture.particles);
    let st_diff = (mean(&mixture.success) - mean(&constant.success)).abs();
    let time_ratio = mixture.wall.iter().sum::<f64>() / constant.wall.iter().sum::<f64>();
    let filter_ratio = mixture.filter.iter().sum::<f64>() / constant.filter.iter().sum::<f64>();
    ledger.record(
        3,
        "adaptive particle economy",
        particles <= 0.5 * n_max && st_diff <= 0.02 && time_ratio <= 0.6,
        format!(
            "mean particles {particles:.1} (need <= {:.0}); ST difference {:.1} pp (need <= 2.0); wall time ratio \
             {time_ratio:.2} (need <= 0.60; filter-only ratio {filter_ratio:.2})",
            0.5 * n_max,
            100.0 * st_diff
        ),
    );

    // 4: throughput of the adaptive mixture runs.
    let sps = median(&mixture.steps_per_second);
    let worst = mixture.steps_per_second.iter().copied().fold(f64::INFINITY, f64::min);
    ledger.record(
        4,
        "throughput",
        sps >= 25.0,
        format!(
            "median {sps:.1} steps/s, slowest {worst:.1} (need >= 25) with 50 agents on {} worker thread(s)",
            rayon::current_num_threads()
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5(ledger: &mut Ledger) {
    let bench = OptimizerBenchmark::default();
    let cmp = compare_optimizers(&bench, &ModelConstants::default()).unwrap();
    print!("{}", cmp.render());
    let mut pass = true;
    let mut lines = Vec::new();
    for model in bench.models.iter().copied().map(Some).chain([None]) {
        let med = |m: Method| cmp.summary(model, m).expect("method ran").median;
        let (ga, sa, greedy) = (med(Method::Genetic), med(Method::SimulatedAnnealing), med(Method::Greedy));
        let ok = ga <= sa && sa <= 1.2 * greedy;
        pass &= ok;
        let name = model.map_or("pooled".to_string(), |m| m.to_string());
        lines.push(format!("{name}: GA {ga:.4} <= SA {sa:.4} <= 1.2 x greedy {:.4} {}", 1.2 * greedy, if ok { "ok" } else { "violated" }));
    }
    let full_table = cmp.trials.len() == bench.models.len() * bench.methods.len() * bench.seeds as usize
        && cmp.trials.iter().all(|t| t.evaluations == bench.evaluations);
    pass &= full_table;
    ledger.record(
        5,
        "optimizer ordering",
        pass,
        format!("{} evaluations each, {} seeds; {}", bench.evaluations, bench.seeds, lines.join("; ")),
    );
}

// ---------------------------------------------------------------- criterion 6

fn dataset(rows: &[(u64, u32, f64, f64)]) -> TrajectoryDataset {
    let records = rows.iter().map(|&(f, id, x, y)| Record::new(f, id, Vec2::new(x, y))).collect();
    TrajectoryDataset::new(records, 25.0, SourceTag::GroundTruth).sorted()
}

fn criterion_6(ledger: &mut Ledger) {
    let cfg = MatchConfig::default();
    let mut checks = Vec::new();

    // Identity tracking.
    let rows: Vec<_> = (0..20u64).flat_map(|f| (0..5u32).map(move |i| (f, i, i as f64 * 3.0 + f as f64 * 0.1, 0.0))).collect();
    let gt = dataset(&rows);
    let mot = clear_mot(&gt, &gt, &cfg).unwrap();
    checks.push(("identity MOTA 1 / MOTP 0", mot.mota == 1.0 && mot.motp == 0.0));

    // Ten objects, one missed in one frame.
    let gt = dataset(&(0..10u32).map(|i| (0, i, i as f64 * 5.0, 0.0)).collect::<Vec<_>>());
    let est = dataset(&(0..9u32).map(|i| (0, i, i as f64 * 5.0, 0.0)).collect::<Vec<_>>());
    let mot = clear_mot(&gt, &est, &cfg).unwrap();
    checks.push(("one miss of ten MOTA 0.9", (mot.mota - 0.9).abs() < 1e-12 && mot.misses == 1));

    // Two tracks whose estimated identities swap mid-sequence.
    let mut rows = Vec::new();
    for f in 0..10u64 {
        let (a, b) = if f < 5 { (0, 1) } else { (1, 0) };
        rows.push((f, a, 0.0, f as f64 * 0.1));
        rows.push((f, b, 10.0, f as f64 * 0.1));
    }
    let est = dataset(&rows);
    let gt = dataset(&(0..10u64).flat_map(|f| [(f, 0, 0.0, f as f64 * 0.1), (f, 1, 10.0, f as f64 * 0.1)]).collect::<Vec<_>>());
    let mot = clear_mot(&gt, &est, &cfg).unwrap();
    checks.push(("swap fixture 2 ID switches", mot.id_switches == 2));

    // Replay error of a constant (0.3, 0.4) offset over five scored frames.
    let dt = 0.1;
    let mut window = StateHistory::new(5, dt).unwrap();
    let v = Vec2::new(1.0, 0.0);
    window.push(Snapshot::new(0, BTreeMap::from([(1, AgentState::new(Vec2::ZERO, v))]))).unwrap();
    for i in 1..=5u64 {
        let p = Vec2::new(i as f64 * dt, 0.0) + Vec2::new(0.3, 0.4);
        window.push(Snapshot::new(i, BTreeMap::from([(1, AgentState::new(p, v))]))).unwrap();
    }
    let scenario = Scenario::new(dt, crowdtrack::geometry::Bounds::new(Vec2::splat(-10.0), Vec2::splat(10.0)));
    let e = replay_error(ModelKind::Lin, &ModelParams::new(ModelKind::Lin), &window, &scenario, &ModelConstants::default())
        .unwrap();
    checks.push(("replay offset error 2.5", (e.total - 2.5).abs() <= 1e-9));

    // RMS of a constant (0.3, 0.4) offset.
    let gt = dataset(&(0..10u64).map(|f| (f, 0, f as f64, 0.0)).collect::<Vec<_>>());
    let est = dataset(&(0..10u64).map(|f| (f, 0, f as f64 + 0.3, 0.4)).collect::<Vec<_>>());
    checks.push(("RMS offset 0.5", (rms_error(&gt, &est).unwrap() - 0.5).abs() <= 1e-9));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    ledger.record(
        6,
        "metric correctness",
        failed.is_empty(),
        if failed.is_empty() { format!("{} fixtures exact", checks.len()) } else { format!("failed: {}", failed.join(", ")) },
    );
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7(ledger: &mut Ledger) {
    let constants = ModelConstants::default();

    // Zero-noise LIN: constant-velocity truth observed exactly.
    let template = ScenarioTemplate::new(TemplateKind::RandomGoals, 12, DensityClass::Low, 5);
    let lin_truth = generate(&template, ModelKind::Lin, &ModelParams::new(ModelKind::Lin), 200, &constants).unwrap();
    let config = TrackerConfig { forced_model: Some(ModelKind::Lin), noise: NoiseModel::new(0.0, 0.0), ..Default::default() };
    let out = track(&lin_truth.ground_truth, &lin_truth.scenario, &config).unwrap();
    let truth = lin_truth.ground_truth.positions_by_frame();
    let worst = out
        .estimates
        .records
        .iter()
        .map(|r| r.position().distance(truth[&r.frame][&r.agent_id]))
        .fold(0.0, f64::max);

    // Weight normalization across a noisy 200-frame mixture run.
    let suite = TrackingSuite { agents: 20, ..Default::default() };
    let case = suite.case(3, &constants).unwrap();
    let base = TrackerConfig { seed: 11, ..Default::default() };
    let runs: Vec<TrackOutput> = [1usize, 4, 8]
        .iter()
        .map(|&n| track(&case.observations, &case.generated.scenario, &TrackerConfig { threads: Some(n), ..base.clone() }).unwrap())
        .collect();
    let normalization = runs[0].stats.max_normalization_error;
    let frames = runs[0].stats.frames_tracked;
    let identical = runs.iter().all(|r| {
        r.estimates.records.iter().zip(&runs[0].estimates.records).all(|(a, b)| {
            (a.frame, a.agent_id, a.x.to_bits(), a.y.to_bits()) == (b.frame, b.agent_id, b.x.to_bits(), b.y.to_bits())
        }) && r.estimates.records.len() == runs[0].estimates.records.len()
            && r.diagnostics == runs[0].diagnostics
    });
    ledger.record(
        7,
        "filter sanity",
        worst <= 1e-3 && normalization <= 1e-9 && identical,
        format!(
            "zero-noise LIN max error {worst:.2e} m (need <= 1e-3); max |sum w - 1| {normalization:.2e} over {frames} \
             frames (need <= 1e-9); 1/4/8 threads bit-identical: {identical}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

fn min_separation(pa: Vec2, va: Vec2, pb: Vec2, vb: Vec2, horizon: f64) -> f64 {
    let (dp, dv) = (pb - pa, vb - va);
    let t = if dv.length_squared() > 0.0 { (-dp.dot(dv) / dv.length_squared()).clamp(0.0, horizon) } else { 0.0 };
    (dp + dv * t).length()
}

/// Best objective over feasible points of a velocity grid.
fn grid_optimum(lines: &[OrcaLine], max_speed: f64, v_pref: Vec2, step: f64) -> Option<f64> {
    let n = (max_speed / step).ceil() as i64;
    let mut best: Option<f64> = None;
    for i in -n..=n {
        for j in -n..=n {
            let v = Vec2::new(i as f64 * step, j as f64 * step);
            if v.length() > max_speed || lines.iter().any(|l| l.violation(v) > 0.0) {
                continue;
            }
            let d = v.distance(v_pref);
            if best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        }
    }
    best
}

fn criterion_8(ledger: &mut Ledger) {
    let mut rng = substream(8, &[]);
    let dt = 0.1;

    // Reciprocal safety over the time horizon.
    let (mut feasible, mut violations, mut draws) = (0, 0, 0);
    let mut worst_gap = f64::INFINITY;
    while feasible < 1000 {
        draws += 1;
        let horizon = rng.random_range(1.0..5.0);
        let mut params = [AgentParams::mean(ModelKind::Rvo); 2];
        for p in &mut params {
            p.radius = rng.random_range(0.2..0.5);
            p.comfort_speed = rng.random_range(0.8..2.0);
            p.agent_time_horizon = horizon;
            p.neighbor_distance = 20.0;
        }
        let combined = params[0].radius + params[1].radius;
        let disc = |rng: &mut crowdtrack::rng::Rng, r: f64| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Vec2::new(a.cos(), a.sin()) * r * rng.random::<f64>().sqrt()
        };
        let pa = Vec2::ZERO;
        let pb = disc(&mut rng, 6.0);
        if pb.length() <= combined {
            continue;
        }
        let states = [AgentState::new(pa, disc(&mut rng, 2.0)), AgentState::new(pb, disc(&mut rng, 2.0))];
        let prefs = [disc(&mut rng, params[0].comfort_speed), disc(&mut rng, params[1].comfort_speed)];
        let mut velocities = [Vec2::ZERO; 2];
        let mut ok = true;
        for i in 0..2 {
            let other = RvoNeighbor { state: states[1 - i], radius: params[1 - i].radius };
            velocities[i] = rvo_new_velocity(&states[i], &[other], &[], &params[i], prefs[i], dt);
            let line = crowdtrack::models::rvo::agent_orca_line(&states[i], params[i].radius, &other, horizon, dt);
            ok &= line.contains(velocities[i]);
        }
        if !ok {
            continue;
        }
        feasible += 1;
        let gap = min_separation(pa, velocities[0], pb, velocities[1], horizon) - combined;
        worst_gap = worst_gap.min(gap);
        violations += (gap < -1e-9) as usize;
    }

    // Sequential LP against a brute-force velocity grid.
    let step = 0.01;
    let (mut sets, mut lp_worse, mut lp_infeasible) = (0, 0, 0);
    let (mut worst_excess, mut worst_fine_excess): (f64, f64) = (0.0, 0.0);
    let mut over_step = 0;
    while sets < 100 {
        let max_speed = rng.random_range(1.0..2.0);
        let count = rng.random_range(1..=5);
        let lines: Vec<OrcaLine> = (0..count)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                OrcaLine::from_normal(Vec2::new(a.cos(), a.sin()), rng.random_range(-0.5..1.5))
            })
            .collect();
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let v_pref = Vec2::new(a.cos(), a.sin()) * rng.random_range(0.0..2.5);
        let Some(grid_best) = grid_optimum(&lines, max_speed, v_pref, step) else {
            continue;
        };
        sets += 1;
        let v = solve_velocity(&lines, 0, max_speed, v_pref);
        if v.length() > max_speed + 1e-9 || lines.iter().any(|l| l.violation(v) > 1e-9) {
            lp_infeasible += 1;
        }
        let d = v.distance(v_pref);
        // The LP optimum can never lose to a feasible grid point, and the
        // grid must come within its resolution of the LP optimum.
        lp_worse += (d > grid_best + 1e-9) as usize;
        worst_excess = worst_excess.max(grid_best - d);
        if grid_best - d > step {
            // Diagnostic only: a 10x finer grid on the same set.
            over_step += 1;
            let fine = grid_optimum(&lines, max_speed, v_pref, step / 10.0).expect("finer grid keeps coarse points");
            worst_fine_excess = worst_fine_excess.max(fine - d);
        }
    }
    let lp_ok = lp_worse == 0 && lp_infeasible == 0 && worst_excess <= step;
    ledger.record(
        8,
        "ORCA safety",
        violations == 0 && lp_ok,
        format!(
            "{violations} separation violations in {feasible} feasible pairs ({draws} draws, tightest clearance \
             {worst_gap:.2e} m); LP vs 0.01 m/s grid on {sets} sets: {lp_infeasible} infeasible, {lp_worse} worse than \
             grid, largest grid excess {worst_excess:.4} m/s (need <= {step}); {over_step} sets over the step, where a \
             0.001 m/s grid comes within {worst_fine_excess:.4} m/s"
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger::default();
    criterion_1(&mut ledger);
    criteria_2_to_4(&mut ledger);
    criterion_5(&mut ledger);
    criterion_6(&mut ledger);
    criterion_7(&mut ledger);
    criterion_8(&mut ledger);
    let failed: Vec<usize> = ledger.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        ledger.results.len() - failed.len(),
        ledger.results.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
