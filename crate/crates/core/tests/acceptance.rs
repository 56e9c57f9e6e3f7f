//! End-to-end acceptance checks. Each check prints one PASS/FAIL line with the
//! measured value next to its bound, then asserts.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use negotiate_core::action::{ActionForceState, ForceSampler};
use negotiate_core::dynamics::{admittance_step, AdmittanceParams};
use negotiate_core::harness::{
    default_model, generate_assignments, generate_training_trials, run_batch, train_model, BatchReport, RecordLevel,
    TrialMetrics,
};
use negotiate_core::hlc::{Hlc, HlcConfig, HlcInputs, HlcState, Machine, Phase, RobotRole, Termination};
use negotiate_core::intent::{lda_predict, split_by_trial, FeatureVector, IntentLabel, LdaModel, FEATURE_DIM};
use negotiate_core::signal::design_lowpass;
use negotiate_core::{GoalAssignment, GoalSet, PlanarPose, PlanarTwist, PlanarWrench, Profile, TrialConfig, Vec2};

fn report(id: u32, name: &str, ok: bool, detail: String) {
    println!("[{}] {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn metrics(rep: &BatchReport) -> Vec<TrialMetrics> {
    rep.rows.iter().map(|r| r.metrics.unwrap_or_else(|| panic!("trial {} failed: {:?}", r.index, r.failure))).collect()
}

/// Robot and human goals for trial `i`: always different, each ordered pair
/// equally often.
fn distinct_goals(i: u64) -> (usize, usize) {
    let r = (i % 3) as usize;
    let h = (r + 1 + ((i / 3) % 2) as usize) % 3;
    (r, h)
}

fn hard_vs_soft() -> Vec<TrialConfig> {
    (0..200)
        .map(|i| {
            let (r, h) = distinct_goals(i);
            TrialConfig::new(RobotRole::Hard(r), GoalAssignment::soft(h), 2000 + i).with_record(RecordLevel::Summary)
        })
        .collect()
}

fn soft_vs_soft() -> Vec<TrialConfig> {
    (0..200)
        .map(|i| {
            let (r, h) = distinct_goals(i);
            TrialConfig::new(RobotRole::Soft(r), GoalAssignment::soft(h), 3000 + i).with_record(RecordLevel::Summary)
        })
        .collect()
}

fn model() -> LdaModel {
    default_model(&Profile::default()).unwrap()
}

/// The hard/soft and soft/soft batches, shared by three tests.
fn closed_loop() -> &'static (BatchReport, BatchReport) {
    static BATCHES: OnceLock<(BatchReport, BatchReport)> = OnceLock::new();
    BATCHES.get_or_init(|| {
        let m = model();
        let hs = run_batch(&hard_vs_soft(), 8, Some(&m)).unwrap();
        let ss = run_batch(&soft_vs_soft(), 8, Some(&m)).unwrap();
        (hs, ss)
    })
}

fn admittance_fixed_point() {
    let t0 = Instant::now();
    let p = AdmittanceParams::default();
    let f = PlanarWrench::new(10.0, 0.0, 0.0);
    let steps = (5.0 / p.dt).round() as usize;
    let mut v = PlanarTwist::ZERO;
    for _ in 0..steps {
        v = admittance_step(v, PlanarWrench::ZERO, f, &p).0;
    }
    let speed = v.vx;

    let mut decay_ok = true;
    let mut w = PlanarTwist::new(0.45, -0.3, 0.8);
    for _ in 0..steps {
        let next = admittance_step(w, PlanarWrench::ZERO, PlanarWrench::ZERO, &p).0;
        for (a, b) in [(w.vx, next.vx), (w.vy, next.vy), (w.wz, next.wz)] {
            decay_ok &= b.abs() <= a.abs() && a * b >= 0.0;
        }
        w = next;
    }
    let elapsed = t0.elapsed();
    let ok = (speed - 0.4).abs() <= 1e-3 && decay_ok && elapsed < Duration::from_secs(1);
    report(
        1,
        "admittance fixed point",
        ok,
        format!("v(5 s)={speed:.6} m/s (0.400 ± 1e-3), monotone decay={decay_ok}, {elapsed:.2?} (< 1 s)"),
    );
    assert!(ok);
}

fn action_force_law() {
    let dt: f64 = 0.002;
    let mut a = ActionForceState::new(0.2);
    a.set_reference(Vec2::new(0.6, 0.8), 10.0, 3.0, 15.0);
    let n = (0.2 / dt).round() as usize;
    for _ in 0..n {
        a.step(dt, false);
    }
    let frac = a.f_act.magnitude() / 10.0;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s = ActionForceState::new(0.2);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        if rng.random::<f64>() < 0.05 {
            let dir = Vec2::new(1.0, 0.0).rotated(rng.random_range(-PI..PI));
            if rng.random::<f64>() < 0.1 {
                s.set_reference_raw(dir, rng.random_range(0.0..15.0));
            } else {
                s.set_reference(dir, rng.random_range(0.0..20.0), 3.0, 15.0);
            }
        }
        let before = s.f_act.magnitude();
        let after = s.step(dt, rng.random::<f64>() < 0.001).magnitude();
        if after > before.max(s.f_ref.magnitude()) + 1e-9 {
            violations += 1;
        }
    }
    let ok = (frac - 0.632).abs() <= 0.01 && violations == 0;
    report(
        2,
        "action force law",
        ok,
        format!("F_act(0.2 s)/F_ref={frac:.4} (0.632 ± 0.01), convex-bound violations={violations}/100000"),
    );
    assert!(ok);
}

fn sensing_filter_design() {
    let sections = design_lowpass(5.0, 500.0, 2).unwrap();
    let dc: f64 = sections.iter().map(|s| s.dc_gain()).product();
    let omega = 2.0 * PI * 50.0 / 500.0;
    let gain: f64 = sections.iter().map(|s| s.magnitude_at(omega)).product();
    let atten_db = -20.0 * gain.log10();
    let r_max = sections.iter().flat_map(|s| s.pole_radii()).fold(0.0, f64::max);
    let ok = (dc - 1.0).abs() <= 1e-9 && atten_db >= 38.0 && r_max < 1.0;
    report(
        3,
        "low-pass filter",
        ok,
        format!("DC gain={dc:.12} (1 ± 1e-9), attenuation@50 Hz={atten_db:.2} dB (≥ 38), max |pole|={r_max:.6} (< 1)"),
    );
    assert!(ok);
}

/// MAP class under shared-covariance Gaussians, computed from the raw
/// samples with an LU solve and the full log-density.
struct GaussianOracle {
    means: Vec<DVector<f64>>,
    cov: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    log_det: f64,
    log_priors: Vec<f64>,
}

impl GaussianOracle {
    fn fit(samples: &[(FeatureVector, usize)], k: usize) -> Self {
        let d = FEATURE_DIM;
        let mut sums = vec![DVector::zeros(d); k];
        let mut counts = vec![0usize; k];
        for (x, c) in samples {
            sums[*c] += DVector::from_column_slice(x.as_slice());
            counts[*c] += 1;
        }
        let means: Vec<DVector<f64>> = sums.iter().zip(&counts).map(|(s, n)| s / *n as f64).collect();
        let mut cov = DMatrix::zeros(d, d);
        for (x, c) in samples {
            let e = DVector::from_column_slice(x.as_slice()) - &means[*c];
            cov += &e * e.transpose();
        }
        cov /= (samples.len() - k) as f64;
        let lambda = 1e-6 * cov.trace() / d as f64;
        cov += DMatrix::identity(d, d) * lambda;
        let log_det = cov.clone().cholesky().unwrap().l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let n = samples.len() as f64;
        Self { means, cov: cov.lu(), log_det, log_priors: counts.iter().map(|c| (*c as f64 / n).ln()).collect() }
    }

    fn classify(&self, x: &[f64]) -> usize {
        let x = DVector::from_column_slice(x);
        let d = x.len() as f64;
        let scores: Vec<f64> = self
            .means
            .iter()
            .zip(&self.log_priors)
            .map(|(m, lp)| {
                let e = &x - m;
                let q = e.dot(&self.cov.solve(&e).unwrap());
                -0.5 * (q + self.log_det + d * (2.0 * PI).ln()) + lp
            })
            .collect();
        (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap()
    }
}

fn intent_classifier() {
    let t0 = Instant::now();
    let profile = Profile::default();
    let records = generate_training_trials(18, &profile, profile.training.seed).unwrap();
    let (train, test) = split_by_trial(records, 12);
    let model = train_model(&train, &profile).unwrap();
    let correct =
        test.iter().filter(|r| lda_predict(&model, &r.features, r.t).label == IntentLabel::Goal(r.label)).count();
    let accuracy = correct as f64 / test.len() as f64;

    let samples: Vec<(FeatureVector, usize)> = train.iter().map(|r| (r.features, r.label)).collect();
    let oracle = GaussianOracle::fit(&samples, 3);
    let spread: Vec<f64> = (0..FEATURE_DIM)
        .map(|j| {
            let col: Vec<f64> = samples.iter().map(|(x, _)| x.0[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disagreements = 0;
    let mut bad_posteriors = 0;
    for _ in 0..1000 {
        let centre = &model.means()[rng.random_range(0..3)];
        let mut x = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            x[j] = centre[j] + spread[j] * rng.random_range(-2.0..2.0);
        }
        let est = lda_predict(&model, &FeatureVector(x), 0.0);
        if est.label != IntentLabel::Goal(oracle.classify(&x)) {
            disagreements += 1;
        }
        if (est.posteriors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bad_posteriors += 1;
        }
    }
    let elapsed = t0.elapsed();
    let ok = disagreements == 0 && bad_posteriors == 0 && accuracy >= 0.90 && elapsed < Duration::from_secs(10);
    report(
        4,
        "intent classifier",
        ok,
        format!(
            "oracle disagreements={disagreements}/1000 (0), held-out accuracy={:.2}% on {} samples (≥ 90%), {elapsed:.2?} (< 10 s)",
            100.0 * accuracy,
            test.len()
        ),
    );
    assert!(ok);
}

/// Sticky random label and stretch streams driving the machines directly.
struct RandomStream {
    rng: ChaCha8Rng,
    label: IntentLabel,
    stretch: f64,
}

impl RandomStream {
    fn next(&mut self, t: f64) -> HlcInputs {
        let rng = &mut self.rng;
        if rng.random::<f64>() < 0.04 {
            self.label = match rng.random_range(0..4) {
                3 => IntentLabel::Idle,
                g => IntentLabel::Goal(g),
            };
        }
        self.stretch = if rng.random::<f64>() < 0.02 {
            rng.random_range(0.0..36.0)
        } else {
            (self.stretch + rng.random_range(-1.0..1.0)).clamp(0.0, 36.0)
        };
        let committed = (rng.random::<f64>() < 0.02).then(|| rng.random_range(0..3));
        HlcInputs {
            t,
            pose: PlanarPose::new(rng.random_range(-0.3..0.3), rng.random_range(0.0..0.4), 0.0),
            twist: PlanarTwist::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0),
            label: self.label,
            committed,
            leading: committed.or(self.label.goal()),
            stretch: self.stretch,
            arrived: (rng.random::<f64>() < 0.0005).then(|| rng.random_range(0..3)),
        }
    }
}

fn state_machine_properties() {
    let cfg = HlcConfig::default();
    let sampler = ForceSampler::default();
    let hlc = Hlc::new(cfg, sampler.clone(), GoalSet::default()).unwrap();
    let dt = cfg.dt();
    let mut stream = RandomStream { rng: ChaCha8Rng::seed_from_u64(5), label: IntentLabel::Idle, stretch: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let roles = [RobotRole::Hard(0), RobotRole::Soft(1), RobotRole::Follower, RobotRole::Kcg(2), RobotRole::Soft(2)];

    let (mut terminal_exits, mut bound_violations, mut missed_aborts, mut ahg_mismatches) = (0, 0, 0, 0);
    let (mut aborts, mut ahg_entries) = (0, 0);
    let mut s: HlcState = hlc.init(roles[0], 0.0, &mut rng).unwrap();
    let mut terminal_ticks = 0;
    let mut conflict_since: Option<f64> = None;
    for k in 0..100_000u64 {
        let t = k as f64 * dt;
        if terminal_ticks > 25 {
            s = hlc.init(roles[rng.random_range(0..roles.len())], t, &mut rng).unwrap();
            terminal_ticks = 0;
            conflict_since = None;
        }
        let inp = stream.next(t);
        let (n, out) = hlc.step(&s, &inp, &mut rng);

        if s.is_terminal() {
            terminal_ticks += 1;
            if n != s || out.magnitude != 0.0 {
                terminal_exits += 1;
            }
            s = n;
            continue;
        }

        let in_bounds = match (n.terminated, n.phase) {
            (Some(_), _) => out.magnitude == 0.0,
            (None, Phase::Abort) => n.f_mag >= 0.0 && n.f_mag <= n.abort_from + 1e-12,
            (None, _) if n.active_goal.is_some() => n.f_mag >= sampler.f_min && n.f_mag <= sampler.f_max,
            (None, _) => out.magnitude == 0.0,
        };
        bound_violations += !in_bounds as usize;

        let applying = s.phase != Phase::Abort && s.active_goal.is_some();
        if applying && inp.arrived.is_none() && inp.stretch > cfg.f_abort {
            aborts += 1;
            if n.phase != Phase::Abort {
                missed_aborts += 1;
            }
        }

        // Independent bookkeeping of the AHG trigger for the Soft machine.
        let soft_negotiating = s.machine == Machine::Soft && !s.phase.is_ahg() && s.phase != Phase::Abort;
        let conflicting = matches!(inp.label, IntentLabel::Goal(g) if Some(g) != s.active_goal);
        let qualifies = soft_negotiating
            && inp.arrived.is_none()
            && conflicting
            && inp.stretch > cfg.f_conflict_threshold
            && inp.stretch <= cfg.f_abort;
        if qualifies {
            let since = *conflict_since.get_or_insert(t);
            let expect = t - since >= cfg.ahg_trigger_hold - 1e-9;
            if expect != n.phase.is_ahg() {
                ahg_mismatches += 1;
            }
            ahg_entries += expect as usize;
            if expect {
                conflict_since = None;
            }
        } else {
            conflict_since = None;
            if soft_negotiating && n.phase.is_ahg() {
                ahg_mismatches += 1;
            }
        }

        if n.terminated == Some(Termination::Aborted) || n.is_terminal() {
            terminal_ticks = 1;
        }
        s = n;
    }
    let ok = terminal_exits == 0 && bound_violations == 0 && missed_aborts == 0 && ahg_mismatches == 0;
    report(
        5,
        "state machine properties",
        ok,
        format!(
            "100000 ticks: terminal exits={terminal_exits}, f_mag bound violations={bound_violations}, \
             missed aborts={missed_aborts}/{aborts}, AHG trigger mismatches={ahg_mismatches} ({ahg_entries} entries)"
        ),
    );
    assert!(aborts > 0 && ahg_entries > 0, "random stream never exercised abort or AHG");
    assert!(ok);
}

fn follower_robot_with_hard_human() {
    let t0 = Instant::now();
    let m = model();
    let configs: Vec<TrialConfig> = (0..100)
        .map(|i| {
            TrialConfig::new(RobotRole::Follower, GoalAssignment::hard((i % 3) as usize), 1000 + i)
                .with_record(RecordLevel::Summary)
        })
        .collect();
    let rep = run_batch(&configs, 8, Some(&m)).unwrap();
    let hits = rep
        .rows
        .iter()
        .zip(metrics(&rep))
        .filter(|(r, m)| {
            m.termination == Some(Termination::Nominal) && m.goal == r.human.assignment().and_then(|a| a.goal_index())
        })
        .count();
    let rate = hits as f64 / 100.0;
    let elapsed = t0.elapsed();
    let ok = rate >= 0.90 && elapsed < Duration::from_secs(30);
    report(
        6,
        "follower robot, hard human",
        ok,
        format!("nominal at human goal={:.1}% (≥ 90%), {elapsed:.2?} (< 30 s)", 100.0 * rate),
    );
    assert!(ok);
}

fn hard_robot_with_soft_human() {
    let (hs, _) = closed_loop();
    let ms = metrics(hs);
    let n = ms.len() as f64;
    let delivered = hs.rows.iter().zip(&ms).filter(|(r, m)| m.goal.is_some() && m.goal == r.robot.goal()).count();
    let aborts = ms.iter().filter(|m| m.aborted()).count();
    let (delivery, abort_rate) = (delivered as f64 / n, aborts as f64 / n);
    let ok = delivery >= 0.85 && abort_rate <= 0.10;
    report(
        7,
        "hard robot, soft human",
        ok,
        format!("delivered to robot goal={:.1}% (≥ 85%), aborts={:.1}% (≤ 10%)", 100.0 * delivery, 100.0 * abort_rate),
    );
    assert!(ok);
}

fn soft_robot_with_soft_human() {
    let (_, ss) = closed_loop();
    let g = &ss.summary.overall;
    let rw = g.robot_win_fraction().unwrap_or(0.0);
    let ok = g.success_rate >= 0.85 && (0.35..=0.75).contains(&rw);
    report(
        8,
        "soft robot, soft human",
        ok,
        format!(
            "success={:.1}% (≥ 85%), robot wins={:.1}% of {} decided (35–75%)",
            100.0 * g.success_rate,
            100.0 * rw,
            g.robot_wins + g.human_wins
        ),
    );
    assert!(ok);
}

fn switching_statistics() {
    let (hs, ss) = closed_loop();
    let all: Vec<TrialMetrics> = metrics(hs).into_iter().chain(metrics(ss)).collect();
    let switches = all.iter().map(|m| m.n_switches).sum::<usize>() as f64 / all.len() as f64;
    let pooled = |runs: fn(&TrialMetrics) -> (usize, f64), ms: &[TrialMetrics]| {
        let (n, t) = ms.iter().map(runs).fold((0, 0.0), |(n, t), (a, b)| (n + a, t + b));
        t / n as f64
    };
    let agree = |m: &TrialMetrics| (m.agreement_runs, m.agreement_time);
    let disagree = |m: &TrialMetrics| (m.disagreement_runs, m.disagreement_time);
    let (a, d) = (pooled(agree, &all), pooled(disagree, &all));
    let in_window = |v: Option<f64>| v.is_some_and(|v| (0.5..=3.0).contains(&v));
    let batches = [("hard/soft", hs), ("soft/soft", ss)];
    let each_ok = batches.iter().all(|(_, rep)| {
        let g = &rep.summary.overall;
        g.mean_switches <= 1.5 && in_window(g.mean_agreement_duration) && in_window(g.mean_disagreement_duration)
    });
    let ok = each_ok && switches <= 1.5 && in_window(Some(a)) && in_window(Some(d));
    let per_batch: Vec<String> = batches
        .iter()
        .map(|(name, rep)| {
            let g = &rep.summary.overall;
            format!(
                "{name} sw={:.2} A={:.2} D={:.2}",
                g.mean_switches,
                g.mean_agreement_duration.unwrap_or(f64::NAN),
                g.mean_disagreement_duration.unwrap_or(f64::NAN)
            )
        })
        .collect();
    report(
        9,
        "switching statistics",
        ok,
        format!(
            "both batches: switches/trial={switches:.2} (≤ 1.5), mean agreement={a:.2} s, disagreement={d:.2} s (0.5–3 s); each: {}",
            per_batch.join("; ")
        ),
    );
    assert!(ok);
}

fn batch_determinism() {
    let t0 = Instant::now();
    let profile = Profile::default();
    let m = model();
    let configs = generate_assignments(240, 77, &profile, RecordLevel::Summary);
    let bytes = |jobs: usize| {
        let rep = run_batch(&configs, jobs, Some(&m)).unwrap();
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        (csv, rep.summary_json().unwrap())
    };
    let reference = bytes(1);
    let runs = [bytes(1), bytes(4), bytes(8)];
    let identical = runs.iter().all(|r| *r == reference);
    let elapsed = t0.elapsed();
    let per_batch = elapsed / 4;
    let ok = identical && per_batch < Duration::from_secs(60);
    report(
        10,
        "batch determinism",
        ok,
        format!("240 trials identical across runs and 1/4/8 jobs={identical}, {per_batch:.2?} per batch (< 60 s)"),
    );
    assert!(ok);
}

fn main() {
    let checks: [(&str, fn()); 10] = [
        ("admittance_fixed_point", admittance_fixed_point),
        ("action_force_law", action_force_law),
        ("sensing_filter_design", sensing_filter_design),
        ("intent_classifier", intent_classifier),
        ("state_machine_properties", state_machine_properties),
        ("follower_robot_with_hard_human", follower_robot_with_hard_human),
        ("hard_robot_with_soft_human", hard_robot_with_soft_human),
        ("soft_robot_with_soft_human", soft_robot_with_soft_human),
        ("switching_statistics", switching_statistics),
        ("batch_determinism", batch_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if std::panic::catch_unwind(check).is_err() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all checks passed");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
