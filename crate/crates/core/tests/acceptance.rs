//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use cmm_core::cacc::{
    miss_windows, run_case_study, run_scheme, run_sweep, total_variation, window_mean, Scheme,
};
use cmm_core::dataset::{read_labels, record_dataset, split_indices, DatasetSpec};
use cmm_core::geometry::{oriented_iou, OrientedBox, Pose2D};
use cmm_core::lidar::{intensity, scan, LidarConfig, Point, PointCloudFrame};
use cmm_core::orchestrator::{cmd_run, golden_frame, RunConfig};
use cmm_core::perception::{
    build_bev, evaluate, f1_score, normalize_point, BevConfig, Detection, DetectorKind, Geofence,
    ReferenceDetector,
};
use cmm_core::protocol::{
    decode, encode, encode_payload, ChannelConfig, DecodeError, DeterministicChannel, SendOutcome,
    MAX_PAYLOAD_LEN,
};
use cmm_core::scenario::{ground_truth_objects, init_scenario, ObjectClass, ScenarioConfig};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

// e^-0.4 to 30 significant digits.
const EXP_MINUS_0_4: f64 = 0.670_320_046_035_639_300_744_432_925_147;

fn intensity_law() -> Check {
    let start = Instant::now();
    let v = intensity(100.0, 0.004).map_err(|e| e.to_string())?;
    ensure((v - EXP_MINUS_0_4).abs() <= 1e-12, || {
        format!("intensity(100, 0.004) = {v}")
    })?;
    let mut rng = Pcg64Mcg::seed_from_u64(1);
    for _ in 0..1000 {
        let d = rng.random_range(0.0..200.0);
        let a = rng.random_range(0.0..0.05);
        let dd = rng.random_range(0.01..50.0);
        let da = rng.random_range(1e-4..0.01);
        let i = intensity(d, a).unwrap();
        ensure((0.0..=1.0).contains(&i), || {
            format!("intensity({d}, {a}) = {i}")
        })?;
        ensure(intensity(d + dd, a).unwrap() <= i, || {
            format!("not decaying in d at ({d}, {a})")
        })?;
        ensure(intensity(d, a + da).unwrap() <= i, || {
            format!("not decaying in a at ({d}, {a})")
        })?;
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "e^-0.4 error {:.1e}, 1000 pairs decay",
        (v - EXP_MINUS_0_4).abs()
    ))
}

fn f1_oracle() -> Check {
    let car = 100.0 * f1_score(0.8485, 0.9593);
    let ped = 100.0 * f1_score(0.3571, 0.4200);
    ensure((car - 90.05).abs() <= 0.01, || format!("car F1 {car:.4}"))?;
    ensure((ped - 38.60).abs() <= 0.01, || {
        format!("pedestrian F1 {ped:.4}")
    })?;
    // The evaluator reports the same harmonic mean for its own P and R.
    let gts: Vec<_> = (0..4)
        .map(|k| label(ObjectClass::Car, 10.0 * k as f64, 0.0))
        .collect();
    let mut dets: Vec<Detection> = gts[..3]
        .iter()
        .map(|g| det(g.class, g.center[0], 0.0, 0.9))
        .collect();
    dets.push(det(ObjectClass::Car, 100.0, 0.0, 0.5));
    dets.push(det(ObjectClass::Car, 120.0, 0.0, 0.4));
    let r = evaluate(&dets, &gts, 0.5);
    let (p, rc) = (r.overall.precision, r.overall.recall);
    ensure((p - 0.6).abs() < 1e-12 && (rc - 0.75).abs() < 1e-12, || {
        format!("P {p} R {rc}")
    })?;
    ensure((r.overall.f1 - f1_score(p, rc)).abs() < 1e-15, || {
        format!("evaluate F1 {}", r.overall.f1)
    })?;
    Ok(format!("F1 {car:.4}% and {ped:.4}%"))
}

fn label(class: ObjectClass, x: f64, y: f64) -> cmm_core::scenario::LabeledBox {
    cmm_core::scenario::LabeledBox {
        id: 0,
        class,
        center: [x, y, -1.0],
        dims: class.default_dims(),
        yaw: 0.0,
    }
}

fn det(class: ObjectClass, x: f64, y: f64, confidence: f64) -> Detection {
    let d = class.default_dims();
    Detection {
        class,
        bbox: OrientedBox::new(x, y, d.length, d.width, 0.0),
        confidence,
    }
}

fn channel_statistics() -> Check {
    let start = Instant::now();
    const N: u64 = 100_000;
    let mut report = Vec::new();
    for (eta, seed) in [(0.05, 11), (0.10, 12)] {
        let mut ch = DeterministicChannel::new(ChannelConfig {
            drop_threshold: eta,
            seed,
            ..ChannelConfig::default()
        });
        let mut dropped = 0u64;
        for k in 0..N {
            if matches!(ch.send((), k, k * 100), SendOutcome::Dropped) {
                dropped += 1;
            }
            ch.poll(k * 100);
        }
        ch.poll(u64::MAX);
        let rate = dropped as f64 / N as f64;
        ensure((rate - eta).abs() <= 0.005, || {
            format!("eta {eta}: drop rate {rate:.4}")
        })?;
        ensure(ch.stats().dropped == dropped, || {
            "stats disagree with outcomes".into()
        })?;
        report.push(format!("drop {:.2}%", 100.0 * rate));
    }
    let mut ch = DeterministicChannel::new(ChannelConfig {
        seed: 13,
        ..ChannelConfig::default()
    });
    for k in 0..N {
        ch.send((), k, k * 100);
        ch.poll(k * 100);
    }
    ch.poll(u64::MAX);
    let s = ch.stats();
    ensure(s.delivered == N, || format!("delivered {}", s.delivered))?;
    let (mean, std) = (s.mean_delay_ms(), s.std_delay_ms());
    ensure((mean - 200.0).abs() <= 0.5, || {
        format!("mean delay {mean:.3}")
    })?;
    ensure((std - 5.0).abs() <= 0.2, || format!("delay std {std:.3}"))?;
    within_time(start, Duration::from_secs(5))?;
    report.push(format!("delay mean {mean:.3} std {std:.3} ms"));
    Ok(report.join(", "))
}

fn geofence_and_bev() -> Check {
    let start = Instant::now();
    let g = Geofence::default();
    let mut rng = Pcg64Mcg::seed_from_u64(4);
    let points: Vec<Point> = (0..10_000)
        .map(|_| Point {
            x: rng.random_range(-10.0..60.0),
            y: rng.random_range(-35.0..35.0),
            z: rng.random_range(-4.0..3.0),
            i: rng.random_range(0.0..1.0),
        })
        .collect();
    let frame = PointCloudFrame::new(0, LidarConfig::default().mount(), points.clone());
    let kept = g.apply(&frame);
    let brute: Vec<Point> = points
        .iter()
        .filter(|p| {
            let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
            g.x[0] <= x && x <= g.x[1] && g.y[0] <= y && y <= g.y[1] && g.z[0] <= z && z <= g.z[1]
        })
        .copied()
        .collect();
    ensure(kept.points == brute, || {
        format!("filter kept {} vs brute force {}", kept.len(), brute.len())
    })?;

    let grid = BevConfig::default();
    let bev = build_bev(&kept, &grid, &g);
    ensure(
        bev.cells.iter().flatten().all(|v| (0.0..=1.0).contains(v)),
        || "BEV value outside [0, 1]".into(),
    )?;
    ensure(bev.cells.iter().any(|c| c[0] > 0.0), || {
        "BEV is empty".into()
    })?;

    let exact = [
        ((0.0, -25.0), (0.0, 0.0)),
        ((25.0, 0.0), (304.0, 304.0)),
        ((50.0, 25.0), (608.0, 608.0)),
    ];
    for ((x, y), want) in exact {
        let got = normalize_point(x, y, &grid);
        ensure(got == want, || {
            format!("normalize_point({x}, {y}) = {got:?}")
        })?;
    }
    ensure(grid.cell_of(50.0, 25.0) == (607, 607), || {
        format!("far corner cell {:?}", grid.cell_of(50.0, 25.0))
    })?;
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "{} of 10000 points kept, BEV in [0, 1], corner mappings exact",
        kept.len()
    ))
}

fn oriented_iou_properties() -> Check {
    let unit = OrientedBox::new(0.0, 0.0, 1.0, 1.0, 0.0);
    let iou = |a: &OrientedBox, b: &OrientedBox| oriented_iou(a, b).map_err(|e| e.to_string());
    let v = iou(&unit, &unit)?;
    ensure(v == 1.0, || format!("identity {v}"))?;
    let v = iou(&unit, &OrientedBox::new(3.0, 0.0, 1.0, 1.0, 0.7))?;
    ensure(v == 0.0, || format!("disjoint {v}"))?;
    let v = iou(&unit, &OrientedBox::new(0.5, 0.0, 1.0, 1.0, 0.0))?;
    ensure(v == 1.0 / 3.0, || format!("half overlap {v}"))?;

    let mut rng = Pcg64Mcg::seed_from_u64(5);
    let rand_box = |rng: &mut Pcg64Mcg| {
        OrientedBox::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.5..6.0),
            rng.random_range(0.5..3.0),
            rng.random_range(-PI..PI),
        )
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rand_box(&mut rng);
        let b = rand_box(&mut rng);
        let ab = iou(&a, &b)?;
        let ba = iou(&b, &a)?;
        let pose = Pose2D::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-PI..PI),
        );
        let moved = iou(&a.transformed(&pose), &b.transformed(&pose))?;
        worst = worst.max((ab - ba).abs()).max((ab - moved).abs());
        ensure((0.0..=1.0).contains(&ab), || {
            format!("IoU {ab} outside [0, 1]")
        })?;
    }
    ensure(worst <= 1e-9, || {
        format!("symmetry/invariance error {worst:.2e}")
    })?;
    Ok(format!(
        "identity, disjoint, 1/3 exact; max error over 1000 pairs {worst:.1e}"
    ))
}

fn scene(agents: &[(&str, f64)]) -> ScenarioConfig {
    let mut text = String::from(
        "[signal]\nenabled = false\n[demand]\nvehicles = 0\npedestrians = 0\nrespawn = false\n",
    );
    for (k, (lane, s)) in agents.iter().enumerate() {
        text += &format!(
            "[[agents]]\nid = {}\nclass = \"Car\"\nlane = \"{lane}\"\ns = {s}\nspeed = 0.0\ncontrol = \"scripted\"\nprofile = [[0.0, 0.0]]\n",
            k + 1
        );
    }
    ScenarioConfig::from_toml_str(&text, Path::new("<scene>")).expect("scene parses")
}

fn reference_detector_suite() -> Check {
    let start = Instant::now();
    // The sensor looks east from beside the road, so eastbound arc length s
    // sits at sensor x = s - 90 and westbound s at x = 210 - s.
    let scenes = [
        vec![("eastbound", 110.0)],
        vec![("eastbound", 102.0), ("eastbound", 122.0)],
        vec![("eastbound", 108.0), ("westbound", 190.0)],
        vec![
            ("eastbound", 100.0),
            ("eastbound", 125.0),
            ("westbound", 196.0),
        ],
        vec![
            ("eastbound", 98.0),
            ("eastbound", 116.0),
            ("westbound", 198.5),
            ("westbound", 184.0),
        ],
    ];
    let lidar = LidarConfig {
        pose: Pose2D::new(-60.0, 8.0, 0.0),
        noise_stddev: 0.0,
        dropoff_rate: 0.0,
        dropoff_zero_intensity: 0.0,
        ..LidarConfig::default()
    };
    let g = Geofence::default();
    let detector = ReferenceDetector::new(Default::default());
    let mut worst_center: f64 = 0.0;
    let mut worst_at = String::new();
    let mut total = 0;
    for (k, agents) in scenes.iter().enumerate() {
        let (_, state) = init_scenario(scene(agents)).map_err(|e| e.to_string())?;
        let truth = ground_truth_objects(&state, &lidar.mount(), &g);
        ensure(truth.len() == agents.len(), || {
            format!(
                "scene {k}: {} of {} cars in view",
                truth.len(),
                agents.len()
            )
        })?;
        let dets = detector.detect_cloud(&g.apply(&scan(&state, &lidar, 1)));
        let r = evaluate(&dets, &truth, 0.5);
        ensure(
            r.overall.precision == 1.0 && r.overall.recall == 1.0,
            || {
                format!(
                    "scene {k}: P {} R {} with {} detections",
                    r.overall.precision,
                    r.overall.recall,
                    dets.len()
                )
            },
        )?;
        for t in &truth {
            let err = dets
                .iter()
                .map(|d| (d.bbox.cx - t.center[0]).hypot(d.bbox.cy - t.center[1]))
                .fold(f64::INFINITY, f64::min);
            if err > worst_center {
                worst_center = err;
                worst_at = format!("scene {k}, car at ({:.1}, {:.1})", t.center[0], t.center[1]);
            }
        }
        total += truth.len();
    }
    ensure(worst_center <= 0.3, || {
        format!("center error {worst_center:.3} m in {worst_at}")
    })?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "5 scenes, {total} cars, P = R = 1, max center error {worst_center:.3} m"
    ))
}

fn end_to_end_fidelity() -> Check {
    let resolved =
        RunConfig::load(&repo_file("configs/case_study_run.toml")).map_err(|e| e.to_string())?;
    let mut cfg = resolved.config.pipeline();
    cfg.duration_ticks = 500;
    cfg.detector = DetectorKind::Ideal;
    cfg.channel = ChannelConfig::ideal();
    let mut compared = 0usize;
    let mut worst: f64 = 0.0;
    let mut failure = None;
    let mut observe = |v: &cmm_core::cacc::TickView| {
        if failure.is_some() {
            return;
        }
        if v.snapshot.latest_frame_id != Some(v.state.tick)
            || v.snapshot.objects.len() != v.labels.len()
        {
            failure = Some(format!(
                "tick {}: mirror frame {:?} with {} objects, {} labels",
                v.state.tick,
                v.snapshot.latest_frame_id,
                v.snapshot.objects.len(),
                v.labels.len()
            ));
            return;
        }
        for (o, l) in v.snapshot.objects.iter().zip(v.labels) {
            let agent = v.state.agent(l.id).expect("labelled agent exists");
            let tol = 2.0 * f32::EPSILON as f64 * (1.0 + l.center[0].abs() + l.center[1].abs());
            let err = (o.x - agent.pose.x).abs().max((o.y - agent.pose.y).abs());
            worst = worst.max(err);
            if err > tol || o.class != agent.class {
                failure = Some(format!(
                    "tick {}: agent {} off by {err:.2e} (tolerance {tol:.2e})",
                    v.state.tick, l.id
                ));
            }
            compared += 1;
        }
    };
    run_scheme(&resolved.scenario, &cfg, Scheme::Ap, &mut observe).map_err(|e| e.to_string())?;
    if let Some(f) = failure {
        return Err(f);
    }
    ensure(compared > 500, || {
        format!("only {compared} objects compared")
    })?;
    Ok(format!(
        "500 ticks, {compared} objects, max position error {worst:.1e} m"
    ))
}

fn case_study() -> Check {
    let start = Instant::now();
    let resolved =
        RunConfig::load(&repo_file("configs/case_study_run.toml")).map_err(|e| e.to_string())?;
    let cfg = resolved.config.pipeline();
    let runs = run_case_study(&resolved.scenario, &cfg, &Scheme::ALL).map_err(|e| e.to_string())?;
    let by: BTreeMap<Scheme, _> = runs.iter().map(|r| (r.scheme, r)).collect();
    let (ip, ap, aps) = (
        &by[&Scheme::Ip].log,
        &by[&Scheme::Ap].log,
        &by[&Scheme::Aps].log,
    );

    ensure(ip.misses() == 0, || {
        format!("(a) IP has {} misses", ip.misses())
    })?;
    let windows = miss_windows(&[ap, aps], 3);
    ensure(!windows.is_empty(), || {
        "(b) no miss window longer than 3 ticks".into()
    })?;
    for w in &windows {
        let (a, b) = (window_mean(ap, w.clone()), window_mean(aps, w.clone()));
        ensure(a > b, || {
            format!("(b) window {w:?}: AP mean accel {a:.3} <= APS {b:.3}")
        })?;
    }
    let tv = |log: &cmm_core::cacc::TrajectoryLog| total_variation(&log.speeds());
    let (tv_ip, tv_ap, tv_aps) = (tv(ip), tv(ap), tv(aps));
    ensure(tv_ap >= 1.5 * tv_ip && tv_aps >= 1.5 * tv_ip, || {
        format!("(c) TV IP {tv_ip:.3}, AP {tv_ap:.3}, APS {tv_aps:.3}")
    })?;

    let sweep = run_sweep(&resolved.scenario, &cfg, Scheme::Ap).map_err(|e| e.to_string())?;
    let mut sweep_report = Vec::new();
    for kind in ["delay", "drop"] {
        let tvs: Vec<f64> = sweep
            .iter()
            .filter(|p| p.sweep == kind)
            .map(|p| p.tv_velocity)
            .collect();
        ensure(tvs.len() == 3, || {
            format!("(d) {kind} sweep has {} points", tvs.len())
        })?;
        ensure(tvs.windows(2).all(|w| w[1] >= w[0]), || {
            format!("(d) {kind} sweep TV not monotone: {tvs:?}")
        })?;
        sweep_report.push(format!("{kind} {:.2}/{:.2}/{:.2}", tvs[0], tvs[1], tvs[2]));
    }
    within_time(start, Duration::from_secs(120))?;
    Ok(format!(
        "IP misses 0, {} windows AP > APS, TV IP {tv_ip:.2} AP {tv_ap:.2} APS {tv_aps:.2}, sweeps {}",
        windows.len(),
        sweep_report.join(", ")
    ))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism() -> Check {
    let resolved =
        RunConfig::load(&repo_file("configs/case_study_run.toml")).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_run(&resolved, &a, None).map_err(|e| e.to_string())?;
    cmd_run(&resolved, &b, None).map_err(|e| e.to_string())?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure(ta.keys().eq(tb.keys()), || "file sets differ".into())?;
    for (path, bytes) in &ta {
        ensure(&tb[path] == bytes, || format!("{} differs", path.display()))?;
    }
    let size: usize = ta.values().map(Vec::len).sum();
    Ok(format!("{} files, {size} bytes identical", ta.len()))
}

fn dataset_recorder() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario =
        ScenarioConfig::load(&repo_file("configs/intersection.toml")).map_err(|e| e.to_string())?;
    let spec = DatasetSpec {
        record_hz: 2,
        sim_hz: 10,
        ticks: Some(100),
        out_dir: tmp.path().to_path_buf(),
        lidar: LidarConfig {
            pose: Pose2D::new(-20.0, -8.0, 0.5),
            ..LidarConfig::default()
        },
        ..DatasetSpec::default()
    };
    let m = record_dataset(&scenario, &spec).map_err(|e| e.to_string())?;
    ensure(m.frames.len() == 20, || {
        format!("{} frames", m.frames.len())
    })?;

    let (sim, mut state) = init_scenario(scenario).map_err(|e| e.to_string())?;
    let mut labels = 0;
    for f in &m.frames {
        while state.tick < f.tick {
            state = sim.step_world(&state);
        }
        let want = ground_truth_objects(&state, &spec.lidar.mount(), &spec.geofence);
        let got = read_labels(&tmp.path().join(&f.label)).map_err(|e| e.to_string())?;
        ensure(got.len() == want.len(), || {
            format!(
                "frame {}: {} labels, expected {}",
                f.index,
                got.len(),
                want.len()
            )
        })?;
        for (g, w) in got.iter().zip(&want) {
            let same =
                g.class == w.class && g.center == w.center && g.dims == w.dims && g.yaw == w.yaw;
            ensure(same, || format!("frame {}: {g:?} != {w:?}", f.index))?;
        }
        labels += got.len();
    }

    let (train, val) = split_indices(200, 0.8, spec.seed);
    let mut all: Vec<u64> = train.iter().chain(&val).copied().collect();
    all.sort_unstable();
    ensure(train.len() == 160 && val.len() == 40, || {
        format!("split {}/{}", train.len(), val.len())
    })?;
    ensure(all == (0..200).collect::<Vec<_>>(), || {
        "split is not a partition".into()
    })?;
    Ok(format!(
        "20 frames, {labels} labels re-verified, split 160/40"
    ))
}

fn wire_protocol() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_frame.bin");
    let golden = fs::read(&path).map_err(|e| e.to_string())?;
    let (frame, used) = decode(&golden).map_err(|e| format!("{e:?}"))?;
    ensure(used == golden.len() && frame == golden_frame(), || {
        "golden fixture decodes differently".into()
    })?;
    ensure(encode(&frame) == golden, || {
        "re-encoding is not bit-exact".into()
    })?;

    let payload = encode_payload(&golden_frame());
    let structural: Vec<usize> = payload
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b, b'{' | b'}' | b'[' | b']' | b':' | b','))
        .map(|(k, _)| k)
        .collect();
    let mut rng = Pcg64Mcg::seed_from_u64(11);
    let mut kinds = [0usize; 6];
    for case in 0..10_000 {
        let kind = case % 6;
        let mut p = payload.clone();
        let framed = match kind {
            0 => {
                p.truncate(rng.random_range(0..payload.len()));
                frame_bytes(&p)
            }
            1 => {
                let n = rng.random_range(1..64);
                let mut junk: Vec<u8> = (0..n).map(|_| rng.random()).collect();
                junk[0] = rng.random_range(0x80..=0xff);
                frame_bytes(&junk)
            }
            2 => {
                p[structural[rng.random_range(0..structural.len())]] = b'#';
                frame_bytes(&p)
            }
            3 => {
                p.insert(rng.random_range(0..=payload.len()), 0xff);
                frame_bytes(&p)
            }
            4 => {
                let keys = [
                    "\"frame_id\"",
                    "\"sim_time_ms\"",
                    "\"sensor_id\"",
                    "\"cls\"",
                    "\"x\"",
                    "\"conf\"",
                ];
                let text = String::from_utf8(p).unwrap();
                let key = keys[rng.random_range(0..keys.len())];
                frame_bytes(text.replacen(key, "\"zz\"", 1).as_bytes())
            }
            _ => {
                let len = rng.random_range(MAX_PAYLOAD_LEN as u64 + 1..=u32::MAX as u64) as u32;
                let mut b = len.to_be_bytes().to_vec();
                b.extend_from_slice(&payload);
                b
            }
        };
        match decode(&framed) {
            Err(DecodeError::Protocol(_)) => kinds[kind] += 1,
            other => return Err(format!("fuzz case {case} (kind {kind}) gave {other:?}")),
        }
    }
    Ok(format!(
        "golden round-trip exact, 10000 malformed messages rejected {kinds:?}"
    ))
}

fn frame_bytes(payload: &[u8]) -> Vec<u8> {
    let mut out = (payload.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(payload);
    out
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("intensity law", intensity_law),
        ("F1 oracle", f1_oracle),
        ("channel statistics", channel_statistics),
        ("geofence and BEV", geofence_and_bev),
        ("oriented IoU", oriented_iou_properties),
        ("reference detector scenes", reference_detector_suite),
        ("end-to-end fidelity", end_to_end_fidelity),
        ("CACC case study", case_study),
        ("determinism", determinism),
        ("dataset recorder", dataset_recorder),
        ("wire protocol", wire_protocol),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.2?}]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
