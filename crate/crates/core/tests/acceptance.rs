//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use faultdrive::agent::{CommandField, ControlCommand};
use faultdrive::campaign::{
    compute_metrics, parse_episodes, run_campaign, write_outputs, FullReport, ResolvedCampaign, EPISODES_FILE,
    GOLDEN,
};
use faultdrive::faultlib::{apply_to_command, encode_f32, inject_hardware_fault, HardwareModel};
use faultdrive::rng::SimRng;
use faultdrive::world::{load_scenario_file, World};
use serde_json::Value;

const CALIBRATION_MSR_MIN: f64 = 90.0;
const CALIBRATION_WALL_MAX: Duration = Duration::from_secs(60);
const MIN_EPISODES_PER_POINT: usize = 30;
const BIT_ORACLE_FLOATS: usize = 10_000;
const CIRCLE_RADIUS_REL_TOL: f64 = 0.01;

type Verdict = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn campaign(name: &str, overrides: &[&str]) -> ResolvedCampaign {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ResolvedCampaign::load(&root().join("campaigns").join(name), &ov).unwrap()
}

fn run_to(c: &ResolvedCampaign, dir: &Path) -> FullReport {
    let records = run_campaign(c, c.config.workers).unwrap();
    write_outputs(dir, &c.manifest(), &records).unwrap()
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1
fn golden_calibration(tmp: &Path) -> Verdict {
    let c = campaign("calibration.json", &[]);
    let t0 = Instant::now();
    let report = run_to(&c, &tmp.join("calibration"));
    let wall = t0.elapsed();
    let g = &report.arms[0].report;
    check(
        g.episodes == 20 && g.msr_percent >= CALIBRATION_MSR_MIN && g.vpk == Some(0.0) && wall <= CALIBRATION_WALL_MAX,
        format!("episodes {} MSR {:.1}% VPK {:?} wall {:.1} s", g.episodes, g.msr_percent, g.vpk, wall.as_secs_f64()),
    )
}

// 2
fn delay_trend(tmp: &Path) -> Verdict {
    let c = campaign("delay-sweep.json", &[]);
    let report = run_to(&c, &tmp.join("delay"));
    let arms: Vec<_> = report.arms.iter().filter(|a| a.fault_spec_id != GOLDEN).collect();
    let vpk: Vec<f64> = arms.iter().map(|a| a.report.vpk.unwrap_or(f64::NAN)).collect();
    let n_min = arms.iter().map(|a| a.report.episodes).min().unwrap_or(0);
    let nondecreasing = vpk.windows(2).all(|w| w[1] >= w[0]);
    let (first, last) = (arms.first().unwrap(), arms.last().unwrap());
    let mw = last.vs_golden.as_ref().map(|d| d.vpk_test.clone());
    // k=30 against k=0, not against the golden arm
    let x: Vec<f64> = first.report.trials.iter().filter(|t| t.km > 0.0).map(|t| t.violations as f64 / t.km).collect();
    let y: Vec<f64> = last.report.trials.iter().filter(|t| t.km > 0.0).map(|t| t.violations as f64 / t.km).collect();
    let test = faultdrive::campaign::mann_whitney(&y, &x);
    let report_text = std::fs::read_to_string(tmp.join("delay/report.json")).unwrap();
    let labelled = last.label.contains("2.0 s") && report_text.contains("2.0 s");
    check(
        n_min >= MIN_EPISODES_PER_POINT
            && nondecreasing
            && vpk[vpk.len() - 1] > vpk[0]
            && test.significant
            && labelled,
        format!(
            "VPK {:?} over {n_min}+ episodes/point, k30 vs k0 U {} p {:.2e}, vs golden p {:.2e}, label \"{}\"",
            vpk.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            test.u,
            test.p_value,
            mw.map_or(f64::NAN, |m| m.p_value),
            last.label
        ),
    )
}

// 3
fn noise_trend(tmp: &Path) -> Verdict {
    let c = campaign("noise-sweep.json", &[]);
    let report = run_to(&c, &tmp.join("noise"));
    let arms: Vec<_> = report.arms.iter().filter(|a| a.fault_spec_id != GOLDEN).collect();
    let msr: Vec<f64> = arms.iter().map(|a| a.report.msr_percent).collect();
    // an increase is tolerated only between adjacent grid points
    let nonincreasing = (0..msr.len()).all(|i| (i + 2..msr.len()).all(|j| msr[j] <= msr[i]));
    let sd = |i: usize| arms[i].report.vpk_per_episode.as_ref().map_or(f64::NAN, |d| d.stddev);
    let (sd0, sd_hi) = (sd(0), sd(arms.len() - 1));
    check(
        arms.len() == 4 && nonincreasing && sd_hi > sd0,
        format!(
            "sigma {:?} MSR {msr:?} VPK stddev {sd0:.3} -> {sd_hi:.3}",
            arms.iter().map(|a| a.sweep_value).collect::<Vec<_>>()
        ),
    )
}

// 4
fn metric_oracle() -> Verdict {
    let text = std::fs::read_to_string(root().join("fixtures/metric-oracle/episodes.jsonl")).unwrap();
    let m = compute_metrics(&parse_episodes(&text).unwrap()).unwrap();
    let e: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("fixtures/metric-oracle/expected.json")).unwrap())
            .unwrap();
    let ttv = m.ttv.as_ref().unwrap();
    let ok = m.msr_percent == e["msr_percent"].as_f64().unwrap()
        && m.vpk == e["vpk"].as_f64()
        && m.apk == e["apk"].as_f64()
        && serde_json::to_value(&m.ttv_samples).unwrap() == e["ttv_samples"]
        && ttv.mean == e["ttv_mean"].as_f64().unwrap()
        && ttv.p50 == e["ttv_median"].as_f64().unwrap()
        && serde_json::to_value(&m.zero_distance_trials).unwrap() == e["zero_distance_trials"];
    check(
        ok,
        format!("MSR {} VPK {:?} APK {:?} TTV {:?} mean {}", m.msr_percent, m.vpk, m.apk, m.ttv_samples, ttv.mean),
    )
}

/// Reference IEEE-754 binary32 decoding by arithmetic on the fields.
fn ref_decode(bits: u32) -> f64 {
    let sign = if bits >> 31 == 1 { -1.0 } else { 1.0 };
    let exp = ((bits >> 23) & 0xFF) as i32;
    let man = (bits & 0x7F_FFFF) as f64;
    match exp {
        0 => sign * man * 2f64.powi(-149),
        255 if man == 0.0 => sign * f64::INFINITY,
        255 => f64::NAN,
        _ => sign * (1.0 + man / 8_388_608.0) * 2f64.powi(exp - 127),
    }
}

/// Reference encoding of an f32-representable, non-NaN value by searching
/// the exponent and solving for the mantissa.
fn ref_encode(v: f64) -> u32 {
    let sign = if v.is_sign_negative() { 1u32 << 31 } else { 0 };
    let a = v.abs();
    if a.is_infinite() {
        return sign | 0x7F80_0000;
    }
    if a < 2f64.powi(-126) {
        return sign | (a / 2f64.powi(-149)) as u32;
    }
    let mut e = 1i32;
    while a >= 2f64.powi(e - 126) {
        e += 1;
    }
    let man = ((a / 2f64.powi(e - 127) - 1.0) * 8_388_608.0) as u32;
    sign | ((e as u32) << 23) | man
}

fn ref_sanitize(field: CommandField, v: f64) -> f64 {
    if v.is_nan() {
        field.default_value()
    } else {
        let (lo, hi) = field.range();
        v.clamp(lo, hi)
    }
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

// 5
fn bit_fault_oracle() -> Verdict {
    let mut rng = SimRng::seed_from_u64(0xB17);
    let mut floats = Vec::with_capacity(BIT_ORACLE_FLOATS);
    while floats.len() < BIT_ORACLE_FLOATS {
        let f = f32::from_bits(rng.next_u64() as u32);
        if !f.is_nan() {
            floats.push(f as f64);
        }
    }
    let field = CommandField::Throttle;
    let (mut checks, mut nans, mut mismatches) = (0usize, 0usize, Vec::new());
    let mut fault_rng = SimRng::seed_from_u64(1);
    for &x in &floats {
        let bits = ref_encode(x);
        if bits != encode_f32(x) || !same(ref_decode(bits), x) {
            mismatches.push(format!("encode {x}"));
            continue;
        }
        let cmd = ControlCommand { steer: 0.0, throttle: x, brake: 0.0, frame: 0 };
        for b in 0..32u32 {
            let cases = [
                (HardwareModel::SingleBit { bit: Some(b as u8) }, bits ^ (1 << b)),
                (HardwareModel::StuckAt { ones: 1 << b, zeros: 0 }, bits | (1 << b)),
                (HardwareModel::StuckAt { ones: 0, zeros: 1 << b }, bits & !(1 << b)),
            ];
            for (model, want_bits) in cases {
                let want = ref_decode(want_bits);
                let mut got = apply_to_command(&cmd, field, &model, &mut fault_rng);
                let raw = got.get(field);
                let subs = got.sanitize();
                checks += 1;
                nans += want.is_nan() as usize;
                if !same(raw, want) || got.get(field) != ref_sanitize(field, want) || subs != want.is_nan() as u32 {
                    mismatches.push(format!("{model:?} on {x}"));
                }
            }
            // multi_bit: n = b + 1 distinct bits, checked against the reported mask
            let n = (b + 1) as u8;
            let out = inject_hardware_fault(bits, &HardwareModel::MultiBit { n }, &mut fault_rng);
            checks += 1;
            let want = ref_decode(bits ^ out.mask);
            if out.mask.count_ones() != n as u32 || out.bits != bits ^ out.mask || !same(f32::from_bits(out.bits) as f64, want) {
                mismatches.push(format!("multi_bit {n} on {x}"));
            }
        }
    }
    check(
        mismatches.is_empty(),
        format!(
            "{} floats x 32 bits, {checks} checks, {nans} NaN results substituted, {} mismatches{}",
            floats.len(),
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

/// A faulted record with the trial identity and injection time reset to the
/// golden record's, serialized.
fn normalized(line: &str, golden_spec: &str) -> (String, String) {
    let mut v: Value = serde_json::from_str(line).unwrap();
    let key = format!(
        "{}/{}",
        v["trial"]["scenario_id"].as_str().unwrap(),
        v["trial"]["replicate_index"]
    );
    v["trial"]["fault_spec_id"] = Value::from(golden_spec);
    v["trial"]["seed"] = Value::Null;
    v["first_injection_time"] = Value::Null;
    (key, serde_json::to_string(&v).unwrap())
}

fn neutral_identity_one(name: &str, tmp: &Path) -> Result<(usize, usize), String> {
    let neutral = campaign(name, &[]);
    let golden = campaign(name, &["fault_specs=[]"]);
    let (nd, gd) = (tmp.join(format!("{name}-neutral")), tmp.join(format!("{name}-golden")));
    run_to(&neutral, &nd);
    run_to(&golden, &gd);
    let ntext = std::fs::read_to_string(nd.join(EPISODES_FILE)).unwrap();
    let gtext = std::fs::read_to_string(gd.join(EPISODES_FILE)).unwrap();

    // The golden arm inside the neutral campaign is byte-identical to the golden campaign.
    let golden_in_neutral: String =
        ntext.lines().filter(|l| l.contains(&format!("\"fault_spec_id\":\"{GOLDEN}\""))).map(|l| format!("{l}\n")).collect();
    if golden_in_neutral != gtext {
        return Err(format!("{name}: golden arm differs from the golden campaign"));
    }
    let golden: std::collections::BTreeMap<String, String> = gtext.lines().map(|l| normalized(l, GOLDEN)).collect();
    let mut compared = 0;
    for line in ntext.lines().filter(|l| !l.contains(&format!("\"fault_spec_id\":\"{GOLDEN}\""))) {
        let (key, norm) = normalized(line, GOLDEN);
        if golden.get(&key) != Some(&norm) {
            let spec: Value = serde_json::from_str(line).unwrap();
            return Err(format!("{name}: {key} under {} differs from golden", spec["trial"]["fault_spec_id"]));
        }
        compared += 1;
    }
    Ok((neutral.fault_specs.len(), compared))
}

// 6
fn neutral_identity(tmp: &Path) -> Verdict {
    let mut details = Vec::new();
    for name in ["neutral.json", "neutral-nn.json"] {
        match neutral_identity_one(name, tmp) {
            Ok((specs, n)) => details.push(format!("{name}: {specs} neutral specs, {n} episodes identical")),
            Err(e) => return Err(e),
        }
    }
    Ok(details.join("; "))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faultdrive"))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// 7
fn determinism(tmp: &Path) -> Verdict {
    let cfg = root().join("campaigns/determinism.json");
    let mut dirs = Vec::new();
    for w in ["1", "8"] {
        let out = tmp.join(format!("determinism-w{w}"));
        let s = bin().args(["run", "-c"]).arg(&cfg).arg("-o").arg(&out).args(["--workers", w]).output().unwrap();
        if !s.status.success() {
            return Err(format!("run --workers {w} failed: {}", String::from_utf8_lossy(&s.stderr)));
        }
        dirs.push(out);
    }
    let (a, b) = (tree(&dirs[0]), tree(&dirs[1]));
    let identical = a == b;
    let trials = std::fs::read_to_string(dirs[0].join(EPISODES_FILE)).unwrap().lines().count();
    let replay = bin().arg("replay").arg("-o").arg(&dirs[0]).output().unwrap();
    check(
        identical && replay.status.code() == Some(0),
        format!(
            "{} files identical across workers 1/8: {identical}; replay of {trials} trials exit {:?}",
            a.len(),
            replay.status.code()
        ),
    )
}

fn open_world() -> World {
    let mut w = load_scenario_file(&root().join("scenarios/calibration/town-A.json")).unwrap();
    w.actors.clear();
    w
}

// 8
fn physics() -> Verdict {
    let mut w = open_world();
    let h0 = w.ego.pose.heading;
    let straight = ControlCommand { steer: 0.0, throttle: 0.6, brake: 0.0, frame: 0 };
    let mut invariant = true;
    for _ in 0..600 {
        w = w.step(&straight);
        invariant &= w.ego.pose.heading.to_bits() == h0.to_bits();
    }

    let mut worst: f64 = 0.0;
    for steer in [0.25, 0.5, -0.8, 1.0] {
        let mut w = open_world();
        let speed = 5.0;
        w.ego.speed = speed;
        // throttle balancing drag keeps the speed constant
        let cmd = ControlCommand { steer, throttle: w.params.drag * speed / w.params.a_throttle, brake: 0.0, frame: 0 };
        let expected = w.ego.wheelbase / (w.params.max_steer * steer).tan().abs();
        let mut pts = vec![(w.ego.pose.x, w.ego.pose.y)];
        let mut turned = 0.0;
        while turned < 2.0 * std::f64::consts::PI {
            let h = w.ego.pose.heading;
            w = w.step(&cmd);
            turned += faultdrive::world::normalize_angle(w.ego.pose.heading - h).abs();
            pts.push((w.ego.pose.x, w.ego.pose.y));
        }
        let r = fit_circle(&pts);
        worst = worst.max((r - expected).abs() / expected);
    }
    check(
        invariant && worst <= CIRCLE_RADIUS_REL_TOL,
        format!("heading bit-identical over 600 straight frames: {invariant}; worst radius error {:.4}%", worst * 100.0),
    )
}

/// Algebraic least-squares circle fit, returns the radius.
fn fit_circle(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut suu, mut svv, mut suv, mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (u, v) = (x - mx, y - my);
        suu += u * u;
        svv += v * v;
        suv += u * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let (b1, b2) = (0.5 * (suuu + suvv), 0.5 * (svvv + svuu));
    let det = suu * svv - suv * suv;
    let uc = (b1 * svv - b2 * suv) / det;
    let vc = (suu * b2 - suv * b1) / det;
    (uc * uc + vc * vc + (suu + svv) / n).sqrt()
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("1 golden calibration", Box::new(|| golden_calibration(t))),
        ("2 delay trend", Box::new(|| delay_trend(t))),
        ("3 sensor-noise trend", Box::new(|| noise_trend(t))),
        ("4 metric oracle", Box::new(metric_oracle)),
        ("5 bit-fault oracle", Box::new(bit_fault_oracle)),
        ("6 neutral-fault identity", Box::new(|| neutral_identity(t))),
        ("7 determinism", Box::new(|| determinism(t))),
        ("8 physics properties", Box::new(physics)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t0 = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{name}] {detail} ({:.1} s)", t0.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
