//! Acceptance suite. Runs every criterion over a fixed seed set and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;

use holeguard::engine::{PacketFate, RunReport};
use holeguard::merkle::{fold_root, Digest, NodeId};
use holeguard::runner::sweep;
use holeguard::scenario::{parse_scenario, Placement, ScenarioConfig};
use holeguard::verification::Verdict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha1::{Digest as _, Sha1};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const ATTACKER: NodeId = NodeId(8);
const SECOND_ATTACKER: NodeId = NodeId(9);

fn seeds() -> Vec<u64> {
    SEEDS.collect()
}

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn runs(name: &str) -> Vec<RunReport> {
    sweep(&scenario(name), &seeds()).expect("sweep")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

struct Data {
    baseline: Vec<RunReport>,
    external_off: Vec<RunReport>,
    external_on: Vec<RunReport>,
    coop_on: Vec<RunReport>,
}

fn c1_baseline(d: &Data) -> Outcome {
    let worst = d
        .baseline
        .iter()
        .map(|r| r.delivery_ratio().unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);
    let blacklisted: usize = d.baseline.iter().map(|r| r.blacklisted_nodes().len()).sum();
    outcome(
        worst >= 0.99 && blacklisted == 0,
        format!("min delivery {worst:.4}, blacklisted {blacklisted}"),
    )
}

fn c2_devastation(d: &Data) -> Outcome {
    let mut worst = 0.0f64;
    for r in &d.external_off {
        let Some(t) = r.first_insertion() else {
            return outcome(false, format!("seed {}: no forged route adopted", r.seed));
        };
        let ratio = r.delivery_ratio_between(t, f64::INFINITY).unwrap_or(0.0);
        worst = worst.max(ratio);
    }
    outcome(worst <= 0.01, format!("max post-insertion delivery {worst:.4}"))
}

/// Detection time of the external black hole and the window it must fall in.
fn detection_window(r: &RunReport, probe_interval: usize, timeout: f64) -> Option<(f64, f64)> {
    let insertion = r.first_insertion()?;
    let detected = r.detection_time(ATTACKER)?;
    let deadline = r.nth_packet_after(insertion, 2 * probe_interval)? + timeout;
    Some((detected, deadline))
}

fn c3_recovery(d: &Data) -> Outcome {
    let config = scenario("single-external-defense-on");
    let interval = config.defense.probe_interval_packets as usize;
    let mut worst_gap = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    for (r, base) in d.external_on.iter().zip(&d.baseline) {
        let Some((detected, deadline)) = detection_window(r, interval, config.defense.timeout) else {
            return outcome(false, format!("seed {}: attacker not detected", r.seed));
        };
        worst_slack = worst_slack.min(deadline - detected);
        let after = r.delivery_ratio_between(detected, f64::INFINITY).unwrap_or(0.0);
        let baseline = base.delivery_ratio().unwrap_or(0.0);
        worst_gap = worst_gap.max((baseline - after).abs());
    }
    outcome(
        worst_slack >= 0.0 && worst_gap <= 0.05,
        format!("min slack to deadline {worst_slack:.3} s, max gap to baseline {:.2} pp", worst_gap * 100.0),
    )
}

fn c4_cooperative(d: &Data) -> Outcome {
    let mut complete = Vec::new();
    for r in &d.coop_on {
        let both = [ATTACKER, SECOND_ATTACKER].map(|n| r.detection_time(n));
        match both {
            [Some(a), Some(b)] => complete.push(a.max(b)),
            _ => return outcome(false, format!("seed {}: blacklist {:?}", r.seed, r.blacklisted_nodes())),
        }
        // packets already in flight at detection may still reach an attacker
        let done = *complete.last().expect("just pushed");
        let late_drop = r
            .packets
            .iter()
            .any(|p| p.created_at > done && matches!(p.fate, PacketFate::DroppedByAdversary { .. }));
        if late_drop {
            return outcome(false, format!("seed {}: attacker still on a route after detection", r.seed));
        }
    }
    let single: Vec<f64> = d.external_on.iter().filter_map(|r| r.detection_time(ATTACKER)).collect();
    let (mc, ms) = (median(complete), median(single));
    outcome(mc > ms, format!("median detection cooperative {mc:.3} s vs single {ms:.3} s"))
}

fn c5_overhead(d: &Data) -> Outcome {
    let mut ok = true;
    for ((b, s), c) in d.baseline.iter().zip(&d.external_on).zip(&d.coop_on) {
        let (lb, ls, lc) = (b.mean_load_bps(), s.mean_load_bps(), c.mean_load_bps());
        ok &= lb < ls && ls <= lc;
    }
    let mean = |rs: &[RunReport]| rs.iter().map(RunReport::mean_load_bps).sum::<f64>() / rs.len() as f64;
    outcome(
        ok,
        format!(
            "mean load {:.1} < {:.1} <= {:.1} bit/s",
            mean(&d.baseline),
            mean(&d.external_on),
            mean(&d.coop_on)
        ),
    )
}

fn c6_delay(d: &Data) -> Outcome {
    let mut worst = 1.0f64;
    for ((b, s), c) in d.baseline.iter().zip(&d.external_on).zip(&d.coop_on) {
        let delays: Option<Vec<f64>> = [b, s, c].iter().map(|r| r.mean_delay_after(100.0)).collect();
        let Some(delays) = delays else {
            return outcome(false, format!("seed {}: no steady-state delay sample", b.seed));
        };
        let max = delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = delays.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(max / min);
    }
    outcome(worst <= 1.5, format!("max steady-state delay ratio {worst:.3}"))
}

/// Fold written from the recursive definition with a separate SHA-1 call
/// path: root(l1..lk) = SHA1(root(l1..lk-1) || lk), root(l1) = l1.
fn brute_force_root(leaves: &[[u8; 20]]) -> [u8; 20] {
    match leaves {
        [only] => *only,
        [init @ .., last] => {
            let mut bytes = brute_force_root(init).to_vec();
            bytes.extend_from_slice(last);
            Sha1::digest(&bytes).into()
        }
        [] => unreachable!(),
    }
}

fn c7_merkle_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    for len in 1..=8usize {
        for _ in 0..200 {
            let raw: Vec<[u8; 20]> = (0..len).map(|_| rng.random()).collect();
            let leaves: Vec<Digest> = raw.iter().map(|b| Digest(*b)).collect();
            let ours = fold_root(&leaves).expect("non-empty");
            if ours.0 != brute_force_root(&raw) {
                return outcome(false, format!("mismatch at length {len}"));
            }
            cases += 1;
        }
    }
    outcome(true, format!("{cases} random cases, lengths 1-8, exact match"))
}

fn c8_no_false_positives() -> Outcome {
    let mut config = ScenarioConfig::with_flow(0, 9);
    config.name = "random-honest".into();
    config.placement = Placement::Random { seed: None };
    config.defense.enabled = true;
    let reports = sweep(&config, &(1..=100).collect::<Vec<_>>()).expect("sweep");
    let suspicions: usize = reports.iter().map(|r| r.suspicions().count()).sum();
    let rounds: usize = reports.iter().map(|r| r.verdicts.len()).sum();
    outcome(
        suspicions == 0 && rounds > 0,
        format!("100 runs, {rounds} rounds, {suspicions} suspicious verdicts"),
    )
}

fn c9_gray_hole() -> Outcome {
    let config = scenario("gray-0.5-defense-on");
    let half = sweep(&config, &seeds()).expect("sweep");
    let mut latest_round = 0usize;
    for r in &half {
        let position = r
            .verdicts
            .iter()
            .filter(|v| v.source == NodeId(0))
            .position(|v| matches!(&v.verdict, Verdict::GrayHoleSuspected { route } if route.contains(&ATTACKER)));
        match position {
            Some(p) if p < 3 => latest_round = latest_round.max(p + 1),
            _ => return outcome(false, format!("seed {}: gray hole not flagged within 3 rounds", r.seed)),
        }
    }
    let mut honest = config.clone();
    for p in honest.attackers.values_mut() {
        p.gray_drop_fraction = 0.0;
    }
    let zero = sweep(&honest, &seeds()).expect("sweep");
    let raised: usize = zero.iter().map(|r| r.gray_suspicions().count()).sum();
    outcome(
        raised == 0,
        format!("p=0.5 flagged by round {latest_round} at worst; p=0.0 raised {raised} times"),
    )
}

fn c10_determinism() -> Outcome {
    let names = [
        "baseline-defense-off",
        "single-external-defense-on",
        "cooperative-2-defense-on",
        "gray-0.5-defense-on",
    ];
    let dir = tempfile::tempdir().expect("tempdir");
    for name in names {
        let config = scenario(name);
        let mut files = Vec::new();
        for pass in 0..2 {
            let out = dir.path().join(format!("pass{pass}"));
            let (_, path) = holeguard::runner::run_and_export(&config, &out).expect("run");
            files.push(std::fs::read(path).expect("read csv"));
        }
        if files[0] != files[1] {
            return outcome(false, format!("{name}: CSV files differ"));
        }
    }
    outcome(true, format!("{} scenarios, byte-identical CSV across two runs", names.len()))
}

fn main() -> ExitCode {
    let data = Data {
        baseline: runs("baseline-defense-off"),
        external_off: runs("single-external-defense-off"),
        external_on: runs("single-external-defense-on"),
        coop_on: runs("cooperative-2-defense-on"),
    };
    let results = [
        ("1 baseline honesty", c1_baseline(&data)),
        ("2 black hole devastation", c2_devastation(&data)),
        ("3 defense recovery", c3_recovery(&data)),
        ("4 cooperative detection", c4_cooperative(&data)),
        ("5 overhead ordering", c5_overhead(&data)),
        ("6 delay stability", c6_delay(&data)),
        ("7 merkle oracle equivalence", c7_merkle_oracle()),
        ("8 no false positives", c8_no_false_positives()),
        ("9 gray hole", c9_gray_hole()),
        ("10 determinism", c10_determinism()),
    ];
    println!("acceptance over seeds {}..={}", SEEDS.start(), SEEDS.end());
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", results.len());
        ExitCode::FAILURE
    }
}
