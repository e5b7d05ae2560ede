//! Release acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    enumerate_blocks, enumerate_trimmed, oracle_dimension, PUBLISHED, PUBLISHED_TOLERANCE,
};
use fractaldim::io::{load_checkpoint, write_checkpoint, Dtype, ShapeManifest, TensorRecord};
use fractaldim::laws::{band_discrepancy_bound, run_suite, verify_invertibility, LawReport, Suite};
use fractaldim::report::{analyze_checkpoint, analyze_manifest, DEFAULT_LAMBDAS};
use fractaldim::{
    block_count, block_indices, estimate_dimension, geometric_schedule, Grid, ScheduleKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const TRIALS: usize = 1000;
const SWEEP_MAX: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn law_outcome(report: &LawReport, expected_trials: usize) -> Outcome {
    let mut detail = format!(
        "{}: {} trials, {} failures",
        report.law_name, report.trials, report.failures
    );
    if let Some(w) = &report.witness {
        detail.push_str(&format!(" (first: {w})"));
    }
    Outcome::new(report.passed() && report.trials >= expected_trials, detail)
}

fn find<'a>(reports: &'a [LawReport], name: &str) -> &'a LawReport {
    reports
        .iter()
        .find(|r| r.law_name == name)
        .unwrap_or_else(|| panic!("suite did not report {name}"))
}

fn published_table() -> Outcome {
    let start = Instant::now();
    let mut estimates = Vec::new();
    for &(m, n, lambda, _) in &PUBLISHED {
        let grid = Grid::new(m, n).unwrap();
        estimates.push(estimate_dimension(grid, lambda, ScheduleKind::Geometric).unwrap());
    }
    let elapsed = start.elapsed();

    let mut worst_published = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut misses = Vec::new();
    for (&(m, n, lambda, quoted), est) in PUBLISHED.iter().zip(&estimates) {
        let oracle = oracle_dimension(m, n, lambda as usize).expect("two or more scales");
        let dp = (est.dimension - quoted).abs();
        let doracle = (est.dimension - oracle).abs();
        worst_published = worst_published.max(dp);
        worst_oracle = worst_oracle.max(doracle);
        if dp > PUBLISHED_TOLERANCE || doracle > 1e-12 {
            misses.push(format!(
                "({m},{n}) λ={lambda}: {:.6} vs quoted {quoted}, oracle {oracle:.6}",
                est.dimension
            ));
        }
    }
    let fast = elapsed < Duration::from_secs(1);
    let mut detail = format!(
        "{} values, max |Δ| to quoted {worst_published:.2e}, to oracle {worst_oracle:.2e}, {elapsed:.2?}",
        PUBLISHED.len()
    );
    for m in &misses {
        detail.push_str("; ");
        detail.push_str(m);
    }
    Outcome::new(misses.is_empty() && fast, detail)
}

fn tiling_dichotomy() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    let mut below_two = 0;
    for m in 2..=SWEEP_MAX {
        for n in 2..=SWEEP_MAX {
            let grid = Grid::new(m, n).unwrap();
            for &lambda in &DEFAULT_LAMBDAS {
                let schedule = geometric_schedule(grid, lambda).unwrap();
                if schedule.len() < 2 {
                    continue;
                }
                cases += 1;
                let divides = schedule.r_values.iter().all(|&r| m % r == 0 && n % r == 0);
                let d = estimate_dimension(grid, lambda, ScheduleKind::Geometric)
                    .unwrap()
                    .dimension;
                if d < 2.0 - 1e-9 {
                    below_two += 1;
                }
                if ((d - 2.0).abs() <= 1e-9) != divides {
                    mismatches.push(format!("({m},{n}) λ={lambda}: D={d}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let mut detail = format!(
        "{cases} cases, {} mismatches, {below_two} below 2, {elapsed:.2?}",
        mismatches.len()
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(
        mismatches.is_empty() && below_two == 0 && elapsed < Duration::from_secs(10),
        detail,
    )
}

/// The stated `2m + 2n` discrepancy bound over every grid up to the sweep
/// limit and every scale of every geometric schedule.
fn invertibility_sweep() -> Outcome {
    let mut total = LawReport::new("invertibility");
    let mut oracle_mismatch = 0;
    let mut band_violations = 0;
    for m in 1..=SWEEP_MAX {
        for n in 1..=SWEEP_MAX {
            let grid = Grid::new(m, n).unwrap();
            for &lambda in &DEFAULT_LAMBDAS {
                let scales = geometric_schedule(grid, lambda).unwrap().r_values;
                for &r in &scales {
                    let lost = m * n - block_count(grid, r).unwrap() * r * r;
                    if lost != enumerate_trimmed(m, n, r) {
                        oracle_mismatch += 1;
                    }
                    if lost > band_discrepancy_bound(grid, r) {
                        band_violations += 1;
                    }
                }
                total.absorb(verify_invertibility(grid, &scales).unwrap());
            }
        }
    }
    let mut outcome = law_outcome(&total, 1);
    outcome.pass &= oracle_mismatch == 0;
    outcome.detail.push_str(&format!(
        ", {oracle_mismatch} discrepancy counts off the oracle, {band_violations} over (r-1)(m+n)"
    ));
    outcome
}

fn coarse_laws() -> (Outcome, Vec<(&'static str, Outcome)>) {
    let mut parts = Vec::new();
    for (label, suite, law) in [
        ("linearity", Suite::Linearity, "linearity"),
        ("identity", Suite::Identity, "identity"),
        ("composition", Suite::Composition, "composition"),
        ("uniformity", Suite::Uniformity, "uniformity"),
        ("properness", Suite::Properness, "properness"),
    ] {
        let reports = run_suite(suite, SEED, TRIALS).unwrap();
        parts.push((label, law_outcome(find(&reports, law), TRIALS)));
    }
    parts.push(("invertibility", invertibility_sweep()));
    let failed: Vec<_> = parts
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(l, _)| *l)
        .collect();
    let summary = if failed.is_empty() {
        Outcome::new(true, format!("{} sub-checks", parts.len()))
    } else {
        Outcome::new(false, format!("failing: {}", failed.join(", ")))
    };
    (summary, parts)
}

fn permutation_laws() -> Outcome {
    let reports = run_suite(Suite::Permutation, SEED, TRIALS).unwrap();
    let strong = law_outcome(find(&reports, "permutation (strong)"), TRIALS);
    let weak = law_outcome(find(&reports, "permutation (weak, block-aligned)"), 200);
    Outcome::new(
        strong.pass && weak.pass,
        format!("{}; {}", strong.detail, weak.detail),
    )
}

fn intertwiners() -> Outcome {
    let reports = run_suite(Suite::Intertwiner, SEED, TRIALS).unwrap();
    let relu = law_outcome(find(&reports, "intertwiner (relu)"), TRIALS);
    let tanh = law_outcome(find(&reports, "intertwiner (tanh)"), 200);
    Outcome::new(
        relu.pass && tanh.pass,
        format!("{}; {}", relu.detail, tanh.detail),
    )
}

fn block_count_oracle() -> Outcome {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for m in 1..=SWEEP_MAX {
        for n in 1..=SWEEP_MAX {
            let grid = Grid::new(m, n).unwrap();
            for r in 1..=m.min(n) {
                cases += 1;
                let formula = block_count(grid, r).unwrap();
                let listed = block_indices(grid, r).unwrap().len();
                let walked = enumerate_blocks(m, n, r);
                if formula != listed || formula != walked {
                    mismatches.push(format!("({m},{n}) r={r}: {formula}/{listed}/{walked}"));
                }
            }
        }
    }
    let mut detail = format!("{cases} cases, {} mismatches", mismatches.len());
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(mismatches.is_empty(), detail)
}

fn random_records(rng: &mut ChaCha8Rng) -> Vec<TensorRecord> {
    let layout: [(&str, Dtype, &[usize]); 6] = [
        ("conv1.weight", Dtype::F32, &[16, 3, 3, 3]),
        ("conv2.weight", Dtype::F64, &[32, 16, 3, 3]),
        ("bn.weight", Dtype::F32, &[32]),
        ("fc.weight", Dtype::F32, &[10, 32]),
        ("head.weight", Dtype::F64, &[27, 64]),
        ("fc.bias", Dtype::F32, &[10]),
    ];
    layout
        .iter()
        .map(|&(name, dtype, shape)| {
            let len = shape.iter().product();
            let values = (0..len)
                .map(|_| {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    match dtype {
                        Dtype::F32 => v as f32 as f64,
                        Dtype::F64 => v,
                    }
                })
                .collect();
            TensorRecord::new(name, dtype, shape.to_vec(), values).unwrap()
        })
        .collect()
}

fn io_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let records = random_records(&mut rng);
    let ckpt = dir.path().join("tiny.safetensors");
    write_checkpoint(&ckpt, &records).unwrap();
    let loaded = load_checkpoint(&ckpt).unwrap();

    let bits = |rs: &[TensorRecord]| -> Vec<(String, Dtype, Vec<usize>, Vec<u64>)> {
        rs.iter()
            .map(|r| {
                (
                    r.name.clone(),
                    r.dtype,
                    r.shape.clone(),
                    r.values.iter().map(|v| v.to_bits()).collect(),
                )
            })
            .collect()
    };
    let round_trip = bits(&records) == bits(&loaded);

    let manifest_dir = dir.path().join("manifests");
    std::fs::create_dir(&manifest_dir).unwrap();
    let manifest_path = manifest_dir.join("tiny.json");
    let extracted = ShapeManifest::from_records("tiny", &loaded).unwrap();
    std::fs::write(&manifest_path, extracted.to_json().unwrap()).unwrap();

    let mut payloads_equal = true;
    for schedule in [ScheduleKind::Geometric, ScheduleKind::FloorDecay] {
        let from_ckpt = analyze_checkpoint(&ckpt, &DEFAULT_LAMBDAS, schedule)
            .unwrap()
            .with_timestamp();
        let manifest = ShapeManifest::load(&manifest_path).unwrap();
        let from_manifest = analyze_manifest(&manifest, &DEFAULT_LAMBDAS, schedule)
            .unwrap()
            .with_timestamp();
        payloads_equal &=
            from_ckpt.payload_json().unwrap() == from_manifest.payload_json().unwrap();
    }
    Outcome::new(
        round_trip && payloads_equal,
        format!(
            "{} tensors round-trip bit-exact: {round_trip}; checkpoint and manifest payloads identical: {payloads_equal}",
            records.len()
        ),
    )
}

fn line(label: &str, outcome: &Outcome) {
    let status = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{status} {label}: {}", outcome.detail);
}

fn main() -> ExitCode {
    let mut all = true;
    let mut record = |label: &str, outcome: Outcome| {
        line(label, &outcome);
        all &= outcome.pass;
    };

    record("1 published dimension table", published_table());
    record("2 perfect-tiling dichotomy sweep", tiling_dichotomy());

    let (summary, parts) = coarse_laws();
    for (label, part) in &parts {
        let status = if part.pass { "pass" } else { "fail" };
        println!("  {status} 3.{label}: {}", part.detail);
    }
    record("3 coarse-law suites", summary);

    record("4 permutation laws", permutation_laws());
    record("5 intertwiner suite", intertwiners());
    record("6 block-count oracle equivalence", block_count_oracle());
    record("7 I/O determinism", io_determinism());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
