//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p spotmask-cli --test acceptance`. Extra
//! arguments select criteria by id, e.g. `-- c6 c7`. The process exits
//! non-zero when any selected criterion fails.

mod invariants;
mod oracles;
mod suites;

use std::time::Instant;

/// Outcome of one criterion.
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = fn(&mut suites::Shared) -> Verdict;

const CRITERIA: [(&str, &str, Criterion); 8] = [
    (
        "c1",
        "ASM on nickel-like: recall, specificity, runtime",
        suites::c1_asm_nickel,
    ),
    (
        "c2",
        "ASM false positives on textured suites",
        suites::c2_asm_texture,
    ),
    (
        "c3",
        "GBDT trained on 3 nickel-like frames",
        suites::c3_gbdt_nickel,
    ),
    ("c4", "transfer to battery-like-1", suites::c4_transfer),
    (
        "c5",
        "max-depth sweep shape on the mixed suite",
        suites::c5_depth_sweep,
    ),
    ("c6", "oracle equivalence suites", oracles::c6_oracles),
    ("c7", "invariant suites", invariants::c7_invariants),
    (
        "c8",
        "GBDT prediction throughput on 2880x2880",
        suites::c8_throughput,
    ),
];

fn main() {
    // libtest flags such as --nocapture may be forwarded by cargo; only bare ids select.
    let selected: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.to_lowercase())
        .collect();
    let mut shared = suites::Shared::default();
    let mut failed = 0;
    let mut ran = 0;
    let start = Instant::now();
    for (id, title, run) in CRITERIA {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let t = Instant::now();
        let v = run(&mut shared);
        ran += 1;
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} {}  {title}: {} [{:.1}s]",
            if v.passed { "PASS" } else { "FAIL" },
            id.to_uppercase(),
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{ran} criteria passed in {:.1}s",
        ran - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
