//! Acceptance criteria 1 to 10 at their stated tolerances and scales.
//!
//! Every experiment runs twice with the default configuration. The first run
//! decides criteria 1 to 9; the byte comparison of both serialized reports
//! decides criterion 10. One line per criterion goes straight to stdout so the
//! summary survives output capture.

use std::io::Write;
use std::time::Instant;

use fracheat::verify::{run, ExperimentId, ExperimentReport, VerifyConfig};

struct Criterion {
    number: u32,
    title: &'static str,
    experiments: &'static [ExperimentId],
    limit_seconds: f64,
}

const CRITERIA: &[Criterion] = &[
    Criterion { number: 1, title: "fBm law", experiments: &[ExperimentId::FbmLaw], limit_seconds: 90.0 },
    Criterion {
        number: 2,
        title: "kernel closed forms",
        experiments: &[ExperimentId::KernelQuadrature],
        limit_seconds: 10.0,
    },
    Criterion { number: 3, title: "Skorohod exactness", experiments: &[ExperimentId::Skorohod], limit_seconds: 60.0 },
    Criterion {
        number: 4,
        title: "duality and L2 identity",
        experiments: &[ExperimentId::Duality, ExperimentId::L2Identity],
        limit_seconds: 120.0,
    },
    Criterion {
        number: 5,
        title: "spectral laws",
        experiments: &[ExperimentId::SpectralLaws, ExperimentId::Contraction],
        limit_seconds: 10.0,
    },
    Criterion {
        number: 6,
        title: "solver reduction and refinement",
        experiments: &[ExperimentId::SolverReduction, ExperimentId::WeakResidual],
        limit_seconds: 120.0,
    },
    Criterion { number: 7, title: "maximal inequality", experiments: &[ExperimentId::Maximal], limit_seconds: 300.0 },
    Criterion { number: 8, title: "Hoelder embedding", experiments: &[ExperimentId::Hoelder], limit_seconds: 300.0 },
    Criterion {
        number: 9,
        title: "Littlewood-Paley",
        experiments: &[ExperimentId::LittlewoodPaley],
        limit_seconds: 60.0,
    },
];

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn bytes(r: &ExperimentReport) -> Vec<u8> {
    serde_json::to_vec(r).expect("reports serialize")
}

/// Worst failing row, for the summary line.
fn worst(r: &ExperimentReport) -> String {
    match r.rows.iter().filter(|row| !row.pass).max_by(|a, b| a.ratio.total_cmp(&b.ratio)) {
        Some(row) => format!("{}: {} (ratio {:.3e})", r.id, row.label, row.ratio),
        None => format!("{}: {}", r.id, r.criterion),
    }
}

#[test]
fn acceptance_criteria() {
    let config = VerifyConfig::default();
    let mut failed = Vec::new();
    let mut divergent = Vec::new();

    for c in CRITERIA {
        let start = Instant::now();
        let first: Vec<ExperimentReport> =
            c.experiments.iter().map(|&id| run(id, &config).unwrap_or_else(|e| panic!("{id}: {e}"))).collect();
        let seconds = start.elapsed().as_secs_f64();
        for (id, r) in c.experiments.iter().zip(&first) {
            let again = run(*id, &config).unwrap_or_else(|e| panic!("{id}: {e}"));
            if bytes(r) != bytes(&again) {
                divergent.push(id.name());
            }
        }

        let in_time = seconds <= c.limit_seconds;
        let pass = in_time && first.iter().all(|r| r.pass);
        let detail = if pass {
            first.iter().map(|r| format!("{} ratio {:.3e}", r.id, r.ratio)).collect::<Vec<_>>().join("; ")
        } else if !in_time {
            "over time limit".to_string()
        } else {
            first.iter().filter(|r| !r.pass).map(worst).collect::<Vec<_>>().join("; ")
        };
        say(&format!(
            "criterion {:>2} {:<32} {} {:7.1}s/{:.0}s  {detail}",
            c.number,
            c.title,
            if pass { "PASS" } else { "FAIL" },
            seconds,
            c.limit_seconds,
        ));
        if !pass {
            failed.push(c.number);
        }
    }

    let reproducible = divergent.is_empty();
    say(&format!(
        "criterion 10 {:<32} {}  {}",
        "byte-identical re-runs",
        if reproducible { "PASS" } else { "FAIL" },
        if reproducible { "all reports identical".to_string() } else { format!("diverged: {}", divergent.join(", ")) },
    ));
    if !reproducible {
        failed.push(10);
    }

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
