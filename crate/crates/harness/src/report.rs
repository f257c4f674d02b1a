//! Markdown report and the stdout headline.

use std::fmt::Write as _;

use clawgate_core::stats::{fmt_metric, ConfusionMatrix};

use crate::runner::{RunOutcome, SubjectResult};

fn upper(m: &ConfusionMatrix) -> String {
    match m.fpr_interval() {
        None => "--".into(),
        Some(w) if w.high >= 0.01 => format!("{:.4}", w.high),
        Some(w) => format!("{:.3e}", w.high),
    }
}

fn note(s: &SubjectResult) -> &'static str {
    if s.failed_closed() {
        "fail-closed: WitnessUnavailable"
    } else {
        ""
    }
}

fn matrix_table(out: &mut String, s: &SubjectResult) {
    out.push_str("| channel | cell | TP | FP | TN | FN | P | R | F1 | Acc | FPR 95% upper | note |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---|\n");
    let mut row = |channel: &str, cell: &str, m: &ConfusionMatrix| {
        let _ = writeln!(
            out,
            "| {channel} | {cell} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            m.tp,
            m.fp,
            m.tn,
            m.fn_,
            fmt_metric(m.precision()),
            fmt_metric(m.recall()),
            fmt_metric(m.f1()),
            fmt_metric(m.accuracy()),
            upper(m),
            note(s),
        );
    };
    for (cell, m) in &s.cells {
        row(cell.channel.as_str(), cell.category.as_str(), m);
    }
    row("all", "all", &s.overall);
}

/// Per-subject matrices, as printed to stdout after a run.
pub fn headline(o: &RunOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "clawgate run: seed={} n/cell={} channels={} samples={}",
        o.seed,
        o.config.n_per_cell,
        o.config.channels.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(","),
        o.samples.len()
    );
    for s in &o.subjects {
        let _ = writeln!(out, "\n{}{}", s.name(), if s.failed_closed() { " (fail-closed: WitnessUnavailable)" } else { "" });
        matrix_table(&mut out, s);
    }
    if !o.mcnemar.is_empty() {
        out.push('\n');
        for p in &o.mcnemar {
            let _ = writeln!(out, "McNemar {} vs {}: b={} c={} chi2={:.6}", p.a, p.b, p.result.b, p.result.c, p.result.chi2);
        }
    }
    let _ = writeln!(
        out,
        "\nsamples.csv sha256={}  journals {}  elapsed {:.1}s",
        o.csv_digest,
        if o.all_verified() { "verified" } else { "FAILED verification" },
        o.elapsed.as_secs_f64()
    );
    out
}

pub fn render_report(o: &RunOutcome) -> String {
    let mut out = String::from("# clawgate harness report\n\n## Fingerprint\n\n| field | value |\n|---|---|\n");
    for (k, v) in o.fingerprint.rows() {
        let _ = writeln!(out, "| {k} | {} |", v.replace('|', "\\|"));
    }

    let c = &o.config;
    out.push_str("\n## Configuration\n\n");
    let _ = writeln!(out, "- samples: {} ({} per label per cell)", o.samples.len(), c.n_per_cell);
    let _ = writeln!(out, "- channels: {}", c.channels.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(", "));
    let _ = writeln!(out, "- subjects: {}", c.subjects.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(", "));
    let _ = writeln!(out, "- DLP catalog: {}", if c.widened_dlp { "widened" } else { "strict" });
    let _ = writeln!(out, "- witness: {}", if c.disable_witness { "disabled" } else { "engaged" });
    let _ = writeln!(
        out,
        "- chat posts: {}",
        o.posts.map_or_else(|| "suppressed (stats-only)".into(), |n| format!("{n} to mock sinks"))
    );
    let _ = writeln!(out, "- elapsed: {:.1} s", o.elapsed.as_secs_f64());

    out.push_str("\n## Detection matrices\n\nA blocked sample counts as a positive. Intervals are Wilson 95%.\n");
    for s in &o.subjects {
        let _ = writeln!(out, "\n### {}\n", s.name());
        if s.failed_closed() {
            out.push_str(
                "Witness unavailable at boot: the admission gate failed closed, refused every extension \
                 (reason WitnessUnavailable) and blocked every sample. Its FP counts reflect that refusal, \
                 not a content detector.\n\n",
            );
        }
        matrix_table(&mut out, s);
        let m = &s.overall;
        let iv = |w: Option<clawgate_core::stats::WilsonInterval>| w.map_or_else(|| "--".into(), |w| w.to_string());
        let _ = writeln!(
            out,
            "\nOverall precision {} {}, recall {} {}, FPR {} {}.",
            fmt_metric(m.precision()),
            iv(m.precision_interval()),
            fmt_metric(m.recall()),
            iv(m.recall_interval()),
            fmt_metric(m.false_positive_rate()),
            iv(m.fpr_interval()),
        );
    }

    if !o.mcnemar.is_empty() {
        out.push_str("\n## Paired comparison (McNemar)\n\n`b`: first subject blocked, second delivered. `c`: the reverse.\n\n");
        out.push_str("| A | B | b | c | chi2 |\n|---|---|---:|---:|---:|\n");
        for p in &o.mcnemar {
            let _ = writeln!(out, "| {} | {} | {} | {} | {:.6} |", p.a, p.b, p.result.b, p.result.c, p.result.chi2);
        }
    }

    out.push_str("\n## Admission and audit\n\n| subject | extension | admitted | reason |\n|---|---|---|---|\n");
    for s in &o.subjects {
        for a in &s.admissions {
            let _ = writeln!(out, "| {} | {} | {} | {} |", s.name(), a.extension, a.admitted, a.reason);
        }
    }
    out.push_str("\n| subject | audit records | tamper attempts | journal |\n|---|---:|---:|---|\n");
    for s in &o.subjects {
        let file = s.journal_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let verdict = match s.journal_verdict {
            clawgate_core::ChainVerdict::Ok => "verified".to_string(),
            clawgate_core::ChainVerdict::Broken { first_bad_index } => format!("broken at {first_bad_index}"),
        };
        let _ = writeln!(out, "| {} | {} | {} | {file}: {verdict} |", s.name(), s.audit_records, s.tamper_records);
    }
    let _ = writeln!(
        out,
        "\nWitness journal: {} line(s), {}.",
        o.witness_lines,
        if o.witness_ok { "all signatures verify" } else { "VERIFICATION FAILED" }
    );
    let _ = writeln!(out, "\n## Replay\n\n`samples.csv` sha256: `{}`", o.csv_digest);
    out
}
