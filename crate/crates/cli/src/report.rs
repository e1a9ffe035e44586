//! Plain-text rendering for replay diffs, metrics and debug summaries.

use std::collections::BTreeMap;
use std::fmt::Write;

use socialbot_core::manager::TurnDebug;
use socialbot_core::metrics::{compute_metrics, EngagementMetrics};
use socialbot_core::replay::{Mismatch, ReplayReport};
use socialbot_core::store::ConversationLogEntry;

pub fn mismatch_line(m: &Mismatch) -> String {
    format!("turn {} {}: expected {:?}, got {:?}", m.turn, m.field, m.expected, m.got)
}

/// One line per turn, then the diff and a summary line.
pub fn replay_text(report: &ReplayReport) -> String {
    let mut out = String::new();
    for entry in &report.log {
        let _ = writeln!(out, "{:>3} user: {}", entry.turn_number, entry.user);
        let _ = writeln!(out, "    bot:  {}", entry.bot);
    }
    for m in &report.mismatches {
        let _ = writeln!(out, "MISMATCH {}", mismatch_line(m));
    }
    let status = if report.passed() { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "{status}: {} turns, {} mismatches, {:.1} ms",
        report.log.len(),
        report.mismatches.len(),
        report.elapsed.as_secs_f64() * 1000.0
    );
    out
}

/// Metrics per session, in session id order.
pub fn metrics_by_session(log: &[ConversationLogEntry]) -> BTreeMap<String, EngagementMetrics> {
    let mut sessions: BTreeMap<String, Vec<ConversationLogEntry>> = BTreeMap::new();
    for e in log {
        sessions.entry(e.session_id.clone()).or_default().push(e.clone());
    }
    sessions.into_iter().map(|(id, entries)| (id, compute_metrics(&entries))).collect()
}

pub fn metrics_table(metrics: &BTreeMap<String, EngagementMetrics>) -> String {
    let width = metrics.keys().map(String::len).max().unwrap_or(0).max("session".len());
    let mut out = format!("{:<width$}  {:>5}  {:>8}  {:>9}  {:>8}\n", "session", "turns", "entities", "user_chars", "bot_chars");
    for (id, m) in metrics {
        let _ = writeln!(
            out,
            "{id:<width$}  {:>5}  {:>8}  {:>9.1}  {:>8.1}",
            m.turns, m.distinct_entities, m.avg_user_chars, m.avg_bot_chars
        );
    }
    out
}

/// A few lines on who answered and why, for the REPL.
pub fn debug_summary(debug: &TurnDebug) -> String {
    let mut out = String::new();
    for run in &debug.responses {
        if let Some(c) = &run.candidate {
            let _ = writeln!(out, "  response {:<22} {:?} {:?}", run.rg, c.priority, c.text);
        }
    }
    for run in &debug.prompts {
        if let Some(c) = &run.candidate {
            let _ = writeln!(out, "  prompt   {:<22} {:?} {:?}", run.rg, c.priority, c.text);
        }
    }
    let _ = writeln!(
        out,
        "  chose {} ({:?}) + {} ({:?}); entity {}",
        debug.response_rg.as_deref().unwrap_or("-"),
        debug.response_priority,
        debug.prompt_rg.as_deref().unwrap_or("-"),
        debug.prompt_priority,
        debug.entity.as_deref().unwrap_or("-"),
    );
    out
}
