//! Batch execution: N sessions from one config, reports, and file output.
//!
//! Sessions are independent Monte Carlo runs with per-index derived seeds, so
//! they parallelize trivially; with the `parallel` feature (default) they run
//! on the rayon pool, otherwise sequentially. Output ordering is by session
//! index either way, and the two paths produce byte-identical results.

use crate::analysis::{
    analyze_session, compute_efficiency, AnalysisOptions, ClassReport, EfficiencyCounters,
    SampleClass, SessionReport, Thresholds, Verdict,
};
use crate::config::RunConfig;
use crate::error::Result;
use crate::network::{schedule, TimeSlotSchedule};
use crate::protocol::{ClassicalMessage, RoundRecord};
use crate::rng;
use crate::session::{run_session, SessionParams, SessionTranscript};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One executed and analyzed session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub report: SessionReport,
    pub records: Vec<RoundRecord>,
    pub messages: Vec<ClassicalMessage>,
}

/// Pooled statistics over all sessions of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub sessions: u64,
    pub rounds_total: u64,
    pub lost_total: u64,
    pub classes: Vec<ClassReport>,
    pub verdict: Verdict,
    pub eta_t: Option<f64>,
    pub eta_q: Option<f64>,
    pub final_key_bits: u64,
    pub classical_bits_exchanged: u64,
    pub qubits_used: u64,
    pub schedule: TimeSlotSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub aggregate: AggregateReport,
    pub sessions: Vec<SessionOutput>,
}

/// The machine-readable report file: the aggregate plus one report per
/// session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub aggregate: AggregateReport,
    pub sessions: Vec<SessionReport>,
}

fn session_params(config: &RunConfig) -> SessionParams {
    SessionParams {
        rounds: config.rounds_per_session,
        probs: config.modes,
        channels: config.channel.to_segment_channels(),
        adversary: config.adversary,
    }
}

fn analysis_options(config: &RunConfig) -> AnalysisOptions {
    AnalysisOptions {
        thresholds: config.analysis.thresholds,
        reveal_fraction: config.analysis.reveal_fraction,
        adversary: config.adversary,
    }
}

fn execute_one(config: &RunConfig, index: u64) -> Result<SessionOutput> {
    let params = session_params(config);
    let seed = rng::derive_seed(config.seed, index);
    let transcript: SessionTranscript = run_session(&params, seed);
    let analysis = analyze_session(&transcript, &analysis_options(config), index, seed)?;
    let mut messages = transcript.messages;
    messages.extend(analysis.reveal_messages);
    Ok(SessionOutput {
        report: analysis.report,
        records: transcript.records,
        messages,
    })
}

/// Run every session on the current thread, in index order.
pub fn run_sessions_sequential(config: &RunConfig) -> Result<Vec<SessionOutput>> {
    (0..config.sessions)
        .map(|index| execute_one(config, index))
        .collect()
}

/// Run sessions on the rayon pool; results are collected in index order, so
/// the output is identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn run_sessions_parallel(config: &RunConfig) -> Result<Vec<SessionOutput>> {
    (0..config.sessions)
        .into_par_iter()
        .map(|index| execute_one(config, index))
        .collect()
}

/// Validate the config and execute the whole run.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;

    let session_requests: Vec<(String, String)> = (0..config.sessions)
        .map(|i| {
            let request = &config.requests[(i as usize) % config.requests.len().max(1)];
            (request.sender.clone(), request.receiver.clone())
        })
        .collect();
    let slots = schedule(&config.topology, &session_requests)?;

    #[cfg(feature = "parallel")]
    let sessions = run_sessions_parallel(config)?;
    #[cfg(not(feature = "parallel"))]
    let sessions = run_sessions_sequential(config)?;

    let aggregate = aggregate(config, &sessions, slots);
    Ok(RunOutput {
        aggregate,
        sessions,
    })
}

fn aggregate(
    config: &RunConfig,
    sessions: &[SessionOutput],
    schedule: TimeSlotSchedule,
) -> AggregateReport {
    let mut counters = EfficiencyCounters::default();
    let mut classes: Vec<ClassReport> = [
        SampleClass::SBc,
        SampleClass::SCc0,
        SampleClass::SCc1,
        SampleClass::SW,
    ]
    .into_iter()
    .map(|class| ClassReport {
        class,
        events: 0,
        matched: 0,
        errors: 0,
        rate: None,
    })
    .collect();

    let mut rounds_total = 0;
    let mut lost_total = 0;
    let mut final_key_bits = 0;
    for session in sessions {
        let report = &session.report;
        rounds_total += report.rounds;
        lost_total += report.lost_rounds;
        final_key_bits += report.final_key_bits;
        counters.add(&EfficiencyCounters {
            key_bits: report.final_key_bits,
            qubits_emitted: report.qubits_used,
            classical_bits: report.classical_bits_exchanged,
            // One useful qubit per encoded raw-key bit.
            useful_qubits: report.raw_key_bits,
        });
        for (pooled, per_session) in classes.iter_mut().zip(&report.classes) {
            pooled.events += per_session.events;
            pooled.matched += per_session.matched;
            pooled.errors += per_session.errors;
        }
    }

    for pooled in classes.iter_mut() {
        pooled.rate = (pooled.matched > 0).then(|| pooled.errors as f64 / pooled.matched as f64);
    }

    let verdict = pooled_verdict(&classes, &config.analysis.thresholds);
    let efficiency = compute_efficiency(&counters);

    AggregateReport {
        sessions: sessions.len() as u64,
        rounds_total,
        lost_total,
        classes,
        verdict,
        eta_t: efficiency.eta_t,
        eta_q: efficiency.eta_q,
        final_key_bits,
        classical_bits_exchanged: counters.classical_bits,
        qubits_used: counters.qubits_emitted,
        schedule,
    }
}

fn pooled_verdict(classes: &[ClassReport], thresholds: &Thresholds) -> Verdict {
    let threshold_for = |class: SampleClass| match class {
        SampleClass::SBc => thresholds.s_bc,
        SampleClass::SCc0 => thresholds.s_cc0,
        SampleClass::SCc1 => thresholds.s_cc1,
        SampleClass::SW => thresholds.s_w,
    };
    for report in classes {
        if let Some(rate) = report.rate {
            if rate >= threshold_for(report.class) {
                return Verdict::Abort;
            }
        }
    }
    Verdict::Accept
}

/// Write the machine-readable report (JSON).
pub fn write_report(output: &RunOutput, path: &Path) -> Result<()> {
    let file = ReportFile {
        aggregate: output.aggregate.clone(),
        sessions: output.sessions.iter().map(|s| s.report.clone()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    session: u64,
    #[serde(flatten)]
    record: &'a RoundRecord,
}

/// Write the full transcript dump: one JSON record per line.
pub fn write_transcript(output: &RunOutput, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    for (index, session) in output.sessions.iter().enumerate() {
        for record in &session.records {
            let line = TranscriptLine {
                session: index as u64,
                record,
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Human-readable run summary.
pub fn render_summary(output: &RunOutput) -> String {
    let agg = &output.aggregate;
    let mut text = String::new();
    text.push_str(&format!(
        "sessions: {}   rounds: {}   lost: {}\n",
        agg.sessions, agg.rounds_total, agg.lost_total
    ));
    text.push_str("class  events   matched  errors   rate\n");
    for class in &agg.classes {
        let name = match class.class {
            SampleClass::SBc => "s_bc",
            SampleClass::SCc0 => "s_cc0",
            SampleClass::SCc1 => "s_cc1",
            SampleClass::SW => "s_w",
        };
        let rate = class.rate.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        text.push_str(&format!(
            "{name:<6} {:<8} {:<8} {:<8} {rate}\n",
            class.events, class.matched, class.errors
        ));
    }
    let verdict = match agg.verdict {
        Verdict::Accept => "accept",
        Verdict::Abort => "abort",
    };
    text.push_str(&format!("verdict: {verdict}\n"));
    let fmt_eta = |eta: Option<f64>| eta.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    text.push_str(&format!(
        "eta_t: {}   eta_q: {}\n",
        fmt_eta(agg.eta_t),
        fmt_eta(agg.eta_q)
    ));
    text.push_str(&format!(
        "final key bits: {}   qubits: {}   classical bits: {}\n",
        agg.final_key_bits, agg.qubits_used, agg.classical_bits_exchanged
    ));
    text
}
