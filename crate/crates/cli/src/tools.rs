use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::bail;
use clap::{ArgGroup, Args};
use rayon::prelude::*;
use serde_json::json;

use diartool_core::doverlap::{combine as combine_session, CombineOptions, Method, RankOrder, DEFAULT_BUDGET, DEFAULT_EPOCHS};
use diartool_core::io::{parse_affinity, parse_rttm, parse_utterances, write_labels, write_manifest, write_rttm};
use diartool_core::simulate::{fit_stats, overlap_transitions, simulate as run_simulation, ConversationStats, SimConfig};
use diartool_core::spectral::{cluster as run_cluster, ClusterOptions, DiscretizeOptions};
use diartool_core::timeline::quantize_time;
use diartool_core::{Error, Timeline};

use crate::{emit, read, MethodArg, RankOrderArg};

#[derive(Args)]
pub struct CombineArgs {
    /// Hypothesis RTTM files, at least two.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    /// Output RTTM (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Largest clique count the exponential mapping may enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts for rls.
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    /// Steps per rls restart (default 2K+1).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum, default_value = "descending")]
    rank_order: RankOrderArg,
    /// Most speakers voted active at once.
    #[arg(long, default_value_t = 2)]
    max_speakers: usize,
    /// Write the per-session label mapping as JSON.
    #[arg(long)]
    dump_mapping: Option<PathBuf>,
}

pub fn combine(a: CombineArgs) -> anyhow::Result<()> {
    if a.max_speakers == 0 {
        bail!(Error::input("--max-speakers must be at least 1"));
    }
    let opts = CombineOptions {
        method: match a.method {
            MethodArg::Exponential => Method::Exponential,
            MethodArg::Hungarian => Method::Hungarian,
            MethodArg::Rls => Method::Rls,
            MethodArg::Auto => Method::Auto,
        },
        budget: a.budget,
        rls_epochs: a.epochs,
        rls_iterations: a.iterations,
        seed: a.seed,
        max_speakers: a.max_speakers,
        rank_order: match a.rank_order {
            RankOrderArg::Descending => RankOrder::Descending,
            RankOrderArg::Ascending => RankOrder::Ascending,
        },
    };
    let parsed = a
        .inputs
        .iter()
        .map(|p| -> anyhow::Result<BTreeMap<String, Timeline>> {
            Ok(parse_rttm(&read(p)?)?
                .into_iter()
                .map(|t| (t.session().to_owned(), t))
                .collect())
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut ids: Vec<String> = parsed.iter().flat_map(|m| m.keys().cloned()).collect();
    ids.sort();
    ids.dedup();
    for (k, m) in parsed.iter().enumerate() {
        for s in ids.iter().filter(|s| !m.contains_key(*s)) {
            eprintln!("warning: session {s:?} missing from {}", a.inputs[k].display());
        }
    }

    let results = ids
        .par_iter()
        .map(|s| {
            let hyps: Vec<Timeline> = parsed
                .iter()
                .map(|m| m.get(s).cloned().unwrap_or_else(|| Timeline::empty(s.as_str())))
                .collect();
            combine_session(&hyps, &opts)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let timelines: Vec<Timeline> = results.iter().map(|c| c.timeline.clone()).collect();
    emit(a.output.as_deref(), &write_rttm(&timelines))?;
    if let Some(path) = &a.dump_mapping {
        let sessions: serde_json::Map<String, serde_json::Value> = ids
            .iter()
            .zip(&results)
            .map(|(s, c)| {
                (
                    s.clone(),
                    json!({
                        "mapping": c.mapping,
                        "method": c.method,
                        "partition_weight": c.partition_weight,
                        "graph_weight": c.graph_weight,
                        "proven_optimal": c.proven_optimal,
                        "vote": c.vote,
                    }),
                )
            })
            .collect();
        let doc = json!({ "schema": 1, "sessions": sessions });
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    Ok(())
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Square affinity matrix as CSV.
    #[arg(long)]
    affinity: PathBuf,
    /// JSON list of per-window overlap flags.
    #[arg(long)]
    overlap: Option<PathBuf>,
    /// Labels JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the speaker-count estimate and objective trace as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    p_min: usize,
    #[arg(long, default_value_t = 20)]
    p_max: usize,
    /// Fixed number of clusters instead of the estimate.
    #[arg(long)]
    k: Option<usize>,
    /// Upper bound for the estimated number of clusters.
    #[arg(long)]
    max_speakers: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

pub fn cluster(a: ClusterArgs) -> anyhow::Result<()> {
    let csv = read(&a.affinity)?;
    let flags = a.overlap.as_deref().map(read).transpose()?;
    let input = parse_affinity(&csv, flags.as_deref())?;
    let opts = ClusterOptions {
        p_min: a.p_min,
        p_max: a.p_max,
        k: a.k,
        max_speakers: a.max_speakers,
        discretize: DiscretizeOptions {
            tol: a.tol,
            max_iter: a.max_iter,
        },
    };
    let out = run_cluster(&input, &opts)?;
    emit(a.output.as_deref(), &(write_labels(&out.labels) + "\n"))?;
    if let Some(path) = &a.report {
        let doc = json!({
            "schema": 1,
            "k": out.k,
            "nme": out.nme,
            "phi": out.assignment.phi,
            "phi_history": out.assignment.phi_history,
            "iterations": out.assignment.iterations,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    Ok(())
}

#[derive(Args)]
#[command(group(ArgGroup::new("stats").required(true).args(["fit", "aimix"])))]
pub struct SimulateArgs {
    /// Utterance inventory JSONL.
    #[arg(long)]
    utterances: PathBuf,
    /// Fit pause and overlap statistics from this RTTM.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Use fixed artificial-mixture statistics.
    #[arg(long)]
    aimix: bool,
    /// Override the overlap probability.
    #[arg(long)]
    p_overlap: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_speakers: usize,
    /// Per-speaker duration limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    max_dur: f64,
    /// Fixed speakers per session instead of a uniform draw.
    #[arg(long)]
    speakers_per_session: Option<usize>,
    #[arg(long)]
    rttm: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let utts = parse_utterances(&read(&a.utterances)?)?;
    let stats = match &a.fit {
        Some(path) => fit_stats(&parse_rttm(&read(path)?)?),
        None => ConversationStats::aimix(),
    };
    let config = SimConfig {
        max_speakers: a.max_speakers,
        max_dur_per_speaker: quantize_time(a.max_dur)?,
        seed: a.seed,
        p_overlap: a.p_overlap,
        speakers_per_session: a.speakers_per_session,
    };
    let sessions = run_simulation(&utts, &stats, &config)?;
    let timelines = sessions
        .iter()
        .map(|s| s.timeline())
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::write(&a.rttm, write_rttm(&timelines))?;
    std::fs::write(&a.manifest, write_manifest(&sessions))?;
    let (ovl, total) = overlap_transitions(&sessions);
    eprintln!(
        "{} sessions, {} speaker changes, {} overlapping (target p = {:.3})",
        sessions.len(),
        total,
        ovl,
        config.p_overlap.unwrap_or(stats.p_overlap)
    );
    Ok(())
}
