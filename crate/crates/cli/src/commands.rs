use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use tetot_core::{
    compute_tetot, compute_tetot_approx, correlate_grouped, gaussian_stats, generate_synthetic_fixture,
    load_classifier_head, load_embedding_set, load_gaussian_stats, prediction_entropy, rank_candidates,
    save_classifier_head, save_embedding_set, save_gaussian_stats, transferability_ground_truth, Candidate,
    Direction, GaussianStats, GroupedCorrelation, MetricName, MetricReport, Result, TetotConfig,
    TetotError,
};

use crate::args::{ApproxArgs, BatchArgs, Command, FixtureArgs, Metric};
use crate::manifest::{load_manifest, ManifestEntry};

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<TetotConfig>,
    pub reports: Vec<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<GroupedCorrelation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    pub timestamp: u64,
    pub version: &'static str,
}

impl RunRecord {
    fn new(command: &str, config: Option<TetotConfig>, reports: Vec<MetricReport>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config,
            reports,
            ranking: None,
            correlation: None,
            files: Vec::new(),
            timestamp,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn run(command: Command) -> Result<RunRecord> {
    match command {
        Command::Compute { pair, metric } => {
            let config = metric.config();
            let src = load_embedding_set(&pair.source)?;
            let tgt = load_embedding_set(&pair.target)?;
            let head = load_classifier_head(&pair.head)?;
            let report = compute_tetot(&src, &tgt, &head, &config)?;
            Ok(RunRecord::new("compute", Some(config), vec![report]))
        }
        Command::Approx(args) => approx(args),
        Command::Entropy(args) => {
            let tgt = load_embedding_set(&args.target)?;
            let head = load_classifier_head(&args.head)?;
            Ok(RunRecord::new("entropy", None, vec![prediction_entropy(&head, &tgt)?]))
        }
        Command::Accuracy(args) => {
            let tgt = load_embedding_set(&args.target)?;
            let head = load_classifier_head(&args.head)?;
            Ok(RunRecord::new("accuracy", None, vec![transferability_ground_truth(&head, &tgt)?]))
        }
        Command::Stats { source, stats_out } => {
            let stats = gaussian_stats(&load_embedding_set(&source)?)?;
            save_gaussian_stats(&stats, &stats_out)?;
            let mut record = RunRecord::new("stats", None, Vec::new());
            record.files.push(stats_out.display().to_string());
            Ok(record)
        }
        Command::Rank(args) => {
            let (config, candidates) = score_manifest(&args, false)?;
            let ranking = rank_candidates(&candidates, direction(args.metric));
            let mut record = RunRecord::new("rank", Some(config), reports_of(candidates));
            record.ranking = Some(ranking);
            Ok(record)
        }
        Command::Correlate(args) => {
            let entries = load_manifest(&args.manifest)?;
            let (config, candidates) = score_manifest(&args, true)?;
            let mut groups: Vec<(String, Vec<Candidate>)> = Vec::new();
            for (entry, cand) in entries.iter().zip(&candidates) {
                let key = entry.target.display().to_string();
                match groups.iter_mut().find(|(g, _)| *g == key) {
                    Some((_, batch)) => batch.push(cand.clone()),
                    None => groups.push((key, vec![cand.clone()])),
                }
            }
            let correlation = correlate_grouped(&groups, metric_label(args.metric))?;
            let mut record = RunRecord::new("correlate", Some(config), reports_of(candidates));
            record.correlation = Some(correlation);
            Ok(record)
        }
        Command::GenFixtures(args) => gen_fixtures(args),
    }
}

fn approx(args: ApproxArgs) -> Result<RunRecord> {
    let config = TetotConfig {
        num_target: args.num_target,
        seed: args.seed,
        cov_jitter: args.cov_jitter,
        ..Default::default()
    };
    let stats = match (&args.source_emb, &args.source_stats) {
        (_, Some(path)) => load_gaussian_stats(path)?,
        (Some(path), None) => gaussian_stats(&load_embedding_set(path)?)?,
        (None, None) => return Err(TetotError::Input("approx needs --source-emb or --source-stats".into())),
    };
    let tgt = load_embedding_set(&args.target)?;
    let report = compute_tetot_approx(&stats, &tgt, &config)?;
    Ok(RunRecord::new("approx", Some(config), vec![report]))
}

fn direction(metric: Metric) -> Direction {
    match metric {
        Metric::Tetot | Metric::Approx | Metric::Entropy => Direction::LowerIsBetter,
    }
}

fn metric_label(metric: Metric) -> &'static str {
    match metric {
        Metric::Tetot => MetricName::Tetot.as_str(),
        Metric::Approx => MetricName::TetotApprox.as_str(),
        Metric::Entropy => MetricName::Entropy.as_str(),
    }
}

fn reports_of(candidates: Vec<Candidate>) -> Vec<MetricReport> {
    candidates.into_iter().map(|c| c.metric).collect()
}

fn source_stats(path: &Path) -> Result<GaussianStats> {
    if path.extension().is_some_and(|e| e == "sta") {
        load_gaussian_stats(path)
    } else {
        gaussian_stats(&load_embedding_set(path)?)
    }
}

fn score_entry(entry: &ManifestEntry, metric: Metric, config: &TetotConfig, need_accuracy: bool) -> Result<Candidate> {
    let tgt = load_embedding_set(&entry.target)?;
    let head = load_classifier_head(&entry.head)?;
    let report = match metric {
        Metric::Tetot => compute_tetot(&load_embedding_set(&entry.source)?, &tgt, &head, config)?,
        Metric::Approx => compute_tetot_approx(&source_stats(&entry.source)?, &tgt, config)?,
        Metric::Entropy => prediction_entropy(&head, &tgt)?,
    };
    let accuracy = match entry.accuracy {
        Some(a) => Some(a),
        None if need_accuracy => Some(transferability_ground_truth(&head, &tgt)?.value),
        None => None,
    };
    Ok(Candidate {
        candidate_id: entry.candidate_id.clone(),
        metric: report.with("candidate_id", &entry.candidate_id),
        accuracy,
    })
}

fn score_manifest(args: &BatchArgs, need_accuracy: bool) -> Result<(TetotConfig, Vec<Candidate>)> {
    let config = args.metric_args.config();
    config.validate()?;
    let entries = load_manifest(&args.manifest)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !seen.insert(e.candidate_id.as_str())) {
        return Err(TetotError::Input(format!("duplicate candidate id '{}'", dup.candidate_id)));
    }
    let candidates = entries
        .par_iter()
        .map(|e| score_entry(e, args.metric, &config, need_accuracy))
        .collect::<Result<Vec<_>>>()?;
    Ok((config, candidates))
}

fn gen_fixtures(args: FixtureArgs) -> Result<RunRecord> {
    let fixture = generate_synthetic_fixture(args.dim, args.classes, &args.shifts, args.n_per_domain, args.seed)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut files = Vec::new();
    let mut write_set = |set: &tetot_core::EmbeddingSet, name: String| -> Result<String> {
        save_embedding_set(set, args.out_dir.join(&name))?;
        files.push(name.clone());
        Ok(name)
    };
    let source = write_set(&fixture.source, "source.emb".into())?;
    let mut manifest = Vec::new();
    let mut reports = Vec::new();
    for ((target, &acc), &shift) in fixture.targets.iter().zip(&fixture.true_accuracies).zip(&fixture.shift_levels) {
        let name = write_set(target, format!("{}.emb", target.domain_id()))?;
        manifest.push(ManifestEntry {
            candidate_id: target.domain_id().to_string(),
            source: source.clone().into(),
            target: name.into(),
            head: "head.hed".into(),
            accuracy: Some(acc),
        });
        reports.push(
            MetricReport::new(MetricName::Accuracy, acc)
                .with("target", target.domain_id())
                .with("shift", shift),
        );
    }
    save_classifier_head(&fixture.head, args.out_dir.join("head.hed"))?;
    files.push("head.hed".into());
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(args.out_dir.join("manifest.json"), json + "\n")?;
    files.push("manifest.json".into());

    let mut record = RunRecord::new("gen-fixtures", None, reports);
    record.files = files;
    Ok(record)
}

/// One line per report (and the ranking, if any) for stderr.
pub fn summary(record: &RunRecord) -> String {
    let mut out = String::new();
    for r in &record.reports {
        let who: BTreeMap<&str, &str> = ["candidate_id", "target", "domain"]
            .iter()
            .filter_map(|k| r.meta.get(*k).map(|v| (*k, v.as_str())))
            .collect();
        let label = who.values().next().map(|v| format!(" [{v}]")).unwrap_or_default();
        out.push_str(&format!("{}{label}: {:.6}\n", r.metric_name, r.value));
    }
    if let Some(ranking) = &record.ranking {
        out.push_str(&format!("ranking: {}\n", ranking.join(" > ")));
    }
    if let Some(c) = &record.correlation {
        for (g, r) in &c.per_group {
            out.push_str(&format!("rho [{g}]: {:+.4} over {} candidates\n", r.rho, r.n_points));
        }
        if let Some(m) = c.mean_rho {
            out.push_str(&format!("mean rho: {m:+.4}\n"));
        }
        out.push_str(&format!("pooled rho: {:+.4} over {} points\n", c.pooled.rho, c.pooled.n_points));
    }
    for f in &record.files {
        out.push_str(&format!("wrote {f}\n"));
    }
    out
}
