use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::json;

use cskit::attnbleed::{self, RowSumCheck};
use cskit::augment::noise::{Side, Vocabulary};
use cskit::augment::{self, AugmentSpec};
use cskit::checks::{self, CheckSpec, Count, CtlDirection};
use cskit::corpus::{self, CorpusStats, LangCode, ParallelCorpus, ParallelSource};
use cskit::scoring::{self, Smoothing};
use cskit::segment::{self, AugmentKind, GeneratedSegment};

use crate::manifest::{self, digest_inputs, manifest_path, with_suffix, OutputDigest, RunManifest, ENV_PREFIX};
use crate::{
    AugmentArg, AugmentArgs, BleedArgs, CheckArg, ChecksArgs, Cli, Command, DirectionArg, InputArgs, ReplayArgs,
    ScoreArgs, ScoreFormat, SmoothArg, StatsArgs, StatsFormat,
};

/// A problem with the invocation or its inputs (exit 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Replayed outputs differ from the manifest (exit 1).
#[derive(Debug, thiserror::Error)]
#[error("replay mismatch: {0}")]
pub struct ReplayMismatch(pub String);

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|c| c.is::<ReplayMismatch>()) {
        return 1;
    }
    let user_facing = err.chain().any(|c| {
        c.is::<cskit::Error>() || c.is::<UsageError>() || c.is::<std::io::Error>() || c.is::<serde_json::Error>()
    });
    if user_facing {
        2
    } else {
        1
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parses and runs one invocation; `args` excludes the program name.
pub fn run(args: Vec<String>) -> Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("cskit".to_string()).chain(args.iter().cloned()))?;
    match cli.command {
        Command::Stats(a) => cmd_stats(&a),
        Command::Checks(a) => cmd_checks(&a, &args),
        Command::Augment(a) => cmd_augment(&a, &args),
        Command::Bleed(a) => cmd_bleed(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn lang(code: &str) -> Result<LangCode> {
    Ok(LangCode::new(code)?)
}

fn load_corpora(input: &InputArgs) -> Result<(Vec<ParallelCorpus>, PathBuf)> {
    let src_lang = lang(&input.lang)?;
    let target_lang = lang(&input.target_lang)?;
    if let Some(tsv) = &input.tsv {
        return Ok((corpus::load_tsv_grouped(tsv, &src_lang, false)?, tsv.clone()));
    }
    if let (Some(src), Some(tgt)) = (&input.src, &input.tgt) {
        let c = corpus::load_parallel(ParallelSource::Paired { src, tgt }, &src_lang, false)?;
        return Ok((vec![c], src.clone()));
    }
    if let Some(dir) = &input.dir {
        let m = corpus::load_multiparallel(dir, &target_lang, false)?;
        return Ok((m.to_parallel(), dir.clone()));
    }
    Err(usage("one of --tsv, --src/--tgt or --dir is required"))
}

fn input_digests(input: &InputArgs) -> Result<Vec<manifest::FileDigest>> {
    let mut out = Vec::new();
    for p in [&input.tsv, &input.src, &input.tgt, &input.dir].into_iter().flatten() {
        out.extend(digest_inputs(p)?);
    }
    Ok(out)
}

fn stats_json(s: &CorpusStats) -> serde_json::Value {
    json!({"segments": s.segments, "src_tokens": s.src_tokens, "tgt_tokens": s.tgt_tokens})
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let rows: Vec<(String, CorpusStats)>;
    let mut value;
    if let Some(path) = &a.jsonl {
        let s = segment::stats(&segment::read_jsonl(path)?);
        rows = vec![("all".into(), s)];
        value = stats_json(&s);
    } else if let Some(dir) = &a.input.dir {
        let m = corpus::load_multiparallel(dir, &lang(&a.input.target_lang)?, false)?;
        let s = m.stats();
        let mut r: Vec<(String, CorpusStats)> =
            s.per_lang.iter().map(|l| (l.lang.to_string(), l.stats)).collect();
        r.push(("all".into(), s.total));
        rows = r;
        value = stats_json(&s.total);
        value["per_lang"] = serde_json::to_value(&s.per_lang)?;
    } else {
        let (corpora, _) = load_corpora(&a.input)?;
        let mut r: Vec<(String, CorpusStats)> =
            corpora.iter().map(|c| (c.lang.to_string(), c.stats())).collect();
        let total: CorpusStats = r.iter().map(|(_, s)| *s).sum();
        value = stats_json(&total);
        if r.len() > 1 {
            value["per_lang"] = serde_json::to_value(
                r.iter()
                    .map(|(l, s)| {
                        let mut v = stats_json(s);
                        v["lang"] = json!(l);
                        v
                    })
                    .collect::<Vec<_>>(),
            )?;
        }
        r.push(("all".into(), total));
        rows = r;
    }
    match a.format {
        StatsFormat::Json => println!("{}", serde_json::to_string(&value)?),
        StatsFormat::Table => print!("{}", corpus::render_table(&rows)),
    }
    Ok(())
}

fn write_outputs(
    prefix: &Path,
    segments: &[GeneratedSegment],
    args: &[String],
    seed: u64,
    inputs: Vec<manifest::FileDigest>,
) -> Result<()> {
    let jsonl = segment::to_jsonl(segments)?;
    let (src, tgt) = segment::to_plain(segments);
    let mut outputs = Vec::new();
    for (role, body) in [("jsonl", jsonl), ("src", src), ("tgt", tgt)] {
        let path = with_suffix(prefix, &format!(".{role}"));
        manifest::write_atomic(&path, body.as_bytes())?;
        outputs.push(OutputDigest {
            role: role.to_string(),
            path,
            sha256: manifest::sha256_bytes(body.as_bytes()),
        });
    }
    RunManifest::new(args.to_vec(), vec![seed], inputs, outputs)?.write(&manifest_path(prefix))?;
    eprintln!("wrote {} segments to {}.{{jsonl,src,tgt}}", segments.len(), prefix.display());
    Ok(())
}

fn cmd_checks(a: &ChecksArgs, args: &[String]) -> Result<()> {
    let corpus = corpus::load_multiparallel(&a.dir, &lang(&a.target_lang)?, !a.shuffled)?;
    let count = match (a.all, a.count) {
        (true, _) => Count::All,
        (false, Some(n)) => Count::Exactly(n),
        (false, None) => Count::Exactly(corpus.k() * corpus.len()),
    };
    let mut spec = CheckSpec::new(count, a.seed).with_join(a.join.clone());
    if let Some(pair) = &a.pair {
        if a.kind != CheckArg::Cxl {
            return Err(usage("--pair only applies to --kind cxl"));
        }
        let (first, second) = pair
            .split_once(',')
            .ok_or_else(|| usage(format!("--pair expects two codes like bn,hi, got {pair:?}")))?;
        spec = spec.with_pair(lang(first.trim())?, lang(second.trim())?);
    }
    let segments = match a.kind {
        CheckArg::Ctl => {
            let dir = match a.ctl_direction {
                DirectionArg::Fwd => CtlDirection::Fwd,
                DirectionArg::Rev => CtlDirection::Rev,
                DirectionArg::Mixed => CtlDirection::Mixed,
            };
            checks::gen_ctl(&corpus, dir, &spec)?
        }
        CheckArg::Csl => checks::gen_csl(&corpus, &spec)?,
        CheckArg::Cxl => checks::gen_cxl(&corpus, &spec)?,
        CheckArg::Rxl => checks::gen_rxl(&corpus, &spec)?,
        CheckArg::Cksl => checks::gen_cksl(&corpus, a.max_join, &spec)?,
    };
    write_outputs(&a.out, &segments, args, a.seed, digest_inputs(&a.dir)?)
}

fn cmd_augment(a: &AugmentArgs, args: &[String]) -> Result<()> {
    let (corpora, _) = load_corpora(&a.input)?;
    let kind = match a.kind {
        AugmentArg::Catsl => AugmentKind::CatSl,
        AugmentArg::Catxl => AugmentKind::CatXl,
        AugmentArg::Catrepeat => AugmentKind::CatRepeat,
        AugmentArg::Denoisetgt => AugmentKind::DenoiseTgt,
        AugmentArg::Noisysrc => AugmentKind::NoisySrc,
    };
    let mut spec = AugmentSpec::new(kind, a.budget, a.seed)
        .with_noise(a.noise_r)
        .with_max_joins(a.max_join);
    spec.join = a.join.clone();
    spec.target_lang = lang(&a.input.target_lang)?;
    let mut inputs = input_digests(&a.input)?;
    if let Some(path) = &a.vocab {
        let side = if kind == AugmentKind::DenoiseTgt { Side::Target } else { Side::Source };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        spec.vocab = Some(Vocabulary::parse(&text, side)?);
        inputs.extend(digest_inputs(path)?);
    }
    let segments = augment::generate(&corpora, &spec)?;
    write_outputs(&a.out, &segments, args, a.seed, inputs)
}

fn scale_value(v: f64) -> f64 {
    attnbleed::scaled(v)
}

fn cmd_bleed(a: &BleedArgs) -> Result<()> {
    let check = if a.strict { RowSumCheck::Strict } else { RowSumCheck::Warn };
    let parsed = attnbleed::parse_attention(&a.attn, check)?;
    const SHOWN: usize = 20;
    for w in parsed.warnings.iter().take(SHOWN) {
        eprintln!("warning: {w}");
    }
    if parsed.warnings.len() > SHOWN {
        eprintln!("warning: {} more rows off by > 1e-3", parsed.warnings.len() - SHOWN);
    }
    let report = attnbleed::mean_bleed(&parsed.records, a.ragged)?;
    let mut value = serde_json::to_value(&report)?;
    if a.scale {
        value["per_record"] = json!(report
            .per_record
            .iter()
            .map(|r| json!({"id": r.id, "mean": scale_value(r.mean)}))
            .collect::<Vec<_>>());
        if let Some(m) = &report.per_layer_head {
            value["per_layer_head"] = json!(m
                .iter()
                .map(|row| row.iter().map(|v| scale_value(*v)).collect::<Vec<_>>())
                .collect::<Vec<_>>());
        }
        eprintln!(
            "bleed = {} (x100, {} records)",
            attnbleed::format_scaled(report.mean),
            report.n_records
        );
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    match &a.out {
        Some(path) => manifest::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let hyps = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    let smoothing = match a.smooth {
        SmoothArg::None => Smoothing::None,
        SmoothArg::AddK => Smoothing::AddK,
    };
    let report = scoring::bleu(&hyps, &refs, smoothing)?;
    match a.format {
        ScoreFormat::Text => println!("{report}"),
        ScoreFormat::Json => println!("{}", serde_json::to_string(&report)?),
    }
    Ok(())
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir()?.join(p) })
}

fn replace_out(args: &[String], out: &Path) -> Result<Vec<String>> {
    let mut new = Vec::with_capacity(args.len());
    let mut replaced = false;
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" {
            iter.next();
            new.push(arg.clone());
            new.push(out.to_string_lossy().into_owned());
            replaced = true;
        } else if arg.starts_with("--out=") {
            new.push(format!("--out={}", out.to_string_lossy()));
            replaced = true;
        } else {
            new.push(arg.clone());
        }
    }
    if !replaced {
        bail!("manifest arguments carry no --out");
    }
    Ok(new)
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    if matches!(recorded.args.first().map(String::as_str), Some("replay") | None) {
        return Err(usage("manifest does not describe a generating command"));
    }
    let new_out = a.out.as_deref().map(absolute).transpose()?;

    std::env::set_current_dir(&recorded.cwd)
        .with_context(|| format!("entering recorded directory {}", recorded.cwd.display()))?;
    for input in &recorded.inputs {
        let now = manifest::sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(usage(format!(
                "input {} changed since the manifest was written",
                input.path.display()
            )));
        }
    }
    let stale: Vec<String> = std::env::vars()
        .map(|(k, _)| k)
        .filter(|k| k.starts_with(ENV_PREFIX))
        .collect();
    for key in stale {
        std::env::remove_var(key);
    }
    for (k, v) in &recorded.env {
        std::env::set_var(k, v);
    }

    let args = match &new_out {
        Some(out) => replace_out(&recorded.args, out)?,
        None => recorded.args.clone(),
    };
    let prefix = out_prefix(&args)?;
    run(args)?;

    let fresh = RunManifest::load(&manifest_path(&prefix))?;
    let mut mismatches = Vec::new();
    for old in &recorded.outputs {
        match fresh.outputs.iter().find(|o| o.role == old.role) {
            Some(new) if new.sha256 == old.sha256 => {
                eprintln!("ok {} {} {}", old.role, new.sha256, new.path.display());
            }
            Some(new) => mismatches.push(format!("{}: {} != {}", old.role, new.sha256, old.sha256)),
            None => mismatches.push(format!("{}: not produced", old.role)),
        }
    }
    if !mismatches.is_empty() {
        return Err(ReplayMismatch(mismatches.join("; ")).into());
    }
    Ok(())
}

fn out_prefix(args: &[String]) -> Result<PathBuf> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" {
            if let Some(v) = iter.next() {
                return Ok(PathBuf::from(v));
            }
        } else if let Some(v) = arg.strip_prefix("--out=") {
            return Ok(PathBuf::from(v));
        }
    }
    bail!("manifest arguments carry no --out")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_replacement() {
        let args: Vec<String> = ["checks", "--kind", "csl", "--out", "a/b", "--seed", "1"]
            .map(String::from)
            .to_vec();
        let new = replace_out(&args, Path::new("/tmp/x")).unwrap();
        assert_eq!(new[4], "/tmp/x");
        assert_eq!(out_prefix(&new).unwrap(), PathBuf::from("/tmp/x"));
        let eq: Vec<String> = ["augment", "--out=p"].map(String::from).to_vec();
        assert_eq!(replace_out(&eq, Path::new("q")).unwrap()[1], "--out=q");
    }

    #[test]
    fn exit_classes() {
        let e: anyhow::Error = cskit::Error::Validation("x".into()).into();
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&usage("bad")), 2);
        assert_eq!(exit_code(&ReplayMismatch("d".into()).into()), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("boom")), 1);
    }
}
