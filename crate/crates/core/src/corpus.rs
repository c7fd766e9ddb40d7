//! Parallel and multi-parallel corpora: data model, loading and statistics.

use std::fmt;
use std::fs;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Short lowercase language identifier such as `hi` or `en`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        if code.is_empty() {
            return Err(Error::Validation("language code must be non-empty".into()));
        }
        if !code
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        {
            return Err(Error::Validation(format!(
                "language code {code:?} must be ASCII lowercase alphanumeric"
            )));
        }
        Ok(LangCode(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LangCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LangCode::new(s)
    }
}

impl From<LangCode> for String {
    fn from(l: LangCode) -> String {
        l.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for LangCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LangCode::new(s)
    }
}

/// One sentence: trimmed, non-empty, and free of line breaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sentence(String);

impl Sentence {
    /// Trims surrounding whitespace, then rejects empty text or interior line breaks.
    pub fn new(text: impl AsRef<str>) -> Result<Self> {
        let trimmed = text.as_ref().trim();
        if trimmed.is_empty() {
            return Err(Error::Validation("sentence is empty".into()));
        }
        if trimmed.contains(['\n', '\r']) {
            return Err(Error::Validation(format!(
                "sentence contains a line break: {trimmed:?}"
            )));
        }
        Ok(Sentence(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn token_count(&self) -> usize {
        count_tokens(&self.0)
    }
}

impl TryFrom<String> for Sentence {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Sentence::new(s)
    }
}

impl From<Sentence> for String {
    fn from(s: Sentence) -> String {
        s.0
    }
}

impl AsRef<str> for Sentence {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Number of maximal non-whitespace runs.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A bilingual corpus for one source language.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    pub lang: LangCode,
    pub pairs: Vec<(Sentence, Sentence)>,
    /// Declared by the caller: sentences follow the original document order.
    pub order_coherent: bool,
}

impl ParallelCorpus {
    pub fn new(lang: LangCode, pairs: Vec<(Sentence, Sentence)>, order_coherent: bool) -> Self {
        ParallelCorpus {
            lang,
            pairs,
            order_coherent,
        }
    }

    /// Builds a corpus from raw strings, validating every sentence.
    pub fn from_strs<S: AsRef<str>>(
        lang: &str,
        pairs: &[(S, S)],
        order_coherent: bool,
    ) -> Result<Self> {
        let lang = LangCode::new(lang)?;
        let pairs = pairs
            .iter()
            .map(|(s, t)| Ok((Sentence::new(s)?, Sentence::new(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParallelCorpus::new(lang, pairs, order_coherent))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats::from_pairs(self.pairs.iter().map(|(s, t)| (s.as_str(), t.as_str())))
    }

    /// Serializes as `src<TAB>tgt[<TAB>lang]` lines, LF terminated.
    pub fn to_tsv(&self, include_lang: bool) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            out.push_str(s.as_str());
            out.push('\t');
            out.push_str(t.as_str());
            if include_lang {
                out.push('\t');
                out.push_str(self.lang.as_str());
            }
            out.push('\n');
        }
        out
    }
}

/// Where a bilingual corpus is read from.
#[derive(Debug, Clone, Copy)]
pub enum ParallelSource<'a> {
    /// `src<TAB>tgt[<TAB>lang]` rows.
    Tsv(&'a Path),
    /// Two line-aligned plain-text files.
    Paired { src: &'a Path, tgt: &'a Path },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lines of an LF-terminated file; a single trailing newline does not add a line.
fn split_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    text.strip_suffix('\n').unwrap_or(text).split('\n').collect()
}

fn sentence_at(text: &str, path: &Path, line_no: usize) -> Result<Sentence> {
    Sentence::new(text).map_err(|e| match e {
        Error::Validation(msg) => {
            Error::Validation(format!("{}:{}: {}", path.display(), line_no, msg))
        }
        other => other,
    })
}

struct TsvRow {
    src: Sentence,
    tgt: Sentence,
    lang: Option<LangCode>,
}

fn read_tsv_rows(path: &Path) -> Result<Vec<TsvRow>> {
    let text = read_text(path)?;
    split_lines(&text)
        .into_iter()
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            if line.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "{}:{}: empty line",
                    path.display(),
                    line_no
                )));
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::Validation(format!(
                    "{}:{}: expected 2 or 3 tab-separated columns, found {}",
                    path.display(),
                    line_no,
                    cols.len()
                )));
            }
            let lang = match cols.get(2) {
                Some(code) => Some(LangCode::new(code.trim()).map_err(|e| {
                    Error::Validation(format!("{}:{}: {}", path.display(), line_no, e))
                })?),
                None => None,
            };
            Ok(TsvRow {
                src: sentence_at(cols[0], path, line_no)?,
                tgt: sentence_at(cols[1], path, line_no)?,
                lang,
            })
        })
        .collect()
}

/// Loads a bilingual corpus tagged with `lang`.
///
/// TSV rows that carry a third language column must agree with `lang`; use
/// [`load_tsv_grouped`] for TSV files that mix languages.
pub fn load_parallel(
    source: ParallelSource<'_>,
    lang: &LangCode,
    order_coherent: bool,
) -> Result<ParallelCorpus> {
    let pairs = match source {
        ParallelSource::Tsv(path) => {
            let rows = read_tsv_rows(path)?;
            let mut pairs = Vec::with_capacity(rows.len());
            for (i, row) in rows.into_iter().enumerate() {
                if let Some(row_lang) = &row.lang {
                    if row_lang != lang {
                        return Err(Error::Validation(format!(
                            "{}:{}: row language {row_lang} differs from {lang}",
                            path.display(),
                            i + 1
                        )));
                    }
                }
                pairs.push((row.src, row.tgt));
            }
            pairs
        }
        ParallelSource::Paired { src, tgt } => {
            let src_text = read_text(src)?;
            let tgt_text = read_text(tgt)?;
            let src_lines = split_lines(&src_text);
            let tgt_lines = split_lines(&tgt_text);
            if src_lines.len() != tgt_lines.len() {
                return Err(Error::Alignment(format!(
                    "{} has {} lines but {} has {}",
                    src.display(),
                    src_lines.len(),
                    tgt.display(),
                    tgt_lines.len()
                )));
            }
            src_lines
                .iter()
                .zip(&tgt_lines)
                .enumerate()
                .map(|(i, (s, t))| Ok((sentence_at(s, src, i + 1)?, sentence_at(t, tgt, i + 1)?)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ParallelCorpus::new(lang.clone(), pairs, order_coherent))
}

/// Loads a TSV file and splits it into one corpus per language column value.
///
/// Rows without a language column are assigned `default_lang`. Corpora are
/// returned sorted by language code; rows keep their file order within each.
pub fn load_tsv_grouped(
    path: &Path,
    default_lang: &LangCode,
    order_coherent: bool,
) -> Result<Vec<ParallelCorpus>> {
    let rows = read_tsv_rows(path)?;
    let mut groups: std::collections::BTreeMap<LangCode, Vec<(Sentence, Sentence)>> =
        Default::default();
    for row in rows {
        let lang = row.lang.unwrap_or_else(|| default_lang.clone());
        groups.entry(lang).or_default().push((row.src, row.tgt));
    }
    Ok(groups
        .into_iter()
        .map(|(lang, pairs)| ParallelCorpus::new(lang, pairs, order_coherent))
        .collect())
}

/// K line-aligned source-language sentence lists plus their shared targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiParallelCorpus {
    langs: Vec<LangCode>,
    sources: Vec<Vec<Sentence>>,
    targets: Vec<Sentence>,
    target_lang: LangCode,
    order_coherent: bool,
}

impl MultiParallelCorpus {
    /// Validates that there is at least one source, codes are distinct, and
    /// every list has the same length as `targets`.
    pub fn new(
        langs: Vec<LangCode>,
        sources: Vec<Vec<Sentence>>,
        targets: Vec<Sentence>,
        target_lang: LangCode,
        order_coherent: bool,
    ) -> Result<Self> {
        if langs.is_empty() {
            return Err(Error::Config(
                "multi-parallel corpus needs at least one source language".into(),
            ));
        }
        if langs.len() != sources.len() {
            return Err(Error::Config(format!(
                "{} language codes for {} source lists",
                langs.len(),
                sources.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for lang in &langs {
            if !seen.insert(lang) {
                return Err(Error::Config(format!("duplicate source language {lang}")));
            }
        }
        for (lang, sents) in langs.iter().zip(&sources) {
            if sents.len() != targets.len() {
                return Err(Error::Alignment(format!(
                    "source {lang} has {} sentences but target {target_lang} has {}",
                    sents.len(),
                    targets.len()
                )));
            }
        }
        Ok(MultiParallelCorpus {
            langs,
            sources,
            targets,
            target_lang,
            order_coherent,
        })
    }

    /// Convenience constructor from raw strings.
    pub fn from_strs<S: AsRef<str>>(
        sources: &[(&str, Vec<S>)],
        targets: &[S],
        target_lang: &str,
        order_coherent: bool,
    ) -> Result<Self> {
        let mut langs = Vec::new();
        let mut lists = Vec::new();
        for (code, sents) in sources {
            langs.push(LangCode::new(*code)?);
            lists.push(sents.iter().map(Sentence::new).collect::<Result<Vec<_>>>()?);
        }
        let targets = targets.iter().map(Sentence::new).collect::<Result<Vec<_>>>()?;
        MultiParallelCorpus::new(
            langs,
            lists,
            targets,
            LangCode::new(target_lang)?,
            order_coherent,
        )
    }

    pub fn langs(&self) -> &[LangCode] {
        &self.langs
    }

    /// Number of source languages.
    pub fn k(&self) -> usize {
        self.langs.len()
    }

    /// Number of aligned rows.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn source(&self, lang: usize, i: usize) -> &Sentence {
        &self.sources[lang][i]
    }

    pub fn sources(&self, lang: usize) -> &[Sentence] {
        &self.sources[lang]
    }

    pub fn target(&self, i: usize) -> &Sentence {
        &self.targets[i]
    }

    pub fn targets(&self) -> &[Sentence] {
        &self.targets
    }

    pub fn target_lang(&self) -> &LangCode {
        &self.target_lang
    }

    pub fn order_coherent(&self) -> bool {
        self.order_coherent
    }

    pub fn lang_index(&self, lang: &str) -> Option<usize> {
        self.langs.iter().position(|l| l.as_str() == lang)
    }

    /// One bilingual corpus per source language, each paired with the shared targets.
    pub fn to_parallel(&self) -> Vec<ParallelCorpus> {
        self.langs
            .iter()
            .zip(&self.sources)
            .map(|(lang, sents)| {
                ParallelCorpus::new(
                    lang.clone(),
                    sents.iter().cloned().zip(self.targets.iter().cloned()).collect(),
                    self.order_coherent,
                )
            })
            .collect()
    }

    /// Per-language statistics and their sum. Targets are counted once per
    /// source language, treating the corpus as the union of K bilingual sets.
    pub fn stats(&self) -> MultiStats {
        let tgt_tokens: usize = self.targets.iter().map(Sentence::token_count).sum();
        let per_lang: Vec<LangStats> = self
            .langs
            .iter()
            .zip(&self.sources)
            .map(|(lang, sents)| LangStats {
                lang: lang.clone(),
                stats: CorpusStats {
                    segments: sents.len(),
                    src_tokens: sents.iter().map(Sentence::token_count).sum(),
                    tgt_tokens,
                },
            })
            .collect();
        let total = per_lang.iter().map(|l| l.stats).sum();
        MultiStats { per_lang, total }
    }
}

/// Loads `<code>.txt` files from `dir`; `<target_lang>.txt` holds the targets
/// and every other `.txt` file is a source language.
///
/// Source languages are sorted by code.
pub fn load_multiparallel(
    dir: &Path,
    target_lang: &LangCode,
    order_coherent: bool,
) -> Result<MultiParallelCorpus> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(LangCode, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() || path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let lang = LangCode::new(stem).map_err(|_| {
            Error::Config(format!(
                "{}: file name is not a language code",
                path.display()
            ))
        })?;
        files.push((lang, path));
    }
    files.sort();

    let target_path = files
        .iter()
        .find(|(l, _)| l == target_lang)
        .map(|(_, p)| p.clone())
        .ok_or_else(|| {
            Error::Config(format!(
                "{}: missing target file {}.txt",
                dir.display(),
                target_lang
            ))
        })?;
    let read_sentences = |path: &Path| -> Result<Vec<Sentence>> {
        let text = read_text(path)?;
        split_lines(&text)
            .into_iter()
            .enumerate()
            .map(|(i, line)| sentence_at(line, path, i + 1))
            .collect()
    };
    let targets = read_sentences(&target_path)?;

    let mut langs = Vec::new();
    let mut sources = Vec::new();
    for (lang, path) in files.into_iter().filter(|(l, _)| l != target_lang) {
        let sents = read_sentences(&path)?;
        if sents.len() != targets.len() {
            return Err(Error::Alignment(format!(
                "{} has {} lines but {} has {}",
                path.display(),
                sents.len(),
                target_path.display(),
                targets.len()
            )));
        }
        langs.push(lang);
        sources.push(sents);
    }
    if langs.is_empty() {
        return Err(Error::Config(format!(
            "{}: at least one source language file is required besides {}.txt",
            dir.display(),
            target_lang
        )));
    }
    MultiParallelCorpus::new(langs, sources, targets, target_lang.clone(), order_coherent)
}

/// Segment and whitespace-token counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub segments: usize,
    pub src_tokens: usize,
    pub tgt_tokens: usize,
}

impl CorpusStats {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        pairs
            .into_iter()
            .map(|(s, t)| CorpusStats {
                segments: 1,
                src_tokens: count_tokens(s),
                tgt_tokens: count_tokens(t),
            })
            .sum()
    }
}

impl Add for CorpusStats {
    type Output = CorpusStats;
    fn add(self, o: CorpusStats) -> CorpusStats {
        CorpusStats {
            segments: self.segments + o.segments,
            src_tokens: self.src_tokens + o.src_tokens,
            tgt_tokens: self.tgt_tokens + o.tgt_tokens,
        }
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, o: CorpusStats) {
        *self = *self + o;
    }
}

impl Sum for CorpusStats {
    fn sum<I: Iterator<Item = CorpusStats>>(iter: I) -> Self {
        iter.fold(CorpusStats::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LangStats {
    pub lang: LangCode,
    #[serde(flatten)]
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiStats {
    pub per_lang: Vec<LangStats>,
    pub total: CorpusStats,
}

/// Renders `name | segments | src tokens | tgt tokens` rows as an aligned table.
pub fn render_table(rows: &[(String, CorpusStats)]) -> String {
    let header = ["name", "segments", "src_tokens", "tgt_tokens"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|(name, s)| {
            [
                name.clone(),
                s.segments.to_string(),
                s.src_tokens.to_string(),
                s.tgt_tokens.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |row: [&str; 4]| {
        let mut parts = Vec::with_capacity(4);
        parts.push(format!("{:<w$}", row[0], w = widths[0]));
        for (c, w) in row[1..].iter().zip(&widths[1..]) {
            parts.push(format!("{:>w$}", c, w = *w));
        }
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header);
    for row in &cells {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}
