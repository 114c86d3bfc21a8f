use super::{Corpus, CorpusError, NerLabel, PosTag, Sentence, Token};

fn is_blank(line: &str) -> bool {
    line.chars().all(|c| c == ' ' || c == '\t')
}

/// Splits a data line on a single tab, or on runs of spaces when the line
/// has no tab.
fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split(' ').filter(|f| !f.is_empty()).collect()
    }
}

/// Yields `(line_number, sentence_lines)` blocks separated by blank lines.
fn blocks(text: &str) -> Vec<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if is_blank(line) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.push((i + 1, line));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Parses a three-column CoNLL corpus. In strict mode every sentence must
/// also be BIOES well-formed.
pub fn parse_conll(text: &str, strict: bool) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    for block in blocks(text) {
        let mut tokens = Vec::with_capacity(block.len());
        for (line, content) in block {
            let f = fields(content);
            if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
                return Err(CorpusError::Fields {
                    line,
                    found: f.iter().filter(|s| !s.is_empty()).count(),
                });
            }
            let pos = f[1].parse::<PosTag>().map_err(|e| CorpusError::UnknownPos {
                line,
                value: e.0,
            })?;
            let ner = f[2].parse::<NerLabel>().map_err(|e| CorpusError::UnknownNer {
                line,
                value: e.0,
            })?;
            tokens.push(Token::new(f[0], pos, ner)?);
        }
        sentences.push(Sentence::new(tokens)?);
    }
    let corpus = Corpus::new("", sentences);
    if strict {
        corpus.validate()?;
    }
    Ok(corpus)
}

/// Reads only the surface column of a CoNLL-like file, for tagging raw
/// text. Lines may carry one to three fields.
pub fn parse_surfaces(text: &str) -> Result<Vec<Vec<String>>, CorpusError> {
    blocks(text)
        .into_iter()
        .map(|block| {
            block
                .into_iter()
                .map(|(line, content)| {
                    let f = fields(content);
                    if f.is_empty() || f.len() > 3 || f[0].is_empty() {
                        Err(CorpusError::Fields {
                            line,
                            found: f.len(),
                        })
                    } else {
                        Ok(f[0].to_string())
                    }
                })
                .collect()
        })
        .collect()
}

/// Writes a corpus as tab-separated lines with a blank line after every
/// sentence.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in sentence.tokens() {
            out.push_str(t.surface());
            out.push('\t');
            out.push_str(t.pos.as_str());
            out.push('\t');
            out.push_str(&t.ner.to_string());
            out.push('\n');
        }
    }
    out
}
