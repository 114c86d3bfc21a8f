use std::collections::BTreeMap;

use crate::embeddings::EmbeddingTable;

use super::CrfError;

/// Sparse feature map, keyed and ordered by feature name. Zero values are
/// never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector(BTreeMap<String, f64>);

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        let key = key.into();
        if value == 0.0 {
            self.0.remove(&key);
        } else {
            self.0.insert(key, value);
        }
    }

    pub fn indicator(&mut self, key: impl Into<String>) {
        self.insert(key, 1.0);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FeatureConfig {
    pub use_embeddings: bool,
}

fn has_digit(s: &str) -> bool {
    s.chars()
        .any(|c| c.is_ascii_digit() || ('\u{1040}'..='\u{1049}').contains(&c))
}

/// Handcrafted and optional dense embedding features for position `i`.
pub fn extract_features(
    surfaces: &[&str],
    i: usize,
    config: FeatureConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<FeatureVector, CrfError> {
    let len = surfaces.len();
    if i >= len {
        return Err(CrfError::Shape(format!("position {i} outside sentence of {len}")));
    }
    let word = surfaces[i];
    let mut f = FeatureVector::new();
    f.indicator(format!("w0={word}"));
    if i == 0 {
        f.indicator("BOS");
        f.indicator("first_word");
    } else {
        f.indicator(format!("w-1={}", surfaces[i - 1]));
    }
    if i + 1 == len {
        f.indicator("EOS");
        f.indicator("last_word");
    } else {
        f.indicator(format!("w+1={}", surfaces[i + 1]));
    }
    let chars: Vec<char> = word.chars().collect();
    for n in 1..=3 {
        if chars.len() >= n {
            let prefix: String = chars[..n].iter().collect();
            let suffix: String = chars[chars.len() - n..].iter().collect();
            f.indicator(format!("pre{n}={prefix}"));
            f.indicator(format!("suf{n}={suffix}"));
        }
    }
    if word.contains('-') {
        f.indicator("has_hyphen");
    }
    if has_digit(word) {
        f.indicator("has_digit");
    }
    f.indicator(format!("pos_bucket={}", 10 * i / len));
    if config.use_embeddings {
        let table = embeddings.ok_or(CrfError::MissingEmbeddings)?;
        for (k, v) in table.embed(word).into_iter().enumerate() {
            f.insert(format!("emb{k}"), v);
        }
    }
    Ok(f)
}

pub fn sentence_features(
    surfaces: &[&str],
    config: FeatureConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<FeatureVector>, CrfError> {
    (0..surfaces.len())
        .map(|i| extract_features(surfaces, i, config, embeddings))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingConfig;

    const SAMPLE: [&str; 10] = [
        "မန္တလေး",
        "၌",
        "ရန်ကုန်",
        "တက္ကသိုလ်",
        "လက်အောက်ခံ",
        "ဆေးအတတ်သင်",
        "ကောလိပ်",
        "ရှိ",
        "ခဲ့",
        "သည်",
    ];

    #[test]
    fn first_token_of_sample() {
        let f = extract_features(&SAMPLE, 0, FeatureConfig::default(), None).unwrap();
        for key in ["first_word", "BOS", "pos_bucket=0", "w0=မန္တလေး", "w+1=၌"] {
            assert!(f.contains(key), "{key}");
        }
        let chars: Vec<char> = SAMPLE[0].chars().collect();
        for n in 1..=3 {
            let pre: String = chars[..n].iter().collect();
            let suf: String = chars[chars.len() - n..].iter().collect();
            assert!(f.contains(&format!("pre{n}={pre}")));
            assert!(f.contains(&format!("suf{n}={suf}")));
        }
        assert!(!f.contains("has_hyphen"));
        assert!(!f.contains("has_digit"));
        assert!(!f.contains("last_word"));
        assert!(!f.contains("EOS"));
        let last = extract_features(&SAMPLE, 9, FeatureConfig::default(), None).unwrap();
        assert!(last.contains("pos_bucket=9"));
        assert!(last.contains("w-1=ခဲ့"));
    }

    #[test]
    fn single_token_sentence() {
        let f = extract_features(&["x-1"], 0, FeatureConfig::default(), None).unwrap();
        for key in ["first_word", "last_word", "BOS", "EOS", "has_hyphen", "has_digit"] {
            assert!(f.contains(key), "{key}");
        }
        // "x-1" has three scalar values, so all affix lengths apply
        assert!(f.contains("pre3=x-1"));
        let short = extract_features(&["ab"], 0, FeatureConfig::default(), None).unwrap();
        assert!(short.contains("pre2=ab"));
        assert!(!short.iter().any(|(k, _)| k.starts_with("pre3=") || k.starts_with("suf3=")));
    }

    #[test]
    fn myanmar_digits() {
        let f = extract_features(&["၁၉၉၆"], 0, FeatureConfig::default(), None).unwrap();
        assert!(f.contains("has_digit"));
    }

    #[test]
    fn embedding_features() {
        let cfg = FeatureConfig {
            use_embeddings: true,
        };
        assert!(matches!(
            extract_features(&["a"], 0, cfg, None),
            Err(CrfError::MissingEmbeddings)
        ));
        let emb_cfg = EmbeddingConfig {
            dim: 3,
            ..Default::default()
        };
        let table = EmbeddingTable::load_text_vectors("1 3\na 0.5 0 -1\n".as_bytes(), &emb_cfg).unwrap();
        let f = extract_features(&["a"], 0, cfg, Some(&table)).unwrap();
        assert_eq!(f.get("emb0"), Some(0.5));
        assert_eq!(f.get("emb1"), None);
        assert_eq!(f.get("emb2"), Some(-1.0));
    }
}
