use std::collections::HashSet;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Bundled stopword list: common English function words plus filler terms
/// typical of company registry descriptions.
pub fn default_stopwords() -> Vec<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Tokeniser configuration.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
    /// Tokens with at most this many characters are discarded.
    pub max_short_len: usize,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::new(default_stopwords())
    }
}

impl Preprocessor {
    pub fn new<I, S>(stopwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Preprocessor {
            stopwords: stopwords
                .into_iter()
                .map(|s| s.as_ref().to_lowercase())
                .collect(),
            max_short_len: 3,
        }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphabetic())
            .filter(|t| !t.is_empty())
            .filter_map(|raw| {
                let raw = raw.to_lowercase();
                if self.stopwords.contains(&raw) {
                    return None;
                }
                let lemma = lemmatize(&raw);
                (lemma.chars().count() > self.max_short_len && !self.stopwords.contains(&lemma))
                    .then_some(lemma)
            })
            .collect()
    }
}

/// Preprocess one text with the given stopword list.
pub fn preprocess<S: AsRef<str>>(text: &str, stopwords: &[S]) -> Vec<String> {
    Preprocessor::new(stopwords).tokens(text)
}

// Stems that are complete words once "-ing"/"-ed" is removed.
const FREE_STEM_ENDINGS: [&str; 16] = [
    "ss", "ct", "rt", "nd", "st", "lt", "rm", "rn", "sh", "ch", "ck", "nt", "mp", "lp", "rk", "sk",
];

/// Rule-based lemmatiser for lowercase tokens.
///
/// Plurals are folded ("metals" -> "metal", "batteries" -> "battery").
/// "-ing"/"-ed" are removed only where the bare stem is itself a word:
/// doubled final consonants are undoubled ("scrapped" -> "scrap") and stems
/// with a closed consonant ending are kept ("processing" -> "process").
/// Everything else is left alone, so "recycling" and "trading" survive intact.
pub fn lemmatize(token: &str) -> String {
    let t = fold_plural(token);
    for suffix in ["ing", "ed"] {
        let Some(stem) = t.strip_suffix(suffix) else {
            continue;
        };
        let chars: Vec<char> = stem.chars().collect();
        if chars.len() < 4 {
            break;
        }
        let (a, b) = (chars[chars.len() - 2], chars[chars.len() - 1]);
        if a == b && is_consonant(b) && !matches!(b, 'l' | 's' | 'z') {
            return chars[..chars.len() - 1].iter().collect();
        }
        if FREE_STEM_ENDINGS.iter().any(|e| stem.ends_with(e)) {
            return stem.to_string();
        }
        break;
    }
    t
}

fn fold_plural(t: &str) -> String {
    let n = t.chars().count();
    if n <= 4 {
        return t.to_string();
    }
    if let Some(stem) = t.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if t.ends_with("sses") {
        return t[..t.len() - 2].to_string();
    }
    for es in ["xes", "ches", "shes"] {
        if t.ends_with(es) {
            return t[..t.len() - 2].to_string();
        }
    }
    if t.ends_with('s') && !["ss", "us", "is"].iter().any(|e| t.ends_with(e)) {
        return t[..t.len() - 1].to_string();
    }
    t.to_string()
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}
