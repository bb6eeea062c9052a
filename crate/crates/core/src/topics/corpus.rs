use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::Preprocessor;

/// Token <-> id mapping. Ids follow lexicographic token order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let (tokens, counts): (Vec<String>, Vec<u64>) = counts.into_iter().unzip();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Corpus frequency of each token id.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Documents as token-id sequences over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub documents: Vec<Vec<u32>>,
    /// Caller-supplied label of each kept document.
    pub doc_ids: Vec<String>,
    pub vocabulary: Vocabulary,
    /// Documents that were empty after preprocessing and therefore dropped.
    pub dropped_empty: usize,
}

impl Corpus {
    /// Tokenise `(id, text)` pairs; empty documents are dropped and counted.
    pub fn from_texts<I, S, T>(texts: I, pre: &Preprocessor) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        Corpus::from_token_docs(
            texts
                .into_iter()
                .map(|(id, text)| (id.into(), pre.tokens(text.as_ref()))),
        )
    }

    /// Build from already tokenised documents.
    pub fn from_token_docs<I>(docs: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut kept = Vec::new();
        let mut dropped_empty = 0;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (id, tokens) in docs {
            if tokens.is_empty() {
                dropped_empty += 1;
                continue;
            }
            for t in &tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            kept.push((id, tokens));
        }
        if dropped_empty > 0 {
            log::info!("dropped {dropped_empty} documents empty after preprocessing");
        }
        let vocabulary = Vocabulary::from_counts(counts);
        let (doc_ids, documents) = kept
            .into_iter()
            .map(|(id, tokens)| {
                let ids = tokens
                    .iter()
                    .map(|t| vocabulary.id(t).expect("token was counted"))
                    .collect();
                (id, ids)
            })
            .unzip();
        Corpus {
            documents,
            doc_ids,
            vocabulary,
            dropped_empty,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    /// The documents at `indices`, keeping this corpus's full vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            doc_ids: indices.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            vocabulary: self.vocabulary.clone(),
            dropped_empty: 0,
        }
    }

    /// Re-express the documents in another vocabulary. Returns the mapped
    /// documents (empty ones included) and the number of dropped
    /// out-of-vocabulary tokens.
    pub fn map_onto(&self, target: &Vocabulary) -> (Vec<Vec<u32>>, usize) {
        if *target == self.vocabulary {
            return (self.documents.clone(), 0);
        }
        let mut oov = 0;
        let docs = self
            .documents
            .iter()
            .map(|doc| {
                doc.iter()
                    .filter_map(|&id| {
                        let mapped = target.id(self.vocabulary.token(id));
                        if mapped.is_none() {
                            oov += 1;
                        }
                        mapped
                    })
                    .collect()
            })
            .collect();
        (docs, oov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_lexicographic_and_empty_docs_dropped() {
        let pre = Preprocessor::new(Vec::<String>::new());
        let c = Corpus::from_texts(
            [("a", "steel scrap steel"), ("b", "the"), ("c", "copper")],
            &pre,
        );
        assert_eq!(c.len(), 2);
        assert_eq!(c.dropped_empty, 1);
        assert_eq!(c.vocabulary.tokens(), &["copper", "scrap", "steel"]);
        assert_eq!(c.documents[0], vec![2, 1, 2]);
        assert_eq!(c.vocabulary.counts(), &[1, 1, 2]);
        assert_eq!(c.doc_ids, vec!["a", "c"]);
        assert!(c
            .documents
            .iter()
            .flatten()
            .all(|&id| (id as usize) < c.vocabulary.len()));
    }

    #[test]
    fn mapping_drops_unknown_tokens() {
        let pre = Preprocessor::new(Vec::<String>::new());
        let train = Corpus::from_texts([("a", "steel scrap")], &pre);
        let test = Corpus::from_texts([("b", "steel copper")], &pre);
        let (docs, oov) = test.map_onto(&train.vocabulary);
        assert_eq!(docs, vec![vec![1]]);
        assert_eq!(oov, 1);
    }
}
