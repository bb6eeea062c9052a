//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::seed;

/// Sampler settings. `alpha = None` means the symmetric default 50 / K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaOptions {
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Gibbs sweeps used to fold held-out documents in.
    pub fold_in_iterations: usize,
}

impl Default for LdaOptions {
    fn default() -> Self {
        LdaOptions {
            iterations: 200,
            alpha: None,
            beta: 0.1,
            fold_in_iterations: 50,
        }
    }
}

impl LdaOptions {
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

/// A fitted topic model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdaModel {
    k: usize,
    vocabulary: Vec<String>,
    /// K x V, row-major.
    topic_word: Vec<f64>,
    /// D x K, row-major.
    doc_topic: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Final topic of every training token, per document.
    pub assignments: Vec<Vec<u32>>,
}

impl LdaModel {
    /// Assemble a model from explicit matrices, checking shapes and that
    /// every row is a probability vector.
    pub fn from_parts(
        vocabulary: Vec<String>,
        topic_word: Vec<Vec<f64>>,
        doc_topic: Vec<Vec<f64>>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let k = topic_word.len();
        let v = vocabulary.len();
        if k == 0 || v == 0 {
            return Err(Error::Config(
                "model needs at least one topic and one word".into(),
            ));
        }
        let check = |row: &[f64], len: usize, what: &str| -> Result<()> {
            let sum: f64 = row.iter().sum();
            if row.len() != len || row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "{what} row is not a probability vector"
                )));
            }
            Ok(())
        };
        for row in &topic_word {
            check(row, v, "topic-word")?;
        }
        for row in &doc_topic {
            check(row, k, "document-topic")?;
        }
        Ok(LdaModel {
            k,
            vocabulary,
            topic_word: topic_word.concat(),
            doc_topic: doc_topic.concat(),
            alpha,
            beta,
            seed: 0,
            assignments: Vec::new(),
        })
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn num_docs(&self) -> usize {
        self.doc_topic.len() / self.k
    }

    pub fn topic_word_row(&self, topic: usize) -> &[f64] {
        let v = self.vocabulary.len();
        &self.topic_word[topic * v..(topic + 1) * v]
    }

    pub fn doc_topic_row(&self, doc: usize) -> &[f64] {
        &self.doc_topic[doc * self.k..(doc + 1) * self.k]
    }

    /// Share of training tokens assigned to each topic. Falls back to the
    /// mean document mixture for models built with [`LdaModel::from_parts`].
    pub fn topic_contributions(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.k];
        let mut total = 0.0;
        for &z in self.assignments.iter().flatten() {
            counts[z as usize] += 1.0;
            total += 1.0;
        }
        if total > 0.0 {
            return counts.into_iter().map(|c| c / total).collect();
        }
        let d = self.num_docs().max(1) as f64;
        (0..self.k)
            .map(|t| {
                (0..self.num_docs())
                    .map(|i| self.doc_topic_row(i)[t])
                    .sum::<f64>()
                    / d
            })
            .collect()
    }

    fn word_prob(&self, topic: usize, word: usize) -> f64 {
        self.topic_word[topic * self.vocabulary.len() + word]
    }
}

fn sample_discrete(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Fit a K-topic model to `corpus` by collapsed Gibbs sampling.
///
/// Deterministic in (corpus, k, options, seed).
pub fn fit_lda(corpus: &Corpus, k: usize, options: &LdaOptions, seed: u64) -> Result<LdaModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus has no documents".into()));
    }
    let n_tokens = corpus.token_count();
    if k == 0 || k > n_tokens {
        return Err(Error::Config(format!(
            "topic count {k} must lie in 1..={n_tokens} (corpus token count)"
        )));
    }
    let alpha = options.alpha_for(k);
    let beta = options.beta;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Config("Dirichlet priors must be positive".into()));
    }
    let v = corpus.vocabulary.len();
    let vbeta = v as f64 * beta;
    let mut rng = seed::rng(seed, &[k as u64]);

    let mut doc_counts = vec![0u32; corpus.len() * k];
    let mut word_counts = vec![0u32; k * v];
    let mut topic_counts = vec![0u32; k];
    let mut assignments: Vec<Vec<u32>> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let z = rng.gen_range(0..k);
                    doc_counts[d * k + z] += 1;
                    word_counts[z * v + w as usize] += 1;
                    topic_counts[z] += 1;
                    z as u32
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; k];
    for _ in 0..options.iterations {
        for (d, doc) in corpus.documents.iter().enumerate() {
            let dc = &mut doc_counts[d * k..(d + 1) * k];
            for (z, &w) in assignments[d].iter_mut().zip(doc) {
                let w = w as usize;
                let old = *z as usize;
                dc[old] -= 1;
                word_counts[old * v + w] -= 1;
                topic_counts[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(dc[t]) + alpha) * (f64::from(word_counts[t * v + w]) + beta)
                        / (f64::from(topic_counts[t]) + vbeta);
                    weights[t] = p;
                    total += p;
                }
                let new = sample_discrete(&mut rng, &weights, total);
                dc[new] += 1;
                word_counts[new * v + w] += 1;
                topic_counts[new] += 1;
                *z = new as u32;
            }
        }
    }

    let mut topic_word = vec![0.0; k * v];
    for t in 0..k {
        let denom = f64::from(topic_counts[t]) + vbeta;
        for w in 0..v {
            topic_word[t * v + w] = (f64::from(word_counts[t * v + w]) + beta) / denom;
        }
    }
    let kalpha = k as f64 * alpha;
    let mut doc_topic = vec![0.0; corpus.len() * k];
    for (d, doc) in corpus.documents.iter().enumerate() {
        let denom = doc.len() as f64 + kalpha;
        for t in 0..k {
            doc_topic[d * k + t] = (f64::from(doc_counts[d * k + t]) + alpha) / denom;
        }
    }

    Ok(LdaModel {
        k,
        vocabulary: corpus.vocabulary.tokens().to_vec(),
        topic_word,
        doc_topic,
        alpha,
        beta,
        seed,
        assignments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perplexity {
    pub value: f64,
    pub log_likelihood: f64,
    /// In-vocabulary held-out tokens scored.
    pub tokens: usize,
    pub oov_dropped: usize,
}

/// Perplexity of `held_out` under `model`, with each held-out document's
/// topic mixture estimated by Gibbs fold-in against the frozen topic-word
/// matrix.
///
/// Every in-vocabulary token is scored exactly once, under a mixture folded
/// in on the document's other tokens.
pub fn held_out_perplexity(
    model: &LdaModel,
    held_out: &Corpus,
    fold_in_iterations: usize,
) -> Result<Perplexity> {
    let (docs, oov_dropped) = if held_out.vocabulary.tokens() == model.vocabulary.as_slice() {
        (held_out.documents.clone(), 0)
    } else {
        let index: HashMap<&str, u32> = model
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        let mut oov = 0;
        let docs: Vec<Vec<u32>> = held_out
            .documents
            .iter()
            .map(|doc| {
                doc.iter()
                    .filter_map(|&id| {
                        let mapped = index.get(held_out.vocabulary.token(id)).copied();
                        oov += usize::from(mapped.is_none());
                        mapped
                    })
                    .collect()
            })
            .collect();
        (docs, oov)
    };
    let tokens: usize = docs.iter().map(Vec::len).sum();
    if tokens == 0 {
        return Err(Error::Empty(
            "held-out corpus has no in-vocabulary tokens".into(),
        ));
    }

    let k = model.k;
    let mut log_likelihood = 0.0;
    for (d, doc) in docs.iter().enumerate().filter(|(_, doc)| !doc.is_empty()) {
        // Document completion in two folds: the topic mix is estimated from
        // every other token and scores the remaining ones, then the roles
        // swap. Each token is scored once, never by a mix fitted to itself.
        for half in 0..2 {
            type Indexed<'a> = Vec<(usize, &'a u32)>;
            let (fit, score): (Indexed, Indexed) =
                doc.iter().enumerate().partition(|(i, _)| i % 2 != half);
            let fit: Vec<u32> = fit.into_iter().map(|(_, &w)| w).collect();
            let mut rng = seed::rng(model.seed, &[k as u64, 0xF01D, d as u64, half as u64]);
            let theta = fold_in(model, &fit, fold_in_iterations, &mut rng);
            for (_, &w) in score {
                let p: f64 = (0..k)
                    .map(|t| theta[t] * model.word_prob(t, w as usize))
                    .sum();
                log_likelihood += p.ln();
            }
        }
    }
    Ok(Perplexity {
        value: (-log_likelihood / tokens as f64).exp(),
        log_likelihood,
        tokens,
        oov_dropped,
    })
}

/// Document-topic weights for `doc` with the topic-word matrix frozen,
/// averaged over the second half of the Gibbs sweeps.
fn fold_in(model: &LdaModel, doc: &[u32], iterations: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = model.k;
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = doc
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();
    let mut weights = vec![0.0; k];
    let mut accumulated = vec![0.0; k];
    let burn_in = iterations / 2;
    for sweep in 0..iterations {
        for (zi, &w) in z.iter_mut().zip(doc) {
            counts[*zi] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                let p = (f64::from(counts[t]) + model.alpha) * model.word_prob(t, w as usize);
                weights[t] = p;
                total += p;
            }
            *zi = sample_discrete(rng, &weights, total);
            counts[*zi] += 1;
        }
        if sweep >= burn_in {
            for (a, &c) in accumulated.iter_mut().zip(&counts) {
                *a += f64::from(c);
            }
        }
    }
    let samples = (iterations - burn_in) as f64;
    if samples == 0.0 {
        accumulated = counts.iter().map(|&c| f64::from(c)).collect();
    } else {
        accumulated.iter_mut().for_each(|a| *a /= samples);
    }
    let denom = doc.len() as f64 + k as f64 * model.alpha;
    accumulated
        .iter()
        .map(|&c| (c + model.alpha) / denom)
        .collect()
}

/// The `n` most probable tokens of `topic`, ties broken lexicographically.
pub fn top_terms(model: &LdaModel, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
    if topic >= model.k {
        return Err(Error::Domain(format!(
            "topic {topic} out of range for a {}-topic model",
            model.k
        )));
    }
    let row = model.topic_word_row(topic);
    let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| model.vocabulary[a.0].cmp(&model.vocabulary[b.0]))
    });
    Ok(ranked
        .into_iter()
        .take(n)
        .map(|(w, p)| (model.vocabulary[w].clone(), p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::Preprocessor;

    fn corpus(texts: &[&str]) -> Corpus {
        let pre = Preprocessor::new(Vec::<String>::new());
        Corpus::from_texts(
            texts.iter().enumerate().map(|(i, t)| (i.to_string(), *t)),
            &pre,
        )
    }

    fn uniform(v: usize, k: usize) -> LdaModel {
        let vocab = (0..v).map(|i| format!("word{i:03}")).collect();
        LdaModel::from_parts(vocab, vec![vec![1.0 / v as f64; v]; k], vec![], 0.5, 0.1).unwrap()
    }

    #[test]
    fn single_topic_is_smoothed_unigram() {
        let c = corpus(&["steel scrap steel iron", "scrap copper", "steel"]);
        let opts = LdaOptions::default();
        let m = fit_lda(&c, 1, &opts, 3).unwrap();
        let n = c.token_count() as f64;
        let v = c.vocabulary.len() as f64;
        for (w, &count) in c.vocabulary.counts().iter().enumerate() {
            let expected = (count as f64 + opts.beta) / (n + v * opts.beta);
            assert!((m.topic_word_row(0)[w] - expected).abs() < 1e-15);
        }
        assert!(m.doc_topic.iter().all(|&p| (p - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rows_are_stochastic() {
        let c = corpus(&[
            "steel scrap steel iron",
            "scrap copper",
            "steel alloy metal",
        ]);
        let m = fit_lda(&c, 3, &LdaOptions::default(), 1).unwrap();
        for t in 0..3 {
            assert!((m.topic_word_row(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for d in 0..m.num_docs() {
            assert!((m.doc_topic_row(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_topics_is_a_config_error() {
        let c = corpus(&["steel scrap"]);
        assert!(matches!(
            fit_lda(&c, 3, &LdaOptions::default(), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_lda(&c, 0, &LdaOptions::default(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn uniform_model_perplexity_is_vocabulary_size() {
        let m = uniform(50, 4);
        let held = Corpus::from_token_docs([
            (
                "a".to_string(),
                vec!["word001".to_string(), "word007".into()],
            ),
            ("b".to_string(), vec!["word049".to_string(), "oov".into()]),
        ]);
        let p = held_out_perplexity(&m, &held, 10).unwrap();
        assert!((p.value - 50.0).abs() / 50.0 < 1e-9);
        assert_eq!(p.tokens, 3);
        assert_eq!(p.oov_dropped, 1);
    }

    #[test]
    fn empty_held_out_is_an_error() {
        let m = uniform(5, 1);
        let held = Corpus::from_token_docs(Vec::<(String, Vec<String>)>::new());
        assert!(held_out_perplexity(&m, &held, 5).is_err());
    }

    #[test]
    fn top_terms_tie_break_and_clamp() {
        let m = uniform(5, 1);
        let t = top_terms(&m, 0, 3).unwrap();
        let names: Vec<_> = t.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(names, ["word000", "word001", "word002"]);
        assert_eq!(top_terms(&m, 0, 100).unwrap().len(), 5);
        assert!(top_terms(&m, 1, 1).is_err());
    }

    #[test]
    fn from_parts_rejects_bad_rows() {
        assert!(LdaModel::from_parts(vec!["a".into()], vec![vec![0.5]], vec![], 1.0, 1.0).is_err());
    }
}
