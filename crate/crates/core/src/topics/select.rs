use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_lda, held_out_perplexity, Corpus, LdaOptions};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionOptions {
    pub grid: Vec<usize>,
    pub holdout_fraction: f64,
    pub lda: LdaOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            grid: (1..=8).collect(),
            holdout_fraction: 0.1,
            lda: LdaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicSelection {
    pub selected: usize,
    /// (K, held-out perplexity) in grid order.
    pub curve: Vec<(usize, f64)>,
    /// Indices of held-out documents in the input corpus, ascending.
    pub holdout: Vec<usize>,
}

/// Pick the topic count with the lowest held-out perplexity.
///
/// The holdout is drawn once from `seed`; each K is fitted on its own
/// substream, so the sweep runs in parallel without affecting the result.
/// Ties go to the smaller K.
pub fn select_topic_count(
    corpus: &Corpus,
    options: &SelectionOptions,
    seed: u64,
) -> Result<TopicSelection> {
    if options.grid.is_empty() {
        return Err(Error::Config("topic-count grid is empty".into()));
    }
    if !(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction {} must lie strictly between 0 and 1",
            options.holdout_fraction
        )));
    }
    let d = corpus.len();
    let n_hold = ((d as f64 * options.holdout_fraction).round() as usize).max(1);
    if d < 2 || n_hold >= d {
        return Err(Error::Config(format!(
            "corpus of {d} documents is too small for a {} holdout",
            options.holdout_fraction
        )));
    }
    let mut rng = seed::rng(seed, &[0x4807]);
    let mut holdout = index::sample(&mut rng, d, n_hold).into_vec();
    holdout.sort_unstable();
    let train_idx: Vec<usize> = (0..d)
        .filter(|i| holdout.binary_search(i).is_err())
        .collect();
    let train = corpus.subset(&train_idx);
    let held = corpus.subset(&holdout);

    let curve = options
        .grid
        .par_iter()
        .map(|&k| {
            let model = fit_lda(&train, k, &options.lda, seed::derive(seed, &[k as u64]))?;
            let p = held_out_perplexity(&model, &held, options.lda.fold_in_iterations)?;
            log::debug!("K = {k}: held-out perplexity {:.4}", p.value);
            Ok((k, p.value))
        })
        .collect::<Result<Vec<_>>>()?;

    let selected = curve
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|&(k, _)| k)
        .expect("grid is non-empty");
    Ok(TopicSelection {
        selected,
        curve,
        holdout,
    })
}
