//! Firm-description topic modelling: preprocessing, corpus construction,
//! collapsed Gibbs LDA, held-out perplexity and topic-count selection.

mod corpus;
mod lda;
mod preprocess;
mod select;

pub use corpus::{Corpus, Vocabulary};
pub use lda::{fit_lda, held_out_perplexity, top_terms, LdaModel, LdaOptions, Perplexity};
pub use preprocess::{default_stopwords, lemmatize, preprocess, Preprocessor};
pub use select::{select_topic_count, SelectionOptions, TopicSelection};
