//! Corpus construction: parsing, clip windows, translation sets, ambiguous-set
//! selection, crowd votes and agreement, splits, vocabularies, context
//! corpora and feature files.

mod ambiguous;
mod context;
mod features;
mod record;
mod sets;
mod similarity;
mod splits;
mod vocab;
mod votes;
mod window;

pub use ambiguous::{select_ambiguous_sets, AmbiguitySelectionConfig, AmbiguousTranslationSet};
pub use context::{build_context_corpus, SEPARATOR};
pub use features::{
    decode_features, encode_features, feature_path, quantize, read_features, write_features, ClipStore,
};
pub use record::{corpus_to_string, parse_corpus, parse_corpus_str, write_corpus, ParseMode, ParsedCorpus, SubtitleRecord};
pub(crate) use record::write_text;
pub use sets::{collect_translation_sets, flag_ambiguous_samples, normalize_text, TranslationSet};
pub use similarity::{baseline_similarity, BaselineScorer, MatrixScorer, SimMatrix, Similarity};
pub use splits::{build_splits, Splits};
pub use vocab::{build_vocabulary, Side, Vocabulary};
pub use votes::{
    aggregate_votes, alpha_from_votes, decisions_to_string, group_by_task, krippendorff_alpha, load_decisions,
    load_votes, parse_decisions, parse_votes, votes_to_string, Choice, ClipOwner, Decision, VoteRecord,
};
pub use window::{compute_clip_window, ClipWindow, CLIP_FRAMES, CLIP_MS, FPS};
