//! Inputs shared by the criterion benchmarks.

use biasctx::synthetic::{generate, SyntheticConfig};
use biasctx::Corpus;

/// A synthetic corpus of `events` events with BASIL-like article lengths
/// (20 to 40 sentences) and annotation density.
pub fn corpus(events: usize) -> Corpus {
    generate(
        &SyntheticConfig {
            events,
            min_sentences: 20,
            max_sentences: 40,
            annotated_prob: 0.3,
            ..SyntheticConfig::default()
        },
        0x5eed,
    )
}
