use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PipelineError, Result};
use crate::corpus::RawDocument;

/// Letters that never trigger a stemming rule or a stop-word match.
const LETTERS: &[u8] = b"bcdfghjklmnpqrtvwxz";

const TITLE_TOKENS: usize = 2;
const MIN_DESCRIPTION_TOKENS: usize = 22;
const MAX_DESCRIPTION_TOKENS: usize = 30;

/// The `i`-th pseudo-word of a vocabulary of `vocab_size` words: a fixed-width
/// base-19 numeral over consonants, at least three letters long.
pub fn synthetic_word(i: usize, vocab_size: usize) -> String {
    let base = LETTERS.len();
    let mut width = 3;
    while base.pow(width as u32) < vocab_size {
        width += 1;
    }
    let mut n = i;
    let mut out = vec![LETTERS[0]; width];
    for slot in out.iter_mut().rev() {
        *slot = LETTERS[n % base];
        n /= base;
    }
    String::from_utf8(out).expect("ascii")
}

/// Labeled corpus where class `c` owns keywords `c·kw .. (c+1)·kw` and the
/// remaining words are shared noise. Each token is a keyword of the document's
/// class with probability `1 − noise_ratio`, otherwise a noise word.
pub fn generate_synthetic_corpus(
    num_classes: usize,
    docs_per_class: usize,
    vocab_size: usize,
    keywords_per_class: usize,
    noise_ratio: f64,
    seed: u64,
) -> Result<Vec<RawDocument>> {
    let bad = |m: String| Err(PipelineError::Config(m));
    if num_classes == 0 || docs_per_class == 0 || keywords_per_class == 0 {
        return bad("classes, documents per class and keywords per class must be positive".into());
    }
    let owned = num_classes * keywords_per_class;
    if owned > vocab_size {
        return bad(format!(
            "{num_classes} classes × {keywords_per_class} keywords exceed vocabulary {vocab_size}"
        ));
    }
    if !(0.0..=1.0).contains(&noise_ratio) {
        return bad(format!("noise ratio must lie in [0, 1], got {noise_ratio}"));
    }
    let noise_words = vocab_size - owned;
    if noise_ratio > 0.0 && noise_words == 0 {
        return bad("noise requested but no vocabulary is left for noise words".into());
    }
    if noise_ratio == 1.0 && num_classes > 1 {
        log::warn!("noise ratio 1: classes are indistinguishable");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(num_classes * docs_per_class);
    for c in 0..num_classes {
        let label = format!("class{c:02}");
        for d in 0..docs_per_class {
            let token = |rng: &mut ChaCha8Rng| {
                let w = if rng.gen::<f64>() < noise_ratio {
                    owned + rng.gen_range(0..noise_words)
                } else {
                    c * keywords_per_class + rng.gen_range(0..keywords_per_class)
                };
                synthetic_word(w, vocab_size)
            };
            let title: Vec<String> = (0..TITLE_TOKENS).map(|_| token(&mut rng)).collect();
            let len = rng.gen_range(MIN_DESCRIPTION_TOKENS..=MAX_DESCRIPTION_TOKENS);
            let body: Vec<String> = (0..len).map(|_| token(&mut rng)).collect();
            docs.push(RawDocument {
                id: format!("c{c:02}d{d:04}"),
                title: title.join(" "),
                description: body.join(" "),
                label: Some(label.clone()),
            });
        }
    }
    Ok(docs)
}
