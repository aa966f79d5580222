//! Seeded synthetic corpora for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Record};
use crate::label::{Label, LabelSet};

/// Vocabulary word `i`: `w0`, `w1`, … (never a stopword).
pub fn vocab_word(i: usize) -> String {
    format!("w{i}")
}

/// Records whose premise and hypothesis are 1–8 words drawn uniformly from a
/// vocabulary of `vocab` words, with uniformly random labels.
pub fn random_corpus(records: usize, vocab: usize, label_set: &LabelSet, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = label_set.len();
    let sentence = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(1..=8);
        (0..len)
            .map(|_| vocab_word(rng.gen_range(0..vocab)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let rows = (0..records)
        .map(|i| {
            let premise = sentence(&mut rng);
            let hypothesis = sentence(&mut rng);
            let label = Label(rng.gen_range(0..c) as u16);
            Record::new(format!("s{i}"), premise, hypothesis, label)
        })
        .collect();
    Dataset::new(rows, "synthetic", label_set.clone())
}

/// A random corpus with one planted token: `token` is prepended to the
/// hypothesis of `per_label[l]` additional records of label `l`.
pub fn planted_corpus(
    token: &str,
    per_label: &[usize],
    background: usize,
    vocab: usize,
    label_set: &LabelSet,
    seed: u64,
) -> Dataset {
    assert_eq!(per_label.len(), label_set.len());
    let mut ds = random_corpus(background, vocab, label_set, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut next = 0;
    for (l, &n) in per_label.iter().enumerate() {
        for _ in 0..n {
            let filler = vocab_word(rng.gen_range(0..vocab));
            ds.records.push(Record::new(
                format!("p{next}"),
                filler,
                format!("{token} {}", vocab_word(rng.gen_range(0..vocab))),
                Label(l as u16),
            ));
            next += 1;
        }
    }
    ds
}
