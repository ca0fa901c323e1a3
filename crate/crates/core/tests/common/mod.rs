//! Seeded fixture generators shared by the integration tests.
#![allow(dead_code)]

use argpipe::corpus::{CaseDocument, IrcLabel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `size` distinct lowercase pseudo-words, all starting with `prefix`.
pub fn vocabulary(prefix: &str, size: usize) -> Vec<String> {
    (0..size).map(|i| format!("{prefix}{}", word_suffix(i))).collect()
}

fn word_suffix(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s
}

pub fn sentence(rng: &mut impl Rng, vocab: &[String], min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    let words: Vec<&str> = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
    let mut s = words.join(" ");
    s.push('.');
    let mut c = s.chars();
    let first = c.next().unwrap().to_uppercase().collect::<String>();
    first + c.as_str()
}

/// Ten sentences over one vocabulary followed by ten over a disjoint one.
pub fn two_topic_document(seed: u64) -> CaseDocument {
    let mut r = rng(seed);
    let a = vocabulary("tax", 40);
    let b = vocabulary("zoo", 40);
    let sentences = (0..20).map(|i| {
        let vocab = if i < 10 { &a } else { &b };
        (sentence(&mut r, vocab, 6, 12), None)
    });
    CaseDocument::new(format!("two-topic-{seed}"), sentences, None).unwrap()
}

/// Random document whose sentences carry IRC labels with probability `p_irc`.
pub fn annotated_document(r: &mut impl Rng, id: &str, n: usize, p_irc: f64) -> CaseDocument {
    let vocab = vocabulary("w", 60);
    let sentences = (0..n).map(|_| {
        let irc = if r.gen_bool(p_irc) {
            Some(
                *[IrcLabel::Issue, IrcLabel::Reason, IrcLabel::Conclusion]
                    .choose(r)
                    .unwrap(),
            )
        } else {
            None
        };
        (sentence(r, &vocab, 3, 10), irc)
    });
    CaseDocument::new(id, sentences.collect::<Vec<_>>(), None).unwrap()
}
