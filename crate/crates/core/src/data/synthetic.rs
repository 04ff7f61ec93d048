//! Synthetic paired corpus with a planted cross-statement signal.
//!
//! Q1 names an activity from one of two groups (outdoor / indoor); Q2
//! cites a piece of evidence from one of the same two groups. A pair is
//! deceptive exactly when the groups disagree. The activity group is
//! drawn independently of the label, so Q1 alone carries no information
//! beyond the class prior.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Source, StatementPair};

pub const OUTDOOR_ACTIVITIES: [&str; 6] = ["hiking", "swimming", "camping", "fishing", "cycling", "climbing"];
pub const INDOOR_ACTIVITIES: [&str; 6] = ["reading", "cooking", "painting", "gaming", "knitting", "baking"];
pub const OUTDOOR_EVIDENCE: [&str; 6] = ["sunburn", "trail", "tent", "lake", "mud", "mosquitoes"];
pub const INDOOR_EVIDENCE: [&str; 6] = ["sofa", "oven", "novel", "console", "yarn", "canvas"];

const WHEN: [&str; 3] = ["yesterday", "on saturday", "last weekend"];
const OPENERS: [&str; 3] = ["ask about the", "remember the", "there was the"];

/// Probability that a generated pair is deceptive.
pub const DECEPTIVE_RATE: f64 = 0.52;

pub fn generate(n: usize, seed: u64) -> Vec<StatementPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let outdoor = rng.gen_bool(0.5);
            let deceptive = rng.gen_bool(DECEPTIVE_RATE);
            let evidence_outdoor = outdoor != deceptive;
            let activity = pick(&mut rng, if outdoor { &OUTDOOR_ACTIVITIES } else { &INDOOR_ACTIVITIES });
            let evidence = pick(&mut rng, if evidence_outdoor { &OUTDOOR_EVIDENCE } else { &INDOOR_EVIDENCE });
            let q1 = format!("i went {activity} {}.", pick(&mut rng, &WHEN));
            let q2 = format!("{} {evidence}.", pick(&mut rng, &OPENERS));
            StatementPair {
                id: format!("syn-{i:04}"),
                q1: capitalize(&q1),
                q2: capitalize(&q2),
                label: u8::from(deceptive),
                source: Source::Paired,
            }
        })
        .collect()
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty word list")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::words;

    fn group_of(ws: &[String], a: &[&str], b: &[&str]) -> Option<bool> {
        ws.iter().find_map(|w| {
            if a.contains(&w.as_str()) {
                Some(true)
            } else if b.contains(&w.as_str()) {
                Some(false)
            } else {
                None
            }
        })
    }

    #[test]
    fn label_is_group_mismatch() {
        for p in generate(300, 3) {
            let q1 = group_of(&words(&p.q1), &OUTDOOR_ACTIVITIES, &INDOOR_ACTIVITIES).unwrap();
            let q2 = group_of(&words(&p.q2), &OUTDOOR_EVIDENCE, &INDOOR_EVIDENCE).unwrap();
            assert_eq!(p.label == 1, q1 != q2, "{p:?}");
        }
    }

    #[test]
    fn deterministic_and_roughly_balanced() {
        let a = generate(2000, 11);
        assert_eq!(a, generate(2000, 11));
        let dec = a.iter().filter(|p| p.label == 1).count() as f64 / 2000.0;
        assert!((dec - DECEPTIVE_RATE).abs() < 0.04, "{dec}");
    }
}
