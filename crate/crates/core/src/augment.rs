//! Training-set enlargement by random word deletion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anonymize::PLACEHOLDERS;
use crate::corpus::{DimensionDataset, ViewItem};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Per-word deletion probability.
    pub adr: f64,
    /// Target size multiplier, >= 1.
    pub af: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adr > 0.0 && self.adr < 1.0) {
            return Err(Error::InvalidConfig(format!("adr {} outside (0, 1)", self.adr)));
        }
        if !(self.af >= 1.0 && self.af.is_finite()) {
            return Err(Error::InvalidConfig(format!("af {} must be >= 1", self.af)));
        }
        Ok(())
    }
}

/// Whitespace-delimited words, with placeholder tokens split out so each
/// one is a word of its own.
pub fn words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while !rest.is_empty() {
            let hit = PLACEHOLDERS
                .iter()
                .filter_map(|p| rest.find(p).map(|at| (at, p.len())))
                .min();
            match hit {
                Some((at, len)) => {
                    if at > 0 {
                        out.push(&rest[..at]);
                    }
                    out.push(&rest[at..at + len]);
                    rest = &rest[at + len..];
                }
                None => {
                    out.push(rest);
                    rest = "";
                }
            }
        }
    }
    out
}

/// Drops each token independently with probability `adr`, keeping order.
/// If every token is drawn for deletion, one uniformly chosen token is kept.
pub fn delete_words<T: Clone>(tokens: &[T], adr: f64, rng: &mut impl Rng) -> Result<Vec<T>> {
    if tokens.is_empty() {
        return Err(Error::Empty("token list"));
    }
    if !(adr > 0.0 && adr < 1.0) {
        return Err(Error::InvalidConfig(format!("adr {adr} outside (0, 1)")));
    }
    let kept: Vec<T> = tokens
        .iter()
        .filter(|_| rng.random::<f64>() >= adr)
        .cloned()
        .collect();
    if kept.is_empty() {
        let i = rng.random_range(0..tokens.len());
        return Ok(vec![tokens[i].clone()]);
    }
    Ok(kept)
}

/// Output size for `n` originals: `round(af * n)`, ties up.
pub fn target_size(n: usize, af: f64) -> usize {
    (af * n as f64).round() as usize
}

/// Returns the originals followed by `target_size - n` word-deleted copies of
/// uniformly drawn originals (with replacement). Copy `k` draws from its own
/// stream, `(seed, k)`, and is named `<source_id>#aug<k>`.
pub fn augment_dataset(view: &DimensionDataset, cfg: &AugmentConfig) -> Result<DimensionDataset> {
    if view.is_empty() {
        return Err(Error::Empty("augmentation view"));
    }
    cfg.validate()?;
    let n = view.len();
    let extra = target_size(n, cfg.af) - n;
    let mut items = view.items.clone();
    items.reserve(extra);
    for k in 0..extra {
        let mut rng = seed::rng(seed::indexed(cfg.seed, k as u64));
        let source = &view.items[rng.random_range(0..n)];
        let tokens = words(&source.text);
        let text = if tokens.is_empty() {
            source.text.clone()
        } else {
            delete_words(&tokens, cfg.adr, &mut rng)?.join(" ")
        };
        items.push(ViewItem {
            id: format!("{}#aug{k}", source.id),
            text,
            labels: source.labels.clone(),
        });
    }
    Ok(DimensionDataset {
        dimension: view.dimension,
        classes: view.classes.clone(),
        items,
    })
}

/// Source id of an augmented copy (or the id itself for originals).
pub fn source_id(id: &str) -> &str {
    id.rfind("#aug").map_or(id, |at| &id[..at])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Dimension;
    use crate::seed::rng;

    fn view(n: usize) -> DimensionDataset {
        DimensionDataset {
            dimension: Dimension::Subject,
            classes: vec!["a".into(), "b".into(), "c".into()],
            items: (0..n)
                .map(|i| ViewItem {
                    id: format!("r{i}"),
                    text: format!("uno dos tres cuatro <EMAIL> r{i}"),
                    labels: vec![i % 3],
                })
                .collect(),
        }
    }

    #[test]
    fn placeholder_words() {
        assert_eq!(words("hola,<EMAIL>ya  <ID>"), ["hola,", "<EMAIL>", "ya", "<ID>"]);
        assert!(words("   ").is_empty());
    }

    #[test]
    fn tiny_rate_is_near_identity() {
        let toks: Vec<_> = (0..50).map(|i| i.to_string()).collect();
        assert_eq!(delete_words(&toks, 0.0001, &mut rng(1)).unwrap(), toks);
    }

    #[test]
    fn survivor_guard() {
        let toks = ["a", "b", "c"];
        for s in 0..500 {
            let out = delete_words(&toks, 0.9, &mut rng(s)).unwrap();
            assert!(!out.is_empty());
            // order preserved
            let pos: Vec<_> = out.iter().map(|t| toks.iter().position(|x| x == t).unwrap()).collect();
            assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn errors() {
        assert!(delete_words::<&str>(&[], 0.5, &mut rng(0)).is_err());
        assert!(delete_words(&["a"], 0.0, &mut rng(0)).is_err());
        assert!(delete_words(&["a"], 1.0, &mut rng(0)).is_err());
        let empty = view(0);
        let cfg = AugmentConfig { adr: 0.1, af: 2.0, seed: 0 };
        assert!(augment_dataset(&empty, &cfg).is_err());
        assert!(augment_dataset(&view(3), &AugmentConfig { af: 0.5, ..cfg }).is_err());
    }

    #[test]
    fn identity_factor() {
        let v = view(10);
        let out = augment_dataset(&v, &AugmentConfig { adr: 0.3, af: 1.0, seed: 4 }).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn sizes_and_lineage() {
        let v = view(100);
        let out = augment_dataset(&v, &AugmentConfig { adr: 0.098, af: 4.354, seed: 1 }).unwrap();
        assert_eq!(out.len(), 435);
        let out = augment_dataset(&v, &AugmentConfig { adr: 0.061, af: 8.77, seed: 1 }).unwrap();
        assert_eq!(out.len(), 877);
        assert_eq!(&out.items[..100], &v.items[..]);
        for item in &out.items[100..] {
            let src = v.items.iter().find(|o| o.id == source_id(&item.id)).unwrap();
            assert_eq!(item.labels, src.labels);
            assert!(!item.text.is_empty());
        }
    }

    #[test]
    fn deterministic() {
        let v = view(20);
        let cfg = AugmentConfig { adr: 0.5, af: 3.3, seed: 9 };
        assert_eq!(augment_dataset(&v, &cfg).unwrap(), augment_dataset(&v, &cfg).unwrap());
    }

    #[test]
    fn empirical_rate() {
        // Binomial(1e6, 0.3) has sd ~ 4.6e-4, far inside the 0.02 band.
        let toks: Vec<u32> = (0..100).collect();
        let mut r = rng(42);
        let mut kept = 0usize;
        for _ in 0..10_000 {
            kept += delete_words(&toks, 0.3, &mut r).unwrap().len();
        }
        let rate = 1.0 - kept as f64 / 1_000_000.0;
        assert!((rate - 0.3).abs() <= 0.02, "rate {rate}");
    }
}
