//! Word vectors trained on product descriptions, average-pooled per text field.

use std::collections::BTreeMap;

use super::cbow::{train_cbow, CbowConfig};
use super::{EmbeddingKind, EmbeddingTable};
use crate::catalog::Product;
use crate::error::Result;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Trains word vectors with one description per sentence.
pub fn train_text_embeddings(catalog: &[Product], config: &CbowConfig) -> Result<WordVectors> {
    let sentences: Vec<Vec<String>> = catalog.iter().map(|p| tokenize(&p.description)).collect();
    let trained = train_cbow(&sentences, config)?;
    Ok(WordVectors {
        dim: trained.dim,
        vectors: trained.into_map(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledText {
    pub vector: Vec<f64>,
    /// Set when no token was in vocabulary and `vector` is all zeros.
    pub out_of_vocabulary: bool,
}

pub fn pool_text_field(text: &str, words: &WordVectors) -> PooledText {
    let mut sum = vec![0.0; words.dim];
    let mut hits = 0usize;
    for token in tokenize(text) {
        if let Some(v) = words.get(&token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return PooledText {
            vector: sum,
            out_of_vocabulary: true,
        };
    }
    let inv = hits as f64;
    sum.iter_mut().for_each(|s| *s /= inv);
    PooledText {
        vector: sum,
        out_of_vocabulary: false,
    }
}

/// Pooled name, description and category vectors for every product.
#[derive(Debug, Clone)]
pub struct TextTables {
    pub name: EmbeddingTable,
    pub description: EmbeddingTable,
    pub categories: EmbeddingTable,
    /// (product id, kind) pairs that pooled to the zero vector.
    pub out_of_vocabulary: Vec<(String, EmbeddingKind)>,
}

pub fn product_text_tables(catalog: &[Product], words: &WordVectors) -> Result<TextTables> {
    let mut name = EmbeddingTable::new(EmbeddingKind::NameText, words.dim);
    let mut description = EmbeddingTable::new(EmbeddingKind::DescriptionText, words.dim);
    let mut categories = EmbeddingTable::new(EmbeddingKind::CategoriesText, words.dim);
    let mut oov = Vec::new();
    for p in catalog {
        let fields = [
            (&mut name, p.name.clone()),
            (&mut description, p.description.clone()),
            (&mut categories, p.categories.join(" ")),
        ];
        for (table, text) in fields {
            let pooled = pool_text_field(&text, words);
            if pooled.out_of_vocabulary {
                oov.push((p.id.clone(), table.kind));
            }
            table.insert(p.id.clone(), pooled.vector)?;
        }
    }
    Ok(TextTables {
        name,
        description,
        categories,
        out_of_vocabulary: oov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_product;
    use crate::embeddings::cosine;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn words() -> WordVectors {
        let mut vectors = BTreeMap::new();
        vectors.insert("red".to_string(), vec![1.0, 2.0]);
        vectors.insert("shoe".to_string(), vec![3.0, -4.0]);
        WordVectors { dim: 2, vectors }
    }

    #[test]
    fn pooling_single_token_is_identity() {
        let p = pool_text_field("RED!", &words());
        assert_eq!(p.vector, vec![1.0, 2.0]);
        assert!(!p.out_of_vocabulary);
    }

    #[test]
    fn pooling_two_tokens_is_mean() {
        let p = pool_text_field("red shoe unknown", &words());
        assert_eq!(p.vector, vec![2.0, -1.0]);
    }

    #[test]
    fn pooling_oov_is_flagged_zero() {
        let p = pool_text_field("blue boot", &words());
        assert_eq!(p.vector, vec![0.0, 0.0]);
        assert!(p.out_of_vocabulary);
    }

    fn described(descriptions: &[String]) -> Vec<Product> {
        descriptions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut p = test_product(&format!("p{i}"), 1.0);
                p.description = d.clone();
                p
            })
            .collect()
    }

    #[test]
    fn repeated_sentence_embeds_every_token() {
        let catalog = described(&vec!["soft cotton shirt for summer".to_string(); 5]);
        let w = train_text_embeddings(&catalog, &CbowConfig::text()).unwrap();
        for t in ["soft", "cotton", "shirt", "for", "summer"] {
            assert_eq!(w.get(t).unwrap().len(), 48);
        }
    }

    #[test]
    fn empty_text_corpus_errors() {
        let catalog = described(&["".to_string(), "   ".to_string()]);
        assert!(matches!(
            train_text_embeddings(&catalog, &CbowConfig::text()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn synonyms_are_closer_than_unrelated_words() {
        // "sofa" and "couch" share the living-room context; "lamp" never does.
        let living = ["comfortable", "cushion", "living", "room", "seat", "fabric"];
        let light = ["bright", "bulb", "desk", "glow", "watt", "shade"];
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 40);
            let docs: Vec<String> = (0..400)
                .map(|i| {
                    let (head, ctx) = match i % 3 {
                        0 => ("sofa", &living),
                        1 => ("couch", &living),
                        _ => ("lamp", &light),
                    };
                    let mut words: Vec<&str> = (0..6).map(|_| ctx[rng.random_range(0..6)]).collect();
                    words.insert(rng.random_range(0..words.len()), head);
                    words.join(" ")
                })
                .collect();
            let w = train_text_embeddings(&described(&docs), &CbowConfig::text().with_seed(seed))
                .unwrap();
            let syn = cosine(w.get("sofa").unwrap(), w.get("couch").unwrap()).unwrap();
            let unrelated = cosine(w.get("sofa").unwrap(), w.get("lamp").unwrap()).unwrap();
            assert!(syn > unrelated + 0.2, "seed {seed}: {syn} vs {unrelated}");
        }
    }

    #[test]
    fn product_tables_cover_catalog() {
        let mut p = test_product("a", 1.0);
        p.name = "red shoe".into();
        p.description = "nothing known".into();
        p.categories = vec!["Shoe".into()];
        let t = product_text_tables(&[p], &words()).unwrap();
        assert_eq!(t.name.get("a").unwrap(), &[2.0, -1.0]);
        assert_eq!(t.categories.get("a").unwrap(), &[3.0, -4.0]);
        assert_eq!(t.out_of_vocabulary, vec![("a".to_string(), EmbeddingKind::DescriptionText)]);
    }
}
