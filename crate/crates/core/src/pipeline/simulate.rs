//! Synthetic shops with known substitute clusters.
//!
//! Clusters are grouped into product types; clusters of one type are
//! siblings that share a property schema and look alike in image space.
//! Browse sessions are popularity-weighted walks inside a cluster that drift
//! to a sibling cluster with probability `noise`; purchase sessions combine
//! products of different types.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::catalog::{Event, Product, SearchLogEntry, Session, SessionKind};
use crate::embeddings::{EmbeddingKind, EmbeddingTable};
use crate::error::{Error, Result};
use crate::io::{write_json, write_jsonl};
use crate::pairgen::SubstituteCluster;

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const SEARCH_LOGS_FILE: &str = "search_logs.jsonl";
pub const IMAGES_FILE: &str = "images.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShopSpec {
    pub clusters: usize,
    pub products_per_cluster: usize,
    pub clusters_per_type: usize,
    pub browse_sessions: usize,
    pub purchase_sessions: usize,
    pub min_session_length: usize,
    pub max_session_length: usize,
    /// Probability that a browse step drifts to a sibling cluster.
    pub noise: f64,
    /// Probability that a further item in a purchase session comes from a
    /// sibling cluster of the same product type.
    pub sibling_purchase: f64,
    /// Zipf exponent of within-cluster product popularity.
    pub popularity_exponent: f64,
    /// Share of products whose image vector is mostly unrelated noise.
    pub bad_image_fraction: f64,
    /// Share of products with no image vector at all.
    pub missing_image_fraction: f64,
    pub image_dim: usize,
    pub search_queries: usize,
    pub seed: u64,
}

impl Default for ShopSpec {
    fn default() -> Self {
        Self {
            clusters: 20,
            products_per_cluster: 10,
            clusters_per_type: 4,
            browse_sessions: 5000,
            purchase_sessions: 500,
            min_session_length: 4,
            max_session_length: 10,
            noise: 0.2,
            sibling_purchase: 0.5,
            popularity_exponent: 0.8,
            bad_image_fraction: 0.35,
            missing_image_fraction: 0.0,
            image_dim: crate::embeddings::IMAGE_DIM,
            search_queries: 2000,
            seed: 0,
        }
    }
}

impl ShopSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("shop spec: {msg}")));
        if self.clusters < 2 || self.products_per_cluster < 2 {
            return bad(format!(
                "need at least 2 clusters of at least 2 products, got {} x {}",
                self.clusters, self.products_per_cluster
            ));
        }
        if self.clusters_per_type == 0 || self.image_dim == 0 {
            return bad("clusters_per_type and image_dim must be positive".into());
        }
        if self.min_session_length < 2 || self.max_session_length < self.min_session_length {
            return bad(format!(
                "session lengths must satisfy 2 <= min <= max, got {}..{}",
                self.min_session_length, self.max_session_length
            ));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("sibling_purchase", self.sibling_purchase),
            ("bad_image_fraction", self.bad_image_fraction),
            ("missing_image_fraction", self.missing_image_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.popularity_exponent >= 0.0) {
            return bad("popularity_exponent must be nonnegative".into());
        }
        Ok(())
    }

    pub fn num_types(&self) -> usize {
        self.clusters.div_ceil(self.clusters_per_type)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    pub cluster_id: usize,
    pub log_mean: f64,
    pub log_sd: f64,
}

/// Ground truth for a generated shop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopManifest {
    pub spec: ShopSpec,
    pub clusters: Vec<SubstituteCluster>,
    /// Product type of each cluster, indexed by cluster id.
    pub cluster_types: Vec<String>,
    /// Fraction of search queries mentioning each property.
    pub planted_query_frequency: BTreeMap<String, f64>,
    /// Fraction of product descriptions mentioning each property.
    pub planted_pdp_frequency: BTreeMap<String, f64>,
    pub price_params: Vec<PriceParams>,
    pub bad_images: Vec<String>,
    pub missing_images: Vec<String>,
}

impl ShopManifest {
    pub fn cluster_of(&self) -> BTreeMap<&str, usize> {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |m| (m.as_str(), c.cluster_id)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.clusters {
            for m in &c.members {
                if !seen.insert(m.as_str()) {
                    return Err(Error::InvalidArgument(format!("manifest: product {m} in two clusters")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Shop {
    pub catalog: Vec<Product>,
    pub sessions: Vec<Session>,
    pub search_logs: Vec<SearchLogEntry>,
    /// Keyed by image reference, as stored in `images.jsonl`.
    pub images: EmbeddingTable,
    pub manifest: ShopManifest,
}

impl Shop {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(CATALOG_FILE), &self.catalog)?;
        write_jsonl(&dir.join(SESSIONS_FILE), &self.sessions)?;
        write_jsonl(&dir.join(SEARCH_LOGS_FILE), &self.search_logs)?;
        self.images.save(&dir.join(IMAGES_FILE))?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }
}

const TYPE_NOUNS: [&str; 12] = [
    "sofa", "sneaker", "jacket", "kettle", "backpack", "desk", "watch", "headphone", "blender", "tent", "bicycle",
    "camera",
];
const CLUSTER_WORDS: [&str; 40] = [
    "velvet", "trail", "puffer", "gooseneck", "rolltop", "standing", "diver", "overear", "immersion", "dome",
    "gravel", "instant", "sectional", "court", "parka", "whistling", "sling", "corner", "chrono", "earbud",
    "countertop", "tunnel", "folding", "mirrorless", "loveseat", "runner", "bomber", "electric", "duffel",
    "writing", "pilot", "studio", "personal", "pop", "cargo", "action", "recliner", "hiking", "rain", "travel",
];
const BRANDS: [&str; 8] = ["acme", "norda", "vexo", "lumen", "kestrel", "orbis", "tandem", "halden"];
const FILLER: [&str; 16] = [
    "everyday", "durable", "comfortable", "reliable", "practical", "great", "choice", "for", "home", "people",
    "who", "want", "quality", "built", "to", "last",
];
const PROPERTIES: [(&str, &[&str]); 10] = [
    ("color", &["crimson", "navy", "olive", "ivory", "charcoal"]),
    ("material", &["cotton", "leather", "wool", "bamboo", "steel"]),
    ("size", &["petite", "regular", "oversized"]),
    ("finish", &["matte", "glossy", "satin"]),
    ("pattern", &["striped", "checked", "dotted", "solid"]),
    ("style", &["modern", "classic", "rustic", "minimalist"]),
    ("origin", &["italy", "japan", "portugal", "mexico"]),
    ("warranty", &["oneyear", "twoyear", "lifetime"]),
    ("fit", &["slim", "relaxed", "tailored"]),
    ("power", &["cordless", "corded", "solar"]),
];
const SCHEMA_SIZE: usize = 6;

fn type_noun(t: usize) -> String {
    TYPE_NOUNS.get(t).map(|s| s.to_string()).unwrap_or_else(|| format!("gadget{t}"))
}

fn cluster_word(c: usize) -> String {
    CLUSTER_WORDS.get(c).map(|s| s.to_string()).unwrap_or_else(|| format!("series{c}"))
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn mix(parts: &[(f64, &[f64])]) -> Vec<f64> {
    let dim = parts[0].1.len();
    (0..dim).map(|i| parts.iter().map(|(w, v)| w * v[i]).sum()).collect()
}

/// Evenly spaced planted frequencies in a seeded random order over properties.
fn planted_levels(rng: &mut ChaCha8Rng, lo: f64, step: f64) -> BTreeMap<String, f64> {
    let mut order: Vec<usize> = (0..PROPERTIES.len()).collect();
    order.shuffle(rng);
    order
        .into_iter()
        .enumerate()
        .map(|(rank, p)| (PROPERTIES[p].0.to_string(), lo + step * rank as f64))
        .collect()
}

pub fn simulate_shop(spec: &ShopSpec) -> Result<Shop> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_types = spec.num_types();
    let type_of = |c: usize| c / spec.clusters_per_type;

    // Each type uses a rotating window of the property pool.
    let schemas: Vec<Vec<usize>> = (0..n_types)
        .map(|t| (0..SCHEMA_SIZE).map(|k| (t * 3 + k) % PROPERTIES.len()).collect())
        .collect();

    let type_dirs: Vec<Vec<f64>> = (0..n_types).map(|_| random_unit(&mut rng, spec.image_dim)).collect();
    let cluster_dirs: Vec<Vec<f64>> = (0..spec.clusters).map(|_| random_unit(&mut rng, spec.image_dim)).collect();
    let type_price: Vec<f64> = (0..n_types).map(|_| rng.random_range(3.0..6.0)).collect();

    let mut catalog = Vec::new();
    let mut clusters = Vec::new();
    let mut price_params = Vec::new();
    let mut images = EmbeddingTable::new(EmbeddingKind::Image, spec.image_dim);
    let mut bad_images = Vec::new();
    let mut missing_images = Vec::new();
    for c in 0..spec.clusters {
        let t = type_of(c);
        let log_mean = type_price[t] + rng.random_range(-0.5..0.5);
        let log_sd = 0.35;
        price_params.push(PriceParams {
            cluster_id: c,
            log_mean,
            log_sd,
        });
        let prices = LogNormal::new(log_mean, log_sd).expect("valid log-normal");
        let dominant: Vec<usize> = schemas[t].iter().map(|&p| rng.random_range(0..PROPERTIES[p].1.len())).collect();
        let mut members = Vec::new();
        for i in 0..spec.products_per_cluster {
            let id = format!("c{c:02}p{i:02}");
            let brand = *BRANDS.choose(&mut rng).expect("non-empty");
            let properties = schemas[t]
                .iter()
                .zip(&dominant)
                .map(|(&p, &d)| {
                    let (name, values) = PROPERTIES[p];
                    let v = if rng.random_bool(0.5) { d } else { rng.random_range(0..values.len()) };
                    (name.to_string(), values[v].to_string())
                })
                .collect();
            let price = (prices.sample(&mut rng) * 100.0).round() / 100.0;
            let image_ref = format!("img/{id}.jpg");
            let noise = random_unit(&mut rng, spec.image_dim);
            let vector = if rng.random_bool(spec.bad_image_fraction) {
                bad_images.push(id.clone());
                mix(&[(0.25, &type_dirs[t]), (1.0, &noise)])
            } else {
                mix(&[(0.4f64.sqrt(), &type_dirs[t]), (0.5f64.sqrt(), &cluster_dirs[c]), (0.1f64.sqrt(), &noise)])
            };
            if rng.random_bool(spec.missing_image_fraction) {
                missing_images.push(id.clone());
            } else {
                images.insert(image_ref.clone(), vector)?;
            }
            catalog.push(Product {
                name: format!("{brand} {} {} m{c:02}{i:02}", cluster_word(c), type_noun(t)),
                description: String::new(),
                categories: vec![type_noun(t), format!("{} {}", cluster_word(c), type_noun(t))],
                price: price.max(0.01),
                properties,
                image_ref: Some(image_ref),
                id: id.clone(),
            });
            members.push(id);
        }
        clusters.push(SubstituteCluster { cluster_id: c, members });
    }

    // Descriptions: exact planted mention counts per property.
    let planted_pdp = planted_levels(&mut rng, 0.04, 0.04);
    let mut mentions: Vec<Vec<String>> = vec![Vec::new(); catalog.len()];
    let mut realized_pdp = BTreeMap::new();
    for (name, freq) in &planted_pdp {
        let mut holders: Vec<usize> = (0..catalog.len()).filter(|&i| catalog[i].properties.contains_key(name)).collect();
        let want = ((freq * catalog.len() as f64).round() as usize).min(holders.len());
        holders.shuffle(&mut rng);
        for &i in &holders[..want] {
            let value = &catalog[i].properties[name];
            let sentence = if rng.random_bool(0.5) {
                format!("{name} {value}")
            } else {
                format!("in {value}")
            };
            mentions[i].push(sentence);
        }
        realized_pdp.insert(name.clone(), want as f64 / catalog.len() as f64);
    }
    for (i, p) in catalog.iter_mut().enumerate() {
        let c = i / spec.products_per_cluster;
        let (cw, tn) = (cluster_word(c), type_noun(type_of(c)));
        let mut words: Vec<String> = vec![format!("the {} {cw} {tn}", p.name.split(' ').next().unwrap_or(""))];
        for _ in 0..3 {
            let filler: Vec<&str> = FILLER.choose_multiple(&mut rng, 4).copied().collect();
            words.push(format!("{} {cw} {tn}", filler.join(" ")));
        }
        words.append(&mut mentions[i]);
        p.description = words.join(". ");
    }

    // Browse sessions.
    let zipf = Zipf::new(spec.products_per_cluster as f64, spec.popularity_exponent.max(1e-9))
        .map_err(|e| Error::InvalidArgument(format!("popularity: {e}")))?;
    let popularity: Vec<Vec<usize>> = (0..spec.clusters)
        .map(|_| {
            let mut order: Vec<usize> = (0..spec.products_per_cluster).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();
    let siblings: Vec<Vec<usize>> = (0..spec.clusters)
        .map(|c| {
            let same: Vec<usize> = (0..spec.clusters).filter(|&d| d != c && type_of(d) == type_of(c)).collect();
            if same.is_empty() {
                (0..spec.clusters).filter(|&d| d != c).collect()
            } else {
                same
            }
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng, c: usize| -> usize {
        let rank = (zipf.sample(rng) as usize).clamp(1, spec.products_per_cluster) - 1;
        c * spec.products_per_cluster + popularity[c][rank]
    };
    let mut sessions = Vec::with_capacity(spec.browse_sessions + spec.purchase_sessions);
    let mut ts: i64 = 1_600_000_000;
    for s in 0..spec.browse_sessions {
        let len = rng.random_range(spec.min_session_length..=spec.max_session_length);
        let mut cluster = rng.random_range(0..spec.clusters);
        let mut current = draw(&mut rng, cluster);
        let mut events = vec![Event {
            product_id: catalog[current].id.clone(),
            ts,
        }];
        while events.len() < len {
            if rng.random_bool(spec.noise) {
                cluster = *siblings[cluster].choose(&mut rng).expect("at least two clusters");
            }
            let next = draw(&mut rng, cluster);
            if next == current {
                continue;
            }
            current = next;
            ts += rng.random_range(5..120);
            events.push(Event {
                product_id: catalog[current].id.clone(),
                ts,
            });
        }
        ts += 600;
        sessions.push(Session {
            session_id: format!("b{s:06}"),
            kind: SessionKind::Browse,
            events,
        });
    }

    // Purchase sessions: items from distinct clusters, partly siblings of
    // the first cluster and otherwise anywhere in the shop.
    for s in 0..spec.purchase_sessions {
        let size = rng.random_range(2..=3usize).min(spec.clusters);
        let first = rng.random_range(0..spec.clusters);
        let mut used = vec![first];
        while used.len() < size {
            let pool: Vec<usize> = if rng.random_bool(spec.sibling_purchase) {
                siblings[first].iter().copied().filter(|c| !used.contains(c)).collect()
            } else {
                Vec::new()
            };
            let c = match pool.choose(&mut rng) {
                Some(&c) => c,
                None => loop {
                    let c = rng.random_range(0..spec.clusters);
                    if !used.contains(&c) {
                        break c;
                    }
                },
            };
            used.push(c);
        }
        let picked: Vec<usize> = used.iter().map(|&c| draw(&mut rng, c)).collect();
        let events = picked
            .into_iter()
            .map(|i| {
                ts += rng.random_range(5..120);
                Event {
                    product_id: catalog[i].id.clone(),
                    ts,
                }
            })
            .collect();
        ts += 600;
        sessions.push(Session {
            session_id: format!("u{s:06}"),
            kind: SessionKind::Purchase,
            events,
        });
    }

    // Search logs: exact planted mention counts per property.
    let planted_query = planted_levels(&mut rng, 0.05, 0.05);
    let mut query_mentions: Vec<Vec<String>> = vec![Vec::new(); spec.search_queries];
    for (name, freq) in &planted_query {
        let values = PROPERTIES.iter().find(|(n, _)| n == name).expect("pool property").1;
        let want = (freq * spec.search_queries as f64).round() as usize;
        let mut idx: Vec<usize> = (0..spec.search_queries).collect();
        idx.shuffle(&mut rng);
        for &q in &idx[..want.min(spec.search_queries)] {
            let word = if rng.random_bool(0.5) {
                name.clone()
            } else {
                values.choose(&mut rng).expect("non-empty").to_string()
            };
            query_mentions[q].push(word);
        }
    }
    let search_logs = query_mentions
        .into_iter()
        .map(|mut words| {
            let c = rng.random_range(0..spec.clusters);
            words.shuffle(&mut rng);
            let mut q = vec![type_noun(type_of(c))];
            if rng.random_bool(0.5) {
                q.insert(0, cluster_word(c));
            }
            q.extend(words);
            ts += rng.random_range(1..30);
            SearchLogEntry { query: q.join(" "), ts }
        })
        .collect();

    Ok(Shop {
        catalog,
        sessions,
        search_logs,
        images,
        manifest: ShopManifest {
            spec: spec.clone(),
            cluster_types: (0..spec.clusters).map(|c| type_noun(type_of(c))).collect(),
            clusters,
            planted_query_frequency: planted_query,
            planted_pdp_frequency: realized_pdp,
            price_params,
            bad_images,
            missing_images,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::validate_catalog;
    use crate::pairgen::{mine_coview, DEFAULT_COVIEW_MIN};
    use crate::tablebuild::{pdp_frequency, property_vocabulary, query_frequency};

    fn small() -> ShopSpec {
        ShopSpec {
            browse_sessions: 1500,
            purchase_sessions: 100,
            search_queries: 400,
            image_dim: 32,
            ..Default::default()
        }
    }

    #[test]
    fn cardinality_and_partition() {
        let shop = simulate_shop(&small()).unwrap();
        assert_eq!(shop.catalog.len(), 200);
        validate_catalog(&shop.catalog).unwrap();
        shop.manifest.validate().unwrap();
        let members: BTreeSet<&str> = shop.manifest.clusters.iter().flat_map(|c| c.members.iter().map(String::as_str)).collect();
        let ids: BTreeSet<&str> = shop.catalog.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(members, ids);
        assert_eq!(shop.images.len(), 200);
        assert_eq!(shop.sessions.len(), 1600);
    }

    #[test]
    fn zero_noise_coviews_stay_in_cluster() {
        let shop = simulate_shop(&ShopSpec { noise: 0.0, ..small() }).unwrap();
        let cluster = shop.manifest.cluster_of();
        let pairs = mine_coview(&shop.sessions, DEFAULT_COVIEW_MIN, 1);
        assert!(!pairs.is_empty());
        assert!(pairs.iter().all(|p| cluster[p.a.as_str()] == cluster[p.b.as_str()]));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = ShopSpec { clusters: 4, products_per_cluster: 3, browse_sessions: 50, ..small() };
        simulate_shop(&spec).unwrap().write(a.path()).unwrap();
        simulate_shop(&spec).unwrap().write(b.path()).unwrap();
        for f in [CATALOG_FILE, SESSIONS_FILE, SEARCH_LOGS_FILE, IMAGES_FILE, MANIFEST_FILE] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    fn ranking(m: &BTreeMap<String, f64>) -> Vec<String> {
        let mut v: Vec<(&String, &f64)> = m.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
        v.into_iter().map(|(k, _)| k.clone()).collect()
    }

    #[test]
    fn planted_frequencies_recovered() {
        let shop = simulate_shop(&small()).unwrap();
        let vocab = property_vocabulary(&shop.catalog);
        let q = query_frequency(&shop.search_logs, &vocab);
        assert_eq!(ranking(&q), ranking(&shop.manifest.planted_query_frequency));
        let d = pdp_frequency(&shop.catalog, &vocab);
        assert_eq!(ranking(&d), ranking(&shop.manifest.planted_pdp_frequency));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(simulate_shop(&ShopSpec { clusters: 1, ..small() }).is_err());
        assert!(simulate_shop(&ShopSpec { products_per_cluster: 1, ..small() }).is_err());
        assert!(simulate_shop(&ShopSpec { noise: 1.5, ..small() }).is_err());
    }
}
