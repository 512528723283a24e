use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{canonical, cluster_index, Label, LabeledPair, Origin, SubstituteCluster};

/// Synthetic pairs made by replacing exactly one member of each observed pair
/// with another product of that member's cluster. Clusters larger than
/// `max_cluster` are not used as swap sources. Synthetic pairs never repeat
/// an observed pair or each other; the first source to propose a pair fixes
/// its label. At most `per_pair_cap` synthetics are sampled per observed pair.
pub fn augment_synthetic(
    observed: &[LabeledPair],
    clusters: &[SubstituteCluster],
    max_cluster: usize,
    per_pair_cap: usize,
    seed: u64,
) -> Vec<LabeledPair> {
    let index = cluster_index(clusters);
    let members: BTreeMap<usize, &[String]> = clusters
        .iter()
        .map(|c| (c.cluster_id, c.members.as_slice()))
        .collect();
    let swaps = |id: &str| -> &[String] {
        match index.get(id) {
            Some(&(cid, size)) if size <= max_cluster => members[&cid],
            _ => &[],
        }
    };

    let observed_keys: BTreeSet<(String, String)> =
        observed.iter().map(|p| (p.a.clone(), p.b.clone())).collect();
    let mut sources: Vec<&LabeledPair> = observed.iter().collect();
    sources.sort();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generated: BTreeMap<(String, String), Label> = BTreeMap::new();
    for src in sources {
        let mut options: BTreeSet<(String, String)> = BTreeSet::new();
        for (keep, swap) in [(&src.b, &src.a), (&src.a, &src.b)] {
            for replacement in swaps(swap) {
                if replacement != swap && replacement != keep {
                    options.insert(canonical(replacement, keep));
                }
            }
        }
        let options: Vec<_> = options
            .into_iter()
            .filter(|k| !observed_keys.contains(k) && !generated.contains_key(k))
            .collect();
        for key in options.choose_multiple(&mut rng, per_pair_cap) {
            generated.insert(key.clone(), src.label);
        }
    }

    generated
        .into_iter()
        .map(|((a, b), label)| LabeledPair {
            a,
            b,
            label,
            origin: Origin::Synthetic,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgen::build_clusters;

    fn pair(a: &str, b: &str, label: Label) -> LabeledPair {
        LabeledPair::new(a, b, label, Origin::Observed).unwrap()
    }

    #[test]
    fn swaps_one_member_within_cluster() {
        let observed = vec![pair("A", "B", Label::Positive)];
        let clusters = vec![SubstituteCluster {
            cluster_id: 0,
            members: vec!["A".into(), "A2".into()],
        }];
        let syn = augment_synthetic(&observed, &clusters, 40, 5, 0);
        assert_eq!(syn, vec![LabeledPair {
            a: "A2".into(),
            b: "B".into(),
            label: Label::Positive,
            origin: Origin::Synthetic
        }]);
    }

    #[test]
    fn oversize_clusters_do_not_swap() {
        let members: Vec<String> = (0..41).map(|i| format!("m{i:02}")).collect();
        let clusters = vec![SubstituteCluster { cluster_id: 0, members }];
        let observed = vec![pair("m00", "x", Label::Negative)];
        assert!(augment_synthetic(&observed, &clusters, 40, 100, 0).is_empty());
        assert_eq!(augment_synthetic(&observed, &clusters, 41, 100, 0).len(), 40);
    }

    #[test]
    fn never_duplicates_observed_or_exceeds_cap() {
        let positives = vec![
            pair("A", "B", Label::Positive),
            pair("B", "C", Label::Positive),
            pair("C", "D", Label::Positive),
        ];
        let clusters = build_clusters(&positives);
        let syn = augment_synthetic(&positives, &clusters, 40, 1, 3);
        assert!(syn.len() <= positives.len());
        let observed: BTreeSet<_> = positives.iter().map(|p| p.key()).collect();
        assert!(syn.iter().all(|p| !observed.contains(&p.key())));
        let unique: BTreeSet<_> = syn.iter().map(|p| p.key()).collect();
        assert_eq!(unique.len(), syn.len());
    }

    #[test]
    fn deterministic_for_seed() {
        let positives: Vec<_> = (0..6)
            .map(|i| pair(&format!("p{i}"), &format!("p{}", i + 1), Label::Positive))
            .collect();
        let clusters = build_clusters(&positives);
        let a = augment_synthetic(&positives, &clusters, 40, 2, 9);
        assert_eq!(a, augment_synthetic(&positives, &clusters, 40, 2, 9));
        assert_eq!(a.len(), 12);
    }
}
