use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatabaseKind, DatabaseManifest};
use crate::error::{Error, Result};

/// Content-disjoint partition of a database's references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_refs: BTreeSet<String>,
    pub val_refs: BTreeSet<String>,
    pub test_refs: BTreeSet<String>,
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

impl SplitSpec {
    /// Everything in training; used for toy sets too small to partition.
    pub fn train_only(refs: impl IntoIterator<Item = String>, seed: u64) -> Self {
        SplitSpec {
            seed,
            train_refs: refs.into_iter().collect(),
            val_refs: BTreeSet::new(),
            test_refs: BTreeSet::new(),
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train_refs.len(), self.val_refs.len(), self.test_refs.len())
    }

    pub fn is_disjoint(&self) -> bool {
        self.train_refs.is_disjoint(&self.val_refs)
            && self.train_refs.is_disjoint(&self.test_refs)
            && self.val_refs.is_disjoint(&self.test_refs)
    }

    /// Plain-text form: a header comment, then one reference id per line
    /// under `[train]`, `[val]` and `[test]`, each section sorted.
    pub fn to_text(&self, kind: DatabaseKind) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# database={} seed={}", kind.name(), self.seed);
        for (name, set) in [
            ("train", &self.train_refs),
            ("val", &self.val_refs),
            ("test", &self.test_refs),
        ] {
            let _ = writeln!(out, "[{name}]");
            for id in set {
                let _ = writeln!(out, "{id}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut sets: [BTreeSet<String>; 3] = Default::default();
        let mut current: Option<usize> = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    if let Some(v) = kv.strip_prefix("seed=") {
                        seed = v.parse().ok();
                    }
                }
                continue;
            }
            current = match line {
                "[train]" => Some(0),
                "[val]" => Some(1),
                "[test]" => Some(2),
                id => {
                    let idx = current.ok_or_else(|| {
                        Error::Config(format!("split file: `{id}` appears before any section"))
                    })?;
                    sets[idx].insert(id.to_string());
                    Some(idx)
                }
            };
        }
        let [train_refs, val_refs, test_refs] = sets;
        let spec = SplitSpec {
            seed: seed.ok_or_else(|| Error::Config("split file has no `seed=` header".into()))?,
            train_refs,
            val_refs,
            test_refs,
        };
        if !spec.is_disjoint() {
            return Err(Error::Config("split file sections overlap".into()));
        }
        Ok(spec)
    }

    pub fn save(&self, path: &Path, kind: DatabaseKind) -> Result<()> {
        std::fs::write(path, self.to_text(kind)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Reference counts for a split of `n` references: validation and test take
/// `round(ratio * n)` each (at least one), training takes the remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !r.is_finite() || *r < 0.0) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios ({tr}, {va}, {te}) must be non-negative and sum to 1"
        )));
    }
    if n < 5 {
        return Err(Error::Size(format!("need at least 5 references to split, got {n}")));
    }
    let part = |r: f64| -> usize {
        if r == 0.0 {
            0
        } else {
            ((r * n as f64).round() as usize).max(1)
        }
    };
    let (n_val, n_test) = (part(va), part(te));
    if n_val + n_test >= n {
        return Err(Error::Config(format!(
            "split ratios leave no training references out of {n}"
        )));
    }
    Ok((n - n_val - n_test, n_val, n_test))
}

pub fn split_by_reference(
    manifest: &DatabaseManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitSpec> {
    let refs: Vec<String> = manifest.reference_ids().into_iter().collect();
    split_ids(refs, ratios, seed)
}

pub(crate) fn split_ids(mut refs: Vec<String>, ratios: (f64, f64, f64), seed: u64) -> Result<SplitSpec> {
    refs.sort();
    let (n_train, n_val, _) = split_sizes(refs.len(), ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    refs.shuffle(&mut rng);
    let test_refs = refs.split_off(n_train + n_val).into_iter().collect();
    let val_refs = refs.split_off(n_train).into_iter().collect();
    Ok(SplitSpec {
        seed,
        train_refs: refs.into_iter().collect(),
        val_refs,
        test_refs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("I{i:02}")).collect()
    }

    #[test]
    fn sizes_match_worked_examples() {
        let s = split_ids(ids(24), DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(s.counts(), (14, 5, 5));
        let s = split_ids(ids(5), DEFAULT_RATIOS, 3).unwrap();
        assert_eq!(s.counts(), (3, 1, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = split_ids(ids(24), DEFAULT_RATIOS, 7).unwrap();
        let b = split_ids(ids(24), DEFAULT_RATIOS, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(DatabaseKind::Tid2013), b.to_text(DatabaseKind::Tid2013));
        let c = split_ids(ids(24), DEFAULT_RATIOS, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_ratios_and_tiny_sets() {
        assert!(matches!(
            split_ids(ids(24), (0.5, 0.2, 0.2), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(split_ids(ids(4), DEFAULT_RATIOS, 0), Err(Error::Size(_))));
    }

    #[test]
    fn text_round_trip() {
        let s = split_ids(ids(29), DEFAULT_RATIOS, 4).unwrap();
        let text = s.to_text(DatabaseKind::Live);
        assert_eq!(SplitSpec::from_text(&text).unwrap(), s);
    }

    #[test]
    fn disjoint_and_covering_for_first_hundred_seeds() {
        for seed in 0..100 {
            let s = split_ids(ids(24), DEFAULT_RATIOS, seed).unwrap();
            assert!(s.is_disjoint(), "seed {seed}");
            let all: BTreeSet<_> = s
                .train_refs
                .iter()
                .chain(&s.val_refs)
                .chain(&s.test_refs)
                .cloned()
                .collect();
            assert_eq!(all.len(), 24);
        }
    }

    proptest! {
        #[test]
        fn any_size_partitions(n in 5usize..120, seed in any::<u64>()) {
            let s = split_ids(ids(n), DEFAULT_RATIOS, seed).unwrap();
            let (a, b, c) = s.counts();
            prop_assert_eq!(a + b + c, n);
            prop_assert!(s.is_disjoint());
            prop_assert!(a >= b && b >= 1 && c >= 1);
        }
    }
}
