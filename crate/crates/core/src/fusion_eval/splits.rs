use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::SequenceMeta;

/// Train/test partition rule over sequence metadata. Sequences matching
/// neither side are left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitProtocol {
    CrossView {
        train_views: BTreeSet<u32>,
        test_views: BTreeSet<u32>,
    },
    CrossSubject {
        train_subjects: BTreeSet<u32>,
        test_subjects: BTreeSet<u32>,
    },
}

impl SplitProtocol {
    pub fn cross_view(train: impl IntoIterator<Item = u32>, test: impl IntoIterator<Item = u32>) -> Result<Self> {
        let p = SplitProtocol::CrossView {
            train_views: train.into_iter().collect(),
            test_views: test.into_iter().collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn cross_subject(train: impl IntoIterator<Item = u32>, test: impl IntoIterator<Item = u32>) -> Result<Self> {
        let p = SplitProtocol::CrossSubject {
            train_subjects: train.into_iter().collect(),
            test_subjects: test.into_iter().collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (train, test, what) = self.sets();
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid(format!("train and test {what} sets must be non-empty")));
        }
        if let Some(x) = train.intersection(test).next() {
            return Err(Error::invalid(format!("{what} {x} is on both sides of the split")));
        }
        Ok(())
    }

    fn sets(&self) -> (&BTreeSet<u32>, &BTreeSet<u32>, &'static str) {
        match self {
            SplitProtocol::CrossView {
                train_views,
                test_views,
            } => (train_views, test_views, "view"),
            SplitProtocol::CrossSubject {
                train_subjects,
                test_subjects,
            } => (train_subjects, test_subjects, "subject"),
        }
    }

    fn key(&self, m: &SequenceMeta) -> u32 {
        match self {
            SplitProtocol::CrossView { .. } => m.view_id,
            SplitProtocol::CrossSubject { .. } => m.subject_id,
        }
    }

    pub fn side(&self, m: &SequenceMeta) -> Option<Side> {
        let (train, test, _) = self.sets();
        let k = self.key(m);
        if train.contains(&k) {
            Some(Side::Train)
        } else if test.contains(&k) {
            Some(Side::Test)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

/// Partitions sequence ids by the protocol; both lists come back sorted.
pub fn make_splits(corpus: &[(String, SequenceMeta)], protocol: &SplitProtocol) -> Result<(Vec<String>, Vec<String>)> {
    protocol.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, meta) in corpus {
        match protocol.side(meta) {
            Some(Side::Train) => train.push(id.clone()),
            Some(Side::Test) => test.push(id.clone()),
            None => {}
        }
    }
    if train.is_empty() {
        return Err(Error::invalid("split leaves no training sequences"));
    }
    if test.is_empty() {
        return Err(Error::invalid("split leaves no test sequences"));
    }
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Every "train on two views, test on one of the others" protocol.
pub fn leave_views_out(views: &[u32]) -> Vec<SplitProtocol> {
    let mut out = Vec::new();
    for (i, &a) in views.iter().enumerate() {
        for &b in &views[i + 1..] {
            for &t in views.iter().filter(|&&v| v != a && v != b) {
                out.push(SplitProtocol::CrossView {
                    train_views: [a, b].into(),
                    test_views: [t].into(),
                });
            }
        }
    }
    out
}

/// First half of the sorted subject ids trains, the rest test.
pub fn half_subjects(subjects: &[u32]) -> Result<SplitProtocol> {
    let sorted: BTreeSet<u32> = subjects.iter().copied().collect();
    let half = sorted.len() / 2;
    SplitProtocol::cross_subject(sorted.iter().copied().take(half), sorted.iter().copied().skip(half))
}
