use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::dataio::LabeledSequence;
use crate::pose_features::{PoseSequence, SourceId};

/// Anything that belongs to one source stream.
pub trait HasSource {
    fn source(&self) -> &SourceId;
}

impl HasSource for LabeledSequence {
    fn source(&self) -> &SourceId {
        &self.source
    }
}

impl HasSource for PoseSequence {
    fn source(&self) -> &SourceId {
        &self.source
    }
}

impl HasSource for SourceId {
    fn source(&self) -> &SourceId {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Dev,
    Test,
}

fn video_key(video: &str) -> [u8; 8] {
    let digest = Sha256::digest(video.as_bytes());
    digest[..8].try_into().expect("sha256 is 32 bytes")
}

/// 50:25:25 split keyed on the video id, so every signer of a video lands in
/// the same part.
///
/// Videos are ordered by a hash of their id and laid end to end; each video
/// goes to the part containing the midpoint of its sequence range. With at
/// most two signers per video every cut lands within one sequence of its
/// exact position, so the train part is within one sequence of half the
/// corpus and dev/test within two of a quarter. The order of `items` inside each part is preserved.
pub fn split_corpus<T: HasSource>(items: Vec<T>) -> CorpusSplit<T> {
    let mut per_video: BTreeMap<&str, usize> = BTreeMap::new();
    for it in &items {
        *per_video.entry(it.source().video.as_str()).or_default() += 1;
    }
    let mut videos: Vec<(&str, usize)> = per_video.into_iter().collect();
    videos.sort_by_key(|&(v, _)| (video_key(v), v));

    let n = items.len() as f64;
    let mut assignment: BTreeMap<String, SplitPart> = BTreeMap::new();
    let mut offset = 0usize;
    for (video, count) in videos {
        let mid = offset as f64 + count as f64 / 2.0;
        let part = if mid < 0.5 * n {
            SplitPart::Train
        } else if mid < 0.75 * n {
            SplitPart::Dev
        } else {
            SplitPart::Test
        };
        assignment.insert(video.to_string(), part);
        offset += count;
    }

    let mut out = CorpusSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for it in items {
        match assignment[&it.source().video] {
            SplitPart::Train => out.train.push(it),
            SplitPart::Dev => out.dev.push(it),
            SplitPart::Test => out.test.push(it),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(videos: usize, signers: &[&str]) -> Vec<SourceId> {
        (0..videos)
            .flat_map(|v| signers.iter().map(move |s| SourceId::new(format!("video{v:03}"), *s)))
            .collect()
    }

    #[test]
    fn four_videos_split_two_one_one() {
        let s = split_corpus(ids(4, &["a"]));
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (2, 1, 1));
    }

    #[test]
    fn deterministic() {
        let a = split_corpus(ids(37, &["a", "b"]));
        let b = split_corpus(ids(37, &["a", "b"]));
        assert_eq!(a, b);
    }

    #[test]
    fn signers_of_a_video_stay_together() {
        let s = split_corpus(ids(50, &["a", "b"]));
        for part in [&s.train, &s.dev, &s.test] {
            for id in part.iter() {
                let other = SourceId::new(id.video.clone(), if id.signer == "a" { "b" } else { "a" });
                assert!(part.contains(&other), "{id} separated from its partner");
            }
        }
    }

    proptest! {
        #[test]
        fn cuts_within_one_sequence(videos in 1usize..120, two in proptest::collection::vec(any::<bool>(), 120)) {
            let items: Vec<SourceId> = (0..videos)
                .flat_map(|v| {
                    let signers: &[&str] = if two[v] { &["a", "b"] } else { &["a"] };
                    signers.iter().map(move |s| SourceId::new(format!("v{v}"), *s)).collect::<Vec<_>>()
                })
                .collect();
            let n = items.len() as f64;
            let s = split_corpus(items);
            prop_assert!((s.train.len() as f64 - 0.5 * n).abs() <= 1.0);
            prop_assert!(((s.train.len() + s.dev.len()) as f64 - 0.75 * n).abs() <= 1.0);
            prop_assert!((s.dev.len() as f64 - 0.25 * n).abs() <= 2.0);
            prop_assert!((s.test.len() as f64 - 0.25 * n).abs() <= 1.0);
        }
    }
}
