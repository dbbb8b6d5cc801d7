//! Aggregation of pairwise human preference judgements.
//!
//! Each story is shown to judges as two orders, `A` and `B`, produced by two
//! systems. The labels file records which system produced which option, so
//! the presentation side may vary from story to story. Votes are tallied per
//! study (an unordered pair of systems) into "system 1 / no preference /
//! system 2" percentages.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Choice {
    A,
    B,
    NoPreference,
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "a" => Ok(Choice::A),
            "b" => Ok(Choice::B),
            "nopreference" | "none" => Ok(Choice::NoPreference),
            other => Err(format!("unknown choice {other:?}; expected A, B or NoPreference")),
        }
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub story_id: String,
    pub judge_id: String,
    pub choice: Choice,
}

/// Which system produced option A and option B of a story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryLabels {
    pub story_id: String,
    pub system_a: String,
    pub system_b: String,
    /// Story length in tokens, if known.
    #[serde(default)]
    pub tokens: Option<usize>,
}

/// Average story length (tokens) of the votes that went each way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTokens {
    pub system_1: Option<f64>,
    pub no_preference: Option<f64>,
    pub system_2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub system_1: String,
    pub system_2: String,
    pub votes: usize,
    pub system_1_pct: f64,
    pub no_preference_pct: f64,
    pub system_2_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tokens: Option<MeanTokens>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalReport {
    pub studies: Vec<StudyResult>,
}

#[derive(Default)]
struct Tally {
    votes: [usize; 3],
    token_sums: [usize; 3],
    all_tokens_known: bool,
}

/// Tallies `annotations` into one result per study, in order of each study's
/// first appearance in `labels`.
pub fn human_eval_aggregate(annotations: &[Annotation], labels: &[StoryLabels]) -> Result<HumanEvalReport> {
    if annotations.is_empty() {
        return Err(Error::Config("no annotations".into()));
    }

    let mut stories: HashMap<&str, &StoryLabels> = HashMap::new();
    let mut studies: Vec<(String, String)> = Vec::new();
    for label in labels {
        if label.system_a == label.system_b {
            return Err(Error::Config(format!(
                "story {:?} compares system {:?} with itself",
                label.story_id, label.system_a
            )));
        }
        if stories.insert(&label.story_id, label).is_some() {
            return Err(Error::Config(format!("story {:?} labelled twice", label.story_id)));
        }
        let known = studies
            .iter()
            .any(|(x, y)| (x, y) == (&label.system_a, &label.system_b) || (x, y) == (&label.system_b, &label.system_a));
        if !known {
            studies.push((label.system_a.clone(), label.system_b.clone()));
        }
    }

    let mut tallies: Vec<Tally> = studies
        .iter()
        .map(|_| Tally {
            all_tokens_known: true,
            ..Tally::default()
        })
        .collect();
    let mut seen = HashSet::new();
    for ann in annotations {
        if !seen.insert((ann.story_id.as_str(), ann.judge_id.as_str())) {
            return Err(Error::DuplicateAnnotation {
                story_id: ann.story_id.clone(),
                judge_id: ann.judge_id.clone(),
            });
        }
        let label = stories
            .get(ann.story_id.as_str())
            .ok_or_else(|| Error::UnknownStory(ann.story_id.clone()))?;
        let study = studies
            .iter()
            .position(|(x, y)| (x, y) == (&label.system_a, &label.system_b) || (x, y) == (&label.system_b, &label.system_a))
            .expect("every labelled pair has a study");
        let flipped = studies[study].0 != label.system_a;
        // slot 0: system 1, slot 1: no preference, slot 2: system 2
        let slot = match (ann.choice, flipped) {
            (Choice::NoPreference, _) => 1,
            (Choice::A, false) | (Choice::B, true) => 0,
            (Choice::A, true) | (Choice::B, false) => 2,
        };
        let tally = &mut tallies[study];
        tally.votes[slot] += 1;
        match label.tokens {
            Some(t) => tally.token_sums[slot] += t,
            None => tally.all_tokens_known = false,
        }
    }

    let studies = studies
        .into_iter()
        .zip(tallies)
        .filter(|(_, t)| t.votes.iter().sum::<usize>() > 0)
        .map(|((system_1, system_2), t)| {
            let votes: usize = t.votes.iter().sum();
            let pct = |k: usize| 100.0 * t.votes[k] as f64 / votes as f64;
            let mean = |k: usize| (t.votes[k] > 0).then(|| t.token_sums[k] as f64 / t.votes[k] as f64);
            StudyResult {
                system_1,
                system_2,
                votes,
                system_1_pct: pct(0),
                no_preference_pct: pct(1),
                system_2_pct: pct(2),
                mean_tokens: t.all_tokens_known.then(|| MeanTokens {
                    system_1: mean(0),
                    no_preference: mean(1),
                    system_2: mean(2),
                }),
            }
        })
        .collect();
    Ok(HumanEvalReport { studies })
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                kind => Error::malformed(path, line, format!("{kind:?}")),
            }
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads an annotations CSV with header `story_id,judge_id,choice`.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    read_csv(path.as_ref())
}

/// Reads a labels CSV with header `story_id,system_a,system_b[,tokens]`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<StoryLabels>> {
    read_csv(path.as_ref())
}

impl HumanEvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, study) in self.studies.iter().enumerate() {
            if k > 0 {
                let _ = writeln!(out);
            }
            let heads = [study.system_1.as_str(), "No Preference", study.system_2.as_str()];
            let widths: Vec<usize> = heads.iter().map(|h| h.len().max(7)).collect();
            let cells = [study.system_1_pct, study.no_preference_pct, study.system_2_pct];
            let header: Vec<String> = heads.iter().zip(&widths).map(|(h, w)| format!("{h:>w$}")).collect();
            let values: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{:>w$}", format!("{v:.2}%")))
                .collect();
            let _ = writeln!(out, "{}", header.join("  "));
            let _ = writeln!(out, "{}", values.join("  "));
            if let Some(m) = &study.mean_tokens {
                let tokens: Vec<String> = [m.system_1, m.no_preference, m.system_2]
                    .iter()
                    .zip(&widths)
                    .map(|(v, w)| {
                        let cell = v.map_or_else(|| "-".to_string(), |t| format!("{t:.1}"));
                        format!("{cell:>w$}")
                    })
                    .collect();
                let _ = writeln!(out, "{}  (mean tokens)", tokens.join("  "));
            }
            let _ = writeln!(out, "({} votes)", study.votes);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(story: &str, a: &str, b: &str) -> StoryLabels {
        StoryLabels {
            story_id: story.into(),
            system_a: a.into(),
            system_b: b.into(),
            tokens: None,
        }
    }

    fn ann(story: &str, judge: &str, choice: Choice) -> Annotation {
        Annotation {
            story_id: story.into(),
            judge_id: judge.into(),
            choice,
        }
    }

    /// One study of 100 stories, one vote each, with the given counts.
    fn study(sys1: &str, sys2: &str, counts: [usize; 3], prefix: &str) -> (Vec<StoryLabels>, Vec<Annotation>) {
        let mut labels = Vec::new();
        let mut anns = Vec::new();
        let mut k = 0;
        for (slot, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let story = format!("{prefix}{k}");
                // alternate presentation side
                let flipped = k % 2 == 1;
                labels.push(if flipped { label(&story, sys2, sys1) } else { label(&story, sys1, sys2) });
                let choice = match (slot, flipped) {
                    (1, _) => Choice::NoPreference,
                    (0, false) | (2, true) => Choice::A,
                    _ => Choice::B,
                };
                anns.push(ann(&story, &format!("j{}", k % 10), choice));
                k += 1;
            }
        }
        (labels, anns)
    }

    #[test]
    fn top_row_split() {
        let (labels, anns) = study("B-TSort", "B-AON", [41, 28, 31], "s");
        let r = human_eval_aggregate(&anns, &labels).unwrap();
        assert_eq!(r.studies.len(), 1);
        let s = &r.studies[0];
        assert_eq!((s.system_1.as_str(), s.system_2.as_str()), ("B-TSort", "B-AON"));
        assert_eq!((s.system_1_pct, s.no_preference_pct, s.system_2_pct), (41.0, 28.0, 31.0));
        assert!(r.to_text().contains("41.00%"));
    }

    #[test]
    fn all_no_preference() {
        let (labels, anns) = study("X", "Y", [0, 10, 0], "s");
        let s = &human_eval_aggregate(&anns, &labels).unwrap().studies[0];
        assert_eq!((s.system_1_pct, s.no_preference_pct, s.system_2_pct), (0.0, 100.0, 0.0));
    }

    #[test]
    fn errors() {
        let labels = vec![label("s1", "X", "Y")];
        assert!(human_eval_aggregate(&[], &labels).is_err());
        let dup = vec![ann("s1", "j1", Choice::A), ann("s1", "j1", Choice::B)];
        assert!(matches!(human_eval_aggregate(&dup, &labels), Err(Error::DuplicateAnnotation { .. })));
        let unknown = vec![ann("s9", "j1", Choice::A)];
        assert!(matches!(human_eval_aggregate(&unknown, &labels), Err(Error::UnknownStory(_))));
    }

    #[test]
    fn mean_tokens_per_outcome() {
        let mut labels = vec![label("s1", "X", "Y"), label("s2", "Y", "X"), label("s3", "X", "Y")];
        labels[0].tokens = Some(80);
        labels[1].tokens = Some(60);
        labels[2].tokens = Some(40);
        let anns = vec![
            ann("s1", "j", Choice::A),
            ann("s2", "j", Choice::B),
            ann("s3", "j", Choice::NoPreference),
        ];
        let s = &human_eval_aggregate(&anns, &labels).unwrap().studies[0];
        let m = s.mean_tokens.as_ref().unwrap();
        assert_eq!(m.system_1, Some(70.0));
        assert_eq!(m.no_preference, Some(40.0));
        assert_eq!(m.system_2, None);
    }

    #[test]
    fn choice_parsing() {
        assert_eq!("a".parse::<Choice>().unwrap(), Choice::A);
        assert_eq!("No Preference".parse::<Choice>().unwrap(), Choice::NoPreference);
        assert_eq!("none".parse::<Choice>().unwrap(), Choice::NoPreference);
        assert!("C".parse::<Choice>().is_err());
    }
}
