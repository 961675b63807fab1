use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Observation;
use crate::symbols::SceneLabel;
use crate::Error;

/// Laplace smoothing constant of the co-occurrence table.
const ALPHA: f64 = 1.0;

/// Per-label log scores of one observation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneScores(pub BTreeMap<SceneLabel, f64>);

impl SceneScores {
    /// Highest-scoring label; ties go to the lexicographically first label.
    pub fn argmax(&self) -> Option<SceneLabel> {
        let mut best: Option<(SceneLabel, f64)> = None;
        for (&label, &score) in &self.0 {
            match best {
                Some((_, b)) if score <= b => {}
                _ => best = Some((label, score)),
            }
        }
        best.map(|(l, _)| l)
    }

    pub fn get(&self, label: SceneLabel) -> f64 {
        self.0.get(&label).copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Object/scene co-occurrence counts backing the naive-Bayes scene classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceModel {
    /// Classes that are characteristic of some scene; the columns of the table.
    pub classes: Vec<String>,
    /// Classes seen everywhere (people, pets); ignored by the classifier.
    #[serde(default)]
    pub non_characteristic: BTreeSet<String>,
    pub counts: BTreeMap<SceneLabel, BTreeMap<String, f64>>,
    /// Optional scene prior; uniform when absent.
    #[serde(default)]
    pub prior: Option<BTreeMap<SceneLabel, f64>>,
}

impl CooccurrenceModel {
    pub fn validate(&self) -> Result<(), Error> {
        let invalid = |m: String| Err(Error::InvalidSpec(m));
        if self.classes.is_empty() {
            return invalid("co-occurrence table has no characteristic classes".into());
        }
        for c in &self.classes {
            if self.non_characteristic.contains(c) {
                return invalid(format!("class {c} is both characteristic and not"));
            }
        }
        for (label, row) in &self.counts {
            for (class, &n) in row {
                if !self.is_characteristic(class) {
                    return invalid(format!(
                        "count for non-characteristic class {class} in {label}"
                    ));
                }
                if !n.is_finite() || n < 0.0 {
                    return invalid(format!("invalid count {n} for {class} in {label}"));
                }
            }
        }
        if let Some(prior) = &self.prior {
            if prior.values().any(|&p| !p.is_finite() || p <= 0.0) {
                return invalid("scene prior must be strictly positive".into());
            }
        }
        Ok(())
    }

    pub fn is_characteristic(&self, class: &str) -> bool {
        self.classes.iter().any(|c| c == class)
    }

    /// Smoothed P(class | label) over the characteristic classes.
    pub fn probability(&self, class: &str, label: SceneLabel) -> f64 {
        let row = self.counts.get(&label);
        let count = row.and_then(|r| r.get(class)).copied().unwrap_or(0.0);
        let total: f64 = row.map(|r| r.values().sum()).unwrap_or(0.0);
        (count + ALPHA) / (total + ALPHA * self.classes.len() as f64)
    }

    pub fn log_prior(&self, label: SceneLabel) -> f64 {
        match &self.prior {
            None => -(SceneLabel::ALL.len() as f64).ln(),
            Some(p) => {
                let total: f64 = p.values().sum();
                (p.get(&label).copied().unwrap_or(0.0) / total).ln()
            }
        }
    }
}

/// Labels one observation.
///
/// Frames without any characteristic detection carry over the previous
/// frame's label and scores (or default to `hallway` with flat scores), so the
/// stored label is always the argmax of the stored scores.
pub fn scene_classify(
    obs: &Observation,
    model: &CooccurrenceModel,
    previous: Option<&Observation>,
) -> (SceneLabel, SceneScores) {
    let evidence: Vec<&str> = obs
        .sensed
        .iter()
        .map(|d| d.class.as_str())
        .filter(|c| model.is_characteristic(c))
        .collect();

    if evidence.is_empty() {
        return match previous {
            Some(prev) => (prev.scene_label, prev.scene_scores.clone()),
            None => {
                let flat = SceneLabel::ALL.into_iter().map(|l| (l, 0.0)).collect();
                (SceneLabel::Hallway, SceneScores(flat))
            }
        };
    }

    let scores = SceneScores(
        SceneLabel::ALL
            .into_iter()
            .map(|label| {
                let s = model.log_prior(label)
                    + evidence
                        .iter()
                        .map(|c| model.probability(c, label).ln())
                        .sum::<f64>();
                (label, s)
            })
            .collect(),
    );
    let label = scores.argmax().expect("eight labels scored");
    (label, scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Pose, RawDetection};

    fn table() -> CooccurrenceModel {
        let mut counts = BTreeMap::new();
        counts.insert(
            SceneLabel::Kitchen,
            [("cup".to_string(), 8.0), ("chair".to_string(), 2.0)].into(),
        );
        counts.insert(
            SceneLabel::Office,
            [("cup".to_string(), 2.0), ("chair".to_string(), 8.0)].into(),
        );
        CooccurrenceModel {
            classes: vec!["cup".into(), "chair".into()],
            non_characteristic: ["person".to_string()].into(),
            counts,
            prior: None,
        }
    }

    fn obs(t: u32, classes: &[&str]) -> Observation {
        Observation {
            t,
            robot_pose: Pose::default(),
            sensed: classes
                .iter()
                .map(|c| RawDetection {
                    latent: None,
                    relative: Pose::new(1.0, 0.0, 0.0),
                    class: c.to_string(),
                    color: "red".into(),
                    noisy: false,
                })
                .collect(),
            scene_label: SceneLabel::Hallway,
            scene_scores: SceneScores::default(),
        }
    }

    #[test]
    fn two_cups_classify_as_kitchen() {
        // Hand-computed: K = 2 classes, alpha = 1.
        // kitchen: P(cup) = 9/12 ; office: P(cup) = 3/12 ; other labels: 1/2.
        let m = table();
        let (label, scores) = scene_classify(&obs(0, &["cup", "cup"]), &m, None);
        assert_eq!(label, SceneLabel::Kitchen);
        let prior = -(8f64).ln();
        assert!((scores.get(SceneLabel::Kitchen) - (prior + 2.0 * (0.75f64).ln())).abs() < 1e-12);
        assert!((scores.get(SceneLabel::Office) - (prior + 2.0 * (0.25f64).ln())).abs() < 1e-12);
        assert!((scores.get(SceneLabel::Lounge) - (prior + 2.0 * (0.5f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn first_frame_without_evidence_is_hallway() {
        let (label, scores) = scene_classify(&obs(0, &[]), &table(), None);
        assert_eq!(label, SceneLabel::Hallway);
        assert_eq!(scores.argmax(), Some(label));
    }

    #[test]
    fn non_characteristic_detections_are_ignored() {
        let m = table();
        let (label, _) = scene_classify(&obs(0, &["person", "person"]), &m, None);
        assert_eq!(label, SceneLabel::Hallway);

        let mut prev = obs(0, &["chair"]);
        let (l, s) = scene_classify(&prev, &m, None);
        assert_eq!(l, SceneLabel::Office);
        prev.scene_label = l;
        prev.scene_scores = s;
        let (label, scores) = scene_classify(&obs(1, &["person"]), &m, Some(&prev));
        assert_eq!(label, SceneLabel::Office);
        assert_eq!(scores.argmax(), Some(SceneLabel::Office));
    }

    #[test]
    fn rows_are_distributions() {
        let m = table();
        for label in SceneLabel::ALL {
            let total: f64 = m.classes.iter().map(|c| m.probability(c, label)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_flags_bad_tables() {
        let mut m = table();
        m.counts
            .get_mut(&SceneLabel::Kitchen)
            .unwrap()
            .insert("person".into(), 1.0);
        assert!(m.validate().is_err());
        assert!(table().validate().is_ok());
    }
}
