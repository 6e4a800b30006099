//! Stage 3 — scenario and style conditioning: sample a concrete situational
//! scene and linguistic style profile per persona, with optional
//! domain-restriction constraints (e.g. SNS-only corpora).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::{
    sample_categorical, CategoricalDistribution, ConditionalDistributionTable,
};
use crate::error::{Error, Result};
use crate::persona::Persona;
use crate::rng::Prng;

/// The four single-valued scenario elements, in sampling order. The fifth
/// element, style, is a list sampled per configured style dimension.
pub const SCENE_ELEMENTS: [&str; 4] = ["location", "activity", "interlocutor", "medium"];

/// A sampled situational/stylistic conditioning pair (s, v).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioContext {
    pub location: String,
    pub activity: String,
    pub interlocutor: String,
    pub medium: String,
    /// Style descriptors, one per configured style dimension
    /// (tone, register, slang, modality in the default configuration).
    pub style: Vec<String>,
}

/// A scenario element's distribution: flat, or conditioned on a persona
/// attribute (e.g. activity keyed on occupation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistOrTable {
    Conditional(ConditionalDistributionTable),
    Flat(CategoricalDistribution),
}

impl DistOrTable {
    /// The concrete distribution to sample for this persona.
    pub fn select<'a>(&'a self, persona: &Persona) -> Result<&'a CategoricalDistribution> {
        match self {
            DistOrTable::Flat(dist) => Ok(dist),
            DistOrTable::Conditional(table) => {
                let attributes = persona.attribute_map();
                let condition_value = attributes
                    .get(&table.condition_key)
                    .ok_or_else(|| Error::UnknownAttribute(table.condition_key.clone()))?;
                Ok(table.row_for(condition_value))
            }
        }
    }

    /// All category labels this element can produce, across rows and default.
    pub fn all_labels(&self) -> Vec<&str> {
        match self {
            DistOrTable::Flat(dist) => dist.labels().collect(),
            DistOrTable::Conditional(table) => {
                let mut labels: Vec<&str> = table.default.labels().collect();
                for (_, dist) in &table.rows {
                    labels.extend(dist.labels());
                }
                labels.sort_unstable();
                labels.dedup();
                labels
            }
        }
    }

    /// Structural problems for configuration validation.
    pub fn problems(&self) -> Vec<String> {
        match self {
            DistOrTable::Flat(dist) => dist.problems(),
            DistOrTable::Conditional(table) => {
                let mut problems = table.problems();
                if !crate::persona::ALL_ATTRIBUTES.contains(&table.condition_key.as_str()) {
                    problems.push(format!(
                        "scenario table `{}` conditions on `{}`, which is not a persona attribute",
                        table.attribute, table.condition_key
                    ));
                }
                problems
            }
        }
    }

    /// Normalize the underlying distribution(s).
    pub fn normalize(&mut self) -> f64 {
        match self {
            DistOrTable::Flat(dist) => dist.normalize(),
            DistOrTable::Conditional(table) => table.normalize(),
        }
    }
}

/// The scenario-element and style-dimension distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDistributions {
    pub location: DistOrTable,
    pub activity: DistOrTable,
    pub interlocutor: DistOrTable,
    pub medium: DistOrTable,
    /// Style dimensions, sampled independently in order; each dimension's
    /// `name` (e.g. `tone`) is its constraint key.
    pub style: Vec<CategoricalDistribution>,
}

impl ScenarioDistributions {
    /// The distribution backing a single-valued scene element.
    pub fn element(&self, name: &str) -> Option<&DistOrTable> {
        match name {
            "location" => Some(&self.location),
            "activity" => Some(&self.activity),
            "interlocutor" => Some(&self.interlocutor),
            "medium" => Some(&self.medium),
            _ => None,
        }
    }

    /// Structural problems for configuration validation.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for name in SCENE_ELEMENTS {
            problems.extend(self.element(name).expect("scene element").problems());
        }
        if self.style.is_empty() {
            problems.push("scenario.style must configure at least one style dimension".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for dim in &self.style {
            problems.extend(dim.problems());
            if dim.name.is_empty() {
                problems.push("a scenario style dimension is missing a name".into());
            } else if !seen.insert(dim.name.as_str()) {
                problems.push(format!(
                    "style dimension `{}` is configured twice",
                    dim.name
                ));
            }
        }
        problems
    }

    /// Normalize every element and style dimension.
    pub fn normalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        worst = worst.max(self.location.normalize());
        worst = worst.max(self.activity.normalize());
        worst = worst.max(self.interlocutor.normalize());
        worst = worst.max(self.medium.normalize());
        for dim in &mut self.style {
            worst = worst.max(dim.normalize());
        }
        worst
    }
}

/// Restriction of scenario elements (and style dimensions, by dimension
/// name) to allowed subsets. Missing keys are unrestricted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConstraint {
    #[serde(default)]
    pub restrict: BTreeMap<String, Vec<String>>,
}

impl ScenarioConstraint {
    pub fn is_empty(&self) -> bool {
        self.restrict.is_empty()
    }

    fn allowed(&self, element: &str) -> Option<&[String]> {
        self.restrict.get(element).map(Vec::as_slice)
    }

    /// Structural problems for configuration validation.
    pub fn problems(&self, config: &ScenarioDistributions) -> Vec<String> {
        let mut problems = Vec::new();
        for (element, subset) in &self.restrict {
            if subset.is_empty() {
                problems.push(format!("scenario constraint on `{element}` allows nothing"));
            }
            let known: Vec<&str> = if let Some(dist) = config.element(element) {
                dist.all_labels()
            } else if let Some(dim) = config.style.iter().find(|d| d.name == *element) {
                dim.labels().collect()
            } else {
                problems.push(format!(
                    "scenario constraint references unknown element `{element}`"
                ));
                continue;
            };
            for value in subset {
                if !known.contains(&value.as_str()) {
                    problems.push(format!(
                        "scenario constraint on `{element}` allows unknown category `{value}`"
                    ));
                }
            }
        }
        problems
    }
}

fn sample_restricted<'a>(
    dist: &'a CategoricalDistribution,
    element: &str,
    constraint: &ScenarioConstraint,
    rng: &mut Prng,
) -> Result<String> {
    match constraint.allowed(element) {
        None => Ok(sample_categorical(dist, rng)?.to_string()),
        Some(subset) => {
            let narrowed = dist
                .restricted(|label| subset.iter().any(|allowed| allowed == label))
                .map_err(|err| match err {
                    Error::InfeasibleConstraints { detail, .. } => Error::InfeasibleConstraints {
                        attribute: element.to_string(),
                        detail,
                    },
                    other => other,
                })?;
            Ok(sample_categorical(&narrowed, rng)?.to_string())
        }
    }
}

/// Sample a scenario for a persona: location → activity → interlocutor →
/// medium → style dimensions, renormalizing over any constrained subsets.
pub fn sample_scenario(
    persona: &Persona,
    config: &ScenarioDistributions,
    constraint: &ScenarioConstraint,
    rng: &mut Prng,
) -> Result<ScenarioContext> {
    let mut values = Vec::with_capacity(SCENE_ELEMENTS.len());
    for element in SCENE_ELEMENTS {
        let dist = config
            .element(element)
            .expect("scene element")
            .select(persona)?;
        values.push(sample_restricted(dist, element, constraint, rng)?);
    }
    let mut style = Vec::with_capacity(config.style.len());
    for dim in &config.style {
        style.push(sample_restricted(dim, &dim.name, constraint, rng)?);
    }
    let mut it = values.into_iter();
    Ok(ScenarioContext {
        location: it.next().expect("location drawn"),
        activity: it.next().expect("activity drawn"),
        interlocutor: it.next().expect("interlocutor drawn"),
        medium: it.next().expect("medium drawn"),
        style,
    })
}

/// Deterministic one-sentence scene realization used inside prompts and
/// reports; embeds every element's label verbatim.
pub fn render_scene_summary(ctx: &ScenarioContext) -> String {
    format!(
        "At {}, {} with {} via {} — style: {}.",
        ctx.location,
        ctx.activity,
        ctx.interlocutor,
        ctx.medium,
        ctx.style.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{BackgroundProfile, BasePersona, Persona, ValidationState};
    use crate::rng::seeded;

    fn test_persona() -> Persona {
        Persona {
            id: "p-000001".into(),
            base: BasePersona {
                age: "Young Adults".into(),
                gender: "Female".into(),
                occupation: "Students".into(),
                mbti: "ENFP-T".into(),
            },
            background: BackgroundProfile {
                education: "University".into(),
                prefecture: "Tokyo".into(),
                location: "Urban".into(),
                family: "Single".into(),
                religion: "None".into(),
                values: "Adventure-seeking".into(),
                income: "1-3M JPY".into(),
            },
            validation: ValidationState::Natural,
            extra: serde_json::Map::new(),
        }
    }

    fn test_config() -> ScenarioDistributions {
        ScenarioDistributions {
            location: DistOrTable::Flat(CategoricalDistribution::new(
                "location",
                vec![("Café", 0.5), ("Home", 0.5)],
            )),
            activity: DistOrTable::Flat(CategoricalDistribution::new(
                "activity",
                vec![
                    ("SNS posting", 0.1),
                    ("Chatting", 0.3),
                    ("Working", 0.2),
                    ("Studying", 0.2),
                    ("Resting", 0.2),
                ],
            )),
            interlocutor: DistOrTable::Flat(CategoricalDistribution::new(
                "interlocutor",
                vec![("Friend", 0.7), ("Doctor", 0.3)],
            )),
            medium: DistOrTable::Flat(CategoricalDistribution::new(
                "medium",
                vec![("SNS", 0.5), ("Face-to-face", 0.5)],
            )),
            style: vec![
                CategoricalDistribution::new("tone", vec![("Polite tone", 1.0)]),
                CategoricalDistribution::new(
                    "register",
                    vec![("Spoken style", 0.6), ("Written style", 0.4)],
                ),
            ],
        }
    }

    #[test]
    fn restriction_to_single_activity_always_applies() {
        let persona = test_persona();
        let config = test_config();
        let constraint = ScenarioConstraint {
            restrict: BTreeMap::from([("activity".to_string(), vec!["SNS posting".to_string()])]),
        };
        let mut rng = seeded(1);
        for _ in 0..500 {
            let ctx = sample_scenario(&persona, &config, &constraint, &mut rng).unwrap();
            assert_eq!(ctx.activity, "SNS posting");
        }
    }

    #[test]
    fn single_support_location_is_constant() {
        let persona = test_persona();
        let mut config = test_config();
        config.location = DistOrTable::Flat(CategoricalDistribution::new(
            "location",
            vec![("Café", 1.0)],
        ));
        let mut rng = seeded(2);
        for _ in 0..100 {
            let ctx = sample_scenario(&persona, &config, &ScenarioConstraint::default(), &mut rng)
                .unwrap();
            assert_eq!(ctx.location, "Café");
        }
    }

    #[test]
    fn restricted_sampling_renormalizes() {
        // Allowing activities with masses 0.1 and 0.3 renormalizes to
        // 0.25 / 0.75.
        let persona = test_persona();
        let config = test_config();
        let constraint = ScenarioConstraint {
            restrict: BTreeMap::from([(
                "activity".to_string(),
                vec!["SNS posting".to_string(), "Chatting".to_string()],
            )]),
        };
        let mut rng = seeded(3);
        let n = 10_000;
        let mut sns = 0u32;
        for _ in 0..n {
            let ctx = sample_scenario(&persona, &config, &constraint, &mut rng).unwrap();
            match ctx.activity.as_str() {
                "SNS posting" => sns += 1,
                "Chatting" => {}
                other => panic!("constraint violated: {other}"),
            }
        }
        let freq = f64::from(sns) / f64::from(n);
        assert!((freq - 0.25).abs() < 0.02, "SNS posting frequency {freq}");
    }

    #[test]
    fn empty_restriction_subset_is_infeasible() {
        let persona = test_persona();
        let config = test_config();
        let constraint = ScenarioConstraint {
            restrict: BTreeMap::from([("medium".to_string(), vec!["Telegraph".to_string()])]),
        };
        let mut rng = seeded(4);
        assert!(matches!(
            sample_scenario(&persona, &config, &constraint, &mut rng),
            Err(Error::InfeasibleConstraints { attribute, .. }) if attribute == "medium"
        ));
    }

    #[test]
    fn conditional_element_keys_on_persona_attribute() {
        let persona = test_persona();
        let mut config = test_config();
        config.activity = DistOrTable::Conditional(ConditionalDistributionTable {
            attribute: "activity".into(),
            condition_key: "occupation".into(),
            rows: vec![(
                "Students".into(),
                CategoricalDistribution::new("activity", vec![("Studying", 1.0)]),
            )],
            default: CategoricalDistribution::new("activity", vec![("Working", 1.0)]),
        });
        let mut rng = seeded(5);
        let ctx =
            sample_scenario(&persona, &config, &ScenarioConstraint::default(), &mut rng).unwrap();
        assert_eq!(ctx.activity, "Studying");
    }

    #[test]
    fn style_dimensions_sample_in_order_and_respect_constraints() {
        let persona = test_persona();
        let config = test_config();
        let constraint = ScenarioConstraint {
            restrict: BTreeMap::from([("register".to_string(), vec!["Written style".to_string()])]),
        };
        let mut rng = seeded(6);
        for _ in 0..200 {
            let ctx = sample_scenario(&persona, &config, &constraint, &mut rng).unwrap();
            assert_eq!(ctx.style.len(), 2);
            assert_eq!(ctx.style[0], "Polite tone");
            assert_eq!(ctx.style[1], "Written style");
        }
    }

    #[test]
    fn scene_summary_embeds_every_label_on_one_line() {
        let ctx = ScenarioContext {
            location: "Hospital lobby".into(),
            activity: "Chatting".into(),
            interlocutor: "Doctor".into(),
            medium: "SNS".into(),
            style: vec!["Polite tone".into(), "Spoken style".into()],
        };
        let summary = render_scene_summary(&ctx);
        for label in [
            "Hospital lobby",
            "Chatting",
            "Doctor",
            "SNS",
            "Polite tone",
            "Spoken style",
        ] {
            assert!(
                summary.contains(label),
                "summary missing {label}: {summary}"
            );
        }
        assert!(!summary.is_empty());
        assert!(!summary.contains('\n'));
        assert_eq!(summary, render_scene_summary(&ctx));
    }

    #[test]
    fn constraint_problems_catch_unknown_and_empty() {
        let config = test_config();
        let constraint = ScenarioConstraint {
            restrict: BTreeMap::from([
                ("activity".to_string(), vec![]),
                ("weather".to_string(), vec!["Sunny".to_string()]),
                ("medium".to_string(), vec!["Carrier pigeon".to_string()]),
            ]),
        };
        let problems = constraint.problems(&config);
        assert!(problems.iter().any(|p| p.contains("allows nothing")));
        assert!(problems
            .iter()
            .any(|p| p.contains("unknown element `weather`")));
        assert!(problems
            .iter()
            .any(|p| p.contains("unknown category `Carrier pigeon`")));
        assert!(ScenarioConstraint::default().problems(&config).is_empty());
    }
}
