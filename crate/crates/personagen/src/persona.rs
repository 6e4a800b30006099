//! Persona construction: base demographic sampling (stage 1) and
//! socio-cultural background enrichment (stage 2), with rule-based
//! plausibility filtering applied before sampling and re-checkable after.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::{
    sample_categorical, CategoricalDistribution, ConditionalDistributionTable,
};
use crate::error::{Error, Result};
use crate::gateway::PlausibilityLabel;
use crate::rng::{IdGen, Prng};

/// The four base attributes, in sampling order.
pub const BASE_ATTRIBUTES: [&str; 4] = ["age", "gender", "occupation", "mbti"];

/// The seven background attributes, in sampling order.
pub const BACKGROUND_ATTRIBUTES: [&str; 7] = [
    "education",
    "prefecture",
    "location",
    "family",
    "religion",
    "values",
    "income",
];

/// All eleven persona attributes.
pub const ALL_ATTRIBUTES: [&str; 11] = [
    "age",
    "gender",
    "occupation",
    "mbti",
    "education",
    "prefecture",
    "location",
    "family",
    "religion",
    "values",
    "income",
];

/// The sixteen four-letter MBTI codes.
pub const MBTI_CODES: [&str; 16] = [
    "ISTJ", "ISFJ", "INFJ", "INTJ", "ISTP", "ISFP", "INFP", "INTP", "ESTP", "ESFP", "ENFP", "ENTP",
    "ESTJ", "ESFJ", "ENFJ", "ENTJ",
];

/// Whether `label` is one of the 32 closed MBTI labels
/// (`<4 uppercase letters>-<A|T>`, code drawn from [`MBTI_CODES`]).
pub fn is_valid_mbti(label: &str) -> bool {
    match label.split_once('-') {
        Some((code, suffix)) => (suffix == "A" || suffix == "T") && MBTI_CODES.contains(&code),
        None => false,
    }
}

/// Stage-1 output: the four base demographic attributes x = (age, gender,
/// occupation, mbti).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasePersona {
    pub age: String,
    pub gender: String,
    pub occupation: String,
    pub mbti: String,
}

impl BasePersona {
    /// Attribute name → value map over the four base attributes.
    pub fn attribute_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("age".into(), self.age.clone()),
            ("gender".into(), self.gender.clone()),
            ("occupation".into(), self.occupation.clone()),
            ("mbti".into(), self.mbti.clone()),
        ])
    }
}

/// Stage-2 output: the seven background attributes b = (education,
/// prefecture, location, family, religion, values, income).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundProfile {
    pub education: String,
    pub prefecture: String,
    pub location: String,
    pub family: String,
    pub religion: String,
    pub values: String,
    pub income: String,
}

impl BackgroundProfile {
    /// Attribute name → value map over the seven background attributes.
    pub fn attribute_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("education".into(), self.education.clone()),
            ("prefecture".into(), self.prefecture.clone()),
            ("location".into(), self.location.clone()),
            ("family".into(), self.family.clone()),
            ("religion".into(), self.religion.clone()),
            ("values".into(), self.values.clone()),
            ("income".into(), self.income.clone()),
        ])
    }
}

/// Plausibility-validation state of a persona record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationState {
    /// Not yet judged.
    Pending,
    Natural,
    RareButPlausible,
    Implausible,
}

impl ValidationState {
    /// The judge label carried by this state, if judged.
    pub fn label(self) -> Option<PlausibilityLabel> {
        match self {
            ValidationState::Pending => None,
            ValidationState::Natural => Some(PlausibilityLabel::Natural),
            ValidationState::RareButPlausible => Some(PlausibilityLabel::RareButPlausible),
            ValidationState::Implausible => Some(PlausibilityLabel::Implausible),
        }
    }

    /// Whether a persona in this state belongs in the validated store
    /// (judged natural or rare-but-plausible).
    pub fn is_retained(self) -> bool {
        matches!(
            self,
            ValidationState::Natural | ValidationState::RareButPlausible
        )
    }
}

impl From<PlausibilityLabel> for ValidationState {
    fn from(label: PlausibilityLabel) -> Self {
        match label {
            PlausibilityLabel::Natural => ValidationState::Natural,
            PlausibilityLabel::RareButPlausible => ValidationState::RareButPlausible,
            PlausibilityLabel::Implausible => ValidationState::Implausible,
        }
    }
}

/// A fully assembled virtual individual z = (x, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub base: BasePersona,
    pub background: BackgroundProfile,
    pub validation: ValidationState,
    /// Unknown fields from record files, preserved on round-trip.
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Persona {
    /// Attribute name → value map over all eleven attributes.
    pub fn attribute_map(&self) -> BTreeMap<String, String> {
        let mut map = self.base.attribute_map();
        map.append(&mut self.background.attribute_map());
        map
    }
}

/// One side of a co-occurrence rule: an attribute name and a value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrValue {
    pub attribute: String,
    pub value: String,
}

impl AttrValue {
    pub fn new(attribute: &str, value: &str) -> Self {
        Self {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

/// A pair of attribute values that a rule either forbids or permits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePair {
    pub first: AttrValue,
    pub second: AttrValue,
}

impl RulePair {
    pub fn new(a: (&str, &str), b: (&str, &str)) -> Self {
        Self {
            first: AttrValue::new(a.0, a.1),
            second: AttrValue::new(b.0, b.1),
        }
    }

    /// The rule's attribute pair, name-sorted.
    pub fn attribute_pair(&self) -> (&str, &str) {
        sorted_pair(&self.first.attribute, &self.second.attribute)
    }

    /// Whether this rule concerns exactly the given attribute-value
    /// combination, in either orientation.
    pub fn matches(&self, a: (&str, &str), b: (&str, &str)) -> bool {
        let fits = |side: &AttrValue, (attr, value): (&str, &str)| {
            side.attribute == attr && side.value == value
        };
        (fits(&self.first, a) && fits(&self.second, b))
            || (fits(&self.first, b) && fits(&self.second, a))
    }
}

fn sorted_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Pre-sampling plausibility constraints over persona attributes.
///
/// `blocked_pairs` are hard exclusions. `allowed_pairs`, when any rule is
/// present for a given attribute pair, form an exhaustive whitelist for
/// that pair: combinations not listed are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleFilter {
    #[serde(default)]
    pub blocked_pairs: Vec<RulePair>,
    #[serde(default)]
    pub allowed_pairs: Vec<RulePair>,
}

impl RuleFilter {
    pub fn is_empty(&self) -> bool {
        self.blocked_pairs.is_empty() && self.allowed_pairs.is_empty()
    }

    /// Whether any whitelist rule covers the attribute pair {a, b}.
    fn whitelist_covers(&self, a: &str, b: &str) -> bool {
        let key = sorted_pair(a, b);
        self.allowed_pairs
            .iter()
            .any(|rule| rule.attribute_pair() == key)
    }

    /// Whether the combination is explicitly whitelisted.
    fn whitelisted(&self, a: (&str, &str), b: (&str, &str)) -> bool {
        self.allowed_pairs.iter().any(|rule| rule.matches(a, b))
    }

    /// Whether the combination hits a blocked pair.
    fn blocked(&self, a: (&str, &str), b: (&str, &str)) -> bool {
        self.blocked_pairs.iter().any(|rule| rule.matches(a, b))
    }

    /// Whether `value` for `attribute` can co-occur with every
    /// already-drawn attribute value in `drawn`.
    pub fn allows_with(&self, drawn: &[(&str, String)], attribute: &str, value: &str) -> bool {
        for (prev_attr, prev_value) in drawn {
            let prev = (*prev_attr, prev_value.as_str());
            let cand = (attribute, value);
            if self.blocked(prev, cand) {
                return false;
            }
            if self.whitelist_covers(prev_attr, attribute) && !self.whitelisted(prev, cand) {
                return false;
            }
        }
        true
    }

    /// Structural problems, for configuration validation. `category_sets`
    /// maps each configured attribute name to its category labels.
    pub fn problems(&self, category_sets: &BTreeMap<String, Vec<String>>) -> Vec<String> {
        let mut problems = Vec::new();
        let mut check_side =
            |rule_kind: &str, side: &AttrValue| match category_sets.get(&side.attribute) {
                None => problems.push(format!(
                    "{rule_kind} rule references unconfigured attribute `{}`",
                    side.attribute
                )),
                Some(labels) => {
                    if !labels.iter().any(|l| l == &side.value) {
                        problems.push(format!(
                            "{rule_kind} rule references unknown value `{}` for attribute `{}`",
                            side.value, side.attribute
                        ));
                    }
                }
            };
        for rule in &self.blocked_pairs {
            check_side("blocked", &rule.first);
            check_side("blocked", &rule.second);
        }
        for rule in &self.allowed_pairs {
            check_side("allowed", &rule.first);
            check_side("allowed", &rule.second);
        }
        for blocked in &self.blocked_pairs {
            let a = (
                blocked.first.attribute.as_str(),
                blocked.first.value.as_str(),
            );
            let b = (
                blocked.second.attribute.as_str(),
                blocked.second.value.as_str(),
            );
            if self.whitelisted(a, b) {
                problems.push(format!(
                    "combination ({}={}, {}={}) appears in both blocked_pairs and allowed_pairs",
                    a.0, a.1, b.0, b.1
                ));
            }
        }
        problems
    }
}

/// The four base-attribute distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaDistributions {
    pub age: CategoricalDistribution,
    pub gender: CategoricalDistribution,
    pub occupation: CategoricalDistribution,
    pub mbti: CategoricalDistribution,
}

impl PersonaDistributions {
    /// The distribution backing a base attribute name.
    pub fn get(&self, attribute: &str) -> Option<&CategoricalDistribution> {
        match attribute {
            "age" => Some(&self.age),
            "gender" => Some(&self.gender),
            "occupation" => Some(&self.occupation),
            "mbti" => Some(&self.mbti),
            _ => None,
        }
    }

    /// Structural problems, including the closed-set MBTI check.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for attr in BASE_ATTRIBUTES {
            problems.extend(self.get(attr).expect("base attribute").problems());
        }
        for label in self.mbti.labels() {
            if !is_valid_mbti(label) {
                problems.push(format!(
                    "mbti distribution contains `{label}`, which is not one of the 32 MBTI labels"
                ));
            }
        }
        problems
    }

    /// Normalize all four distributions; returns the worst raw-sum deviation.
    pub fn normalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        worst = worst.max(self.age.normalize());
        worst = worst.max(self.gender.normalize());
        worst = worst.max(self.occupation.normalize());
        worst.max(self.mbti.normalize())
    }
}

/// The seven background-attribute conditional tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundTables {
    pub education: ConditionalDistributionTable,
    pub prefecture: ConditionalDistributionTable,
    pub location: ConditionalDistributionTable,
    pub family: ConditionalDistributionTable,
    pub religion: ConditionalDistributionTable,
    pub values: ConditionalDistributionTable,
    pub income: ConditionalDistributionTable,
}

impl BackgroundTables {
    /// The table backing a background attribute name.
    pub fn get(&self, attribute: &str) -> Option<&ConditionalDistributionTable> {
        match attribute {
            "education" => Some(&self.education),
            "prefecture" => Some(&self.prefecture),
            "location" => Some(&self.location),
            "family" => Some(&self.family),
            "religion" => Some(&self.religion),
            "values" => Some(&self.values),
            "income" => Some(&self.income),
            _ => None,
        }
    }

    /// Structural problems, including condition-key referential checks.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for attr in BACKGROUND_ATTRIBUTES {
            let table = self.get(attr).expect("background attribute");
            problems.extend(table.problems());
            if !BASE_ATTRIBUTES.contains(&table.condition_key.as_str()) {
                problems.push(format!(
                    "background table `{attr}` conditions on `{}`, which is not a base attribute",
                    table.condition_key
                ));
            }
        }
        problems
    }

    /// Normalize every table; returns the worst raw-sum deviation.
    pub fn normalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        for attr in BACKGROUND_ATTRIBUTES {
            let table = match attr {
                "education" => &mut self.education,
                "prefecture" => &mut self.prefecture,
                "location" => &mut self.location,
                "family" => &mut self.family,
                "religion" => &mut self.religion,
                "values" => &mut self.values,
                "income" => &mut self.income,
                _ => unreachable!(),
            };
            worst = worst.max(table.normalize());
        }
        worst
    }
}

/// Sample a base persona: age → gender → occupation → mbti, renormalizing
/// each step's distribution over the values the filter still allows given
/// what has already been drawn.
pub fn sample_base_persona(
    dists: &PersonaDistributions,
    filter: &RuleFilter,
    rng: &mut Prng,
) -> Result<BasePersona> {
    let mut drawn: Vec<(&str, String)> = Vec::with_capacity(4);
    for attr in BASE_ATTRIBUTES {
        let dist = dists.get(attr).expect("base attribute");
        let value = if filter.is_empty() {
            sample_categorical(dist, rng)?.to_string()
        } else {
            let narrowed = dist
                .restricted(|value| filter.allows_with(&drawn, attr, value))
                .map_err(|err| match err {
                    Error::InfeasibleConstraints { detail, .. } => Error::InfeasibleConstraints {
                        attribute: attr.to_string(),
                        detail,
                    },
                    other => other,
                })?;
            sample_categorical(&narrowed, rng)?.to_string()
        };
        drawn.push((attr, value));
    }
    let mut it = drawn.into_iter().map(|(_, v)| v);
    Ok(BasePersona {
        age: it.next().expect("age drawn"),
        gender: it.next().expect("gender drawn"),
        occupation: it.next().expect("occupation drawn"),
        mbti: it.next().expect("mbti drawn"),
    })
}

/// Sample the seven background attributes, each from the table row selected
/// by the base persona's conditioning value (default row when none matches).
pub fn sample_background(
    base: &BasePersona,
    tables: &BackgroundTables,
    rng: &mut Prng,
) -> Result<BackgroundProfile> {
    let base_map = base.attribute_map();
    let mut values = Vec::with_capacity(BACKGROUND_ATTRIBUTES.len());
    for attr in BACKGROUND_ATTRIBUTES {
        let table = tables.get(attr).expect("background attribute");
        let condition_value = base_map
            .get(&table.condition_key)
            .ok_or_else(|| Error::UnknownAttribute(table.condition_key.clone()))?;
        let dist = table.row_for(condition_value);
        values.push(sample_categorical(dist, rng)?.to_string());
    }
    let mut it = values.into_iter();
    Ok(BackgroundProfile {
        education: it.next().expect("education drawn"),
        prefecture: it.next().expect("prefecture drawn"),
        location: it.next().expect("location drawn"),
        family: it.next().expect("family drawn"),
        religion: it.next().expect("religion drawn"),
        values: it.next().expect("values drawn"),
        income: it.next().expect("income drawn"),
    })
}

/// Combine a base persona and background profile into a persona with a
/// fresh id and validation state `Pending`.
///
/// The id generator is passed explicitly: ids are fresh across calls yet
/// the whole id sequence replays identically when a run is repeated.
pub fn assemble_persona(
    base: BasePersona,
    background: BackgroundProfile,
    ids: &mut IdGen,
) -> Persona {
    Persona {
        id: ids.next_id(),
        base,
        background,
        validation: ValidationState::Pending,
        extra: serde_json::Map::new(),
    }
}

/// Kind of rule a candidate violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The combination hits a blocked pair.
    Blocked,
    /// A whitelist covers the attribute pair but does not list the combination.
    NotWhitelisted,
}

/// One violated rule, as a concrete attribute-value combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub first: AttrValue,
    pub second: AttrValue,
}

/// Outcome of [`check_rules`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleCheck {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Re-validate a candidate attribute map against a filter, enumerating
/// every violated pair.
///
/// The candidate may cover any subset of the eleven persona attributes
/// (e.g. just the four base attributes); rules touching attributes absent
/// from the candidate are not applicable and do not fail it.
pub fn check_rules(candidate: &BTreeMap<String, String>, filter: &RuleFilter) -> Result<RuleCheck> {
    for key in candidate.keys() {
        if !ALL_ATTRIBUTES.contains(&key.as_str()) {
            return Err(Error::UnknownAttribute(key.clone()));
        }
    }
    let mut violations = Vec::new();
    for rule in &filter.blocked_pairs {
        let first = candidate.get(&rule.first.attribute);
        let second = candidate.get(&rule.second.attribute);
        if first == Some(&rule.first.value) && second == Some(&rule.second.value) {
            violations.push(Violation {
                kind: ViolationKind::Blocked,
                first: rule.first.clone(),
                second: rule.second.clone(),
            });
        }
    }
    // Whitelist groups, keyed by name-sorted attribute pair, deduplicated.
    let mut groups: Vec<(&str, &str)> = filter
        .allowed_pairs
        .iter()
        .map(RulePair::attribute_pair)
        .collect();
    groups.sort_unstable();
    groups.dedup();
    for (attr_a, attr_b) in groups {
        if let (Some(value_a), Some(value_b)) = (candidate.get(attr_a), candidate.get(attr_b)) {
            if !filter.whitelisted((attr_a, value_a), (attr_b, value_b)) {
                violations.push(Violation {
                    kind: ViolationKind::NotWhitelisted,
                    first: AttrValue::new(attr_a, value_a),
                    second: AttrValue::new(attr_b, value_b),
                });
            }
        }
    }
    Ok(RuleCheck {
        passed: violations.is_empty(),
        violations,
    })
}
