//! Stage 4 and validation — every LLM interaction behind one wire-protocol
//! contract: emotion-text generation, three-label plausibility judging, and
//! four-criterion rubric scoring, with a deterministic mock backend for
//! offline runs and an OpenAI-compatible remote backend.

mod mock;
mod remote;

pub use mock::MockBackend;
pub use remote::RemoteBackend;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persona::{Persona, ALL_ATTRIBUTES};
use crate::rng::Clock;
use crate::scenario::{render_scene_summary, ScenarioContext};

/// Default sentence budget for generated texts.
pub const DEFAULT_MAX_SENTENCES: usize = 2;

/// System prompt for emotion-text generation.
pub const GENERATION_SYSTEM: &str = "You write short first-person utterances fully in character. \
     Reply with the utterance only - no explanations, no surrounding quotes.";

/// System prompt for persona/scene plausibility judging.
pub const PLAUSIBILITY_SYSTEM: &str =
    "You judge whether a described person (and scene, when one is given) could \
     exist in the real world. Reply with exactly one label.";

/// System prompt for rubric scoring.
pub const RUBRIC_SYSTEM: &str = "You rate a short text on four criteria. Reply with exactly four \
     comma-separated integers and nothing else.";

/// An emotion label, valid within the run's declared emotion set
/// (seven categories for generation, six for golden-data comparison).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionCategory(pub String);

impl EmotionCategory {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    /// Construct after checking membership in the active emotion set.
    pub fn validated(label: &str, active_set: &[String]) -> Result<Self> {
        if active_set.iter().any(|known| known == label) {
            Ok(Self(label.to_string()))
        } else {
            Err(Error::UnknownLabel(label.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for EmotionCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Inputs of one text-generation call: prompt = f(z, s, v, e) plus model
/// parameters.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub persona: Persona,
    pub scenario: ScenarioContext,
    pub emotion: EmotionCategory,
    pub model: String,
    pub temperature: f64,
    pub max_sentences: usize,
}

impl GenerationRequest {
    /// Check the request invariants (temperature in [0,2], positive
    /// sentence budget).
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=2.0).contains(&self.temperature) {
            problems.push(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_sentences == 0 {
            problems.push("max_sentences must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Three-way plausibility judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlausibilityLabel {
    Natural,
    RareButPlausible,
    Implausible,
}

impl PlausibilityLabel {
    /// The label as judge-facing text.
    pub fn as_str(self) -> &'static str {
        match self {
            PlausibilityLabel::Natural => "natural",
            PlausibilityLabel::RareButPlausible => "rare but plausible",
            PlausibilityLabel::Implausible => "implausible",
        }
    }

    /// Whether a subject with this label is retained.
    pub fn is_keep(self) -> bool {
        !matches!(self, PlausibilityLabel::Implausible)
    }

    /// Parse a completion into a label: lowercase, strip punctuation,
    /// collapse whitespace, then match the label lexicon exactly.
    pub fn parse(completion: &str) -> Option<Self> {
        let normalized: String = completion
            .to_lowercase()
            .chars()
            .map(|c| {
                if c.is_alphanumeric() {
                    c
                } else if c == '_' {
                    ' '
                } else if c.is_whitespace() {
                    ' '
                } else {
                    ' '
                }
            })
            .collect();
        let normalized = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
        match normalized.as_str() {
            "natural" => Some(PlausibilityLabel::Natural),
            "rare but plausible" | "rarebutplausible" => Some(PlausibilityLabel::RareButPlausible),
            "implausible" => Some(PlausibilityLabel::Implausible),
            _ => None,
        }
    }
}

/// Four-criterion human-likeness scores, each on a 1–5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub emotion_match: u8,
    pub grammaticality: u8,
    pub lexical_diversity: u8,
    pub structure_logic: u8,
}

/// Names of the four rubric criteria, in scoring order.
pub const RUBRIC_CRITERIA: [&str; 4] = [
    "emotion_match",
    "grammaticality",
    "lexical_diversity",
    "structure_logic",
];

impl RubricScore {
    /// Scores in criteria order.
    pub fn values(self) -> [u8; 4] {
        [
            self.emotion_match,
            self.grammaticality,
            self.lexical_diversity,
            self.structure_logic,
        ]
    }

    /// Parse a completion shaped like `a,b,c,d` into four in-range scores.
    /// Any other shape — wrong count, non-integers, out-of-range values —
    /// is rejected.
    pub fn parse(completion: &str) -> Option<Self> {
        let numbers: Vec<u32> = completion
            .split(|c: char| !c.is_ascii_digit())
            .filter(|token| !token.is_empty())
            .map(|token| token.parse::<u32>().ok())
            .collect::<Option<Vec<_>>>()?;
        if numbers.len() != 4 || numbers.iter().any(|n| !(1..=5).contains(n)) {
            return None;
        }
        Some(RubricScore {
            emotion_match: numbers[0] as u8,
            grammaticality: numbers[1] as u8,
            lexical_diversity: numbers[2] as u8,
            structure_logic: numbers[3] as u8,
        })
    }
}

/// One generated text record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionSample {
    pub id: String,
    pub persona_id: String,
    pub emotion: EmotionCategory,
    pub text: String,
    pub scenario: ScenarioContext,
    pub model: String,
    pub temperature: f64,
    /// Whether the text was truncated to the sentence budget after the
    /// constrained retry still ran over.
    #[serde(default)]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility: Option<PlausibilityLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<RubricScore>,
    pub created_at: String,
    /// Unknown fields from record files, preserved on round-trip.
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// One single-turn chat-completion request (the wire protocol's input:
/// model, temperature, system+user messages).
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub system: String,
    pub user: String,
}

/// The LLM wire-protocol contract: one single-turn completion in, the
/// assistant's text out.
pub trait LlmBackend: Sync {
    /// Issue the request and return the first choice's message content.
    fn complete(&self, req: &ChatRequest) -> Result<String>;

    /// Short backend identifier for reports and logs.
    fn name(&self) -> &str;
}

/// Bounded transport retry policy with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts (first try included). Default 3.
    pub max_attempts: u32,
    /// Backoff before retry k is `base_delay_ms << (k-1)`.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 200,
        }
    }
}

impl RetryPolicy {
    /// Run `op`, retrying on [`Error::BackendUnavailable`] with exponential
    /// backoff up to the attempt cap. Other errors propagate immediately.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.base_delay_ms.saturating_mul(1 << (attempt - 1));
                if delay > 0 {
                    std::thread::sleep(std::time::Duration::from_millis(delay));
                }
            }
            match op() {
                Ok(value) => return Ok(value),
                Err(err @ Error::BackendUnavailable(_)) => last = Some(err),
                Err(other) => return Err(other),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Shared call context for gateway operations.
pub struct GenContext<'a> {
    pub backend: &'a dyn LlmBackend,
    pub retry: RetryPolicy,
    pub clock: Clock,
}

fn persona_profile_lines(persona: &Persona) -> String {
    let attributes = persona.attribute_map();
    ALL_ATTRIBUTES
        .iter()
        .map(|attr| format!("- {attr}: {}", attributes[*attr]))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render the generation prompt for (persona, scenario, emotion) with the
/// default two-sentence budget.
pub fn build_prompt(
    persona: &Persona,
    scenario: &ScenarioContext,
    emotion: &EmotionCategory,
) -> String {
    build_prompt_with_limit(persona, scenario, emotion, DEFAULT_MAX_SENTENCES)
}

/// Render the generation prompt with an explicit sentence budget. The
/// prompt embeds all eleven persona attribute values, the rendered scene
/// summary, every style descriptor, the emotion label, and the length
/// instruction.
pub fn build_prompt_with_limit(
    persona: &Persona,
    scenario: &ScenarioContext,
    emotion: &EmotionCategory,
    max_sentences: usize,
) -> String {
    format!(
        "You are the following person:\n{profile}\n\nScene: {scene}\nSpeak in this style: {style}.\n\nWrite what you would say right now in this scene, genuinely feeling the emotion \"{emotion}\".\nReply with at most {max_sentences} short sentences, in the first person, with no explanation.",
        profile = persona_profile_lines(persona),
        scene = render_scene_summary(scenario),
        style = scenario.style.join(", "),
        emotion = emotion.as_str(),
    )
}

fn complete_non_blank(chat: &ChatRequest, ctx: &GenContext) -> Result<String> {
    let attempts = ctx.retry.max_attempts.max(1);
    for _ in 0..attempts {
        let text = ctx.retry.run(|| ctx.backend.complete(chat))?;
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            return Ok(trimmed.to_string());
        }
    }
    Err(Error::EmptyCompletion { attempts })
}

/// Generate one emotion text: build the prompt, call the backend (bounded
/// transport retries, blank completions re-asked), and enforce the sentence
/// budget — one constrained retry for over-long replies, then truncation
/// with the `truncated` provenance flag.
pub fn generate_text(req: &GenerationRequest, id: &str, ctx: &GenContext) -> Result<EmotionSample> {
    req.validate()?;
    let prompt =
        build_prompt_with_limit(&req.persona, &req.scenario, &req.emotion, req.max_sentences);
    let chat = ChatRequest {
        model: req.model.clone(),
        temperature: req.temperature,
        system: GENERATION_SYSTEM.to_string(),
        user: prompt.clone(),
    };
    let first = complete_non_blank(&chat, ctx)?;
    let (text, truncated) = if count_sentences(&first) <= req.max_sentences {
        (first, false)
    } else {
        let constrained = ChatRequest {
            user: format!(
                "{prompt}\n\nYour previous reply was too long. Reply again with at most {} short sentence(s) and nothing else.",
                req.max_sentences
            ),
            ..chat.clone()
        };
        let second = complete_non_blank(&constrained, ctx)?;
        if count_sentences(&second) <= req.max_sentences {
            (second, false)
        } else {
            (truncate_sentences(&second, req.max_sentences), true)
        }
    };
    Ok(EmotionSample {
        id: id.to_string(),
        persona_id: req.persona.id.clone(),
        emotion: req.emotion.clone(),
        text,
        scenario: req.scenario.clone(),
        model: req.model.clone(),
        temperature: req.temperature,
        truncated,
        plausibility: None,
        rubric: None,
        created_at: ctx.clock.now_iso8601(),
        extra: serde_json::Map::new(),
    })
}

/// What a plausibility judgment is about: a persona alone, or a persona
/// together with a sampled scene.
pub enum JudgeSubject<'a> {
    Persona(&'a Persona),
    PersonaInScene(&'a Persona, &'a ScenarioContext),
}

impl JudgeSubject<'_> {
    fn describe(&self) -> String {
        match self {
            JudgeSubject::Persona(persona) => {
                format!("Person:\n{}", persona_profile_lines(persona))
            }
            JudgeSubject::PersonaInScene(persona, scenario) => format!(
                "Person:\n{}\n\nScene: {}",
                persona_profile_lines(persona),
                render_scene_summary(scenario)
            ),
        }
    }
}

/// Judge the plausibility of a persona (or persona-in-scene) combination,
/// reprompting once with stricter format instructions before giving up.
pub fn judge_plausibility(
    subject: &JudgeSubject,
    model: &str,
    ctx: &GenContext,
) -> Result<PlausibilityLabel> {
    let question = format!(
        "{}\n\nCould this combination exist in the real world? Answer with exactly one of: natural, rare but plausible, implausible.",
        subject.describe()
    );
    let chat = ChatRequest {
        model: model.to_string(),
        temperature: 0.0,
        system: PLAUSIBILITY_SYSTEM.to_string(),
        user: question.clone(),
    };
    let first = ctx.retry.run(|| ctx.backend.complete(&chat))?;
    if let Some(label) = PlausibilityLabel::parse(&first) {
        return Ok(label);
    }
    let stricter = ChatRequest {
        user: format!(
            "{question}\n\nYour previous answer `{}` was not a valid label. Reply with exactly one of these labels and nothing else: natural | rare but plausible | implausible.",
            first.trim()
        ),
        ..chat
    };
    let second = ctx.retry.run(|| ctx.backend.complete(&stricter))?;
    PlausibilityLabel::parse(&second)
        .ok_or_else(|| Error::UnparsableJudgment(second.trim().to_string()))
}

/// Score a generated sample on the four rubric criteria, reprompting once
/// with stricter format instructions before giving up.
pub fn judge_rubric(sample: &EmotionSample, model: &str, ctx: &GenContext) -> Result<RubricScore> {
    let question = format!(
        "Rate the following text on four criteria, each as an integer from 1 (poor) to 5 (excellent):\n1. emotion match - does it clearly express \"{}\"?\n2. grammaticality - is it grammatically correct?\n3. lexical diversity and appropriateness - is the wording varied and fitting?\n4. structure and logic - is it coherent?\n\nText: \"{}\"\n\nReply with exactly four comma-separated integers in the order given, e.g. 4,5,3,4.",
        sample.emotion.as_str(),
        sample.text
    );
    let chat = ChatRequest {
        model: model.to_string(),
        temperature: 0.0,
        system: RUBRIC_SYSTEM.to_string(),
        user: question.clone(),
    };
    let first = ctx.retry.run(|| ctx.backend.complete(&chat))?;
    if let Some(score) = RubricScore::parse(&first) {
        return Ok(score);
    }
    let stricter = ChatRequest {
        user: format!(
            "{question}\n\nYour previous answer `{}` did not match the format. Reply with exactly four comma-separated integers between 1 and 5, nothing else.",
            first.trim()
        ),
        ..chat
    };
    let second = ctx.retry.run(|| ctx.backend.complete(&stricter))?;
    RubricScore::parse(&second).ok_or_else(|| Error::UnparsableJudgment(second.trim().to_string()))
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '»' | '”' | '’')
}

/// Byte spans of the sentences in `text`: maximal segments ended by a run
/// of terminal punctuation (with trailing quotes/brackets absorbed), plus a
/// final unterminated segment when it has content. Segments without
/// content (e.g. stray punctuation) are not counted.
fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut has_content = false;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if is_terminal(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = iter.peek() {
                if is_terminal(d) {
                    end = j + d.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            while let Some(&(j, d)) = iter.peek() {
                if is_closer(d) {
                    end = j + d.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            if has_content {
                spans.push((start, end));
            }
            start = end;
            has_content = false;
        } else if !c.is_whitespace() && !is_closer(c) {
            has_content = true;
        }
    }
    if has_content {
        spans.push((start, text.len()));
    }
    spans
}

/// Number of sentences in `text` under terminal-punctuation segmentation.
pub fn count_sentences(text: &str) -> usize {
    sentence_spans(text).len()
}

/// The first `max` sentences of `text` (whole text when already within
/// budget), trimmed.
pub fn truncate_sentences(text: &str, max: usize) -> String {
    let spans = sentence_spans(text);
    if spans.len() <= max || max == 0 {
        return text.trim().to_string();
    }
    let end = spans[max - 1].1;
    text[..end].trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{BackgroundProfile, BasePersona, ValidationState};
    use crate::rng::Clock;

    pub(crate) fn test_persona() -> Persona {
        Persona {
            id: "p-000001".into(),
            base: BasePersona {
                age: "Young Adults".into(),
                gender: "Female".into(),
                occupation: "Freelancers".into(),
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

    pub(crate) fn test_scenario() -> ScenarioContext {
        ScenarioContext {
            location: "Café".into(),
            activity: "Chatting".into(),
            interlocutor: "Friend".into(),
            medium: "Face-to-face".into(),
            style: vec!["Polite tone".into(), "Spoken style".into()],
        }
    }

    #[test]
    fn count_sentences_oracles() {
        assert_eq!(count_sentences(""), 0);
        assert_eq!(count_sentences("I won! Really?"), 2);
        assert_eq!(count_sentences("Wait... what"), 2);
        assert_eq!(count_sentences("One sentence."), 1);
        assert_eq!(count_sentences("No terminal punctuation"), 1);
        assert_eq!(count_sentences("\"Stop!\" he said."), 2);
        assert_eq!(count_sentences("Hi. ."), 1);
        assert_eq!(count_sentences("A. B. C."), 3);
        assert_eq!(count_sentences("!!!"), 0);
        assert_eq!(count_sentences("   "), 0);
    }

    #[test]
    fn truncate_keeps_first_sentences() {
        assert_eq!(
            truncate_sentences("A one. A two. A three.", 2),
            "A one. A two."
        );
        assert_eq!(truncate_sentences("Only one.", 2), "Only one.");
        assert_eq!(
            truncate_sentences("He said \"go!\" Then left. Then came back.", 2),
            "He said \"go!\" Then left."
        );
    }

    #[test]
    fn prompt_contains_all_inputs_and_is_deterministic() {
        let persona = test_persona();
        let scenario = test_scenario();
        let emotion = EmotionCategory::new("joy");
        let prompt = build_prompt(&persona, &scenario, &emotion);
        for value in persona.attribute_map().values() {
            assert!(prompt.contains(value.as_str()), "missing {value}");
        }
        for element in [
            &scenario.location,
            &scenario.activity,
            &scenario.interlocutor,
            &scenario.medium,
        ] {
            assert!(prompt.contains(element.as_str()));
        }
        for descriptor in &scenario.style {
            assert!(prompt.contains(descriptor.as_str()));
        }
        assert!(prompt.contains("joy"));
        assert!(prompt.contains("at most 2 short sentences"));
        assert_eq!(prompt, build_prompt(&persona, &scenario, &emotion));
    }

    #[test]
    fn plausibility_parse_normalizes_noise() {
        assert_eq!(
            PlausibilityLabel::parse("natural"),
            Some(PlausibilityLabel::Natural)
        );
        assert_eq!(
            PlausibilityLabel::parse("IMPLAUSIBLE."),
            Some(PlausibilityLabel::Implausible)
        );
        assert_eq!(
            PlausibilityLabel::parse("  Rare, but plausible!  "),
            Some(PlausibilityLabel::RareButPlausible)
        );
        assert_eq!(
            PlausibilityLabel::parse("rare_but_plausible"),
            Some(PlausibilityLabel::RareButPlausible)
        );
        assert_eq!(
            PlausibilityLabel::parse("this persona seems fine to me"),
            None
        );
        assert_eq!(PlausibilityLabel::parse(""), None);
    }

    #[test]
    fn rubric_parse_accepts_quadruples_and_rejects_out_of_range() {
        assert_eq!(
            RubricScore::parse("5,5,5,5"),
            Some(RubricScore {
                emotion_match: 5,
                grammaticality: 5,
                lexical_diversity: 5,
                structure_logic: 5
            })
        );
        assert_eq!(
            RubricScore::parse(" 4, 5, 3, 4 "),
            Some(RubricScore {
                emotion_match: 4,
                grammaticality: 5,
                lexical_diversity: 3,
                structure_logic: 4
            })
        );
        assert_eq!(RubricScore::parse("0,5,5,5"), None);
        assert_eq!(RubricScore::parse("6,5,5,5"), None);
        assert_eq!(RubricScore::parse("5,5,5"), None);
        assert_eq!(RubricScore::parse("5,5,5,5,5"), None);
        assert_eq!(RubricScore::parse("great text, well done"), None);
    }

    #[test]
    fn generation_request_validation() {
        let req = GenerationRequest {
            persona: test_persona(),
            scenario: test_scenario(),
            emotion: EmotionCategory::new("joy"),
            model: "test".into(),
            temperature: 2.5,
            max_sentences: 0,
        };
        match req.validate() {
            Err(Error::Validation(problems)) => assert_eq!(problems.len(), 2),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn retry_policy_bounds_transport_failures() {
        let mut calls = 0u32;
        let policy = RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 0,
        };
        let result: Result<()> = policy.run(|| {
            calls += 1;
            Err(Error::BackendUnavailable("down".into()))
        });
        assert!(matches!(result, Err(Error::BackendUnavailable(_))));
        assert_eq!(calls, 3);

        // Non-transport errors are not retried.
        let mut calls = 0u32;
        let result: Result<()> = policy.run(|| {
            calls += 1;
            Err(Error::UnparsableJudgment("x".into()))
        });
        assert!(matches!(result, Err(Error::UnparsableJudgment(_))));
        assert_eq!(calls, 1);
    }

    #[test]
    fn emotion_category_validation() {
        let set = vec!["joy".to_string(), "fear".to_string()];
        assert!(EmotionCategory::validated("joy", &set).is_ok());
        assert!(matches!(
            EmotionCategory::validated("disgust", &set),
            Err(Error::UnknownLabel(label)) if label == "disgust"
        ));
    }

    #[test]
    fn generate_text_is_deterministic_and_within_budget() {
        let backend = MockBackend::new(7);
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        let req = GenerationRequest {
            persona: test_persona(),
            scenario: test_scenario(),
            emotion: EmotionCategory::new("joy"),
            model: "mock-chat".into(),
            temperature: 1.2,
            max_sentences: 2,
        };
        let a = generate_text(&req, "s-000001", &ctx).unwrap();
        let b = generate_text(&req, "s-000001", &ctx).unwrap();
        assert_eq!(a, b);
        assert!(a.text.contains("joy"), "text: {}", a.text);
        assert!(count_sentences(&a.text) <= 2);
        assert!(!a.truncated);
        assert_eq!(a.created_at, "1970-01-01T00:00:00Z");
    }

    #[test]
    fn overlong_generation_retries_once_then_truncates() {
        let backend = MockBackend::new(7).with_forced_sentences(4);
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        let req = GenerationRequest {
            persona: test_persona(),
            scenario: test_scenario(),
            emotion: EmotionCategory::new("fear"),
            model: "mock-chat".into(),
            temperature: 1.2,
            max_sentences: 2,
        };
        let sample = generate_text(&req, "s-000001", &ctx).unwrap();
        assert_eq!(
            backend.calls(),
            2,
            "one original call plus one constrained retry"
        );
        assert!(sample.truncated);
        assert_eq!(count_sentences(&sample.text), 2);
    }

    #[test]
    fn transport_failure_surfaces_after_bounded_retries() {
        let backend = MockBackend::new(7).with_fail_first(u32::MAX);
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy {
                max_attempts: 2,
                base_delay_ms: 0,
            },
            clock: Clock::Fixed,
        };
        let req = GenerationRequest {
            persona: test_persona(),
            scenario: test_scenario(),
            emotion: EmotionCategory::new("joy"),
            model: "mock-chat".into(),
            temperature: 1.2,
            max_sentences: 2,
        };
        let err = generate_text(&req, "s-000001", &ctx).unwrap_err();
        assert!(matches!(err, Error::BackendUnavailable(_)));
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn blank_completions_raise_empty_completion() {
        let backend = MockBackend::new(7).with_generation_reply("   ");
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy {
                max_attempts: 2,
                base_delay_ms: 0,
            },
            clock: Clock::Fixed,
        };
        let req = GenerationRequest {
            persona: test_persona(),
            scenario: test_scenario(),
            emotion: EmotionCategory::new("joy"),
            model: "mock-chat".into(),
            temperature: 1.2,
            max_sentences: 2,
        };
        assert!(matches!(
            generate_text(&req, "s-000001", &ctx),
            Err(Error::EmptyCompletion { attempts: 2 })
        ));
    }

    #[test]
    fn judge_plausibility_parses_and_reprompts() {
        let persona = test_persona();
        let backend = MockBackend::new(7).with_plausibility_reply("natural");
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        assert_eq!(
            judge_plausibility(&JudgeSubject::Persona(&persona), "mock-chat", &ctx).unwrap(),
            PlausibilityLabel::Natural
        );

        let noisy = MockBackend::new(7).with_plausibility_reply("IMPLAUSIBLE.");
        let ctx = GenContext {
            backend: &noisy,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        assert_eq!(
            judge_plausibility(&JudgeSubject::Persona(&persona), "mock-chat", &ctx).unwrap(),
            PlausibilityLabel::Implausible
        );

        let prose = MockBackend::new(7).with_plausibility_reply("Seems like a nice person.");
        let ctx = GenContext {
            backend: &prose,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        let err =
            judge_plausibility(&JudgeSubject::Persona(&persona), "mock-chat", &ctx).unwrap_err();
        assert!(matches!(err, Error::UnparsableJudgment(_)));
        assert_eq!(prose.calls(), 2, "one ask plus one stricter reprompt");
    }

    #[test]
    fn judge_rubric_parses_and_rejects_out_of_range() {
        let sample = EmotionSample {
            id: "s-000001".into(),
            persona_id: "p-000001".into(),
            emotion: EmotionCategory::new("joy"),
            text: "I can hardly believe it!".into(),
            scenario: test_scenario(),
            model: "mock-chat".into(),
            temperature: 1.2,
            truncated: false,
            plausibility: None,
            rubric: None,
            created_at: "1970-01-01T00:00:00Z".into(),
            extra: serde_json::Map::new(),
        };
        let backend = MockBackend::new(7).with_rubric_reply("5,5,5,5");
        let ctx = GenContext {
            backend: &backend,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        let score = judge_rubric(&sample, "mock-chat", &ctx).unwrap();
        assert_eq!(score.values(), [5, 5, 5, 5]);

        let bad = MockBackend::new(7).with_rubric_reply("6,5,5,5");
        let ctx = GenContext {
            backend: &bad,
            retry: RetryPolicy::default(),
            clock: Clock::Fixed,
        };
        assert!(matches!(
            judge_rubric(&sample, "mock-chat", &ctx),
            Err(Error::UnparsableJudgment(_))
        ));
        assert_eq!(bad.calls(), 2);
    }

    #[test]
    fn subject_in_scene_includes_scene_summary() {
        let persona = test_persona();
        let scenario = test_scenario();
        let description = JudgeSubject::PersonaInScene(&persona, &scenario).describe();
        assert!(description.contains("Café"));
        assert!(description.contains("Freelancers"));
    }
}
