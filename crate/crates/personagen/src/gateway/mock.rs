//! Deterministic offline LLM backend.
//!
//! Replies are pure functions of (backend seed, request content), so a
//! fixed seed and config make every run byte-reproducible. Test hooks allow
//! forcing fixed replies, over-long generations, and transport failures.

use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Prng;

use super::{ChatRequest, LlmBackend, GENERATION_SYSTEM, PLAUSIBILITY_SYSTEM, RUBRIC_SYSTEM};

const OPENERS: [&str; 8] = [
    "Honestly",
    "Right now",
    "Somehow",
    "Today",
    "Deep down",
    "Out of nowhere",
    "To be fair",
    "At this moment",
];

const SUBJECTS: [&str; 8] = [
    "this whole scene",
    "what just happened",
    "the news I got",
    "everything around me",
    "this conversation",
    "the way things turned out",
    "being here",
    "all of this",
];

const LINKS: [&str; 5] = [
    "fills me with",
    "leaves me sitting with",
    "brings out so much",
    "stirs up nothing but",
    "wraps me in",
];

const TAILS: [&str; 8] = [
    "I can hardly put it into words.",
    "My heart will not slow down.",
    "I keep turning it over in my head.",
    "I do not know what comes next.",
    "Part of me wants to tell everyone.",
    "It is hard to explain to anyone else.",
    "I need a moment to take it in.",
    "Nobody around me seems to notice.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Generate,
    Plausibility,
    Rubric,
}

/// Seed-driven stand-in for a chat-completions endpoint.
#[derive(Debug)]
pub struct MockBackend {
    seed: u64,
    generation_reply: Option<String>,
    plausibility_reply: Option<String>,
    rubric_reply: Option<String>,
    forced_sentences: Option<usize>,
    fail_first: u32,
    calls: AtomicU32,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            generation_reply: None,
            plausibility_reply: None,
            rubric_reply: None,
            forced_sentences: None,
            fail_first: 0,
            calls: AtomicU32::new(0),
        }
    }

    /// Return this text verbatim for every generation request.
    pub fn with_generation_reply(mut self, reply: &str) -> Self {
        self.generation_reply = Some(reply.to_string());
        self
    }

    /// Return this text verbatim for every plausibility request.
    pub fn with_plausibility_reply(mut self, reply: &str) -> Self {
        self.plausibility_reply = Some(reply.to_string());
        self
    }

    /// Return this text verbatim for every rubric request.
    pub fn with_rubric_reply(mut self, reply: &str) -> Self {
        self.rubric_reply = Some(reply.to_string());
        self
    }

    /// Force generated replies to contain exactly this many sentences,
    /// ignoring the prompt's sentence budget (exercises truncation paths).
    pub fn with_forced_sentences(mut self, sentences: usize) -> Self {
        self.forced_sentences = Some(sentences);
        self
    }

    /// Fail the first `n` calls with a transport error (exercises retry
    /// paths).
    pub fn with_fail_first(mut self, n: u32) -> Self {
        self.fail_first = n;
        self
    }

    /// Number of `complete` calls received so far.
    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::Relaxed)
    }

    fn task_of(req: &ChatRequest) -> Task {
        if req.system == PLAUSIBILITY_SYSTEM {
            Task::Plausibility
        } else if req.system == RUBRIC_SYSTEM {
            Task::Rubric
        } else {
            debug_assert_eq!(req.system, GENERATION_SYSTEM);
            Task::Generate
        }
    }

    /// Deterministic per-request random stream: hash of (seed, request).
    fn reply_rng(&self, req: &ChatRequest) -> Prng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(req.system.as_bytes());
        hasher.update([0u8]);
        hasher.update(req.user.as_bytes());
        let digest = hasher.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields >= 8 bytes"));
        crate::rng::seeded(seed)
    }

    fn auto_generation(&self, req: &ChatRequest) -> String {
        let emotion = extract_between(&req.user, "the emotion \"", "\"").unwrap_or("something");
        let budget = extract_budget(&req.user).unwrap_or(super::DEFAULT_MAX_SENTENCES);
        let mut rng = self.reply_rng(req);
        let total = self
            .forced_sentences
            .unwrap_or_else(|| rng.gen_range(1..=budget.max(1)));
        let opener = OPENERS[rng.gen_range(0..OPENERS.len())];
        let subject = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let link = LINKS[rng.gen_range(0..LINKS.len())];
        let end = if rng.gen_bool(0.3) { "!" } else { "." };
        let mut sentences = vec![format!("{opener}, {subject} {link} {emotion}{end}")];
        for _ in 1..total {
            sentences.push(TAILS[rng.gen_range(0..TAILS.len())].to_string());
        }
        sentences.join(" ")
    }

    fn auto_plausibility(&self, req: &ChatRequest) -> String {
        let mut rng = self.reply_rng(req);
        let u: f64 = rng.gen();
        if u < 0.85 {
            "natural"
        } else if u < 0.95 {
            "rare but plausible"
        } else {
            "implausible"
        }
        .to_string()
    }

    fn auto_rubric(&self, req: &ChatRequest) -> String {
        let mut rng = self.reply_rng(req);
        let mut score = || rng.gen_range(3..=5u8);
        format!("{},{},{},{}", score(), score(), score(), score())
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        if call < self.fail_first {
            return Err(Error::BackendUnavailable(
                "mock transport failure (forced)".into(),
            ));
        }
        let reply = match Self::task_of(req) {
            Task::Generate => self
                .generation_reply
                .clone()
                .unwrap_or_else(|| self.auto_generation(req)),
            Task::Plausibility => self
                .plausibility_reply
                .clone()
                .unwrap_or_else(|| self.auto_plausibility(req)),
            Task::Rubric => self
                .rubric_reply
                .clone()
                .unwrap_or_else(|| self.auto_rubric(req)),
        };
        Ok(reply)
    }

    fn name(&self) -> &str {
        "mock"
    }
}

fn extract_between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(&text[start..end])
}

fn extract_budget(text: &str) -> Option<usize> {
    let start = text.find("at most ")? + "at most ".len();
    let digits: String = text[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}
