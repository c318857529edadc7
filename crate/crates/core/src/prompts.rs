//! Prompt templates for every task and parsing of model replies back
//! into labels.
//!
//! The templates are fixed strings with bracketed slots; each template
//! byte-matches a golden file under `templates/`. Filling is single
//! pass: payload text is inserted verbatim and never rescanned, so a
//! payload containing a slot marker renders literally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, Task};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("payload must be nonempty")]
    EmptyPayload,
    #[error("ref_key '{0}' does not occur in the citation text")]
    RefKeyMissing(String),
    #[error("n_classes must be 2 or 4, got {0}")]
    InvalidClassCount(u8),
    #[error("word sets overlap: {0:?}")]
    OverlappingWordSets(Vec<String>),
    #[error("both word sets are empty")]
    EmptyWordSets,
    #[error("could not parse reply into a label: {raw:?}")]
    Unparsed { raw: String },
}

pub const AC_CLASSIFY_TEMPLATE: &str = "You are a classifier that determines whether text is human-written or AI-edited. Respond with exactly one word: either 'human' for human-written text or 'ChatGPT' for AI-written text. Be as accurate as possible.";

pub const AI_GENERATE_TEMPLATE: &str =
    "Write an abstract for a statistical paper with this title: [paper title].";

pub const HUMAI_EDIT_TEMPLATE: &str = "Given the following abstract, make some revisions. Make sure not to change the length too much. [original abstract]";

pub const CC4_CLASSIFY_TEMPLATE: &str = "The content in the text comes from a paragraph in an academic paper A that includes citations. Please classify the citation [Reference Key] appearing in the following text into one of the categories:\n- Background (citations that include descriptions of the research background, summaries of previous or recent studies and methods in a general way, and examples to support and illustrate points. For example, [Example 1],\n- Comparison (citations that compare methods or results with those of this paper. For example, [Example 2],\n- Fundamental idea (citations about the previous work that inspired or provided ideas for this paper. For Example, [Example 3],\n- Technical basis (citations of important tools, methods, data, and other resources used in this paper. For example, [Example 4].\n\nText: [Citation text]\n\nPlease reply only with one of the following: Background, Comparison, Fundamental idea, or Technical basis.";

pub const CC2_CLASSIFY_TEMPLATE: &str = "The content in the text comes from a paragraph in an academic paper A that includes citations. Please classify the citation [Reference Key] appearing in the following text into one of the categories:\n- Background (citations that include descriptions of the research background, summaries of previous or recent studies and methods in a general way, and examples to support and illustrate points. For example, [Example 1],\n- Comparison (citations that compare methods or results with those of this paper. For example, [Example 2],\n- Fundamental idea (citations about the previous work that inspired or provided ideas for this paper. For Example, [Example 3],\n- Technical basis (citations of important tools, methods, data, and other resources used in this paper. For example, [Example 4].\nFurthermore, we consider Background or Comparison as Incidental, and Fundamental idea or Technical basis as Important.\n\nText: [Citation text]\n\nPlease reply only with one of the following: Important or Incidental.";

pub const HYBRID_AC_CLASSIFY_TEMPLATE: &str = "You are a classifier that determines whether text is human-written or AI-edited. You will be given academic abstracts that are either written by human or edited by AI.\n\nWord distribution analysis:\n\nWord More Common In\n[word table]\n\nRespond with exactly one word: either 'human' for human-written text or 'ChatGPT' for AI-written text. Be as accurate as possible.";

/// The six template kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptTask {
    AcClassify,
    AiGenerate,
    HumAiEdit,
    Cc4Classify,
    Cc2Classify,
    HybridAcClassify,
}

impl PromptTask {
    pub const ALL: [PromptTask; 6] = [
        PromptTask::AcClassify,
        PromptTask::AiGenerate,
        PromptTask::HumAiEdit,
        PromptTask::Cc4Classify,
        PromptTask::Cc2Classify,
        PromptTask::HybridAcClassify,
    ];

    pub fn body(self) -> &'static str {
        match self {
            PromptTask::AcClassify => AC_CLASSIFY_TEMPLATE,
            PromptTask::AiGenerate => AI_GENERATE_TEMPLATE,
            PromptTask::HumAiEdit => HUMAI_EDIT_TEMPLATE,
            PromptTask::Cc4Classify => CC4_CLASSIFY_TEMPLATE,
            PromptTask::Cc2Classify => CC2_CLASSIFY_TEMPLATE,
            PromptTask::HybridAcClassify => HYBRID_AC_CLASSIFY_TEMPLATE,
        }
    }

    /// Name of the golden file the body must byte-match.
    pub fn golden_file(self) -> &'static str {
        match self {
            PromptTask::AcClassify => "ac_classify.txt",
            PromptTask::AiGenerate => "ai_generate.txt",
            PromptTask::HumAiEdit => "humai_edit.txt",
            PromptTask::Cc4Classify => "cc4_classify.txt",
            PromptTask::Cc2Classify => "cc2_classify.txt",
            PromptTask::HybridAcClassify => "hybrid_ac_classify.txt",
        }
    }
}

/// A template with its task tag.
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub task: PromptTask,
    pub body: &'static str,
}

pub fn template(task: PromptTask) -> PromptTemplate {
    PromptTemplate { task, body: task.body() }
}

/// Fill bracketed slots in one left-to-right pass. Inserted payloads
/// are skipped over, never rescanned.
fn fill(template: &str, bindings: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = bindings
            .iter()
            .filter_map(|&(marker, value)| rest.find(marker).map(|i| (i, marker, value)))
            .min_by_key(|&(i, _, _)| i);
        match next {
            Some((i, marker, value)) => {
                out.push_str(&rest[..i]);
                out.push_str(value);
                rest = &rest[i + marker.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// The authorship-classification prompt, identical on every call.
pub fn render_ac_prompt() -> String {
    AC_CLASSIFY_TEMPLATE.to_string()
}

/// Which abstract variant to request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenerationKind {
    /// Fresh abstract written from the paper title.
    Ai,
    /// Light revision of the original abstract.
    HumAi,
}

/// Prompt asking a model to produce an abstract variant. The payload
/// is the paper title (AI) or the original abstract (humAI).
pub fn render_generation_prompt(kind: GenerationKind, payload: &str) -> Result<String, PromptError> {
    if payload.is_empty() {
        return Err(PromptError::EmptyPayload);
    }
    Ok(match kind {
        GenerationKind::Ai => fill(AI_GENERATE_TEMPLATE, &[("[paper title]", payload)]),
        GenerationKind::HumAi => fill(HUMAI_EDIT_TEMPLATE, &[("[original abstract]", payload)]),
    })
}

/// One labeled example sentence per citation category, spliced into
/// the citation-classification prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryExamples {
    pub background: String,
    pub comparison: String,
    pub fundamental_idea: String,
    pub technical_basis: String,
}

impl Default for CategoryExamples {
    fn default() -> Self {
        CategoryExamples {
            background: "Estimation of current and future cancer mortality broken down by geographic area (state) and tumor has been discussed in a number of recent articles, including those by Tiwari et al. (2004) ...".to_string(),
            comparison: "Another way of determining the number of neuron pairs is to follow Medeiros and Veiga (2000b) and Medeiros et al. (2002) and use a sequence of...".to_string(),
            fundamental_idea: "The proposed class of discrete transformation survival models is originally motivated from the continuous generalized odds-rate model by Dabrowska and Doskum (1988a) with time-invarying covariate and Zeng and Lin (2006) for...".to_string(),
            technical_basis: "We solve this system numerically via the Euler method (Protter and Talay 1997;Jacod 2004) with a time-step of one day...".to_string(),
        }
    }
}

/// Citation-classification prompt for the 2-class or 4-class task.
pub fn render_cc_prompt(
    n_classes: u8,
    citation_text: &str,
    ref_key: &str,
    examples: &CategoryExamples,
) -> Result<String, PromptError> {
    if !citation_text.contains(ref_key) {
        return Err(PromptError::RefKeyMissing(ref_key.to_string()));
    }
    let template = match n_classes {
        2 => CC2_CLASSIFY_TEMPLATE,
        4 => CC4_CLASSIFY_TEMPLATE,
        other => return Err(PromptError::InvalidClassCount(other)),
    };
    Ok(fill(
        template,
        &[
            ("[Reference Key]", ref_key),
            ("[Example 1]", &examples.background),
            ("[Example 2]", &examples.comparison),
            ("[Example 3]", &examples.fundamental_idea),
            ("[Example 4]", &examples.technical_basis),
            ("[Citation text]", citation_text),
        ],
    ))
}

/// Authorship prompt augmented with the trained word table. AI-leaning
/// words come first, then human-leaning words, each block sorted; rows
/// read "word ChatGPT" or "word Human".
pub fn render_hybrid_prompt(
    s1_words: &[String],
    s2_words: &[String],
) -> Result<String, PromptError> {
    if s1_words.is_empty() && s2_words.is_empty() {
        return Err(PromptError::EmptyWordSets);
    }
    let overlap: Vec<String> = s1_words
        .iter()
        .filter(|w| s2_words.contains(w))
        .cloned()
        .collect();
    if !overlap.is_empty() {
        return Err(PromptError::OverlappingWordSets(overlap));
    }

    let mut rows = Vec::with_capacity(s1_words.len() + s2_words.len());
    let mut s2 = s2_words.to_vec();
    s2.sort();
    for w in &s2 {
        rows.push(format!("{w} ChatGPT"));
    }
    let mut s1 = s1_words.to_vec();
    s1.sort();
    for w in &s1 {
        rows.push(format!("{w} Human"));
    }
    let table = rows.join("\n");
    Ok(fill(HYBRID_AC_CLASSIFY_TEMPLATE, &[("[word table]", &table)]))
}

/// Reply vocabulary for exact matching: normalized alias -> label.
fn exact_aliases(task: Task) -> &'static [(&'static str, Label)] {
    match task {
        Task::Ac1 | Task::Ac2 => &[
            ("human", Label::Hum),
            ("hum", Label::Hum),
            ("chatgpt", Label::Ai),
            ("ai", Label::Ai),
        ],
        Task::Cc1 => &[
            ("background", Label::Bg),
            ("bg", Label::Bg),
            ("comparison", Label::Cp),
            ("cp", Label::Cp),
            ("fundamental idea", Label::Fi),
            ("fi", Label::Fi),
            ("technical basis", Label::Tb),
            ("tb", Label::Tb),
        ],
        Task::Cc2 => &[
            ("important", Label::S),
            ("significant", Label::S),
            ("s", Label::S),
            ("incidental", Label::I),
            ("i", Label::I),
        ],
    }
}

/// Needles for the substring fallback. Single letters are excluded:
/// they would match inside ordinary prose.
fn substring_needles(task: Task) -> &'static [(&'static str, Label)] {
    match task {
        Task::Ac1 | Task::Ac2 => &[
            ("human", Label::Hum),
            ("chatgpt", Label::Ai),
            ("ai", Label::Ai),
        ],
        Task::Cc1 => &[
            ("background", Label::Bg),
            ("bg", Label::Bg),
            ("comparison", Label::Cp),
            ("cp", Label::Cp),
            ("fundamental idea", Label::Fi),
            ("fi", Label::Fi),
            ("technical basis", Label::Tb),
            ("tb", Label::Tb),
        ],
        Task::Cc2 => &[
            ("important", Label::S),
            ("significant", Label::S),
            ("incidental", Label::I),
        ],
    }
}

/// Lowercase, trim surrounding whitespace/punctuation, collapse inner
/// whitespace runs to single spaces.
fn normalize_reply(raw: &str) -> String {
    let trimmed = raw.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let mut out = String::with_capacity(trimmed.len());
    let mut in_space = false;
    for ch in trimmed.chars() {
        if ch.is_whitespace() {
            if !in_space && !out.is_empty() {
                out.push(' ');
            }
            in_space = true;
        } else {
            in_space = false;
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Whether `needle` occurs in `haystack` bounded by non-alphabetic
/// characters (or the string edge) on both sides. Keeps "important"
/// from matching inside "unimportant".
fn contains_bounded(haystack: &str, needle: &str) -> bool {
    let mut start = 0;
    while let Some(i) = haystack[start..].find(needle) {
        let begin = start + i;
        let end = begin + needle.len();
        let ok_before = haystack[..begin]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphabetic());
        let ok_after = haystack[end..].chars().next().is_none_or(|c| !c.is_alphabetic());
        if ok_before && ok_after {
            return true;
        }
        start = begin + 1;
    }
    false
}

/// Map a raw model reply onto a task label. Exact match on the
/// normalized reply wins; otherwise the reply must contain exactly one
/// label word. Anything else is an Unparsed error carrying the raw
/// text, which downstream scoring counts against the model.
pub fn parse_label(raw: &str, task: Task) -> Result<Label, PromptError> {
    let normalized = normalize_reply(raw);

    for &(alias, label) in exact_aliases(task) {
        if normalized == alias {
            return Ok(label);
        }
    }

    let mut found: Vec<Label> = Vec::new();
    for &(needle, label) in substring_needles(task) {
        if contains_bounded(&normalized, needle) && !found.contains(&label) {
            found.push(label);
        }
    }
    match found.as_slice() {
        [one] => Ok(*one),
        _ => Err(PromptError::Unparsed { raw: raw.to_string() }),
    }
}

/// Like [`parse_label`] but folding failures into [`Label::Unparsed`].
pub fn label_or_unparsed(raw: &str, task: Task) -> Label {
    parse_label(raw, task).unwrap_or(Label::Unparsed)
}
