"""Backend request templates.

Each template names its slots; a request is valid only when it fills exactly
those slots. Context fields render one per labeled line so offline backends
and audit tooling can recover them from the rendered prompt alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvariantViolation

TYPE_NAMES = "cause, comparison, extent, consequence, procedural, concept"

QUD_GENERATE_BODY = """\
Generate {n_questions} natural, research-oriented questions that arise from \
viewing this figure together with the paper abstract, where the answers are \
found in the paper text.

Scenario: an inquisitive researcher who has read the abstract of this paper \
views this figure and its caption. What would they naturally wonder about \
what the figure shows?

Requirements:
1. Questions arise from viewing the figure: reference what is visible \
(trends, differences, patterns, values, annotations), express genuine \
curiosity (why, how, what), and cannot be answered from the caption alone.
2. Answers come from the paper text: 2-4 substantive sentences giving \
interpretation, cause, or context. Provide insight, do not restate the question.
3. Natural research language: write from a researcher's perspective, match \
the paper's sophistication level, and vary question structure.
4. Specific to this figure: name concrete visual elements (lines, bars, \
regions, numerical values) and use terms from the provided paragraphs, not \
generic placeholders.

Question type examples, good and bad:
- cause: "Why does the accuracy drop sharply after 100 tokens in the left panel?"
- comparison: "How does the baseline's behavior differ from the proposed method in the high-resource setting?"
- extent: "To what extent does the model's perplexity improve with additional training data?"
- consequence: "What happens to the loss curve when the learning rate exceeds 0.01?"
- procedural: "How does the model achieve the performance plateau visible around epoch 50?"
- concept: "What does the shaded region in the time series represent in terms of model uncertainty?"
- bad: "What does the figure show?" (too generic); "What is the value of the blue line at x=5?" (trivial)

Paper: {paper_name}
Abstract: {abstract}
Figure: {figure_number}
Caption: {caption}
Referenced in {reference_count} distinct sections.
Other figures in the paper: {other_figures}
Text discussing this figure:
{paragraphs}

Return a JSON array of objects with fields: question, answer, answer_source, \
question_type (one of """ + TYPE_NAMES + """), difficulty (medium or hard)."""

REPHRASE_BODY = """\
Your goal is to produce DIVERSE rephrases that a real researcher might ask, \
not synonym swaps.

Given a question-answer pair about a scientific paper figure, produce \
{n_variants} rephrased variants. Each variant must be structurally different \
from the others.

Diversity requirements:
- Variant 1: restructure the question substantially (change from direct to \
embedded question, split into sub-questions, or approach from a different \
angle while asking about the same thing). Keep the answer CONCISE: 1-2 \
sentences, about 20-30 words.
- Variant 2: use a notably different framing or perspective (if the original \
asks "why does X increase", ask "what explains the upward trend in X"). Make \
the answer DETAILED: 4-5 sentences, about 60-80 words, with context and \
implications.
- Do not just swap synonyms. "Why does X" to "What causes X" is not enough \
variation.
- The variants must have noticeably different answer lengths and structures.

Preserve the factual content, the figure references, and the question type \
intent ({question_type}).

Caption: {caption}
Source excerpt: {source_excerpt}
Original question: {question}
Original answer: {answer}

Return a JSON array of objects with fields: question, answer."""

GROUNDING_CHECK_BODY = """\
Check whether an answer to a scientific question is grounded in the provided \
text.

Criteria:
1. Every claim in the answer must be traceable to the caption and/or the \
source text.
2. The answer must be concrete and informative. Non-answers like "can be \
identified by looking at the figure" are NOT grounded.

Caption: {caption}
Source text: {source_text}
Question: {question}
Answer: {answer}

Return JSON with fields: grounded (boolean), reason (brief explanation)."""

JUDGE_BODY = """\
You are an expert scientist evaluating a question-answer pair grounded in a \
research paper figure.

Evaluate the pair for usefulness, clarity, correctness, and whether the \
answer truly follows from the cited source text. We want questions that are \
not answered directly by the figure or its caption, but are triggered by the \
figure and answered later in the paper.

Title: {title}
Paper: {paper_id}
Figure: {figure_info}
Source paragraphs: {source_content}
Question: {question}
Answer: {answer}

Look at the figure image provided. Consider the paper's key research \
questions, then read the figure and caption, the question, the answer, and \
the cited source paragraphs. Score every dimension:
1. q-grammar (grammar and clarity): "perfect" | "minor" | "major"
2. salience: "very" | "somewhat" | "not"
3. answer_quality: "4" (excellent) | "3" (good) | "2" (fair) | "1" (poor)
4. answer-correct: "yes" | "partial" | "no"
5. figure-useful: "essential" | "helpful" | "not"
6. answered-by-figure: "yes" | "no"
7. figure-type: "result" | "method" | "data" | "comparison" | "other"

Return JSON with keys: q-grammar, salience, answer_quality, answer-correct, \
figure-useful, answered-by-figure, figure-type, notes."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    slots: tuple[str, ...]
    body: str

    def render(self, text_slots: dict[str, str]) -> str:
        given = set(text_slots)
        expected = set(self.slots)
        if given != expected:
            missing = sorted(expected - given)
            extra = sorted(given - expected)
            raise InvariantViolation(
                f"template {self.template_id}: missing slots {missing}, extra {extra}")
        return self.body.format(**text_slots)


TEMPLATES: dict[str, PromptTemplate] = {
    "qud_generate": PromptTemplate(
        template_id="qud_generate",
        slots=("n_questions", "paper_name", "abstract", "figure_number",
               "caption", "reference_count", "other_figures", "paragraphs"),
        body=QUD_GENERATE_BODY,
    ),
    "rephrase": PromptTemplate(
        template_id="rephrase",
        slots=("n_variants", "question_type", "caption", "source_excerpt",
               "question", "answer"),
        body=REPHRASE_BODY,
    ),
    "grounding_check": PromptTemplate(
        template_id="grounding_check",
        slots=("caption", "source_text", "question", "answer"),
        body=GROUNDING_CHECK_BODY,
    ),
    "judge": PromptTemplate(
        template_id="judge",
        slots=("title", "paper_id", "figure_info", "source_content",
               "question", "answer"),
        body=JUDGE_BODY,
    ),
}

# Decoding defaults: deterministic for checking/judging, sampled for generation.
DECODING_DEFAULTS: dict[str, dict] = {
    "qud_generate": {"temperature": 0.7, "max_tokens": 2048},
    "rephrase": {"temperature": 0.7, "max_tokens": 1024},
    "grounding_check": {"temperature": 0.0, "max_tokens": 256},
    "judge": {"temperature": 0.0, "max_tokens": 512},
}


@dataclass
class BackendRequest:
    """A fully slotted request against one template."""

    template_id: str
    text_slots: dict[str, str]
    image_refs: list[str] = field(default_factory=list)
    decoding: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.template_id not in TEMPLATES:
            raise InvariantViolation(f"unknown template {self.template_id!r}")
        if not self.decoding:
            self.decoding = dict(DECODING_DEFAULTS[self.template_id])

    @property
    def template(self) -> PromptTemplate:
        return TEMPLATES[self.template_id]

    def render(self) -> str:
        return self.template.render(self.text_slots)
