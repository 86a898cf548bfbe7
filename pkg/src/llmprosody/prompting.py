"""Assemble the full natural-language prompt sent to the completion backend.

A prompt is built from fixed parts (task description, value-scale
explanations, rules, response-format instructions), a set of worked examples
with reasoning, the optional context for the task mode, and the target text
with its words enumerated one per line.  The enumeration, and the requirement
that the response echo each index and word, is what keeps the model from
skipping or inventing words.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

from .errors import DataError
from .features import Word, tokenize_words
from .mapping import LlmScaleSuggestion
from .response import parse_response, serialize_suggestion


class InvalidSpec(DataError):
    """The prompt specification is internally inconsistent."""


class ExemplarFormatError(DataError):
    """An exemplar asset document is malformed."""


class Mode(str, Enum):
    NEUTRAL = "neutral"
    STYLE = "style"
    DIALOGUE = "dialogue"


@dataclass(frozen=True)
class Exemplar:
    """A worked example: optional context, target text, reasoning, values."""

    mode: Mode
    context: str | None
    target_text: str
    reasoning: str
    suggestion: LlmScaleSuggestion


DEFAULT_TASK_DESCRIPTION = """\
You assign prosody adjustment values to a sentence so that a speech
synthesizer can speak it appropriately. You set three values for the whole
utterance and three values for every word. You never hear any audio; decide
from the text and the given context alone."""

DEFAULT_SCALE_EXPLANATIONS = """\
Utterance-level values are integers from -5 to 5, where 0 means no change:
- duration: negative makes the whole utterance faster, positive slower.
- pitch: negative lowers the overall pitch, positive raises it.
- energy: negative makes the speech quieter, positive louder.
Word-level values are integers from 0 to 5, where 0 means no change:
- duration: stretches the word to give it weight.
- pitch: raises the word's pitch so it stands out.
- energy: makes the word louder than its neighbours."""

DEFAULT_RULES = (
    "Choose the values independently of the target voice; assume nothing about the speaker.",
    "Use 0 whenever no change is needed; most words need no change.",
    "Give exactly one WORD line for every listed word, in the listed order.",
    "Never skip a listed word and never add words that are not listed.",
    "Keep every value an integer inside its stated range.",
    "Emphasise words that carry new information or contrast; leave function words alone.",
)

DEFAULT_FORMAT_INSTRUCTIONS = """\
Answer in exactly this form and nothing else:
REASONING: <one or more lines explaining your choices>
GLOBAL: duration=<v> pitch=<v> energy=<v>
WORD <index> <word>: duration=<v> pitch=<v> energy=<v>
Write one WORD line per listed word, in ascending index order, repeating the
word after its index exactly as listed."""


def _render_context(mode: Mode, context: str | None) -> list[str]:
    if mode is Mode.STYLE:
        return [f"Target speaking style: {context}"]
    if mode is Mode.DIALOGUE:
        return [f"Previous dialogue line: {context}"]
    return []


def _render_word_list(words: tuple[Word, ...]) -> list[str]:
    lines = ["Words:"]
    lines.extend(f"{i} {word.surface}" for i, word in enumerate(words))
    return lines


@dataclass(frozen=True)
class PromptSpec:
    """Everything needed to build one prompt deterministically."""

    mode: Mode
    target_text: str
    context: str | None = None
    exemplars: tuple[Exemplar, ...] = field(default_factory=lambda: default_exemplars())
    rules: tuple[str, ...] = DEFAULT_RULES
    format_instructions: str = DEFAULT_FORMAT_INSTRUCTIONS
    scale_explanations: str = DEFAULT_SCALE_EXPLANATIONS


def validate_spec(spec: PromptSpec) -> None:
    if not tokenize_words(spec.target_text):
        raise InvalidSpec("target text contains no words")
    if spec.mode in (Mode.STYLE, Mode.DIALOGUE):
        if not spec.context or not spec.context.strip():
            raise InvalidSpec(f"{spec.mode.value} mode requires a non-empty context")
        if "\n" in spec.context:
            raise InvalidSpec("context must be a single line")
    elif spec.context is not None:
        raise InvalidSpec("neutral mode takes no context")
    if len(spec.exemplars) < 1:
        raise InvalidSpec("at least one exemplar is required")
    for k, exemplar in enumerate(spec.exemplars):
        words = tokenize_words(exemplar.target_text)
        keys = tuple(w.key for w in words)
        got = tuple(e.key for e in exemplar.suggestion.words)
        if keys != got:
            raise InvalidSpec(
                f"exemplar {k}: suggestion words {got} do not align with text words {keys}"
            )
        if exemplar.mode in (Mode.STYLE, Mode.DIALOGUE) and not exemplar.context:
            raise InvalidSpec(f"exemplar {k}: {exemplar.mode.value} exemplar lacks context")


def build_prompt(spec: PromptSpec) -> str:
    """Deterministic prompt text for ``spec`` (pure function, no environment reads)."""
    validate_spec(spec)
    parts: list[str] = [DEFAULT_TASK_DESCRIPTION, "", spec.scale_explanations, "", "Rules:"]
    parts.extend(f"{i}. {rule}" for i, rule in enumerate(spec.rules, start=1))
    parts.append("")
    parts.append("Examples:")
    for k, exemplar in enumerate(spec.exemplars, start=1):
        words = tokenize_words(exemplar.target_text)
        parts.append("")
        parts.append(f"Example {k}")
        parts.extend(_render_context(exemplar.mode, exemplar.context))
        parts.append(f"Text: {exemplar.target_text}")
        parts.extend(_render_word_list(words))
        parts.append("Response:")
        block = serialize_suggestion(exemplar.suggestion, words, exemplar.reasoning)
        parts.append(block.rstrip("\n"))
    parts.append("")
    parts.append(spec.format_instructions)
    parts.append("")
    parts.append("Now solve this task.")
    parts.extend(_render_context(spec.mode, spec.context))
    parts.append(f"Text: {spec.target_text}")
    parts.extend(_render_word_list(tokenize_words(spec.target_text)))
    parts.append("Response:")
    return "\n".join(parts) + "\n"


_RECORD_SEPARATOR = "---"


def parse_exemplars(document: str) -> tuple[Exemplar, ...]:
    """Parse an exemplar asset document.

    Each record is an optional ``CONTEXT: style|dialogue: <text>`` line, a
    ``TEXT: <target>`` line, then a grammar-valid response block
    (REASONING/GLOBAL/WORD lines); records are separated by ``---`` lines.
    """
    exemplars: list[Exemplar] = []
    records = [
        record
        for record in _split_records(document)
        if any(line.strip() for line in record)
    ]
    for number, record in enumerate(records, start=1):
        lines = [line for line in record]
        while lines and not lines[0].strip():
            lines.pop(0)
        mode = Mode.NEUTRAL
        context: str | None = None
        if lines and lines[0].startswith("CONTEXT:"):
            value = lines.pop(0)[len("CONTEXT:"):].strip()
            kind, sep, text = value.partition(":")
            kind = kind.strip().lower()
            if not sep or kind not in ("style", "dialogue") or not text.strip():
                raise ExemplarFormatError(
                    f"record {number}: CONTEXT must be 'style: <text>' or 'dialogue: <text>'"
                )
            mode = Mode(kind)
            context = text.strip()
        if not lines or not lines[0].startswith("TEXT:"):
            raise ExemplarFormatError(f"record {number}: missing TEXT: line")
        target_text = lines.pop(0)[len("TEXT:"):].strip()
        words = tokenize_words(target_text)
        if not words:
            raise ExemplarFormatError(f"record {number}: target text has no words")
        result = parse_response("\n".join(lines), words)
        if not result.ok or result.diagnostics:
            problems = "; ".join(str(d) for d in result.diagnostics) or "no suggestion"
            raise ExemplarFormatError(f"record {number}: invalid response block ({problems})")
        exemplars.append(
            Exemplar(
                mode=mode,
                context=context,
                target_text=target_text,
                reasoning=result.reasoning,
                suggestion=result.suggestion,
            )
        )
    if not exemplars:
        raise ExemplarFormatError("exemplar document contains no records")
    return tuple(exemplars)


def _split_records(document: str) -> list[list[str]]:
    records: list[list[str]] = [[]]
    for line in document.split("\n"):
        if line.strip() == _RECORD_SEPARATOR:
            records.append([])
        else:
            records[-1].append(line)
    return records


def serialize_exemplars(exemplars: tuple[Exemplar, ...]) -> str:
    """Render exemplars in the asset format (inverse of :func:`parse_exemplars`)."""
    blocks = []
    for exemplar in exemplars:
        lines = []
        if exemplar.mode is not Mode.NEUTRAL:
            lines.append(f"CONTEXT: {exemplar.mode.value}: {exemplar.context}")
        lines.append(f"TEXT: {exemplar.target_text}")
        words = tokenize_words(exemplar.target_text)
        lines.append(
            serialize_suggestion(exemplar.suggestion, words, exemplar.reasoning).rstrip("\n")
        )
        blocks.append("\n".join(lines))
    return ("\n" + _RECORD_SEPARATOR + "\n").join(blocks) + "\n"


@lru_cache(maxsize=1)
def _default_exemplars_cached() -> tuple[Exemplar, ...]:
    document = (
        resources.files("llmprosody").joinpath("assets/exemplars.txt").read_text("utf-8")
    )
    return parse_exemplars(document)


def default_exemplars() -> tuple[Exemplar, ...]:
    """The packaged set of ten worked examples covering all three modes."""
    return _default_exemplars_cached()
