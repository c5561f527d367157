"""Prompt construction and guidance parsing for the LLM interface."""

from __future__ import annotations

import enum
import math
import re
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from dirfuzz.choice import Guidance, Origin
from dirfuzz.errors import EmptyCallingCode, NoCases, NothingParsed

TOKEN_BUDGET = 12_800
CHARS_PER_TOKEN = 4

INIT_QUESTION = (
    "Above is the source code that may call function {target}, which system calls "
    "may trigger the call path of function {target}?"
)
FEEDBACK_HEADER = (
    "Above is the source code that may call the target function {target}, in testing "
    "procedure we found the following system call programs reach functions that is "
    "close to the target function:"
)
FEEDBACK_QUESTION = (
    "Generate a list of system calls that if the probability of generating such system "
    "calls in test cases is increased, the fuzzing process is more possible to reach our "
    "target function: {target}?"
)
TRUNCATION_MARKER = "/* [truncated: {n} earlier snippet(s) omitted] */"


class PromptKind(str, enum.Enum):
    INITIAL = "initial"
    FEEDBACK = "feedback"


@dataclass(frozen=True)
class PromptEnvelope:
    kind: PromptKind
    text: str
    token_estimate: int
    target: str
    truncated: bool = False
    budget: int = TOKEN_BUDGET


@dataclass(frozen=True)
class FeedbackCase:
    program: tuple[str, ...]
    covered_source: tuple[str, ...]


def estimate_tokens(text: str, chars_per_token: int = CHARS_PER_TOKEN) -> int:
    return math.ceil(len(text) / chars_per_token)


def _snippets(calling_code: str | Sequence[str]) -> list[str]:
    if isinstance(calling_code, str):
        return [calling_code] if calling_code else []
    return [s for s in calling_code if s]


def _fit_code(snippets: list[str], room_chars: int) -> tuple[str, bool]:
    """Drop snippets from the front until the code fits in ``room_chars``.

    When even the last snippet alone is too long, its tail is kept.
    """
    code = "\n\n".join(snippets)
    if len(code) <= room_chars:
        return code, False
    for dropped in range(1, len(snippets)):
        code = "\n\n".join([TRUNCATION_MARKER.format(n=dropped), *snippets[dropped:]])
        if len(code) <= room_chars:
            return code, True
    marker = TRUNCATION_MARKER.format(n=len(snippets) - 1)
    keep = room_chars - len(marker) - 2
    if keep > 0:
        return marker + "\n\n" + snippets[-1][-keep:], True
    return (marker if len(marker) <= room_chars else ""), True


def _assemble(code: str, rest: str) -> str:
    return f"{code}\n{rest}" if code else rest


def build_init_prompt(
    calling_code: str | Sequence[str],
    target: str,
    budget: int = TOKEN_BUDGET,
    chars_per_token: int = CHARS_PER_TOKEN,
) -> PromptEnvelope:
    """Calling code followed by the entry-syscall question."""
    snippets = _snippets(calling_code)
    if not snippets:
        warnings.warn("empty calling code; prompt is the bare question", EmptyCallingCode, stacklevel=2)
    question = INIT_QUESTION.format(target=target)
    room = budget * chars_per_token - len(question) - 1
    code, truncated = _fit_code(snippets, room)
    text = _assemble(code, question)
    est = estimate_tokens(text, chars_per_token)
    return PromptEnvelope(PromptKind.INITIAL, text, est, target, truncated or est > budget, budget)


def render_case(i: int, case: FeedbackCase) -> str:
    lines = [f"Test case {i}:", "program: " + " -> ".join(case.program), "covered code:"]
    lines.extend(case.covered_source)
    return "\n".join(lines)


def build_feedback_prompt(
    calling_code: str | Sequence[str],
    target: str,
    cases: Sequence[FeedbackCase],
    budget: int = TOKEN_BUDGET,
    chars_per_token: int = CHARS_PER_TOKEN,
) -> PromptEnvelope:
    """Calling code, the sampled close-area cases, then the guidance question.

    Over budget, whole cases are dropped from the end first, then calling
    code is cut from the front.
    """
    if not cases:
        warnings.warn("no feedback cases; case section left empty", NoCases, stacklevel=2)
    snippets = _snippets(calling_code)
    header = FEEDBACK_HEADER.format(target=target)
    question = FEEDBACK_QUESTION.format(target=target)
    limit = budget * chars_per_token
    code_len = len("\n\n".join(snippets))

    blocks = [render_case(i, c) for i, c in enumerate(cases, start=1)]
    truncated = False

    def body(bs: list[str]) -> str:
        return "\n\n".join([header, *bs, question]) if bs else f"{header}\n\n{question}"

    while blocks and code_len + 1 + len(body(blocks)) > limit:
        blocks.pop()
        truncated = True
    rest = body(blocks)
    code, cut = _fit_code(snippets, limit - len(rest) - 1)
    text = _assemble(code, rest)
    est = estimate_tokens(text, chars_per_token)
    return PromptEnvelope(PromptKind.FEEDBACK, text, est, target, truncated or cut or est > budget, budget)


# -- parsing -------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.S)
_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")
_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")


@dataclass(frozen=True)
class ParseResult:
    guidance: Guidance
    unknown: tuple[str, ...]


def render_syscall_list(names: Iterable[str]) -> str:
    return "[" + ", ".join(sorted(names)) + "]"


def parse_response(
    raw: str, known: Iterable[str], round: int = 0, origin: Origin = Origin.INITIAL
) -> ParseResult:
    """Extract known syscall names from a model response.

    Code fences and bracketed lists are preferred regions; without either,
    the whole text is scanned.  Raises NothingParsed when no known name
    is found.
    """
    known = set(known)
    regions = _FENCE_RE.findall(raw) + _BRACKET_RE.findall(raw)
    scan = regions if regions else [raw]
    found: dict[str, None] = {}
    unknown: dict[str, None] = {}
    for region in scan:
        for tok in _TOKEN_RE.findall(region):
            (found if tok in known else unknown)[tok] = None
    if not found and regions:
        # a list of unknowns may sit beside prose naming real syscalls
        for tok in _TOKEN_RE.findall(raw):
            if tok in known:
                found[tok] = None
    if not found:
        raise NothingParsed("response names no known syscall")
    return ParseResult(Guidance(frozenset(found), round, origin), tuple(unknown))


def parse_guidance(raw: str, known: Iterable[str], round: int = 0, origin: Origin = Origin.INITIAL) -> Guidance:
    return parse_response(raw, known, round, origin).guidance
