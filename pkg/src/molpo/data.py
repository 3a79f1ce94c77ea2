"""Dataset records, instruction rendering, and the toy bilingual corpus.

Four JSONL record types flow through the pipeline: translation pairs,
preference triples (a gold output next to a synthetically corrupted one),
and labeled single-output examples derived from triples. Field names are
fixed — ``id, direction, source, target / preferred / dispreferred /
output, label`` — one UTF-8 JSON object per line, unknown fields rejected.

Prompts are rendered from two fixed instruction templates, one per
direction, that end at the response marker ``### Response:``. The caption
template appends the target directly after the marker; the molecule
template puts one space between marker and target, so the scored
completion for that direction begins with a space (consumers strip it
from generated text). Sources containing the marker are rejected because
the prompt/response boundary would become ambiguous.

The toy corpus replaces a web-scale corpus at desk scale: a closed grammar
of linear and methyl-branched carbon chains (lengths 1–10) optionally
carrying a hydroxyl, amino, or carboxyl group, each paired with a
templated caption. Captions and molecules are in bijection, and every
molecule passes valence checks.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from . import chem
from .errors import ContractError, DataError

__all__ = [
    "LANG2MOL", "MOL2LANG", "DIRECTIONS", "RESPONSE_MARKER",
    "LMPair", "PreferenceTriple", "KtoExample", "InstructionTemplate",
    "template_for", "render_instruction", "render_prompt", "render_example",
    "gen_toy_corpus", "toy_catalog", "corpus_alphabet",
    "corrupt_target", "corruption_generator",
    "build_triples", "triples_to_kto", "split_dataset",
    "read_pairs", "write_pairs", "read_triples", "write_triples",
    "read_kto", "write_kto",
]

logger = logging.getLogger(__name__)

LANG2MOL = "lang2mol"
MOL2LANG = "mol2lang"
DIRECTIONS = (LANG2MOL, MOL2LANG)

RESPONSE_MARKER = "### Response:"

PREFERRED_LABEL = "preferred"
DISPREFERRED_LABEL = "dispreferred"


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise DataError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


# --------------------------------------------------------------------------
# record types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LMPair:
    """One aligned translation pair."""

    id: str
    direction: str
    source: str
    target: str

    def __post_init__(self):
        _check_direction(self.direction)
        if not self.source or not self.target:
            raise DataError(f"pair {self.id!r}: source and target must be non-empty")
        if self.direction == LANG2MOL:
            try:
                chem.tokenize_smiles(self.target)
            except chem.TokenizeError as exc:
                raise DataError(
                    f"pair {self.id!r}: molecule target does not tokenize: {exc}"
                ) from exc


@dataclass(frozen=True)
class PreferenceTriple:
    """A source with a preferred (gold) and a dispreferred output."""

    id: str
    direction: str
    source: str
    preferred: str
    dispreferred: str

    def __post_init__(self):
        _check_direction(self.direction)
        if not self.source:
            raise DataError(f"triple {self.id!r}: source must be non-empty")
        if not self.preferred or not self.dispreferred:
            raise DataError(f"triple {self.id!r}: both outputs must be non-empty")

    @property
    def is_degenerate(self) -> bool:
        """True when both outputs coincide (kept, but worth counting)."""
        return self.preferred == self.dispreferred


@dataclass(frozen=True)
class KtoExample:
    """A single output whose desirability is known."""

    id: str
    direction: str
    source: str
    output: str
    label: str

    def __post_init__(self):
        _check_direction(self.direction)
        if self.label not in (PREFERRED_LABEL, DISPREFERRED_LABEL):
            raise DataError(f"example {self.id!r}: label must be "
                            f"'{PREFERRED_LABEL}' or '{DISPREFERRED_LABEL}'")
        if not self.source or not self.output:
            raise DataError(f"example {self.id!r}: source and output must be non-empty")


# --------------------------------------------------------------------------
# instruction templates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InstructionTemplate:
    """A fixed prompt layout ending at the response marker."""

    direction: str
    prompt_template: str   # contains exactly one {source} slot; ends at the marker
    target_separator: str  # text between the marker and the target, if any


_MOL2LANG_PROMPT = (
    "Below is an instruction that describes a task, paired with an input "
    "that provides further context.\n"
    "Write a response that appropriately completes the request.\n"
    "\n"
    "### Instruction: You are a researcher. You can come up captions based "
    "on your existing knowledge.\n"
    "Captions are given against the following input. You should be as "
    "detailed as possible.\n"
    "\n"
    "### Input: Molecule: {source}\n"
    "In that molecule, could you formulate a caption about?\n"
    "\n"
    "\n"
    "### Response:"
)

_LANG2MOL_PROMPT = (
    "Below is an instruction that describes a task, paired with an input "
    "that provides further context.\n"
    "Write a response that appropriately completes the request.\n"
    "\n"
    "### Instruction: You are a researcher. You can come up molecule smile "
    "strings based on your existing knowledge.\n"
    "Molecule smile strings are given against the following input. You "
    "should be as detailed as possible.\n"
    "\n"
    "### Input: Caption: {source}\n"
    "In that caption, could you generate a molecule smile string?\n"
    "\n"
    "\n"
    "### Response:"
)

_TEMPLATES = {
    MOL2LANG: InstructionTemplate(MOL2LANG, _MOL2LANG_PROMPT, ""),
    LANG2MOL: InstructionTemplate(LANG2MOL, _LANG2MOL_PROMPT, " "),
}


def template_for(direction: str) -> InstructionTemplate:
    _check_direction(direction)
    return _TEMPLATES[direction]


def render_instruction(
    template: InstructionTemplate, source: str, target: str | None = None
) -> str:
    """Fill the template; without a target the string ends at the marker."""
    if not source:
        raise ContractError("source must be non-empty")
    if RESPONSE_MARKER in source:
        raise DataError("source contains the response marker; rendering would "
                        "be ambiguous")
    prompt = template.prompt_template.format(source=source)
    if target is None:
        return prompt
    return prompt + template.target_separator + target


def render_prompt(direction: str, source: str) -> str:
    """The generation prompt: template filled with the source, ending at the marker."""
    return render_instruction(template_for(direction), source)


def render_example(direction: str, source: str, target: str) -> tuple[str, str]:
    """Split a fully rendered example at the marker.

    Returns ``(prompt, completion)`` where ``prompt + completion`` is the
    rendered instruction and the completion starts at the first character
    after the marker (it includes the separator space for molecule targets).
    """
    template = template_for(direction)
    full = render_instruction(template, source, target)
    prompt = render_instruction(template, source)
    return prompt, full[len(prompt):]


# --------------------------------------------------------------------------
# toy corpus grammar
# --------------------------------------------------------------------------

_FAMILIES = (
    ("", ""),                            # plain alkane
    ("O", " bearing one hydroxyl group"),
    ("N", " bearing one amino group"),
    ("(=O)O", " bearing one carboxyl group"),
)
_MAX_CHAIN = 10


def toy_catalog() -> list[tuple[str, str]]:
    """All (caption, molecule) pairs of the closed grammar, in fixed order.

    Chains of 1–10 carbons, optionally with one methyl branch on an interior
    carbon, across four functional families. Captions and molecules are in
    bijection: the caption names (family, length, branch position) and the
    string layout encodes the same three choices.
    """
    catalog = []
    for suffix, suffix_caption in _FAMILIES:
        for n in range(1, _MAX_CHAIN + 1):
            smiles = "C" * n + suffix
            caption = f"a chain of {n} carbons" + suffix_caption
            catalog.append((caption, smiles))
            for k in range(2, n):  # interior positions only
                smiles = "C" * (k - 1) + "C(C)" + "C" * (n - k) + suffix
                caption = (f"a chain of {n} carbons carrying a methyl branch "
                           f"on carbon {k}" + suffix_caption)
                catalog.append((caption, smiles))
    return catalog


def corpus_alphabet() -> str:
    """Every character a rendered example or corruption can contain, sorted.

    The grammar is closed, so this inventory is closed too; building a model
    vocabulary from it guarantees any sample of the corpus — including
    corrupted targets — encodes without out-of-vocabulary characters.
    """
    chars: set[str] = set()
    for caption, smiles in toy_catalog():
        chars.update(caption)
        chars.update(smiles)
    chars.update(render_prompt(LANG2MOL, "a"))
    chars.update(render_prompt(MOL2LANG, "C"))
    chars.update(_SMILES_ALPHABET)
    for word in _CAPTION_ALPHABET:
        chars.update(word)
    return "".join(sorted(chars))


def gen_toy_corpus(n: int, seed: int) -> list[LMPair]:
    """Draw n pairs from the grammar, alternating directions, deterministically."""
    if n < 1:
        raise ContractError(f"corpus size must be >= 1, got {n}")
    catalog = toy_catalog()
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        caption, smiles = rng.choice(catalog)
        if i % 2 == 0:
            pairs.append(LMPair(id=f"pair-{i:05d}", direction=LANG2MOL,
                                source=caption, target=smiles))
        else:
            pairs.append(LMPair(id=f"pair-{i:05d}", direction=MOL2LANG,
                                source=smiles, target=caption))
    return pairs


# --------------------------------------------------------------------------
# corruption
# --------------------------------------------------------------------------

# every character tokenizes on its own, so any substitution/duplication of
# these stays tokenizable (if not necessarily parseable — intentionally so)
_SMILES_ALPHABET = list("CNOSFIcnos()=#-123456789.")
_CAPTION_ALPHABET = (
    "a chain of carbons carrying methyl branch on carbon bearing one "
    "hydroxyl amino carboxyl group".split()
    + [str(i) for i in range(1, _MAX_CHAIN + 1)]
)

_MAX_CORRUPT_ATTEMPTS = 100


def _apply_edits(tokens: list[str], alphabet: list[str], n_edits: int,
                 rng: random.Random) -> list[str]:
    out = list(tokens)
    for _ in range(n_edits):
        if not out:
            out = [rng.choice(alphabet)]
            continue
        op = rng.choice(("substitute", "truncate", "duplicate"))
        if op == "substitute":
            out[rng.randrange(len(out))] = rng.choice(alphabet)
        elif op == "truncate":
            cut = rng.randrange(1, max(2, len(out) // 3 + 1))
            out = out[:-cut] if cut < len(out) else out[:1]
        else:
            pos = rng.randrange(len(out))
            out.insert(pos, out[pos])
    return out


def corrupt_target(target: str, direction: str, strength: float, seed: int) -> str:
    """Apply at least one edit; the result differs from the input.

    Molecule corruptions always tokenize but may fail to parse or validate —
    that is the point: they exercise the validity metrics. Caption
    corruptions edit whole words from the grammar's vocabulary.
    """
    _check_direction(direction)
    if not 0.0 < strength <= 1.0:
        raise ContractError(f"strength must be in (0, 1], got {strength}")
    if not target:
        raise ContractError("target must be non-empty")
    if direction == LANG2MOL:
        tokens, alphabet, joiner = list(target), _SMILES_ALPHABET, ""
    else:
        tokens, alphabet, joiner = target.split(" "), _CAPTION_ALPHABET, " "
    n_edits = max(1, math.ceil(strength * len(tokens) * 0.2))
    rng = random.Random(seed)
    for _ in range(_MAX_CORRUPT_ATTEMPTS):
        candidate = joiner.join(_apply_edits(tokens, alphabet, n_edits, rng))
        if not candidate or candidate == target:
            continue
        if direction == LANG2MOL:
            try:
                chem.tokenize_smiles(candidate)
            except chem.TokenizeError:
                continue
        return candidate
    raise DataError(f"could not corrupt {target!r} after "
                    f"{_MAX_CORRUPT_ATTEMPTS} attempts")


def corruption_generator(strength: float) -> Callable[[LMPair, int], str]:
    """A dispreferred-output generator backed by random edits of the gold target."""
    def generate(pair: LMPair, seed: int) -> str:
        return corrupt_target(pair.target, pair.direction, strength, seed)
    return generate


# --------------------------------------------------------------------------
# triples and labeled examples
# --------------------------------------------------------------------------

def build_triples(
    pairs: Sequence[LMPair],
    generator: Callable[[LMPair, int], str],
    seed: int,
) -> list[PreferenceTriple]:
    """One triple per pair: gold target preferred, generator output dispreferred.

    The generator receives a per-pair seed derived from ``seed`` so the
    whole construction is reproducible. Pairs the generator fails on are
    skipped and counted; degenerate triples (equal outputs) are kept.
    """
    rng = random.Random(seed)
    triples = []
    skipped = degenerate = 0
    for pair in pairs:
        child_seed = rng.randrange(2**32)  # drawn before calling: skips stay aligned
        try:
            dispreferred = generator(pair, child_seed)
        except Exception as exc:
            skipped += 1
            logger.warning("skipping pair %s: generator failed: %s", pair.id, exc)
            continue
        triple = PreferenceTriple(
            id=pair.id, direction=pair.direction, source=pair.source,
            preferred=pair.target, dispreferred=dispreferred,
        )
        degenerate += triple.is_degenerate
        triples.append(triple)
    if skipped:
        logger.warning("build_triples skipped %d of %d pairs", skipped, len(pairs))
    if degenerate:
        logger.info("build_triples produced %d degenerate triple(s)", degenerate)
    return triples


def triples_to_kto(triples: Sequence[PreferenceTriple]) -> list[KtoExample]:
    """Two labeled examples per triple, ids suffixed by their label."""
    out = []
    for t in triples:
        out.append(KtoExample(id=f"{t.id}#{PREFERRED_LABEL}", direction=t.direction,
                              source=t.source, output=t.preferred,
                              label=PREFERRED_LABEL))
        out.append(KtoExample(id=f"{t.id}#{DISPREFERRED_LABEL}", direction=t.direction,
                              source=t.source, output=t.dispreferred,
                              label=DISPREFERRED_LABEL))
    return out


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------

def split_dataset(
    pairs: Sequence, fractions: Sequence[float], seed: int
) -> tuple[list, ...]:
    """Disjoint, exhaustive, seeded split with largest-remainder sizing."""
    if not fractions or any(f <= 0 for f in fractions):
        raise ContractError("fractions must all be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(pairs)
    exact = [f * n for f in fractions]
    sizes = [int(e) for e in exact]
    remainders = sorted(range(len(fractions)),
                        key=lambda i: (exact[i] - sizes[i], -i), reverse=True)
    for i in range(n - sum(sizes)):  # leftover is always < len(fractions)
        sizes[remainders[i]] += 1
    order = list(range(n))
    random.Random(seed).shuffle(order)
    splits = []
    start = 0
    for size in sizes:
        splits.append([pairs[order[i]] for i in range(start, start + size)])
        start += size
    return tuple(splits)


# --------------------------------------------------------------------------
# JSONL input/output
# --------------------------------------------------------------------------

_FIELDS = {
    LMPair: ("id", "direction", "source", "target"),
    PreferenceTriple: ("id", "direction", "source", "preferred", "dispreferred"),
    KtoExample: ("id", "direction", "source", "output", "label"),
}


def _write_records(path, records, cls) -> None:
    fields = _FIELDS[cls]
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {name: getattr(r, name) for name in fields}
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def _read_records(path, cls) -> list:
    fields = _FIELDS[cls]
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected an object")
            extra = set(obj) - set(fields)
            missing = set(fields) - set(obj)
            if extra or missing:
                raise DataError(f"{path}:{lineno}: expected exactly fields "
                                f"{list(fields)}; extra={sorted(extra)} "
                                f"missing={sorted(missing)}")
            bad_types = [k for k, v in obj.items() if not isinstance(v, str)]
            if bad_types:
                raise DataError(f"{path}:{lineno}: non-string field(s) "
                                f"{sorted(bad_types)}")
            out.append(cls(**obj))
    return out


def write_pairs(path, pairs: Sequence[LMPair]) -> None:
    _write_records(path, pairs, LMPair)


def read_pairs(path) -> list[LMPair]:
    return _read_records(path, LMPair)


def write_triples(path, triples: Sequence[PreferenceTriple]) -> None:
    _write_records(path, triples, PreferenceTriple)


def read_triples(path) -> list[PreferenceTriple]:
    return _read_records(path, PreferenceTriple)


def write_kto(path, examples: Sequence[KtoExample]) -> None:
    _write_records(path, examples, KtoExample)


def read_kto(path) -> list[KtoExample]:
    return _read_records(path, KtoExample)
