"""SMILES handling for the organic subset: tokens, graphs, valence, fingerprints.

Supports the elements B C N O P S F Cl Br I (plus H in brackets), aromatic
lowercase b c n o p s, bracket atoms ``[isotope? element chirality? Hcount?
charge?]``, bonds ``- = # : / \\``, branches, ring closures ``1``-``9`` and
``%nn``, and dot-separated fragments. Stereo markers (``/``, ``\\``, ``@``,
``@@``) are parsed and then discarded — they never reach the graph.

Failures are loud and specific: unknown characters raise TokenizeError with
the offset; each structural defect (unmatched branch, unclosed ring, dangling
bond, conflicting ring-closure orders, self-loop, duplicate bond) has its own
exception class under SmilesParseError.
"""

from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field

from .errors import ContractError, MolpoError

__all__ = [
    "SmilesError", "TokenizeError", "SmilesParseError",
    "UnmatchedBranchError", "UnclosedRingError", "DanglingBondError",
    "RingBondConflictError", "SelfLoopError", "DuplicateBondError",
    "SmilesToken", "Atom", "Bond", "MolGraph",
    "tokenize_smiles", "parse_smiles", "mol_from_smiles",
    "VALENCE", "validate_molecule", "is_valid_smiles",
    "Fingerprint", "morgan_fingerprint", "tanimoto",
]


class SmilesError(MolpoError):
    """Base class for SMILES tokenize/parse failures."""


class TokenizeError(SmilesError):
    """Input contains a character sequence outside the supported grammar."""

    def __init__(self, text: str, offset: int, message: str | None = None):
        detail = message or f"unrecognized character {text!r}"
        super().__init__(f"{detail} at offset {offset}")
        self.text = text
        self.offset = offset


class SmilesParseError(SmilesError):
    """Tokens do not assemble into a molecular graph."""


class UnmatchedBranchError(SmilesParseError):
    """A branch parenthesis has no partner (or no atom to attach to)."""


class UnclosedRingError(SmilesParseError):
    """A ring-closure digit was opened but never closed."""


class DanglingBondError(SmilesParseError):
    """A bond symbol has no atom on one of its sides."""


class RingBondConflictError(SmilesParseError):
    """The two ends of a ring closure declare different bond orders."""


class SelfLoopError(SmilesParseError):
    """A ring closure would bond an atom to itself."""


class DuplicateBondError(SmilesParseError):
    """Two atoms would be connected by more than one bond."""


AROMATIC_BOND = 1.5

_ORGANIC_TWO = ("Cl", "Br")
_ORGANIC_ONE = frozenset("BCNOPSFI")
_AROMATIC_ONE = frozenset("bcnops")
_BRACKET_ELEMENTS = frozenset({"H", "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
_BOND_ORDERS = {"-": 1.0, "=": 2.0, "#": 3.0, ":": AROMATIC_BOND, "/": 1.0, "\\": 1.0}

_BRACKET_RE = re.compile(
    r"\[(?P<isotope>\d+)?"
    r"(?P<element>[A-Z][a-z]?|[bcnops])"
    r"(?P<chiral>@@?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>[+-]\d+|\++|-+)?"
    r"\]"
)


@dataclass(frozen=True)
class SmilesToken:
    """One lexical unit; ``text`` spans exactly the source slice at ``pos``."""

    kind: str  # "atom" | "bond" | "branch_open" | "branch_close" | "ring" | "dot"
    text: str
    pos: int
    element: str | None = None
    aromatic: bool = False
    isotope: int | None = None
    charge: int = 0
    explicit_h: int = 0
    bracket: bool = False
    order: float | None = None
    ring: int | None = None


def _parse_charge(spec: str) -> int:
    if spec[0] == "+":
        return int(spec[1:]) if spec[1:].isdigit() else len(spec)
    return -(int(spec[1:]) if spec[1:].isdigit() else len(spec))


def tokenize_smiles(s: str) -> list[SmilesToken]:
    """Greedy longest-match scan; token texts tile the input exactly."""
    tokens: list[SmilesToken] = []
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch == "[":
            m = _BRACKET_RE.match(s, i)
            if m is None:
                raise TokenizeError(ch, i, "malformed bracket atom")
            element = m.group("element")
            aromatic = element.islower()
            canonical = element.capitalize() if aromatic else element
            if canonical not in _BRACKET_ELEMENTS:
                raise TokenizeError(element, i, f"unsupported element {element!r}")
            hcount = m.group("hcount")
            explicit_h = 0 if hcount is None else (1 if hcount == "H" else int(hcount[1:]))
            charge = 0 if m.group("charge") is None else _parse_charge(m.group("charge"))
            isotope = None if m.group("isotope") is None else int(m.group("isotope"))
            tokens.append(SmilesToken(
                kind="atom", text=m.group(0), pos=i, element=canonical,
                aromatic=aromatic, isotope=isotope, charge=charge,
                explicit_h=explicit_h, bracket=True,
            ))
            i = m.end()
        elif s.startswith(_ORGANIC_TWO, i):
            two = s[i:i + 2]
            tokens.append(SmilesToken(kind="atom", text=two, pos=i, element=two))
            i += 2
        elif ch in _ORGANIC_ONE:
            tokens.append(SmilesToken(kind="atom", text=ch, pos=i, element=ch))
            i += 1
        elif ch in _AROMATIC_ONE:
            tokens.append(SmilesToken(
                kind="atom", text=ch, pos=i, element=ch.upper(), aromatic=True,
            ))
            i += 1
        elif ch in _BOND_ORDERS:
            tokens.append(SmilesToken(kind="bond", text=ch, pos=i, order=_BOND_ORDERS[ch]))
            i += 1
        elif ch == "(":
            tokens.append(SmilesToken(kind="branch_open", text=ch, pos=i))
            i += 1
        elif ch == ")":
            tokens.append(SmilesToken(kind="branch_close", text=ch, pos=i))
            i += 1
        elif ch == ".":
            tokens.append(SmilesToken(kind="dot", text=ch, pos=i))
            i += 1
        elif ch.isdigit() and ch != "0":
            tokens.append(SmilesToken(kind="ring", text=ch, pos=i, ring=int(ch)))
            i += 1
        elif ch == "%":
            digits = s[i + 1:i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise TokenizeError(ch, i, "'%' ring closure needs two digits")
            tokens.append(SmilesToken(kind="ring", text=s[i:i + 3], pos=i, ring=int(digits)))
            i += 3
        else:
            raise TokenizeError(ch, i)
    return tokens


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    explicit_h: int = 0
    isotope: int | None = None


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: float


@dataclass
class MolGraph:
    """Undirected molecular graph; ``n_fragments`` counts dot-separated parts."""

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    n_fragments: int = 1

    def neighbors(self, idx: int) -> list[tuple[int, float]]:
        out = []
        for bond in self.bonds:
            if bond.a == idx:
                out.append((bond.b, bond.order))
            elif bond.b == idx:
                out.append((bond.a, bond.order))
        return out


def parse_smiles(tokens: Sequence[SmilesToken]) -> MolGraph:
    """Assemble tokens into a graph; structural defects raise specific errors."""
    graph = MolGraph()
    bond_keys: set[tuple[int, int]] = set()
    stack: list[int] = []
    ring_open: dict[int, tuple[int, float | None]] = {}
    prev: int | None = None
    pending: float | None = None
    fragment_has_atom = False

    def add_bond(a: int, b: int, order: float) -> None:
        key = (a, b) if a < b else (b, a)
        if key in bond_keys:
            raise DuplicateBondError(f"atoms {key[0]} and {key[1]} are already bonded")
        bond_keys.add(key)
        graph.bonds.append(Bond(a=key[0], b=key[1], order=order))

    def default_order(a: int, b: int) -> float:
        both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
        return AROMATIC_BOND if both_aromatic else 1.0

    for tok in tokens:
        if tok.kind == "atom":
            idx = len(graph.atoms)
            graph.atoms.append(Atom(
                element=tok.element, aromatic=tok.aromatic, charge=tok.charge,
                explicit_h=tok.explicit_h, isotope=tok.isotope,
            ))
            if prev is not None:
                add_bond(prev, idx, pending if pending is not None else default_order(prev, idx))
            elif pending is not None:
                raise DanglingBondError(f"bond at offset {tok.pos} has no preceding atom")
            prev = idx
            pending = None
            fragment_has_atom = True
        elif tok.kind == "bond":
            if prev is None:
                raise DanglingBondError(f"bond {tok.text!r} at offset {tok.pos} has no preceding atom")
            if pending is not None:
                raise DanglingBondError(f"consecutive bond symbols at offset {tok.pos}")
            pending = tok.order
        elif tok.kind == "branch_open":
            if prev is None:
                raise UnmatchedBranchError(f"branch opened at offset {tok.pos} before any atom")
            if pending is not None:
                raise DanglingBondError(f"bond dangles into branch at offset {tok.pos}")
            stack.append(prev)
        elif tok.kind == "branch_close":
            if not stack:
                raise UnmatchedBranchError(f"unmatched ')' at offset {tok.pos}")
            if pending is not None:
                raise DanglingBondError(f"bond dangles before ')' at offset {tok.pos}")
            prev = stack.pop()
        elif tok.kind == "ring":
            if prev is None:
                raise DanglingBondError(f"ring closure at offset {tok.pos} has no preceding atom")
            if tok.ring in ring_open:
                open_atom, open_order = ring_open.pop(tok.ring)
                if open_atom == prev:
                    raise SelfLoopError(f"ring {tok.ring} closes onto its own atom")
                close_order = pending
                pending = None
                if open_order is not None and close_order is not None and open_order != close_order:
                    raise RingBondConflictError(
                        f"ring {tok.ring} declares orders {open_order} and {close_order}"
                    )
                order = open_order if open_order is not None else close_order
                if order is None:
                    order = default_order(open_atom, prev)
                add_bond(open_atom, prev, order)
            else:
                ring_open[tok.ring] = (prev, pending)
                pending = None
        elif tok.kind == "dot":
            if pending is not None:
                raise DanglingBondError(f"bond dangles before '.' at offset {tok.pos}")
            if stack:
                raise SmilesParseError(f"fragment separator inside branch at offset {tok.pos}")
            if not fragment_has_atom:
                raise SmilesParseError(f"empty fragment before '.' at offset {tok.pos}")
            prev = None
            fragment_has_atom = False
            graph.n_fragments += 1
        else:  # pragma: no cover - tokenizer emits no other kinds
            raise SmilesParseError(f"unknown token kind {tok.kind!r}")

    if ring_open:
        digits = ", ".join(str(d) for d in sorted(ring_open))
        raise UnclosedRingError(f"unclosed ring closure(s): {digits}")
    if stack:
        raise UnmatchedBranchError("unclosed '(' at end of input")
    if pending is not None:
        raise DanglingBondError("bond dangles at end of input")
    if not fragment_has_atom:
        raise SmilesParseError("molecule (or final fragment) contains no atoms")
    return graph


def mol_from_smiles(s: str) -> MolGraph:
    """Tokenize and parse in one step."""
    return parse_smiles(tokenize_smiles(s))


# Maximum total bond order (plus explicit hydrogens) per neutral atom.
VALENCE = {
    "H": 1, "B": 3, "C": 4, "N": 3, "O": 2, "P": 5, "S": 6,
    "F": 1, "Cl": 1, "Br": 1, "I": 1,
}


def _allowed_valence(atom: Atom) -> int:
    base = VALENCE[atom.element]
    if atom.charge > 0:
        # Positively charged nitrogen is the familiar ammonium-style cap of 5;
        # other cations gain one slot per unit charge.
        return 5 if atom.element == "N" else base + atom.charge
    if atom.charge < 0:
        return max(0, base + atom.charge)
    return base


def validate_molecule(graph: MolGraph) -> list[str]:
    """Return a list of valence violations; an empty list means valid.

    Aromatic bonds count 1.5 toward an atom's total, and totals are rounded
    up (an aromatic atom with two ring bonds uses 3 slots). Explicit
    hydrogens from bracket atoms are included.
    """
    violations = []
    for i, atom in enumerate(graph.atoms):
        total = atom.explicit_h + sum(order for _, order in graph.neighbors(i))
        used = math.ceil(total)
        allowed = _allowed_valence(atom)
        if used > allowed:
            label = atom.element.lower() if atom.aromatic else atom.element
            charge = f"{atom.charge:+d}" if atom.charge else ""
            violations.append(
                f"atom {i} ({label}{charge}): bond order total {used} exceeds allowed valence {allowed}"
            )
    return violations


def is_valid_smiles(s: str) -> bool:
    """True iff the string tokenizes, parses, and passes valence checks."""
    try:
        return not validate_molecule(mol_from_smiles(s))
    except SmilesError:
        return False


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _hash_fields(*fields) -> int:
    return _fnv1a64("|".join(str(f) for f in fields).encode("utf-8"))


@dataclass(frozen=True)
class Fingerprint:
    """Sparse view of a fixed-length binary fingerprint."""

    bits: frozenset[int]
    nbits: int
    radius: int


def morgan_fingerprint(graph: MolGraph, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Circular fingerprint by iterated neighborhood hashing.

    Atom invariants start from (element, degree, charge, explicit H count,
    aromatic flag) and are refreshed ``radius`` times by hashing the sorted
    (bond code, neighbor invariant) multiset. Every invariant from every
    round sets bit ``invariant mod nbits``. Hashes are FNV-1a over canonical
    byte strings, so fingerprints are stable across processes and platforms
    and invariant to atom input order.
    """
    if radius < 0:
        raise ContractError("radius must be non-negative")
    if nbits <= 0 or (nbits & (nbits - 1)) != 0:
        raise ContractError("nbits must be a positive power of two")

    neighbor_lists = [graph.neighbors(i) for i in range(len(graph.atoms))]
    invariants = [
        _hash_fields("atom", a.element, len(neighbor_lists[i]), a.charge, a.explicit_h, a.aromatic)
        for i, a in enumerate(graph.atoms)
    ]
    bits = set(inv % nbits for inv in invariants)
    for _ in range(radius):
        refreshed = []
        for i in range(len(graph.atoms)):
            env = sorted((int(order * 2), invariants[j]) for j, order in neighbor_lists[i])
            refreshed.append(_hash_fields("env", invariants[i], env))
        invariants = refreshed
        bits.update(inv % nbits for inv in invariants)
    return Fingerprint(bits=frozenset(bits), nbits=nbits, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """Jaccard similarity of two equal-length fingerprints; two empties are 1.0."""
    if a.nbits != b.nbits:
        raise ContractError(f"fingerprint lengths differ: {a.nbits} vs {b.nbits}")
    union = len(a.bits | b.bits)
    if union == 0:
        return 1.0
    return len(a.bits & b.bits) / union
