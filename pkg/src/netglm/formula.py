"""Formula parsing: "term1 + term2(arg = value) + ..." into a ModelSpec.

Grammar (whitespace-insensitive)::

    formula := term ("+" term)*
    term    := ident [ "(" arg ("," arg)* ")" ]
    arg     := ident "=" (string | number | ident)

String values take single or double quotes; a bare identifier on the
right-hand side of an argument is accepted as a string for convenience.
Recognized arguments are ``mode``, ``decay``, ``type`` (shared-partner path
orientation), and ``data`` (covariate name).  Parsing is total: every input
yields either a spec or a :class:`~netglm.errors.FormulaError` carrying the
byte offset of the problem.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import FormulaError, TermError
from .terms import CP_TYPES, lookup

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'[^'\\]*'|"[^"\\]*")
  | (?P<sym>[+(),=])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


@dataclass(frozen=True)
class TermInstance:
    """One parsed term with resolved arguments.

    ``given`` preserves the arguments as written (for labels); ``key``
    identifies the term up to argument defaults (for duplicate detection and
    equality).
    """

    name: str
    mode: str = None
    decay: float = None
    cp_type: str = None
    covariate: str = None
    given: tuple = ()

    @property
    def key(self):
        return (self.name, self.mode, self.decay, self.cp_type, self.covariate)

    @property
    def label(self) -> str:
        if not self.given:
            return self.name
        parts = []
        for k, v in self.given:
            parts.append(f"{k} = '{v}'" if isinstance(v, str) else f"{k} = {v!r}")
        return f"{self.name}({', '.join(parts)})"

    def __eq__(self, other):
        return isinstance(other, TermInstance) and self.key == other.key \
            and self.given == other.given

    def __hash__(self):
        return hash((self.key, self.given))


@dataclass(frozen=True)
class ModelSpec:
    """Ordered, validated list of term instances."""

    terms: tuple
    has_degrees: bool = False
    source: str = ""

    @property
    def generic_terms(self):
        """Terms occupying the generic weight block, in formula order."""
        return tuple(t for t in self.terms if t.name != "degrees")

    def __eq__(self, other):
        return isinstance(other, ModelSpec) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)


def render(spec: ModelSpec) -> str:
    """Canonical text form; ``parse_formula(render(spec))`` round-trips."""
    return " + ".join(t.label for t in spec.terms)


def _resolve_term(name, args, offset, data=None):
    try:
        tdef = lookup(name)
    except TermError as exc:
        raise FormulaError(str(exc), offset) from None

    known = {"mode", "decay", "type", "data"}
    for k, _, arg_off in args:
        if k not in known:
            raise FormulaError(f"unknown argument {k!r} for term {name!r}", arg_off)
        if sum(1 for kk, _, _ in args if kk == k) > 1:
            raise FormulaError(f"argument {k!r} given twice", arg_off)
    argmap = {k: (v, off) for k, v, off in args}

    mode = decay = cp_type = covariate = None

    if "mode" in argmap:
        v, off = argmap["mode"]
        if not tdef.modes:
            raise FormulaError(f"term {name!r} takes no mode", off)
        if not isinstance(v, str) or v not in tdef.modes:
            allowed = ", ".join(tdef.modes)
            raise FormulaError(
                f"invalid mode {v!r} for term {name!r} (allowed: {allowed})", off
            )
        mode = v
    elif tdef.modes:
        mode = tdef.default_mode

    if "decay" in argmap:
        v, off = argmap["decay"]
        if not tdef.needs_decay:
            raise FormulaError(f"term {name!r} is not geometrically weighted", off)
        if isinstance(v, str) or v < 0:
            raise FormulaError(f"decay must be a number >= 0, got {v!r}", off)
        decay = float(v)
    elif tdef.needs_decay:
        decay = 0.5  # documented artifact default

    if "type" in argmap:
        v, off = argmap["type"]
        if not tdef.needs_cp_type:
            raise FormulaError(f"term {name!r} takes no shared-partner type", off)
        if not isinstance(v, str) or v not in CP_TYPES:
            raise FormulaError(
                f"invalid shared-partner type {v!r} (allowed: {', '.join(CP_TYPES)})",
                off,
            )
        cp_type = v
    elif tdef.needs_cp_type:
        cp_type = "OTP"

    if "data" in argmap:
        v, off = argmap["data"]
        if tdef.covariate is None:
            raise FormulaError(f"term {name!r} takes no covariate", off)
        if not isinstance(v, str):
            raise FormulaError(f"covariate name must be a string, got {v!r}", off)
        covariate = v
        if data is not None:
            if covariate not in data.covariates:
                raise FormulaError(
                    f"missing covariate {covariate!r} for term {name!r}", off
                )
            ndim = data.covariates[covariate].ndim
            want = 1 if tdef.covariate == "unit" else 2
            if ndim != want:
                raise FormulaError(
                    f"covariate {covariate!r} must be "
                    f"{'unit' if want == 1 else 'dyad'}-level for term {name!r}",
                    off,
                )
    elif tdef.covariate is not None:
        raise FormulaError(
            f"term {name!r} requires a data = <covariate> argument", offset
        )

    given = tuple((k, v) for k, (v, _) in argmap.items())
    return TermInstance(name=name, mode=mode, decay=decay, cp_type=cp_type,
                        covariate=covariate, given=given)


def parse_formula(text: str, data=None) -> ModelSpec:
    """Parse and validate a formula against the term catalog.

    When ``data`` is given, covariate bindings are checked against it.
    """
    if not isinstance(text, str) or not text.strip():
        raise FormulaError("empty formula", 0)
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    def advance(kind=None, value=None):
        nonlocal pos
        tok = tokens[pos]
        if kind is not None and tok[0] != kind:
            raise FormulaError(
                f"expected {kind}, found {tok[1]!r}" if tok[0] != "eof"
                else f"expected {kind}, found end of formula", tok[2]
            )
        if value is not None and tok[1] != value:
            raise FormulaError(f"expected {value!r}, found {tok[1]!r}", tok[2])
        pos += 1
        return tok

    def parse_value():
        tok = peek()
        if tok[0] == "number":
            advance()
            return float(tok[1]), tok[2]
        if tok[0] == "string":
            advance()
            return tok[1][1:-1], tok[2]
        if tok[0] == "ident":
            advance()
            return tok[1], tok[2]
        raise FormulaError(f"expected a value, found {tok[1]!r}", tok[2])

    def parse_term():
        tok = advance("ident")
        name, offset = tok[1], tok[2]
        args = []
        if peek()[:2] == ("sym", "("):
            advance()
            while True:
                key_tok = advance("ident")
                advance("sym", "=")
                value, _ = parse_value()
                args.append((key_tok[1], value, key_tok[2]))
                nxt = peek()
                if nxt[:2] == ("sym", ","):
                    advance()
                    continue
                if nxt[:2] == ("sym", ")"):
                    advance()
                    break
                raise FormulaError(
                    f"expected ',' or ')', found {nxt[1]!r}"
                    if nxt[0] != "eof" else "unclosed argument list", nxt[2]
                )
        return _resolve_term(name, args, offset, data)

    terms = [parse_term()]
    while peek()[:2] == ("sym", "+"):
        advance()
        terms.append(parse_term())
    tok = peek()
    if tok[0] != "eof":
        raise FormulaError(f"unexpected {tok[1]!r}", tok[2])

    seen = {}
    for t in terms:
        if t.key in seen:
            raise FormulaError(f"duplicate term {t.label}")
        seen[t.key] = t
    has_degrees = any(t.name == "degrees" for t in terms)
    return ModelSpec(terms=tuple(terms), has_degrees=has_degrees, source=text)
