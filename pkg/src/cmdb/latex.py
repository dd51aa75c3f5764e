"""LaTeX math tokenizer and equation canonicalization.

Turns math-mode LaTeX into a flat token stream so that downstream code can
extract symbol sets, check symbol-map grounding, and compare equations by
canonical form. This is deliberately *not* a computer algebra system: two
equations are "the same" only if their token streams canonicalize to the
same string. No algebraic rewriting happens here.

Token kinds:

    id     identifiers: single letters, Greek commands, accented symbols
           (``\\dot{\\gamma}``), and subscripted compounds (``\\sigma_c``)
           which are kept atomic
    num    numeric literals (``2.33``, ``10``)
    op     operators and relations (``=``, ``+``, ``^``, ``\\cdot``, ...)
    fn     function-like commands (``\\frac``, ``\\exp``, ``\\partial``,
           and the differential ``d``)
    group  grouping delimiters ``{ } ( ) [ ]``

Whitespace, ``\\left``/``\\right`` and spacing commands are discarded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class LatexError(ValueError):
    """Base class for tokenizer failures."""


class UnbalancedBraces(LatexError):
    """Raised when grouping delimiters do not balance."""


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "num" | "op" | "fn" | "group"
    text: str

    def __repr__(self) -> str:  # compact: id:\sigma
        return f"{self.kind}:{self.text}"


GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "varepsilon", "zeta",
    "eta", "theta", "vartheta", "iota", "kappa", "lambda", "mu", "nu",
    "xi", "pi", "varpi", "rho", "varrho", "sigma", "varsigma", "tau",
    "upsilon", "phi", "varphi", "chi", "psi", "omega",
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon",
    "Phi", "Psi", "Omega",
}

# Commands that behave like identifiers on their own.
SYMBOL_COMMANDS = {"infty", "ell", "hbar", "nabla", "emptyset"}

FUNCTION_COMMANDS = {
    "frac", "sqrt", "exp", "log", "ln", "sin", "cos", "tan", "sinh",
    "cosh", "tanh", "arcsin", "arccos", "arctan", "partial", "sum",
    "prod", "int", "lim", "min", "max", "det", "tr",
}

OPERATOR_COMMANDS = {
    "cdot", "times", "pm", "mp", "div", "leq", "geq", "neq", "approx",
    "sim", "simeq", "propto", "equiv", "ll", "gg", "rightarrow", "to",
    "mapsto", "langle", "rangle",
}

ACCENT_COMMANDS = {"dot", "ddot", "hat", "bar", "tilde", "vec", "overline"}

# Layout-only commands dropped from the stream.
DISCARD_COMMANDS = {
    "left", "right", "limits", "nolimits", "displaystyle", "textstyle",
    "quad", "qquad", ",", ";", ":", "!", " ", "nonumber", "notag", "big",
    "Big", "bigg", "Bigg",
}

ALIAS_COMMANDS = {"dfrac": "frac", "tfrac": "frac"}

_OPERATOR_CHARS = set("=+-*/^<>,;:|!'&")
_GROUP_CHARS = set("{}()[]")

_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?|\.\d+")
_COMMAND_RE = re.compile(r"\\([a-zA-Z]+|.)")
_SINGLE_COMMAND_RE = re.compile(r"\\[a-zA-Z]+")

# Transparent style wrappers removed textually before lexing.
_WRAPPER_RE = re.compile(r"\\(?:mathrm|mathbf|mathit|boldsymbol|operatorname)\{([^{}]*)\}")

# Display/inline wrappers stripped before lexing.
_MATH_DELIMS = [
    (re.compile(r"^\s*\\\[(.*)\\\]\s*$", re.S), 1),
    (re.compile(r"^\s*\$\$(.*)\$\$\s*$", re.S), 1),
    (re.compile(r"^\s*\$(.*)\$\s*$", re.S), 1),
    (re.compile(
        r"^\s*\\begin\{(equation|align|gather|multline|eqnarray)\*?\}"
        r"(.*)\\end\{\1\*?\}\s*$", re.S), 2),
]


def _strip_wrappers(latex: str) -> str:
    changed = True
    while changed:
        changed = False
        for rx, grp in _MATH_DELIMS:
            m = rx.match(latex)
            if m:
                latex = m.group(grp)
                changed = True
    while _WRAPPER_RE.search(latex):
        latex = _WRAPPER_RE.sub(r"\1", latex)
    return latex


class _Lexer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.warnings: list[str] = []
        self.depth = 0  # brace depth

    def _context(self) -> str:
        return self.src[max(0, self.pos - 12): self.pos + 12]

    def eof(self) -> bool:
        return self.pos >= len(self.src)

    def peek(self) -> str:
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def skip_ws(self) -> None:
        while not self.eof() and self.src[self.pos] in " \t\n\r~":
            self.pos += 1

    def next_token(self) -> Token | None:
        self.skip_ws()
        if self.eof():
            return None
        ch = self.peek()
        if ch == "\\":
            return self.command()
        if ch in _GROUP_CHARS:
            self.pos += 1
            if ch == "{":
                self.depth += 1
            elif ch == "}":
                self.depth -= 1
                if self.depth < 0:
                    raise UnbalancedBraces(f"stray '}}' near {self._context()!r}")
            return Token("group", ch)
        if ch.isdigit() or (ch == "." and _NUMBER_RE.match(self.src, self.pos)):
            m = _NUMBER_RE.match(self.src, self.pos)
            self.pos = m.end()
            return Token("num", m.group())
        if ch == "_":
            self.pos += 1
            return Token("op", "_")
        if ch in _OPERATOR_CHARS:
            self.pos += 1
            return Token("op", ch)
        if ch.isalpha():
            self.pos += 1
            return self.with_subscript(ch)
        # Unknown character (e.g. a literal Greek codepoint): opaque identifier.
        self.warnings.append(f"unrecognized character {ch!r}")
        self.pos += 1
        return self.with_subscript(ch)

    def command(self) -> Token | None:
        m = _COMMAND_RE.match(self.src, self.pos)
        if not m:
            self.pos += 1
            return None
        name = m.group(1)
        self.pos = m.end()
        name = ALIAS_COMMANDS.get(name, name)
        if name in DISCARD_COMMANDS or name == "\\":
            return self.next_token()
        if name in OPERATOR_COMMANDS:
            return Token("op", "\\" + name)
        if name in FUNCTION_COMMANDS:
            return Token("fn", "\\" + name)
        if name in ACCENT_COMMANDS:
            return self.accented(name)
        if name in GREEK or name in SYMBOL_COMMANDS:
            return self.with_subscript("\\" + name)
        if name == "text":
            inner = self.braced_raw()
            if inner is None:
                return self.next_token()
            return self.with_subscript(f"\\text{{{inner}}}")
        if not name.isalpha():
            # escaped punctuation, e.g. \% or \&
            return Token("op", name)
        self.warnings.append(f"unknown command \\{name}; treated as identifier")
        return self.with_subscript("\\" + name)

    def braced_raw(self) -> str | None:
        """Consume a {...} group and return the raw inner text."""
        self.skip_ws()
        if self.peek() != "{":
            return None
        depth = 0
        start = self.pos
        while not self.eof():
            c = self.src[self.pos]
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    inner = self.src[start + 1: self.pos]
                    self.pos += 1
                    return inner
            self.pos += 1
        raise UnbalancedBraces(f"unterminated group near {self._context()!r}")

    def accented(self, accent: str) -> Token:
        inner = self.braced_raw()
        if inner is None:
            nxt = self.next_token()
            if nxt is None:
                raise LatexError(f"\\{accent} missing argument")
            inner = nxt.text
        else:
            inner = _canonical_fragment(inner, self.warnings)
        return self.with_subscript(f"\\{accent}{{{inner}}}")

    def with_subscript(self, base: str) -> Token:
        """Absorb a trailing subscript so ``\\sigma_c`` is one identifier."""
        save = self.pos
        self.skip_ws()
        if self.peek() != "_":
            self.pos = save
            return Token("id", base)
        self.pos += 1
        self.skip_ws()
        if self.peek() == "{":
            inner = self.braced_raw()
            canon = _canonical_fragment(inner, self.warnings)
        else:
            nxt = self.next_token()
            if nxt is None:
                raise LatexError(f"dangling subscript after {base!r}")
            canon = nxt.text
        if len(canon) == 1 or _SINGLE_COMMAND_RE.fullmatch(canon):
            return Token("id", f"{base}_{canon}")
        return Token("id", f"{base}_{{{canon}}}")


def _canonical_fragment(fragment: str, warnings: list[str]) -> str:
    """Canonical text for a subscript/accent argument."""
    toks, warns = _tokenize(fragment)
    warnings.extend(warns)
    return "".join(t.text for t in toks)


def _mark_differentials(tokens: list[Token]) -> list[Token]:
    """Reclassify a bare ``d`` as the differential operator when it
    immediately precedes an identifier (as in ``\\frac{d\\sigma}{dt}``)."""
    out: list[Token] = []
    for i, tok in enumerate(tokens):
        if (
            tok.kind == "id"
            and tok.text == "d"
            and i + 1 < len(tokens)
            and tokens[i + 1].kind == "id"
        ):
            out.append(Token("fn", "d"))
        else:
            out.append(tok)
    return out


def _tokenize(src: str) -> tuple[list[Token], list[str]]:
    lexer = _Lexer(src)
    out: list[Token] = []
    while True:
        tok = lexer.next_token()
        if tok is None:
            break
        out.append(tok)
    if lexer.depth != 0:
        raise UnbalancedBraces(f"unbalanced braces in {src!r}")
    return _mark_differentials(out), lexer.warnings


def tokenize_equation(latex: str) -> list[Token]:
    """Tokenize a math-mode LaTeX string.

    Raises :class:`UnbalancedBraces` on delimiter mismatch. Unknown
    commands become opaque identifier tokens (see
    :func:`tokenize_with_warnings` for the warning channel).
    """
    tokens, _ = _tokenize(_strip_wrappers(latex))
    return tokens


def tokenize_with_warnings(latex: str) -> tuple[list[Token], list[str]]:
    """Like :func:`tokenize_equation` but also returns lexer warnings."""
    return _tokenize(_strip_wrappers(latex))


# Symbols excluded from equations by default: mathematical constants.
DEFAULT_CONSTANT_WHITELIST = frozenset({"\\infty", "\\pi"})
# Variables dropped when they appear *only* in differential position.
DEFAULT_DIFFERENTIAL_VARS = frozenset({"t"})


def _identifier_occurrences(tokens: list[Token]) -> list[tuple[str, bool]]:
    """(symbol, is_differential_position) per identifier occurrence."""
    occ = []
    prev: Token | None = None
    for tok in tokens:
        if tok.kind == "id":
            diff = prev is not None and prev.kind == "fn" and prev.text in ("d", "\\partial")
            occ.append((tok.text, diff))
        prev = tok
    return occ


def equation_symbols_ordered(
    latex: str,
    differential_vars: frozenset[str] = DEFAULT_DIFFERENTIAL_VARS,
    constant_whitelist: frozenset[str] = DEFAULT_CONSTANT_WHITELIST,
) -> list[str]:
    """Equation symbols in order of first occurrence."""
    occ = _identifier_occurrences(tokenize_equation(latex))
    diff_only = {
        sym for sym in {s for s, _ in occ}
        if sym in differential_vars and all(d for s, d in occ if s == sym)
    }
    seen: list[str] = []
    for sym, _ in occ:
        if sym in constant_whitelist or sym in diff_only:
            continue
        if sym not in seen:
            seen.append(sym)
    return seen


def extract_equation_symbols(
    latex: str,
    differential_vars: frozenset[str] = DEFAULT_DIFFERENTIAL_VARS,
    constant_whitelist: frozenset[str] = DEFAULT_CONSTANT_WHITELIST,
) -> set[str]:
    """The abstract symbol set of an equation.

    Identifier tokens minus constants (``\\pi``, ``\\infty``) and minus
    whitelisted variables used only as differentials (``dt``).
    """
    return set(equation_symbols_ordered(latex, differential_vars, constant_whitelist))


def _collapse_braces(tokens: list[Token]) -> list[Token]:
    """Drop brace groups wrapping a single token; keep parens/brackets."""

    def parse(i: int) -> tuple[list[Token], int]:
        items: list[Token] = []
        while i < len(tokens):
            tok = tokens[i]
            if tok.kind == "group" and tok.text == "{":
                inner, j = parse(i + 1)
                if j >= len(tokens) or tokens[j].text != "}":
                    raise UnbalancedBraces("unbalanced braces")
                if len(inner) == 1:
                    items.extend(inner)
                else:
                    items.append(Token("group", "{"))
                    items.extend(inner)
                    items.append(Token("group", "}"))
                i = j + 1
            elif tok.kind == "group" and tok.text == "}":
                return items, i
            else:
                items.append(tok)
                i += 1
        return items, i

    collapsed, end = parse(0)
    if end != len(tokens):
        raise UnbalancedBraces("unbalanced braces")
    return collapsed


def normalize_equation(latex: str) -> str:
    """Canonical token string for equation identity tests.

    Rules: tokens joined by single spaces; ``\\dfrac`` folded to
    ``\\frac``; ``\\cdot`` dropped (unified with implicit multiplication);
    ``\\left``/``\\right`` stripped; braces around single tokens removed.
    Purely syntactic: ``a+b`` and ``b+a`` stay different.
    """
    tokens = tokenize_equation(latex)
    tokens = [t for t in tokens if not (t.kind == "op" and t.text == "\\cdot")]
    tokens = _collapse_braces(tokens)
    return " ".join(t.text for t in tokens)
