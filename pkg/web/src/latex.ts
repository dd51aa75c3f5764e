// Minimal client-side LaTeX-to-HTML renderer for the equation subset the
// backend emits: Greek commands, sub/superscripts, \frac, accents,
// function names. Self-contained so the review UI renders equations with
// no network access; output is safe HTML (all text escaped).

const GREEK: Record<string, string> = {
  alpha: "α", beta: "β", gamma: "γ", delta: "δ", epsilon: "ε",
  varepsilon: "ε", zeta: "ζ", eta: "η", theta: "θ", vartheta: "ϑ",
  iota: "ι", kappa: "κ", lambda: "λ", mu: "μ", nu: "ν", xi: "ξ",
  pi: "π", rho: "ρ", sigma: "σ", varsigma: "ς", tau: "τ", upsilon: "υ",
  phi: "φ", varphi: "ϕ", chi: "χ", psi: "ψ", omega: "ω",
  Gamma: "Γ", Delta: "Δ", Theta: "Θ", Lambda: "Λ", Xi: "Ξ", Pi: "Π",
  Sigma: "Σ", Upsilon: "Υ", Phi: "Φ", Psi: "Ψ", Omega: "Ω",
};

const SYMBOLS: Record<string, string> = {
  infty: "∞", cdot: "·", times: "×", pm: "±", mp: "∓", leq: "≤",
  geq: "≥", neq: "≠", approx: "≈", propto: "∝", partial: "∂",
  rightarrow: "→", to: "→", nabla: "∇", ell: "ℓ", hbar: "ℏ",
  sum: "∑", int: "∫", prod: "∏",
};

const ACCENTS: Record<string, string> = {
  dot: "̇", ddot: "̈", hat: "̂", bar: "̄",
  tilde: "̃", vec: "⃗", overline: "̅",
};

const FUNCTIONS = new Set([
  "exp", "log", "ln", "sin", "cos", "tan", "sinh", "cosh", "tanh",
  "arcsin", "arccos", "arctan", "min", "max", "lim", "det", "tr", "sqrt",
]);

const DISCARD = new Set([
  "left", "right", "limits", "nolimits", "displaystyle", "textstyle",
  "quad", "qquad", "nonumber", "notag", ",", ";", ":", "!", " ", "\\",
]);

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface Parser {
  src: string;
  pos: number;
}

function peek(p: Parser): string {
  return p.pos < p.src.length ? p.src[p.pos] : "";
}

function skipWs(p: Parser): void {
  while (p.pos < p.src.length && /\s/.test(p.src[p.pos])) p.pos += 1;
}

/** Render one atom: a char, a command, or a braced group. */
function atom(p: Parser): string {
  skipWs(p);
  const c = peek(p);
  if (c === "") return "";
  if (c === "{") {
    p.pos += 1;
    const inner = sequence(p, "}");
    if (peek(p) === "}") p.pos += 1;
    return inner;
  }
  if (c === "\\") return command(p);
  p.pos += 1;
  if (/[a-zA-Z]/.test(c)) return `<i>${c}</i>`;
  return escapeHtml(c);
}

function command(p: Parser): string {
  p.pos += 1; // backslash
  const m = /^[a-zA-Z]+/.exec(p.src.slice(p.pos));
  const name = m ? m[0] : p.src[p.pos] ?? "";
  p.pos += name.length || 1;
  if (name.length === 0) return "";
  if (DISCARD.has(name)) return "";
  if (name === "frac" || name === "dfrac" || name === "tfrac") {
    const num = atom(p);
    const den = atom(p);
    return (
      `<span class="frac"><span class="num">${num}</span>` +
      `<span class="den">${den}</span></span>`
    );
  }
  if (name === "text" || name === "mathrm") {
    return `<span class="upright">${atom(p)}</span>`;
  }
  if (name in ACCENTS) {
    const inner = atom(p);
    // attach the combining mark to the final glyph, inside its tag so
    // text shaping keeps them together
    const tagged = /^(.*)(<\/[a-z]+>)$/.exec(inner);
    if (tagged) return tagged[1] + ACCENTS[name] + tagged[2];
    return inner + ACCENTS[name];
  }
  if (name in GREEK) return `<i>${GREEK[name]}</i>`;
  if (name in SYMBOLS) return escapeHtml(SYMBOLS[name]);
  if (FUNCTIONS.has(name)) return `<span class="fn">${escapeHtml(name)}</span>`;
  return `<span class="unknown-cmd">${escapeHtml("\\" + name)}</span>`;
}

function sequence(p: Parser, stopAt = ""): string {
  let out = "";
  while (p.pos < p.src.length) {
    skipWs(p);
    const c = peek(p);
    if (c === "" || (stopAt && c === stopAt)) break;
    if (c === "_" || c === "^") {
      p.pos += 1;
      const script = atom(p);
      out += c === "_" ? `<sub>${script}</sub>` : `<sup>${script}</sup>`;
      continue;
    }
    if (/[a-zA-Z]/.test(c)) {
      p.pos += 1;
      out += `<i>${c}</i>`;
      continue;
    }
    if (/[0-9.]/.test(c)) {
      const m = /^\d+(?:\.\d+)?|^\./.exec(p.src.slice(p.pos));
      const text = m ? m[0] : c;
      p.pos += text.length;
      out += escapeHtml(text);
      continue;
    }
    if ("=+-*/<>(),;:|[]'".includes(c)) {
      p.pos += 1;
      out += `<span class="op">${escapeHtml(c === "*" ? "·" : c)}</span>`;
      continue;
    }
    out += atom(p);
  }
  return out;
}

/** Render a math-mode LaTeX string to an HTML fragment. */
export function renderLatex(latex: string): string {
  const stripped = latex
    .replace(/^\s*\\\[|\\\]\s*$/g, "")
    .replace(/^\s*\$\$?|\$\$?\s*$/g, "");
  const p: Parser = { src: stripped, pos: 0 };
  return `<span class="math">${sequence(p)}</span>`;
}
