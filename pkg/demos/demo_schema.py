"""Walkthrough: the deterministic knowledge layer.

LaTeX tokenization, symbol extraction, canonical equation identity,
schema validation with repair-ready error paths, symbolic grounding,
SI unit normalization and plausibility-based scale resolution.
"""

import json

from cmdb import latex, records, units

print("== tokenizer ==")
for eq in (r"\sigma = E \epsilon", r"\sigma_c", r"\frac{d\phi}{dt}",
           r"\eta_\infty ( \dot{\gamma} + \lambda_2 \frac{d\dot{\gamma}}{dt} )"):
    print(f"{eq:55s} -> {latex.tokenize_equation(eq)}")

print("\n== symbol extraction (differentials and functions whitelisted) ==")
for eq in (r"\frac{d\sigma}{dt} = 0", r"y = \exp(x)",
           r"\epsilon(t) = A t"):
    print(f"{eq:30s} -> {sorted(latex.extract_equation_symbols(eq))}")

print("\n== canonical equation identity (syntactic, not algebraic) ==")
pairs = [(r"\sigma=E\epsilon", r"\sigma = E \, \epsilon"),
         (r"\dfrac{a}{b}", r"\frac{a}{b}"),
         (r"a \cdot b", "a b"),
         ("a+b", "b+a")]
for left, right in pairs:
    same = latex.normalize_equation(left) == latex.normalize_equation(right)
    print(f"{left!r:28} vs {right!r:28} -> {'same' if same else 'DIFFERENT'}")

print("\n== schema validation with machine-usable error paths ==")
candidate = {
    "equation_latex": r"\sigma = E \epsilon",
    "symbol_map": [
        {"symbol": r"\sigma", "definition": "stress", "unit": "Pa"},
        {"symbol": "E", "definition": "Young's modulus", "unit": "Pa"},
        {"symbol": r"\epsilon", "definition": "strain", "unit": "dimensionless"},
    ],
    "material": {"material_name": "Ancient Sandstone", "material_class": "stone"},
    "parameters": [{"symbol": "c", "value_raw": 1.0, "unit_raw": "kPa",
                    "value_si": 1000.0, "unit_si": "Pa"}],
    # "validation" deliberately missing
    "mechanism": "elasticity",
    "confidence": 0.9,
}
report = records.validate_record(candidate)
print(f"valid={report.valid}")
for issue in report.errors:
    print(f"  {issue.json_path}: {issue.message}")

print("\n== symbolic grounding ==")
grounding = records.check_grounding(r"\sigma = E \epsilon", [
    records.SymbolBinding(r"\sigma", "stress", "Pa"),
    records.SymbolBinding("E", "Young's modulus", "Pa"),
])
print(json.dumps(grounding.to_dict(), indent=2))

print("\n== unit normalization ==")
for value, unit in ((30, "MPa"), (2.33e-3, "Pa·s"), (2.0, "g/cm^3"),
                    (50, "%")):
    print(f"{value} {unit:8s} -> {units.normalize_unit(value, unit)}")
try:
    units.normalize_unit(5, "furlong")
except units.UnsupportedUnit as exc:
    print(f"furlong rejected: {exc}")

print("\n== scale resolution against physical plausibility ==")
table = units.PlausibilityTable.default()
# An ambiguous table header: eta_inf x10^3 over the printed value 2.33.
# Aqueous suspension viscosities sit near water (~1e-3 Pa·s), so the
# downscaled candidate is the only physical one.
out = units.resolve_scaled_value(
    2.33, "×10^3", "viscosity of aqueous suspension",
    table.band("viscosity of aqueous suspension"))
print(f"2.33 under '×10^3' (suspension viscosity) -> {out}")
out = units.resolve_scaled_value(2.0, "×10^3", "elastic modulus", (1e2, 1e4))
print(f"2.0 under '×10^3' (band [1e2,1e4])        -> {out}")
out = units.resolve_scaled_value(2.0, "×10^1", "porosity", (1e-3, 1e3))
print(f"2.0 under '×10^1' (band too wide)         -> {out}  (goes to review)")
