"""Run configuration: INI-style parsing with line-accurate diagnostics.

The stdlib configparser cannot attach line numbers to semantic errors
(a rates row of the wrong length should point at its line), so the
reader here is a small purpose-built one: sections in brackets, `key =
value` pairs, `#`/`;` comments, nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigDomain, ConfigSyntax, ValidationError
from .hjb import SolverSettings
from .model import Economy, FirmParams, IncomeChain, Utility, build_income_chain

_SECTIONS = {
    "economy": {"states", "rates", "rho", "gamma", "a_min"},
    "firm": {"alpha", "delta"},
    "policy": {"tau", "i", "b_nominal0"},
    "solver": {"n", "a_max", "tol", "max_iter", "stretch"},
    "scan": {"r_min", "r_max", "step"},
    "mc": {"n_paths", "burn_in", "horizon", "seed", "dt"},
}


@dataclass(frozen=True)
class McSettings:
    n_paths: int = 100_000
    burn_in: float = 200.0
    horizon: float = 50.0
    seed: int = 42
    dt: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    economy: Economy
    firm: FirmParams
    tau: float
    i_nominal: float
    b_nominal0: float
    settings: SolverSettings
    scan: tuple[float, float, float] | None
    mc: McSettings
    output_dir: Path = field(default_factory=Path)


def _strip_comment(text: str) -> str:
    # '#' only: ';' separates the rows of the rates matrix
    pos = text.find("#")
    if pos >= 0:
        text = text[:pos]
    return text.strip()


def _read_sections(path: Path) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigSyntax(lineno, f"unknown section [{name}]")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigSyntax(lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigSyntax(lineno, "key outside of any section")
        key, _, value = line.partition("=")
        key = key.strip()
        section_name = next(s for s, body in sections.items() if body is current)
        if key not in _SECTIONS[section_name]:
            raise ConfigDomain(f"{section_name}.{key}", "unknown key")
        current[key] = (value.strip(), lineno)
    return sections


def _scalar(sections, section, key, default, conv, domain=None):
    entry = sections.get(section, {}).get(key)
    if entry is None:
        return default
    value, lineno = entry
    try:
        out = conv(value)
    except ValueError:
        raise ConfigSyntax(lineno, f"cannot parse {section}.{key} = {value!r}")
    if domain is not None and not domain(out):
        raise ConfigDomain(f"{section}.{key}", f"value {out} out of range")
    return out


def _parse_chain(sections) -> IncomeChain:
    economy = sections.get("economy", {})
    if "states" not in economy or "rates" not in economy:
        raise ConfigDomain("economy", "needs both 'states' and 'rates'")
    states_text, states_line = economy["states"]
    try:
        states = [float(tok) for tok in states_text.replace(",", " ").split()]
    except ValueError:
        raise ConfigSyntax(states_line, f"cannot parse states: {states_text!r}")

    rates_text, rates_line = economy["rates"]
    rows = []
    for row_text in rates_text.split(";"):
        try:
            row = [float(tok) for tok in row_text.replace(",", " ").split()]
        except ValueError:
            raise ConfigSyntax(rates_line, f"cannot parse rates row: {row_text!r}")
        if len(row) != len(states):
            raise ConfigSyntax(
                rates_line,
                f"rates row has {len(row)} entries, expected {len(states)}",
            )
        rows.append(row)
    if len(rows) != len(states):
        raise ConfigSyntax(
            rates_line, f"rates has {len(rows)} rows, expected {len(states)}"
        )
    try:
        return build_income_chain(states, np.array(rows))
    except ValidationError as err:
        raise ConfigDomain("economy.rates", "; ".join(err.violations))


def parse_config(path: str | Path) -> RunConfig:
    """Parse and fully validate a run configuration file.

    Missing optional keys get defaults (n=1000, tol=1e-8, seed=42,
    a_min=0, a_max=auto); every module-level precondition is checked here
    so commands can assume a coherent configuration.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigDomain("config", f"file not found: {path}")
    sections = _read_sections(path)
    if "economy" not in sections:
        raise ConfigDomain("economy", "section is required")

    chain = _parse_chain(sections)
    gamma = _scalar(sections, "economy", "gamma", 1.0, float, lambda g: g > 0)
    rho = _scalar(sections, "economy", "rho", 0.05, float, lambda x: x > 0)
    a_min = _scalar(sections, "economy", "a_min", 0.0, float, lambda x: x <= 0)
    try:
        economy = Economy(chain=chain, utility=Utility(gamma=gamma), rho=rho, a_min=a_min)
    except ValidationError as err:
        raise ConfigDomain("economy", "; ".join(err.violations))

    alpha = _scalar(sections, "firm", "alpha", 0.3, float)
    delta = _scalar(sections, "firm", "delta", 0.05, float)
    try:
        firm = FirmParams(alpha=alpha, delta=delta)
    except ValidationError as err:
        raise ConfigDomain("firm", "; ".join(err.violations))

    tau = _scalar(sections, "policy", "tau", 0.0, float)
    if not tau < 1:
        raise ConfigDomain("policy.tau", "must be < 1")
    i_nominal = _scalar(sections, "policy", "i", 0.02, float)
    b_nominal0 = _scalar(sections, "policy", "b_nominal0", 100.0, float, lambda x: x > 0)

    def _a_max(text: str):
        return "auto" if text == "auto" else float(text)

    try:
        settings = SolverSettings(
            n=_scalar(sections, "solver", "n", 1000, int),
            a_max=_scalar(sections, "solver", "a_max", "auto", _a_max),
            tol=_scalar(sections, "solver", "tol", 1e-8, float),
            max_iter=_scalar(sections, "solver", "max_iter", 300, int),
            stretch=_scalar(sections, "solver", "stretch", 1.0, float),
        )
    except ValidationError as err:
        raise ConfigDomain("solver", "; ".join(err.violations))

    scan = None
    if "scan" in sections:
        r_min = _scalar(sections, "scan", "r_min", None, float)
        r_max = _scalar(sections, "scan", "r_max", None, float)
        step = _scalar(sections, "scan", "step", None, float)
        if None in (r_min, r_max, step):
            raise ConfigDomain("scan", "needs r_min, r_max and step")
        if not (r_min < r_max < economy.rho):
            raise ConfigDomain("scan", f"need r_min < r_max < rho, got ({r_min}, {r_max})")
        if step <= 0:
            raise ConfigDomain("scan.step", "must be > 0")
        scan = (r_min, r_max, step)

    mc = McSettings(
        n_paths=_scalar(sections, "mc", "n_paths", 100_000, int, lambda x: x >= 1),
        burn_in=_scalar(sections, "mc", "burn_in", 200.0, float, lambda x: x > 0),
        horizon=_scalar(sections, "mc", "horizon", 50.0, float, lambda x: x > 0),
        seed=_scalar(sections, "mc", "seed", 42, int),
        dt=_scalar(sections, "mc", "dt", 0.1, float, lambda x: x > 0),
    )

    return RunConfig(
        economy=economy,
        firm=firm,
        tau=tau,
        i_nominal=i_nominal,
        b_nominal0=b_nominal0,
        settings=settings,
        scan=scan,
        mc=mc,
    )
