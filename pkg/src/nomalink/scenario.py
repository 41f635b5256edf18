"""Scenario files: parsing, validation, presets.

The format is flat structured text with named sections and key = value
lines; values are Python-style literals (numbers, booleans, strings,
bracketed lists, including complex entries for beamforming matrices).
`#` and `;` start comments. A top-level `preset = "paper-v"` line (or the
--preset flag) loads the reference configuration, which individual keys
may then override.

Sections: [system], [clusters], [rates], [power], [sweep], [mc].
"""

import ast
import dataclasses
from dataclasses import dataclass

import numpy as np

from .corrchan import (
    ClusterSet,
    CorrelationPair,
    SystemConfig,
    correlation_pair,
    sort_clusters,
)
from .errors import NomalinkError, ScenarioError
from .mcsim import TrialPlan
from .outage import PowerAllocation, RatePlan
from .optim import default_power_allocation

_SECTIONS = ("system", "clusters", "rates", "power", "sweep", "mc")

PRESET_PAPER_V = {
    "system": {
        "n_t": 3,
        "n_r": 3,
        "n_streams": 3,
        "alpha": 3.0,
        "k_friis": 1.0,
        "snr_db": 70.0,
        "rho_t": 0.5,
        "rho_r": 0.5,
    },
    "clusters": {"positions": [(10.0, 0.0), (0.0, 20.0), (0.0, -30.0), (-40.0, 0.0)]},
    "rates": {"rate": 2.0},
    "power": {"mode": "default", "epsilon": 0.7},
}

PRESETS = {"paper-v": PRESET_PAPER_V}


@dataclass(frozen=True)
class SnrGrid:
    """Inclusive dB grid start/stop with positive step."""

    start_db: float
    stop_db: float
    step_db: float

    def __post_init__(self):
        if self.step_db <= 0:
            raise ScenarioError("sweep step_db must be positive")
        if self.stop_db < self.start_db:
            raise ScenarioError("sweep stop_db must be >= start_db")

    def points(self):
        out = []
        v = self.start_db
        while v <= self.stop_db + 1e-9:
            out.append(round(v, 12))
            v += self.step_db
        return out


@dataclass(frozen=True)
class Scenario:
    """Fully validated scenario: system plus derived immutable tables.

    `power` is None only in optimized mode, where the allocation comes
    from the solver at run time (per SNR point, since the asymptotic
    constants scale with the transmit SNR).
    """

    system: SystemConfig
    clusters: ClusterSet
    corr: CorrelationPair
    rates: RatePlan
    power_mode: str
    power: PowerAllocation = None
    epsilon: float = None
    sweep: SnrGrid = None
    mc: TrialPlan = None
    rates_explicit: bool = True

    def at_snr(self, snr_db: float) -> "Scenario":
        """Same scenario with the transmit SNR replaced (correlation and
        geometry are SNR-independent and shared)."""
        if snr_db == self.system.snr_db:
            return self
        system = dataclasses.replace(self.system, snr_db=snr_db)
        return dataclasses.replace(self, system=system)

    def with_power(self, power: PowerAllocation) -> "Scenario":
        return dataclasses.replace(self, power=power)

    def snr_points(self):
        if self.sweep is None:
            return [self.system.snr_db]
        return self.sweep.points()


def _parse_value(text: str, origin: str, lineno: int):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if text and all(ch.isalnum() or ch in "-_." for ch in text):
            return text  # bare string
        raise ScenarioError(f"{origin}:{lineno}: cannot parse value {text!r}")


def parse_scenario_text(text: str, origin: str = "<string>"):
    """Parse the structured-text format into {section: {key: value}}.

    Top-level keys before any section header land in the "" section
    (currently only `preset` is meaningful there).
    """
    sections = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ScenarioError(f"{origin}:{lineno}: unknown section [{name}]")
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"{origin}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if not key:
            raise ScenarioError(f"{origin}:{lineno}: empty key")
        sections.setdefault(current, {})[key] = _parse_value(val, origin, lineno)
    return sections


def _expand_rho(sections):
    """The `rho` shorthand sets both correlation coefficients; expanding
    it before any preset merge lets it override preset values."""
    sys_sec = sections.get("system")
    if sys_sec and "rho" in sys_sec:
        rho = sys_sec.pop("rho")
        sys_sec.setdefault("rho_t", rho)
        sys_sec.setdefault("rho_r", rho)
    return sections


def _merge_preset(sections, preset_name, origin):
    if preset_name is None:
        return sections
    if preset_name not in PRESETS:
        raise ScenarioError(f"{origin}: unknown preset {preset_name!r}")
    merged = {name: dict(vals) for name, vals in PRESETS[preset_name].items()}
    for name, vals in sections.items():
        if not name:
            continue
        merged.setdefault(name, {}).update(vals)
    return merged


def build_scenario(sections: dict, origin: str = "<config>") -> Scenario:
    """Validate sections and construct the Scenario (invariants enforced
    by the underlying types; violations surface as ScenarioError)."""
    try:
        return _build(sections, origin)
    except ScenarioError:
        raise
    except NomalinkError as exc:
        raise ScenarioError(f"{origin}: {exc}") from exc


def _build(sections, origin):
    if not sections.get("system"):
        raise ScenarioError(f"{origin}: missing [system] section")
    sys_sec = dict(sections["system"])  # work on a copy, callers keep theirs
    if "rho" in sys_sec:
        rho = sys_sec.pop("rho")
        sys_sec.setdefault("rho_t", rho)
        sys_sec.setdefault("rho_r", rho)
    beam = sys_sec.pop("beamforming", None)
    if isinstance(beam, str):
        if beam != "identity":
            raise ScenarioError(f"{origin}: beamforming must be a matrix or 'identity'")
        beam = None
    elif beam is not None:
        beam = np.asarray(beam, dtype=complex)
    allowed = {"n_t", "n_r", "n_streams", "alpha", "k_friis", "snr_db", "rho_t", "rho_r"}
    unknown = set(sys_sec) - allowed
    if unknown:
        raise ScenarioError(f"{origin}: unknown [system] keys {sorted(unknown)}")
    for key in ("n_t", "n_r", "n_streams"):
        if key not in sys_sec:
            raise ScenarioError(f"{origin}: [system] requires {key}")
    system = SystemConfig(
        n_t=int(sys_sec["n_t"]),
        n_r=int(sys_sec["n_r"]),
        n_streams=int(sys_sec["n_streams"]),
        alpha=float(sys_sec.get("alpha", 3.0)),
        k_friis=float(sys_sec.get("k_friis", 1.0)),
        snr_db=float(sys_sec.get("snr_db", 70.0)),
        rho_t=float(sys_sec.get("rho_t", 0.0)),
        rho_r=float(sys_sec.get("rho_r", 0.0)),
        beamforming=beam,
    )

    clu_sec = sections.get("clusters")
    if not clu_sec:
        raise ScenarioError(f"{origin}: missing [clusters] section")
    if "positions" in clu_sec:
        clusters = sort_clusters(clu_sec["positions"], system.alpha, system.k_friis)
    elif "distances" in clu_sec:
        clusters = sort_clusters(
            np.asarray(clu_sec["distances"], dtype=float),
            system.alpha,
            system.k_friis,
        )
    else:
        raise ScenarioError(f"{origin}: [clusters] needs positions or distances")

    m, k = system.n_streams, clusters.k_clusters
    rates_sec = sections.get("rates", {})
    rates_explicit = bool(rates_sec)
    if "matrix" in rates_sec:
        rates = RatePlan(np.asarray(rates_sec["matrix"], dtype=float))
        if rates.shape != (m, k):
            raise ScenarioError(f"{origin}: rates matrix must be {m}x{k}")
    else:
        rates = RatePlan.broadcast(float(rates_sec.get("rate", 2.0)), m, k)

    pow_sec = dict(sections.get("power", {"mode": "default", "epsilon": 0.7}))
    mode = pow_sec.pop("mode", "default")
    power = None
    epsilon = None
    if mode == "default":
        epsilon = float(pow_sec.pop("epsilon", 0.7))
        if pow_sec:
            raise ScenarioError(f"{origin}: stray [power] keys {sorted(pow_sec)}")
        power = default_power_allocation(epsilon, rates, m, k)
    elif mode == "explicit":
        if "matrix" not in pow_sec:
            raise ScenarioError(f"{origin}: explicit power mode needs matrix")
        mat = np.asarray(pow_sec.pop("matrix"), dtype=float)
        if mat.ndim == 1:
            mat = np.tile(mat, (m, 1))
        if pow_sec:
            raise ScenarioError(f"{origin}: stray [power] keys {sorted(pow_sec)}")
        if mat.shape != (m, k):
            raise ScenarioError(f"{origin}: power matrix must be {m}x{k}")
        power = PowerAllocation(mat)
    elif mode == "optimized":
        if pow_sec:
            raise ScenarioError(f"{origin}: stray [power] keys {sorted(pow_sec)}")
    else:
        raise ScenarioError(f"{origin}: power mode must be default|explicit|optimized")

    sweep_sec = sections.get("sweep")
    sweep = None
    if sweep_sec:
        try:
            sweep = SnrGrid(
                start_db=float(sweep_sec["start_db"]),
                stop_db=float(sweep_sec["stop_db"]),
                step_db=float(sweep_sec["step_db"]),
            )
        except KeyError as exc:
            raise ScenarioError(f"{origin}: [sweep] requires {exc.args[0]}")

    mc_sec = sections.get("mc")
    mc = None
    if mc_sec:
        if "trials" not in mc_sec:
            raise ScenarioError(f"{origin}: [mc] requires trials")
        mc = TrialPlan(
            trials=int(mc_sec["trials"]),
            seed=int(mc_sec.get("seed", 0)),
            partitions=int(mc_sec.get("partitions", 1)),
            antithetic=bool(mc_sec.get("antithetic", False)),
        )

    return Scenario(
        system=system,
        clusters=clusters,
        corr=correlation_pair(system),
        rates=rates,
        power_mode=mode,
        power=power,
        epsilon=epsilon,
        sweep=sweep,
        mc=mc,
        rates_explicit=rates_explicit,
    )


def load_scenario(path=None, preset: str = None) -> Scenario:
    """Load and validate a scenario file; `preset` (or a top-level
    `preset = "..."` line) supplies defaults the file may override."""
    if path is None:
        sections = {"": {}}
        origin = "<preset>"
        if preset is None:
            raise ScenarioError("need a config file or a preset")
    else:
        origin = str(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ScenarioError(f"{origin}: {exc}") from exc
        sections = parse_scenario_text(text, origin)
    file_preset = sections.get("", {}).get("preset")
    preset = preset or file_preset
    sections = _expand_rho(sections)
    merged = _merge_preset(sections, preset, origin) if preset else sections
    return build_scenario(merged, origin)
