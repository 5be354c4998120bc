"""Accelerator configuration, its legal parameter space, and the area model.

A configuration has seven searched fields: the PE array shape (pe_x, pe_y),
three on-chip cache sizes (activations, weights, outputs), the dataflow type,
and the order of the five tile loops.  Loop orders are written as 5-letter
strings over the dimension letters, outermost loop first:

    B = batch, I = input channel, O = output channel,
    H = output height (rows), W = output width (columns)
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidDocument

PE_MIN = 3
PE_MAX = 64
PE_CHOICES = tuple(range(PE_MIN, PE_MAX + 1))  # 62 values

CACHE_STEP_KB = 16
CACHE_CHOICES_KB = tuple(range(64, 529, CACHE_STEP_KB))  # 30 values

LOOP_DIMS = "BIOHW"


class Dataflow(str, Enum):
    """Which operand stays resident in the PE array."""

    WS = "WS"  # weight stationary
    OS = "OS"  # output stationary
    RS = "RS"  # row stationary


def all_loop_orders() -> tuple[str, ...]:
    """All 120 permutations of the five tile loops, lexicographically sorted."""
    return tuple(sorted("".join(p) for p in itertools.permutations(LOOP_DIMS)))


def is_loop_order(order: str) -> bool:
    return isinstance(order, str) and len(order) == 5 and sorted(order) == sorted(LOOP_DIMS)


@dataclass(frozen=True)
class AcceleratorConfig:
    """One point in the accelerator parameter space.

    Construction performs only type checks; domain invariants are reported by
    :func:`validate_config` so that out-of-range candidates can be examined.
    """

    pe_x: int
    pe_y: int
    act_cache_kb: int
    wgt_cache_kb: int
    out_cache_kb: int
    dataflow: Dataflow
    loop_order: str

    def __post_init__(self):
        object.__setattr__(self, "dataflow", Dataflow(self.dataflow))

    def as_tuple(self) -> tuple:
        return (
            self.pe_x,
            self.pe_y,
            self.act_cache_kb,
            self.wgt_cache_kb,
            self.out_cache_kb,
            self.dataflow.value,
            self.loop_order,
        )


def validate_config(cfg: AcceleratorConfig) -> list[str]:
    """Return every violated invariant; an empty list means the config is legal."""
    violations = []
    for name in ("pe_x", "pe_y"):
        value = getattr(cfg, name)
        if value < PE_MIN:
            violations.append(f"{name} below {PE_MIN}")
        elif value > PE_MAX:
            violations.append(f"{name} above {PE_MAX}")
    for name in ("act_cache_kb", "wgt_cache_kb", "out_cache_kb"):
        value = getattr(cfg, name)
        if value not in CACHE_CHOICES_KB:
            if value < CACHE_CHOICES_KB[0] or value > CACHE_CHOICES_KB[-1]:
                violations.append(f"{name} outside {CACHE_CHOICES_KB[0]}..{CACHE_CHOICES_KB[-1]} KB")
            else:
                violations.append(f"{name} not on {CACHE_STEP_KB}KB grid")
    if not is_loop_order(cfg.loop_order):
        violations.append(f"loop_order {cfg.loop_order!r} is not a permutation of {LOOP_DIMS}")
    return violations


@dataclass(frozen=True)
class AreaConstants:
    """Area model coefficients (mm²); placeholders of sane magnitude, not silicon data."""

    per_pe_mm2: float = 0.002
    per_kb_mm2: float = 0.0005
    fixed_mm2: float = 0.1

    def __post_init__(self):
        for name in ("per_pe_mm2", "per_kb_mm2", "fixed_mm2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def area(cfg: AcceleratorConfig, constants: AreaConstants | None = None) -> float:
    """Die area estimate: PE term + cache term + fixed overhead."""
    constants = constants or AreaConstants()
    cache_kb = cfg.act_cache_kb + cfg.wgt_cache_kb + cfg.out_cache_kb
    return (
        cfg.pe_x * cfg.pe_y * constants.per_pe_mm2
        + cache_kb * constants.per_kb_mm2
        + constants.fixed_mm2
    )


@dataclass(frozen=True)
class ParamSpace:
    """Candidate lists for each of the seven config fields.

    Restricting any list to a subset yields a reduced space for oracle
    experiments; every candidate must satisfy the config invariants.
    """

    pe_x: tuple[int, ...] = PE_CHOICES
    pe_y: tuple[int, ...] = PE_CHOICES
    act_cache_kb: tuple[int, ...] = CACHE_CHOICES_KB
    wgt_cache_kb: tuple[int, ...] = CACHE_CHOICES_KB
    out_cache_kb: tuple[int, ...] = CACHE_CHOICES_KB
    dataflows: tuple[Dataflow, ...] = (Dataflow.WS, Dataflow.OS, Dataflow.RS)
    loop_orders: tuple[str, ...] = field(default_factory=all_loop_orders)

    def __post_init__(self):
        object.__setattr__(self, "pe_x", tuple(self.pe_x))
        object.__setattr__(self, "pe_y", tuple(self.pe_y))
        object.__setattr__(self, "act_cache_kb", tuple(self.act_cache_kb))
        object.__setattr__(self, "wgt_cache_kb", tuple(self.wgt_cache_kb))
        object.__setattr__(self, "out_cache_kb", tuple(self.out_cache_kb))
        object.__setattr__(self, "dataflows", tuple(Dataflow(d) for d in self.dataflows))
        object.__setattr__(self, "loop_orders", tuple(self.loop_orders))
        for name in ("pe_x", "pe_y", "act_cache_kb", "wgt_cache_kb", "out_cache_kb",
                     "dataflows", "loop_orders"):
            if not getattr(self, name):
                raise ValueError(f"{name} candidate list is empty")
        bad = [v for v in self.pe_x + self.pe_y if v < PE_MIN or v > PE_MAX]
        if bad:
            raise ValueError(f"PE candidates outside [{PE_MIN}, {PE_MAX}]: {bad}")
        bad = [
            v
            for v in self.act_cache_kb + self.wgt_cache_kb + self.out_cache_kb
            if v not in CACHE_CHOICES_KB
        ]
        if bad:
            raise ValueError(f"cache candidates outside the legal grid: {bad}")
        bad = [o for o in self.loop_orders if not is_loop_order(o)]
        if bad:
            raise ValueError(f"invalid loop orders: {bad}")

    @property
    def field_sizes(self) -> tuple[int, ...]:
        return (
            len(self.pe_x),
            len(self.pe_y),
            len(self.act_cache_kb),
            len(self.wgt_cache_kb),
            len(self.out_cache_kb),
            len(self.dataflows),
            len(self.loop_orders),
        )

    def config_at(self, choices) -> AcceleratorConfig:
        """Build a config from per-field candidate indices."""
        c0, c1, c2, c3, c4, c5, c6 = choices
        return AcceleratorConfig(
            self.pe_x[c0],
            self.pe_y[c1],
            self.act_cache_kb[c2],
            self.wgt_cache_kb[c3],
            self.out_cache_kb[c4],
            self.dataflows[c5],
            self.loop_orders[c6],
        )


def space_cardinality(space: ParamSpace) -> int:
    total = 1
    for n in space.field_sizes:
        total *= n
    return total


def iter_configs(space: ParamSpace):
    """Yield every config exactly once, nested in field order (last field fastest)."""
    for values in itertools.product(
        space.pe_x,
        space.pe_y,
        space.act_cache_kb,
        space.wgt_cache_kb,
        space.out_cache_kb,
        space.dataflows,
        space.loop_orders,
    ):
        yield AcceleratorConfig(*values)


_CONFIG_KEYS = (
    "pe_x",
    "pe_y",
    "act_cache_kb",
    "wgt_cache_kb",
    "out_cache_kb",
    "dataflow",
    "loop_order",
)


def load_accel(text: str) -> AcceleratorConfig:
    """Parse an accelerator config document (JSON object with the 7 fields)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDocument(f"accelerator document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidDocument("accelerator document must be a JSON object")
    missing = [k for k in _CONFIG_KEYS if k not in doc]
    if missing:
        raise InvalidDocument(f"accelerator document missing fields: {missing}")
    try:
        cfg = AcceleratorConfig(
            int(doc["pe_x"]),
            int(doc["pe_y"]),
            int(doc["act_cache_kb"]),
            int(doc["wgt_cache_kb"]),
            int(doc["out_cache_kb"]),
            Dataflow(doc["dataflow"]),
            str(doc["loop_order"]),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidDocument(f"accelerator document: {exc}") from exc
    violations = validate_config(cfg)
    if violations:
        raise InvalidDocument("invalid accelerator config: " + "; ".join(violations))
    return cfg


def accel_to_doc(cfg: AcceleratorConfig) -> str:
    payload = dict(zip(_CONFIG_KEYS, cfg.as_tuple()))
    return json.dumps(payload, indent=2)


def load_space(text: str) -> ParamSpace:
    """Parse a parameter-space document; omitted fields default to the full space."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDocument(f"space document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidDocument("space document must be a JSON object")
    kwargs = {}
    mapping = {
        "pe_x": "pe_x",
        "pe_y": "pe_y",
        "act_cache_kb": "act_cache_kb",
        "wgt_cache_kb": "wgt_cache_kb",
        "out_cache_kb": "out_cache_kb",
        "dataflow": "dataflows",
        "loop_order": "loop_orders",
    }
    unknown = set(doc) - set(mapping)
    if unknown:
        raise InvalidDocument(f"space document: unknown fields {sorted(unknown)}")
    for key, attr in mapping.items():
        if key in doc:
            if not isinstance(doc[key], list) or not doc[key]:
                raise InvalidDocument(f"space document: {key} must be a non-empty list")
            kwargs[attr] = tuple(doc[key])
    try:
        return ParamSpace(**kwargs)
    except ValueError as exc:
        raise InvalidDocument(f"space document: {exc}") from exc
