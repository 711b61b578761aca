"""Experiment specifications: a small TOML key-value schema.

Example::

    kind = "pik_short"
    X = 100000000
    h = 3650
    k = 3
    samples = 200
    seed = 42
    band_lo = 0.5
    band_hi = 1.5
    h_trend = [3650, 36500]

Recognised keys and their meaning are listed in ``FIELD_DOCS``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import DomainError

KINDS = (
    "pik_short",
    "pik_smallk",
    "friable_short",
    "friable_all",
    "correlation",
    "sieve_deficiency",
    "smallk_density",
    "facto_check",
    "mvt_diag",
)

KIND_DOCS = {
    "pik_short": "sampled short-interval counts of omega(n) = k against delta_k(X) h",
    "pik_smallk": "sampled counts for k >= 5 against the floor delta_k(X) h / F_k(X)",
    "friable_short": "sampled short-interval friable counts against rho(u) h",
    "friable_all": "deterministic grid scan of friable counts in (x, x + h sqrt(x)]",
    "correlation": "joint counts of omega(n) = k1, omega(n + b) = k2 over (X, 2X]",
    "sieve_deficiency": "omega(n) = k with no prime factor in ]P, Q], over (X, 2X]",
    "smallk_density": "counts of E_k intersected with the structured set S in windows of length y0",
    "facto_check": "factorisation of the S-restricted Dirichlet polynomial along one layer",
    "mvt_diag": "mean-value integral of an indicator polynomial against both brackets",
}

FIELD_DOCS = {
    "kind": "experiment kind, one of KINDS",
    "X": "scale; samples are drawn from [X, 2X - h]",
    "h": "interval length (friable_all: multiplier of sqrt(x))",
    "k": "number of distinct prime factors, or a list of them",
    "k_range": "inclusive [lo, hi] alternative to a k list",
    "u": "friable exponent, bound = X^(1/u)",
    "b": "list of shifts (correlation)",
    "samples": "number of sampled x (grid points for friable_all, t values for facto_check)",
    "seed": "64-bit seed of the sampling generator",
    "band_lo": "lower end of the accepted ratio band",
    "band_hi": "upper end of the accepted ratio band",
    "windows": "list of [P, Q] prime windows (sieve_deficiency)",
    "P": "lower end of a single prime window",
    "Q": "upper end of a single prime window",
    "layers": "list of [P, Q, H] layers for a manual S configuration",
    "infinity": "[P, Q, H] layer at infinity for a manual S configuration",
    "s_mode": "'manual', 'smallk' or 'none' (smallk_density)",
    "y0": "window length (smallk_density)",
    "eps": "epsilon of the small-k threshold and the small-k preset",
    "psi": "psi(X) of the friable admissibility condition; never defaulted",
    "c": "constant in the satisfied test observed >= c * floor",
    "h_trend": "further interval lengths evaluated on the same seed",
    "a1": "leading coefficient of the first linear form",
    "a2": "leading coefficient of the second linear form",
    "K1": "exponent of the optional (b/phi(b))^K1 normalisation column",
    "set": "integer set: all, E3, friable:100 or random:0.05",
    "j": "layer index (facto_check), an integer or 'inf'",
    "T": "height of the mean-value integral",
    "quad_step": "quadrature step of the mean-value integral",
}

_SAMPLED = {"pik_short", "pik_smallk", "friable_short", "smallk_density"}


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated description of one experiment.

    Attributes:
        kind: One of ``KINDS``.
        X: Scale of the experiment.
        k: Tuple of factor counts (a single entry except for correlations).
        b: Tuple of shifts for correlations.
        windows: Tuple of ``(P, Q)`` prime windows.
        layers: Tuple of ``(P, Q, H)`` manual layers.
    """

    kind: str
    X: int
    h: int | None = None
    k: tuple = ()
    u: float | None = None
    b: tuple = ()
    samples: int = 1
    seed: int = 0
    band_lo: float = 0.5
    band_hi: float = 1.5
    windows: tuple = ()
    layers: tuple = ()
    infinity: tuple | None = None
    s_mode: str | None = None
    y0: int | None = None
    eps: float | None = None
    psi: float | None = None
    c: float = 1.0
    h_trend: tuple = ()
    a1: int = 1
    a2: int = 1
    K1: float | None = None
    set: str = "all"
    j: int | str = 1
    T: float = 100.0
    quad_step: float = 0.05

    def __post_init__(self):
        validate(self)

    @property
    def single_k(self) -> int:
        if len(self.k) != 1:
            raise DomainError(f"{self.kind} needs exactly one k, got {list(self.k)}")
        return self.k[0]

    @property
    def window_length(self) -> int:
        """Length of the sampled windows (``y0`` for smallk_density, else ``h``)."""
        if self.kind == "smallk_density" and self.y0 is not None:
            return self.y0
        return self.h

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, seed=int(seed))

    def to_params(self) -> dict:
        """Plain-data echo of the spec used in reports."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[key] = value
        return out


def validate(spec: ExperimentSpec) -> None:
    """Check the schema invariants, raising ``DomainError`` on the first problem."""
    if spec.kind not in KINDS:
        raise DomainError(f"unknown kind {spec.kind!r}; expected one of {', '.join(KINDS)}")
    if spec.X < 1:
        raise DomainError("X must be >= 1")
    if spec.samples < 1:
        raise DomainError("samples must be >= 1")
    if not 0 <= spec.seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    if not spec.band_lo < spec.band_hi:
        raise DomainError("band_lo must be < band_hi")
    if spec.h is not None and not 1 <= spec.h <= spec.X:
        raise DomainError("need 1 <= h <= X")
    if spec.y0 is not None and not 1 <= spec.y0 <= spec.X:
        raise DomainError("need 1 <= y0 <= X")
    for h in spec.h_trend:
        if not 1 <= h <= spec.X:
            raise DomainError("every h_trend entry must satisfy 1 <= h <= X")
    if any(k < 0 for k in spec.k):
        raise DomainError("k must be >= 0")

    kind = spec.kind
    if kind in _SAMPLED or kind == "friable_all":
        if spec.window_length is None:
            raise DomainError(f"{kind} needs h" + (" or y0" if kind == "smallk_density" else ""))
    if kind in ("pik_short", "pik_smallk", "sieve_deficiency", "smallk_density") and len(spec.k) != 1:
        raise DomainError(f"{kind} needs exactly one k")
    if kind == "pik_smallk":
        if spec.single_k < 5:
            raise DomainError("pik_smallk needs k >= 5")
        if spec.eps is None:
            raise DomainError("pik_smallk needs eps for the threshold check")
    if kind in ("friable_short", "friable_all"):
        if spec.u is None or not spec.u >= 1:
            raise DomainError(f"{kind} needs u >= 1")
    if kind == "correlation":
        if not spec.b:
            raise DomainError("correlation needs a nonempty b list")
        if not spec.k:
            raise DomainError("correlation needs k or k_range")
        if any(b < 0 for b in spec.b):
            raise DomainError("shifts b must be >= 0")
        if spec.a1 < 1 or spec.a2 < 1:
            raise DomainError("a1 and a2 must be >= 1")
    if kind == "sieve_deficiency":
        if not spec.windows:
            raise DomainError("sieve_deficiency needs P and Q (or windows)")
        for P, Q in spec.windows:
            if not 2 <= P < Q <= spec.X:
                raise DomainError(f"window ({P}, {Q}) violates 2 <= P < Q <= X")
    if kind == "smallk_density" and spec.s_mode not in (None, "manual", "smallk", "none"):
        raise DomainError("s_mode must be manual, smallk or none")
    if kind == "facto_check" and not spec.layers and spec.infinity is None:
        raise DomainError("facto_check needs manual layers")
    if kind == "mvt_diag" and not (spec.T > 0 and 0 < spec.quad_step <= 0.1):
        raise DomainError("mvt_diag needs T > 0 and 0 < quad_step <= 0.1")


def _as_tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def _int(value, name: str) -> int:
    if isinstance(value, bool):
        raise DomainError(f"{name} must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise DomainError(f"{name} must be an integer, got {value}")
        return int(value)
    if isinstance(value, str):
        try:
            return int(float(value)) if "e" in value.lower() else int(value)
        except ValueError:
            raise DomainError(f"{name} must be an integer, got {value!r}") from None
    return int(value)


def spec_from_mapping(data: dict) -> ExperimentSpec:
    """Build a spec from parsed key-value data (as read from TOML)."""
    data = dict(data)
    unknown = sorted(set(data) - set(FIELD_DOCS))
    if unknown:
        raise DomainError(f"unknown spec keys: {', '.join(unknown)}")
    if "kind" not in data or "X" not in data:
        raise DomainError("a spec needs at least kind and X")
    ks = [_int(v, "k") for v in _as_tuple(data.pop("k", None))]
    if "k_range" in data:
        lo, hi = (_int(v, "k_range") for v in data.pop("k_range"))
        ks.extend(range(lo, hi + 1))
    windows = [tuple(_int(v, "windows") for v in w) for w in data.pop("windows", [])]
    if "P" in data or "Q" in data:
        windows.append((_int(data.pop("P", 0), "P"), _int(data.pop("Q", 0), "Q")))
    layers = tuple(tuple(float(v) for v in lay) for lay in data.pop("layers", []))
    infinity = data.pop("infinity", None)
    j = data.pop("j", 1)
    kw = dict(
        kind=str(data.pop("kind")),
        X=_int(data.pop("X"), "X"),
        k=tuple(ks),
        b=tuple(_int(v, "b") for v in _as_tuple(data.pop("b", None))),
        windows=tuple(windows),
        layers=layers,
        infinity=tuple(float(v) for v in infinity) if infinity is not None else None,
        h_trend=tuple(_int(v, "h_trend") for v in _as_tuple(data.pop("h_trend", None))),
        j=j if j == "inf" else _int(j, "j"),
    )
    for key in ("h", "y0", "samples", "seed", "a1", "a2"):
        if key in data:
            kw[key] = _int(data.pop(key), key)
    for key in ("u", "band_lo", "band_hi", "eps", "psi", "c", "K1", "T", "quad_step"):
        if key in data:
            value = float(data.pop(key))
            if not math.isfinite(value):
                raise DomainError(f"{key} must be finite")
            kw[key] = value
    for key in ("s_mode", "set"):
        if key in data:
            kw[key] = str(data.pop(key))
    return ExperimentSpec(**kw)


def parse_spec(text: str) -> ExperimentSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise DomainError(f"cannot parse spec: {exc}") from None
    return spec_from_mapping(data)


def load_spec(path) -> ExperimentSpec:
    return parse_spec(Path(path).read_text())
