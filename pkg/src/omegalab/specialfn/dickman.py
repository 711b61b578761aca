"""Dickman's function rho on a uniform grid.

rho is tabulated from the identity ``u rho(u) = int_{u-1}^{u} rho(t) dt``.
Marching the differential form ``u rho'(u) = -rho(u-1)`` directly is
unstable in relative terms: rounding errors excite solutions of
``u f(u) = int_{u-1}^u f + C`` with ``C != 0``, which decay only
algebraically and soon swamp rho.  Here every node is instead set from
the identity, so ``C = 0`` is imposed at each step.

The grid step is ``1/N`` so every integer is a node.  For the newest
segment ``[u_{i-1}, u_i]`` the integral of rho is obtained from the
differential equation::

    int rho = h rho(u_{i-1}) - int_{u_{i-1}}^{u_i} (u_i - s) rho(s - 1) / s ds,

which needs only delayed values.  These are interpolated by Lagrange
polynomials whose nodes stay inside one unit interval, where rho is
smooth.  The remaining integral is computed by Romberg extrapolation,
once from trapezoid sums and once from midpoint sums, giving two
independent tables.
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DomainError, ToleranceError

DICKMAN_MAGIC = b"OMLRHO\x00\x00"
DICKMAN_VERSION = 1
_HEADER = struct.Struct("<8sIddIQdd")
DEFAULT_ORDER = 9


def _lagrange_basis(nodes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Matrix ``B`` with ``B @ f(nodes)`` = interpolant at ``pts``."""
    B = np.ones((len(pts), len(nodes)))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                B[:, j] *= (pts - xm) / (xj - xm)
    return B


class _StepInterpolator:
    """Local Lagrange stencils for a grid with ``n`` steps per unit interval.

    For the segment ``[j, j+1]`` (in units of the step) of a unit interval,
    the stencil uses ``order + 1`` nodes of that same unit interval, as
    centred as possible around the segment.
    """

    def __init__(self, n: int, order: int):
        self.n = n
        self.order = order
        self.first = []
        for j in range(n):
            lo = min(max(j - order // 2, 0), n - order)
            self.first.append(lo)

    def stencil(self, j: int) -> tuple[int, np.ndarray]:
        lo = self.first[j]
        return lo, np.arange(lo, lo + self.order + 1, dtype=np.float64)


def _romberg(levels: list[float], ratio: float = 4.0) -> tuple[float, float]:
    """Richardson table for an ``h^2, h^4, ...`` expansion; returns (value, change)."""
    table = [levels[0]]
    prev_best = levels[0]
    change = math.inf
    for i in range(1, len(levels)):
        row = [levels[i]]
        for m in range(1, i + 1):
            f = ratio**m
            row.append(row[m - 1] + (row[m - 1] - table[m - 1]) / (f - 1))
        change = abs(row[-1] - prev_best)
        prev_best = row[-1]
        table = row
    return prev_best, change


@dataclass(frozen=True, eq=False)
class DickmanTable:
    """Grid values of rho at ``u = i * step`` for ``0 <= u <= umax``."""

    umax: float
    step: float
    values: np.ndarray
    order: int = DEFAULT_ORDER
    integrator_agreement: float = 0.0
    identity_residual: float = 0.0
    alt_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def per_unit(self) -> int:
        return int(round(1.0 / self.step))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.step

    def __call__(self, u):
        return self.rho(u)

    def rho(self, u):
        """rho at ``u`` (scalar or array) by local interpolation."""
        arr = np.asarray(u, dtype=np.float64)
        out = np.empty(arr.shape)
        flat, res = arr.ravel(), out.ravel()
        if np.any(flat > self.umax + 1e-12):
            raise DomainError(f"u beyond table range umax={self.umax}")
        interp = _StepInterpolator(self.per_unit, self.order)
        n = self.per_unit
        for i, v in enumerate(flat):
            if v < 0:
                res[i] = 0.0
            elif v <= 1:
                res[i] = 1.0
            else:
                pos = v * n
                k = int(math.floor(pos))
                if k == len(self.values) - 1 or pos == k:
                    res[i] = self.values[min(k, len(self.values) - 1)]
                    continue
                unit, j = divmod(k, n)
                lo, nodes = interp.stencil(j)
                vals = self.values[unit * n + lo: unit * n + lo + self.order + 1]
                res[i] = float((_lagrange_basis(nodes, np.array([pos - unit * n])) @ vals)[0])
        return float(out) if out.ndim == 0 else out

    def derivative(self, u):
        """rho'(u), taken from the right at integers; ``-rho(u-1)/u`` for ``u > 1``."""
        if u < 1:
            return 0.0
        return -self.rho(u - 1) / u

    def to_csv(self, path) -> None:
        write_grid_csv(path, self.grid, self.values)

    def save(self, path) -> None:
        head = _HEADER.pack(DICKMAN_MAGIC, DICKMAN_VERSION, self.umax, self.step, self.order,
                            len(self.values), self.integrator_agreement, self.identity_residual)
        body = head + self.values.astype("<f8").tobytes()
        Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))

    @classmethod
    def load(cls, path) -> "DickmanTable":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size + 4:
            raise ValueError("truncated Dickman table file")
        body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
        if zlib.crc32(body) != crc:
            raise ValueError("Dickman table checksum mismatch")
        magic, version, umax, step, order, n, agree, resid = _HEADER.unpack_from(body)
        if magic != DICKMAN_MAGIC:
            raise ValueError("not a Dickman table file")
        if version != DICKMAN_VERSION:
            raise ValueError(f"unsupported Dickman table version {version}")
        values = np.frombuffer(body[_HEADER.size:], dtype="<f8").astype(np.float64)
        if len(values) != n:
            raise ValueError("Dickman table length mismatch")
        return cls(umax, step, values, order, agree, resid)


def write_grid_csv(path, u, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "value"])
        for a, b in zip(u, values):
            w.writerow([repr(float(a)), repr(float(b))])


class _Marcher:
    """One of the two step integrators, with cached stencil matrices."""

    def __init__(self, n: int, order: int, method: str):
        self.n = n
        self.order = order
        self.method = method
        self.interp = _StepInterpolator(n, order)
        # trapezoid sums halve the step (error ratio 4); midpoint sums are
        # nested when the step is divided by 3 (error ratio 9)
        self.ratio = 4.0 if method == "trapezoid" else 9.0
        self.max_level = 8 if method == "trapezoid" else 5
        self._cache: dict = {}

    def _points(self, lev: int) -> np.ndarray:
        if self.method == "trapezoid":
            return np.linspace(0.0, 1.0, 2**lev + 1)
        cells = 3**lev
        return (np.arange(cells) + 0.5) / cells

    def _basis(self, j: int, lev: int) -> np.ndarray:
        key = (j, lev)
        B = self._cache.get(key)
        if B is None:
            _, nodes = self.interp.stencil(j)
            B = self._cache[key] = _lagrange_basis(nodes, j + self._points(lev))
        return B

    def level_sum(self, j, vals, u0, h, lev) -> float:
        pts = self._points(lev)
        f = (self._basis(j, lev) @ vals) * (h * (1.0 - pts)) / (u0 + pts * h)
        if self.method == "trapezoid":
            return h / (len(f) - 1) * (f.sum() - 0.5 * (f[0] + f[-1]))
        return h * f.sum() / len(f)

    def march(self, steps: int, tol: float) -> np.ndarray:
        n, order = self.n, self.order
        h = 1.0 / n
        rho = np.ones(steps + 1)
        seg = np.full(steps + 1, h)
        seg[0] = 0.0
        for i in range(n + 1, steps + 1):
            # segment [u_{i-1}, u_i]; delayed argument in [u_{i-1-n}, u_{i-n}]
            unit, j = divmod(i - 1 - n, n)
            lo = self.interp.first[j]
            vals = rho[unit * n + lo: unit * n + lo + order + 1]
            u0 = (i - 1) * h
            levels = []
            for lev in range(self.max_level + 1):
                levels.append(self.level_sum(j, vals, u0, h, lev))
                if lev < 2:
                    continue
                best, change = _romberg(levels, self.ratio)
                if change <= tol * abs(best):
                    break
            else:
                raise ToleranceError(f"{self.method} integrator did not reach tol {tol} at u={i * h}")
            seg[i] = h * rho[i - 1] - best
            rho[i] = math.fsum(seg[i - n + 1: i + 1]) / (i * h)
        return rho


def dickman_build(umax: float = 30.0, step: float = 1.0 / 128, tol: float = 1e-13,
                  order: int = DEFAULT_ORDER) -> DickmanTable:
    """Tabulate rho on ``[0, umax]``.

    Args:
        umax: Upper end of the table (``>= 1``).
        step: Grid step; must be ``1/N`` with ``N >= 64``.
        tol: Relative convergence tolerance of each step integral.
        order: Degree of the local interpolating polynomials.

    Raises:
        DomainError: on invalid arguments.
        ToleranceError: if a step integral does not converge.
    """
    if umax < 1:
        raise DomainError("umax must be >= 1")
    if not step <= 1 / 64:
        raise DomainError("step must be <= 1/64")
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-12:
        raise DomainError("step must be the reciprocal of an integer")
    if order > n:
        raise DomainError("interpolation order exceeds nodes per unit")
    steps = int(math.ceil(umax * n - 1e-9))
    primary = _Marcher(n, order, "trapezoid").march(steps, tol)
    alt = _Marcher(n, order, "midpoint").march(steps, tol)
    agreement = float(np.max(np.abs(primary - alt) / primary))
    table = DickmanTable(steps / n, 1.0 / n, primary, order, agreement, 0.0, alt)
    resid = float(np.max(identity_residuals(table), initial=0.0))
    if resid > max(tol, 64 * np.finfo(float).eps):
        raise ToleranceError(f"integral identity residual {resid:.3g} exceeds tol {tol:.3g}")
    return DickmanTable(steps / n, 1.0 / n, primary, order, agreement, resid, alt)


def segment_integrals(table: DickmanTable) -> np.ndarray:
    """``int_{u_i}^{u_{i+1}} rho`` for every grid segment, by Gauss-Legendre on the interpolant."""
    n = table.per_unit
    interp = _StepInterpolator(n, table.order)
    gx, gw = np.polynomial.legendre.leggauss((table.order + 2) // 2 + 1)
    pts = 0.5 * (gx + 1.0)
    weights = []
    for j in range(n):
        lo, nodes = interp.stencil(j)
        weights.append((lo, 0.5 * gw @ _lagrange_basis(nodes, j + pts)))
    v = table.values
    out = np.empty(len(v) - 1)
    for i in range(len(v) - 1):
        unit, j = divmod(i, n)
        lo, w = weights[j]
        out[i] = table.step * float(w @ v[unit * n + lo: unit * n + lo + table.order + 1])
    return out


def identity_residuals(table: DickmanTable) -> np.ndarray:
    """Relative residual of ``u rho(u) = int_{u-1}^u rho`` at every node ``u > 1``."""
    n = table.per_unit
    seg = segment_integrals(table)
    u = table.grid
    idx = np.arange(n + 1, len(table.values))
    # direct window sums: prefix-sum differences would cancel catastrophically
    integral = np.lib.stride_tricks.sliding_window_view(seg, n)[1:].sum(axis=1)
    lhs = u[idx] * table.values[idx]
    return np.abs(lhs - integral) / lhs


def dickman_r(table: DickmanTable, u: float) -> float:
    """``r(u) = rho(u-1) / (u rho(u))`` (equals ``-rho'(u)/rho(u)``)."""
    if not 1 < u <= table.umax:
        raise DomainError(f"u must lie in (1, {table.umax}]")
    return table.rho(u - 1) / (u * table.rho(u))


def dickman_asymptotic_check(table: DickmanTable, u: float) -> float:
    """``log rho(u) / (-u (log u + log log(u+2) - 1))``."""
    if u < 2:
        raise DomainError("u must be >= 2")
    return math.log(table.rho(u)) / (-u * (math.log(u) + math.log(math.log(u + 2)) - 1.0))
