"""Built-in metrics and the map from equation numbers to suite checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import FD_STEP2
from .riemann import MetricProvider

#: tolerance floor for residual checks when metric derivatives are finite differences
FD_TOLERANCE = 5e-6


@dataclass(frozen=True)
class MetricCatalogEntry:
    name: str
    dim: int
    signature: tuple[int, int]
    domain: np.ndarray
    provider: MetricProvider
    coords: tuple[str, ...] = ()
    ricci_scalar: object = None  # float, callable(x) -> float, or None
    deriv: str = "analytic"
    tolerance_floor: float = 0.0
    description: str = ""
    flat: bool = False
    scaling_eps0: float = 1e-2
    extras: dict = field(default_factory=dict, compare=False)

    def metric(self, deriv: str | None = None) -> MetricProvider:
        mode = deriv or self.deriv
        return self.provider if mode == self.provider.mode else self.provider.with_mode(mode)

    def expected_ricci(self, x) -> float | None:
        if self.ricci_scalar is None:
            return None
        if callable(self.ricci_scalar):
            return float(self.ricci_scalar(np.asarray(x, float)))
        return float(self.ricci_scalar)

    def sample_box(self, reach: float = 0.05) -> np.ndarray:
        """Interior box: shrink each interval by a margin covering displacements and FD stencils."""
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        margin = np.maximum(reach * (hi - lo), 2 * FD_STEP2 * np.maximum(1.0, np.maximum(abs(lo), abs(hi))))
        margin = np.maximum(margin, 0.06)
        return np.stack([lo + margin, hi - margin], axis=1)

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        box = self.sample_box()
        u = rng.random((int(count), self.dim))
        return box[:, 0] + u * (box[:, 1] - box[:, 0])


def _entry(name, dim, signature, domain, fn, **kw) -> MetricCatalogEntry:
    domain = np.array(domain, float)
    mode = kw.get("deriv", "analytic")
    provider = MetricProvider.from_function(fn, dim, signature, name, domain, mode=mode)
    return MetricCatalogEntry(name, dim, tuple(signature), domain, provider, **kw)


def _schwarzschild(x, mass=1.0):
    f = 1.0 - 2.0 * mass / x[1]
    return [
        [f, 0.0, 0.0, 0.0],
        [0.0, -1.0 / f, 0.0, 0.0],
        [0.0, 0.0, -x[1] ** 2, 0.0],
        [0.0, 0.0, 0.0, -((x[1] * np.sin(x[2])) ** 2)],
    ]


def _build() -> dict[str, MetricCatalogEntry]:
    pi = np.pi
    entries = [
        _entry(
            "euclidean2", 2, (2, 0), [[-2, 2], [-2, 2]],
            lambda x: [[1.0, 0.0], [0.0, 1.0]],
            coords=("x", "y"), ricci_scalar=0.0, flat=True, description="flat plane, Cartesian",
        ),
        _entry(
            "euclidean3", 3, (3, 0), [[-2, 2], [-2, 2], [-2, 2]],
            lambda x: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            coords=("x", "y", "z"), ricci_scalar=0.0, flat=True, description="flat space, Cartesian",
        ),
        _entry(
            "minkowski2", 2, (1, 1), [[-2, 2], [-2, 2]],
            lambda x: [[1.0, 0.0], [0.0, -1.0]],
            coords=("t", "x"), ricci_scalar=0.0, flat=True, description="flat Lorentzian plane",
        ),
        _entry(
            "polar2", 2, (2, 0), [[0.5, 3.0], [-pi, pi]],
            lambda x: [[1.0, 0.0], [0.0, x[0] ** 2]],
            coords=("r", "phi"), ricci_scalar=0.0, flat=True, description="flat plane, polar coordinates",
        ),
        _entry(
            "sphere2", 2, (2, 0), [[0.1, pi - 0.1], [-pi, pi]],
            lambda x: [[1.0, 0.0], [0.0, np.sin(x[0]) ** 2]],
            coords=("theta", "phi"), ricci_scalar=2.0, description="unit 2-sphere",
        ),
        _entry(
            "hyperbolic2", 2, (2, 0), [[-2.0, 2.0], [0.5, 3.0]],
            lambda x: [[1.0 / x[1] ** 2, 0.0], [0.0, 1.0 / x[1] ** 2]],
            coords=("x", "y"), ricci_scalar=-2.0, description="Poincare half-plane",
        ),
        _entry(
            "paraboloid2", 2, (2, 0), [[-1.5, 1.5], [-1.5, 1.5]],
            lambda x: [[1.0 + x[0] ** 2, x[0] * x[1]], [x[0] * x[1], 1.0 + x[1] ** 2]],
            coords=("x", "y"), ricci_scalar=lambda x: 2.0 / (1.0 + x[0] ** 2 + x[1] ** 2) ** 2,
            description="graph z = (x^2 + y^2)/2, non-diagonal metric",
        ),
        _entry(
            "schwarzschild", 4, (1, 3), [[-1.0, 1.0], [3.0, 10.0], [0.3, pi - 0.3], [-pi, pi]],
            _schwarzschild,
            coords=("t", "r", "theta", "phi"), ricci_scalar=0.0, deriv="fd", tolerance_floor=FD_TOLERANCE, scaling_eps0=3e-2,
            description="Schwarzschild exterior, M = 1",
        ),
    ]
    return {e.name: e for e in entries}


_CATALOG = _build()


def catalog() -> list[MetricCatalogEntry]:
    return list(_CATALOG.values())


def names() -> list[str]:
    return list(_CATALOG)


def get(name: str) -> MetricCatalogEntry:
    try:
        return _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown metric {name!r}; known: {', '.join(_CATALOG)}") from None


def entry_from_provider(provider: MetricProvider, ricci_scalar=None) -> MetricCatalogEntry:
    """Wrap a user metric (e.g. loaded from a file) as a catalog entry."""
    if provider.domain is None:
        raise ValueError(f"metric {provider.name!r} needs a domain box")
    return MetricCatalogEntry(
        provider.name or "custom",
        provider.dim,
        tuple(provider.signature),
        provider.domain,
        provider,
        coords=provider.coords,
        ricci_scalar=ricci_scalar,
        deriv=provider.mode,
        tolerance_floor=FD_TOLERANCE if provider.mode == "fd" else 0.0,
        description="user metric",
    )


# ------------------------------------------------------------ coverage

#: equation number -> suite identity ids exercising it, or an out-of-scope reason
COVERAGE: dict[int, tuple[str, ...] | str] = {
    1: "out of scope: undeformed translation law, recovered by the identity jet (unit tests)",
    2: "out of scope: undeformed action x' = x + t~, recovered by the identity jet (unit tests)",
    3: ("eq3",),
    4: ("eq10", "eq32", "eq33"),
    5: ("eq16", "eq17"),
    6: ("eq6",),
    7: ("eq7",),
    8: ("eq32",),
    9: ("eq33",),
    10: ("eq10",),
    11: ("eq11",),
    12: ("eq12",),
    13: ("eq13",),
    14: ("eq14",),
    15: ("eq15",),
    16: ("eq16",),
    17: ("eq17",),
    18: ("eq18",),
    19: ("eq13",),
    20: ("eq14",),
    21: ("eq15",),
    22: ("eq22",),
    23: ("eq23",),
    24: ("eq24",),
    25: ("eq25",),
    26: ("eq26",),
    27: ("eq27",),
    28: ("eq28",),
    29: ("eq29",),
    30: ("eq28", "eq31"),
    31: ("eq31",),
    32: ("eq32",),
    33: ("eq33",),
    34: ("eq34",),
    35: ("eq3", "eq45"),
    36: ("eq36",),
    37: ("eq27", "eq37"),
    38: ("eq29", "bianchi"),
    39: ("eq39",),
    40: ("eq40",),
    41: ("eq41",),
    42: ("eq42",),
    43: ("eq43",),
    44: ("eq44",),
    45: ("eq45",),
    46: ("eq46",),
    47: ("eq47",),
    48: ("eq48",),
}


def coverage_lines() -> list[str]:
    out = []
    for eq in sorted(COVERAGE):
        v = COVERAGE[eq]
        out.append(f"eq{eq:<3d} " + (", ".join(v) if isinstance(v, tuple) else v))
    return out
