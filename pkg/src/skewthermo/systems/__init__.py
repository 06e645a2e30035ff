"""Concrete base maps: Gauss, beta, GLS, Manneville–Pomeau jump branches, affine IFS."""
import json

from ..shift import ConfigError
from .beta import (
    GOLDEN,
    BetaExpansion,
    BetaSystem,
    beta_digits,
    beta_expansion_of_one,
    beta_induced_map,
    beta_natural_extension_step,
    beta_orbit,
    gls_partition_from_beta,
    golden_induced_map,
    golden_natural_extension,
    golden_psi,
)
from .gauss import (
    TERMINATED,
    GaussStep,
    OrbitTerminated,
    gauss_geometric_potential,
    gauss_map,
    gauss_natural_extension_step,
)
from .gls import GLSSystem, dyadic_gls, gls_natural_extension_step
from .ifs import AffineIFS, GaussIFS, GeometricPotential, IntervalIFS, distortion_constant
from .parabolic import InversionError, ParabolicSystem, derivative_slope, mp_jump_branches

_SCHEMA = {
    "gauss": ({"digits"}, set()),
    "beta": ({"beta", "intervals"}, {"beta"}),
    "gls": ({"lengths", "lefts"}, {"lengths", "lefts"}),
    "mp": ({"alpha", "cutoff"}, {"alpha"}),
    "ifs": ({"ratios", "offsets"}, {"ratios", "offsets"}),
}


def load_system(doc):
    """Build a system from ``{"kind": ..., "params": {...}}``.

    Kinds: ``gauss`` (``digits``: count or list, default 1000), ``beta``
    (``beta``, ``intervals`` for the GLS truncation, default 200), ``gls``
    (``lengths``, ``lefts``), ``mp`` (``alpha``, ``cutoff`` default 2000) and
    ``ifs`` (affine ``ratios``, ``offsets``). Beta systems load as their GLS
    partition viewed as an affine IFS, paired with the :class:`BetaSystem`.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise ConfigError("system must be an object")
    unknown = set(doc) - {"kind", "params"}
    if unknown or "kind" not in doc:
        raise ConfigError(f"system needs 'kind' and optional 'params'; unknown keys {sorted(unknown)}")
    kind = doc["kind"]
    params = doc.get("params", {})
    if kind not in _SCHEMA:
        raise ConfigError(f"unknown system kind {kind!r}")
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    allowed, required = _SCHEMA[kind]
    if set(params) - allowed:
        raise ConfigError(f"unknown {kind} params {sorted(set(params) - allowed)}")
    if required - set(params):
        raise ConfigError(f"missing {kind} params {sorted(required - set(params))}")
    try:
        if kind == "gauss":
            return GaussIFS(params.get("digits", 1000))
        if kind == "beta":
            sys = BetaSystem(float(params["beta"]))
            count = int(params.get("intervals", 200))
            count = min(count, len(sys.partition(count)))
            return gls_partition_from_beta(sys, count).ifs()
        if kind == "gls":
            return GLSSystem(params["lengths"], params["lefts"]).ifs()
        if kind == "mp":
            return ParabolicSystem(float(params["alpha"]), int(params.get("cutoff", 2000)))
        return AffineIFS(params["ratios"], params["offsets"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {kind} params: {exc}") from exc
