"""JSON problem files: {"family": ..., "params": {...}}."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from ..core.problem import InvalidProblemError
from .burglar import BurglarParams, make_burglar_problem
from .disorder import DisorderParams, make_disorder_problem
from .house import HouseParams, make_house_problem
from .investment import InvestmentParams, make_investment_problem

FAMILIES = ("house-sum", "house-product", "burglar-sum", "burglar-product", "disorder", "investment")


class ConfigError(ValueError):
    """A problem file that cannot be turned into a problem."""


def _laws(params: dict, key: str = "distribution") -> list:
    m = params.get("m")
    if key + "s" in params:
        laws = list(params[key + "s"])
        if m is not None and len(laws) != m:
            raise ConfigError(f"'{key}s' has {len(laws)} entries but m = {m}")
        return laws
    if key in params:
        if m is None:
            raise ConfigError(f"a single '{key}' needs the dimension 'm'")
        return [params[key]] * int(m)
    raise ConfigError(f"missing '{key}' or '{key}s'")


def _vector(params: dict, key: str) -> Any:
    if key not in params:
        raise ConfigError(f"missing parameter '{key}'")
    v = params[key]
    m = params.get("m")
    if m is not None and not isinstance(v, list):
        return [v] * int(m)
    return v


def build_problem(cfg: dict):
    """Construct a problem from a parsed config dict."""
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ConfigError("config must be an object with a 'family'")
    family, params = cfg["family"], cfg.get("params", {})
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    try:
        if family.startswith("house"):
            hp = HouseParams(tuple(_laws(params)), params.get("c"), params.get("rho"),
                             bool(params.get("cost_per_coordinate", False)))
            return make_house_problem(hp, family.split("-")[1])
        if family.startswith("burglar"):
            laws = _laws(params)
            bp = BurglarParams(tuple(_vector({**params, "m": len(laws)}, "p")), tuple(laws),
                               bool(params.get("shared_delta", False)), params.get("alphas"))
            return make_burglar_problem(bp, family.split("-")[1])
        if family == "disorder":
            dp = DisorderParams(*(tuple(_vector(params, k)) for k in ("lam", "mu0", "mu1", "c")))
            return make_disorder_problem(dp)
        jumps = params.get("jumps", [])
        ip = InvestmentParams(float(params["r"]), tuple(_vector(params, "y")), tuple(_vector(params, "a")),
                              tuple(jumps))
        return make_investment_problem(ip)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        kind = "invalid problem" if isinstance(exc, InvalidProblemError) else "bad parameters"
        raise ConfigError(f"{family}: {kind}: {exc}") from exc


def load_config(path: str | Path) -> tuple[dict, str]:
    """Parsed config and the sha256 of the file bytes."""
    raw = Path(path).read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def load_problem(path: str | Path):
    cfg, digest = load_config(path)
    return build_problem(cfg), cfg, digest
