"""TOML run configuration.

Schema (all tables except ``[target]``, ``[sampler]`` and ``[transform]`` are
optional)::

    [target]
    name = "gaussian"          # gaussian | gaussian_mixture | banana | funnel
    dim = 2                    # remaining keys go to the target factory
    mean = [0.0, 0.0]
    cov_diag = [1.0, 1.0]

    [sampler]
    kind = "nice_full"         # one of skewmc.samplers.KINDS
    n_steps = 1000
    seed = 0
    omega = 0.5                # only for kinds that refresh with probability omega
    beta = 0.8                 # only for the persistent kinds
    acceptance = "metropolis"  # or "barker"
    x0 = [0.0, 0.0]            # optional; p0 and v0 likewise

    [transform]
    family = "leapfrog"        # leapfrog | coupling | l2hmc | mala
    # leapfrog: m, h, maps = "gradient" | "harmonic" | "random_tanh", seed,
    #           scale, base_stiffness, stiffness, lipschitz
    # coupling: K, seed, scale, step, splits = [[[0], [1]], ...]
    # l2hmc:    K, delta, seed, scale, nets = "random" | "leapfrog" | "zero"
    # mala:     gamma

    [transform.minus]          # lifted_density only: the v = -1 family;
    family = "coupling"        # defaults to the [transform] family

    [run]
    chains = 1
    workers = 1

    [output]
    dir = "out"
    prefix = "chain"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import tomli

from .core import standard_normal_momentum
from .samplers import L2HMC_KINDS, NICE_KINDS, SamplerConfig
from .targets import ZOO, make_target
from .transforms import (coupling_diffeo, hmc_spec, harmonic_spec, leapfrog_l2hmc_spec, mala_map,
                         max_step_size, random_coupling, random_l2hmc_spec, random_nice_spec,
                         zero_l2hmc_spec)

FAMILIES = ("leapfrog", "coupling", "l2hmc", "mala")
_FAMILY_KEYS = {
    "leapfrog": {"family", "m", "h", "maps", "seed", "scale", "base_stiffness", "stiffness",
                 "lipschitz"},
    "coupling": {"family", "K", "seed", "scale", "step", "splits"},
    "l2hmc": {"family", "K", "delta", "seed", "scale", "nets"},
    "mala": {"family", "gamma"},
}
_SAMPLER_KEYS = {"kind", "n_steps", "seed", "omega", "beta", "acceptance", "x0", "p0", "v0"}
_TOP_KEYS = {"target", "sampler", "transform", "run", "output"}


class ConfigError(ValueError):
    """Invalid configuration, with an optional ``line:column`` location."""

    def __init__(self, message: str, source: str = "<config>", line: Optional[int] = None,
                 col: Optional[int] = None):
        self.message, self.source, self.line, self.col = message, source, line, col
        where = source if line is None else f"{source}:{line}:{col or 1}"
        super().__init__(f"{where}: {message}")


class _Locator:
    """Maps ``(table, key)`` to a line in the raw text for error messages."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-\s]+?)\s*\]\s*(#.*)?$")

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def find(self, table: str, key: Optional[str] = None):
        current = ""
        header_line = None
        for k, line in enumerate(self.lines, 1):
            m = self._header.match(line)
            if m:
                current = re.sub(r"\s+", "", m.group(1))
                if current == table:
                    header_line = k
                continue
            if key is not None and current == table:
                km = re.match(rf"^(\s*){re.escape(key)}\s*=", line)
                if km:
                    return k, len(km.group(1)) + 1
        return (header_line, 1) if header_line else (None, None)


@dataclass
class RunConfig:
    """Parsed run configuration. See the module docstring for the schema."""

    target: Dict[str, Any]
    sampler: SamplerConfig
    transform: Dict[str, Any]
    minus: Optional[Dict[str, Any]] = None
    chains: int = 1
    workers: int = 1
    out_dir: str = "out"
    prefix: str = "chain"
    source: str = "<config>"
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    def with_overrides(self, seed=None, chains=None, workers=None, out_dir=None) -> "RunConfig":
        from dataclasses import replace
        sampler = self.sampler if seed is None else replace(self.sampler, seed=int(seed))
        return replace(self, sampler=sampler,
                       chains=self.chains if chains is None else int(chains),
                       workers=self.workers if workers is None else int(workers),
                       out_dir=self.out_dir if out_dir is None else str(out_dir))


def _table(doc, name, loc, source, required=True):
    value = doc.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing table [{name}]", source)
        return {}
    if not isinstance(value, dict):
        line, col = loc.find("", name)
        raise ConfigError(f"{name} must be a table", source, line, col)
    return value


def _check_keys(table: dict, allowed, name, loc, source):
    for key in table:
        if key not in allowed and not isinstance(table[key], dict):
            line, col = loc.find(name, key)
            raise ConfigError(f"unknown key {key!r} in [{name}]; allowed: "
                              f"{', '.join(sorted(allowed))}", source, line, col)


def _check_family(table: dict, name: str, loc, source) -> str:
    fam = table.get("family")
    if fam not in FAMILIES:
        line, col = loc.find(name, "family")
        line = line or loc.find(name)[0]
        raise ConfigError(f"[{name}] family must be one of {', '.join(FAMILIES)}, got {fam!r}",
                          source, line, col)
    _check_keys({k: v for k, v in table.items() if k != "minus"}, _FAMILY_KEYS[fam], name, loc,
                source)
    return fam


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a TOML run configuration.

    Raises:
        ConfigError: syntax or schema problems, located by line and column
            where possible.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"\(at line (\d+), column (\d+)\)", str(exc))
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        if m:
            raise ConfigError(f"syntax error: {msg}", source, int(m.group(1)),
                              int(m.group(2))) from None
        raise ConfigError(f"syntax error: {msg}", source) from None
    loc = _Locator(text)
    for key in doc:
        if key not in _TOP_KEYS:
            line, col = loc.find("", key)
            line = line or loc.find(key)[0]
            raise ConfigError(f"unknown table or key {key!r}", source, line, col)

    target = dict(_table(doc, "target", loc, source))
    if target.get("name") not in ZOO:
        line, col = loc.find("target", "name")
        raise ConfigError(f"target name must be one of {', '.join(sorted(ZOO))}, "
                          f"got {target.get('name')!r}", source, line, col)
    try:
        dim = _build_target(target).dim
    except (TypeError, ValueError) as exc:
        line, col = loc.find("target")
        raise ConfigError(f"invalid target: {exc}", source, line, col) from None

    sampler = dict(_table(doc, "sampler", loc, source))
    _check_keys(sampler, _SAMPLER_KEYS, "sampler", loc, source)
    for key in ("kind", "n_steps"):
        if key not in sampler:
            raise ConfigError(f"[sampler] needs {key!r}", source, loc.find("sampler")[0], 1)
    try:
        kw = dict(sampler)
        for arr in ("x0", "p0"):
            if arr in kw:
                kw[arr] = np.asarray(kw[arr], dtype=float)
        cfg = SamplerConfig(**kw)
    except (TypeError, ValueError) as exc:
        bad = next((k for k in ("kind", "omega", "beta", "n_steps", "seed", "acceptance", "v0")
                    if k in sampler and k in str(exc)), None)
        line, col = loc.find("sampler", bad) if bad else loc.find("sampler")
        raise ConfigError(f"invalid sampler: {exc}", source, line, col) from None
    for arr in ("x0", "p0"):
        if arr in sampler and np.size(sampler[arr]) != dim:
            line, col = loc.find("sampler", arr)
            raise ConfigError(f"{arr} needs {dim} entries to match the target, "
                              f"got {np.size(sampler[arr])}", source, line, col)

    transform = dict(_table(doc, "transform", loc, source))
    fam = _check_family(transform, "transform", loc, source)
    minus = transform.pop("minus", None)
    expected = ("leapfrog",) if cfg.kind in NICE_KINDS else (
        ("l2hmc",) if cfg.kind in L2HMC_KINDS else ("coupling", "mala"))
    if fam not in expected:
        line, col = loc.find("transform", "family")
        raise ConfigError(f"sampler kind {cfg.kind!r} needs transform family "
                          f"{' or '.join(expected)}, got {fam!r}", source, line, col)
    if minus is not None:
        if cfg.kind != "lifted_density":
            line, col = loc.find("transform.minus")
            raise ConfigError("[transform.minus] is only used by lifted_density", source, line,
                              col)
        mfam = _check_family(minus, "transform.minus", loc, source)
        if mfam not in expected:
            line, col = loc.find("transform.minus", "family")
            raise ConfigError(f"[transform.minus] family must be coupling or mala, got {mfam!r}",
                              source, line, col)

    run = _table(doc, "run", loc, source, required=False)
    _check_keys(run, {"chains", "workers"}, "run", loc, source)
    output = _table(doc, "output", loc, source, required=False)
    _check_keys(output, {"dir", "prefix"}, "output", loc, source)
    for key in ("chains", "workers"):
        v = run.get(key, 1)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            line, col = loc.find("run", key)
            raise ConfigError(f"run.{key} must be a positive integer", source, line, col)
    return RunConfig(target=target, sampler=cfg, transform=transform, minus=minus,
                     chains=run.get("chains", 1), workers=run.get("workers", 1),
                     out_dir=str(output.get("dir", "out")), prefix=str(output.get("prefix", "chain")),
                     source=source, raw=doc)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    return parse_config(text, str(path))


# -- building objects ----------------------------------------------------------------

def _build_target(spec: Dict[str, Any]):
    params = {k: v for k, v in spec.items() if k != "name"}
    return make_target(spec["name"], **params)


def _build_family(spec: Dict[str, Any], target, kind: str, info: List[str]):
    fam = spec["family"]
    d = target.dim
    if fam == "leapfrog":
        m, h = int(spec.get("m", 1)), float(spec["h"])
        maps = spec.get("maps", "gradient")
        if maps == "gradient":
            lf = hmc_spec(target, m, h, spec.get("lipschitz"))
        elif maps == "harmonic":
            lf = harmonic_spec(d, m, h, spec.get("stiffness", 0.5))
        elif maps == "random_tanh":
            lf = random_nice_spec(d, m, h, seed=int(spec.get("seed", 0)),
                                  scale=float(spec.get("scale", 0.2)),
                                  base_stiffness=float(spec.get("base_stiffness", 0.0)))
        else:
            raise ConfigError(f"unknown leapfrog maps {maps!r}")
        L = lf.lipschitz_L
        if L is None:
            info.append(f"leapfrog m={m} h={h}: Lipschitz constant unknown, step bound not certified")
        else:
            info.append(f"leapfrog m={m} h={h}: L={L:.6g}, h_max={max_step_size(L, m):.6g}, "
                        f"certified={lf.certified()}")
        return lf
    if fam == "coupling":
        spec_c = random_coupling(d, K=int(spec.get("K", 2)), seed=int(spec.get("seed", 0)),
                                 scale=float(spec.get("scale", 0.3)), step=spec.get("step"),
                                 splits=spec.get("splits"))
        info.append(f"coupling K={spec_c.K} seed={spec.get('seed', 0)}")
        return coupling_diffeo(spec_c)
    if fam == "l2hmc":
        K, delta = int(spec.get("K", 2)), float(spec.get("delta", 0.1))
        nets = spec.get("nets", "random")
        if nets == "random":
            out = random_l2hmc_spec(target, K, delta, seed=int(spec.get("seed", 0)),
                                    scale=float(spec.get("scale", 0.2)))
        elif nets == "leapfrog":
            out = leapfrog_l2hmc_spec(target, K, 2.0 * delta)
        elif nets == "zero":
            out = zero_l2hmc_spec(target, K, delta)
        else:
            raise ConfigError(f"unknown l2hmc nets {nets!r}")
        info.append(f"l2hmc K={K} delta={delta} nets={nets}")
        return out
    gamma = float(spec["gamma"])
    info.append(f"mala gamma={gamma}")
    return mala_map(target, gamma)


@dataclass
class BuiltRun:
    target: Any
    phi: Any
    transform: Any
    g_minus: Any
    info: List[str]


def build_run(cfg: RunConfig) -> BuiltRun:
    """Instantiate the target, momentum density and transforms.

    ``info`` collects human-readable notes for the run log, including the
    Lipschitz constant and step-bound certification of leapfrog maps.
    """
    target = _build_target(cfg.target)
    phi = standard_normal_momentum(target.dim)
    info: List[str] = [f"target {cfg.target['name']} dim={target.dim}"]
    try:
        transform = _build_family(cfg.transform, target, cfg.sampler.kind, info)
        g_minus = None
        if cfg.sampler.kind == "lifted_density":
            g_minus = (_build_family(cfg.minus, target, cfg.sampler.kind, info)
                       if cfg.minus is not None else transform)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise ConfigError(exc.message, cfg.source) from None
        raise ConfigError(f"invalid transform: {exc}", cfg.source) from None
    return BuiltRun(target, phi, transform, g_minus, info)
