"""Run configuration files (YAML).

Minimal example::

    kind: gas-run
    preset: conductor
    n: 128
    seed: 7
    chain: {sweeps: 6000, burn_in: 1000, thinning: 5}

A full model can be given instead of a preset::

    model:
      domain: plane
      kernel: freelog
      regular_part: zero
      potential: {kind: quadratic, c: 0.5}
      beta: 2
      n: 64

Unknown keys are errors.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigParse
from .gas import ChainSettings
from .geometry import Domain
from .model import PRESETS, EnsembleSpec, ExternalPotential, PairKernel, RegularPart, preset

KINDS = ("ensemble-sample", "gas-run", "equilibrium", "free-energy", "verify", "plot-data")

TOP_KEYS = {"kind", "preset", "model", "n", "beta", "seed", "threads", "output", "chains",
            "chain", "matrices", "matrix_class", "equilibrium", "free_energy", "samples",
            "checkpoint", "checkpoint_every", "resume", "law", "bins"}
MODEL_KEYS = {"domain", "kernel", "regular_part", "potential", "beta", "n", "kappa", "shift"}
POTENTIAL_KEYS = {"kind", "c"}
CHAIN_KEYS = {"sweeps", "burn_in", "thinning", "target_acceptance", "adapt_interval",
              "initializer", "init_scale", "step"}
EQUILIBRIUM_KEYS = {"resolution", "iterations", "tol", "bound", "law", "discrete", "restarts"}
FREE_ENERGY_KEYS = {"alphas", "chains", "shift"}

CAUCHY_MESSAGE = ("the Cauchy ensemble's Gibbs measure is normalizable only for beta > 1; "
                  "got beta={beta}")


@dataclass
class RunConfig:
    kind: str
    spec: EnsembleSpec
    preset: str | None = None
    chain: ChainSettings = field(default_factory=ChainSettings)
    seed: int = 0
    threads: int | None = None
    output: str = "out"
    chains: int = 1
    matrices: int = 16
    matrix_class: str | None = None
    equilibrium: dict = field(default_factory=dict)
    free_energy: dict = field(default_factory=dict)
    samples: str | None = None
    checkpoint: str | None = None
    checkpoint_every: int = 0
    resume: bool = False
    law: str | None = None
    bins: int | None = None

    def echo(self) -> dict:
        """JSON-friendly view of the resolved configuration."""
        s = self.spec
        return {
            "kind": self.kind, "preset": self.preset,
            "model": {"domain": str(s.domain), "kernel": s.kernel.kind,
                      "regular_part": s.regular.kind,
                      "potential": {"kind": s.potential.kind, "c": s.potential.c},
                      "beta": s.beta, "n": s.n, "kappa": s.kappa, "shift": s.shift},
            "chain": asdict(self.chain), "seed": self.seed, "threads": self.threads,
            "output": self.output, "chains": self.chains, "matrices": self.matrices,
            "matrix_class": self.matrix_class, "equilibrium": self.equilibrium,
            "free_energy": self.free_energy, "samples": self.samples,
            "checkpoint": self.checkpoint, "checkpoint_every": self.checkpoint_every,
            "resume": self.resume, "law": self.law, "bins": self.bins,
        }


def _line_of(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            if k.value == key:
                return k.start_mark.line + 1
    return None


def _check_keys(data, allowed, where, node=None, src=""):
    if not isinstance(data, dict):
        raise ConfigParse(f"{src}{where}: expected a mapping, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            line = _line_of(node, key)
            at = f" (line {line})" if line else ""
            raise ConfigParse(f"{src}unknown key {key!r} in {where}{at}; "
                              f"allowed: {', '.join(sorted(allowed))}")


def _child(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.value == key:
                return v
    return None


def check_beta(spec: EnsembleSpec):
    if spec.regular.kind == "cauchy" and spec.beta <= 1:
        raise ConfigParse(CAUCHY_MESSAGE.format(beta=spec.beta))


def build_spec(data: dict, node=None, src="") -> tuple[EnsembleSpec, str | None]:
    name = data.get("preset")
    n = data.get("n")
    beta = data.get("beta")
    if beta is not None and not float(beta) > 0:
        raise ConfigParse(f"{src}beta must be positive, got {beta}")
    if name is not None and "model" in data:
        raise ConfigParse(f"{src}give either 'preset' or 'model', not both")
    try:
        if name is not None:
            if str(name).lower() not in PRESETS:
                raise ConfigParse(f"{src}unknown preset {name!r}; choose from {', '.join(PRESETS)}")
            spec = preset(str(name), n=int(n) if n is not None else 64,
                          beta=float(beta) if beta is not None else None)
        elif "model" in data:
            m = data["model"]
            mnode = _child(node, "model")
            _check_keys(m, MODEL_KEYS, "model", mnode, src)
            pot = m.get("potential", {"kind": "zero"})
            if isinstance(pot, str):
                pot = {"kind": pot}
            _check_keys(pot, POTENTIAL_KEYS, "model.potential", _child(mnode, "potential"), src)
            mb = m.get("beta", beta if beta is not None else 2.0)
            if not float(mb) > 0:
                raise ConfigParse(f"{src}beta must be positive, got {mb}")
            spec = EnsembleSpec(
                domain=Domain.parse(str(m.get("domain", "line"))),
                kernel=PairKernel(m.get("kernel", "freelog")),
                regular=RegularPart(m.get("regular_part", "zero")),
                potential=ExternalPotential(pot.get("kind", "zero"), float(pot.get("c", 0.0))),
                beta=float(mb), n=int(m.get("n", n if n is not None else 64)),
                kappa=float(m.get("kappa", 0.0)), shift=float(m.get("shift", 0.0)))
            if n is not None:
                spec = spec.replace(n=int(n))
        else:
            raise ConfigParse(f"{src}config needs a 'preset' or a 'model' section")
    except ConfigParse:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigParse(f"{src}bad model definition: {exc}") from exc
    check_beta(spec)
    return spec, (str(name).lower() if name is not None else None)


def from_dict(data: dict, node=None, src: str = "") -> RunConfig:
    _check_keys(data, TOP_KEYS, "config", node, src)
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigParse(f"{src}'kind' must be one of {', '.join(KINDS)}; got {kind!r}")
    spec, name = build_spec(data, node, src)
    chain = data.get("chain", {}) or {}
    _check_keys(chain, CHAIN_KEYS, "chain", _child(node, "chain"), src)
    eqm = data.get("equilibrium", {}) or {}
    _check_keys(eqm, EQUILIBRIUM_KEYS, "equilibrium", _child(node, "equilibrium"), src)
    fe = data.get("free_energy", {}) or {}
    _check_keys(fe, FREE_ENERGY_KEYS, "free_energy", _child(node, "free_energy"), src)
    try:
        settings = ChainSettings(**chain).validate()
    except Exception as exc:
        raise ConfigParse(f"{src}bad chain settings: {exc}") from exc
    try:
        return RunConfig(
            kind=kind, spec=spec, preset=name, chain=settings,
            seed=int(data.get("seed", 0)),
            threads=None if data.get("threads") is None else int(data["threads"]),
            output=str(data.get("output", "out")), chains=int(data.get("chains", 1)),
            matrices=int(data.get("matrices", 16)), matrix_class=data.get("matrix_class"),
            equilibrium=dict(eqm), free_energy=dict(fe), samples=data.get("samples"),
            checkpoint=data.get("checkpoint"),
            checkpoint_every=int(data.get("checkpoint_every", 0)),
            resume=bool(data.get("resume", False)), law=data.get("law"),
            bins=None if data.get("bins") is None else int(data["bins"]))
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"{src}bad value: {exc}") from exc


def parse_config(path) -> RunConfig:
    """Read a YAML run configuration, apply defaults, reject unknown keys."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    src = f"{os.fspath(path)}: "
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParse(f"{src}invalid YAML: {exc}") from exc
    if data is None:
        raise ConfigParse(f"{src}empty config")
    return from_dict(data, node, src)
