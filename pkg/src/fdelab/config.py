"""INI-style run configuration for the command-line front end.

Three sections, ``[model]``, ``[solver]`` and ``[experiment]``, plus an
optional ``[output]`` with ``dir``.  Unknown sections or keys are errors.
Numbers may be written as fractions (``1/128``); lists are comma separated.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FdeLabError
from .mild_solver import FdeProblem, SolverConfig
from .semigroups import MatrixSemigroup, SpectralNeumannSemigroup
from .state_space import HistorySegment


class ConfigError(FdeLabError, ValueError):
    pass


MODEL_KEYS = {
    "semigroup": "spectral",
    "diffusivities": "0.1",
    "length": "1.0",
    "modes": "16",
    "nodes": "",
    "matrix": "",
    "reaction": "logistic",
    "a0": "1.0",
    "b": "1.0",
    "forcing": "0.2",
    "delay_coeff": "1.0",
    "tau": "0.5",
    "omega": "1.0",
    "initial": "constant",
    "initial_value": "0.5",
    "initial_amplitude": "0.0",
}

SOLVER_KEYS = {
    "h": "1/128",
    "picard_tol": "1e-10",
    "picard_max_iters": "50",
    "r": "0.0",
}

EXPERIMENT_KEYS = {
    "seed": "42",
    "t_end": "5.0",
    "samples": "200",
    "norm_samples": "500",
    "set_size": "10",
    "decomp_samples": "5",
    "equi_samples": "10",
    "r_values": "0.5, 1, 2",
    "t_factors": "0.5, 1, 2",
    "epsilon": "0.05",
    "mnc_resolution": "1.0",
    "max_iters": "200",
    "tol": "1e-6",
    "orbit_r": "",
    "orbit_starts": "1",
    "periodicity_tol": "1e-5",
    "steps": "1/16, 1/32, 1/64, 1/128",
    "order_floor": "1.5",
}

OUTPUT_KEYS = {"dir": "fde_lab_out"}

SECTIONS = {"model": MODEL_KEYS, "solver": SOLVER_KEYS, "experiment": EXPERIMENT_KEYS,
            "output": OUTPUT_KEYS}


def _num(text, key):
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse number {text!r}") from None


def _nums(text, key):
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return [_num(p, key) for p in parts]


def _int(text, key):
    v = _num(text, key)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(v)


@dataclass
class ModelSection:
    semigroup: str
    diffusivities: list
    length: float
    modes: int
    nodes: Optional[int]
    matrix: list
    reaction: str
    a0: float
    b: float
    forcing: float
    delay_coeff: float
    tau: float
    omega: Optional[float]
    initial: str
    initial_value: float
    initial_amplitude: float


@dataclass
class ExperimentSection:
    seed: int
    t_end: float
    samples: int
    norm_samples: int
    set_size: int
    decomp_samples: int
    equi_samples: int
    r_values: list
    t_factors: list
    epsilon: float
    mnc_resolution: float
    max_iters: int
    tol: float
    orbit_r: Optional[float]
    orbit_starts: int
    periodicity_tol: float
    steps: list
    order_floor: float


@dataclass
class RunConfig:
    model: ModelSection
    solver: SolverConfig
    experiment: ExperimentSection
    output_dir: Path
    raw: dict = field(default_factory=dict, repr=False)

    def build_semigroup(self):
        m = self.model
        if m.semigroup == "spectral":
            return SpectralNeumannSemigroup(m.diffusivities, m.length, m.modes, m.nodes)
        size = int(round(math.sqrt(len(m.matrix))))
        return MatrixSemigroup(np.array(m.matrix).reshape(size, size))

    def initial_segment(self, semigroup, k):
        m = self.model
        x = semigroup.nodes
        ell = x[-1] if x[-1] > 0 else 1.0
        c, amp, tau = m.initial_value, m.initial_amplitude, m.tau
        if m.initial == "constant":
            fn = lambda th, xs: np.full(xs.shape, c)
        elif m.initial == "cosine":
            fn = lambda th, xs: c + amp * np.cos(np.pi * xs / ell)
        else:  # kink at theta = -tau / 2
            fn = lambda th, xs: np.full(xs.shape, c + amp * abs(th + tau / 2))
        return HistorySegment.from_function(tau, k, fn, x, semigroup.components)

    def build_problem(self, h=None):
        m = self.model
        s = self.build_semigroup()
        k = (self.solver if h is None else SolverConfig(h=h)).steps_per_delay(m.tau)
        phi = self.initial_segment(s, k)
        a0, b, eps_f, c = m.a0, m.b, m.forcing, m.delay_coeff
        omega = m.omega
        if m.reaction == "logistic":
            if omega is None:
                raise ConfigError("logistic reaction needs model.omega")
            two_pi = 2.0 * math.pi / omega

            def F(t, seg):
                return seg.values[-1] * (a0 * (1.0 + eps_f * math.sin(two_pi * t)) - b * seg.values[0])
        elif m.reaction == "linear_delay":
            def F(t, seg):
                return -c * seg.values[0]
        else:
            def F(t, seg):
                return np.zeros(seg.values.shape[1:])
        return FdeProblem(s, F, m.tau, phi, period_omega=omega, name=m.reaction)


def parse_config(text="", overrides=None):
    """Parse and validate configuration text (empty text gives all defaults)."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {name: dict(defaults) for name, defaults in SECTIONS.items()}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            raw[section][key] = value
    for (section, key), value in (overrides or {}).items():
        raw[section][key] = str(value)
    return _validate(raw)


def load_config(path=None, overrides=None):
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)


def _validate(raw):
    md = raw["model"]
    kind = md["semigroup"].strip()
    if kind not in ("spectral", "matrix"):
        raise ConfigError(f"model.semigroup must be 'spectral' or 'matrix', got {kind!r}")
    reaction = md["reaction"].strip()
    if reaction not in ("logistic", "linear_delay", "none"):
        raise ConfigError(f"model.reaction must be logistic, linear_delay or none, got {reaction!r}")
    initial = md["initial"].strip()
    if initial not in ("constant", "cosine", "kink"):
        raise ConfigError(f"model.initial must be constant, cosine or kink, got {initial!r}")
    matrix = _nums(md["matrix"], "model.matrix") if md["matrix"].strip() else []
    if kind == "matrix":
        size = int(round(math.sqrt(len(matrix)))) if matrix else 0
        if size == 0 or size * size != len(matrix):
            raise ConfigError("model.matrix must list a square matrix row-major")
    omega = md["omega"].strip()
    model = ModelSection(
        semigroup=kind,
        diffusivities=_nums(md["diffusivities"], "model.diffusivities"),
        length=_num(md["length"], "model.length"),
        modes=_int(md["modes"], "model.modes"),
        nodes=_int(md["nodes"], "model.nodes") if md["nodes"].strip() else None,
        matrix=matrix,
        reaction=reaction,
        a0=_num(md["a0"], "model.a0"),
        b=_num(md["b"], "model.b"),
        forcing=_num(md["forcing"], "model.forcing"),
        delay_coeff=_num(md["delay_coeff"], "model.delay_coeff"),
        tau=_num(md["tau"], "model.tau"),
        omega=_num(omega, "model.omega") if omega else None,
        initial=initial,
        initial_value=_num(md["initial_value"], "model.initial_value"),
        initial_amplitude=_num(md["initial_amplitude"], "model.initial_amplitude"),
    )
    if not model.tau > 0:
        raise ConfigError(f"model.tau must be > 0, got {model.tau}")
    if model.omega is not None and not model.omega > 0:
        raise ConfigError(f"model.omega must be > 0, got {model.omega}")
    if reaction == "logistic" and not model.b > 0:
        raise ConfigError(f"model.b must be > 0 for the logistic reaction, got {model.b}")

    sd = raw["solver"]
    try:
        solver = SolverConfig(
            h=_num(sd["h"], "solver.h"),
            picard_tol=_num(sd["picard_tol"], "solver.picard_tol"),
            picard_max_iters=_int(sd["picard_max_iters"], "solver.picard_max_iters"),
            r=_num(sd["r"], "solver.r"),
        )
        solver.steps_per_delay(model.tau)
    except FdeLabError as exc:
        raise ConfigError(f"solver: {exc}") from None

    ed = raw["experiment"]
    orbit_r = ed["orbit_r"].strip()
    exp = ExperimentSection(
        seed=_int(ed["seed"], "experiment.seed"),
        t_end=_num(ed["t_end"], "experiment.t_end"),
        samples=_int(ed["samples"], "experiment.samples"),
        norm_samples=_int(ed["norm_samples"], "experiment.norm_samples"),
        set_size=_int(ed["set_size"], "experiment.set_size"),
        decomp_samples=_int(ed["decomp_samples"], "experiment.decomp_samples"),
        equi_samples=_int(ed["equi_samples"], "experiment.equi_samples"),
        r_values=_nums(ed["r_values"], "experiment.r_values"),
        t_factors=_nums(ed["t_factors"], "experiment.t_factors"),
        epsilon=_num(ed["epsilon"], "experiment.epsilon"),
        mnc_resolution=_num(ed["mnc_resolution"], "experiment.mnc_resolution"),
        max_iters=_int(ed["max_iters"], "experiment.max_iters"),
        tol=_num(ed["tol"], "experiment.tol"),
        orbit_r=_num(orbit_r, "experiment.orbit_r") if orbit_r else None,
        orbit_starts=_int(ed["orbit_starts"], "experiment.orbit_starts"),
        periodicity_tol=_num(ed["periodicity_tol"], "experiment.periodicity_tol"),
        steps=_nums(ed["steps"], "experiment.steps"),
        order_floor=_num(ed["order_floor"], "experiment.order_floor"),
    )
    if not exp.t_end > 0:
        raise ConfigError(f"experiment.t_end must be > 0, got {exp.t_end}")
    if exp.orbit_starts < 1:
        raise ConfigError("experiment.orbit_starts must be >= 1")
    if min(exp.samples, exp.norm_samples, exp.decomp_samples, exp.equi_samples) < 1 or exp.set_size < 2:
        raise ConfigError("sample counts must be >= 1 and set_size >= 2")
    if any(r < 0 for r in exp.r_values) or not exp.r_values:
        raise ConfigError("experiment.r_values must be a non-empty list of values >= 0")
    if any(f <= 0 for f in exp.t_factors) or not exp.t_factors:
        raise ConfigError("experiment.t_factors must be positive")
    if not exp.epsilon > 0 or not exp.tol > 0 or not exp.mnc_resolution > 0:
        raise ConfigError("epsilon, tol and mnc_resolution must be > 0")

    cfg = RunConfig(model, solver, exp, Path(raw["output"]["dir"]), raw)
    try:
        cfg.build_problem()
    except FdeLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model: {exc}") from None
    return cfg
