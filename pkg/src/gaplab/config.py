"""Experiment configuration: INI files with typed values.

A config file has an ``[experiment]`` section with ``kind`` and ``seed``
and a ``[params]`` section of ``key = value`` pairs.  Values are Python
literals (numbers, strings in quotes, lists, booleans); a bare word that is
not a literal is read as a string.  Example::

    [experiment]
    kind = counterexample
    seed = 1

    [params]
    p = 2
    M = 64
    N = 100000
    j_max = 4

Every parameter has a default, so a file may list only what it changes.
Validation collects every problem before reporting, one line per field.
"""
from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field

from .padic import is_prime

KINDS = ("walk", "transport", "approxhom", "counterexample", "ift", "bch", "entropy")


class ConfigError(ValueError):
    def __init__(self, problems: list):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {p}" for p in self.problems))


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _nonneg_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _pos_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _prime(v):
    return _pos_int(v) and is_prime(v)


def _bool(v):
    return isinstance(v, bool)


def _one_of(*opts):
    return lambda v: v in opts


# kind -> {key: (default, check, requirement text)}
SCHEMA = {
    "walk": {
        "p": (5, _prime, "p must be a prime"),
        "k": (1, _pos_int, "k must be a positive integer"),
        "ell": (10, _nonneg_int, "ell must be a nonnegative integer"),
        "eta": (0.5, _pos_real, "eta must be positive"),
    },
    "transport": {
        "mode": ("decompose", _one_of("decompose", "correct"), "mode must be 'decompose' or 'correct'"),
        "coupling": ([[1, 1], [1, 1]], lambda v: isinstance(v, list) and len(v) > 0
                     and all(isinstance(r, list) and len(r) == len(v[0]) and len(r) > 0 for r in v),
                     "coupling must be a nonempty rectangular list of rows"),
        "A": (3, lambda v: _pos_real(v) and v > 2, "A > 2 is required by correct_coupling"),
        "perturb": (0, _nonneg_int, "perturb must be a nonnegative integer (number of random perturbed instances)"),
    },
    "approxhom": {
        "rho": (0.1, lambda v: _pos_real(v) and v < 0.5, "rho must lie in (0, 0.5)"),
        "k": (3, _pos_int, "k must be a positive integer"),
        "eps": (1e-4, lambda v: isinstance(v, (int, float)) and v >= 0, "eps must be nonnegative"),
        "noise": ("smooth", _one_of("smooth", "absolute"), "noise must be 'smooth' or 'absolute'"),
        "fit": ("lstsq", _one_of("lstsq", "basis"), "fit must be 'lstsq' or 'basis'"),
        "probes": (200, _pos_int, "probes must be a positive integer"),
    },
    "counterexample": {
        "p": (2, _prime, "p must be a prime"),
        "M": (64, lambda v: _pos_int(v) and v >= 4 and v & (v - 1) == 0, "M must be a power of two >= 4"),
        "N": (100_000, _pos_int, "N must be a positive integer"),
        "j_max": (4, _pos_int, "j_max must be a positive integer"),
        "independent": (False, _bool, "independent must be true or false"),
        "C_prime": (10.0, _pos_real, "C_prime must be positive"),
    },
    "ift": {
        "field": ("real", _one_of("real", "padic"), "field must be 'real' or 'padic'"),
        "maps": (10, _pos_int, "maps must be a positive integer"),
        "targets": (100, _pos_int, "targets must be a positive integer"),
        "p": (5, _prime, "p must be a prime"),
        "K": (20, _pos_int, "K must be a positive integer"),
        "k0": (0, _nonneg_int, "k0 must be a nonnegative integer"),
        "l": (1, _pos_int, "l must be a positive integer"),
    },
    "bch": {
        "samples": (1000, _pos_int, "samples must be a positive integer"),
        "radius": (0.05, lambda v: _pos_real(v) and v < 0.17, "radius must lie in (0, 0.17) so the series converges"),
        "order": (4, lambda v: isinstance(v, int) and 1 <= v <= 5, "order must be between 1 and 5"),
        "etas": ([0.1, 0.05, 0.025], lambda v: isinstance(v, list) and v and all(_pos_real(e) for e in v),
                 "etas must be a nonempty list of positive numbers"),
    },
    "entropy": {
        "n": (8, lambda v: _pos_int(v) and v >= 2, "n must be an integer >= 2"),
        "coupling": ("both", _one_of("product", "diagonal", "both"), "coupling must be 'product', 'diagonal' or 'both'"),
        "eta": (0.5, lambda v: _pos_real(v) and v < 1, "eta must lie in (0, 1), below the minimum distance"),
    },
}

# cross-field checks: kind -> list of (predicate on params, message)
CROSS = {
    "counterexample": [(lambda q: 2 ** (q["j_max"] + 1) <= q["M"], "j_max: need 2^(j_max + 1) <= M")],
    "ift": [(lambda q: q["field"] != "padic" or q["l"] >= q["k0"] + 1, "l: need l >= k0 + 1"),
            (lambda q: q["field"] != "padic" or q["K"] >= q["k0"] + q["l"] + 1, "K: need K > k0 + l")],
    "walk": [(lambda q: q["p"] ** (3 * q["k"]) <= 20_000, "p, k: SL_2(Z/p^k) too large for the dense solver")],
}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": self.params}


def parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        t = text.strip()
        if t.lower() in ("true", "false"):
            return t.lower() == "true"
        return t


def validate(kind: str, params: dict, seed=1) -> ExperimentConfig:
    """Fill defaults and check every field; raises ConfigError listing all problems."""
    problems = []
    if kind not in SCHEMA:
        raise ConfigError([f"kind: unknown experiment {kind!r}; available: {', '.join(KINDS)}"])
    if not (isinstance(seed, int) and 0 <= seed < 2**64):
        problems.append("seed: must be an integer in [0, 2^64)")
    schema = SCHEMA[kind]
    full = {}
    for key, value in params.items():
        if key not in schema:
            problems.append(f"{key}: unknown parameter for {kind}; known: {', '.join(schema)}")
    for key, (default, check, msg) in schema.items():
        v = params.get(key, default)
        if not check(v):
            problems.append(f"{key} = {v!r}: {msg}")
        full[key] = v
    if not problems:
        for pred, msg in CROSS.get(kind, []):
            if not pred(full):
                problems.append(msg)
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(kind, full, seed)


def load_config(path: str, kind: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Read and validate an INI config; ``kind`` and ``seed`` override the file."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep parameter names case-sensitive (M, N, K, A)
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    file_kind = exp.get("kind")
    if kind and file_kind and file_kind != kind:
        raise ConfigError([f"kind: config file is for {file_kind!r}, not {kind!r}"])
    k = kind or file_kind
    if k is None:
        raise ConfigError(["kind: missing from [experiment]"])
    s = seed if seed is not None else parse_value(exp.get("seed", "1"))
    params = {key: parse_value(v) for key, v in cp["params"].items()} if cp.has_section("params") else {}
    return validate(k, params, s)
