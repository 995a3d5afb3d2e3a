"""Scenario-driven demiclosedness experiments.

A scenario fixes a space, a fiber, a body, a map and a sequence generator.
The runner moves the body so that it contains the origin, generates the
sequence, checks both hypotheses and the conclusion, and runs the
partition engine as structural sub-checks.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .duality import coordinate_family, lq_norm_of, random_weak_converges, eps_lambda_converges
from .dynamics import (
    AsymptoticMap,
    certify,
    conjugate,
    contraction,
    geometric_eta,
    glued,
    identity,
    mann_iterate,
    residual,
    rotation,
    transient,
)
from .errors import ConfigError, GeneratorError, RNModError
from .measure import AtomicProbabilitySpace, prob_of_exceed, validate_partition
from .module import ConvexBody, FiberSpec, RNElement, body_contains, l0_norm
from .partition import (
    induced_lipschitz_check,
    lemma31_partition,
    pieces_partition,
    recomposition_check,
    restricted_body_checks,
)

log = logging.getLogger(__name__)

PASS, FAIL, VACUOUS = "pass", "fail", "hypotheses not met"

DEFAULT_CHECKS = {
    "epsilon": 1e-3,
    "lambda": 0.01,
    "tail_fraction": 0.75,
    "conclusion_tol": 1e-6,
    "horizon": 64,
    "lipschitz_horizon": 32,
    "p": 2.0,
    "samples": 8,
    "seed": 0,
}

PLATEAU_RTOL = 1e-10
PLATEAU_WINDOW = 10


def load_schema() -> dict:
    return json.loads(resources.files("rnmod").joinpath("scenario.schema.json").read_text())


@dataclass
class ScenarioConfig:
    name: str
    space: dict
    fiber: dict
    body: dict
    map: dict
    sequence: dict
    checks: dict = field(default_factory=dict)
    description: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(data, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid scenario at {where}: {exc.message}") from None
        data = copy.deepcopy(data)
        checks = dict(DEFAULT_CHECKS)
        checks.update(data.pop("checks", {}))
        return cls(checks=checks, **data)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, seed: int | None = None, horizon: int | None = None) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        if seed is not None:
            cfg.checks["seed"] = int(seed)
        if horizon is not None:
            cfg.checks["horizon"] = int(horizon)
            cfg.checks["lipschitz_horizon"] = min(cfg.checks["lipschitz_horizon"], int(horizon))
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- building

def build_space(cfg: ScenarioConfig) -> AtomicProbabilitySpace:
    w = np.asarray(cfg.space["weights"], dtype=float)
    return AtomicProbabilitySpace(w / w.sum())


def _fiber_field(value, n, d, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 2 and arr.shape != (n, d):
        raise ConfigError(f"{what} must be {n}x{d}, got {arr.shape}")
    if arr.ndim == 1 and arr.size not in (d,):
        raise ConfigError(f"{what} must have {d} entries, got {arr.size}")
    return np.broadcast_to(arr, (n, d)).copy()


def _atom_field(value, n, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.size != n:
        raise ConfigError(f"{what} must have {n} entries, got {arr.size}")
    return np.broadcast_to(arr, (n,)).copy()


def build_body(cfg: ScenarioConfig, space, fiber) -> ConvexBody:
    b = cfg.body
    n, d = space.atom_count, fiber.dimension
    if b["kind"] == "ball":
        center = _fiber_field(b.get("center", 0.0), n, d, "ball center")
        return ConvexBody.ball(space, fiber, center, _atom_field(b["radius"], n, "ball radius"))
    return ConvexBody.box(space, fiber, _fiber_field(b["lower"], n, d, "box lower"),
                          _fiber_field(b["upper"], n, d, "box upper"))


def build_map(cfg_map: dict, body: ConvexBody, horizon: int) -> AsymptoticMap:
    n, d = body.space.atom_count, body.fiber.dimension
    eta = None
    if "eta" in cfg_map:
        e = cfg_map["eta"]
        eta = geometric_eta(_atom_field(e["scale"], n, "eta scale"), _atom_field(e["rate"], n, "eta rate"))
    kind = cfg_map["kind"]
    if kind == "identity":
        return identity(body, horizon)
    if kind == "contraction":
        anchor = None
        if "anchor" in cfg_map:
            anchor = RNElement(body.space, body.fiber, _fiber_field(cfg_map["anchor"], n, d, "anchor"))
        return contraction(body, _atom_field(cfg_map.get("alpha", 0.5), n, "alpha"), anchor, eta, horizon)
    if kind == "rotation":
        return rotation(body, _atom_field(cfg_map.get("angle", 1.0), n, "angle"), 0.0, horizon)
    if kind == "transient":
        return transient(body, _atom_field(cfg_map.get("coefficient", 0.5), n, "coefficient"), eta, horizon)
    if kind == "glued":
        pieces = [body.space.atoms(p) for p in cfg_map.get("pieces", [])]
        part = validate_partition(pieces)
        if len(part.pieces) != len(pieces):
            raise ConfigError("glued map pieces must be nonempty")
        return glued(part, [build_map(s, body, horizon) for s in cfg_map.get("maps", [])])
    raise ConfigError(f"unknown map kind {kind!r}")


def translate_to_origin(G: ConvexBody, f: AsymptoticMap, u0: RNElement | None = None):
    """Shift (G, f) so the body contains the origin.

    Returns ``(G - u0, f', u0)`` with ``f'(u) = f(u + u0) - u0``. When the
    origin is already in G and no shift is requested, the pair is returned
    as is with ``u0 = 0``.
    """
    if u0 is None:
        zero = RNElement.zero(G.space, G.fiber)
        if body_contains(G, zero, 0.0):
            return G, f, zero
        u0 = G.midpoint()
    moved = conjugate(f, u0)
    return moved.domain, moved, u0


# ---------------------------------------------------------------- report

@dataclass
class DemiclosednessReport:
    name: str
    hypothesis_weak: bool
    weak_diagnostics: list[dict]
    hypothesis_residual: bool
    residual_tail: dict
    conclusion_residual: list[float]
    conclusion_lp: float
    conclusion_linf: float
    structural: dict
    sequence: dict
    verdict: str
    provenance: dict

    @property
    def hypotheses(self) -> bool:
        return self.hypothesis_weak and self.hypothesis_residual

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for key, value in _flatten(self.to_dict()):
            w.writerow([key, value])
        return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, list):
        yield prefix, json.dumps(obj)
    else:
        yield prefix, obj if not isinstance(obj, float) else repr(obj)


# ---------------------------------------------------------------- sequences

def _generate(cfg: ScenarioConfig, f: AsymptoticMap, rng) -> tuple[list[RNElement], RNElement | None, dict]:
    """Sequence in the translated frame, plus the generator-declared limit if any."""
    seq = cfg.sequence
    steps = int(seq["steps"])
    G = f.domain
    start = seq.get("start", "sample")
    if start == "sample":
        x0 = G.sample(rng, boundary_prob=1.0)
    else:
        x0 = RNElement(G.space, G.fiber, _fiber_field(start, G.space.atom_count, G.fiber.dimension, "start"))
    info = {"generator": seq["generator"]}
    if seq["generator"] == "mann":
        schedule = seq.get("schedule", 0.5)
        if isinstance(schedule, list):
            schedule = [schedule[i % len(schedule)] for i in range(steps)]
        try:
            trace = mann_iterate(f, x0, schedule, steps)
        except RNModError as exc:
            raise GeneratorError(f"Mann generator failed: {exc}") from None
        return trace.iterates, f.fixed_point, info

    pattern = seq.get("pattern", "harmonic")
    info["pattern"] = pattern
    star = f.fixed_point
    if star is None:
        raise GeneratorError("prescribed sequences need a map with a known fixed point")
    if pattern == "harmonic":
        xs = [star + (x0 - star) * (1.0 / n) for n in range(1, steps + 2)]
        return xs, star, info
    if pattern == "constant":
        return [x0] * (steps + 1), x0, info
    # alternating between a sample and the fixed point: no limit
    return [x0 if n % 2 == 0 else star for n in range(steps + 1)], None, info


def _plateau(xs: list[RNElement]) -> tuple[RNElement, int | None]:
    """Last iterate, with the first index at which the relative change over the window fell below 1e-10."""
    for n in range(PLATEAU_WINDOW, len(xs)):
        change = l0_norm(xs[n] - xs[n - PLATEAU_WINDOW]).max()
        scale = max(1.0, l0_norm(xs[n]).max())
        if change <= PLATEAU_RTOL * scale:
            return xs[-1], n
    return xs[-1], None


# ---------------------------------------------------------------- runner

def run_demiclosedness(cfg: ScenarioConfig) -> DemiclosednessReport:
    checks = cfg.checks
    seed = int(checks["seed"])
    horizon = int(checks["horizon"])
    p = float(checks["p"])
    space = build_space(cfg)
    try:
        fiber = FiberSpec(int(cfg.fiber["dimension"]), float(cfg.fiber.get("exponent", 2.0)))
        body = build_body(cfg, space, fiber)
        f = build_map(cfg.map, body, horizon)
    except ConfigError:
        raise
    except RNModError as exc:
        raise ConfigError(f"{cfg.name}: {exc}") from None

    cert = certify(f, horizon, int(checks["samples"]), seed)
    if not cert.ok:
        v = cert.violations[0]
        raise GeneratorError(f"{cfg.name}: certificate violated at m={v.m}, atom {v.atom}")

    G0, f0, u0 = translate_to_origin(body, f)
    rng = np.random.default_rng(seed)
    xs, declared, seq_info = _generate(cfg, f0, rng)
    for n, x in enumerate(xs):
        if not body_contains(G0, x, 1e-9):
            raise GeneratorError(f"{cfg.name}: sequence element {n} left the body")

    mode = cfg.sequence.get("limit", "auto")
    if mode == "declared" and declared is None:
        raise GeneratorError(f"{cfg.name}: generator declares no limit")
    if mode == "declared" or (mode == "auto" and declared is not None):
        limit, seq_info["limit"], seq_info["plateau_index"] = declared, "declared", None
    else:
        limit, idx = _plateau(xs)
        seq_info["limit"], seq_info["plateau_index"] = "plateau", idx
    seq_info["length"] = len(xs)

    eps, lam = float(checks["epsilon"]), float(checks["lambda"])
    tail = min(int(math.ceil(checks["tail_fraction"] * len(xs))), len(xs) - 1)
    seq_info["tail"] = tail

    pieces = lemma31_partition(f0, G0, horizon)
    family = coordinate_family(space, fiber, pieces_partition(pieces))
    weak_diag = []
    for i, F in enumerate(family):
        target = F(limit)
        worst = max(prob_of_exceed(F(x) - target, eps) for x in xs[tail:])
        weak_diag.append({"functional": i, "worst_exceed_prob": worst, "ok": worst < lam})
    hyp_weak = random_weak_converges(xs, limit, family, eps, lam, tail)
    if seq_info["limit"] == "plateau" and seq_info["plateau_index"] is None:
        # without a plateau the last iterate is not a limit candidate
        hyp_weak = False

    zero = RNElement.zero(space, fiber)
    res_elems = [x - f0(x) for x in xs]
    hyp_res = eps_lambda_converges(res_elems, zero, eps, lam, tail)
    tail_norms = [l0_norm(r).max() for r in res_elems[tail:]]
    residual_tail = {
        "max_atom_max": max(tail_norms),
        "max_atom_last": tail_norms[-1],
        "worst_exceed_prob": max(prob_of_exceed(l0_norm(r), eps) for r in res_elems[tail:]),
    }

    concl = residual(f0, limit)
    structural = _structural(f0, G0, pieces, xs, checks)

    if hyp_weak and hyp_res:
        verdict = PASS if concl.max() <= float(checks["conclusion_tol"]) else FAIL
    else:
        verdict = VACUOUS
    return DemiclosednessReport(
        name=cfg.name,
        hypothesis_weak=hyp_weak,
        weak_diagnostics=weak_diag,
        hypothesis_residual=hyp_res,
        residual_tail=residual_tail,
        conclusion_residual=concl.values.tolist(),
        conclusion_lp=lq_norm_of(concl, p),
        conclusion_linf=lq_norm_of(concl, np.inf),
        structural=structural,
        sequence=seq_info,
        verdict=verdict,
        provenance={"config_sha256": cfg.digest(), "seed": seed, "version": __version__,
                    "translation_linf": l0_norm(u0).max()},
    )


def _structural(f0: AsymptoticMap, G0: ConvexBody, pieces, xs, checks) -> dict:
    seed = int(checks["seed"])
    lip_h = int(checks["lipschitz_horizon"])
    p = float(checks["p"])
    rng = np.random.default_rng(seed + 1)
    probes = [G0.sample(rng) for _ in range(int(checks["samples"]))] + xs[:: max(1, len(xs) // 8)]
    lip_ok = all(
        induced_lipschitz_check(f0, pd, p, lip_h, samples=4, seed=seed + i).ok for i, pd in enumerate(pieces)
    )
    return {
        "pieces": len(pieces),
        "partition_valid": True,
        "norm_bounds": all(pd.norm_bound > G0.bound().values[pd.piece.membership].max() for pd in pieces)
        and all(restricted_body_checks(f0, pd, 8, seed) for pd in pieces),
        "beta_converged": all(pd.beta_converged() for pd in pieces),
        "lipschitz": lip_ok,
        "recomposition": all(recomposition_check(f0, pieces, x) for x in probes),
    }


# ---------------------------------------------------------------- suite

@dataclass
class SuiteRow:
    name: str
    hypotheses: str
    conclusion_residual: float | None
    verdict: str
    wall_time_ms: float


@dataclass
class SuiteSummary:
    rows: list[SuiteRow] = field(default_factory=list)
    reports: dict[str, DemiclosednessReport] = field(default_factory=dict)

    @property
    def errors(self) -> int:
        return sum(r.verdict.startswith("error") for r in self.rows)

    @property
    def violations(self) -> int:
        return sum(r.verdict == FAIL for r in self.rows)

    @property
    def exit_code(self) -> int:
        return 0 if not self.errors and not self.violations else 1

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            key = "error" if r.verdict.startswith("error") else r.verdict
            out[key] = out.get(key, 0) + 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "hypotheses", "conclusion_residual", "verdict", "wall_time_ms"])
        for r in self.rows:
            w.writerow([r.name, r.hypotheses, "" if r.conclusion_residual is None else repr(r.conclusion_residual),
                        r.verdict, f"{r.wall_time_ms:.1f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([asdict(r) for r in self.rows], indent=2) + "\n"


def _hyp_label(rep: DemiclosednessReport) -> str:
    if rep.hypotheses:
        return "certified"
    missing = [n for n, ok in (("weak", rep.hypothesis_weak), ("residual", rep.hypothesis_residual)) if not ok]
    return "missing:" + "+".join(missing)


def write_report(rep: DemiclosednessReport, path, fmt: str = "json"):
    Path(path).write_text(rep.to_json() if fmt == "json" else rep.to_csv())


def run_suite(config_dir, out_dir=None, seed: int | None = None, horizon: int | None = None,
              fmt: str = "json") -> SuiteSummary:
    """Run every ``*.json`` scenario in ``config_dir`` (sorted by file name)."""
    summary = SuiteSummary()
    files = sorted(Path(config_dir).glob("*.json"))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for path in files:
        t0 = time.perf_counter()
        try:
            cfg = ScenarioConfig.from_file(path).with_overrides(seed, horizon)
            rep = run_demiclosedness(cfg)
        except (RNModError, ValueError) as exc:
            log.warning("%s: %s", path.name, exc)
            ms = (time.perf_counter() - t0) * 1e3
            kind = "generator" if isinstance(exc, GeneratorError) else "config"
            summary.rows.append(SuiteRow(path.stem, "n/a", None, f"error ({kind}): {exc}", ms))
            continue
        ms = (time.perf_counter() - t0) * 1e3
        summary.reports[path.stem] = rep
        summary.rows.append(SuiteRow(path.stem, _hyp_label(rep), max(rep.conclusion_residual), rep.verdict, ms))
        if out_dir is not None:
            write_report(rep, Path(out_dir) / f"{path.stem}.{fmt}", fmt)
    if out_dir is not None:
        Path(out_dir, f"summary.{fmt}").write_text(summary.to_csv() if fmt == "csv" else summary.to_json())
    return summary


def shipped_scenarios() -> Path:
    return Path(str(resources.files("rnmod").joinpath("scenarios")))
