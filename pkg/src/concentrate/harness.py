"""Seeded Monte Carlo campaigns, exact branch verification and report output.

A campaign samples every trial from its own counter-based stream (see
:mod:`concentrate.streams`). Because each protocol run is a deterministic
function of its uniforms, trials are classified in bulk against the branch
tree produced by exhaustive enumeration, using the same cumulative-interval
rule as the sampled protocol functions. The first few trials are also
replayed through the full simulator and must land on the same branch.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import analytics
from .core import SchmidtPair
from .errors import ConcentrationError
from .protocols import (
    CAT,
    CAT_METHODS,
    ENT_ASSISTED,
    PROPOSAL1,
    PROPOSAL2,
    RESIDUAL_BETA_FLOOR,
    Branch,
    enumerate_branches,
    proposal1_single,
    run_protocol,
    success_probability,
)
from .streams import MAX_SEED, TrialStream, trial_uniforms

log = logging.getLogger(__name__)

ITERATE = "proposal1-iterate"
PROTOCOL_IDS = (PROPOSAL1, ITERATE, PROPOSAL2, ENT_ASSISTED, CAT)
EXACT_TOL = 1e-10
CHUNK = 1 << 16
TRACE_TRIALS = 5
CSV_HEADER = ("round", "pairs_in", "successes", "empirical_p", "std_error", "analytic_p", "z_score")


class UsageError(ConcentrationError):
    """Invalid protocol/parameter combination."""


@dataclass(frozen=True)
class CampaignConfig:
    protocol: str
    alpha_sq: float
    trials: int = 100_000
    seed: int = 0
    rounds: int = 6
    parties: int = 3
    method: str = PROPOSAL2
    actor: str | None = None
    check_tolerance_sigma: float = 4.0

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOL_IDS:
            raise UsageError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOL_IDS}")
        if not (isinstance(self.alpha_sq, (int, float)) and 0.5 <= self.alpha_sq < 1.0):
            raise UsageError(f"alpha_sq must lie in [0.5, 1), got {self.alpha_sq!r}")
        if self.protocol == ITERATE and self.alpha_sq == 0.5:
            raise UsageError("proposal1-iterate needs alpha_sq > 0.5; the pair is already maximal")
        if int(self.trials) != self.trials or self.trials < 1:
            raise UsageError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise UsageError(f"rounds must be a positive integer, got {self.rounds!r}")
        if self.protocol == CAT:
            if int(self.parties) != self.parties or not 3 <= self.parties <= 10:
                raise UsageError(f"parties must lie in [3, 10], got {self.parties!r}")
            if self.method not in CAT_METHODS:
                raise UsageError(f"method must be one of {CAT_METHODS}, got {self.method!r}")
        if not self.check_tolerance_sigma > 0:
            raise UsageError("check_tolerance_sigma must be positive")

    @property
    def schmidt(self) -> SchmidtPair:
        return SchmidtPair.from_alpha_sq(self.alpha_sq)

    def protocol_kwargs(self) -> dict[str, Any]:
        if self.protocol == CAT:
            return {"n_parties": int(self.parties), "method": self.method, "actor": self.actor}
        return {}

    def echo(self) -> dict[str, Any]:
        out = asdict(self)
        if self.protocol != ITERATE:
            out.pop("rounds")
        if self.protocol != CAT:
            for key in ("parties", "method", "actor"):
                out.pop(key)
        return out


@dataclass
class RoundRow:
    round: int
    pairs_in: float
    successes: float
    empirical_p: float
    std_error: float
    analytic_p: float
    z_score: float


@dataclass
class EnsembleReport:
    mode: str
    config: dict[str, Any]
    per_round: list[RoundRow]
    overall: dict[str, Any]
    branches: list[dict[str, Any]] = field(default_factory=list)
    traces: list[dict[str, Any]] = field(default_factory=list)
    tolerance: float = 4.0
    verdict: str = "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict[str, Any]:
        return _rendered(asdict(self))


def z_score(p_hat: float, p: float, n: int | float) -> float:
    """Deviation in units of ``sqrt(p_hat (1 - p_hat) / n)``.

    When the empirical frequency is 0 or 1 the analytic binomial error is
    used instead, so a single trial still yields a finite score.
    """
    se = math.sqrt(p_hat * (1.0 - p_hat) / n)
    if se == 0.0:
        se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    if se == 0.0:
        return 0.0 if abs(p_hat - p) <= 1e-12 else math.inf
    return (p_hat - p) / se


def _std_error(p_hat: float, n: int | float) -> float:
    return math.sqrt(p_hat * (1.0 - p_hat) / n)


# -- branch trees --------------------------------------------------------------


@dataclass
class _Node:
    names: list[str] = field(default_factory=list)
    probs: list[float] = field(default_factory=list)
    children: list[Any] = field(default_factory=list)


def _build_tree(branches: list[Branch]) -> tuple[_Node, int]:
    root, depth = _Node(), 0
    for leaf, branch in enumerate(branches):
        trace = branch.outcome.trace
        if not trace:
            raise UsageError("protocol has no measurement to sample")
        depth = max(depth, len(trace))
        node = root
        for level, entry in enumerate(trace):
            if entry.outcome in node.names:
                k = node.names.index(entry.outcome)
            else:
                node.names.append(entry.outcome)
                node.probs.append(entry.probability)
                node.children.append(None)
                k = len(node.names) - 1
            if level == len(trace) - 1:
                node.children[k] = leaf
            else:
                if node.children[k] is None:
                    node.children[k] = _Node()
                node = node.children[k]
    return root, depth


def _pick(probs: list[float], u: np.ndarray) -> np.ndarray:
    # Vector form of measurement.pick_index.
    cumulative = np.cumsum(probs)
    return np.minimum(np.searchsorted(cumulative, u, side="right"), len(cumulative) - 1)


def _descend(node: _Node, uniforms: np.ndarray, rows: np.ndarray, out: np.ndarray, level: int) -> None:
    choice = _pick(node.probs, uniforms[rows, level])
    for k, child in enumerate(node.children):
        chosen = rows[choice == k]
        if not chosen.size:
            continue
        if isinstance(child, _Node):
            _descend(child, uniforms, chosen, out, level + 1)
        else:
            out[chosen] = child


def _classify(tree: _Node, depth: int, seed: int, start: int, stop: int) -> np.ndarray:
    uniforms = trial_uniforms(seed, start, stop, depth)
    leaves = np.empty(stop - start, dtype=np.int64)
    _descend(tree, uniforms, np.arange(stop - start), leaves, 0)
    return leaves


def _map_chunks(fn: Callable[[int, int], Any], trials: int, workers: int) -> list[Any]:
    ranges = [(a, min(a + CHUNK, trials)) for a in range(0, trials, CHUNK)]
    if workers <= 1 or len(ranges) == 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


# -- campaigns -----------------------------------------------------------------


def _base_protocol(cfg: CampaignConfig) -> str:
    return PROPOSAL1 if cfg.protocol == ITERATE else cfg.protocol


def _conservation(cfg: CampaignConfig) -> dict[str, float]:
    report = analytics.conservation_check(cfg.schmidt, _base_protocol(cfg), **cfg.protocol_kwargs())
    return {"e_before": report.e_before, "e_after": report.e_after, "deviation": report.deviation}


def _analytic_branches(cfg: CampaignConfig) -> dict[tuple[str, ...], float]:
    return analytics.analytic_branch_probabilities(
        cfg.protocol, cfg.schmidt, cfg.method if cfg.protocol == CAT else None
    )


def _branch_row(branch: Branch, analytic: dict) -> dict[str, Any]:
    out = branch.outcome
    return {
        "path": "/".join(out.path),
        "kind": out.kind.value,
        "bell": out.bell.value if out.bell else None,
        "analytic_p": analytic.get(out.path),
    }


def _trace_row(trial: int, outcomes) -> dict[str, Any]:
    last = outcomes[-1]
    return {
        "trial": trial,
        "steps": [
            {"step": e.step, "actor": e.actor, "outcome": e.outcome, "probability": e.probability,
             "announced_to": e.announced_to}
            for o in outcomes
            for e in o.trace
        ],
        "kind": last.kind.value,
        "bell": last.bell.value if last.bell else None,
    }


def _simulated_schedule(s: SchmidtPair, rounds: int) -> list[tuple[SchmidtPair, list[Branch]]]:
    """Input pair and branches of each iterate round, following the simulated residual."""
    schedule = []
    current = s
    for _ in range(rounds):
        branches = enumerate_branches(PROPOSAL1, current)
        schedule.append((current, branches))
        residual = next(b.outcome.residual for b in branches if b.outcome.residual is not None)
        if residual.beta < RESIDUAL_BETA_FLOOR:
            break
        current = residual
    return schedule


def _closed_form_round_probs(s: SchmidtPair, n_rounds: int) -> list[float]:
    probs, current = [], s
    for _ in range(n_rounds):
        probs.append(analytics.analytic_success_probability(PROPOSAL1, current))
        current = analytics.residual_schmidt(current)
    return probs


def _verdict(scores: list[float], tol: float) -> str:
    return "pass" if all(math.isfinite(z) and abs(z) <= tol for z in scores) else "fail"


def run_campaign(cfg: CampaignConfig, workers: int = 1) -> EnsembleReport:
    """Seeded Monte Carlo campaign. ``workers`` never changes any number."""
    if cfg.protocol == ITERATE:
        return _run_iterate_campaign(cfg, workers)
    s, kwargs = cfg.schmidt, cfg.protocol_kwargs()
    branches = enumerate_branches(cfg.protocol, s, **kwargs)
    tree, depth = _build_tree(branches)
    n = int(cfg.trials)

    def count(a: int, b: int) -> np.ndarray:
        return np.bincount(_classify(tree, depth, cfg.seed, a, b), minlength=len(branches))

    counts = sum(_map_chunks(count, n, workers))
    n_traced = min(n, TRACE_TRIALS)
    bulk = _classify(tree, depth, cfg.seed, 0, n_traced)
    traces = []
    for trial in range(n_traced):
        outcome = run_protocol(cfg.protocol, s, TrialStream(cfg.seed, trial), **kwargs)
        if outcome.path != branches[bulk[trial]].outcome.path:
            raise RuntimeError(f"trial {trial}: replay {outcome.path} disagrees with bulk sampling")
        traces.append(_trace_row(trial, [outcome]))

    successes = int(sum(c for c, b in zip(counts, branches) if b.outcome.succeeded))
    p_hat = successes / n
    p = analytics.analytic_success_probability(cfg.protocol, s, cfg.method if cfg.protocol == CAT else None)
    z = z_score(p_hat, p, n)
    row = RoundRow(1, n, successes, p_hat, _std_error(p_hat, n), p, z)
    analytic = _analytic_branches(cfg)
    branch_rows = []
    for c, b in zip(counts, branches):
        entry = _branch_row(b, analytic)
        entry.update(count=int(c), empirical_p=int(c) / n)
        branch_rows.append(entry)
    overall = {
        "empirical_fraction": p_hat,
        "analytic_fraction": p,
        "std_error": row.std_error,
        "z_score": z,
        "conservation": _conservation(cfg),
    }
    log.info("%s alpha_sq=%s trials=%d: p_hat=%.6f p=%.6f z=%.3f", cfg.protocol, cfg.alpha_sq, n, p_hat, p, z)
    tol = cfg.check_tolerance_sigma
    return EnsembleReport("monte-carlo", cfg.echo(), [row], overall, branch_rows, traces, tol, _verdict([z], tol))


def _run_iterate_campaign(cfg: CampaignConfig, workers: int) -> EnsembleReport:
    s, n = cfg.schmidt, int(cfg.trials)
    schedule = _simulated_schedule(s, int(cfg.rounds))
    n_rounds = len(schedule)
    round_probs = [[b.outcome.trace[0].probability for b in br] for _, br in schedule]
    success_leaf = [next(i for i, b in enumerate(br) if b.outcome.succeeded) for _, br in schedule]

    def fates(a: int, b: int) -> np.ndarray:
        # Round (1-based) in which each pair succeeded, 0 if it never did.
        uniforms = trial_uniforms(cfg.seed, a, b, n_rounds)
        fate = np.zeros(b - a, dtype=np.int64)
        for r in range(n_rounds):
            alive = np.flatnonzero(fate == 0)
            hit = _pick(round_probs[r], uniforms[alive, r]) == success_leaf[r]
            fate[alive[hit]] = r + 1
        return fate

    def tally(a: int, b: int) -> np.ndarray:
        return np.bincount(fates(a, b), minlength=n_rounds + 1)

    by_round = sum(_map_chunks(tally, n, workers))

    n_traced = min(n, TRACE_TRIALS)
    bulk = fates(0, n_traced)
    traces = []
    for trial in range(n_traced):
        stream = TrialStream(cfg.seed, trial)
        history = []
        for pair, _ in schedule:
            outcome = proposal1_single(pair, stream)
            history.append(outcome)
            if outcome.succeeded:
                break
        replay = len(history) if history[-1].succeeded else 0
        if replay != bulk[trial]:
            raise RuntimeError(f"pair {trial}: replay fate {replay} disagrees with bulk {bulk[trial]}")
        traces.append(_trace_row(trial, history))

    closed = _closed_form_round_probs(s, n_rounds)
    rows, remaining, total = [], n, 0
    for r in range(n_rounds):
        if remaining == 0:
            break
        succ = int(by_round[r + 1])
        p_hat = succ / remaining
        rows.append(RoundRow(r + 1, remaining, succ, p_hat, _std_error(p_hat, remaining), closed[r],
                             z_score(p_hat, closed[r], remaining)))
        remaining -= succ
        total += succ
    curve = analytics.yield_series(s, len(rows))
    fraction = total / n
    expected = float(curve.cumulative_fractions[-1])
    z_all = z_score(fraction, expected, n)
    overall = {
        "empirical_fraction": fraction,
        "analytic_fraction": expected,
        "std_error": _std_error(fraction, n),
        "z_score": z_all,
        "limit": curve.limit,
        "conservation": _conservation(cfg),
    }
    tol = cfg.check_tolerance_sigma
    verdict = _verdict([row.z_score for row in rows] + [z_all], tol)
    return EnsembleReport("monte-carlo", cfg.echo(), rows, overall, [], traces, tol, verdict)


# -- exact verification --------------------------------------------------------


def run_exact(cfg: CampaignConfig) -> EnsembleReport:
    """Enumerate every branch with its exact probability; no sampling.

    Empirical fields hold exact expectations for a unit ensemble and each
    ``z_score`` holds the absolute deviation from the closed form, checked
    against 1e-10. ``trials`` and ``seed`` are ignored.
    """
    if cfg.protocol == ITERATE:
        return _run_iterate_exact(cfg)
    s, kwargs = cfg.schmidt, cfg.protocol_kwargs()
    branches = enumerate_branches(cfg.protocol, s, **kwargs)
    p_exact = success_probability(branches)
    p = analytics.analytic_success_probability(cfg.protocol, s, cfg.method if cfg.protocol == CAT else None)
    deviation = abs(p_exact - p)
    row = RoundRow(1, 1.0, p_exact, p_exact, 0.0, p, deviation)
    analytic = _analytic_branches(cfg)
    branch_rows = []
    for b in branches:
        entry = _branch_row(b, analytic)
        entry["probability"] = b.probability
        if entry["analytic_p"] is not None:
            entry["deviation"] = abs(b.probability - entry["analytic_p"])
        branch_rows.append(entry)
    overall = {
        "empirical_fraction": p_exact,
        "analytic_fraction": p,
        "std_error": 0.0,
        "z_score": deviation,
        "conservation": _conservation(cfg),
    }
    return EnsembleReport("exact", cfg.echo(), [row], overall, branch_rows, [], EXACT_TOL,
                          _verdict([deviation], EXACT_TOL))


def _run_iterate_exact(cfg: CampaignConfig) -> EnsembleReport:
    s = cfg.schmidt
    schedule = _simulated_schedule(s, int(cfg.rounds))
    closed = _closed_form_round_probs(s, len(schedule))
    rows, remaining, total = [], 1.0, 0.0
    for r, (_, branches) in enumerate(schedule):
        p_round = success_probability(branches)
        gained = remaining * p_round
        rows.append(RoundRow(r + 1, remaining, gained, p_round, 0.0, closed[r], abs(p_round - closed[r])))
        remaining -= gained
        total += gained
    curve = analytics.yield_series(s, len(rows))
    expected = float(curve.cumulative_fractions[-1])
    deviation = abs(total - expected)
    overall = {
        "empirical_fraction": total,
        "analytic_fraction": expected,
        "std_error": 0.0,
        "z_score": deviation,
        "limit": curve.limit,
        "conservation": _conservation(cfg),
    }
    verdict = _verdict([row.z_score for row in rows] + [deviation], EXACT_TOL)
    return EnsembleReport("exact", cfg.echo(), rows, overall, [], [], EXACT_TOL, verdict)


# -- report output -------------------------------------------------------------


def _number(value: float) -> float | None:
    if not math.isfinite(value):
        return None
    return float(f"{value:.12g}")


def _rendered(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _number(float(value))
    if isinstance(value, dict):
        return {k: _rendered(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rendered(v) for v in value]
    raise TypeError(f"cannot render {type(value).__name__}")


def _csv_cell(value: Any) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.12g}"


def render_report(report: EnsembleReport, fmt: str = "json") -> str:
    """Serialize a report; identical reports give identical text."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in report.per_round:
            writer.writerow([_csv_cell(getattr(row, name)) for name in CSV_HEADER])
        return buffer.getvalue()
    raise UsageError(f"unknown report format {fmt!r}; expected json or csv")


def emit_report(report: EnsembleReport, fmt: str = "json", path: str | None = None) -> None:
    """Write the report to ``path`` (UTF-8) or to standard output when ``path`` is None."""
    text = render_report(report, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
