"""Monte-Carlo SER sweeps, equivalence verification and root analysis drivers."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import detectors as det
from . import equivalence as eqv
from .model import Instance, complex_to_real, generate_instance, va_weight_matrix
from .relaxations import CANONICAL_ROOTS_64, RootSet, SdrPoint, build, extract_point, objective_f
from .sdp import SolverOptions, Status

log = logging.getLogger(__name__)

CSV_HEADER = ["snr_db", "detector", "trials", "symbol_errors", "vector_errors", "ser",
              "vec_err_rate", "mean_iters", "mean_relax_value"]
SDR_DETECTORS = {"bc", "pi", "pi16", "pi64", "va", "va1"}
BASELINES = {"zf", "sd", "ml"}


class ConfigError(ValueError):
    pass


def relaxation_of(label: str) -> str | None:
    """Relaxation a detector label needs, or None for the baselines."""
    base = label[:-5] if label.endswith("-rand") else label
    if base == "va1":
        return "va"
    if base in {"pi16", "pi64"}:
        return "pi"
    if base in SDR_DETECTORS:
        return base
    return None


def valid_detector(label: str) -> bool:
    if label in BASELINES or label in SDR_DETECTORS:
        return True
    return label.endswith("-rand") and label[:-5] in {"bc", "pi", "va"}


@dataclass
class SimConfig:
    m_tilde: int = 4
    n_tilde: int = 4
    q: int = 2
    snr_db_grid: list = field(default_factory=lambda: [10.0, 15.0, 20.0, 25.0])
    trials_per_snr: int = 100
    detectors: list = field(default_factory=lambda: ["bc", "pi", "va"])
    seed: int = 0
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    randomizations: int = 100
    jobs: int = 1

    def __post_init__(self):
        self.snr_db_grid = [float(s) for s in self.snr_db_grid]
        self.detectors = list(self.detectors)
        if self.trials_per_snr < 1:
            raise ConfigError("trials_per_snr must be >= 1")
        if not self.snr_db_grid:
            raise ConfigError("snr_db_grid must be nonempty")
        if not self.detectors:
            raise ConfigError("detectors must be nonempty")
        if min(self.m_tilde, self.n_tilde, self.q) < 1:
            raise ConfigError("m_tilde, n_tilde and q must be >= 1")
        bad = [d for d in self.detectors if not valid_detector(d)]
        if bad:
            raise ConfigError(f"unknown detectors: {bad}")
        if any(relaxation_of(d) == "pi" for d in self.detectors) and self.q not in (2, 3):
            raise ConfigError("PI-SDR detectors need q = 2 or 3")
        if self.randomizations < 0:
            raise ConfigError("randomizations must be >= 0")

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap_tol=self.gap_tol, feas_tol=self.feas_tol)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e


@dataclass
class SimRecord:
    snr_db: float
    detector: str
    trials: int = 0
    symbol_errors: int = 0
    vector_errors: int = 0
    iters_sum: float = 0.0
    relax_sum: float = 0.0
    relax_count: int = 0
    failures: int = 0
    n_tilde: int = 1

    @property
    def ser(self) -> float:
        return self.symbol_errors / (self.trials * self.n_tilde) if self.trials else math.nan

    @property
    def vec_err_rate(self) -> float:
        return self.vector_errors / self.trials if self.trials else math.nan

    @property
    def mean_solver_iters(self) -> float:
        return self.iters_sum / self.relax_count if self.relax_count else math.nan

    @property
    def mean_relaxation_value(self) -> float:
        return self.relax_sum / self.relax_count if self.relax_count else math.nan

    def row(self) -> list[str]:
        def g(v):
            return format(v, ".10g")
        return [g(self.snr_db), self.detector, str(self.trials), str(self.symbol_errors),
                str(self.vector_errors), g(self.ser), g(self.vec_err_rate),
                g(self.mean_solver_iters), g(self.mean_relaxation_value)]


@dataclass
class Outcome:
    s_hat: np.ndarray | None
    symbol_errors: int = 0
    vector_error: int = 0
    iterations: int | None = None
    relax_value: float | None = None
    failed: bool = False
    s_vec: np.ndarray | None = None


def trial_seed(seed: int, snr_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, snr_index, trial_index])


def instance_digest(inst: Instance) -> str:
    h = hashlib.sha256()
    for a in (inst.h, inst.y, inst.s_true):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def run_trial(cfg: SimConfig, snr_index: int, trial_index: int) -> dict[str, Outcome]:
    """All configured detectors on one shared instance."""
    ss = trial_seed(cfg.seed, snr_index, trial_index)
    inst_seq, round_seq = ss.spawn(2)
    ci = generate_instance(cfg.m_tilde, cfg.n_tilde, cfg.q, cfg.snr_db_grid[snr_index], np.random.default_rng(inst_seq))
    inst = complex_to_real(ci)
    log.debug("snr %d trial %d instance %s", snr_index, trial_index, instance_digest(inst))
    opts = cfg.solver_options
    solved = {}
    out: dict[str, Outcome] = {}
    for label in cfg.detectors:
        kind = relaxation_of(label)
        try:
            if kind is None:
                fn = {"zf": det.zf_detect, "sd": det.sphere_decode, "ml": det.ml_exhaustive}[label]
                d = fn(inst)
                o = Outcome(d.s_hat)
            else:
                if kind not in solved:
                    relax = build(kind, inst)
                    sol = relax.solve(opts)
                    solved[kind] = (sol, extract_point(sol, relax))
                sol, point = solved[kind]
                if label.endswith("-rand"):
                    d = det.gaussian_randomized_rounding(point, inst, cfg.randomizations,
                                                         seed=np.random.default_rng(round_seq))
                elif label == "va":
                    d = det.va_rounding_ii(point.aux.b_vec, inst)
                elif label == "va1":
                    d = det.va_rounding_i(point.aux.b_vec, inst)
                else:
                    d = det.simple_rounding(point, inst)
                o = Outcome(d.s_hat, iterations=sol.iterations, relax_value=sol.objective,
                            failed=sol.status is not Status.OPTIMAL, s_vec=point.s_vec)
        except (ValueError, np.linalg.LinAlgError) as e:
            log.warning("detector %s failed: %s", label, e)
            out[label] = Outcome(None, failed=True)
            continue
        o.symbol_errors, o.vector_error = det.symbol_error_count(o.s_hat, inst.s_true)
        out[label] = o
    return out


def _trial_args(args):
    return run_trial(*args)


def simulate(cfg: SimConfig) -> list[SimRecord]:
    """Sweep the SNR grid; results are reduced in trial order."""
    records = []
    for si, snr in enumerate(cfg.snr_db_grid):
        recs = {d: SimRecord(snr, d, n_tilde=cfg.n_tilde) for d in cfg.detectors}
        jobs = [(cfg, si, t) for t in range(cfg.trials_per_snr)]
        if cfg.jobs > 1:
            with ProcessPoolExecutor(cfg.jobs) as ex:
                results = list(ex.map(_trial_args, jobs, chunksize=8))
        else:
            results = [run_trial(*j) for j in jobs]
        for res in results:
            for label, o in res.items():
                recs[label].failures += o.failed
            if all(o.failed for o in res.values()):
                continue
            for label, o in res.items():
                r = recs[label]
                if o.s_hat is None:
                    continue
                r.trials += 1
                r.symbol_errors += o.symbol_errors
                r.vector_errors += o.vector_error
                if o.iterations is not None:
                    r.iters_sum += o.iterations
                    r.relax_sum += o.relax_value
                    r.relax_count += 1
        records.extend(recs[d] for d in cfg.detectors)
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def near_boundary(s_vec, q: int, margin: float = 1e-4) -> bool:
    """True when some entry lies within ``margin`` of a decision threshold."""
    thresholds = np.arange(-(2 ** q - 2), 2 ** q - 1, 2, dtype=float)
    return bool(np.min(np.abs(np.asarray(s_vec)[:, None] - thresholds[None, :])) < margin)


# -- equivalence verification --------------------------------------------

def pi_roots(q: int) -> RootSet | None:
    return None if q == 2 else CANONICAL_ROOTS_64


def _rel(a, b):
    return abs(a - b) / (1 + abs(b))


def verify_instance(inst: Instance, opts: SolverOptions | None = None, tol: float = eqv.DEFAULT_TOL) -> dict:
    """Solve every applicable relaxation and push each optimum through the converters."""
    opts = opts or SolverOptions()
    q = inst.q
    kinds = ["bc", "pi", "va"] if q in (2, 3) else ["bc", "va"]
    values, statuses, points = {}, {}, {}
    for kind in kinds:
        relax = build(kind, inst)
        sol = relax.solve(opts)
        values[kind] = sol.objective
        statuses[kind] = sol.status.value
        points[kind] = extract_point(sol, relax)
    report = {
        "n": inst.n, "q": q, "values": values, "statuses": statuses,
        "unavailable": [] if "pi" in kinds else ["pi"],
        "gaps": {f"{a}-{b}": _rel(values[b], values[a]) for i, a in enumerate(kinds) for b in kinds[i + 1:]},
    }
    roots = pi_roots(q)

    def to_bc(kind, p):
        if kind == "pi":
            return eqv.pi_to_bc(p, roots, tol)
        if kind == "va":
            return SdrPoint(*eqv.va_to_bc(p.aux.b_mat, p.aux.b_vec, q, tol))
        return p

    def from_bc(kind, p):
        if kind == "pi":
            aux = eqv.bc_to_pi16(p.s_mat, p.s_vec, tol) if q == 2 else eqv.bc_to_pi64(p.s_mat, p.s_vec, roots, tol)
            return SdrPoint(p.s_mat, p.s_vec, aux)
        if kind == "va":
            aux = eqv.bc_to_va(p.s_mat, p.s_vec, q, tol)
            w = va_weight_matrix(inst.n, q)
            return SdrPoint(w @ aux.b_mat @ w.T, w @ aux.b_vec, aux)
        return p

    def check(kind, p):
        if kind == "pi":
            return eqv.check_pi_feasible(p, roots, tol)
        if kind == "va":
            return eqv.check_va_feasible(p, q, tol)
        return eqv.check_bc_feasible(p, q, tol)

    conversions = []
    for src in kinds:
        for dst in kinds:
            if src == dst:
                continue
            entry = {"direction": f"{src}->{dst}"}
            try:
                p = from_bc(dst, to_bc(src, points[src]))
                rep = check(dst, p)
                f_src, f_dst = objective_f(inst, points[src]), objective_f(inst, p)
                entry.update(feasible=rep.feasible, objective_src=f_src, objective_dst=f_dst,
                             objective_rel_diff=_rel(f_dst, f_src))
            except (ValueError, np.linalg.LinAlgError) as e:
                entry.update(feasible=False, error=str(e))
            conversions.append(entry)
    report["conversions"] = conversions
    return report


def roots_row(roots: RootSet, opts: SolverOptions | None = None, tol: float = 1e-4) -> dict:
    a = eqv.compute_d_interval(roots, opts)
    return {"roots": list(roots.r), "p": a.p.tolist(), "condition": a.condition_holds,
            "L": a.d_interval[0], "U": a.d_interval[1], "full_interval": a.interval_is_full(tol),
            "agree": a.agrees(tol)}


def random_roots(count: int, seed: int, high: float = 100.0) -> list[RootSet]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        r = np.sort(rng.uniform(0.0, high, 4))
        if r[0] > 0 and np.all(np.diff(r) > 0):
            out.append(RootSet(tuple(r)))
    return out
