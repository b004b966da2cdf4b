"""Declarative experiments: config validation, execution and persistence.

A config is a JSON object with a ``kind`` and the grids that kind needs. Each
kind produces rows; every row carries ``analytic``, ``empirical``, ``slack``
and ``verdict`` (``pass``, ``fail`` or ``n/a`` when nothing is asserted).
"""

import csv
import hashlib
import io
import json
import math
import os
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, bounds, downstream, mclab
from ._parallel import parallel_map
from .core import sample_frequencies
from .errors import ConfigError

SEED_ENV = "RFFB_SEED"
TIGHTEST_FLOOR = math.log(1e-100)  # below this, "tightest" compares underflowed values
TRAILER = ["analytic", "empirical", "slack", "verdict"]


# --- validation ------------------------------------------------------------

def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(key, "required field missing")
    return cfg[key]


def _number(value, path, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if nonneg and not value >= 0:
        raise ConfigError(path, f"must be nonnegative, got {value!r}")
    return int(value) if integer else float(value)


def _grid(cfg, key, **kw):
    values = _require(cfg, key)
    if not isinstance(values, list) or not values:
        raise ConfigError(key, "must be a non-empty list")
    return [_number(v, f"{key}[{i}]", **kw) for i, v in enumerate(values)]


def _scalar(cfg, key, default=None, **kw):
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "required field missing")
        return default
    return _number(cfg[key], key, **kw)


def _seed(cfg):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            seed = int(env, 0)
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env!r}") from None
    else:
        seed = _scalar(cfg, "seed", integer=True, nonneg=True)
    if not 0 <= seed < 1 << 64:
        raise ConfigError("seed", f"must fit in 64 unsigned bits, got {seed}")
    return seed


def _probability_cells(cfg):
    cells = []
    Rs = _grid(cfg, "R", positive=True)
    Ds = _grid(cfg, "D", positive=True, integer=True)
    if "epsilon" in cfg:
        eps = _grid(cfg, "epsilon", positive=True)
        cells = [(R, D, e) for R in Rs for D in Ds for e in eps]
    else:
        target = _scalar(cfg, "target_bound", positive=True)
        if not target < 1:
            raise ConfigError("target_bound", f"must be below 1, got {target!r}")
        cells = [(R, D, bounds.epsilon_for_bound(R, D, target)) for R in Rs for D in Ds]
    extra = cfg.get("extra_cells", [])
    if not isinstance(extra, list):
        raise ConfigError("extra_cells", "must be a list")
    for i, c in enumerate(extra):
        if not isinstance(c, dict):
            raise ConfigError(f"extra_cells[{i}]", "must be an object")
        cells.append(tuple(
            _number(c.get(k), f"extra_cells[{i}].{k}", positive=True, integer=(k == "D"))
            for k in ("R", "D", "epsilon")
        ))
    return cells


def validate(cfg):
    """Check a config and return it normalised; raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    kind = _require(cfg, "kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown kind {kind!r}; expected one of {sorted(KINDS)}")
    return KINDS[kind][0](cfg)


def _v_bounds_table(cfg):
    return dict(
        kind="bounds-table",
        d=_grid(cfg, "d", positive=True, integer=True),
        R=_grid(cfg, "R", positive=True),
        D=_grid(cfg, "D", positive=True, integer=True),
        epsilon=_grid(cfg, "epsilon", positive=True),
        delta=_scalar(cfg, "delta", 0.05, positive=True),
    )


def _v_envelope(cfg):
    trials = _scalar(cfg, "trials", integer=True, positive=True)
    return dict(
        kind="probability-envelope",
        cells=_probability_cells(cfg),
        trials=trials,
        seed=_seed(cfg),
        pad_fraction=_scalar(cfg, "pad_fraction", 0.25, positive=True),
    )


def _v_expected_sup(cfg):
    return dict(
        kind="expected-sup",
        R=_grid(cfg, "R", positive=True),
        D=_grid(cfg, "D", positive=True, integer=True),
        trials=_scalar(cfg, "trials", integer=True, positive=True),
        seed=_seed(cfg),
    )


def _v_lipschitz(cfg):
    return dict(
        kind="lipschitz",
        D=_grid(cfg, "D", positive=True, integer=True),
        R=_scalar(cfg, "R", positive=True),
        r_grid=_scalar(cfg, "r_grid", 51, integer=True, positive=True),
        trials=_scalar(cfg, "trials", integer=True, positive=True),
        tolerance=_scalar(cfg, "tolerance", 1.05, positive=True),
        seed=_seed(cfg),
    )


def _v_identity(cfg):
    out = dict(
        kind="parameter-identity",
        r=_grid(cfg, "r", nonneg=True),
        D=_grid(cfg, "D", positive=True, integer=True),
        trials=_scalar(cfg, "trials", integer=True, positive=True),
        seed=_seed(cfg),
    )
    for i, r in enumerate(out["r"]):
        for D in out["D"]:
            if D * r * r > 8.0:
                raise ConfigError(f"r[{i}]", f"D*r^2 = {D * r * r!r} > 8 for D={D}")
    return out


def _v_lecam(cfg):
    return dict(
        kind="lecam",
        R=_grid(cfg, "R", positive=True),
        D=_grid(cfg, "D", positive=True, integer=True),
        trials=_scalar(cfg, "trials", integer=True, positive=True),
        seed=_seed(cfg),
    )


def _v_downstream(kind, weight):
    def check(cfg):
        out = dict(
            kind=kind,
            n=_scalar(cfg, "n", integer=True, positive=True),
            d=_scalar(cfg, "d", integer=True, positive=True),
            D=_scalar(cfg, "D", integer=True, positive=True),
            seeds=_scalar(cfg, "seeds", integer=True, positive=True),
            probes=_scalar(cfg, "probes", 20, integer=True, positive=True),
            seed=_seed(cfg),
        )
        out[weight] = _scalar(cfg, weight, positive=True)
        if kind == "svm-gap":
            out["tol"] = _scalar(cfg, "tol", 1e-8, positive=True)
        return out
    return check


def _v_inversions(cfg):
    return dict(
        kind="compare-inversions",
        R=_grid(cfg, "R", positive=True),
        D=_grid(cfg, "D", positive=True, integer=True),
        tau=_grid(cfg, "tau", nonneg=True),
        d=_grid(cfg, "d", positive=True, integer=True),
    )


# --- seeds -----------------------------------------------------------------

def cell_seed(master, index):
    """64-bit seed for grid cell ``index``, hashed from the master seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(master.to_bytes(8, "little"))
    h.update(int(index).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


# --- runners ---------------------------------------------------------------

def _verdict(ok, asserted=True):
    if not asserted:
        return "n/a"
    return "pass" if ok else "fail"


def _r_bounds_table(c, jobs):
    rows = []
    for d in c["d"]:
        for R in c["R"]:
            for D in c["D"]:
                for eps in c["epsilon"]:
                    q = bounds.BoundQuery(R, D, eps, d=d, delta=c["delta"])
                    table = {r.name: r for r in bounds.compare_bounds(q)}
                    tight = bounds.tightest_upper(table.values())
                    thm = table["thm1"].log_value
                    rival = min(r.log_value for r in table.values()
                                if r.side == "upper" and r.name != "thm1")
                    asserted = R >= 1 and thm >= TIGHTEST_FLOOR
                    lp = table.get("lower_prob")
                    rows.append(dict(
                        d=d, R=R, D=D, epsilon=eps,
                        thm1=table["thm1"].value,
                        rahimi=table["rahimi"].value,
                        sutherland=table["sutherland"].value,
                        sriperumbudur_log=table["sriperumbudur"].log_value,
                        lower_expected=table["lower_expected"].value,
                        lower_prob=lp.value if lp else math.nan,
                        tightest=tight,
                        analytic=thm, empirical=rival, slack=0.0,
                        verdict=_verdict(tight == "thm1", asserted),
                    ))
    return rows


def _envelope_cell(R, D, eps, trials, seed, pad_fraction, jobs):
    grid = mclab.mc_grid_points(R, eps, pad_fraction)
    est = mclab.estimate_error_probability(R, D, eps, trials, seed, grid, jobs)
    bound = bounds.thm1(R, D, eps)
    return dict(
        R=R, D=D, epsilon=eps, trials=trials, grid_points=grid,
        failures=est.failures, p_hat=est.p_hat, ci_low=est.ci_low, ci_high=est.ci_high,
        bound=bound,
        analytic=bound, empirical=est.p_hat, slack=est.p_hat - est.ci_low,
        verdict=_verdict(est.ci_low <= bound),
    )


def _r_envelope(c, jobs):
    return [
        _envelope_cell(R, D, eps, c["trials"], cell_seed(c["seed"], i), c["pad_fraction"], jobs)
        for i, (R, D, eps) in enumerate(c["cells"])
    ]


def _r_expected_sup(c, jobs):
    rows = []
    cells = [(R, D) for R in c["R"] for D in c["D"]]
    for i, (R, D) in enumerate(cells):
        mean, se = mclab.estimate_expected_sup(R, D, c["trials"], cell_seed(c["seed"], i), jobs=jobs)
        bound = bounds.expected_sup_bound(R, D)
        rows.append(dict(
            R=R, D=D, trials=c["trials"], mean=mean, stderr=se, bound=bound,
            analytic=bound, empirical=mean, slack=3.0 * se,
            verdict=_verdict(mean <= bound + 3.0 * se),
        ))
    return rows


def _r_lipschitz(c, jobs):
    rows = []
    for i, D in enumerate(c["D"]):
        chk = mclab.check_lipschitz_variance(D, c["R"], c["r_grid"], c["trials"],
                                             cell_seed(c["seed"], i), jobs)
        rows.append(dict(
            D=D, R=c["R"], trials=c["trials"], max_variance=chk.max_variance,
            argmax_r=chk.argmax_r, stderr=chk.stderr, cap=chk.cap,
            analytic=chk.cap, empirical=chk.max_variance,
            slack=chk.cap * (c["tolerance"] - 1.0),
            verdict=_verdict(chk.max_variance <= chk.cap * c["tolerance"]),
        ))
    return rows


def _r_identity(c, jobs):
    rows = []
    cells = [(r, D) for r in c["r"] for D in c["D"]]
    for i, (r, D) in enumerate(cells):
        p = mclab.parameter_identity(r, D, c["trials"], cell_seed(c["seed"], i))
        tol = 4.0 / math.sqrt(c["trials"])
        rows.append(dict(
            r=r, D=D, trials=c["trials"], estimate=p.estimate, target=p.target,
            pre_root_mean=p.pre_root_mean, pre_root_target=p.pre_root_target, stderr=p.stderr,
            analytic=p.pre_root_target, empirical=p.pre_root_mean, slack=tol,
            verdict=_verdict(abs(p.pre_root_mean - p.pre_root_target) <= tol),
        ))
    return rows


def _r_lecam(c, jobs):
    rows = []
    cells = [(R, D) for R in c["R"] for D in c["D"]]
    for i, (R, D) in enumerate(cells):
        rep = mclab.lecam_floor_experiment(R, D, c["trials"], cell_seed(c["seed"], i), jobs)
        rows.append(dict(
            R=R, D=D, trials=c["trials"],
            delta1_sq=rep.pair.sigma1_sq, delta2_sq=rep.pair.sigma2_sq,
            kl=rep.pair.kl, affinity=rep.pair.affinity, floor=rep.floor,
            intermediate=rep.intermediate, expected_error=rep.empirical, stderr=rep.stderr,
            expected_error_delta1=rep.empirical_delta1,
            analytic=rep.floor, empirical=rep.empirical, slack=3.0 * rep.stderr,
            verdict=_verdict(rep.passed and rep.floor <= rep.intermediate <= 1.0),
        ))
    return rows


def _krr_seed(n, d, D, lam, probes, seed):
    data = downstream.regression_data(n, d, seed)
    basis = sample_frequencies(d, D, cell_seed(seed, 1))
    return downstream.krr_gap_check(data, lam, basis, downstream.probe_points(data, probes, seed))


def _r_krr(c, jobs):
    args = [(c["n"], c["d"], c["D"], c["lam"], c["probes"], cell_seed(c["seed"], i))
            for i in range(c["seeds"])]
    reps = parallel_map(_krr_seed, args, jobs)
    return [
        dict(
            seed_index=i, n=c["n"], d=c["d"], D=c["D"], lam=c["lam"],
            u=r.u, m=r.m, gap=r.gap, bound=r.bound, residual=r.residual,
            analytic=r.bound, empirical=r.gap, slack=0.0,
            verdict=_verdict(r.passed and r.residual <= 1e-10, not r.skipped),
        )
        for i, r in enumerate(reps)
    ]


def _svm_seed(n, d, D, C0, probes, tol, seed):
    data = downstream.blob_data(n, d, seed)
    basis = sample_frequencies(d, D, cell_seed(seed, 1))
    return downstream.svm_gap_check(data, C0, basis, downstream.probe_points(data, probes, seed), tol)


def _r_svm(c, jobs):
    args = [(c["n"], c["d"], c["D"], c["C0"], c["probes"], c["tol"], cell_seed(c["seed"], i))
            for i in range(c["seeds"])]
    reps = parallel_map(_svm_seed, args, jobs)
    return [
        dict(
            seed_index=i, n=c["n"], d=c["d"], D=c["D"], C0=c["C0"],
            u=r.u, gap=r.gap, bound=r.bound,
            solver_gap_exact=r.solver_gap_exact, solver_gap_rff=r.solver_gap_rff,
            analytic=r.bound, empirical=r.gap, slack=r.slack,
            verdict=_verdict(r.passed),
        )
        for i, r in enumerate(reps)
    ]


def _r_inversions(c, jobs):
    rows = []
    for d in c["d"]:
        for R in c["R"]:
            for D in c["D"]:
                for tau in c["tau"]:
                    ours = bounds.epsilon_at_confidence_thm1(R, D, tau)
                    sri = bounds.epsilon_at_confidence_sriperumbudur(R, D, tau, d=d)
                    at = bounds.thm1(R, D, ours)
                    conservative = D * ours * ours >= 1.5
                    ok = ours < sri and (not conservative or at <= math.exp(-tau))
                    rows.append(dict(
                        d=d, R=R, D=D, tau=tau, eps_ours=ours, eps_sriperumbudur=sri,
                        bound_at_eps=at, target=math.exp(-tau),
                        analytic=ours, empirical=sri, slack=0.0,
                        verdict=_verdict(ok, R >= 1),
                    ))
    return rows


KINDS = {
    "bounds-table": (_v_bounds_table, _r_bounds_table),
    "probability-envelope": (_v_envelope, _r_envelope),
    "expected-sup": (_v_expected_sup, _r_expected_sup),
    "lipschitz": (_v_lipschitz, _r_lipschitz),
    "parameter-identity": (_v_identity, _r_identity),
    "lecam": (_v_lecam, _r_lecam),
    "krr-gap": (_v_downstream("krr-gap", "lam"), _r_krr),
    "svm-gap": (_v_downstream("svm-gap", "C0"), _r_svm),
    "compare-inversions": (_v_inversions, _r_inversions),
}


# --- persistence -----------------------------------------------------------

def columns(rows):
    if not rows:
        return list(TRAILER)
    head = [k for k in rows[0] if k not in TRAILER]
    return head + TRAILER


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def csv_body(rows):
    """Header plus data lines, without the timestamp comment."""
    buf = io.StringIO()
    w = csv.writer(buf)
    cols = columns(rows)
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row[k]) for k in cols])
    return buf.getvalue()


def read_csv(path):
    """Rows of a results CSV as dicts of strings, skipping the comment line."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def run_config(cfg, jobs=1):
    """Validate and execute ``cfg``; returns the report dict (not persisted)."""
    c = validate(cfg)
    start = time.perf_counter()
    rows = KINDS[c["kind"]][1](c, jobs)
    return dict(
        tool="rffb",
        version=__version__,
        kind=c["kind"],
        config=cfg,
        resolved=_jsonable(c),
        columns=columns(rows),
        rows=rows,
        passed=all(r["verdict"] != "fail" for r in rows),
        runtime_seconds=time.perf_counter() - start,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None


def write_outputs(report, out_dir, name):
    """Write ``<name>.csv`` and ``<name>.json`` under ``out_dir``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.json"
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# rffb {__version__} generated {stamp}\n")
        fh.write(csv_body(report["rows"]))
    report = dict(report, csv=csv_path.name)
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=1)
    return csv_path, json_path
