"""Reproducible experiment harness.

Experiments are described by JSON configs with a `kind` of "probe",
"solve", "identify" or "transversal".  Configs are validated strictly
(unknown keys are rejected) before any computation happens; artifacts are
written atomically and reproducibly, so identical configs always produce
byte-identical output files.

Config layout by kind (all numeric fields validated for sign and type):

  probe      rep, radius, n_samples, seed, outputs{profile_csv}
  solve      f, g, p, q, A, gamma, mu, x0, y0, max_iter, tol,
             record_every, outputs{trace_csv, report_json[, residual_svg]}
  identify   rep, member{manifold, tol}, radius, n_samples, seed,
             outputs{report_json}
  transversal  manifold, objective, u_bar, outputs{report_json}

Rep specs: {"type": "sqrt-branches"}, {"type": "abs-plus-square"},
{"type": "normal-bundle", "manifold": ..., "x_bar": [...]}, or
{"type": "subdiff-graph", "f": ..., "smooth": ..., "u_bar": ..., "v_bar": ...}.
Manifolds are builtin names ("circle", "sphere", "axis-line", "paraboloid")
or parameterized objects such as {"name": "hyperplane", "normal": [...]} and
{"name": "circle", "base_angle": 3.14159}.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import zoo
from .errors import DegenerateError, PreconditionError, SchemaError
from .geometry import SmoothMap
from .graphs import (
    DEGENERATE,
    CoordGraphRep,
    PartialSmoothCertificate,
    constant_rank_probe,
    identifiability_test,
    normal_bundle_rep,
)
from .manifold_opt import (
    ManifoldObjective,
    covariant_gradient,
    covariant_hessian,
    second_order_check,
    transversality_check,
)
from .proxfn import (
    L1,
    Box,
    GroupL1,
    ManifoldPattern,
    ProxFn,
    QuadraticShift,
    Separable,
    Zero,
    subdiff_graph_rep,
)
from .solver import IterateRecord, SaddleProblem, Trace, nondegeneracy_report, solve

KINDS = ("probe", "solve", "identify", "transversal")


# ---------------------------------------------------------------------------
# schema validation


def _fail(where: str, message: str) -> None:
    raise SchemaError(f"{where}: {message}")


def _expect_object(obj, where: str, required: dict, optional: dict | None = None) -> dict:
    """Check key presence and value types; unknown keys are rejected."""
    optional = optional or {}
    if not isinstance(obj, dict):
        _fail(where, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        _fail(where, f"unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        _fail(where, f"missing keys {sorted(missing)}")
    for key, check in {**required, **optional}.items():
        if key in obj:
            check(obj[key], f"{where}.{key}")
    return obj


def _number(positive=False, nonnegative=False):
    def check(v, where):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail(where, "expected a number")
        if positive and not v > 0:
            _fail(where, "must be positive")
        if nonnegative and v < 0:
            _fail(where, "must be nonnegative")

    return check


def _integer(minimum=None):
    def check(v, where):
        if isinstance(v, bool) or not isinstance(v, int):
            _fail(where, "expected an integer")
        if minimum is not None and v < minimum:
            _fail(where, f"must be at least {minimum}")

    return check


def _string(v, where):
    if not isinstance(v, str) or not v:
        _fail(where, "expected a nonempty string")


def _vector(v, where):
    if not isinstance(v, list) or not all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in v
    ):
        _fail(where, "expected a list of numbers")


def _matrix(v, where):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        _fail(where, "expected a nested list of numbers")
    width = len(v[0])
    for r in v:
        if len(r) != width:
            _fail(where, "rows have inconsistent lengths")
        _vector(r, where)


def _filename(v, where):
    _string(v, where)
    if "/" in v or "\\" in v or v in (".", ".."):
        _fail(where, "output names must be plain file names")


def _outputs(required_keys, optional_keys=()):
    def check(v, where):
        _expect_object(
            v,
            where,
            {k: _filename for k in required_keys},
            {k: _filename for k in optional_keys},
        )

    return check


def _manifold_spec(v, where):
    if isinstance(v, str):
        if v not in ("circle", "sphere", "axis-line", "paraboloid"):
            _fail(where, f"unknown builtin manifold {v!r}")
        return
    if not isinstance(v, dict) or "name" not in v:
        _fail(where, "expected a builtin name or an object with a 'name'")
    name = v["name"]
    if name == "circle":
        _expect_object(v, where, {"name": _string}, {"base_angle": _number()})
    elif name == "hyperplane":
        _expect_object(v, where, {"name": _string, "normal": _vector})
    elif name == "full-space":
        _expect_object(v, where, {"name": _string, "dim": _integer(1)})
    elif name in ("sphere", "axis-line", "paraboloid"):
        _expect_object(v, where, {"name": _string})
    else:
        _fail(where, f"unknown builtin manifold {name!r}")


def _fn_spec(v, where):
    if not isinstance(v, dict) or "name" not in v:
        _fail(where, "expected an object with a 'name'")
    name = v["name"]
    if name == "l1":
        _expect_object(v, where, {"name": _string, "lam": _number(positive=True), "dim": _integer(1)})
    elif name == "box":
        def bound(t, w):
            if isinstance(t, (int, float)) and not isinstance(t, bool):
                return
            _vector(t, w)

        _expect_object(v, where, {"name": _string, "lower": bound, "upper": bound, "dim": _integer(1)})
    elif name == "group-l1":
        def groups(t, w):
            if not isinstance(t, list) or not all(isinstance(g, list) for g in t):
                _fail(w, "expected a list of index lists")
            for g in t:
                if not all(isinstance(i, int) and not isinstance(i, bool) for i in g):
                    _fail(w, "group indices must be integers")

        _expect_object(
            v, where, {"name": _string, "groups": groups, "lam": _number(positive=True), "dim": _integer(1)}
        )
    elif name == "zero":
        _expect_object(v, where, {"name": _string, "dim": _integer(1)})
    elif name == "quadratic-shift":
        _expect_object(v, where, {"name": _string, "center": _vector})
    elif name == "separable":
        def blocks(t, w):
            if not isinstance(t, list) or not t:
                _fail(w, "expected a nonempty list of blocks")
            for i, blk in enumerate(t):
                _expect_object(
                    blk,
                    f"{w}[{i}]",
                    {"fn": _fn_spec, "coords": _vector},
                )
                if not all(isinstance(c, int) for c in blk["coords"]):
                    _fail(f"{w}[{i}].coords", "coordinates must be integers")

        _expect_object(v, where, {"name": _string, "blocks": blocks})
    else:
        _fail(where, f"unknown function {name!r}")


def _smooth_spec(v, where):
    if v is None:
        return
    if not isinstance(v, dict) or v.get("type") != "quadratic":
        _fail(where, "expected null or {'type': 'quadratic', ...}")
    _expect_object(
        v,
        where,
        {"type": _string, "dim": _integer(1)},
        {"Q": _matrix, "b": _vector, "c": _number()},
    )


def _rep_spec(v, where):
    if not isinstance(v, dict) or "type" not in v:
        _fail(where, "expected an object with a 'type'")
    t = v["type"]
    if t in ("sqrt-branches", "abs-plus-square"):
        _expect_object(v, where, {"type": _string})
    elif t == "normal-bundle":
        _expect_object(v, where, {"type": _string, "manifold": _manifold_spec, "x_bar": _vector})
    elif t == "subdiff-graph":
        _expect_object(
            v,
            where,
            {"type": _string, "f": _fn_spec, "smooth": _smooth_spec, "u_bar": _vector, "v_bar": _vector},
        )
    else:
        _fail(where, f"unknown representation {t!r}")


_COMMON_PROBE = {
    "kind": _string,
    "rep": _rep_spec,
    "radius": _number(positive=True),
    "n_samples": _integer(1),
    "seed": _integer(0),
}


def validate_config(cfg) -> dict:
    """Validate a parsed config; raises SchemaError on any problem."""
    if not isinstance(cfg, dict):
        raise SchemaError("top level: expected an object")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"top level: 'kind' must be one of {list(KINDS)}")
    if kind == "probe":
        _expect_object(
            cfg, "probe", {**_COMMON_PROBE, "outputs": _outputs(("profile_csv",))}
        )
    elif kind == "solve":
        _expect_object(
            cfg,
            "solve",
            {
                "kind": _string,
                "f": _fn_spec,
                "g": _fn_spec,
                "p": _smooth_spec,
                "q": _smooth_spec,
                "A": _matrix,
                "gamma": _number(positive=True),
                "mu": _number(positive=True),
                "x0": _vector,
                "y0": _vector,
                "max_iter": _integer(1),
                "tol": _number(positive=True),
                "record_every": _integer(1),
                "outputs": _outputs(("trace_csv", "report_json"), ("residual_svg",)),
            },
            {"seed": _integer(0)},
        )
    elif kind == "identify":
        def member(v, where):
            _expect_object(
                v, where, {"manifold": _manifold_spec, "tol": _number(positive=True)}
            )

        _expect_object(
            cfg,
            "identify",
            {**_COMMON_PROBE, "member": member, "outputs": _outputs(("report_json",))},
        )
    elif kind == "transversal":
        _expect_object(
            cfg,
            "transversal",
            {
                "kind": _string,
                "manifold": _manifold_spec,
                "objective": _smooth_spec,
                "u_bar": _vector,
                "outputs": _outputs(("report_json",)),
            },
        )
    return cfg


# ---------------------------------------------------------------------------
# builders


def build_manifold(spec) -> zoo.ManifoldPair:
    if isinstance(spec, str):
        return zoo.builtin_manifold(spec)
    params = {k: v for k, v in spec.items() if k != "name"}
    try:
        return zoo.builtin_manifold(spec["name"], **params)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"manifold spec: {exc}") from exc


def build_proxfn(spec) -> ProxFn:
    name = spec["name"]
    try:
        if name == "l1":
            return L1(spec["lam"], spec["dim"])
        if name == "box":
            return Box(spec["lower"], spec["upper"], spec["dim"])
        if name == "group-l1":
            return GroupL1(spec["groups"], spec["lam"], spec["dim"])
        if name == "zero":
            return Zero(spec["dim"])
        if name == "quadratic-shift":
            return QuadraticShift(spec["center"])
        if name == "separable":
            blocks = [(build_proxfn(b["fn"]), b["coords"]) for b in spec["blocks"]]
            return Separable(blocks)
    except ValueError as exc:
        raise SchemaError(f"function spec {name!r}: {exc}") from exc
    raise SchemaError(f"unknown function {name!r}")


def build_smooth(spec) -> SmoothMap | None:
    if spec is None:
        return None
    try:
        return zoo.quadratic_form(
            spec["dim"], quad=spec.get("Q"), lin=spec.get("b"), const=spec.get("c", 0.0)
        )
    except ValueError as exc:
        raise SchemaError(f"smooth spec: {exc}") from exc


def build_rep(spec) -> CoordGraphRep:
    t = spec["type"]
    try:
        if t == "sqrt-branches":
            return zoo.sqrt_branch_rep()
        if t == "abs-plus-square":
            return zoo.abs_plus_square_rep()
        if t == "normal-bundle":
            pair = build_manifold(spec["manifold"])
            return normal_bundle_rep(pair.dual, pair.chart, spec["x_bar"])
        if t == "subdiff-graph":
            fn = build_proxfn(spec["f"])
            smooth = build_smooth(spec["smooth"])
            return subdiff_graph_rep(fn, smooth, spec["u_bar"], spec["v_bar"])
    except (ValueError, PreconditionError) as exc:
        raise SchemaError(f"representation spec {t!r}: {exc}") from exc
    raise SchemaError(f"unknown representation {t!r}")


# ---------------------------------------------------------------------------
# artifact emission


def _format_float(v: float) -> str:
    return repr(float(v))


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_trace_csv(trace: Trace | list, path) -> None:
    """Write iterate records as CSV: k, residual, patterns, then x and y."""
    records = list(trace.records) if isinstance(trace, Trace) else list(trace)
    if not records:
        raise ValueError("trace is empty")
    n = records[0].x.shape[0]
    m = records[0].y.shape[0]
    header = (
        ["k", "residual", "pattern_x", "pattern_y"]
        + [f"x{i}" for i in range(n)]
        + [f"y{i}" for i in range(m)]
    )
    lines = [",".join(header)]
    for rec in records:
        cells = [str(rec.k), _format_float(rec.residual)]
        cells.append(rec.pattern_x.compact())
        cells.append(rec.pattern_y.compact())
        cells.extend(_format_float(t) for t in rec.x)
        cells.extend(_format_float(t) for t in rec.y)
        lines.append(",".join(cells))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def parse_trace_csv(path) -> list[IterateRecord]:
    """Read back the records written by emit_trace_csv."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    header = lines[0].split(",")
    n = sum(1 for c in header if c.startswith("x"))
    m = sum(1 for c in header if c.startswith("y"))
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        k = int(cells[0])
        residual = float(cells[1])
        pattern_x = ManifoldPattern.from_compact(cells[2])
        pattern_y = ManifoldPattern.from_compact(cells[3])
        x = np.array([float(t) for t in cells[4 : 4 + n]])
        y = np.array([float(t) for t in cells[4 + n : 4 + n + m]])
        records.append(IterateRecord(k, x, y, residual, pattern_x, pattern_y))
    return records


def emit_rank_profile(cert: PartialSmoothCertificate, path) -> tuple[Path, Path]:
    """Write the sampled rank profile as CSV plus a JSON verdict sidecar."""
    if cert.profile is None:
        raise ValueError("certificate has no profile to emit")
    path = Path(path)
    d = cert.profile.samples[0][0].shape[0]
    header = ["sample_index"] + [f"param{i}" for i in range(d)] + ["rank"]
    lines = [",".join(header)]
    for i, (pt, rank) in enumerate(cert.profile.samples):
        cells = [str(i)] + [_format_float(t) for t in pt] + [str(rank)]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
    sidecar = path.with_suffix(".json")
    payload = {
        "verdict": cert.verdict,
        "graph_dim": cert.graph_dim,
        "manifold_dim": cert.manifold_dim,
        "coderiv_dim": cert.coderiv_dim,
        "radius": cert.profile.radius,
        "seed": cert.profile.seed,
        "n_samples": len(cert.profile.samples) - 1,
    }
    atomic_write_text(sidecar, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path, sidecar


def emit_residual_svg(trace: Trace, path) -> None:
    """Minimal deterministic SVG line plot of log10 residual against iteration."""
    records = trace.records
    width, height, pad = 640.0, 400.0, 40.0
    ks = [rec.k for rec in records]
    logs = [np.log10(max(rec.residual, 1e-16)) for rec in records]
    kmax = max(max(ks), 1)
    lo, hi = min(logs), max(logs)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    points = []
    for k, val in zip(ks, logs):
        px = pad + (width - 2 * pad) * k / kmax
        py = pad + (height - 2 * pad) * (hi - val) / (hi - lo)
        points.append(f"{px:.2f},{py:.2f}")
    body = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">\n'
        f'<rect x="{pad:.0f}" y="{pad:.0f}" width="{width - 2 * pad:.0f}" '
        f'height="{height - 2 * pad:.0f}" fill="none" stroke="black"/>\n'
        f'<polyline points="{" ".join(points)}" fill="none" stroke="blue"/>\n'
        f'<text x="{width / 2:.0f}" y="{height - 8:.0f}" text-anchor="middle" '
        f'font-size="12">iteration (0..{max(ks)})</text>\n'
        f'<text x="12" y="{height / 2:.0f}" font-size="12" '
        f'transform="rotate(-90 12 {height / 2:.0f})">log10 residual</text>\n'
        "</svg>\n"
    )
    atomic_write_text(Path(path), body)


# ---------------------------------------------------------------------------
# the runner


def config_digest(cfg: dict) -> str:
    """Stable hash of the semantic config content (whitespace-insensitive)."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunReport:
    kind: str
    digest: str
    wall_time_s: float
    summary: dict
    artifacts: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "digest": self.digest,
            "wall_time_s": self.wall_time_s,
            "summary": self.summary,
            "artifacts": list(self.artifacts),
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path.name}: {exc}") from exc
    return validate_config(cfg)


def _write_json_report(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _run_probe(cfg: dict, out: Path) -> tuple[dict, list[Path]]:
    rep = build_rep(cfg["rep"])
    cert = constant_rank_probe(rep, cfg["radius"], cfg["n_samples"], cfg["seed"])
    if cert.verdict == DEGENERATE:
        raise DegenerateError("probe returned a degenerate certificate")
    csv_path, sidecar = emit_rank_profile(cert, out / cfg["outputs"]["profile_csv"])
    summary = {
        "verdict": cert.verdict,
        "graph_dim": cert.graph_dim,
        "manifold_dim": cert.manifold_dim,
        "coderiv_dim": cert.coderiv_dim,
    }
    return summary, [csv_path, sidecar]


def _run_solve(cfg: dict, out: Path) -> tuple[dict, list[Path]]:
    problem = SaddleProblem(
        f=build_proxfn(cfg["f"]),
        g=build_proxfn(cfg["g"]),
        p=build_smooth(cfg["p"]) or zoo.quadratic_form(build_proxfn(cfg["f"]).dim),
        q=build_smooth(cfg["q"]) or zoo.quadratic_form(build_proxfn(cfg["g"]).dim),
        a=np.asarray(cfg["A"], dtype=float),
        gamma=cfg["gamma"],
        mu=cfg["mu"],
    )
    trace = solve(
        problem,
        cfg["x0"],
        cfg["y0"],
        max_iter=cfg["max_iter"],
        tol=cfg["tol"],
        record_every=cfg["record_every"],
    )
    final = trace.records[-1]
    margins = None
    if trace.converged:
        try:
            mf, mg = nondegeneracy_report(problem, final.x, final.y, tol=cfg["tol"])
            margins = [mf if np.isfinite(mf) else "inf", mg if np.isfinite(mg) else "inf"]
        except PreconditionError:
            margins = None
    artifacts = []
    csv_path = out / cfg["outputs"]["trace_csv"]
    emit_trace_csv(trace, csv_path)
    artifacts.append(csv_path)
    summary = {
        "converged": trace.converged,
        "iterations": final.k,
        "final_residual": final.residual,
        "identification_index": trace.identification_index,
        "margins": margins,
    }
    report_path = out / cfg["outputs"]["report_json"]
    _write_json_report(report_path, {"digest": config_digest(cfg), **summary})
    artifacts.append(report_path)
    if "residual_svg" in cfg["outputs"]:
        svg_path = out / cfg["outputs"]["residual_svg"]
        emit_residual_svg(trace, svg_path)
        artifacts.append(svg_path)
    return summary, artifacts


def _run_identify(cfg: dict, out: Path) -> tuple[dict, list[Path]]:
    rep = build_rep(cfg["rep"])
    pair = build_manifold(cfg["member"]["manifold"])
    tol = cfg["member"]["tol"]

    def member(u):
        return bool(np.linalg.norm(pair.dual.p(u)) <= tol)

    ok = identifiability_test(rep, member, cfg["radius"], cfg["n_samples"], cfg["seed"])
    summary = {"identifiable": ok, "member_tol": tol}
    report_path = out / cfg["outputs"]["report_json"]
    _write_json_report(report_path, {"digest": config_digest(cfg), **summary})
    return summary, [report_path]


def _run_transversal(cfg: dict, out: Path) -> tuple[dict, list[Path]]:
    pair = build_manifold(cfg["manifold"])
    objective = build_smooth(cfg["objective"])
    mo = ManifoldObjective(pair.chart, pair.dual, objective)
    u_bar = np.asarray(cfg["u_bar"], dtype=float)
    grad = covariant_gradient(mo, u_bar)
    hess = covariant_hessian(mo, u_bar)
    summary = {
        "covariant_gradient_norm": float(np.linalg.norm(grad)),
        "eigenvalues": [float(t) for t in hess.eigenvalues()],
        "second_order_sufficient": second_order_check(mo, u_bar),
        "transversal": transversality_check(mo, u_bar),
    }
    report_path = out / cfg["outputs"]["report_json"]
    _write_json_report(report_path, {"digest": config_digest(cfg), **summary})
    return summary, [report_path]


_RUNNERS = {
    "probe": _run_probe,
    "solve": _run_solve,
    "identify": _run_identify,
    "transversal": _run_transversal,
}


def run(config_path, out_dir=".", seed_override: int | None = None) -> RunReport:
    """Execute one experiment config; artifacts land in out_dir/<config stem>/."""
    config_path = Path(config_path)
    cfg = load_config(config_path)
    digest = config_digest(cfg)
    if seed_override is not None and "seed" in cfg:
        cfg = {**cfg, "seed": int(seed_override)}
    out = Path(out_dir) / config_path.stem
    start = time.perf_counter()
    summary, artifacts = _RUNNERS[cfg["kind"]](cfg, out)
    elapsed = time.perf_counter() - start
    return RunReport(
        kind=cfg["kind"],
        digest=digest,
        wall_time_s=elapsed,
        summary=summary,
        artifacts=tuple(str(p) for p in artifacts),
    )
