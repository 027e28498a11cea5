"""Command-line front end: holonomy / evolve / verify / sweep jobs.

Jobs are described by a JSON config (or flags); results are emitted as
JSON or CSV with complex entries as [re, im] pairs.  Output is
deterministic: the record body carries no timestamps, wall time lives in
a sidecar field.  Exit codes: 0 ok, 2 bad config, 3 degeneracy, 4
verification mismatch.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cases, dynamics, framegauge, models, oracles, paths
from .errors import ConfigError, DegeneracyError, HolonomyError

__all__ = ["main", "run", "emit", "load_config"]

MODEL_ALIASES = {
    "berry": "berry_spin_half",
    "berry_spin_half": "berry_spin_half",
    "half": "map_spin_half",
    "map_spin_half": "map_spin_half",
    "threehalf": "map_spin_threehalf",
    "map_spin_threehalf": "map_spin_threehalf",
}

DEFAULT_POINTS = {
    "berry_spin_half": {"theta": 1.1, "phi": 0.0, "B": 1.0},
    "map_spin_half": {"mu": 0.6 * math.pi, "lam": 0.55 * math.pi,
                      "theta": 0.4 * math.pi, "phi": 0.3},
    "map_spin_threehalf": {"mu": 0.55 * math.pi, "lam": 0.6 * math.pi,
                           "theta": 0.4 * math.pi, "eta": 0.8, "chi": 0.5, "phi": 0.9},
}

DEFAULT_SWEEP_KICKS = [2**10, 2**12, 2**14, 2**16]


def parse_angle(value) -> float:
    """Angles as numbers or multiples of pi ("0.5pi", "-pi", "pi/3")."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower().replace(" ", "")
    try:
        if "pi" not in text:
            return float(text)
        head, _, tail = text.partition("pi")
        if head in ("", "+"):
            mult = 1.0
        elif head == "-":
            mult = -1.0
        else:
            mult = float(head.rstrip("*"))
        if tail.startswith("/"):
            mult /= float(tail[1:])
        elif tail:
            raise ValueError(tail)
        return mult * math.pi
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {value!r}") from exc


def _as_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def load_config(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) with command-line overrides."""
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    cfg.setdefault("model", {})
    cfg.setdefault("loop", {})
    cfg.setdefault("numeric", {})
    cfg.setdefault("output", {})
    if args.model:
        cfg["model"]["name"] = args.model
    if args.q is not None:
        cfg["model"]["q"] = args.q
    if args.p is not None:
        cfg["model"]["p"] = args.p
    if args.loop:
        cfg["loop"]["kind"] = args.loop
    for item in args.set or []:
        name, _, raw = item.partition("=")
        if not raw:
            raise ConfigError(f"--set expects NAME=VALUE, got {item!r}")
        cfg["loop"].setdefault("fixed", {})[name] = raw
    if args.steps:
        cfg["numeric"]["steps"] = args.steps
    if args.kicks:
        cfg["numeric"]["kicks"] = args.kicks
    if args.format:
        cfg["output"]["format"] = args.format
    if args.out:
        cfg["output"]["path"] = args.out
    if args.figure:
        cfg["output"]["figure"] = args.figure
    cfg["job"] = args.job
    return cfg


def _build_model(cfg: dict) -> models.ModelSpec:
    name = cfg.get("model", {}).get("name")
    if not name:
        raise ConfigError("config needs model.name")
    canonical = MODEL_ALIASES.get(str(name))
    if canonical is None:
        raise ConfigError(f"unknown model {name!r}")
    q = int(cfg["model"].get("q", 0))
    p = int(cfg["model"].get("p", 1))
    return models.model_from_name(canonical, q=q, p=p)


def _build_loop(cfg: dict, model: models.ModelSpec):
    loop_cfg = cfg.get("loop", {})
    kind = loop_cfg.get("kind")
    if not kind:
        raise ConfigError("config needs loop.kind")
    samples = int(loop_cfg.get("samples", 1024))
    fixed = {k: parse_angle(v) for k, v in loop_cfg.get("fixed", {}).items()}
    if "lambda" in fixed:
        fixed["lam"] = fixed.pop("lambda")
    if kind == "polygon":
        if model.name != "berry_spin_half":
            raise ConfigError("polygon loops are defined on the Berry sphere")
        verts = loop_cfg.get("vertices")
        if not verts:
            raise ConfigError("polygon loop needs loop.vertices")
        parsed = [(parse_angle(t), parse_angle(p)) for t, p in verts]
        return paths.berry_polygon(parsed, B=fixed.get("B", 1.0), samples=samples), kind
    coords = dict(DEFAULT_POINTS[model.name])
    coords.update(fixed)
    base = models.ParamPoint(**coords)
    if kind == "point":
        return paths.point_loop(base), kind
    kind_norm = "C_lam" if kind in ("C_lam", "C_lambda") else kind
    loop = cases.make_loop(model, kind_norm, base, samples=samples)
    return loop, kind_norm


def _holonomy_record(result: framegauge.HolonomyResult) -> dict:
    phases = [
        None if z is None else float(np.angle(z)) for z in result.level_phases
    ]
    return {
        "M": _as_pairs(result.M),
        "W": _as_pairs(result.W),
        "B": _as_pairs(result.B),
        "permutation": list(result.permutation) if result.permutation else None,
        "level_phases": phases,
        "residual": float(result.residual),
        "pattern_ok": bool(result.pattern_ok),
        "steps": int(result.steps),
        "converged": bool(result.converged),
        "warnings": list(result.warnings),
    }


def _check_unitary(record: dict):
    for key in ("M", "W", "B"):
        m = np.array([[re + 1j * im for re, im in row] for row in record[key]])
        defect = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
        if defect > 1e-6:
            raise HolonomyError(f"{key} failed the unitarity check ({defect:.2e})")


def run(cfg: dict) -> dict:
    """Execute one job; returns the full record (without wall time)."""
    job = cfg.get("job", "holonomy")
    numeric = cfg.get("numeric", {})
    steps = numeric.get("steps")

    if job == "verify" and not cfg.get("loop", {}).get("kind") and not cfg.get("model", {}).get("name"):
        tol = float(numeric.get("tolerance", 1e-5))
        suite = []
        worst = 0.0
        for case in cases.bundled_cases():
            res = framegauge.holonomy_matrix(case.model, case.loop, steps=steps)
            pred = oracles.predict(case.model, case.kind, case.loop.point_at(0.0), loop=case.loop)
            diff = float(np.linalg.norm(res.M - pred.M_expected))
            worst = max(worst, diff)
            suite.append(
                {"case": case.name, "formula": pred.formula_id,
                 "norm_diff": diff, "agrees": diff < tol}
            )
        return {"job": job, "suite": suite, "tolerance": tol, "agrees": worst < tol}

    model = _build_model(cfg)
    record: dict = {"job": job, "model": {"name": model.name, "q": model.q, "p": model.p}}
    loop, kind = _build_loop(cfg, model)
    record["loop"] = {
        "kind": kind,
        "fixed": loop.point_at(0.0).as_dict(),
        "samples": loop.samples,
    }

    if job == "holonomy":
        res = framegauge.holonomy_matrix(model, loop, steps=steps)
        record["result"] = _holonomy_record(res)
        _check_unitary(record["result"])
        return record

    if job == "evolve":
        kicks = int(numeric.get("kicks", 2**14))
        res = framegauge.holonomy_matrix(model, loop, steps=steps)
        report = dynamics.adiabatic_predict(
            model, dynamics.Schedule(loop, kicks), holonomy=res
        )
        record["result"] = _holonomy_record(res)
        record["result"]["deviation"] = float(report.deviation)
        record["result"]["kicks"] = kicks
        _check_unitary(record["result"])
        return record

    if job == "verify":
        tol = float(numeric.get("tolerance", 1e-5))
        res = framegauge.holonomy_matrix(model, loop, steps=steps)
        pred = oracles.predict(model, kind, loop.point_at(0.0), loop=loop)
        diff = float(np.linalg.norm(res.M - pred.M_expected))
        record["result"] = _holonomy_record(res)
        record["result"]["oracle"] = {
            "formula": pred.formula_id,
            "M_expected": _as_pairs(pred.M_expected),
            "norm_diff": diff,
            "tolerance": tol,
            "agrees": diff < tol,
        }
        record["agrees"] = diff < tol
        _check_unitary(record["result"])
        return record

    if job == "sweep":
        kick_list = [int(k) for k in cfg.get("sweep", {}).get("kicks", DEFAULT_SWEEP_KICKS)]
        res = framegauge.holonomy_matrix(model, loop, steps=steps)
        threads = int(os.environ.get("HOLONOMY_THREADS", "0")) or min(
            len(kick_list), os.cpu_count() or 1
        )

        def one(kicks: int) -> float:
            rep = dynamics.adiabatic_predict(
                model, dynamics.Schedule(loop, kicks), holonomy=res
            )
            return float(rep.deviation)

        with ThreadPoolExecutor(max_workers=threads) as pool:
            deviations = list(pool.map(one, kick_list))
        record["sweep"] = [
            {"L": k, "deviation": d} for k, d in zip(kick_list, deviations)
        ]
        return record

    raise ConfigError(f"unknown job {job!r}")


def emit(record: dict, fmt: str = "json") -> bytes:
    """Serialize a record deterministically (sorted keys, [re,im] pairs)."""
    if fmt == "json":
        return (json.dumps(record, indent=2, sort_keys=True) + "\n").encode()
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    buf = io.StringIO()
    if "sweep" in record:
        buf.write("L,deviation\n")
        for row in record["sweep"]:
            buf.write(f"{row['L']},{row['deviation']!r}\n")
        return buf.getvalue().encode()
    buf.write("record,field,row,col,re,im\n")
    result = record.get("result", {})
    for key in ("M", "W", "B"):
        mat = result.get(key)
        if mat is None:
            continue
        for i, row in enumerate(mat):
            for j, (re, im) in enumerate(row):
                buf.write(f"matrix,{key},{i},{j},{re!r},{im!r}\n")
    for key in ("residual", "steps", "deviation", "kicks"):
        if key in result:
            buf.write(f"summary,{key},,,{result[key]!r},\n")
    if result.get("permutation") is not None:
        perm = " ".join(str(i) for i in result["permutation"])
        buf.write(f"summary,permutation,,,{perm},\n")
    if "oracle" in result:
        buf.write(f"summary,oracle_norm_diff,,,{result['oracle']['norm_diff']!r},\n")
        buf.write(f"summary,oracle_agrees,,,{int(result['oracle']['agrees'])},\n")
    return buf.getvalue().encode()


def _render_figure(record: dict, path: str):
    from . import plotting

    if "sweep" in record:
        plotting.save_sweep_figure(
            [row["L"] for row in record["sweep"]],
            [row["deviation"] for row in record["sweep"]],
            path,
            title=record.get("loop", {}).get("kind", ""),
        )
        return
    result = record.get("result")
    if not result:
        return
    mats = {
        key: np.array([[re + 1j * im for re, im in row] for row in result[key]])
        for key in ("M", "W", "B")
    }
    plotting.save_matrix_figure(mats, path, title=record.get("loop", {}).get("kind", ""))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holonomy",
        description="Adiabatic quantum holonomy jobs on the bundled models.",
    )
    sub = parser.add_subparsers(dest="job", required=True)
    for name, helptext in [
        ("holonomy", "integrate W, B, M for one loop"),
        ("evolve", "compare stroboscopic evolution with the adiabatic prediction"),
        ("verify", "check the integrator against closed forms"),
        ("sweep", "deviation vs kick count"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--model", help="model name (berry, half, threehalf)")
        p.add_argument("--q", type=int, default=None)
        p.add_argument("--p", type=int, default=None)
        p.add_argument("--loop", help="loop kind (C_theta, C_phi, C_lambda, ...)")
        p.add_argument(
            "--set", action="append", metavar="NAME=VALUE",
            help="fix a coordinate, e.g. --set theta=0.5pi",
        )
        p.add_argument("--steps", type=int, help="initial loop samples")
        p.add_argument("--kicks", type=int, help="evolution steps L")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--figure", help="render a matplotlib figure to this file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        started = time.perf_counter()
        record = run(cfg)
        wall = time.perf_counter() - started
        fmt = cfg.get("output", {}).get("format", "json")
        if fmt == "json":
            doc = {"config": cfg, **record, "wall_time_s": round(wall, 6)}
        else:
            doc = record
        payload = emit(doc, fmt)
        out_path = cfg.get("output", {}).get("path")
        if out_path:
            with open(out_path, "wb") as fh:
                fh.write(payload)
        else:
            sys.stdout.buffer.write(payload)
        fig_path = cfg.get("output", {}).get("figure")
        if fig_path:
            _render_figure(record, fig_path)
        if record.get("job") in ("verify",) and not record.get("agrees", True):
            print("verification mismatch beyond tolerance", file=sys.stderr)
            return 4
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy error: {exc}", file=sys.stderr)
        return 3
    except HolonomyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
