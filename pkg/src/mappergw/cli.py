"""Command line front end.

Every subcommand reads an optional JSON config (``--config``), validates it
against a schema that rejects unknown keys, and writes its outputs under
``--out``. Exit codes: 0 success, 1 runtime failure, 2 config or validation
error. The seed comes from ``--seed``, else the config's ``seed``, else 42.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from mappergw.experiments import (
    TORUS_GRID,
    classical_mds,
    decomposition_diagnostic,
    run_convergence,
    run_filter_sweep,
    run_torus_grid,
    write_csv,
    write_json,
)
from mappergw.geometry import EUCLIDEAN, AmbientMetric, DistanceField, PointCloud
from mappergw.mapper import EpsilonGraph, KMeans, build_cover, build_mapper
from mappergw.metric_measure import MetricMeasureSpace, mapper_to_mm
from mappergw.sampling import (
    FilterValues,
    TorusParams,
    fmt_float,
    height_filter,
    load_csv,
    load_off,
    sample_mesh_surface,
    sample_torus,
    save_cloud,
    save_off,
)
from mappergw.shapes import stick_figure
from mappergw.transport import GWOptions, gw_hat_p

DEFAULT_SEED = 42


class ConfigError(ValueError):
    """Invalid command line or configuration; maps to exit code 2."""


# --- schemas -----------------------------------------------------------------

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
INT = {"type": "integer"}
POS_INT = {"type": "integer", "minimum": 1}
STR = {"type": "string"}
BOOL = {"type": "boolean"}
VEC = {"type": "array", "items": NUM, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CLUSTERER = _obj({"kind": {"enum": ["epsilon", "kmeans"]}, "epsilon": POS, "k": POS_INT, "max_iter": POS_INT},
                 required=["kind"])
METRIC = _obj({"kind": {"enum": ["euclidean", "geodesic"]}, "epsilon": POS}, required=["kind"])
SOLVER = _obj({
    "p": {"enum": [1, 2]}, "restarts": POS_INT, "max_iter": POS_INT, "tol": POS,
    "inner": {"enum": ["exact", "entropic"]}, "eps_reg": POS, "seed": INT,
    "init": {"type": "array", "items": {"enum": ["product", "identity", "random"]}, "minItems": 1},
    "symmetrize": BOOL,
})
TORUS = _obj({"a": POS, "b": POS, "p": POS, "q": POS})
MAPPER_PARAMS = {"r": POS_INT, "g": NUM, "clusterer": CLUSTERER, "metric": METRIC}

SCHEMAS = {
    "sample": _obj({"kind": {"enum": ["torus", "mesh"]}, "n": POS_INT, "a": POS, "b": POS, "p": NUM, "q": NUM,
                    "mesh": STR, "seed": INT}),
    "mapper": _obj({"input": STR, "direction": VEC, "filter_column": STR, **MAPPER_PARAMS, "seed": INT}),
    "gw": _obj({"x": STR, "y": STR, "p": {"enum": [1, 2]}, "solver": SOLVER, "seed": INT}),
    "filter-sweep": _obj({"input": STR, "u": VEC, "v": VEC, "ts": VEC, **MAPPER_PARAMS, "solver": SOLVER,
                          "seed": INT, "plots": BOOL}),
    "torus-grid": _obj({
        "grid": {"type": "array", "minItems": 2,
                 "items": {"type": "array", "prefixItems": [STR, NUM, NUM], "minItems": 3, "maxItems": 3}},
        "n": POS_INT, "r": POS_INT, "g": NUM, "clusterer": CLUSTERER, "a": POS, "b": POS,
        "solver": SOLVER, "seed": INT, "plots": BOOL,
    }),
    "convergence": _obj({
        "ns": {"type": "array", "items": POS_INT, "minItems": 2}, "trials": POS_INT, "alpha": POS,
        "p": {"enum": [1, 2]}, "c": POS, "g": NUM, "eps_coef": POS, "torus": TORUS, "solver": SOLVER,
        "seed": INT, "plots": BOOL,
    }),
    "mds": _obj({"input": STR, "dim": POS_INT, "plots": BOOL}),
    "diagnose-an": _obj({"input": STR, "reference": STR, "direction": VEC, "filter_column": STR,
                         "r": POS_INT, "g": NUM, "clusterer": CLUSTERER, "band_delta": POS, "p": POS,
                         "epsilon": POS, "seed": INT}),
}


def load_config(path, schema: dict) -> dict:
    if path is None:
        data = {}
    else:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.path) or "<root>"
        raise ConfigError(f"config error at {where}: {err.message}")
    return data


def resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", DEFAULT_SEED))


def _solver(args, cfg: dict, seed: int, p: int | None = None) -> GWOptions:
    spec = dict(cfg.get("solver", {}))
    if args.seed is not None or "seed" not in spec:
        spec["seed"] = seed
    if p is not None:
        if "p" in spec and spec["p"] != p:
            raise ConfigError("solver p conflicts with the command's p")
        spec["p"] = p
    return GWOptions.from_dict(spec)


def _clusterer(spec: dict | None, seed: int, default):
    if spec is None:
        return default
    if spec["kind"] == "epsilon":
        if "epsilon" not in spec or set(spec) - {"kind", "epsilon"}:
            raise ConfigError("an epsilon clusterer takes exactly one parameter, epsilon")
        return EpsilonGraph(float(spec["epsilon"]))
    if "epsilon" in spec:
        raise ConfigError("epsilon is not a kmeans parameter")
    return KMeans(int(spec.get("k", 3)), int(spec.get("max_iter", 100)), seed)


def _metric(spec: dict | None) -> AmbientMetric:
    if spec is None or spec["kind"] == "euclidean":
        if spec and "epsilon" in spec:
            raise ConfigError("the euclidean metric takes no epsilon")
        return EUCLIDEAN
    if "epsilon" not in spec:
        raise ConfigError("the geodesic metric needs an epsilon")
    return AmbientMetric.geodesic(float(spec["epsilon"]))


def _read_input(path) -> tuple[PointCloud, dict]:
    path = Path(path)
    if path.suffix.lower() == ".off":
        return load_off(path)[0], {}
    return load_csv(path)


def _filter(cloud: PointCloud, extras: dict, direction, column: str | None) -> FilterValues:
    if direction is not None:
        return height_filter(cloud, direction)
    name = column or "f"
    if name not in extras:
        raise ConfigError(f"input has no filter column {name!r}; pass --direction or set filter_column")
    return FilterValues(extras[name])


def _parse_direction(text: str | None):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--direction must be comma-separated numbers (got {text!r})") from None


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigError(f"{args.command} needs --out")
    return Path(args.out)


def _mapper_inputs(args, cfg, seed, direction):
    source = getattr(args, "input", None) or cfg.get("input")
    if source is None:
        raise ConfigError("no input cloud given")
    cloud, extras = _read_input(source)
    f = _filter(cloud, extras, direction, cfg.get("filter_column"))
    clusterer = _clusterer(cfg.get("clusterer"), seed, KMeans(3, seed=seed))
    return cloud, f, clusterer


# --- commands ----------------------------------------------------------------


def cmd_sample(args) -> int:
    cfg = load_config(args.config, SCHEMAS["sample"])
    seed = resolve_seed(args, cfg)
    out = _require_out(args)
    n = int(cfg.get("n", 1000))
    if cfg.get("kind", "torus") == "mesh":
        if "mesh" not in cfg:
            raise ConfigError("mesh sampling needs a mesh path")
        if any(k in cfg for k in ("a", "b", "p", "q")):
            raise ConfigError("torus parameters are not allowed with kind = mesh")
        vertices, faces = load_off(cfg["mesh"])
        cloud = sample_mesh_surface(vertices.points, faces, n, seed=seed)
    else:
        if "mesh" in cfg:
            raise ConfigError("mesh is only allowed with kind = mesh")
        params = TorusParams(cfg.get("a", 0.75), cfg.get("b", 0.25), cfg.get("p", 1 / 6), cfg.get("q", 1 / 6))
        cloud = sample_torus(params, n, seed=seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".off":
        save_off(cloud, out)
    else:
        save_cloud(cloud, out)
    return 0


def cmd_mapper(args) -> int:
    cfg = load_config(args.config, SCHEMAS["mapper"])
    seed = resolve_seed(args, cfg)
    out = _require_out(args)
    direction = _parse_direction(args.direction) or cfg.get("direction")
    cloud, f, clusterer = _mapper_inputs(args, cfg, seed, direction)
    metric = _metric(cfg.get("metric"))
    graph = build_mapper(cloud, metric, f, build_cover(f, cfg.get("r", 25), cfg.get("g", 0.3)), clusterer)
    graph.check()
    out.parent.mkdir(parents=True, exist_ok=True)
    data = graph.to_dict()
    data["clusterer"] = clusterer.to_dict()
    data["metric"] = metric.to_dict()
    write_json(out, data)
    stem = out.with_suffix("")
    masses = graph.masses
    nv = len(graph.vertices)
    write_csv(stem.with_name(stem.name + "_edges.csv"), ["u", "v", "mass"],
              ((u, w, masses[nv + s]) for s, (u, w) in enumerate(graph.edges)))
    stem.with_name(stem.name + ".dot").write_text(graph.to_dot())
    if args.emit_mm:
        mm = mapper_to_mm(graph, DistanceField.for_cloud(cloud, metric))
        mm.save(stem.with_name(stem.name + "_mm"))
    return 0


def _load_space(path) -> MetricMeasureSpace:
    try:
        return MetricMeasureSpace.load(path)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: malformed metric measure space ({exc!r})") from None


def cmd_gw(args) -> int:
    cfg = load_config(args.config, SCHEMAS["gw"])
    seed = resolve_seed(args, cfg)
    x = args.x or cfg.get("x")
    y = args.y or cfg.get("y")
    if x is None or y is None:
        raise ConfigError("gw needs two metric measure space files")
    X, Y = _load_space(x), _load_space(y)
    opts = _solver(args, cfg, seed, cfg.get("p"))
    res = gw_hat_p(X, Y, opts=opts)
    print(fmt_float(res.value))
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv(out, [""] + list(Y.labels), ([lab, *row] for lab, row in zip(X.labels, res.coupling)))
        write_json(out.with_suffix(".json"), {
            "value": res.value, "objective": res.objective, "iterations": res.iterations,
            "converged": res.converged, "restarts_used": res.restarts_used, "solver": opts.to_dict(),
        })
    return 0


def _exp_filter_sweep(args, cfg, seed):
    if "input" in cfg:
        cloud, _ = _read_input(cfg["input"])
    else:
        cloud = stick_figure()
    ts = cfg.get("ts", np.linspace(0.0, 1.0, 8).tolist())
    return run_filter_sweep(
        cloud, cfg.get("u", [1.0, 0.0, 0.0]), cfg.get("v", [0.0, 0.0, 1.0]), ts,
        r=cfg.get("r", 25), g=cfg.get("g", 0.3),
        clusterer=_clusterer(cfg.get("clusterer"), seed, KMeans(3, seed=seed)),
        metric=_metric(cfg.get("metric")), solver=_solver(args, cfg, seed, 2), threads=args.threads,
    )


def _exp_torus_grid(args, cfg, seed):
    grid = [tuple(row) for row in cfg.get("grid", TORUS_GRID)]
    return run_torus_grid(
        grid, n=cfg.get("n", 20_000), r=cfg.get("r", 30), g=cfg.get("g", 0.3),
        clusterer=_clusterer(cfg.get("clusterer"), seed, EpsilonGraph(0.06)),
        a=cfg.get("a", 0.75), b=cfg.get("b", 0.25), solver=_solver(args, cfg, seed, 2),
        seed=seed, threads=args.threads,
    )


def _exp_convergence(args, cfg, seed):
    t = cfg.get("torus", {})
    torus = TorusParams(t.get("a", 0.75), t.get("b", 0.25), t.get("p", 1 / 6), t.get("q", 1 / 6))
    p = cfg.get("p", 2)
    return run_convergence(
        ns=cfg.get("ns", (250, 500, 1000, 2000, 4000)), trials=cfg.get("trials", 5),
        alpha=cfg.get("alpha", 1.0), p=p, c=cfg.get("c"), g=cfg.get("g", 0.3),
        eps_coef=cfg.get("eps_coef", 8.0), torus=torus, solver=_solver(args, cfg, seed, p),
        seed=seed, threads=args.threads,
    )


EXPERIMENTS = {
    "filter-sweep": _exp_filter_sweep,
    "torus-grid": _exp_torus_grid,
    "convergence": _exp_convergence,
}


def cmd_experiment(args) -> int:
    cfg = load_config(args.config, SCHEMAS[args.kind])
    seed = resolve_seed(args, cfg)
    out = _require_out(args)
    report = EXPERIMENTS[args.kind](args, cfg, seed)
    report.write(out, plots=cfg.get("plots", False))
    return 0


def _read_matrix(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise ConfigError(f"{path}: expected a header and at least one row")
    header, body = rows[0], rows[1:]
    labelled = header[0].strip() in ("", "label")
    try:
        if labelled:
            labels = [row[0] for row in body]
            D = np.array([[float(x) for x in row[1:]] for row in body])
        else:
            labels = [str(k) for k in range(len(body))]
            D = np.array([[float(x) for x in row] for row in body])
    except ValueError:
        raise ConfigError(f"{path}: non-numeric matrix entry") from None
    return labels, D


def cmd_mds(args) -> int:
    cfg = load_config(args.config, SCHEMAS["mds"])
    out = _require_out(args)
    source = args.input or cfg.get("input")
    if source is None:
        raise ConfigError("mds needs an input matrix")
    labels, D = _read_matrix(source)
    dim = int(cfg.get("dim", 2))
    X = classical_mds(D, dim)
    names = ["x", "y"] if dim == 2 else [f"x{k}" for k in range(dim)]
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, ["label", *names], ([lab, *row] for lab, row in zip(labels, X)))
    if cfg.get("plots", False) and dim >= 2:
        from mappergw.plots import scatter_svg

        out.with_suffix(".svg").write_text(scatter_svg(X[:, 0], X[:, 1], labels))
    return 0


def cmd_diagnose_an(args) -> int:
    cfg = load_config(args.config, SCHEMAS["diagnose-an"])
    seed = resolve_seed(args, cfg)
    if "band_delta" not in cfg:
        raise ConfigError("diagnose-an needs band_delta")
    if "reference" not in cfg:
        raise ConfigError("diagnose-an needs a reference cloud")
    direction = _parse_direction(args.direction) or cfg.get("direction")
    cloud, f, clusterer = _mapper_inputs(args, cfg, seed, direction)
    ref_cloud, ref_extras = _read_input(cfg["reference"])
    ref_f = _filter(ref_cloud, ref_extras, direction, cfg.get("filter_column"))
    graph = build_mapper(cloud, EUCLIDEAN, f, build_cover(f, cfg.get("r", 25), cfg.get("g", 0.3)), clusterer)
    diag = decomposition_diagnostic(cloud, f, graph, ref_cloud, ref_f, cfg["band_delta"],
                                    p=cfg.get("p", 2), epsilon=cfg.get("epsilon"))
    print(fmt_float(diag.A_n))
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_json(out, diag.to_dict())
    return 0


# --- parser ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--seed", type=int, help="overrides the config seed (default 42)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
    p.add_argument("--json-errors", action="store_true", help="report failures as JSON on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mappergw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="sample a torus measure or a mesh surface")
    _common(p)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("mapper", help="build a Mapper graph from a CSV or OFF cloud")
    p.add_argument("input", nargs="?")
    p.add_argument("--direction", help="unit filter direction, e.g. 0,0,1")
    p.add_argument("--emit-mm", action="store_true", help="also write the metric measure space")
    _common(p)
    p.set_defaults(handler=cmd_mapper)

    p = sub.add_parser("gw", help="Gromov-Wasserstein estimate between two metric measure spaces")
    p.add_argument("x", nargs="?")
    p.add_argument("y", nargs="?")
    _common(p)
    p.set_defaults(handler=cmd_gw)

    p = sub.add_parser("experiment", help="run one of the experiment harnesses")
    p.add_argument("kind", choices=sorted(EXPERIMENTS))
    _common(p)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("mds", help="classical MDS of a distance matrix CSV")
    p.add_argument("input", nargs="?")
    _common(p)
    p.set_defaults(handler=cmd_mds)

    p = sub.add_parser("diagnose-an", help="approximation error A_n of a Mapper against a dense reference")
    p.add_argument("input", nargs="?")
    p.add_argument("--direction", help="unit filter direction, e.g. 1,0,0")
    _common(p)
    p.set_defaults(handler=cmd_diagnose_an)
    return parser


def _report(exc: BaseException, code: int, as_json: bool) -> None:
    kind = "config" if code == 2 else "runtime"
    if as_json:
        payload = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}}
        print(json.dumps(payload), file=sys.stderr)
    else:
        print(f"mappergw: {kind} error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.handler(args)
    except ValueError as exc:
        _report(exc, 2, as_json)
        return 2
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        _report(exc, 1, as_json)
        return 1


if __name__ == "__main__":
    sys.exit(main())
