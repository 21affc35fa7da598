"""Command-line experiment harness.

Subcommands::

    amkl run      one learner on one dataset; writes trace, summary and plot data
    amkl compare  several learners on the same dataset; writes a comparison table
    amkl sweep    AMKL over a grid of confidence thresholds (accuracy/efficiency tradeoff)

Exit status is 0 on success, 1 for configuration errors and 2 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import budgeted_mkl_run, kernel_ogd_run, omkl_run, polynomial_kernel_fn, single_kernel_run
from .data_io import DatasetManifest, load_csv, synthetic_stream
from .engine import AlgorithmConfig, Engine, hindsight_features, regret, run
from .errors import AMKLError, ConfigError, DataError
from .rf_features import KernelSpec

log = logging.getLogger("amkl")

TRACE_SCHEMA = "amkl-trace v1"
TRACE_COLUMNS = ("t", "yhat", "y", "a_t", "K_t", "subset", "mse", "al_eff")
ENGINE_METHODS = ("raker", "omkl_aks", "amkl", "amkl_aks")
BASELINE_METHODS = ("kl_rbf:<sigma2>", "poly2", "poly3", "linear", "omkl", "omkl_b")


@dataclass(frozen=True)
class SyntheticSpec:
    sigma2: float = 1.0
    noise: float = 0.0
    T: int = 5000
    d: int = 3
    seed: int = 0

    @classmethod
    def parse(cls, text):
        """``"sigma2=1,noise=0,T=5000,d=3,seed=0"``; omitted keys keep defaults."""
        kw = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, value = part.partition("=")
            if key not in types:
                raise ConfigError(f"unknown synthetic key {key!r}")
            kw[key] = int(float(value)) if key in ("T", "d", "seed") else float(value)
        return cls(**kw)


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a method, its learner config and a data source.

    ``method`` is an engine variant or a baseline name (see
    :data:`BASELINE_METHODS`); by default it follows ``algorithm.variant``.
    """

    algorithm: AlgorithmConfig
    dataset: DatasetManifest | SyntheticSpec
    output_dir: Path | None = None
    method: str | None = None
    emit_trace: bool = True
    emit_summary: bool = True
    emit_plot: bool = True
    with_regret: bool = False

    @property
    def name(self):
        return self.method or self.algorithm.variant


@dataclass
class MetricsSummary:
    method: str
    dataset: str
    seed: int
    T: int
    final_mse: float
    final_al_eff: float
    mse_curve: list = field(repr=False)
    K_curve: list = field(repr=False)
    regret: float | None = None

    def to_json(self):
        return {
            "method": self.method,
            "dataset": self.dataset,
            "seed": self.seed,
            "T": self.T,
            "final_mse": self.final_mse,
            "final_al_eff": self.final_al_eff,
            "regret": self.regret,
        }


def dataset_name(source):
    if isinstance(source, DatasetManifest):
        return source.name
    return f"synthetic(sigma2={source.sigma2:g},noise={source.noise:g},T={source.T},d={source.d},seed={source.seed})"


def load_source(source):
    if isinstance(source, DatasetManifest):
        samples = load_csv(source)
    else:
        samples = synthetic_stream(source.sigma2, source.noise, source.T, source.d, source.seed).samples
    X = np.array([s.x for s in samples])
    y = np.array([s.y for s in samples])
    return X, y


def run_method(method, algorithm: AlgorithmConfig, X, y):
    """Dispatch to an engine variant or a baseline; returns a trace."""
    if method in ENGINE_METHODS:
        return run(dataclasses.replace(algorithm, variant=method), (X, y))
    if method.startswith("kl_rbf"):
        _, _, sig = method.partition(":")
        if not sig:
            raise ConfigError("kl_rbf needs a bandwidth, e.g. kl_rbf:1")
        return single_kernel_run(KernelSpec(float(sig)), (X, y), lam=algorithm.lam, D=algorithm.D, seed=algorithm.seed)
    if method == "linear":
        return single_kernel_run("linear", (X, y), lam=algorithm.lam, seed=algorithm.seed)
    if method in ("poly2", "poly3"):
        return kernel_ogd_run(polynomial_kernel_fn(int(method[-1])), (X, y), lam=algorithm.lam, budget=2000)
    if method == "omkl":
        return omkl_run(algorithm, (X, y))
    if method == "omkl_b":
        return budgeted_mkl_run(dataclasses.replace(algorithm, variant="budgeted_kernel"), (X, y))
    raise ConfigError(f"unknown method {method!r}; expected one of {ENGINE_METHODS + BASELINE_METHODS}")


def write_trace(path, trace, comment=""):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {TRACE_SCHEMA} {comment}".rstrip() + "\n")
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow((r.t, repr(float(r.prediction)), repr(float(r.y)), r.a, r.K, " ".join(map(str, r.subset)),
                        repr(float(r.mse)), repr(float(r.al_eff))))


def read_trace(path):
    """Rows of a trace CSV as dicts of floats/ints (subset as a tuple)."""
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(f"# {TRACE_SCHEMA}"):
            raise DataError(f"{path}: not a {TRACE_SCHEMA} file")
        for row in csv.DictReader(fh):
            rows.append({
                "t": int(row["t"]), "yhat": float(row["yhat"]), "y": float(row["y"]), "a_t": int(row["a_t"]),
                "K_t": int(row["K_t"]), "subset": tuple(int(i) for i in row["subset"].split()),
                "mse": float(row["mse"]), "al_eff": float(row["al_eff"]),
            })
    return rows


def write_plot_data(out, summary: MetricsSummary, trace):
    t = np.arange(1, len(trace) + 1)
    np.savetxt(out / "mse.dat", np.column_stack((t, summary.mse_curve)), fmt=["%d", "%.10g"])
    np.savetxt(out / "al_eff.dat", np.column_stack((t, [r.al_eff for r in trace])), fmt=["%d", "%.10g"])
    np.savetxt(out / "K.dat", np.column_stack((t, summary.K_curve)), fmt="%d")
    (out / "plot.gp").write_text(
        "# gnuplot -p plot.gp\n"
        "set multiplot layout 3,1\n"
        f"set title 'MSE(t): {summary.method}'\nset logscale y\nplot 'mse.dat' using 1:2 with lines notitle\n"
        "unset logscale y\nset title 'AL efficiency'\nplot 'al_eff.dat' using 1:2 with lines notitle\n"
        "set title 'K_t'\nplot 'K.dat' using 1:2 with steps notitle\n"
        "unset multiplot\n"
    )


def _writable_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def run_experiment(config: RunConfig, data=None) -> MetricsSummary:
    """Execute one run and write the requested outputs.

    ``data`` may pass preloaded ``(X, y)`` arrays to skip loading.
    """
    X, y = load_source(config.dataset) if data is None else data
    method = config.name
    trace = run_method(method, config.algorithm, X, y)
    summary = MetricsSummary(
        method=method,
        dataset=dataset_name(config.dataset),
        seed=config.algorithm.seed,
        T=len(trace),
        final_mse=trace[-1].mse,
        final_al_eff=trace[-1].al_eff,
        mse_curve=[r.mse for r in trace],
        K_curve=[r.K for r in trace],
    )
    if config.with_regret:
        if method not in ENGINE_METHODS:
            raise ConfigError("regret is only defined for the random-feature learners")
        cfg = dataclasses.replace(config.algorithm, variant=method).resolved(len(y))
        engine = Engine(cfg, X.shape[1])
        summary.regret = regret(trace, hindsight_features(engine, X), y, cfg.lam)
    if config.output_dir is not None:
        out = _writable_dir(config.output_dir)
        if config.emit_trace:
            write_trace(out / "trace.csv", trace, f"method={method} seed={config.algorithm.seed}")
        if config.emit_summary:
            meta = {**summary.to_json(), "config": config.algorithm.to_dict()}
            (out / "summary.json").write_text(json.dumps(meta, indent=2) + "\n")
        if config.emit_plot:
            write_plot_data(out, summary, trace)
    log.info("%s on %s: MSE=%.4g AL_eff=%.3f", method, summary.dataset, summary.final_mse, summary.final_al_eff)
    return summary


def compare(configs, output_dir=None):
    """Run several configs on one dataset and tabulate final MSE (x1e-3) and AL efficiency."""
    configs = list(configs)
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    sources = {dataset_name(c.dataset) for c in configs}
    if len(sources) != 1:
        raise ConfigError(f"configs use different datasets: {sorted(sources)}")
    data = load_source(configs[0].dataset)
    rows = []
    for c in configs:
        s = run_experiment(dataclasses.replace(c, output_dir=None), data=data)
        rows.append({"method": c.name, "seed": c.algorithm.seed, "mse_e3": s.final_mse * 1e3, "al_eff": s.final_al_eff})
    if output_dir is not None:
        out = _writable_dir(output_dir)
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["method", "seed", "mse_e3", "al_eff"])
            w.writeheader()
            w.writerows(rows)
        (out / "comparison.txt").write_text(format_table(rows, sources.pop()))
    return rows


def format_table(rows, title=""):
    width = max(len("method"), *(len(r["method"]) for r in rows))
    lines = [title, f"{'method':<{width}}  {'MSE(x1e-3)':>10}  {'AL_eff':>6}"] if title else []
    lines.append("-" * (width + 20))
    for r in rows:
        lines.append(f"{r['method']:<{width}}  {r['mse_e3']:>10.3f}  {r['al_eff']:>6.3f}")
    return "\n".join(lines) + "\n"


def _sweep_one(args):
    cfg, data = args
    return run_experiment(cfg, data=data)


def sweep(base: RunConfig, eta_cs, seeds=(0,), jobs=1):
    """Final MSE and AL efficiency for every (eta_c, seed) pair."""
    data = load_source(base.dataset)
    tasks = []
    for eta_c in eta_cs:
        for seed in seeds:
            algo = dataclasses.replace(
                base.algorithm, seed=seed, active=dataclasses.replace(base.algorithm.active, eta_c=eta_c)
            )
            out = None if base.output_dir is None else Path(base.output_dir) / f"eta_c={eta_c:g}" / f"seed={seed}"
            tasks.append((dataclasses.replace(base, algorithm=algo, output_dir=out), data))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_sweep_one, tasks))
    else:
        summaries = [_sweep_one(t) for t in tasks]
    rows = [
        {"eta_c": t[0].algorithm.active.eta_c, "seed": s.seed, "mse": s.final_mse, "al_eff": s.final_al_eff}
        for t, s in zip(tasks, summaries)
    ]
    if base.output_dir is not None:
        out = _writable_dir(base.output_dir)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["eta_c", "seed", "mse", "al_eff"])
            w.writeheader()
            w.writerows(rows)
    return rows


# --------------------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_common(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", type=Path, help="dataset manifest (key = value file)")
    src.add_argument("--synthetic", help="synthetic stream spec, e.g. sigma2=1,noise=0,T=5000,d=3")
    p.add_argument("--config", type=Path, help="JSON file with AlgorithmConfig fields; flags override it")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--eta-l", type=float)
    p.add_argument("--eta-g", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--D", type=int)
    p.add_argument("--sigma2", type=_floats, help="comma-separated Gaussian bandwidths (default: 17-kernel dictionary)")
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma-cap", type=float)
    p.add_argument("--eta-c", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--weight-loss", choices=("regularized", "prediction"))
    p.add_argument("--budget", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="amkl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one learner")
    _add_common(p)
    p.add_argument("--variant", default=None, help=f"one of {ENGINE_METHODS + BASELINE_METHODS}")
    p.add_argument("--no-trace", action="store_true")
    p.add_argument("--no-summary", action="store_true")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--regret", action="store_true", help="also compute regret against the hindsight comparator")

    p = sub.add_parser("compare", help="compare learners on one dataset")
    _add_common(p)
    p.add_argument("--variants", required=True, help="comma-separated methods")

    p = sub.add_parser("sweep", help="sweep the confidence threshold")
    _add_common(p)
    p.add_argument("--variant", default="amkl_aks", choices=("amkl", "amkl_aks"))
    p.add_argument("--eta-cs", type=_floats, default=[5e-5, 5e-4, 5e-3])
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _kv_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def read_config_file(path):
    """AlgorithmConfig fields from a JSON object or ``key = value`` lines.

    In the key-value form, dotted keys reach nested groups
    (``active.eta_c = 0.0005``) and values are parsed as JSON when possible.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        *groups, leaf = key.split(".")
        node = out
        for g in groups:
            node = node.setdefault(g, {})
        node[leaf] = _kv_value(value)
    return out


def algorithm_from_args(args, variant=None):
    base = read_config_file(args.config) if args.config is not None else {}
    cfg = AlgorithmConfig.from_dict(base)
    top = {"seed": args.seed, "eta_l": args.eta_l, "eta_g": args.eta_g, "lam": args.lam, "D": args.D,
           "weight_loss": args.weight_loss, "budget": args.budget}
    changes = {k: v for k, v in top.items() if v is not None}
    if variant is not None and variant in ENGINE_METHODS:
        changes["variant"] = variant
    if args.sigma2:
        changes["kernels"] = tuple(KernelSpec(s) for s in args.sigma2)
    sel = {k: v for k, v in {"delta": args.delta, "gamma_cap": args.gamma_cap}.items() if v is not None}
    if sel:
        changes["selection"] = dataclasses.replace(cfg.selection, **sel)
    act = {k: v for k, v in {"eta_c": args.eta_c, "M": args.M}.items() if v is not None}
    if act:
        changes["active"] = dataclasses.replace(cfg.active, **act)
    return dataclasses.replace(cfg, **changes)


def source_from_args(args):
    if args.dataset is not None:
        return DatasetManifest.from_file(args.dataset)
    if args.synthetic is not None:
        return SyntheticSpec.parse(args.synthetic)
    raise ConfigError("give --dataset or --synthetic")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            algo = algorithm_from_args(args, args.variant)
            rc = RunConfig(algo, source_from_args(args), args.out, method=args.variant,
                           emit_trace=not args.no_trace, emit_summary=not args.no_summary,
                           emit_plot=not args.no_plot, with_regret=args.regret)
            s = run_experiment(rc)
            print(json.dumps(s.to_json()))
        elif args.command == "compare":
            algo = algorithm_from_args(args)
            source = source_from_args(args)
            methods = [m.strip() for m in args.variants.split(",") if m.strip()]
            rows = compare([RunConfig(algo, source, method=m) for m in methods], args.out)
            print(format_table(rows, dataset_name(source)), end="")
        elif args.command == "sweep":
            algo = algorithm_from_args(args, args.variant)
            rows = sweep(RunConfig(algo, source_from_args(args), args.out, method=args.variant),
                         args.eta_cs, args.seeds, args.jobs)
            print("eta_c,seed,mse,al_eff")
            for r in rows:
                print(f"{r['eta_c']:g},{r['seed']},{r['mse']:.6g},{r['al_eff']:.4f}")
    except (DataError, OSError) as exc:
        print(f"amkl: data error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, AMKLError, ValueError) as exc:
        print(f"amkl: config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
