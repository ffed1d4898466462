"""``prunebench`` command line: train, sweep, verify, fetch, plot.

Settings come from dataclass defaults, then an optional YAML config file
(``--config``), then flags; later sources win. Exit codes: 0 success,
1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from prunebench import datasets, theory
from prunebench.csvio import read_csv, write_csv
from prunebench.errors import DataError, DomainError, PruneBenchError
from prunebench.fetch import fetch
from prunebench.mlp import PRESETS, TrainConfig, init_mlp, load_checkpoint, save_checkpoint, train
from prunebench.svgplot import sweep_svg
from prunebench.sweep import DEFAULT_SPARSITIES, SWEEP_CSV_HEADER, SweepRow, check_grid, median_rows, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

DATASET_ALIASES = {"mnist": "mnist", "fashion-mnist": "fashion_mnist", "fashion_mnist": "fashion_mnist",
                   "cifar10": "cifar10", "synthetic": "synthetic"}
CONVERGENCE_T = tuple(2.0 ** -k for k in range(7))


@dataclass
class RunConfig:
    dataset: str = "mnist"
    arch: str = "mnist-small"
    epochs: int = 5
    lr: float = 0.01
    momentum: float = 0.9
    batch: int = 64
    seeds: list[int] = field(default_factory=lambda: [0])
    sparsities: list[float] = field(default_factory=lambda: list(DEFAULT_SPARSITIES))
    renormalize: str = "both"
    out: str = "runs"
    target_layer: int = 0
    standardize: bool = False
    # synthetic dataset
    synthetic_per_class: int = 100
    synthetic_test_per_class: int = 30
    synthetic_separation: float = 1.0
    # verify
    trials: int = 500
    sweep_trials: int = 50

    def validate(self) -> "RunConfig":
        if self.dataset not in DATASET_ALIASES:
            raise DomainError(f"unknown dataset {self.dataset!r}")
        self.dataset = DATASET_ALIASES[self.dataset]
        self.widths()
        TrainConfig(self.lr, self.momentum, self.batch, self.epochs, 0)
        if not self.seeds:
            raise DomainError("at least one seed is required")
        self.sparsities = check_grid(self.sparsities)
        if self.renormalize not in ("both", "on", "off"):
            raise DomainError(f"--renormalize must be both, on or off, got {self.renormalize!r}")
        if self.trials < 1 or self.sweep_trials < 1:
            raise DomainError("trial counts must be positive")
        return self

    def widths(self) -> list[int]:
        if self.arch in PRESETS:
            return list(PRESETS[self.arch])
        try:
            widths = [int(w) for w in str(self.arch).split(",")]
        except ValueError:
            raise DomainError(f"--arch must be a preset ({', '.join(PRESETS)}) or a width list, "
                              f"got {self.arch!r}") from None
        if len(widths) < 3 or min(widths) < 1:
            raise DomainError(f"need at least three positive widths, got {widths}")
        return widths

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.lr, self.momentum, self.batch, self.epochs, seed)

    def comments(self, **extra) -> dict:
        d = asdict(self)
        d.update(extra)
        return {k: ",".join(map(str, v)) if isinstance(v, list) else v for k, v in d.items()}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file with RunConfig keys")
    common.add_argument("--dataset", choices=sorted(set(DATASET_ALIASES) - {"fashion_mnist"}))
    common.add_argument("--arch", help="preset name or comma-separated widths")
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--momentum", type=float)
    common.add_argument("--batch", type=int)
    common.add_argument("--seed", dest="seeds", type=_int_list, help="seed or comma list of seeds")
    common.add_argument("--sparsities", type=_float_list)
    common.add_argument("--renormalize", choices=["both", "on", "off"])
    common.add_argument("--out", help="output directory")
    common.add_argument("--trials", type=int)
    common.add_argument("--data-root", type=Path, help="cache root (default $PRUNEBENCH_DATA)")

    parser = _Parser(prog="prunebench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="train networks, write checkpoints")
    p = sub.add_parser("sweep", parents=[common], help="accuracy vs sparsity, std vs renormalized")
    p.add_argument("--checkpoint", type=Path, action="append",
                   help="checkpoint(s) to sweep; default <out>/model_seed<S>.rprn per seed")
    p = sub.add_parser("verify", parents=[common], help="Monte Carlo checks of the error bounds")
    p.add_argument("--self-test", action="store_true",
                   help="shrink the upper bound 1000x; the run must then fail")
    p = sub.add_parser("fetch", parents=[common], help="populate the dataset cache")
    p.add_argument("--source", type=Path, help="copy files from this directory instead of downloading")
    p = sub.add_parser("plot", parents=[common], help="re-render the SVG from a sweep CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--svg", type=Path, help="output path (default: CSV path with .svg)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None) is not None:
        loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(loaded, dict):
            raise DomainError(f"{args.config}: expected a mapping at top level")
        names = {f.name for f in fields(RunConfig)}
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key == "seed":
                key = "seeds"
            if key not in names:
                raise DomainError(f"{args.config}: unknown key {key!r}")
            values[key] = value
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    if isinstance(values.get("seeds"), int):
        values["seeds"] = [values["seeds"]]
    return RunConfig(**values).validate()


# -- data ------------------------------------------------------------------------

def load_data(cfg: RunConfig, root=None) -> tuple[datasets.Dataset, datasets.Dataset]:
    widths = cfg.widths()
    if cfg.dataset == "synthetic":
        n_tr, n_te = cfg.synthetic_per_class, cfg.synthetic_test_per_class
        full = datasets.synthetic_blobs(widths[-1], n_tr + n_te, widths[0],
                                        cfg.synthetic_separation, seed=0)
        within = np.arange(len(full)) % (n_tr + n_te)
        train_set = datasets.Dataset(full.inputs[within < n_tr], full.labels[within < n_tr], "synthetic")
        test_set = datasets.Dataset(full.inputs[within >= n_tr], full.labels[within >= n_tr], "synthetic")
    else:
        try:
            train_set = datasets.load_split(cfg.dataset, "train", root)
            test_set = datasets.load_split(cfg.dataset, "test", root)
        except FileNotFoundError as exc:
            raise DataError(str(exc)) from exc
        except DataError as exc:
            flag = cfg.dataset.replace("_", "-")
            raise DataError(f"{exc}\n  run `prunebench fetch --dataset {flag}` first") from exc
    if train_set.input_dim != widths[0]:
        raise DomainError(f"architecture input width {widths[0]} does not match "
                          f"{cfg.dataset} input dim {train_set.input_dim}")
    if cfg.standardize:
        train_set, test_set = datasets.standardize(train_set, test_set)
    return train_set, test_set


def _log(msg: str) -> None:
    print(msg, flush=True)


# -- commands ----------------------------------------------------------------------

TRAIN_CSV_HEADER = ["epoch", "loss", "train_acc"]


def cmd_train(cfg: RunConfig, root=None) -> list[Path]:
    """Train one network per seed; write checkpoint and per-epoch CSV for each."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set, _ = load_data(cfg, root)
    written = []
    for seed in cfg.seeds:
        net = init_mlp(cfg.widths(), seed)
        report = train(net, train_set, cfg.train_config(seed), log=_log)
        ckpt = out / f"model_seed{seed}.rprn"
        save_checkpoint(net, ckpt)
        rows = [[i + 1, loss, acc] for i, (loss, acc) in
                enumerate(zip(report.losses, report.train_accuracy))]
        written.append(write_csv(out / f"train_seed{seed}.csv", TRAIN_CSV_HEADER, rows,
                                 cfg.comments(seed=seed)))
        _log(f"seed {seed}: wrote {ckpt} ({report.wall_time:.1f}s)")
    return written


def cmd_sweep(cfg: RunConfig, checkpoints=None, root=None) -> tuple[Path, list[SweepRow]]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if checkpoints:
        pairs = [(cfg.seeds[i] if i < len(cfg.seeds) else i, Path(c)) for i, c in enumerate(checkpoints)]
    else:
        pairs = [(s, out / f"model_seed{s}.rprn") for s in cfg.seeds]
    for _, path in pairs:
        if not path.exists():
            raise DataError(f"checkpoint {path} not found; run `prunebench train` first")
    train_set, test_set = load_data(cfg, root)
    rows: list[SweepRow] = []
    for seed, path in pairs:
        net = load_checkpoint(path)
        rows.extend(run_sweep(net, train_set, test_set, cfg.sparsities, cfg.target_layer,
                              cfg.renormalize, seed=seed, log=_log))
    csv_path = write_csv(out / "sweep.csv", SWEEP_CSV_HEADER, [r.as_list() for r in rows],
                         cfg.comments())
    title = f"{cfg.dataset} {cfg.arch}"
    (out / "sweep.svg").write_text(sweep_svg(median_rows(rows), title))
    return csv_path, rows


def cmd_plot(csv_path: Path, svg_path: Path | None = None) -> Path:
    comments, recs = read_csv(csv_path)
    rows = [SweepRow.from_strings(r) for r in recs]
    title = f"{comments.get('dataset', '')} {comments.get('arch', '')}".strip()
    svg_path = svg_path or Path(csv_path).with_suffix(".svg")
    svg_path.write_text(sweep_svg(median_rows(rows), title))
    return svg_path


def cmd_verify(cfg: RunConfig, self_test: bool = False) -> int:
    """Run the Monte Carlo suites, convergence sweep and coherence scan.

    Returns the exit code: 0 iff neither bound was violated.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    bound_scale = 1e-3 if self_test else 1.0
    suites = [
        theory.VerifyConfig(mode="concentrated_ball", n_max=64, d_max=32, seed=seed),
        theory.VerifyConfig(mode="uniform_sphere", n_max=128, dims=(256, 1024), seed=seed),
    ]
    csv_rows = []
    thm1_bad = thm2_bad = intermediate_only = 0
    for suite in suites:
        for strategy in theory.STRATEGIES:
            res = theory.monte_carlo_verify(suite, cfg.trials, strategy, bound_scale)
            thm1_bad += res.thm1_violations
            thm2_bad += res.thm2_violations
            intermediate_only += res.thm1_intermediate_only
            csv_rows.extend(theory.trial_csv_row(r) + [suite.mode] for r in res.rows)
            _log(f"{suite.mode:17s} {strategy:10s} trials={res.trials} "
                 f"upper-bound violations={res.thm1_violations} "
                 f"lower-bound violations={res.thm2_violations}")
    write_csv(out / "verify.csv", theory.VERIFY_CSV_HEADER + ["mode"], csv_rows,
              cfg.comments(self_test=self_test))

    base = theory.ModelConfig(n_terms=64, dim=32, alpha=1.0, beta=2.0, delta=1.0,
                              mode="concentrated_ball", spread=0.2, seed=seed)
    conv = theory.convergence_sweep(base, CONVERGENCE_T, M=16, trials=cfg.sweep_trials)
    write_csv(out / "convergence.csv",
              ["t", "spread", "xi", "mean_err_renorm", "mean_thm1_bound", "mean_err_std"],
              [[r.t, r.spread, r.xi, r.mean_err_renormalized, r.mean_thm1_bound,
                r.mean_err_standard] for r in conv], cfg.comments())
    slope = theory.loglog_slope([r.t for r in conv], [r.mean_err_renormalized for r in conv])
    _log(f"renormalized error log-log slope vs concentration scale: {slope:.3f}; "
         f"standard error {conv[0].mean_err_standard:.4g} -> {conv[-1].mean_err_standard:.4g}")

    coh_rows = []
    for d in (2, 256, 2048):
        model = theory.build_model(theory.ModelConfig(n_terms=64, dim=d, mode="uniform_sphere",
                                                      seed=seed))
        rep = theory.coherence_report(model, 0.2)
        coh_rows.append([rep.D, rep.eps, rep.n_pairs, rep.violating_pairs, rep.empirical_prob])
    write_csv(out / "coherence.csv", ["D", "eps", "n_pairs", "violating_pairs", "empirical_prob"],
              coh_rows, cfg.comments())

    _log(f"upper-bound violations: {thm1_bad} (of which caught only by proof form: "
         f"{intermediate_only}); lower-bound violations: {thm2_bad}")
    return EXIT_OK if thm1_bad == 0 and thm2_bad == 0 else EXIT_VERIFY


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            path = cmd_plot(args.csv, args.svg)
            _log(f"wrote {path}")
            return EXIT_OK
        cfg = resolve_config(args)
        if args.command == "fetch":
            if cfg.dataset == "synthetic":
                raise DomainError("the synthetic dataset is generated, not fetched")
            fetch(cfg.dataset, args.data_root, args.source, log=_log)
            return EXIT_OK
        if args.command == "train":
            cmd_train(cfg, args.data_root)
            return EXIT_OK
        if args.command == "sweep":
            csv_path, _ = cmd_sweep(cfg, args.checkpoint, args.data_root)
            _log(f"wrote {csv_path}")
            return EXIT_OK
        return cmd_verify(cfg, args.self_test)
    except DataError as exc:
        print(f"prunebench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, yaml.YAMLError, OSError) as exc:
        print(f"prunebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PruneBenchError as exc:
        print(f"prunebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
