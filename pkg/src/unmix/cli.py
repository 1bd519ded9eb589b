"""``unmix`` command line: generate, unmix, eval, bench.

Exit codes: 0 success, 1 usage or invalid parameters, 2 file I/O failure,
3 rank-deficient or degenerate data.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

from .bench import BenchConfig, format_rows, run_bench, summarize
from .deca import DecaConfig
from .errors import (DegenerateDataError, DimensionError, InvalidParameterError,
                     RankDeficientError, UnmixError)
from .evaluation import match_endmembers
from .matrixio import read_matrix, write_matrix
from .pipeline import ALGORITHMS, unmix
from .report import RunReport
from .scene import SceneConfig, generate_scene
from .sisal import SisalConfig

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _float(text) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("nan is not allowed")
    return value


def _list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _condition(text):
    return None if text.strip().lower() == "none" else _float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unmix", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value file; command-line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic scene")
    g.add_argument("--n", type=int, required=True, help="number of endmembers")
    g.add_argument("--m", type=int, required=True, help="number of bands")
    g.add_argument("--t", type=int, required=True, help="number of pixels")
    g.add_argument("--snr", type=_float, default=math.inf, help="SNR in dB ('inf' for noiseless)")
    g.add_argument("--pure", action="store_true", help="include one pure pixel per endmember")
    g.add_argument("--max-purity", type=_float, default=1.0)
    g.add_argument("--alpha", type=_list(_float), default=None, help="Dirichlet concentration, comma separated")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    u = sub.add_parser("unmix", help="estimate endmembers from a data matrix")
    u.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    u.add_argument("--input", required=True, help="Y matrix (bands x pixels), .csv or raw")
    u.add_argument("--n", type=int, required=True)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--lambda", dest="lam", type=_float, default=1.0, help="sisal hinge weight")
    u.add_argument("--outer-iters", type=int, default=None)
    u.add_argument("--k", type=int, default=1, help="deca mixture components")
    u.add_argument("--uniform-prior", action="store_true", help="deca: fix the prior to Dirichlet(1)")
    u.add_argument("--truth", help="optional A0 matrix; adds match metrics to the report")
    u.add_argument("--scene", help="optional scene.json to echo in the report")
    u.add_argument("--record-timing", action="store_true", help="store wall_time_ms (breaks byte-identical reruns)")
    u.add_argument("--out", required=True, help="output directory for A_est.csv and report.json")

    e = sub.add_parser("eval", help="match estimated endmembers against the truth")
    e.add_argument("--estimate", required=True)
    e.add_argument("--truth", required=True)

    b = sub.add_parser("bench", help="Monte Carlo sweep")
    b.add_argument("--algorithms", type=_list(str), default=["sisal"])
    b.add_argument("--snr", type=_list(_float), default=[math.inf])
    b.add_argument("--t", type=_list(int), default=[1000])
    b.add_argument("--purity", type=_list(_float), default=[0.8])
    b.add_argument("--condition", type=_list(_condition), default=[None])
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--n", type=int, default=3)
    b.add_argument("--m", type=int, default=50)
    b.add_argument("--pure", action="store_true")
    b.add_argument("--lambda-total", type=_float, default=500.0, help="sisal uses lambda = lambda_total / T")
    b.add_argument("--outer-iters", type=int, default=80)
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--uniform-prior", action="store_true")
    b.add_argument("--record-timing", action="store_true")
    b.add_argument("--out", required=True)
    return parser


def read_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def expand_config(argv) -> list:
    """Insert ``--config`` values as flags right after the subcommand.

    argparse keeps the last occurrence of a flag, so anything the user typed
    overrides the file.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return rest
    values = read_config_file(known.config)
    commands = [a for a in rest if a in COMMANDS]
    if not commands:
        return rest
    pos = rest.index(commands[0]) + 1
    extra = []
    for key, value in values.items():
        flag = "--" + ("lambda" if key == "lam" else key.replace("_", "-"))
        if value.lower() in ("true", "yes", "on"):
            extra.append(flag)
        elif value.lower() not in ("false", "no", "off"):
            extra.extend([flag, value])
    return rest[:pos] + extra + rest[pos:]


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_generate(args) -> int:
    config = SceneConfig(args.n, args.m, args.t, snr_db=args.snr, dirichlet_alpha=args.alpha,
                         max_purity=args.max_purity, include_pure_pixels=args.pure, seed=args.seed)
    image, truth = generate_scene(config)
    os.makedirs(args.out, exist_ok=True)
    write_matrix(os.path.join(args.out, "Y.csv"), image.data)
    write_matrix(os.path.join(args.out, "A0.csv"), truth.mixing)
    write_matrix(os.path.join(args.out, "S0.csv"), truth.abundances)
    scene = dict(config.to_dict(), noise_sigma=float(truth.noise_sigma))
    _write_text(os.path.join(args.out, "scene.json"), json.dumps(scene, indent=2) + "\n")
    return EXIT_OK


def cmd_unmix(args) -> int:
    Y = read_matrix(args.input)
    truth = read_matrix(args.truth) if args.truth else None
    scene = None
    if args.scene:
        with open(args.scene) as fh:
            scene = json.load(fh)
    sisal_kw = {"lam": args.lam}
    deca_kw = {"uniform_prior": args.uniform_prior}
    if args.outer_iters is not None:
        sisal_kw["outer_iters"] = deca_kw["outer_iters"] = args.outer_iters
    start = time.perf_counter()
    result = unmix(Y, args.n, args.algorithm, seed=args.seed, sisal_config=SisalConfig(**sisal_kw),
                   deca_config=DecaConfig(**deca_kw), k=args.k)
    elapsed = 1000.0 * (time.perf_counter() - start)
    match = match_endmembers(result.endmembers, truth) if truth is not None else None
    report = RunReport.from_result(result, args.seed, scene=scene, match=match,
                                   wall_time_ms=elapsed if args.record_timing else None)
    os.makedirs(args.out, exist_ok=True)
    write_matrix(os.path.join(args.out, "A_est.csv"), result.endmembers)
    _write_text(os.path.join(args.out, "report.json"), report.to_json())
    return EXIT_OK


def cmd_eval(args) -> int:
    report = match_endmembers(read_matrix(args.estimate), read_matrix(args.truth))
    sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        algorithms=args.algorithms, snr_db=args.snr, n_pixels=args.t, max_purity=args.purity,
        condition=args.condition, trials=args.trials, base_seed=args.seed, n_endmembers=args.n,
        n_bands=args.m, pure_pixels=args.pure, sisal_lam_total=args.lambda_total,
        sisal_outer_iters=args.outer_iters, deca_k=args.k, deca_uniform_prior=args.uniform_prior,
        record_timing=args.record_timing,
    )
    rows = run_bench(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "bench.csv"), format_rows(rows))
    _write_text(os.path.join(args.out, "summary.json"), json.dumps(summarize(cfg, rows), indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "unmix": cmd_unmix, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(expand_config(argv))
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"unmix: error: {exc}\n")
        return EXIT_USAGE
    except (RankDeficientError, DegenerateDataError) as exc:
        sys.stderr.write(f"unmix: data error: {exc}\n")
        return EXIT_DATA
    except (InvalidParameterError, DimensionError) as exc:
        sys.stderr.write(f"unmix: error: {exc}\n")
        return EXIT_USAGE
    except UnmixError as exc:
        sys.stderr.write(f"unmix: error: {exc}\n")
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        # unreadable/unwritable paths and malformed matrix files
        sys.stderr.write(f"unmix: I/O error: {exc}\n")
        return EXIT_IO


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
