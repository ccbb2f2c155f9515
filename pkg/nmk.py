"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Command-line front end for the non-Markovianity toolkit.

USAGE:
python nmk.py measure --config configs/reference_defaults.ini
python nmk.py table 1 --format json --out results/table1.json
python nmk.py sweep-initial --channel ad
python nmk.py sweep-bath --channel pd --values 0.5 1 2
python nmk.py scale --channel ad --max-qubits 4
python nmk.py trajectory --channel pd --observable coherence

EXIT CODES:
0 success | 2 invalid configuration or arguments | 3 numerical non-convergence
--------------------------------------------------------------------------------
"""

import argparse
import logging
import os
import sys

from dotenv import find_dotenv, load_dotenv

import nmk_runner as runner
from numerics import ConvergenceError
from quantum_core import PositivityError
from results_ledger import ResultsLedger

load_dotenv(find_dotenv())

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICS = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI file with [run] [pd] [ad] [bec] [numerics] [search]")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default: csv)")
    common.add_argument("--seed", type=int, default=None, help="search seed (overrides config and NMK_SEED)")
    common.add_argument("--channel", choices=runner.CHANNELS, default=None)
    common.add_argument("--env", choices=runner.ENVS, default=None)
    common.add_argument("--n-qubits", type=int, default=None)
    common.add_argument("--no-ledger", action="store_true", help="do not append results to the ledger")
    common.add_argument("--with-timing", action="store_true", help="fill wall_time_s (breaks bit-identical output)")
    common.add_argument("--verbose", action="store_true", help="DEBUG logging")

    parser = argparse.ArgumentParser(prog="nmk", description="Non-Markovianity measures for qubit channels")
    sub = parser.add_subparsers(dest="command", required=True)

    measure = sub.add_parser("measure", parents=[common], help="one channel, one measure")
    measure.add_argument("--measure", choices=runner.MEASURES, default=None)

    table = sub.add_parser("table", parents=[common], help="published BLP tables")
    table.add_argument("which", type=int, choices=(1, 2, 3))

    initial = sub.add_parser("sweep-initial", parents=[common], help="LFS value vs diagonal initial state")
    initial.add_argument("--param", default="rho11")
    initial.add_argument("--values", type=float, nargs="+", default=None)

    bath = sub.add_parser("sweep-bath", parents=[common], help="optimal input vs bath parameter")
    bath.add_argument("--bath-param", default=None)
    bath.add_argument("--values", type=float, nargs="+", default=None)

    scale = sub.add_parser("scale", parents=[common], help="LFS and N0 vs number of qubits")
    scale.add_argument("--max-qubits", type=int, default=4)

    trajectory = sub.add_parser("trajectory", parents=[common], help="time series of one observable")
    trajectory.add_argument("--observable", choices=runner.OBSERVABLES, default="coherence")
    return parser


def _overrides(args) -> dict:
    return {
        "run.channel": args.channel,
        "run.env": args.env,
        "run.n_qubits": args.n_qubits,
        "run.measure": getattr(args, "measure", None),
        "search.seed": args.seed,
    }


def run(args) -> int:
    cfg = runner.load_config(args.config, _overrides(args))
    timing = args.with_timing

    if args.command == "measure":
        output = [runner.run_measure(cfg, timing)]
    elif args.command == "table":
        output = runner.run_table(args.which, cfg, timing)
    elif args.command == "sweep-initial":
        output = runner.run_sweep_initial(cfg, args.param, args.values, timing)
    elif args.command == "sweep-bath":
        output = runner.run_sweep_bath(cfg, args.bath_param, args.values, timing)
    elif args.command == "scale":
        output = runner.run_scaling(cfg, args.max_qubits, timing)
    else:
        output = runner.run_trajectory(cfg, args.observable)

    text = runner.emit(output, args.out, args.format)
    if not args.out:
        sys.stdout.write(text)

    if isinstance(output, list) and not args.no_ledger:
        try:
            ResultsLedger().record(args.command, output)
        except Exception as e:
            logging.warning(f"[ledger] ⚠️ could not record results: {e}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, os.getenv("NMK_LOG_LEVEL", "INFO").upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - [%(threadName)s] - %(levelname)s - %(message)s'
    )

    print("=" * 60, file=sys.stderr)
    print(f"  NMK {runner.VERSION} :: {args.command}", file=sys.stderr)
    print("=" * 60, file=sys.stderr)

    try:
        return run(args)
    except runner.ConfigValidationError as e:
        logging.error(f"[config] ❌ {e}")
        return EXIT_INVALID
    except (ConvergenceError, PositivityError) as e:
        logging.error(f"[{args.command}] ❌ numerics did not converge: {e}")
        return EXIT_NUMERICS
    except ValueError as e:
        logging.error(f"[{args.command}] ❌ {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
