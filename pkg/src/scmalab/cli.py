"""Command-line front end.

Exit status is 0 on success, 1 for configuration or usage errors and 2
for failures while running.
"""

from __future__ import annotations

import argparse
import json
import sys

from .codebook import DegenerateConstellationError, assemble_codebooks, phase_operators, star_qam_mother
from .decoder import GridExtentError
from .graph import GraphConstructionError, GraphDimensionError, build_regular_factor_graph
from .harness import (
    ConfigError,
    compare_decoders,
    decode_one,
    emit_outputs,
    format_agreement,
    format_csv,
    format_kpi_table,
    kpi_report,
    load_sim_config,
    run_sweep,
    with_overrides,
)
from .io import CodebookFileError, load_codebook, save_codebook

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scmalab", description="SCMA link-level simulation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cb = sub.add_parser("codebook", help="build codebooks or report their KPIs")
    cbs = cb.add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = cbs.add_parser("build", help="assemble a star-QAM codebook set and save it")
    b.add_argument("--K", type=int, default=4)
    b.add_argument("--J", type=int, default=6)
    b.add_argument("--dv", type=int, default=2)
    b.add_argument("--M", type=int, default=4)
    b.add_argument("--alpha", type=float, default=3.0)
    b.add_argument("--beta", type=float, default=1 / 0.62)
    b.add_argument("--out", required=True)
    k = cbs.add_parser("kpi", help="KPI table for a codebook file")
    k.add_argument("--in", dest="path", required=True)

    s = sub.add_parser("simulate", help="run a BER/SER sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="CSV path (overrides the configuration)")

    c = sub.add_parser("compare", help="sweep plus pairwise decision agreement")
    c.add_argument("--config", required=True)

    d = sub.add_parser("decode-one", help="per-iteration message dump for one frame")
    d.add_argument("--config", required=True)
    d.add_argument("--bits", required=True, help="J*B bits as big-endian hex, user 1 first")
    d.add_argument("--snr-db", type=float, required=True)
    return p


def _codebook_build(a) -> int:
    if a.M != 4 or a.dv != 2:
        raise ConfigError(f"the star-QAM constructor supports M=4, d_v=2 only (got M={a.M}, d_v={a.dv})")
    g = build_regular_factor_graph(a.K, a.J, a.dv)
    cbs = assemble_codebooks(g, star_qam_mother(a.alpha, a.beta), phase_operators(a.J))
    save_codebook(cbs, a.out)
    return EXIT_OK


def _codebook_kpi(a) -> int:
    sys.stdout.write(format_kpi_table(kpi_report(load_codebook(a.path))))
    return EXIT_OK


def _simulate(a) -> int:
    cfg = with_overrides(load_sim_config(a.config), seed=a.seed, csv=a.out)
    res = run_sweep(cfg)
    emit_outputs(res, cfg.csv, cfg.plot_data)
    if cfg.csv is None:
        sys.stdout.write(format_csv(res))
    return EXIT_OK


def _compare(a) -> int:
    cfg = load_sim_config(a.config)
    res, _ = compare_decoders(cfg)
    emit_outputs(res, cfg.csv, cfg.plot_data)
    sys.stdout.write(format_csv(res))
    sys.stdout.write(format_agreement(res))
    return EXIT_OK


def _decode_one(a) -> int:
    cfg = load_sim_config(a.config)
    json.dump(decode_one(cfg, a.bits, a.snr_db), sys.stdout, indent=1)
    sys.stdout.write("\n")
    return EXIT_OK


CONFIG_ERRORS = (
    UsageError,
    ConfigError,
    CodebookFileError,
    GraphDimensionError,
    GraphConstructionError,
    DegenerateConstellationError,
)


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        if a.command == "codebook":
            return _codebook_build(a) if a.action == "build" else _codebook_kpi(a)
        handler = {"simulate": _simulate, "compare": _compare, "decode-one": _decode_one}[a.command]
        return handler(a)
    except GridExtentError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # constructor argument checks (alpha, beta, J) are configuration problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
