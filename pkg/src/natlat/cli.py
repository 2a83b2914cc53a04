"""Command-line front end.

Subcommands: check, search, theorem, coin, derive, chunk.  Exit codes are
a stable contract: 0 for a pass, 1 for a threshold/property failure, and
2 for usage or parse errors.  With ``--machine`` all results are printed
as ``key<TAB>value`` lines, byte-reproducible for a fixed seed and inputs.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from .dist import JointDistribution
from .errors import FormatError, NatlatError
from .naturality import AgentModel, naturality_report
from .rules import ValidationConfig, run_script, validate_derivation
from .scenarios import CoinExampleConfig, coin_median_entropy
from .search import SUPPORT_THRESHOLD, chunk_observables, exact_natural_latent
from . import naturality

PASS, FAIL, USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: subcommand, inputs, and shared knobs."""

    subcommand: str
    paths: tuple[str, ...]
    eps_bits: float
    seed: int
    samples: int
    machine: bool
    chunk_spec: str | None

    def __post_init__(self):
        if self.eps_bits < 0.0:
            raise FormatError(f"--eps must be >= 0, got {self.eps_bits}")
        if self.samples < 1:
            raise FormatError(f"--samples must be >= 1, got {self.samples}")
        if not (0 <= self.seed < 2**64):
            raise FormatError("--seed must be an unsigned 64-bit integer")


class _Printer:
    def __init__(self, machine: bool):
        self.machine = machine

    def kv(self, key: str, value) -> None:
        if isinstance(value, float):
            value = f"{value:.6f}"
        if self.machine:
            print(f"{key}\t{value}")
        else:
            print(f"{key}: {value}")

    def text(self, line: str) -> None:
        if not self.machine:
            print(line)

    def block(self, text: str) -> None:
        print(text, end="" if text.endswith("\n") else "\n")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else 0
    try:
        paths = getattr(args, "paths", ())
        if isinstance(paths, str):
            paths = (paths,)
        config = RunConfig(
            subcommand=args.command,
            paths=tuple(paths),
            eps_bits=getattr(args, "eps", 1e-9),
            seed=getattr(args, "seed", 0),
            samples=getattr(args, "samples", 1000),
            machine=bool(getattr(args, "machine", False)),
            chunk_spec=getattr(args, "chunk", None),
        )
        out = _Printer(config.machine)
        handler = {
            "check": _cmd_check,
            "search": _cmd_search,
            "theorem": _cmd_theorem,
            "coin": _cmd_coin,
            "derive": _cmd_derive,
            "chunk": _cmd_chunk,
        }[config.subcommand]
        return handler(args, config, out)
    except FormatError as exc:
        path = getattr(exc, "source_path", None)
        where = f"{path}:" if path else ""
        line = f"{exc.line}: " if exc.line is not None else ""
        print(f"error: {where}{line}{exc.message}", file=sys.stderr)
        return USAGE
    except NatlatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def entry() -> None:
    sys.exit(main())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="natlat",
        description=(
            "Analyze natural latent variables over discrete joint "
            "distributions: naturality reports, exact latent search, "
            "randomized theorem sweeps, the coinflip scenario, and "
            "derivation replay."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="naturality report for a model file")
    check.add_argument("paths", nargs=1, metavar="MODEL")
    check.add_argument("--eps", type=float, default=1e-9,
                       help="pass threshold in bits (default 1e-9)")
    _common_flags(check)

    search = sub.add_parser(
        "search",
        help="exact natural latent search over a two-observable distribution",
        description=(
            "Builds the bipartite support graph (cells with probability "
            f"above {SUPPORT_THRESHOLD:g} count as support) and reports the "
            "connected-component latent."
        ),
    )
    search.add_argument("paths", nargs=1, metavar="DIST")
    search.add_argument("--chunk", metavar="SPEC",
                        help="pre-chunk variables, e.g. 'X1,X2/X3,X4'")
    _common_flags(search)

    theorem = sub.add_parser(
        "theorem", help="randomized mediator-determines-redund bound sweep"
    )
    theorem.add_argument("--seed", type=int, default=0)
    theorem.add_argument("--samples", type=int, default=1000)
    _common_flags(theorem)

    coin = sub.add_parser("coin", help="coinflip-batch scenario quantities")
    coin.add_argument("paths", nargs="?", default="1000", metavar="N",
                      help="flips per batch (even, default 1000)")
    _common_flags(coin)

    derive = sub.add_parser("derive", help="replay a derivation script")
    derive.add_argument("paths", nargs=1, metavar="SCRIPT")
    derive.add_argument("--validate", type=int, default=None, metavar="SAMPLES",
                        help="numerically validate every step")
    derive.add_argument("--seed", type=int, default=0)
    _common_flags(derive)

    chunk = sub.add_parser(
        "chunk", help="regroup a distribution into two block observables"
    )
    chunk.add_argument("paths", nargs=1, metavar="DIST")
    chunk.add_argument("--chunk", metavar="SPEC", required=True,
                       help="partition, e.g. 'X1,X2/X3,X4'")
    _common_flags(chunk)

    return parser


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--machine", action="store_true",
                        help="line-oriented key<TAB>value output")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc


def _tag(exc: FormatError, path: str) -> FormatError:
    exc.source_path = path
    return exc


def _parse_chunk_spec(spec: str) -> tuple[list[str], list[str]]:
    left, sep, right = spec.partition("/")
    if not sep:
        raise FormatError(f"chunk spec {spec!r} needs two '/'-separated blocks")
    block1 = [n for n in left.split(",") if n]
    block2 = [n for n in right.split(",") if n]
    if not block1 or not block2:
        raise FormatError(f"chunk spec {spec!r} has an empty block")
    return block1, block2


# -- subcommands -------------------------------------------------------------


def _cmd_check(args, config: RunConfig, out: _Printer) -> int:
    path = config.paths[0]
    try:
        model = AgentModel.from_text(_read(path))
    except FormatError as exc:
        raise _tag(exc, path)
    report = naturality_report(model)
    out.kv("observables", " ".join(model.observables))
    out.kv("latents", " ".join(model.latents))
    out.kv("eps_med_bits", report.eps_mediation_bits)
    for obs, eps in zip(model.observables, report.eps_redundancy_bits):
        out.kv(f"eps_red_bits.{obs}", eps)
    out.kv("eps_red_max_bits", report.eps_redundancy_max_bits)
    out.kv("exact", "true" if report.is_exact else "false")
    worst = max(report.eps_mediation_bits, report.eps_redundancy_max_bits)
    passed = worst <= config.eps_bits
    out.kv("threshold_bits", config.eps_bits)
    out.kv("verdict", "pass" if passed else "fail")
    return PASS if passed else FAIL


def _cmd_search(args, config: RunConfig, out: _Printer) -> int:
    path = config.paths[0]
    try:
        dist = JointDistribution.from_text(_read(path))
    except FormatError as exc:
        raise _tag(exc, path)
    if config.chunk_spec:
        block1, block2 = _parse_chunk_spec(config.chunk_spec)
        dist = chunk_observables(dist, block1, block2)
    if len(dist.variables) != 2:
        raise FormatError(
            f"{path} has {len(dist.variables)} observables; exact search "
            "needs two (pass --chunk to regroup them)"
        )
    latent, report = exact_natural_latent(dist)
    out.kv("n_labels", latent.n_labels)
    if out.machine:
        for obs, labels in zip(latent.observables, latent.label_maps):
            for value, label in enumerate(labels):
                out.kv(f"map.{obs}.{value}", label)
    else:
        out.block(latent.to_text())
    out.kv("eps_med_bits", report.eps_mediation_bits)
    for obs, eps in zip(latent.observables, report.eps_redundancy_bits):
        out.kv(f"eps_red_bits.{obs}", eps)
    exact = report.eps_mediation_bits <= naturality.EXACT_EPS
    out.kv("exact_natural_latent", "yes" if exact else "no")
    return PASS


def _cmd_theorem(args, config: RunConfig, out: _Printer) -> int:
    report = naturality.theorem_sweep(config.seed, config.samples)
    out.kv("seed", report.seed)
    out.kv("samples", report.samples)
    out.kv("violations", report.violations)
    out.kv("min_slack_bits", report.min_slack_bits)
    out.kv("max_slack_bits", report.max_slack_bits)
    return PASS if report.ok else FAIL


def _cmd_coin(args, config: RunConfig, out: _Printer) -> int:
    raw = config.paths[0] if config.paths else "1000"
    try:
        n = int(raw)
    except ValueError:
        raise FormatError(f"flip count must be an integer, got {raw!r}") from None
    cfg = CoinExampleConfig(n)
    h = coin_median_entropy(cfg)
    out.kv("n", cfg.n)
    out.kv("median_threshold", cfg.median_threshold)
    out.kv("h_bits", h)
    out.kv("bound_bits", 2.0 * h)
    return PASS


def _cmd_derive(args, config: RunConfig, out: _Printer) -> int:
    path = config.paths[0]
    try:
        derivation = run_script(_read(path))
    except FormatError as exc:
        raise _tag(exc, path)
    conclusion = derivation.final
    out.kv("conclusion", derivation.steps[-1].output_name)
    out.kv("nodes", " ".join(sorted(conclusion.graph.nodes)))
    out.kv("edges", ",".join(f"{p}->{c}" for p, c in sorted(conclusion.graph.edges)))
    out.kv("epsilon", str(conclusion.epsilon))
    pair = derivation.copy_pair_conclusion(conclusion)
    if pair is not None:
        parent, base, (a, b) = pair
        out.kv("copy_pair", f"{a},{b}<-{parent}")
        grouped = _grouped_epsilon(derivation, conclusion)
        if grouped is not None:
            out.kv("epsilon_equal_redunds", str(grouped))
    if args.validate is None:
        return PASS
    reports = validate_derivation(
        derivation,
        ValidationConfig(samples=args.validate, seed=config.seed),
    )
    total = 0
    for step in reports:
        out.kv(f"step.{step.name}.rule", step.rule)
        out.kv(f"step.{step.name}.violations", step.violations)
        out.kv(f"step.{step.name}.min_slack_bits", step.min_slack_bits)
        total += step.violations
    out.kv("validate_samples", args.validate)
    out.kv("total_violations", total)
    return PASS if total == 0 else FAIL


def _grouped_epsilon(derivation, conclusion):
    """Collapse the epsilons of copy premises that determine the same
    variable into one shared redundancy symbol."""
    by_base: dict[str, list[str]] = {}
    for premise in derivation.premises.values():
        if premise.kind == "copy" and premise.eps_name is not None:
            by_base.setdefault(premise.judgment.copy_pair[1], []).append(
                premise.eps_name
            )
    renames = {}
    for base, names in by_base.items():
        if len(names) > 1:
            renames.update({name: naturality.REDUNDANCY_EPS_NAME for name in names})
    if not renames:
        return None
    return conclusion.epsilon.substitute(renames)


def _cmd_chunk(args, config: RunConfig, out: _Printer) -> int:
    path = config.paths[0]
    try:
        dist = JointDistribution.from_text(_read(path))
    except FormatError as exc:
        raise _tag(exc, path)
    block1, block2 = _parse_chunk_spec(config.chunk_spec)
    chunked = chunk_observables(dist, block1, block2)
    out.block(chunked.to_text())
    return PASS


if __name__ == "__main__":
    entry()
