from __future__ import annotations

import argparse
import sys
import time
from collections.abc import Callable, Sequence
from typing import Any

from .cache import clear, derive_cached, list_entries, load_cached
from .config import Settings, resolve_settings
from .errors import CacheError, ConfigError, McfracError, UnknownFamily
from .families import all_families, certified_depth
from .logging import log_action, new_correlation_id
from .render import (
    cache_payload,
    cache_table,
    derivation_json,
    derivation_table,
    dumps,
    evaluation_payload,
    evaluation_table,
    inequality_payload,
    inequality_table,
    rate_payload,
    rate_table,
)
from .verify import THEOREMS, evaluate_point, rate_fit, run_theorem

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_INCONCLUSIVE = 3

FAMILY_CHOICES = [family.tag for family in all_families()]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _add_global_flags(parser: argparse.ArgumentParser, default: Any) -> None:
    parser.add_argument("--prec", type=int, default=default, help="precision in bits (>= 64)")
    parser.add_argument("--format", choices=["json", "table"], default=default)
    parser.add_argument("--cache", default=default, help="coefficient cache directory")
    parser.add_argument(
        "--uncertified",
        action="store_true",
        default=default,
        help="allow depths beyond the certified limit",
    )


def _add_family_depth(parser: argparse.ArgumentParser, *, required: bool = True) -> None:
    parser.add_argument("--family", choices=FAMILY_CHOICES, type=str.lower, required=required)
    parser.add_argument("--depth", type=int, required=required)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_global_flags(common, argparse.SUPPRESS)

    parser = _Parser(prog="mcfrac", description="Continued-fraction corrections, exactly.")
    _add_global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    derive_p = sub.add_parser("derive", parents=[common], help="derive correction coefficients")
    _add_family_depth(derive_p)
    derive_p.add_argument("--no-cache", action="store_true", help="ignore the coefficient cache")

    eval_p = sub.add_parser("eval", parents=[common], help="evaluate the approximation at n")
    _add_family_depth(eval_p)
    eval_p.add_argument("--n", type=int, required=True)
    eval_p.add_argument(
        "--no-cross-check", action="store_true", help="skip the quadrature cross-check"
    )

    verify_p = sub.add_parser("verify", parents=[common], help="certify an inequality over 0..n")
    verify_p.add_argument("--theorem", choices=sorted(THEOREMS), required=True)
    verify_p.add_argument("--n-max", type=int, required=True)

    rate_p = sub.add_parser("rate", parents=[common], help="fit the convergence rate")
    _add_family_depth(rate_p)
    rate_p.add_argument("--schedule", help="comma-separated n values, e.g. 32,64,128,256")

    cache_p = sub.add_parser("cache", parents=[common], help="manage the coefficient cache")
    cache_p.add_argument("action", choices=["list", "clear", "show", "warm"])
    _add_family_depth(cache_p, required=False)

    serve_p = sub.add_parser("serve", parents=[common], help="run the local job API")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8099)
    return parser


def resolve_cli_settings(args: argparse.Namespace) -> Settings:
    return resolve_settings().with_overrides(
        precision=getattr(args, "prec", None),
        output_format=getattr(args, "format", None),
        cache_dir=getattr(args, "cache", None),
        uncertified=True if getattr(args, "uncertified", None) else None,
    )


def parse_schedule(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"invalid schedule: {text}") from None


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def require_certified(family: str, depth: int, settings: Settings) -> None:
    limit = certified_depth(family)
    if depth > limit and not settings.uncertified:
        raise UsageError(
            f"depth {depth} exceeds the certified limit {limit} for {family}; "
            "pass --uncertified to derive anyway"
        )


# ------------------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------------------


def cmd_derive(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    require_certified(args.family, args.depth, settings)
    cache_dir = None if args.no_cache else settings.cache_dir
    report, hit = derive_cached(
        args.family,
        args.depth,
        cache_dir,
        uncertified=settings.uncertified,
        bits=settings.precision,
    )
    record["cache_hit"] = hit
    if settings.output_format == "json":
        _emit(derivation_json(report, settings.precision))
    else:
        _emit(derivation_table(report))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    require_certified(args.family, args.depth, settings)
    report, _ = derive_cached(
        args.family, args.depth, settings.cache_dir, uncertified=settings.uncertified
    )
    point = evaluate_point(
        report, args.n, settings.precision, cross_check=not args.no_cross_check
    )
    record["error_term"] = str(point.error)
    if settings.output_format == "json":
        _emit(dumps(evaluation_payload(point)))
    else:
        _emit(evaluation_table(point))
    if point.oracles_agree is False:
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    options: dict[str, Any] = {
        "workers": settings.workers,
        "max_escalations": settings.max_escalations,
    }
    if args.theorem in {"landau-thm2", "lebesgue-thm4"}:
        family, depth = ("landau", 2) if args.theorem == "landau-thm2" else ("lebesgue", 1)
        options["report"], _ = derive_cached(family, depth, settings.cache_dir)
    else:
        family, depth = ("landau", 2) if args.theorem == "landau-monotone" else ("lebesgue", 1)
        options["cf"] = derive_cached(family, depth, settings.cache_dir)[0].cf
    report = run_theorem(args.theorem, args.n_max, settings.precision, **options)
    record["counts"] = {
        verdict: report.count(verdict)
        for verdict in ("certified-true", "certified-false", "inconclusive")
    }
    if settings.output_format == "json":
        _emit(dumps(inequality_payload(report)))
    else:
        _emit(inequality_table(report))
    if report.any_false:
        return EXIT_FAILED
    if report.any_inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_rate(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    require_certified(args.family, args.depth, settings)
    schedule = parse_schedule(args.schedule)
    report, _ = derive_cached(
        args.family, args.depth, settings.cache_dir, uncertified=settings.uncertified
    )
    fit = rate_fit(
        args.family,
        args.depth,
        schedule,
        bits=settings.precision,
        report=report,
        max_escalations=settings.max_escalations,
    )
    payload = rate_payload(fit)
    record["fitted_exponent"] = payload["fitted_exponent"]
    if settings.output_format == "json":
        _emit(dumps(payload))
    else:
        _emit(rate_table(fit))
    return EXIT_OK


def cmd_cache(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    cache_dir = settings.cache_dir
    record["action"] = f"cache.{args.action}"
    if args.action == "list":
        entries = list_entries(cache_dir)
        if settings.output_format == "json":
            _emit(dumps(cache_payload(entries)))
        else:
            _emit(cache_table(entries, cache_dir))
        return EXIT_OK
    if args.action == "clear":
        removed = clear(cache_dir)
        record["removed"] = removed
        if settings.output_format == "json":
            _emit(dumps({"removed": removed}))
        else:
            _emit(f"removed {removed} cached entries")
        return EXIT_OK

    if args.family is None or args.depth is None:
        raise UsageError(f"cache {args.action} needs --family and --depth")
    if args.action == "show":
        report = load_cached(args.family, args.depth, cache_dir)
        if report is None:
            raise CacheError(f"no cached entry for {args.family} depth {args.depth}")
    else:
        require_certified(args.family, args.depth, settings)
        report, _ = derive_cached(
            args.family,
            args.depth,
            cache_dir,
            uncertified=settings.uncertified,
            bits=settings.precision,
        )
    if settings.output_format == "json":
        _emit(derivation_json(report, settings.precision))
    else:
        _emit(derivation_table(report))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, settings: Settings, record: dict[str, Any]) -> int:
    import uvicorn

    uvicorn.run("mcfrac.server:app", host=args.host, port=args.port, reload=False)
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace, Settings, dict[str, Any]], int]] = {
    "derive": cmd_derive,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "rate": cmd_rate,
    "cache": cmd_cache,
    "serve": cmd_serve,
}

_PARAM_KEYS = ("family", "depth", "n", "theorem", "n_max", "schedule")


def run_cli(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = resolve_cli_settings(args)
    except (UsageError, ConfigError) as exc:
        sys.stderr.write(f"error[usage]: {exc}\n")
        return EXIT_USAGE

    record: dict[str, Any] = {"action": args.command, "correlation_id": new_correlation_id()}
    record.update({key: getattr(args, key) for key in _PARAM_KEYS if hasattr(args, key)})
    record["precision"] = settings.precision
    start = time.monotonic()
    code = EXIT_FAILED
    try:
        code = COMMANDS[args.command](args, settings, record)
        record["ok"] = code == EXIT_OK
        return code
    except (UsageError, ValueError, UnknownFamily) as exc:
        code = EXIT_USAGE
        record.update(ok=False, error_kind="usage", message=str(exc))
        sys.stderr.write(f"error[usage]: {exc}\n")
        return code
    except McfracError as exc:
        code = EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_FAILED
        record.update(ok=False, error_kind=exc.error_kind, message=str(exc))
        sys.stderr.write(f"error[{exc.error_kind}]: {exc}\n")
        return code
    finally:
        record["exit_code"] = code
        record["duration_ms"] = int((time.monotonic() - start) * 1000)
        log_action(record)


def main(argv: Sequence[str] | None = None) -> None:
    raise SystemExit(run_cli(argv))


if __name__ == "__main__":
    main()
