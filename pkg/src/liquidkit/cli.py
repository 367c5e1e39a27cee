"""Command-line entry point: ``liquidkit verify|expand|generator|theta``."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .errors import DomainError, IoError, LiquidKitError, PrecisionExhausted, UnknownSuite
from .laurent import parse_text, to_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _kv(tokens: list[str], need: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise DomainError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    missing = [k for k in need if k not in out]
    if missing:
        raise DomainError(f"missing {', '.join(missing)}")
    return out


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"not a rational number: {text!r}") from e


def cmd_expand(args) -> list[str]:
    from .theta import PadicPoint, bounded_digit_expand, padic_digit_expand, real_digit_expand, theta_exact

    if args.real is not None:
        kv = _kv(args.real, ("y", "x", "N"))
        y, x, N = _frac(kv["y"]), _frac(kv["x"]), int(kv["N"])
        g = real_digit_expand(y, x, N, int(kv.get("terms", 64)))
        return [to_text(g), f"# |y - theta_x(g)| = {y - theta_exact(g, x)}"]
    if args.padic is not None:
        kv = _kv(args.padic, ("p", "x", "y", "K"))
        pt = PadicPoint(int(kv["p"]), int(kv["x"]), int(kv["K"]))
        digits = int(kv["digits"]) if "digits" in kv else None
        g = padic_digit_expand(int(kv["y"]), pt, digits)
        used = pt.max_digits if digits is None else digits
        return [to_text(g), f"# |y - theta_x(g)|_p <= {pt.p}^-{min(pt.K, pt.m * used)}"]
    kv = _kv(args.bounded, ("z", "r", "rp"))
    z, rp = _frac(kv["z"]), _frac(kv["rp"])
    g = bounded_digit_expand(z, _frac(kv["r"]), rp, int(kv.get("terms", 64)))
    return [to_text(g), f"# |z - theta_rp(g)| = {abs(z - theta_exact(g, rp))}"]


def cmd_generator(args) -> list[str]:
    from .theta import certificate_holds, construct_generator

    cert = construct_generator(_frac(args.x), _frac(args.r), M=args.order)
    return [to_text(cert.f),
            f"# n={cert.n} coeff_bound={cert.coeff_bound} residual<={float(cert.residual_bound):.3e}"
            f" certificate={'holds' if certificate_holds(cert) else 'fails'}"]


def cmd_theta(args) -> list[str]:
    from .theta import theta_eval

    iv = theta_eval(parse_text(args.series), _frac(args.x))
    return [str(iv.lo) if iv.lo == iv.hi else f"[{iv.lo}, {iv.hi}]"]


def cmd_verify(args) -> int:
    from .report import emit_report, write_report
    from .suites import SuiteConfig, run_suite

    overrides = _kv(args.set or [], ())
    if args.config:
        cfg = SuiteConfig.from_ini(args.config, args.suite, args.seed, overrides, args.out)
    else:
        cfg = SuiteConfig(args.suite, overrides, args.seed or 0, args.out)
    rep = run_suite(cfg)
    sys.stdout.write(emit_report(rep, "text", args.timing).decode())
    if cfg.out:
        fmt = args.format or ("text" if cfg.out.endswith(".txt") else "json")
        write_report(rep, cfg.out, fmt, args.timing)
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liquidkit", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite")
    v.add_argument("--config")
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.add_argument("--format", choices=("json", "text"))
    v.add_argument("--set", nargs="*", metavar="KEY=VALUE", help="override suite parameters")
    v.add_argument("--timing", action="store_true", help="include wall time (breaks byte identity)")

    e = sub.add_parser("expand", help="digit expansions")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--real", nargs="+", metavar="KEY=VALUE")
    g.add_argument("--padic", nargs="+", metavar="KEY=VALUE")
    g.add_argument("--bounded", nargs="+", metavar="KEY=VALUE")

    gen = sub.add_parser("generator", help="construct a kernel generator")
    gen.add_argument("--x", required=True)
    gen.add_argument("--r", required=True)
    gen.add_argument("--order", type=int, default=200)

    t = sub.add_parser("theta", help="evaluate a series at a point")
    t.add_argument("--series", required=True)
    t.add_argument("--x", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "verify":
            return cmd_verify(args)
        lines = {"expand": cmd_expand, "generator": cmd_generator, "theta": cmd_theta}[args.cmd](args)
        print("\n".join(lines))
        return EXIT_OK
    except UnknownSuite as e:
        print(f"error: unknown suite {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, PrecisionExhausted, IoError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LiquidKitError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
