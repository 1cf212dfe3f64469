"""Command line entry point: ``run``, ``verify`` and ``sweep``."""
from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .verification import preflight

CONFIG_KEYS = {
    "algo": str, "algorithm": str, "env": str, "d": int, "T": int, "seeds": str,
    "net_step": float, "out": str, "eta_scale": float, "workers": int,
}


class UsageError(Exception):
    pass


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            if not value:
                raise UsageError(f"{path}:{lineno}: empty value for {key!r}")
            try:
                values["algo" if key == "algorithm" else key] = CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key!r}") from None
    return values


def parse_seeds(text) -> tuple:
    """``"10"`` means seeds 0..9; ``"3,5,8"`` lists them explicitly."""
    text = str(text).strip()
    try:
        if "," in text:
            return tuple(int(s) for s in text.split(",") if s.strip())
        n = int(text)
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None
    if n < 1:
        raise UsageError(f"need at least one seed, got {n}")
    return tuple(range(n))


def parse_int_list(text) -> list[int]:
    try:
        out = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None
    if not out:
        raise UsageError("empty list")
    return out


def _add_common(p: argparse.ArgumentParser, d_type=int):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--algo", choices=harness.ALGORITHMS)
    p.add_argument("--env", choices=harness.ENVIRONMENTS)
    p.add_argument("--d", type=d_type)
    p.add_argument("--T", type=int)
    p.add_argument("--seeds", help="seed count N (seeds 0..N-1) or a comma list")
    p.add_argument("--net-step", dest="net_step", type=float)
    p.add_argument("--eta-scale", dest="eta_scale", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbco", description="Pseudo-1d bandit convex optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run one experiment and write its averaged trace"))
    _add_common(sub.add_parser("sweep", help="run one experiment per d value, one CSV each"), d_type=str)
    v = sub.add_parser("verify", help="run the identity checks")
    v.add_argument("--seed", type=int, default=0)
    return parser


def _settings(args) -> dict:
    values = parse_config_file(args.config) if args.config else {}
    for key in ("algo", "env", "d", "T", "seeds", "net_step", "eta_scale", "workers", "out"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    for key in ("algo", "env", "d", "T"):
        if key not in values:
            raise UsageError(f"missing required setting {key!r} (flag --{key} or config key)")
    return values


def _experiment(values, d) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        algorithm=values["algo"], env=values["env"], d=int(d), T=int(values["T"]),
        seeds=parse_seeds(values.get("seeds", "1")), net_step=values.get("net_step"),
        out=values.get("out"), eta_scale=float(values.get("eta_scale", 1.0)),
        workers=int(values.get("workers", 1)))


def _report(cfg, result, out=None):
    tr = result.mean
    print(f"{cfg.algorithm} on {cfg.env}: d={cfg.d} T={len(tr)} seeds={len(cfg.seeds)} "
          f"R_T={tr.final:.6g} R_T/T^0.75={tr.scaled_34[-1]:.6g} R_T/T^0.5={tr.scaled_12[-1]:.6g}"
          + (f" -> {out}" if out else ""))


def cmd_run(args) -> int:
    values = _settings(args)
    cfg = _experiment(values, values["d"])
    result = harness.run_experiment(cfg)
    if cfg.out:
        harness.emit_csv(result.mean, cfg.out)
    _report(cfg, result, cfg.out)
    return 0


def suffixed(path: str, d: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_d{d}{ext or '.csv'}"


def cmd_sweep(args) -> int:
    values = _settings(args)
    ds = parse_int_list(values["d"])
    if "out" not in values:
        raise UsageError("sweep needs --out (a base path; _d<value> is appended per run)")
    for d in ds:
        out = suffixed(values["out"], d)
        cfg = _experiment({**values, "out": out}, d)
        result = harness.run_experiment(cfg)
        harness.emit_csv(result.mean, out)
        _report(cfg, result, out)
    return 0


def cmd_verify(args) -> int:
    reports = preflight(seed=args.seed)
    for rep in reports:
        print(rep.summary_line())
    return 0 if all(r.passed for r in reports) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pbco: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"pbco: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
