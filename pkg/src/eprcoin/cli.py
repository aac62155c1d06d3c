"""Command line: ``eprcoin run | bias | oracle | replay``.

Exit codes: 0 success, 1 usage or I/O error, 2 domain outcome (session
aborted, replay mismatch or malformed transcript, failed oracle row).
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .adversary import StrategyError, parse_alice, parse_bob
from .io import (
    ParseError,
    ReplayMismatch,
    encode_end,
    encode_header,
    encode_record,
    parse_transcript,
    replay,
    write_transcript,
)
from .protocol import (
    ConfigError,
    DesignatedRule,
    SessionConfig,
    Transcript,
    run_full_session,
)
from .qstate import BellKind
from .stats import ExperimentSpec, Success, analytic_oracles, estimate

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2

_BELLS = {"psi-": BellKind.PSI_MINUS, "psi+": BellKind.PSI_PLUS}

DEFAULTS = {
    "n": "20",
    "seed": "0",
    "alice": "honest",
    "bob": "honest",
    "rule": "fixed",
    "bell": "psi-",
    "verify": "on",
    "trials": "10000",
    "master-seed": "0",
    "target": "one",
}


class UsageError(Exception):
    pass


def read_key_values(path: str) -> dict[str, str]:
    """Parse a ``key=value`` file (blank lines and ``#`` comments ignored)."""
    out = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{no}: expected key=value")
        key = key.strip().replace("_", "-")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def format_key_values(record: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in record.items())


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying defaults for the flags below")
    common.add_argument("--n", help="number of pairs (even, >= 2)")
    common.add_argument("--seed", help="session seed (unsigned 64-bit)")
    common.add_argument("--alice", help="Alice strategy spec, e.g. honest, alice_mixed_product:0.5")
    common.add_argument("--bob", help="Bob strategy spec, e.g. honest, bob_premeasure_all:target=1")
    common.add_argument("--rule", help="designated pair rule: fixed | bob | random")
    common.add_argument("--bell", help="final Bell state: psi- | psi+")
    common.add_argument("--verify", help="verification step: on | off")

    p = argparse.ArgumentParser(prog="eprcoin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one session")
    run.add_argument("--transcript", help="write the .eprt transcript here")
    bias = sub.add_parser("bias", parents=[common], help="estimate bias over many sessions")
    bias.add_argument("--trials")
    bias.add_argument("--master-seed", dest="master_seed")
    bias.add_argument("--target", help="0 | 1 (outcome equals that bit) or one (outcome equals 1)")
    bias.add_argument("--out", help="write a key=value report here")
    sub.add_parser("oracle", help="print closed-form oracle values")
    rep = sub.add_parser("replay", help="check a transcript by replaying it")
    rep.add_argument("path")
    return p


def _settings(args) -> dict[str, str]:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            values.update(read_key_values(args.config))
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
    for key in DEFAULTS:
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            values[key] = v
    return values


def _int(values, key, lo=0) -> int:
    try:
        v = int(values[key])
    except ValueError:
        raise UsageError(f"--{key} must be an integer, got {values[key]!r}") from None
    if v < lo:
        raise UsageError(f"--{key} must be >= {lo}, got {v}")
    return v


def _session(values) -> tuple[SessionConfig, object, object]:
    try:
        rule = DesignatedRule(values["rule"])
    except ValueError:
        raise UsageError(f"--rule must be fixed, bob or random, got {values['rule']!r}") from None
    if values["bell"] not in _BELLS:
        raise UsageError(f"--bell must be psi- or psi+, got {values['bell']!r}")
    if values["verify"] not in ("on", "off"):
        raise UsageError(f"--verify must be on or off, got {values['verify']!r}")
    try:
        cfg = SessionConfig(
            n=_int(values, "n"),
            seed=_int(values, "seed"),
            designated_rule=rule,
            final_bell=_BELLS[values["bell"]],
            verification=values["verify"] == "on",
        )
        return cfg, parse_alice(values["alice"]), parse_bob(values["bob"])
    except (ConfigError, StrategyError) as e:
        raise UsageError(str(e)) from None


def _phase_log(t: Transcript) -> list[str]:
    lines = [encode_header(t).rstrip("\n")]
    lines += [encode_record(r, t.session_id).rstrip("\n") for r in t.records]
    lines.append(encode_end(t).rstrip("\n"))
    return lines


def cmd_run(args, out) -> int:
    cfg, alice, bob = _session(_settings(args))
    result = run_full_session(cfg, alice, bob)
    for line in _phase_log(result.transcript):
        print(line, file=out)
    if result.aborted:
        print(f"outcome: ABORT ({result.abort_reason})", file=out)
    else:
        print(f"outcome: {result.outcome_bit} (designated pair {result.designated_index})", file=out)
    if args.transcript:
        try:
            write_transcript(result.transcript, args.transcript)
        except OSError as e:
            print(f"error: cannot write transcript: {e}", file=sys.stderr)
            return EXIT_USAGE
    return EXIT_DOMAIN if result.aborted else EXIT_OK


def build_experiment(values) -> ExperimentSpec:
    cfg, alice, bob = _session(values)
    trials = _int(values, "trials", lo=1)
    master = _int(values, "master-seed")
    target = values["target"]
    if target == "one":
        success, bit = Success.OUTCOME_EQUALS_ONE, None
    elif target in ("0", "1"):
        success, bit = Success.OUTCOME_EQUALS_TARGET, int(target)
    else:
        raise UsageError(f"--target must be 0, 1 or one, got {target!r}")
    try:
        return ExperimentSpec(cfg, alice, bob, trials, master, success, bit)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_bias(args, out) -> int:
    values = _settings(args)
    spec = build_experiment(values)
    t0 = time.perf_counter()
    est = estimate(spec)
    elapsed = time.perf_counter() - t0
    c = spec.config
    record = {
        "alice": spec.alice.spec,
        "bob": spec.bob.spec,
        "n": c.n,
        "rule": c.designated_rule.value,
        "bell": values["bell"],
        "verify": values["verify"],
        "master_seed": spec.master_seed,
        "target": values["target"],
        **est.as_record(),
        "wall_clock_s": f"{elapsed:.3f}",
    }
    print(f"experiment   alice={spec.alice.spec} bob={spec.bob.spec} n={c.n} "
          f"rule={c.designated_rule.value} verify={values['verify']} target={values['target']}", file=out)
    print(f"trials       {est.trials}", file=out)
    print(f"non_aborted  {est.non_aborted}", file=out)
    print(f"p_hat        {est.p_hat:.6f}", file=out)
    print(f"epsilon_hat  {est.epsilon_hat:+.6f}", file=out)
    print(f"95% CI       [{est.ci_low:.6f}, {est.ci_high:.6f}]", file=out)
    print(f"abort_rate   {est.abort_rate:.6f}", file=out)
    if est.undefined:
        print("p_hat        UNDEFINED (every session aborted)", file=out)
    if args.out:
        try:
            Path(args.out).write_text(format_key_values(record), encoding="utf-8")
        except OSError as e:
            print(f"error: cannot write report: {e}", file=sys.stderr)
            return EXIT_USAGE
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    rows = analytic_oracles()
    width = max(len(r.name) for r in rows)
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  value={r.value:.12g}  expected={r.expected:.12g}  "
              f"tol={r.tolerance:g}  {status}", file=out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_DOMAIN


def cmd_replay(args, out) -> int:
    try:
        data = Path(args.path).read_bytes()
    except OSError as e:
        print(f"error: cannot read {args.path}: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        t = parse_transcript(data.decode("utf-8"))
        result = replay(t)
    except UnicodeDecodeError as e:
        print(f"mismatch: not valid UTF-8 ({e})", file=out)
        return EXIT_DOMAIN
    except ParseError as e:
        print(f"mismatch: malformed transcript: {e}", file=out)
        return EXIT_DOMAIN
    except ReplayMismatch as e:
        print(f"mismatch: first divergent seq {e.seq}: {e}", file=out)
        return EXIT_DOMAIN
    end = "ABORT" if result.aborted else f"{result.outcome_bit} {result.designated_index}"
    print(f"replay ok: END {end}", file=out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    handler = {"run": cmd_run, "bias": cmd_bias, "oracle": cmd_oracle, "replay": cmd_replay}[args.command]
    try:
        return handler(args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
