"""Canonical text encoding of transcripts (``.eprt``) and integrity replay.

File layout (UTF-8, LF line endings, no BOM)::

    EPRCOIN v1 n=<n> seed=<seed> rule=<fixed|bob|random> bell=<psi-|psi+> verify=<on|off> alice=<spec> bob=<spec>
    REC <session-id> <seq> <sender> <msg-type> [payload...]
    ...
    END <0|1|ABORT> <designated-index|->

Payloads, fields separated by single spaces:

    PARTICLES      <n>
    CHALLENGE      <i,j,...>                 sorted, comma separated
    UNLOCK_DONE
    AXES           <i> <x> <y> <z> ...       one group of four per challenged pair
    RESULTS        <i> <+1|-1> ...           one pair per challenged pair
    VERIFY_STATUS  <ok|fail>
    FINAL_UNLOCK_DONE
    OUTCOME_CLAIM  <i> <+1|-1>

Reals use 17 significant digits in lowercase scientific notation with an
unpadded exponent (``1.0000000000000000e0``, ``-2.5000000000000000e-1``),
which round-trips doubles exactly. Decoding rejects anything that would not
re-encode to the same bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .adversary import StrategyError, parse_alice, parse_bob
from .protocol import (
    FIXED_DESIGNATED_INDEX,
    Axes,
    Challenge,
    ConfigError,
    DesignatedRule,
    FinalUnlockDone,
    Message,
    OutcomeClaim,
    Particles,
    Record,
    Results,
    Sender,
    SessionConfig,
    SessionResult,
    Transcript,
    UnlockDone,
    VerifyStatus,
    designate_public_random,
    verification_passes,
)
from .qstate import Axis, BellKind, SpinOutcome
from . import seeding

MAGIC = "EPRCOIN"
VERSION = "v1"
AXIS_PARSE_TOL = 1e-6

_BELL_TOKENS = {BellKind.PSI_MINUS: "psi-", BellKind.PSI_PLUS: "psi+"}
_BELL_FROM_TOKEN = {v: k for k, v in _BELL_TOKENS.items()}
_MSG_TYPES = {
    Particles: "PARTICLES",
    Challenge: "CHALLENGE",
    UnlockDone: "UNLOCK_DONE",
    Axes: "AXES",
    Results: "RESULTS",
    VerifyStatus: "VERIFY_STATUS",
    FinalUnlockDone: "FINAL_UNLOCK_DONE",
    OutcomeClaim: "OUTCOME_CLAIM",
}


class ParseError(ValueError):
    """Malformed line; ``field`` names what was wrong and ``position`` the token index."""

    def __init__(self, message: str, field: str = "", position: Optional[int] = None, line_no: Optional[int] = None):
        self.field = field
        self.position = position
        self.line_no = line_no
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field:
            where.append(f"field {field}")
        if position is not None:
            where.append(f"token {position}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ReplayMismatch(Exception):
    def __init__(self, seq: Union[int, str], message: str):
        self.seq = seq
        super().__init__(f"replay mismatch at seq {seq}: {message}")


# --- scalars ----------------------------------------------------------------


def format_real(x: float) -> str:
    mantissa, exp = format(x, ".16e").split("e")
    return f"{mantissa}e{int(exp)}"


def format_outcome(o: SpinOutcome) -> str:
    return "+1" if o is SpinOutcome.UP else "-1"


def _parse_int(tok: str, field: str, pos: int) -> int:
    if not tok.isdigit() or (len(tok) > 1 and tok[0] == "0"):
        raise ParseError(f"expected a canonical non-negative integer, got {tok!r}", field, pos)
    return int(tok)


def _parse_real(tok: str, field: str, pos: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise ParseError(f"expected a real number, got {tok!r}", field, pos) from None
    if not math.isfinite(x) or format_real(x) != tok:
        raise ParseError(f"non-canonical real {tok!r}", field, pos)
    return x


def _parse_outcome(tok: str, field: str, pos: int) -> SpinOutcome:
    if tok == "+1":
        return SpinOutcome.UP
    if tok == "-1":
        return SpinOutcome.DOWN
    raise ParseError(f"expected +1 or -1, got {tok!r}", field, pos)


# --- messages ---------------------------------------------------------------


def _payload(msg: Message) -> list[str]:
    if isinstance(msg, Particles):
        return [str(msg.n)]
    if isinstance(msg, Challenge):
        return [",".join(str(i) for i in sorted(msg.indices))]
    if isinstance(msg, Axes):
        out = []
        for i, a in msg.entries:
            out += [str(i), format_real(a.x), format_real(a.y), format_real(a.z)]
        return out
    if isinstance(msg, Results):
        out = []
        for i, o in msg.entries:
            out += [str(i), format_outcome(o)]
        return out
    if isinstance(msg, VerifyStatus):
        return ["ok" if msg.ok else "fail"]
    if isinstance(msg, OutcomeClaim):
        return [str(msg.index), format_outcome(msg.outcome)]
    return []


def encode_message(msg: Message, session_id: str, seq: int, sender: Sender) -> str:
    """One canonical ``REC`` line, newline-terminated."""
    fields = ["REC", session_id, str(seq), sender.value, _MSG_TYPES[type(msg)]] + _payload(msg)
    return " ".join(fields) + "\n"


def encode_record(record: Record, session_id: str) -> str:
    return encode_message(record.message, session_id, record.seq, record.sender)


@dataclass(frozen=True)
class DecodedRecord:
    session_id: str
    record: Record


def decode_message(line: str, n: Optional[int] = None) -> DecodedRecord:
    """Parse one ``REC`` line. With ``n`` given, set sizes are checked against n/2."""
    if not line.endswith("\n"):
        raise ParseError("line is not newline-terminated", "line")
    toks = line[:-1].split(" ")
    if len(toks) < 5 or toks[0] != "REC":
        raise ParseError("expected 'REC <session-id> <seq> <sender> <msg-type> ...'", "REC", 0)
    session_id = toks[1]
    if not session_id or session_id.strip() != session_id:
        raise ParseError("empty session id", "session-id", 1)
    seq = _parse_int(toks[2], "seq", 2)
    try:
        sender = Sender(toks[3])
    except ValueError:
        raise ParseError(f"unknown sender {toks[3]!r}", "sender", 3) from None
    kind, args = toks[4], toks[5:]
    half = None if n is None else n // 2

    def nargs(count):
        if len(args) != count:
            raise ParseError(f"{kind} takes {count} payload fields, got {len(args)}", "payload", 5)

    if kind == "PARTICLES":
        nargs(1)
        msg = Particles(_parse_int(args[0], "n", 5))
    elif kind == "CHALLENGE":
        nargs(1)
        parts = args[0].split(",")
        idx = tuple(_parse_int(p, "indices", 5) for p in parts)
        if list(idx) != sorted(set(idx)):
            raise ParseError("challenge indices must be distinct and sorted", "indices", 5)
        if half is not None and len(idx) != half:
            raise ParseError(f"challenge has {len(idx)} indices, expected {half}", "indices", 5)
        msg = Challenge(idx)
    elif kind in ("UNLOCK_DONE", "FINAL_UNLOCK_DONE"):
        nargs(0)
        msg = UnlockDone() if kind == "UNLOCK_DONE" else FinalUnlockDone()
    elif kind == "AXES":
        if len(args) % 4:
            raise ParseError("AXES payload must come in groups of four", "payload", 5)
        entries = []
        for g in range(0, len(args), 4):
            pos = 5 + g
            i = _parse_int(args[g], "index", pos)
            x, y, z = (_parse_real(args[g + k], "axis", pos + k) for k in (1, 2, 3))
            if abs(math.sqrt(x * x + y * y + z * z) - 1.0) > AXIS_PARSE_TOL:
                raise ParseError("axis is not unit length", "axis", pos + 1)
            entries.append((i, Axis._unchecked(x, y, z)))
        if half is not None and len(entries) != half:
            raise ParseError(f"AXES has {len(entries)} entries, expected {half}", "payload", 5)
        msg = Axes(tuple(entries))
    elif kind == "RESULTS":
        if len(args) % 2:
            raise ParseError("RESULTS payload must come in pairs", "payload", 5)
        entries = tuple(
            (_parse_int(args[g], "index", 5 + g), _parse_outcome(args[g + 1], "outcome", 6 + g))
            for g in range(0, len(args), 2)
        )
        if half is not None and len(entries) != half:
            raise ParseError(f"RESULTS has {len(entries)} entries, expected {half}", "payload", 5)
        msg = Results(entries)
    elif kind == "VERIFY_STATUS":
        nargs(1)
        if args[0] not in ("ok", "fail"):
            raise ParseError(f"expected ok or fail, got {args[0]!r}", "ok", 5)
        msg = VerifyStatus(args[0] == "ok")
    elif kind == "OUTCOME_CLAIM":
        nargs(2)
        msg = OutcomeClaim(_parse_int(args[0], "index", 5), _parse_outcome(args[1], "outcome", 6))
    else:
        raise ParseError(f"unknown message type {kind!r}", "msg-type", 4)

    rec = Record(seq, sender, msg)
    if encode_record(rec, session_id) != line:
        raise ParseError("line is not in canonical form", "line")
    return DecodedRecord(session_id, rec)


# --- transcripts ------------------------------------------------------------


def encode_header(t: Transcript) -> str:
    c = t.config
    return (
        f"{MAGIC} {VERSION} n={c.n} seed={c.seed} rule={c.designated_rule.value} "
        f"bell={_BELL_TOKENS[c.final_bell]} verify={'on' if c.verification else 'off'} "
        f"alice={t.alice_spec} bob={t.bob_spec}\n"
    )


def encode_end(t: Transcript) -> str:
    if t.outcome is None:
        return "END ABORT -\n"
    return f"END {t.outcome} {t.designated_index}\n"


def encode_transcript(t: Transcript) -> str:
    parts = [encode_header(t)]
    parts += [encode_record(r, t.session_id) for r in t.records]
    parts.append(encode_end(t))
    return "".join(parts)


def _parse_header(line: str) -> Transcript:
    if not line.endswith("\n"):
        raise ParseError("header is not newline-terminated", "header", line_no=1)
    toks = line[:-1].split(" ")
    keys = ["n", "seed", "rule", "bell", "verify", "alice", "bob"]
    if len(toks) != 2 + len(keys) or toks[0] != MAGIC or toks[1] != VERSION:
        raise ParseError(f"expected '{MAGIC} {VERSION} n=.. seed=.. rule=.. bell=.. verify=.. alice=.. bob=..'",
                         "header", line_no=1)
    vals = {}
    for pos, (tok, key) in enumerate(zip(toks[2:], keys), start=2):
        k, eq, v = tok.partition("=")
        if k != key or not eq:
            raise ParseError(f"expected {key}=...", key, pos, line_no=1)
        vals[key] = v
    try:
        rule = DesignatedRule(vals["rule"])
    except ValueError:
        raise ParseError(f"unknown rule {vals['rule']!r}", "rule", 4, line_no=1) from None
    if vals["bell"] not in _BELL_FROM_TOKEN:
        raise ParseError(f"unknown bell {vals['bell']!r}", "bell", 5, line_no=1)
    if vals["verify"] not in ("on", "off"):
        raise ParseError(f"verify must be on or off, got {vals['verify']!r}", "verify", 6, line_no=1)
    try:
        config = SessionConfig(
            n=_parse_int(vals["n"], "n", 2),
            seed=_parse_int(vals["seed"], "seed", 3),
            designated_rule=rule,
            final_bell=_BELL_FROM_TOKEN[vals["bell"]],
            verification=vals["verify"] == "on",
        )
        alice, bob = parse_alice(vals["alice"]), parse_bob(vals["bob"])
    except (ConfigError, StrategyError) as e:
        raise ParseError(str(e), "header", line_no=1) from None
    t = Transcript(config, alice.spec, bob.spec)
    if encode_header(t) != line:
        raise ParseError("header is not in canonical form", "header", line_no=1)
    return t


def parse_transcript(text: str) -> Transcript:
    """Parse a whole ``.eprt`` document; the result re-encodes to ``text`` exactly."""
    if text.startswith("\ufeff"):
        raise ParseError("byte order mark not allowed", "header", line_no=1)
    if not text.endswith("\n"):
        raise ParseError("file must end with a newline", "END")
    lines = text[:-1].split("\n")
    lines = [ln + "\n" for ln in lines]
    if len(lines) < 2:
        raise ParseError("transcript needs a header and an END line", "END")
    t = _parse_header(lines[0])
    for line_no, line in enumerate(lines[1:-1], start=2):
        try:
            dec = decode_message(line, t.config.n)
        except ParseError as e:
            raise ParseError(str(e), e.field, e.position, line_no) from None
        if dec.session_id != t.session_id:
            raise ParseError(f"session id {dec.session_id!r} does not match {t.session_id!r}",
                             "session-id", 1, line_no)
        if dec.record.seq != len(t.records):
            raise ParseError(f"seq {dec.record.seq} breaks the sequence (expected {len(t.records)})",
                             "seq", 2, line_no)
        t.records.append(dec.record)
    end = lines[-1][:-1].split(" ")
    if len(end) != 3 or end[0] != "END":
        raise ParseError("expected 'END <outcome|ABORT> <index|->'", "END", 0, len(lines))
    if end[1] == "ABORT":
        if end[2] != "-":
            raise ParseError("aborted sessions end with '-'", "designated-index", 2, len(lines))
    else:
        if end[1] not in ("0", "1"):
            raise ParseError(f"bad outcome {end[1]!r}", "outcome", 1, len(lines))
        t.outcome = int(end[1])
        t.designated_index = _parse_int(end[2], "designated-index", 2)
    t.finished = True
    if encode_end(t) != lines[-1]:
        raise ParseError("END line is not in canonical form", "END", line_no=len(lines))
    return t


def write_transcript(t: Transcript, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_transcript(t).encode("utf-8"))


def read_transcript(path: Union[str, Path]) -> Transcript:
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"not valid UTF-8: {e}", "file") from None
    return parse_transcript(text)


# --- replay -----------------------------------------------------------------

_EXPECTED = [
    (Sender.ALICE, Particles),
    (Sender.BOB, Challenge),
    (Sender.ALICE, UnlockDone),
    (Sender.BOB, Axes),
    (Sender.BOB, Results),
    (Sender.ALICE, Results),
    (Sender.BOB, VerifyStatus),
    (Sender.ALICE, FinalUnlockDone),
    (Sender.BOB, OutcomeClaim),
    (Sender.ALICE, OutcomeClaim),
]


def replay(t: Transcript) -> SessionResult:
    """Re-run the public side of a session from its record and check every public value.

    Measurement outcomes are taken from the record; everything derivable from
    them (message order, set sizes, verification status, designated pair,
    final coin) is recomputed and compared. Raises :class:`ReplayMismatch`
    naming the first divergent seq (``"END"`` for the END line).
    """
    cfg = t.config
    recs = t.records
    challenge: tuple[int, ...] = ()
    axes: dict[int, Axis] = {}
    bob_res: dict[int, SpinOutcome] = {}
    alice_res: dict[int, SpinOutcome] = {}
    final: tuple[int, ...] = ()
    designated = None
    bob_claim = alice_claim = None

    for pos, rec in enumerate(recs):
        if rec.seq != pos:
            raise ReplayMismatch(rec.seq, f"expected seq {pos}")
        if pos >= len(_EXPECTED):
            raise ReplayMismatch(rec.seq, "message after the final claim")
        sender, kind = _EXPECTED[pos]
        msg = rec.message
        if rec.sender is not sender or not isinstance(msg, kind):
            raise ReplayMismatch(
                rec.seq, f"expected {sender.value} {_MSG_TYPES[kind]}, got {rec.sender.value} {_MSG_TYPES[type(msg)]}"
            )
        if isinstance(msg, Particles):
            if msg.n != cfg.n:
                raise ReplayMismatch(rec.seq, f"PARTICLES n={msg.n} but header n={cfg.n}")
        elif isinstance(msg, Challenge):
            allowed = set(cfg.challenge_candidates())
            if len(msg.indices) != cfg.half or len(set(msg.indices)) != cfg.half or not set(msg.indices) <= allowed:
                raise ReplayMismatch(rec.seq, "challenge is not a valid n/2 subset of the allowed indices")
            challenge = tuple(sorted(msg.indices))
            final = tuple(i for i in range(cfg.n) if i not in set(challenge))
        elif isinstance(msg, Axes):
            if tuple(i for i, _ in msg.entries) != challenge:
                raise ReplayMismatch(rec.seq, "AXES indices differ from the challenge")
            axes = dict(msg.entries)
        elif isinstance(msg, Results):
            if tuple(i for i, _ in msg.entries) != challenge:
                raise ReplayMismatch(rec.seq, "RESULTS indices differ from the challenge")
            (bob_res if rec.sender is Sender.BOB else alice_res).update(msg.entries)
        elif isinstance(msg, VerifyStatus):
            expected = (not cfg.verification) or verification_passes(
                [(alice_res[i], bob_res[i]) for i in challenge]
            )
            if msg.ok != expected:
                raise ReplayMismatch(
                    rec.seq, f"recorded status {'ok' if msg.ok else 'fail'} but results give "
                    f"{'ok' if expected else 'fail'}"
                )
            if not msg.ok:
                if pos != len(recs) - 1:
                    raise ReplayMismatch(recs[pos + 1].seq, "messages after a failed verification")
                break
        elif isinstance(msg, OutcomeClaim):
            if rec.sender is Sender.BOB:
                rule = cfg.designated_rule
                if rule is DesignatedRule.FIXED_FIRST:
                    designated = FIXED_DESIGNATED_INDEX
                elif rule is DesignatedRule.PUBLIC_RANDOM:
                    public = seeding.substream(cfg.seed, seeding.STREAM_PUBLIC)
                    designated = designate_public_random(public, final)
                else:
                    designated = msg.index if msg.index in final else None
                if designated is None or msg.index != designated:
                    raise ReplayMismatch(rec.seq, f"claimed pair {msg.index} is not the designated pair")
                bob_claim = msg.outcome
            else:
                if msg.index != designated:
                    raise ReplayMismatch(rec.seq, "Alice's claim names a different pair than Bob's")
                alice_claim = msg.outcome

    if alice_claim is None:
        if t.outcome is not None:
            raise ReplayMismatch("END", f"recorded outcome {t.outcome} but the session did not finish")
        last = recs[-1].message if recs else None
        failed_check = isinstance(last, VerifyStatus) and not last.ok
        # malformed messages are not recorded; the session stops right after
        # PARTICLES, UNLOCK_DONE or FINAL_UNLOCK_DONE
        if not failed_check and len(recs) not in (1, 3, 8):
            raise ReplayMismatch("END", "transcript stops in the middle of a phase")
        return SessionResult(None, None, t, [], "replayed abort")

    outcome = alice_claim.bit
    if t.outcome != outcome or t.designated_index != designated:
        raise ReplayMismatch(
            "END", f"recorded END {t.outcome} {t.designated_index} but claims give {outcome} {designated}"
        )
    return SessionResult(outcome, designated, t, [(designated, alice_claim.bit, bob_claim.bit)])
