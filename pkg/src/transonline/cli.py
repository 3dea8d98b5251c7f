"""Command line: play, sweep, oracle, minseq, gen-class, ldim.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 a checked assertion failed.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .adversaries import load_scripted
from .engine import play_standard, play_transductive
from .errors import TransOnlineError
from .hypotheses import SparseClass, ldim, write_explicit_table
from .learners import LEARNER_NAMES, make_learner
from .oracle import OracleBudget, OracleStats, forced_mistakes, std_value, trans_value, trans_value_fixed_seq
from .seqmin import essential_indices, minimalize, rigidify
from .treebits import NodeId

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ASSERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="base seed (default 0)")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=default,
                      help="check realizability every round")
    mode.add_argument("--trusted", dest="strict", action="store_false", default=default,
                      help="skip the per-round realizability check")
    parser.add_argument("--out", default=default, help="output file")
    parser.add_argument("--config", default=default, help="key=value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="transonline", description="Transductive vs standard online learning workbench.")
    _global_flags(p, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("play", parents=[common], help="play one game and print its transcript summary")
    s.add_argument("--class", dest="class_spec", help="class generator spec (default sparse:d=<d>,seed=<seed>)")
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--learner", default="transductive", help="name or name(k=v,...)")
    s.add_argument("--adversary", default="balanced",
                   help="balanced(eps=,M=), target-path|bfs|random, scripted:<file>, littlestone (standard game)")
    s.add_argument("--setting", choices=("transductive", "standard"), default="transductive")
    s.add_argument("--n", type=int, help="rounds (standard game: required)")
    s.add_argument("--tmax", type=int, help="transductive learner: initial danger-zone prefix length")
    s.add_argument("--halving-threshold", type=int, help="transductive learner: switch to halving at this size")
    s.add_argument("--expert-cap", type=int, help="transductive learner: abort above this many experts")

    s = sub.add_parser("sweep", parents=[common], help="run a grid of games and write CSV")
    s.add_argument("--d-values", help="e.g. 9,16,25")
    s.add_argument("--seeds", help="e.g. 0-19")
    s.add_argument("--learners", help="comma-separated learner names")
    s.add_argument("--adversaries", help="comma-separated adversary names")
    s.add_argument("--repetitions", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--check", action="store_true", help="exit 3 if any cell errored or made more than d mistakes")

    s = sub.add_parser("oracle", parents=[common], help="exact game values on tiny instances")
    s.add_argument("--mode", choices=("std", "trans", "trans-fixed", "forced"), required=True)
    s.add_argument("--class", dest="class_spec", help="class generator spec")
    s.add_argument("--n", type=int)
    s.add_argument("--sequence", help="comma-separated bitstrings (trans-fixed)")
    s.add_argument("--adversary", help="scripted:<file> (forced)")
    s.add_argument("--max-hypotheses", type=int)
    s.add_argument("--max-domain", type=int)
    s.add_argument("--max-rounds", type=int)
    s.add_argument("--max-nodes", type=int)

    s = sub.add_parser("minseq", parents=[common], help="rigidify and minimalize a scripted adversary")
    s.add_argument("--adversary", required=True, help="scripted:<file>")
    s.add_argument("--M", type=int, required=True)

    s = sub.add_parser("gen-class", parents=[common], help="write a class as an explicit table")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--bias-exp", type=int)
    s.add_argument("--emit", default="none", help="none (print descriptor) or a path for the explicit table")

    s = sub.add_parser("ldim", parents=[common], help="Littlestone dimension of a class")
    s.add_argument("--class", dest="class_spec", required=True)
    return p


def _merged(args: argparse.Namespace) -> dict:
    values = {}
    if getattr(args, "config", None):
        values.update(harness.read_config(args.config))
    for k, v in vars(args).items():
        if v is not None and (v is not False or k == "strict"):
            values[k] = v
    values.setdefault("seed", "0")
    return values


def _as_bool(v) -> bool:
    return v.lower() in ("1", "true", "yes", "on") if isinstance(v, str) else bool(v)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _scripted_path(spec: str | None) -> str:
    if not spec or not spec.startswith("scripted:"):
        raise UsageError("--adversary must be scripted:<file>")
    return spec.split(":", 1)[1]


def cmd_play(v: dict) -> int:
    seed = int(v["seed"])
    d = int(v.get("d", 4))
    spec = v.get("class_spec") or f"sparse:d={d},seed={seed}"
    cls, domain = harness.parse_class_spec(spec)
    lname, lparams = harness.split_named(v.get("learner", "transductive"))
    if lname not in LEARNER_NAMES:
        raise UsageError(f"unknown learner {lname!r}")
    if lname == "soa":
        learner = make_learner(lname, cls, seed, domain=domain)
    else:
        for k in ("tmax", "halving_threshold", "expert_cap"):
            if v.get(k) is not None:
                lparams[k] = v[k]
        learner = make_learner(lname, cls, seed, **{k: int(x) for k, x in lparams.items()})
    aname, aparams = harness.split_named(v.get("adversary", "balanced"))
    strict = _as_bool(v.get("strict", True))
    if v.get("setting") == "standard":
        from .adversaries import LittlestoneTreeAdversary

        if v.get("n") is None:
            raise UsageError("the standard game needs --n")
        adv = LittlestoneTreeAdversary(cls, domain) if aname == "littlestone" else harness.make_adversary(
            aname, cls, seed, **aparams
        )
        tr = play_standard(cls, learner, adv, int(v["n"]), strict=strict)
    else:
        adv = harness.make_adversary(aname, cls, seed, **aparams)
        n = v.get("n")
        tr = play_transductive(cls, learner, adv, None if n is None else int(n), strict=strict)
    if v.get("out"):
        harness.emit_transcript_json(tr, v["out"])
    print(f"setting={tr.setting} d={tr.d} n={len(tr.rounds)} mistakes={tr.mistakes} forced={tr.forced}")
    return EXIT_OK


def cmd_sweep(v: dict) -> int:
    spec = harness.sweep_spec_from(v)
    rows = harness.run_sweep(spec)
    text = harness.rows_to_csv(rows)
    out = v.get("out")
    if out:
        harness.emit_csv(rows, out)
    else:
        sys.stdout.write(text)
    if _as_bool(v.get("check", False)):
        bad = [r for r in rows if r.error or (r.mistakes is not None and r.mistakes > r.d)]
        if bad:
            print(f"check failed on {len(bad)} cell(s)", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def cmd_oracle(v: dict) -> int:
    budget = OracleBudget()
    for flag, attr in (("max_hypotheses",) * 2, ("max_domain",) * 2, ("max_rounds",) * 2,
                       ("max_nodes", "max_nodes_expanded")):
        if v.get(flag) is not None:
            setattr(budget, attr, int(v[flag]))
    budget.__post_init__()
    stats = OracleStats()
    mode = v["mode"]
    if mode == "forced":
        adv = load_scripted(_scripted_path(v.get("adversary")))
        value = forced_mistakes(adv, budget=budget, stats=stats)
    else:
        if not v.get("class_spec"):
            raise UsageError(f"--mode {mode} needs --class")
        cls, domain = harness.parse_class_spec(v["class_spec"])
        if mode == "trans-fixed":
            if not v.get("sequence"):
                raise UsageError("--mode trans-fixed needs --sequence")
            seq = [NodeId.parse(tok) for tok in v["sequence"].split(",")]
            value = trans_value_fixed_seq(cls, seq, budget=budget, stats=stats)
        else:
            if v.get("n") is None:
                raise UsageError(f"--mode {mode} needs --n")
            fn = std_value if mode == "std" else trans_value
            value = fn(cls, int(v["n"]), domain=domain, budget=budget, stats=stats)
    _emit(f"value={value} nodes={stats.nodes} memo_hits={stats.memo_hits}", v.get("out"))
    return EXIT_OK


def cmd_minseq(v: dict) -> int:
    adv = load_scripted(_scripted_path(v.get("adversary")))
    M = int(v["M"])
    seq = adv.sequence
    _, table = rigidify(adv, seq, len(seq), star_budget=M)
    idx = essential_indices(table, M)
    sub, minimal = minimalize(adv, seq, M)
    forced = forced_mistakes(minimal)
    ok = len(sub) <= (1 << M) - 1 and forced >= M
    lines = ["rigid table:", table.format(), f"essential indices: {' '.join(map(str, idx))}",
             f"subsequence: {','.join(str(x) or 'λ' for x in sub)}",
             f"forced mistakes on subsequence: {forced}", f"verdict: {'ok' if ok else 'FAIL'}"]
    _emit("\n".join(lines), v.get("out"))
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_gen_class(v: dict) -> int:
    bias = v.get("bias_exp")
    cls = SparseClass(int(v["d"]), None if bias is None else int(bias), int(v["seed"]))
    target = v.get("out") or (None if v.get("emit", "none") == "none" else v["emit"])
    if target:
        write_explicit_table(cls, target)
    else:
        print(json.dumps(cls.descriptor()))
    return EXIT_OK


def cmd_ldim(v: dict) -> int:
    cls, domain = harness.parse_class_spec(v["class_spec"])
    _emit(str(ldim(cls, domain)), v.get("out"))
    return EXIT_OK


COMMANDS = {
    "play": cmd_play,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "minseq": cmd_minseq,
    "gen-class": cmd_gen_class,
    "ldim": cmd_ldim,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = _merged(args)
        return COMMANDS[args.command](values)
    except UsageError as exc:
        print(f"transonline: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransOnlineError, ValueError, KeyError, OSError) as exc:
        print(f"transonline: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
