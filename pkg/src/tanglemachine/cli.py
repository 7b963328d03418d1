"""Command-line entry point: ``tangle <subcommand> [options]``.

Exit codes: 0 on success, 1 when the computation fails or a machine does
not decide, 2 on usage errors (bad flags, unreadable files, bad literals).
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import beliefnet as bn
from . import gates, rewrite, turing
from .algebra import (
    AXIOMS,
    DEFAULT_SEED,
    QUAGMAS,
    Fox3,
    KindError,
    Mat,
    check_axioms,
    format_colour,
    get_quagma,
    parse_colour,
)
from .colouring import DETERMINED, INCONSISTENT, propagate
from .diagram import DiagramError, ParseError, TangleMachine, parse, serialize, to_dot

SEED_ENV = "TANGLE_SEED"

NAMED_COLOURS = {
    "A0": gates.A0,
    "A1": gates.A1,
    "A0+A1": gates.A0_PLUS_A1,
    "ZERO": gates.ZERO,
}

# axioms each structure class must satisfy; the rest are informational
REQUIRED_AXIOMS = {
    "quandle": AXIOMS,
    "quagma": ("idempotence", "reversibility", "self_distributivity"),
    "quandloid": ("idempotence", "self_distributivity"),
}


class UsageError(Exception):
    """Bad input from the command line; exit code 2."""


class DomainFailure(Exception):
    """The requested computation failed; exit code 1."""


# ---------------------------------------------------------------- output


class Out:
    def __init__(self, fmt: str, use_float: bool) -> None:
        self.fmt = fmt
        self.use_float = use_float

    def value(self, v) -> str:
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, Fraction):
            if self.use_float:
                return f"{float(v):.10g}"
            return format_colour(v)
        if isinstance(v, bn.Belief):
            return f"{self.value(v.a)}|{self.value(v.b)}"
        if isinstance(v, Mat):
            for name, mat in NAMED_COLOURS.items():
                if v == mat:
                    return name
            return str(v)
        if isinstance(v, float):
            return f"{v:.10g}"
        if isinstance(v, (list, tuple)):
            return ",".join(self.value(x) for x in v)
        return str(v)

    def emit(self, key: str, v) -> None:
        sep = "=" if self.fmt == "kv" else ": "
        print(f"{key}{sep}{self.value(v)}")


# ---------------------------------------------------------------- parsing helpers


def split_top(text: str) -> list[str]:
    """Split on commas outside brackets."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def colour_arg(text: str, carrier: str | None = None):
    t = text.strip()
    if t in NAMED_COLOURS:
        return NAMED_COLOURS[t]
    if carrier == "belief" or "|" in t and not t.startswith("f"):
        return bn.Belief.parse(t)
    if carrier == "fox3" and t in ("0", "1", "2"):
        return Fox3(int(t))
    return parse_colour(t)


def fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def load_machine(path: str) -> TangleMachine:
    try:
        return parse(read_text(path))
    except (ParseError, DiagramError, ValueError) as e:
        raise UsageError(f"{path}: {e}") from None


def write_or_print(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}") from None


def register_ref(m: TangleMachine, text: str) -> int:
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        return m.register_named(text)
    except (KeyError, ValueError):
        raise UsageError(f"no register named {text!r}") from None


def ip_params(args) -> bn.IPParams:
    try:
        return bn.IPParams(args.c, args.s, args.delta)
    except ValueError as e:
        raise UsageError(str(e)) from None


def resolve_seed(args, out: Out) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise UsageError(f"Monte-Carlo runs need --seed (or {SEED_ENV} in the environment)")
    try:
        seed = int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    out.emit("seed_from_env", f"{SEED_ENV}={seed}")
    return seed


# ---------------------------------------------------------------- subcommands


def cmd_axioms(args, out: Out) -> int:
    q = get_quagma(args.quagma)
    names = [args.axiom] if args.axiom else list(AXIOMS)
    failed_required = False
    out.emit("quagma", f"{q.name} ({q.structure})")
    for ax in names:
        rep = check_axioms(q, ax, samples=args.samples, seed=args.seed)
        required = ax in REQUIRED_AXIOMS[q.structure]
        status = "pass" if rep.passed else "fail"
        note = f"{rep.checked} checks" if rep.passed else f"witness {str(rep).split('witness=', 1)[1]}"
        out.emit(ax, f"{status} ({note}){'' if required else ' [not required]'}")
        failed_required |= required and not rep.passed
    return 1 if failed_required else 0


def _belief_eval(m: TangleMachine, args, inputs: Sequence, out: Out) -> int:
    p = ip_params(args)
    try:
        net = bn.BeliefNetwork(m, dict(zip(m.inputs, inputs)))
        vals = bn.propagate_network(net, p)
    except DiagramError as e:
        raise DomainFailure(f"computation cannot take place: {e}") from None
    out.emit("status", DETERMINED)
    out.emit("outputs", [vals[r] for r in m.outputs])
    return 0


def cmd_eval(args, out: Out) -> int:
    m = load_machine(args.machine)
    qname = args.quagma or m.quagma
    if not qname:
        raise UsageError("machine names no quagma; pass --quagma")
    carrier = "belief" if qname == "belief" else get_quagma(qname).carrier
    try:
        inputs = [colour_arg(t, carrier) for t in split_top(args.inputs or "")]
    except ValueError as e:
        raise UsageError(str(e)) from None
    if len(inputs) != len(m.inputs):
        raise UsageError(f"machine has {len(m.inputs)} inputs, got {len(inputs)}")
    if carrier == "belief":
        return _belief_eval(m, args, inputs, out)
    agents = {}
    for spec in args.agent or []:
        reg, sep, val = spec.partition("=")
        if not sep:
            raise UsageError(f"--agent expects REGISTER=COLOUR, got {spec!r}")
        try:
            agents[register_ref(m, reg.strip())] = colour_arg(val, carrier)
        except ValueError as e:
            raise UsageError(str(e)) from None
    try:
        col = propagate(m, get_quagma(qname), dict(zip(m.inputs, inputs)), agents)
    except (KindError, ValueError) as e:
        raise UsageError(str(e)) from None
    except ZeroDivisionError as e:
        raise DomainFailure(f"computation cannot take place: {e}") from None
    out.emit("status", col.status)
    if col.status == INCONSISTENT:
        r, a, b = col.witness
        raise DomainFailure(
            f"computation cannot take place: register {r} is both {out.value(a)} and {out.value(b)}"
        )
    missing = [r for r in m.outputs if r not in col.values]
    if missing:
        raise DomainFailure(f"computation cannot take place: outputs {missing} undetermined")
    out.emit("outputs", [col.values[r] for r in m.outputs])
    return 0


def _gate_kind(name: str, backend: str, n: int) -> gates.GateKind:
    suffix = "Q" if backend == "quagma" else "F3"
    kind = {"not": "Not", "and": "And", "mux": "Mux"}[name] + suffix
    return gates.GateKind(kind, n if name == "mux" else 0)


def cmd_compile_circuit(args, out: Out) -> int:
    if (args.circuit is None) == (args.gate is None):
        raise UsageError("give exactly one of --circuit or --gate")
    if args.gate:
        m = gates.build_gate(_gate_kind(args.gate, args.backend, args.fanout))
    else:
        try:
            c = gates.parse_circuit(read_text(args.circuit))
        except gates.CircuitError as e:
            raise UsageError(str(e)) from None
        m = gates.compile_circuit(c, args.backend)
    write_or_print(serialize(m), args.output)
    return 0


def _tm_spec(args) -> turing.TMSpec:
    if (args.spec is None) == (args.example is None):
        raise UsageError("give exactly one of --spec or --example")
    if args.example:
        return turing.unary_increment()
    try:
        return turing.parse_tm(read_text(args.spec))
    except turing.TMError as e:
        raise UsageError(f"{args.spec}: {e}") from None


def cmd_compile_tm(args, out: Out) -> int:
    spec = _tm_spec(args)
    m = turing.compile_tm(spec, args.tape_length, args.steps, closed=args.closed)
    write_or_print(serialize(m), args.output)
    return 0


def _tape(text: str, m: int | None) -> tuple[int, ...]:
    cells = []
    for ch in text.strip():
        if ch == "_":
            cells.append(turing.BLANK)
        elif ch in "012":
            cells.append(int(ch))
        else:
            raise UsageError(f"tape symbols are 0, 1, 2 or _ (blank), got {ch!r}")
    if m is not None:
        if len(cells) > m:
            raise UsageError(f"tape longer than --tape-length {m}")
        cells += [turing.BLANK] * (m - len(cells))
    if not cells:
        raise UsageError("empty tape")
    return tuple(cells)


def _tape_str(tape: Iterable[int]) -> str:
    return "".join("_" if c == turing.BLANK else str(c) for c in tape)


def cmd_run_tm(args, out: Out) -> int:
    spec = _tm_spec(args)
    tape = _tape(args.tape, args.tape_length)
    state = spec.q0 if args.state is None else args.state
    if not 1 <= args.head <= len(tape):
        raise UsageError(f"head must lie in 1..{len(tape)}")
    config = turing.TMConfig(state, tape, args.head)
    try:
        reference = turing.reference_trajectory(spec, config, args.steps)
    except turing.HeadEscape as e:
        reference = None
        out.emit("reference", f"head escapes ({e})")
    col, traj = turing.compiled_trajectory(spec, config, args.steps)
    out.emit("status", col.status)
    for t, cfg in enumerate(traj):
        out.emit(f"step{t}", f"state={cfg.state} head={cfg.head} tape={_tape_str(cfg.tape)}")
    if col.status != DETERMINED:
        raise DomainFailure("computation cannot take place: the compiled machine is not determined")
    match = reference is not None and traj == reference
    out.emit("matches_reference", match)
    return 0 if match else 1


def cmd_braidip(args, out: Out) -> int:
    p = ip_params(args)
    if args.mode == "ladder":
        closed = bn.ladder_closed_form(args.chi, p)
        net = bn.ladder_network(args.chi)
        iterative = bn.propagate_network(net, p)[net.decider]
        out.emit("chi", args.chi)
        out.emit("true", closed.a)
        out.emit("false", closed.b)
        out.emit("closed_form_matches_propagation", closed == iterative)
        out.emit("decides", bn.ladder_decides(args.chi, p))
    elif args.mode == "example":
        for side, net in zip(("left", "right"), bn.equivalent_networks()):
            vals = bn.propagate_network(net, p)
            for r in net.machine.outputs:
                out.emit(f"{side}.{net.machine.names[r]}", vals[r])
    else:
        b = bn.chi_bounds(p)
        out.emit("exact_interval", b.exact)
        out.emit("stated_interval", b.stated)
        out.emit("stated_contained", b.stated_contained)
        out.emit("integer_chi", b.integers())
    return 0


def cmd_hopf_chernoff(args, out: Out) -> int:
    try:
        p = bn.hc_params(args.c, args.eps, args.delta)
    except ValueError as e:
        raise UsageError(str(e)) from None
    make = bn.hopf_chernoff_solved_beliefs if args.solved else bn.hopf_chernoff_beliefs
    try:
        alpha, beta = make(args.c, args.eps, args.delta)
    except ValueError as e:
        raise DomainFailure(f"agent beliefs out of range: {e}") from None
    out1, out2 = bn.hopf_chernoff_steady(alpha, beta, p)
    out.emit("alpha", alpha)
    out.emit("beta", beta)
    out.emit("steady_out1", out1)
    out.emit("steady_out2", out2)
    out.emit("margin", args.eps * args.delta / 12)
    chi = args.chi or bn.hopf_chernoff_iterations(args.eps, args.delta, args.c)
    it1, _ = bn.hopf_chernoff_iterate(bn.UNSURE, bn.UNSURE, alpha, beta, p, chi)
    out.emit("chi", chi)
    out.emit("iterated_out1", it1)
    return 0


def cmd_pcp_run(args, out: Out) -> int:
    seed = resolve_seed(args, out)
    p = ip_params(args)
    member = args.case == "member"
    res = bn.pcp_run(p, member, args.trials, seed, chi=args.chi, jobs=args.jobs)
    out.emit("case", args.case)
    out.emit("seed", seed)
    out.emit("trials", res.trials)
    out.emit("accepts", res.accepts)
    out.emit("rate", res.rate)
    out.emit("stderr", res.stderr)
    out.emit("exact", bn.pcp_exact(p, member, args.chi))
    if not member:
        out.emit("soundness_bound", bn.soundness_bound(p.s))
    return 0


def _semantics(m: TangleMachine, args):
    if m.quagma == "belief":
        return rewrite.BeliefSemantics(ip_params(args))
    return rewrite.semantics_for(m)


def cmd_rewrite(args, out: Out) -> int:
    m = load_machine(args.machine)
    try:
        sem = _semantics(m, args)
        if args.script:
            m2 = rewrite.apply_script(m, read_text(args.script), sem)
            out_text = serialize(m2)
            if not rewrite.check_bisimilar(m, m2, sem):
                raise DomainFailure("scripted rewrite changed the computation")
            write_or_print(out_text, args.output)
            return 0
        if args.explore is not None:
            found = rewrite.explore_equivalents(m, sem, args.explore, args.max_machines)
            out.emit("equivalent_machines", len(found))
            for k, other in enumerate(found):
                out.emit(f"machine{k}", f"{len(other.interactions)} interactions, {len(other.registers)} registers")
            return 0
        for k, (move, site) in enumerate(rewrite.find_moves(m, sem)):
            out.emit(f"site{k}", f"{move} {site}")
    except rewrite.RewriteError as e:
        raise UsageError(str(e)) from None
    return 0


def cmd_zk_check(args, out: Out) -> int:
    p = ip_params(args)
    if (args.example is None) == (args.machine is None):
        raise UsageError("give exactly one of --example or --machine")
    if args.example:
        left, right = bn.zk_networks()
        net = right if args.example == "right" else left
    else:
        m = load_machine(args.machine)
        try:
            beliefs = [bn.Belief.parse(t) for t in split_top(args.inputs or "")]
            net = bn.BeliefNetwork(m, dict(zip(m.inputs, beliefs)), m.outputs[0] if m.outputs else None)
        except (ValueError, DiagramError) as e:
            raise UsageError(str(e)) from None
    try:
        verdict = rewrite.is_zero_knowledge(net, p, args.kappa, args.word_len, args.budget)
    except bn.CyclicNetworkError as e:
        raise DomainFailure(f"computation cannot take place: {e}") from None
    vals = bn.propagate_network(net, p)
    for r in net.machine.registers:
        if r in net.machine.names:
            out.emit(net.machine.names[r], vals[r])
    out.emit("verdict", verdict.verdict)
    if verdict.reason:
        out.emit("reason", verdict.reason)
    return 1 if verdict.verdict == "not_deciding" else 0


def cmd_export_dot(args, out: Out) -> int:
    if (args.machine is None) == (args.gate is None):
        raise UsageError("give exactly one of --machine or --gate")
    m = load_machine(args.machine) if args.machine else gates.build_gate(_gate_kind(args.gate, args.backend, args.fanout))
    write_or_print(to_dot(m), args.output)
    return 0


# ---------------------------------------------------------------- parser


def _ip_flags(p: argparse.ArgumentParser, c="1", s="1/2", delta="1/2") -> None:
    p.add_argument("--c", type=fraction_arg, default=Fraction(c), help=f"completeness (default {c})")
    p.add_argument("--s", type=fraction_arg, default=Fraction(s), help=f"soundness (default {s})")
    p.add_argument("--delta", type=fraction_arg, default=Fraction(delta), help=f"channel reliability (default {delta})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--float", action="store_true", help="render rationals as decimals")
    common.add_argument("--format", choices=("text", "kv"), default="text", help="output style (default text)")

    parser = argparse.ArgumentParser(prog="tangle", description="Tangle machine workbench.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    p = add("axioms", "Check quagma axioms on samples (exhaustive on finite carriers).")
    p.add_argument("--quagma", required=True, choices=sorted(QUAGMAS))
    p.add_argument("--axiom", choices=AXIOMS, help="check one axiom (default all)")
    p.add_argument("--samples", type=positive_int, default=500, help="random triples per axiom (default 500)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sampling seed")
    p.set_defaults(func=cmd_axioms)

    p = add("eval", "Propagate colours through a machine file.")
    p.add_argument("--machine", required=True, help="machine text file")
    p.add_argument("--quagma", choices=sorted(QUAGMAS) + ["belief"], help="override the file's quagma")
    p.add_argument("--inputs", help="comma separated input colours (A0, A1, A0+A1, ZERO, p/q, f0.., [[a,b],[c,d]], a|b)")
    p.add_argument("--agent", action="append", metavar="REG=COLOUR", help="colour a free agent (repeatable)")
    _ip_flags(p)
    p.set_defaults(func=cmd_eval)

    p = add("compile-circuit", "Compile a boolean circuit or a single gate to a machine.")
    p.add_argument("--circuit", help="circuit text file")
    p.add_argument("--gate", choices=("not", "and", "mux"), help="emit one gate instead")
    p.add_argument("--fanout", type=int, default=2, help="multiplexer outputs (default 2)")
    p.add_argument("--backend", choices=gates.BACKENDS, default="quagma")
    p.add_argument("-o", "--output", help="write here instead of stdout")
    p.set_defaults(func=cmd_compile_circuit)

    for name, help_ in (
        ("compile-tm", "Compile a Turing machine to a tangle machine."),
        ("run-tm", "Run a compiled Turing machine and compare with the interpreter."),
    ):
        p = add(name, help_)
        p.add_argument("--spec", help="TM text file")
        p.add_argument("--example", choices=("unary-increment",), help="built-in machine")
        p.add_argument("--steps", type=positive_int, default=1, help="number of steps (default 1)")
        if name == "compile-tm":
            p.add_argument("--tape-length", type=positive_int, required=True, help="tape cells m")
            p.add_argument("--closed", action="store_true", help="feed outputs back to inputs")
            p.add_argument("-o", "--output", help="write here instead of stdout")
            p.set_defaults(func=cmd_compile_tm)
        else:
            p.add_argument("--tape", required=True, help="initial tape, symbols 0 1 2 or _ for blank")
            p.add_argument("--tape-length", type=positive_int, help="pad the tape with blanks to this length")
            p.add_argument("--head", type=positive_int, default=1, help="head position, 1-based (default 1)")
            p.add_argument("--state", type=positive_int, help="initial state (default q0)")
            p.set_defaults(func=cmd_run_tm)

    p = add("braidip", "Deformed interactive-proof belief computations.")
    p.add_argument("mode", choices=("ladder", "example", "bounds"))
    p.add_argument("--chi", type=positive_int, default=4, help="ladder length (default 4)")
    _ip_flags(p)
    p.set_defaults(func=cmd_braidip)

    p = add("hopf-chernoff", "Steady state of the recursive two-strand verifier.")
    p.add_argument("--c", type=fraction_arg, default=Fraction(1), help="completeness (default 1)")
    p.add_argument("--eps", type=fraction_arg, default=Fraction(1, 4), help="gap c - s (default 1/4)")
    p.add_argument("--delta", type=fraction_arg, default=Fraction(1, 2), help="channel reliability (default 1/2)")
    p.add_argument("--chi", type=positive_int, help="iterations (default: enough to converge)")
    p.add_argument("--solved", action="store_true", help="use agent beliefs solving both margin equations")
    p.set_defaults(func=cmd_hopf_chernoff)

    p = add("pcp-run", "Monte-Carlo run of the certificate-level verifier.")
    p.add_argument("--case", choices=("member", "nonmember"), required=True)
    p.add_argument("--trials", type=positive_int, default=100_000)
    p.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV})")
    p.add_argument("--chi", type=positive_int, default=20, help="iterations (default 20)")
    p.add_argument("--jobs", type=positive_int, default=1, help="worker processes (default 1)")
    _ip_flags(p, c="1", s="3/4", delta="99/100")
    p.set_defaults(func=cmd_pcp_run)

    p = add("rewrite", "List, apply or explore Reidemeister-type moves.")
    p.add_argument("--machine", required=True, help="machine text file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true", help="list applicable moves (default)")
    g.add_argument("--script", help="file of `move <name> at <site-id>` lines")
    g.add_argument("--explore", type=int, metavar="BUDGET", help="enumerate machines within BUDGET moves")
    p.add_argument("--max-machines", type=positive_int, default=256)
    p.add_argument("-o", "--output", help="write the rewritten machine here")
    _ip_flags(p)
    p.set_defaults(func=cmd_rewrite)

    p = add("zk-check", "Decide whether a belief machine is zero-knowledge.")
    p.add_argument("--example", choices=("left", "right"), help="built-in example machine")
    p.add_argument("--machine", help="belief machine file; decider is its first output")
    p.add_argument("--inputs", help="initial beliefs a|b, comma separated")
    p.add_argument("--kappa", type=fraction_arg, default=Fraction(1), help="decision exponent (default 1)")
    p.add_argument("--word-len", type=positive_int, default=16, help="input word length (default 16)")
    p.add_argument("--budget", type=int, default=2, help="move budget for the search (default 2)")
    _ip_flags(p, c="1", s="1/2", delta="3/4")
    p.set_defaults(func=cmd_zk_check)

    p = add("export-dot", "Write Graphviz text for a machine.")
    p.add_argument("--machine", help="machine text file")
    p.add_argument("--gate", choices=("not", "and", "mux"))
    p.add_argument("--fanout", type=int, default=2)
    p.add_argument("--backend", choices=gates.BACKENDS, default="quagma")
    p.add_argument("-o", "--output", help="write here instead of stdout")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    out = Out(args.format, args.float)
    try:
        return args.func(args, out)
    except UsageError as e:
        print(f"tangle {args.command}: error: {e}", file=sys.stderr)
        return 2
    except DomainFailure as e:
        print(f"tangle {args.command}: {e}", file=sys.stderr)
        return 1
    except (ValueError, turing.TMError, gates.CircuitError) as e:
        print(f"tangle {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
