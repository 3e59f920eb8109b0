"""Empirical noninterference harness.

If the topology admits no flow path from the address holding a declared
input to an observer address, varying the input's value must not change
anything the observer can see.  The observation is the observer's final
residual value together with the sends and receives it participates in,
in order, with payloads; schedules are shared across input values so
runs are comparable.

A reachable pair yields the verdict FlowPermitted and no claim is made.
An InterferenceFound verdict always carries a replayable witness: two
input values and the schedule under which their observations diverge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .netsim import (
    NetError, RandomPolicy, RoundRobin, RunResult, SchedulerPolicy,
    policy_str, run,
)
from .parser import Program
from .printer import expr_str, path_str, type_str
from .projection import SKIP, Network, local_str, project_network
from .syntax import (
    Annot, Arrow, Believes, Expr, Inl, Inr, Lam, Located, Pair, Path,
    Product, Sum, Type, Unit, UnitVal, split_stack, substitute,
)
from .topology import Topology, flow_reachable
from .typecheck import Checker, TypeCheckError, check_program, resolve_topology
from .normalize import is_positive_value


@dataclass(frozen=True)
class NIConfig:
    input_name: str
    observer: Path
    values: tuple[Expr, ...]
    trials: int = 10
    seed: int = 0


@dataclass
class Witness:
    value_a: Expr
    value_b: Expr
    policy: SchedulerPolicy
    observation_a: tuple
    observation_b: tuple

    def describe(self) -> str:
        return (f"inputs {expr_str(self.value_a)} vs {expr_str(self.value_b)} "
                f"diverge under schedule {policy_str(self.policy)}")


@dataclass
class Verdict:
    kind: str  # Secure | InterferenceFound | FlowPermitted
    source: Path
    observer: Path
    runs: int = 0
    witness: Optional[Witness] = None
    detail: str = ""

    def __str__(self) -> str:
        if self.kind == "FlowPermitted":
            return (f"FlowPermitted: {path_str(self.source)} can reach "
                    f"{path_str(self.observer)}; no claim made")
        if self.kind == "Secure":
            return (f"Secure: {self.runs} runs, observer {path_str(self.observer)} "
                    f"saw identical observations for every input value")
        return f"InterferenceFound: {self.witness.describe()}"


def observation(result: RunResult, observer: Path) -> tuple:
    """What the observer saw: its residual value and its own comm events."""
    events = tuple(
        (ev.action, ev.peer, ev.payload)
        for ev in result.trace
        if ev.address == observer and ev.action in ("Send", "Recv"))
    residual = result.values.get(observer, SKIP)
    return local_str(residual), events


def elaborate_value(value: Expr, ty: Type) -> Expr:
    """Annotate the non-inferable parts of a canonical value of `ty`.

    Injections and functions only check against a known type; a value
    substituted into a program must infer on its own, so they get an
    annotation recording the type they were declared at.  The function
    case recurses into the body, so it applies only to values whose
    bodies are themselves canonical.
    """
    match value, ty:
        case UnitVal(), Unit():
            return value
        case Pair(left, right), Product(a, b):
            return Pair(elaborate_value(left, a), elaborate_value(right, b))
        case Inl(inner), Sum(a, _):
            return Annot(Inl(elaborate_value(inner, a)), ty)
        case Inr(inner), Sum(_, b):
            return Annot(Inr(elaborate_value(inner, b)), ty)
        case Located(agent, body), Believes(tyagent, inner_ty) if agent == tyagent:
            return Located(agent, elaborate_value(body, inner_ty))
        case Lam(var, body), Arrow(_, cod):
            return Annot(Lam(var, elaborate_value(body, cod)), ty)
    raise ValueError(f"{expr_str(value)} is not a canonical value of type "
                     f"{type_str(ty)}")


def _substituted(program: Program, name: str, value: Expr) -> Program:
    inputs = tuple((n, t) for n, t in program.inputs if n != name)
    defs = tuple((n, t, substitute(b, name, value)) for n, t, b in program.defs)
    return replace(program, inputs=inputs, defs=defs,
                   main_expr=substitute(program.main_expr, name, value))


def _validate(program: Program, cfg: NIConfig,
              topology: Topology) -> tuple[Type, list[Expr]]:
    errors = check_program(program, topology)
    if errors:
        raise ValueError("program does not typecheck: "
                         + "; ".join(str(e) for e in errors))
    input_ty = None
    for name, ty in program.inputs:
        if name == cfg.input_name:
            input_ty = ty
    if input_ty is None:
        raise ValueError(f"no declared input named {cfg.input_name!r}")
    if len(cfg.values) < 2:
        raise ValueError("need at least two input values to vary")
    checker = Checker(topology)
    elaborated: list[Expr] = []
    for value in cfg.values:
        if not is_positive_value(value):
            raise ValueError(f"input value {expr_str(value)} is not a "
                             "closed positive value")
        rich = elaborate_value(value, input_ty)
        try:
            checker.check((), rich, input_ty)
        except TypeCheckError as err:
            raise ValueError(f"input value {expr_str(value)} does not have "
                             f"the declared type: {err}") from None
        elaborated.append(rich)
    return input_ty, elaborated


def shared_schedules(cfg: NIConfig) -> list[SchedulerPolicy]:
    return [RoundRobin()] + [RandomPolicy(cfg.seed + i) for i in range(cfg.trials)]


def compare_observations(program: Program, cfg: NIConfig,
                         topology: Topology, fuel: int = 100_000,
                         ) -> tuple[Optional[Witness], int]:
    """Run every input value under shared schedules; first divergence wins.

    This is the detection core, independent of the reachability gate, so
    its positive behavior can be exercised directly.
    """
    input_ty = dict(program.inputs)[cfg.input_name]
    networks: list[tuple[Expr, Network]] = []
    for value in cfg.values:
        rich = elaborate_value(value, input_ty)
        networks.append((value, project_network(_substituted(program, cfg.input_name, rich),
                                                topology)))
    runs = 0
    for policy in shared_schedules(cfg):
        baseline: Optional[tuple[Expr, tuple]] = None
        for value, network in networks:
            try:
                result = run(network, policy, fuel)
            except NetError as err:
                raise ValueError(f"run failed under {policy_str(policy)} "
                                 f"for input {expr_str(value)}: {err}") from None
            runs += 1
            obs = observation(result, cfg.observer)
            if baseline is None:
                baseline = (value, obs)
            elif obs != baseline[1]:
                return Witness(baseline[0], value, policy, baseline[1], obs), runs
    return None, runs


def ni_check(program: Program, cfg: NIConfig,
             topology: Optional[Topology] = None, fuel: int = 100_000,
             base_dir: str = ".") -> Verdict:
    if topology is None:
        topology = resolve_topology(program, base_dir=base_dir)
    input_ty, elaborated = _validate(program, cfg, topology)
    source, _ = split_stack(input_ty)
    universe: set[Path] = set()
    for rich in elaborated:
        network = project_network(_substituted(program, cfg.input_name, rich),
                                  topology)
        universe |= set(network.universe)
    universe.add(cfg.observer)
    if flow_reachable(topology, source, cfg.observer, universe):
        return Verdict("FlowPermitted", source, cfg.observer)
    witness, runs = compare_observations(program, cfg, topology, fuel)
    if witness is None:
        return Verdict("Secure", source, cfg.observer, runs=runs)
    return Verdict("InterferenceFound", source, cfg.observer, runs=runs,
                   witness=witness)
