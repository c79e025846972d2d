"""Game specifications for two-player dynamic Stackelberg games.

Array conventions used throughout the package::

    q_l[x_l, a_l, a_f, x_l']    leader type kernel
    q_f[x_f, a_l, a_f, x_f']    follower type kernel
    r_l[x_l, x_f, a_l, a_f]     leader reward
    r_f[x_l, x_f, a_l, a_f]     follower reward

A game whose leader has no private type uses a one-element dummy state
with a self-loop kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

__all__ = [
    "GameSpec",
    "ParseError",
    "SpecValidationError",
    "validate_spec",
    "load_spec",
    "save_spec",
    "dump_spec",
    "parse_spec",
    "example_security_game",
]

FORMAT_TAG = "mpse-game/1"
PROB_TOL = 1e-12


class ParseError(ValueError):
    """Raised when a game-spec document cannot be parsed."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SpecValidationError(ValueError):
    """Raised when a parsed spec violates the game invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid game spec:\n  " + "\n  ".join(self.violations))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Immutable description of a finite two-player dynamic Stackelberg game.

    ``horizon`` is a positive int, or ``None`` for the infinite-horizon game.
    ``r_l_steps``/``r_f_steps`` optionally hold one reward tensor per stage
    ``t = 1..T``; when absent the rewards are time-homogeneous.
    """

    x_l_states: tuple[str, ...]
    x_f_states: tuple[str, ...]
    a_l_actions: tuple[str, ...]
    a_f_actions: tuple[str, ...]
    q_l: np.ndarray
    q_f: np.ndarray
    r_l: np.ndarray
    r_f: np.ndarray
    delta: float
    horizon: int | None
    prior_l: np.ndarray
    prior_f: np.ndarray
    r_l_steps: tuple[np.ndarray, ...] | None = None
    r_f_steps: tuple[np.ndarray, ...] | None = None
    name: str = field(default="game")

    def __post_init__(self):
        for attr in ("x_l_states", "x_f_states", "a_l_actions", "a_f_actions"):
            object.__setattr__(self, attr, tuple(str(s) for s in getattr(self, attr)))
        for attr in ("q_l", "q_f", "r_l", "r_f", "prior_l", "prior_f"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        # one-sided per-step rewards: the other player keeps its base tensor each stage
        if (self.r_l_steps is None) != (self.r_f_steps is None):
            n = len(self.r_l_steps if self.r_l_steps is not None else self.r_f_steps)
            if self.r_l_steps is None:
                object.__setattr__(self, "r_l_steps", (self.r_l,) * n)
            else:
                object.__setattr__(self, "r_f_steps", (self.r_f,) * n)
        for attr in ("r_l_steps", "r_f_steps"):
            steps = getattr(self, attr)
            if steps is not None:
                object.__setattr__(self, attr, tuple(_frozen(s) for s in steps))
        object.__setattr__(self, "delta", float(self.delta))
        if self.horizon is not None:
            object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def n_xl(self) -> int:
        return len(self.x_l_states)

    @property
    def n_xf(self) -> int:
        return len(self.x_f_states)

    @property
    def n_al(self) -> int:
        return len(self.a_l_actions)

    @property
    def n_af(self) -> int:
        return len(self.a_f_actions)

    @property
    def is_infinite(self) -> bool:
        return self.horizon is None

    @property
    def time_homogeneous(self) -> bool:
        return self.r_l_steps is None and self.r_f_steps is None

    def rewards(self, t: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Leader and follower reward tensors at stage ``t`` (1-based)."""
        r_l = self.r_l if self.r_l_steps is None else self.r_l_steps[t - 1]
        r_f = self.r_f if self.r_f_steps is None else self.r_f_steps[t - 1]
        return r_l, r_f

    def max_abs_reward(self) -> tuple[float, float]:
        ls = [self.r_l] + list(self.r_l_steps or ())
        fs = [self.r_f] + list(self.r_f_steps or ())
        return (max(float(np.abs(r).max()) for r in ls),
                max(float(np.abs(r).max()) for r in fs))

    def with_horizon(self, horizon: int | None) -> GameSpec:
        return replace(self, horizon=horizon)

    def swapped_payoffs(self) -> GameSpec:
        """The same game with leader and follower reward tensors exchanged."""
        return replace(self, r_l=self.r_f, r_f=self.r_l,
                       r_l_steps=self.r_f_steps, r_f_steps=self.r_l_steps)

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        scalars = ("x_l_states", "x_f_states", "a_l_actions", "a_f_actions",
                   "delta", "horizon", "name")
        if any(getattr(self, s) != getattr(other, s) for s in scalars):
            return False
        for s in ("q_l", "q_f", "r_l", "r_f", "prior_l", "prior_f"):
            a, b = getattr(self, s), getattr(other, s)
            if a.shape != b.shape or not np.array_equal(a, b):
                return False
        for s in ("r_l_steps", "r_f_steps"):
            a, b = getattr(self, s), getattr(other, s)
            if (a is None) != (b is None):
                return False
            if a is not None and (len(a) != len(b) or not all(
                    x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))):
                return False
        return True

    __hash__ = None


def _check_kernel(name: str, q: np.ndarray, shape: tuple[int, ...]) -> list[str]:
    if q.shape != shape:
        return [f"{name}: expected shape {shape}, got {q.shape}"]
    out = []
    if not np.all(np.isfinite(q)):
        out.append(f"{name}: non-finite entries")
        return out
    for idx in np.ndindex(*shape[:-1]):
        row = q[idx]
        if np.any(row < 0):
            out.append(f"{name}{list(idx)}: negative probability {row.min()!r}")
        s = row.sum()
        if abs(s - 1.0) > PROB_TOL:
            out.append(f"{name}{list(idx)}: row sums to {s!r}, expected 1")
    return out


def _check_dist(name: str, p: np.ndarray, n: int) -> list[str]:
    if p.shape != (n,):
        return [f"{name}: expected shape ({n},), got {p.shape}"]
    out = []
    if np.any(p < 0):
        out.append(f"{name}: negative probability")
    if abs(p.sum() - 1.0) > PROB_TOL:
        out.append(f"{name}: sums to {p.sum()!r}, expected 1")
    return out


def validate_spec(spec: GameSpec) -> list[str]:
    """Return the list of invariant violations; empty means valid."""
    errs = []
    for attr in ("x_l_states", "x_f_states", "a_l_actions", "a_f_actions"):
        if len(getattr(spec, attr)) == 0:
            errs.append(f"{attr}: must be nonempty (use a one-element dummy set)")
    if errs:
        return errs
    nxl, nxf, nal, naf = spec.n_xl, spec.n_xf, spec.n_al, spec.n_af
    errs += _check_kernel("q_l", spec.q_l, (nxl, nal, naf, nxl))
    errs += _check_kernel("q_f", spec.q_f, (nxf, nal, naf, nxf))
    rshape = (nxl, nxf, nal, naf)
    for name in ("r_l", "r_f"):
        r = getattr(spec, name)
        if r.shape != rshape:
            errs.append(f"{name}: expected shape {rshape}, got {r.shape}")
        elif not np.all(np.isfinite(r)):
            errs.append(f"{name}: non-finite entries")
    for name in ("r_l_steps", "r_f_steps"):
        steps = getattr(spec, name)
        if steps is None:
            continue
        if spec.horizon is None:
            errs.append(f"{name}: per-step rewards require a finite horizon")
        elif len(steps) != spec.horizon:
            errs.append(f"{name}: {len(steps)} stages given, horizon is {spec.horizon}")
        for t, r in enumerate(steps, start=1):
            if r.shape != rshape:
                errs.append(f"{name}[{t}]: expected shape {rshape}, got {r.shape}")
    errs += _check_dist("prior_l", spec.prior_l, nxl)
    errs += _check_dist("prior_f", spec.prior_f, nxf)
    if not (0.0 < spec.delta <= 1.0):
        errs.append(f"delta: must lie in (0, 1], got {spec.delta!r}")
    if spec.horizon is None:
        if spec.delta >= 1.0:
            errs.append("discount must be < 1 for infinite horizon")
    elif spec.horizon < 1:
        errs.append(f"horizon: must be a positive integer, got {spec.horizon}")
    return errs


def example_security_game(delta: float = 0.6, horizon: int | None = None,
                          prior_f=(0.5, 0.5)) -> GameSpec:
    """Repeated security game with a static binary attacker type.

    Defender actions D1, D2 are leader actions 0, 1; attacker actions A1, A2
    are follower actions 0, 1. Each payoff pair is (defender, attacker).
    """
    # payoff[x_f][a_l][a_f] = (leader, follower)
    payoff = [
        [[(2, 1), (4, 0)],
         [(1, 0), (3, 2)]],
        [[(3, 2), (2, 0)],
         [(0, 1), (1, 1)]],
    ]
    p = np.array(payoff, dtype=float)
    r_l = p[None, ..., 0]
    r_f = p[None, ..., 1]
    q_l = np.ones((1, 2, 2, 1))
    q_f = np.zeros((2, 2, 2, 2))
    for x in range(2):
        q_f[x, :, :, x] = 1.0
    return GameSpec(
        x_l_states=("none",), x_f_states=("low", "high"),
        a_l_actions=("D1", "D2"), a_f_actions=("A1", "A2"),
        q_l=q_l, q_f=q_f, r_l=r_l, r_f=r_f, delta=delta, horizon=horizon,
        prior_l=[1.0], prior_f=prior_f, name="security",
    )


# --- text format ---------------------------------------------------------

def _node_lines(text: str) -> dict[str, int]:
    """Map dotted top-level/second-level keys to their source line."""
    lines: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for k, v in root.value:
        lines[k.value] = k.start_mark.line + 1
        if isinstance(v, yaml.MappingNode):
            for k2, _ in v.value:
                lines[f"{k.value}.{k2.value}"] = k2.start_mark.line + 1
    return lines


def _to_float(x: Any, where: str, lines: dict[str, int]) -> float:
    if isinstance(x, bool):
        raise ParseError(f"expected a number, got {x!r}", where, _line_for(where, lines))
    try:
        return float(x)
    except (TypeError, ValueError):
        raise ParseError(f"expected a number, got {x!r}", where, _line_for(where, lines)) from None


def _line_for(where: str, lines: dict[str, int]) -> int | None:
    key = where.split("[")[0]
    while key:
        if key in lines:
            return lines[key]
        key = key.rpartition(".")[0]
    return None


def _dense(value: Any, shape: tuple[int, ...], where: str, lines) -> np.ndarray:
    """Parse a nested list of exact ``shape`` into a float array."""
    out = np.empty(shape, dtype=float)

    def fill(v, depth, idx):
        loc = where + "".join(f"[{i}]" for i in idx)
        if depth == len(shape):
            out[idx] = _to_float(v, loc, lines)
            return
        if not isinstance(v, list):
            raise ParseError(f"expected a list of length {shape[depth]}", loc,
                             _line_for(where, lines))
        if len(v) != shape[depth]:
            raise ParseError(
                f"expected {shape[depth]} entries, found {len(v)} (missing or extra entry)",
                loc, _line_for(where, lines))
        for i, item in enumerate(v):
            fill(item, depth + 1, idx + (i,))

    fill(value, 0, ())
    return out


def _require(doc: dict, key: str, where: str, lines):
    if not isinstance(doc, dict) or key not in doc:
        full = f"{where}.{key}" if where else key
        raise ParseError("missing required field", full, _line_for(where or key, lines))
    return doc[key]


def parse_spec(text: str, validate: bool = True) -> GameSpec:
    """Parse a game-spec document. See ``docs/spec_format.md`` for the grammar."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], None,
                         mark.line + 1 if mark is not None else None) from None
    if not isinstance(doc, dict):
        raise ParseError("document must be a mapping")
    lines = _node_lines(text)

    fmt = doc.get("format", FORMAT_TAG)
    if fmt != FORMAT_TAG:
        raise ParseError(f"unsupported format {fmt!r}", "format", lines.get("format"))

    states = _require(doc, "states", "", lines)
    actions = _require(doc, "actions", "", lines)
    x_l = _require(states, "leader", "states", lines)
    x_f = _require(states, "follower", "states", lines)
    a_l = _require(actions, "leader", "actions", lines)
    a_f = _require(actions, "follower", "actions", lines)
    for name, v in (("states.leader", x_l), ("states.follower", x_f),
                    ("actions.leader", a_l), ("actions.follower", a_f)):
        if not isinstance(v, list) or not v:
            raise ParseError("expected a nonempty list of labels", name, lines.get(name))
    nxl, nxf, nal, naf = len(x_l), len(x_f), len(a_l), len(a_f)

    kernels = _require(doc, "kernels", "", lines)
    q_l = _dense(_require(kernels, "leader", "kernels", lines),
                 (nxl, nal, naf, nxl), "kernels.leader", lines)
    q_f = _dense(_require(kernels, "follower", "kernels", lines),
                 (nxf, nal, naf, nxf), "kernels.follower", lines)

    rshape = (nxl, nxf, nal, naf)
    rewards = _require(doc, "rewards", "", lines)
    r_l = _dense(_require(rewards, "leader", "rewards", lines), rshape, "rewards.leader", lines)
    r_f = _dense(_require(rewards, "follower", "rewards", lines), rshape, "rewards.follower", lines)
    r_l_steps = r_f_steps = None
    if "per_step" in rewards:
        per = rewards["per_step"]
        if not isinstance(per, list):
            raise ParseError("expected a list of stage reward mappings", "rewards.per_step",
                             lines.get("rewards.per_step"))
        r_l_steps = tuple(_dense(_require(s, "leader", f"rewards.per_step[{i}]", lines),
                                 rshape, f"rewards.per_step[{i}].leader", lines)
                          for i, s in enumerate(per))
        r_f_steps = tuple(_dense(_require(s, "follower", f"rewards.per_step[{i}]", lines),
                                 rshape, f"rewards.per_step[{i}].follower", lines)
                          for i, s in enumerate(per))

    delta = _to_float(_require(doc, "discount", "", lines), "discount", lines)
    h = _require(doc, "horizon", "", lines)
    if h == "infinite":
        horizon = None
    elif isinstance(h, int) and not isinstance(h, bool):
        horizon = h
    else:
        raise ParseError(f"expected a positive integer or 'infinite', got {h!r}",
                         "horizon", lines.get("horizon"))

    priors = _require(doc, "priors", "", lines)
    prior_l = _dense(_require(priors, "leader", "priors", lines), (nxl,), "priors.leader", lines)
    prior_f = _dense(_require(priors, "follower", "priors", lines), (nxf,), "priors.follower", lines)

    spec = GameSpec(
        x_l_states=tuple(x_l), x_f_states=tuple(x_f),
        a_l_actions=tuple(a_l), a_f_actions=tuple(a_f),
        q_l=q_l, q_f=q_f, r_l=r_l, r_f=r_f, delta=delta, horizon=horizon,
        prior_l=prior_l, prior_f=prior_f, r_l_steps=r_l_steps, r_f_steps=r_f_steps,
        name=str(doc.get("name", "game")),
    )
    if validate:
        errs = validate_spec(spec)
        if errs:
            raise SpecValidationError(errs)
    return spec


def load_spec(path: str | Path, validate: bool = True) -> GameSpec:
    return parse_spec(Path(path).read_text(), validate=validate)


def _nested(a: np.ndarray):
    # repr() of a Python float round-trips exactly through YAML
    return [float(v) for v in a] if a.ndim == 1 else [_nested(s) for s in a]


def dump_spec(spec: GameSpec) -> str:
    """Serialize ``spec`` to the text format; ``parse_spec`` inverts it exactly."""
    rewards: dict[str, Any] = {"leader": _nested(spec.r_l), "follower": _nested(spec.r_f)}
    if spec.r_l_steps is not None:
        rewards["per_step"] = [{"leader": _nested(a), "follower": _nested(b)}
                               for a, b in zip(spec.r_l_steps, spec.r_f_steps)]
    doc = {
        "format": FORMAT_TAG,
        "name": spec.name,
        "states": {"leader": list(spec.x_l_states), "follower": list(spec.x_f_states)},
        "actions": {"leader": list(spec.a_l_actions), "follower": list(spec.a_f_actions)},
        "kernels": {"leader": _nested(spec.q_l), "follower": _nested(spec.q_f)},
        "rewards": rewards,
        "discount": spec.delta,
        "horizon": "infinite" if spec.horizon is None else spec.horizon,
        "priors": {"leader": _nested(spec.prior_l), "follower": _nested(spec.prior_f)},
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def save_spec(spec: GameSpec, path: str | Path) -> None:
    Path(path).write_text(dump_spec(spec))
