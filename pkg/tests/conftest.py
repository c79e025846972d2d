import numpy as np
import pytest

from mpse.game import GameSpec, example_security_game


def random_kernel(rng, n, n_al, n_af, static=False):
    if static:
        return np.broadcast_to(np.eye(n)[:, None, None, :], (n, n_al, n_af, n)).copy()
    q = rng.random((n, n_al, n_af, n)) + 0.05
    return q / q.sum(axis=-1, keepdims=True)


def random_game(seed, n_xl=1, n_xf=2, n_al=2, n_af=2, *, static=True, delta=0.9,
                horizon=1, prior_f=None, scale=1.0):
    """Random game with uniform rewards in [0, scale)."""
    rng = np.random.default_rng(seed)
    if prior_f is None:
        prior_f = np.full(n_xf, 1.0 / n_xf)
    return GameSpec(
        x_l_states=tuple(f"l{i}" for i in range(n_xl)),
        x_f_states=tuple(f"f{i}" for i in range(n_xf)),
        a_l_actions=tuple(f"a{i}" for i in range(n_al)),
        a_f_actions=tuple(f"b{i}" for i in range(n_af)),
        q_l=random_kernel(rng, n_xl, n_al, n_af, static),
        q_f=random_kernel(rng, n_xf, n_al, n_af, static),
        r_l=scale * rng.random((n_xl, n_xf, n_al, n_af)),
        r_f=scale * rng.random((n_xl, n_xf, n_al, n_af)),
        delta=delta, horizon=horizon,
        prior_l=np.full(n_xl, 1.0 / n_xl), prior_f=np.asarray(prior_f, dtype=float),
        name=f"random-{seed}",
    )


@pytest.fixture
def security():
    return example_security_game()


@pytest.fixture
def point_low():
    return (np.array([1.0]), np.array([1.0, 0.0]))


@pytest.fixture
def point_high():
    return (np.array([1.0]), np.array([0.0, 1.0]))


# --- acceptance summary ------------------------------------------------------

ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


def record_criterion(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(key, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[key]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
