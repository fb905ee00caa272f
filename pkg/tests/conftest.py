from pathlib import Path

import numpy as np
import pytest

from hybrid_isaacs.exprlang import parse
from hybrid_isaacs.problem import Impulse, ProblemSpec, load_config

SPEC_DIR = Path(__file__).resolve().parent.parent / "specs"


def toy_spec(f="0", k="1", u1=(0.0,), u2=(0.0,), lam=1.0, box=((-1.0, 1.0),),
             A=None, d1=("only",), d2=("only",), c1=None, c2=None, impulses=()):
    """Build a ProblemSpec in code.  ``f`` and ``k`` may be single strings
    (shared by every mode pair) or dicts keyed by (i1, i2); ``f`` entries are
    one expression string per state dimension (a bare string means 1-D)."""
    dim = len(box)
    m1, m2 = len(d1), len(d2)

    def table(value, split):
        if isinstance(value, dict):
            return {pair: split(v) for pair, v in value.items()}
        return {(i1, i2): split(value) for i1 in range(m1) for i2 in range(m2)}

    def split_f(v):
        comps = [v] * dim if isinstance(v, str) else list(v)
        assert len(comps) == dim
        return tuple(parse(c) for c in comps)

    c1 = np.zeros((m1, m1)) if c1 is None else np.asarray(c1, dtype=float)
    c2 = np.zeros((m2, m2)) if c2 is None else np.asarray(c2, dtype=float)
    return ProblemSpec(
        dimension=dim,
        generator=np.zeros((dim, dim)) if A is None else np.asarray(A, dtype=float),
        discount=float(lam),
        u1_levels=np.asarray(u1, dtype=float),
        u2_levels=np.asarray(u2, dtype=float),
        d1_labels=tuple(d1),
        d2_labels=tuple(d2),
        dynamics=table(f, split_f),
        running_cost=table(k, parse),
        switch_cost_1=c1,
        switch_cost_2=c2,
        impulses=tuple(Impulse(np.asarray(v, dtype=float), float(c)) for v, c in impulses),
        box=np.asarray(box, dtype=float),
    )

BUNDLED = {
    "constant_cost": SPEC_DIR / "constant_cost.toml",
    "mode_selection": SPEC_DIR / "mode_selection.toml",
    "drift_1d": SPEC_DIR / "drift_1d.toml",
    "impulse_toy": SPEC_DIR / "impulse_toy.toml",
    "balanced_loop": SPEC_DIR / "balanced_loop.toml",
}

INVALID = {
    "zero_switch_cost": SPEC_DIR / "invalid" / "zero_switch_cost.toml",
    "subadditivity": SPEC_DIR / "invalid" / "subadditivity.toml",
    "negative_cost": SPEC_DIR / "invalid" / "negative_cost.toml",
    "syntax_error": SPEC_DIR / "invalid" / "syntax_error.toml",
}


@pytest.fixture(scope="session")
def spec_dir():
    return SPEC_DIR


def load_bundled(name):
    return load_config(BUNDLED[name])


@pytest.fixture(scope="session")
def constant_cost():
    return load_bundled("constant_cost")


@pytest.fixture(scope="session")
def mode_selection():
    return load_bundled("mode_selection")


@pytest.fixture(scope="session")
def drift_1d():
    return load_bundled("drift_1d")


@pytest.fixture(scope="session")
def impulse_toy():
    return load_bundled("impulse_toy")


@pytest.fixture(scope="session")
def balanced_loop():
    return load_bundled("balanced_loop")
