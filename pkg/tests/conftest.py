import numpy as np
import pytest

import transbem as tb

CANONICAL_SOURCES = dict(
    F1="z1 + tanh(z2)", F2="-z2 + tanh(z1)",
    dF1_dz1="1", dF1_dz2="1 - tanh(z2)^2",
    dF2_dz1="1 - tanh(z1)^2", dF2_dz2="-1",
    f_o="x1/2",
)

PROBES_INTERIOR = [(0.3, 0.2), (0.0, 0.0)]
PROBES_EXTERIOR = [(1.5, 0.5)]


@pytest.fixture(scope="session")
def canonical_data():
    return tb.TransmissionData.from_sources(**CANONICAL_SOURCES)


@pytest.fixture(scope="session")
def circles64():
    return tb.discretize(tb.circle(2.0), 64), tb.discretize(tb.circle(1.0), 64)


@pytest.fixture(scope="session")
def canonical_solution(canonical_data, circles64):
    outer, inner = circles64
    system = tb.TransmissionSystem(canonical_data, outer, inner)
    ds, trace = system.solve(method="hybrid", tol=1e-10, max_iter=100)
    return system, ds, trace


@pytest.fixture(scope="session")
def canonical_branch(canonical_data, circles64):
    outer, inner = circles64
    family = tb.trefoil_family(tb.circle(1.0))
    return tb.continue_branch(
        family, 20, canonical_data, outer, inner, 0.1,
        probes_interior=PROBES_INTERIOR, probes_exterior=PROBES_EXTERIOR,
        tol=1e-10)


@pytest.fixture(scope="session")
def manufactured():
    return tb.manufactured_affine_case()


def canonical_config_text(extra_output="", n=64):
    return f"""
[outer]
kind = builtin
shape = circle
radius = 2

[inner]
kind = builtin
shape = circle
radius = 1

[discretization]
n = {n}

[transmission]
f1 = "z1 + tanh(z2)"
f2 = "-z2 + tanh(z1)"
df1_dz1 = "1"
df1_dz2 = "1 - tanh(z2)^2"
df2_dz1 = "1 - tanh(z1)^2"
df2_dz2 = "-1"
f_o = "x1/2"

[solver]
method = hybrid

[shape]
dx = "s*cos(3*t)*cos(t)"
dy = "s*cos(3*t)*sin(t)"
dx_dt = "s*(-3*sin(3*t)*cos(t) - cos(3*t)*sin(t))"
dy_dt = "s*(-3*sin(3*t)*sin(t) + cos(3*t)*cos(t))"
s_max = 0.1
steps = 20
interior_probes = 0.3 0.2
exterior_probes = 1.5 0.5

[output]
field_grid = 24
{extra_output}
"""


def manufactured_config_text(n=128):
    return f"""
[outer]
shape = circle
radius = 2

[inner]
shape = circle
radius = 1

[discretization]
n = {n}

[transmission]
f1 = "z1 - 2*x1"
f2 = "-z2 + 2*x1"
df1_dz1 = "1"
df1_dz2 = "0"
df2_dz1 = "0"
df2_dz2 = "-1"
f_o = "(3/8)*x1"

[shape]
interior_probes = 0.3 0.2
exterior_probes = 1.5 0.0

[output]
field_grid = 16
"""


def rng(seed=0):
    return np.random.default_rng(seed)
