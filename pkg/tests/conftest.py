import numpy as np
import pytest

from monodomain.fem import assemble, build_diffusion_field
from monodomain.ionic import load_model
from monodomain.mesh import build_regular_sheet


@pytest.fixture(scope="session")
def ap_model():
    return load_model("aliev_panfilov")


@pytest.fixture(scope="session")
def ord_epi():
    return load_model("ohara_rudy_epi")


@pytest.fixture(scope="session")
def inert_model():
    return load_model("inert")


@pytest.fixture
def small_sheet():
    return build_regular_sheet(0.5, 0.3, 0.05)


def operator_for(mesh, d=0.001, rho=0.25, d_fib=None):
    field = build_diffusion_field(mesh, d, d_fib, rho)
    return field, assemble(mesh, field)


def smooth_field(mesh, seed=0):
    rng = np.random.default_rng(seed)
    x, y = mesh.node_coords.T
    out = np.zeros(mesh.n_nodes)
    for _ in range(4):
        a, b, c = rng.normal(size=3)
        out += a * np.cos(b * 3 * x + c) * np.cos(c * 3 * y - b)
    return out


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``criterion N: PASS/FAIL`` line for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok: bool, detail: str = "") -> bool:
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
