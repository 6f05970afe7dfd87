import functools

from monoclifford.algebra import Paravector
from monoclifford.grid import make_domain
from monoclifford.kernels import KernelParams
from monoclifford.operators import OperatorContext

CUBE = [[-1, 1], [-1, 1], [-1, 1]]


@functools.lru_cache(maxsize=None)
def ball_context(N: int, a=(0.0, 0.0, 0.0, 0.0), quadrature: str = "difference-kernel", n: int = 3):
    """Operator context on the unit ball, shared across test modules (dense assembly is costly)."""
    dom = make_domain([[-1, 1]] * n, N, "ball")
    params = KernelParams(n, Paravector(a[0], tuple(a[1:])))
    return OperatorContext(dom, params, quadrature=quadrature)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
