import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_P = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_pauli(n, factors):
    """Independent oracle: kron over qubits n-1..0 (qubit 0 least significant)."""
    axis = dict(factors)
    m = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        m = np.kron(m, _P[axis.get(q, "I")])
    return m


def dense_gate(n, mat, targets):
    """Full 2^n operator of ``mat`` acting on ``targets`` (targets[0] most significant)."""
    k = len(targets)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        sub_in = 0
        for t in targets:
            sub_in = (sub_in << 1) | ((col >> t) & 1)
        for sub_out in range(2**k):
            amp = mat[sub_out, sub_in]
            if amp == 0:
                continue
            row = col
            for j, t in enumerate(targets):
                bit = (sub_out >> (k - 1 - j)) & 1
                row = (row & ~(1 << t)) | (bit << t)
            out[row, col] += amp
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def record_acceptance(number, passed, text):
    line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {text}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
