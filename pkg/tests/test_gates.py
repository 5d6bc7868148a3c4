import numpy as np
import pytest
from numpy.testing import assert_allclose

from spintomo import gates as g
from spintomo.qmat import (
    PAULI_PAIRS,
    SIGMA_DOT_SIGMA,
    decompose,
    pauli,
    random_density,
)


def test_standard_gates_unitary():
    for name in ("X", "Y", "Z", "H", "Rx90", "Ry90", "Rz90", "sqrtSWAP"):
        u = g.standard_gate(name).matrix
        assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-13)


def test_unknown_gate():
    with pytest.raises(ValueError):
        g.standard_gate("CNOT")


def test_pi_rotations_are_paulis_up_to_phase():
    for axis, k in (("x", 1), ("y", 2), ("z", 3)):
        u = g.rotation_gate(axis, np.pi).matrix
        assert g.equal_up_to_phase(u, pauli(k))
        assert_allclose(u, -1j * pauli(k), atol=1e-13)


def test_bare_rotation_aliases_are_quarter_turns():
    for bare, named in (("Rx", "Rx90"), ("Ry", "Ry90"), ("Rz", "Rz90")):
        assert_allclose(g.standard_gate(bare).matrix,
                        g.standard_gate(named).matrix, atol=0)


def test_sqrt_swap_squares_to_swap():
    s = g.standard_gate("sqrtSWAP").matrix
    swap = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    assert_allclose(s @ s, swap, atol=1e-13)


def test_sequence_parse_format_roundtrip():
    text = "Rz90@2,sqrtSWAP@12,X@1"
    seq = g.parse_sequence(text)
    assert g.format_sequence(seq) == text
    assert g.format_sequence(g.parse_sequence("identity")) == "identity"
    assert g.format_sequence(g.parse_sequence("")) == "identity"


def test_sequence_target_validation():
    with pytest.raises(ValueError):
        g.sequence("sqrtSWAP@1")  # two-qubit gate on a single target
    with pytest.raises(ValueError):
        g.sequence("X@12")  # one-qubit gate on the pair
    with pytest.raises(ValueError):
        g.sequence("X@3")


def test_sequence_unitary_order():
    # first token acts first: U = U_last ... U_first
    seq = g.sequence("X@1", "Z@1")
    expected = g.embed(g.standard_gate("Z"), "1") @ g.embed(g.standard_gate("X"), "1")
    assert_allclose(g.sequence_unitary(seq), expected, atol=0)


def test_embed_targets():
    x = g.standard_gate("X")
    assert_allclose(g.embed(x, "1"), np.kron(x.matrix, np.eye(2)), atol=0)
    assert_allclose(g.embed(x, "2"), np.kron(np.eye(2), x.matrix), atol=0)


def test_apply_matches_manual_conjugation():
    rng = np.random.default_rng(6)
    seq = g.sequence("Ry90@2", "sqrtSWAP@12")
    u = g.sequence_unitary(seq)
    for _ in range(5):
        rho = random_density(4, rng)
        assert_allclose(g.apply(seq, rho).mat, u @ rho.mat @ u.conj().T, atol=1e-13)


def test_heisenberg_duality():
    # tr(U rho U^dag O) = tr(rho U^dag O U)
    rng = np.random.default_rng(10)
    seq = g.sequence("Rz90@2", "X@1", "sqrtSWAP@12")
    for _ in range(10):
        rho = random_density(4, rng)
        obs = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        obs = obs + obs.conj().T
        lhs = np.trace(g.apply(seq, rho).mat @ obs)
        rhs = np.trace(rho.mat @ g.conjugate_observable(seq, obs))
        assert abs(lhs - rhs) < 1e-12


def _transfer_as_dict(seq):
    t = g.coefficient_transfer_matrix(seq)
    mapping = {}
    for row, pr in enumerate(PAULI_PAIRS):
        nz = np.nonzero(np.abs(t[row]) > 1e-12)[0]
        mapping[pr] = [(PAULI_PAIRS[c], t[row, c]) for c in nz]
    return mapping


def test_x_gate_sign_flips():
    # X on qubit 2 flips every coefficient with second index y or z
    m = _transfer_as_dict(g.sequence("X@2"))
    for (i, j), terms in m.items():
        assert len(terms) == 1
        (src, val) = terms[0]
        assert src == (i, j)
        expected = -1.0 if j in (2, 3) else 1.0
        assert abs(val - expected) < 1e-12


def test_y_gate_sign_flips():
    m = _transfer_as_dict(g.sequence("Y@2"))
    for (i, j), terms in m.items():
        (src, val) = terms[0]
        assert src == (i, j)
        expected = -1.0 if j in (1, 3) else 1.0
        assert abs(val - expected) < 1e-12


def test_ry90_axis_exchange():
    # quarter turn about y sends z -> x and x -> -z on the rotated qubit
    m = _transfer_as_dict(g.sequence("Ry90@2"))
    for i in range(4):
        assert m[(i, 1)] == [((i, 3), pytest.approx(1.0, abs=1e-12))]
        assert m[(i, 3)] == [((i, 1), pytest.approx(-1.0, abs=1e-12))]
        if i > 0:
            assert m[(i, 2)] == [((i, 2), pytest.approx(1.0, abs=1e-12))]


def test_transfer_matrix_consistency():
    rng = np.random.default_rng(14)
    for text in ("X@2", "Ry90@2", "sqrtSWAP@12", "Rz90@2,sqrtSWAP@12,Rx90@2"):
        seq = g.parse_sequence(text)
        t = g.coefficient_transfer_matrix(seq)
        for _ in range(5):
            rho = random_density(4, rng)
            direct = decompose(g.apply(seq, rho)).vector()
            via_t = t @ decompose(rho).vector()
            assert_allclose(direct, via_t, atol=1e-12)


def test_sqrt_swap_preserves_exchange():
    rng = np.random.default_rng(18)
    seq = g.sequence("sqrtSWAP@12")
    for _ in range(10):
        rho = random_density(4, rng)
        before = rho.expect(SIGMA_DOT_SIGMA)
        after = g.apply(seq, rho).expect(SIGMA_DOT_SIGMA)
        assert abs(before - after) < 1e-12


def test_equal_up_to_phase():
    u = g.standard_gate("X").matrix
    assert g.equal_up_to_phase(u, np.exp(1j * 0.73) * u)
    assert not g.equal_up_to_phase(u, g.standard_gate("Y").matrix)
