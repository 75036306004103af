"""Protocol IR validation and the dense branch-tree simulator."""

import math

import numpy as np
import pytest

from entlab import PureBipartiteState, ValidationError
from entlab.locc import (
    AddAncilla,
    ApplyUnitary,
    Discard,
    Measure,
    ProtocolIR,
    Send,
    compare_ensembles,
    embed_operator,
    group_by_message,
    random_toy_ir,
    simulate_dense,
)
from entlab.sampling import random_pure

X = np.array([[0.0, 1.0], [1.0, 0.0]])
PHI2 = PureBipartiteState(2, 2, np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2))


def correction_ir():
    """Alice measures her half of a singlet, Bob undoes the flip."""
    return ProtocolIR(
        2,
        2,
        (
            Measure("A", 0, "m"),
            Send("m", "A", "B"),
            ApplyUnitary("B", (0,), control="m", cases=(np.eye(2), X)),
        ),
    )


def test_correction_protocol_branches():
    res = simulate_dense(correction_ir(), PHI2)
    assert len(res.branches) == 2
    for br in res.branches:
        assert abs(br.prob - 0.5) < 1e-12
        # Alice's frozen register shows the outcome, Bob's is corrected to |0>
        k = dict(br.records)["m"]
        alice = np.zeros((2, 2))
        alice[k, k] = 1.0
        want = np.kron(alice, np.diag([1.0, 0.0]))
        assert np.abs(br.output.mat - want).max() < 1e-9
    assert {br.message for br in res.branches} == {(0,), (1,)}


def test_message_bit_count():
    ir = correction_ir()
    assert ir.message_bits() == 1
    silent = ProtocolIR(2, 2, (Measure("A", 0, "m"),))
    assert silent.message_bits() == 0


def test_group_by_message_probabilities():
    res = simulate_dense(correction_ir(), PHI2)
    groups = group_by_message(res)
    assert abs(sum(p for p, _ in groups.values()) - 1.0) < 1e-9
    tv, worst = compare_ensembles(groups, groups)
    assert tv == 0.0 and worst == 0.0


def test_measurement_in_rotated_basis():
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    ir = ProtocolIR(2, 2, (Measure("A", 0, "m", basis=h),))
    prod = PureBipartiteState(2, 2, np.array([1.0, 0.0, 0.0, 0.0]))
    res = simulate_dense(ir, prod)
    # |0> meets the Hadamard basis: both outcomes at 1/2
    assert sorted(round(br.prob, 12) for br in res.branches) == [0.5, 0.5]


def test_ancilla_and_discard_round_trip():
    ir = ProtocolIR(
        2,
        2,
        (
            AddAncilla("B", 3, np.array([0.0, 1.0, 0.0])),
            ApplyUnitary("A", (0,), matrix=X),
            Discard("B", 1),
        ),
    )
    res = simulate_dense(ir, PHI2)
    assert len(res.branches) == 1
    br = res.branches[0]
    assert abs(br.prob - 1.0) < 1e-12
    assert br.output.dim == 4  # ancilla discarded, two qubits remain
    # X on Alice's half of a singlet keeps a maximally entangled state
    flipped = np.kron(X, np.eye(2)) @ PHI2.amp
    want = np.outer(flipped, flipped.conj())
    assert np.abs(br.output.mat - want).max() < 1e-9


def test_validation_rejects_malformed_programs():
    with pytest.raises(ValidationError):
        # unknown record on the controlled unitary
        ProtocolIR(2, 2, (ApplyUnitary("B", (0,), control="m", cases=(np.eye(2), X)),))
    with pytest.raises(ValidationError):
        # control known only to the measuring party until sent
        ProtocolIR(
            2,
            2,
            (
                Measure("A", 0, "m"),
                ApplyUnitary("B", (0,), control="m", cases=(np.eye(2), X)),
            ),
        )
    with pytest.raises(ValidationError):
        # measuring a register twice
        ProtocolIR(2, 2, (Measure("A", 0, "m"), Measure("A", 0, "k")))
    with pytest.raises(ValidationError):
        # non-unitary matrix
        ProtocolIR(2, 2, (ApplyUnitary("A", (0,), matrix=np.ones((2, 2))),))
    with pytest.raises(ValidationError):
        ProtocolIR(2, 2, (Measure("C", 0, "m"),))


def test_simulate_rejects_mismatched_input():
    ir = correction_ir()
    with pytest.raises(ValidationError):
        simulate_dense(ir, PureBipartiteState(3, 2, np.eye(3, 2).reshape(-1) / math.sqrt(2)))


def test_embed_operator_matches_kron():
    dims = (2, 3)
    a = np.arange(4, dtype=complex).reshape(2, 2)
    big = embed_operator(a, dims, (0,))
    assert np.abs(big - np.kron(a, np.eye(3))).max() < 1e-12
    b = np.arange(9, dtype=complex).reshape(3, 3)
    big = embed_operator(b, dims, (1,))
    assert np.abs(big - np.kron(np.eye(2), b)).max() < 1e-12


def test_embed_operator_reorders_targets():
    dims = (2, 2)
    cnot = np.array(
        [
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 0, 1],
            [0, 0, 1, 0],
        ],
        dtype=complex,
    )
    # control on register 1, target register 0
    swapped = embed_operator(cnot, dims, (1, 0))
    perm = np.zeros((4, 4), dtype=complex)
    # basis order |r0 r1>: amplitudes map 01->11, 11->01
    perm[0, 0] = perm[2, 2] = 1.0
    perm[3, 1] = perm[1, 3] = 1.0
    assert np.abs(swapped - perm).max() < 1e-12


def test_branch_probabilities_always_normalize():
    gen = np.random.default_rng(59)
    for _ in range(30):
        ir = random_toy_ir(gen, max_dim=4, rounds=3)
        amp = random_pure(gen, ir.dim_a * ir.dim_b).reshape(ir.dim_a, ir.dim_b)
        res = simulate_dense(ir, PureBipartiteState(ir.dim_a, ir.dim_b, amp))
        assert abs(sum(br.prob for br in res.branches) - 1.0) < 1e-9
        for br in res.branches:
            assert abs(np.trace(br.output.mat).real - 1.0) < 1e-9


def test_random_toy_ir_is_seed_deterministic():
    a = random_toy_ir(np.random.default_rng(77), max_dim=4, rounds=3)
    b = random_toy_ir(np.random.default_rng(77), max_dim=4, rounds=3)
    assert a.dim_a == b.dim_a and a.dim_b == b.dim_b
    assert len(a.instructions) == len(b.instructions)
    st = PureBipartiteState(
        a.dim_a, a.dim_b, random_pure(np.random.default_rng(1), a.dim_a * a.dim_b)
    )
    ga = group_by_message(simulate_dense(a, st))
    gb = group_by_message(simulate_dense(b, st))
    tv, worst = compare_ensembles(ga, gb)
    assert tv < 1e-12 and worst < 1e-12
