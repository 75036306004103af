"""Builders for one-message dilution protocols.

Shift dilution turns a maximally entangled pair into an arbitrary equal
dimension Schmidt profile exactly, at ceil(log2 d) message bits. Block
dilution targets tensor-power profiles under a message budget: the
significant prefix of the sorted spectrum is cut into 2^budget equal
blocks, each flattened to its average, and only the block offset is
communicated. Small instances materialize to a standard-form protocol;
large ones stay symbolic as run-length data over the sorted spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CapExceededError, ValidationError
from ..logdomain import NEG_INF, log2_int, log2sub, log2sumexp
from ..spectrum import ClassSpectrum, SortedSpectrumView
from ..tolerances import PROFILE_SUM_TOL, WEIGHTS_CAP
from .standard import DiagonalKraus, StandardFormProtocol


def build_shift_dilution(q) -> StandardFormProtocol:
    """Exact dilution of a d-dim maximally entangled pair into profile q.

    Outcome k applies sqrt(q) cyclically shifted by k; the partner undoes
    the shift. Every outcome has probability 1/d and zero output error.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    d = q.size
    if d == 0:
        raise ValidationError("empty profile")
    if d > WEIGHTS_CAP:
        raise CapExceededError(f"profile length exceeds {WEIGHTS_CAP}")
    if q.min() < -1e-15 or abs(q.sum() - 1.0) > PROFILE_SUM_TOL:
        raise ValidationError("profile must be a probability vector")
    q = np.clip(q, 0.0, None)
    idx = np.arange(d)
    ops = tuple(
        DiagonalKraus(weights=np.roll(q, -k), perm=(idx + k) % d) for k in range(d)
    )
    return StandardFormProtocol(
        dim_a=d,
        dim_b=d,
        alice_ops=ops,
        message_bits=(d - 1).bit_length(),
    )


@dataclass(frozen=True)
class BlockShiftFamily:
    """Symbolic block dilution protocol over a sorted power spectrum.

    Outcome k shifts by k*m positions; by symmetry every outcome yields
    the same output profile q (flat on each of the K blocks), so a single
    representative outcome with multiplicity K describes the whole run.
    x_runs lists (position count, log2 q value, log2 target eigenvalue)
    in sorted-position order, covering [0, d_prime) contiguously;
    tail_log2_mass is the target mass at positions >= d_prime.
    """

    spectrum: ClassSpectrum
    budget_c: int
    d1: int
    K: int
    m: int
    d_prime: int
    log2_tau_prime: float
    x_runs: tuple
    tail_log2_mass: float
    target_error: float

    @property
    def message_bits(self) -> int:
        return self.budget_c

    @property
    def num_outcomes(self):
        return self.K

    def x_norm(self) -> float:
        """Largest output weight; equals the operator norm of the reduced output."""
        return float(np.exp2(max(lx for _, lx, _ in self.x_runs)))

    def prefix_x_log2_mass(self, dim: int) -> float:
        """log2 of the output-profile mass on the top `dim` positions."""
        if dim <= 0:
            return NEG_INF
        pos = 0
        acc = []
        for cnt, lx, _ in self.x_runs:
            take = min(cnt, dim - pos)
            if take <= 0:
                break
            acc.append(log2_int(take) + lx)
            pos += take
        return log2sumexp(acc)

    def trace_distance_to_target_power(self) -> float:
        """Trace distance between the reduced output and the target power state."""
        acc = []
        for cnt, lx, ll in self.x_runs:
            hi, lo = (lx, ll) if lx >= ll else (ll, lx)
            acc.append(log2_int(cnt) + log2sub(hi, lo))
        acc.append(self.tail_log2_mass)
        return float(np.exp2(log2sumexp(acc)))

    def materialize(self) -> StandardFormProtocol:
        """Dense standard-form realization; refuses beyond the weights cap."""
        if self.K * self.d_prime > WEIGHTS_CAP:
            raise CapExceededError("family too large to materialize")
        d = int(self.d_prime)
        m = int(self.m)
        vec = np.concatenate(
            [np.full(int(cnt), float(np.exp2(lx))) for cnt, lx, _ in self.x_runs]
        )
        vec = vec / vec.sum()
        idx = np.arange(d)
        ops = tuple(
            DiagonalKraus(weights=m * np.roll(vec, -(k * m)), perm=(idx + k * m) % d)
            for k in range(int(self.K))
        )
        return StandardFormProtocol(
            dim_a=d,
            dim_b=d,
            alice_ops=ops,
            message_bits=self.budget_c,
        )


def build_block_dilution(spec: ClassSpectrum, budget_c: int, eps_target: float = 0.1):
    """Block dilution of spec's power profile under a message budget.

    Returns (protocol, predicted_error): a StandardFormProtocol when the
    instance fits the dense weights cap, otherwise the symbolic family.
    The kept prefix holds mass 1 - eps_target^2/8 so that the truncation
    alone stays well inside the error target; flattening the blocks adds
    the rest. predicted_error is exact for the construction (not a bound).
    """
    if not 0.0 < eps_target < 2.0:
        raise ValidationError("error target must lie in (0, 2)")
    if budget_c < 0:
        raise ValidationError("negative message budget")
    view = SortedSpectrumView(spec)
    d1, _, _ = view.sig_dim(1.0 - eps_target * eps_target / 8.0)
    # beyond ceil(log2 d1) extra bits buy nothing: clamp to the exact
    # per-position shift over the kept prefix (error = truncation only)
    budget_c = min(budget_c, (d1 - 1).bit_length())
    K = 1 << budget_c
    m = -(-d1 // K)
    d_prime = K * m
    lt = view.log2_mass_of_prefix(d_prime)

    # class pieces covering [0, d_prime), zero-padded past the spectrum
    pieces = []
    pos = 0
    for cnt, e in view.runs(0, d_prime):
        pieces.append((pos, pos + cnt, e))
        pos += cnt
    if pos < d_prime:
        pieces.append((pos, d_prime, NEG_INF))

    # pass 1: straddled blocks and their total mass
    partial_mass = {}

    def _note(block, start, end, e):
        partial_mass.setdefault(block, []).append((log2_int(end - start), e))

    def _split(s, ee, e, emit_interior, emit_partial):
        b0 = -(-s // m)
        b1 = ee // m
        if b1 > b0:
            if s < b0 * m:
                emit_partial(b0 - 1, s, b0 * m, e)
            emit_interior(b0 * m, b1 * m, e)
            if ee > b1 * m:
                emit_partial(b1, b1 * m, ee, e)
        else:
            b_s = s // m
            b_e = (ee - 1) // m
            if b_s == b_e:
                emit_partial(b_s, s, ee, e)
            else:
                mid = b_e * m
                emit_partial(b_s, s, mid, e)
                emit_partial(b_e, mid, ee, e)

    for s, ee, e in pieces:
        _split(s, ee, e, lambda *a: None, _note)
    block_log2_mass = {b: log2sumexp([lc + e for lc, e in runs]) for b, runs in partial_mass.items()}

    # pass 2: position-ordered output runs and the overlap with the target
    lm = log2_int(m)
    x_runs = []
    overlap_terms = []

    def _emit(start, end, lx, ll):
        if end <= start:
            return
        if x_runs and x_runs[-1][1] == lx and x_runs[-1][2] == ll:
            prev = x_runs.pop()
            x_runs.append((prev[0] + (end - start), lx, ll))
        else:
            x_runs.append((end - start, lx, ll))

    def _interior(start, end, e):
        _emit(start, end, e - lt, e)
        overlap_terms.append(log2_int(end - start) + e)

    def _partial(block, start, end, e):
        lmass = block_log2_mass[block]
        _emit(start, end, lmass - lm - lt, e)

    for s, ee, e in pieces:
        _split(s, ee, e, _interior, _partial)

    for b, runs in partial_mass.items():
        lmass = block_log2_mass[b]
        overlap_terms.append(0.5 * (lmass - lm) + log2sumexp([lc + 0.5 * e for lc, e in runs]))

    if m == 1:
        # no flattening: the only loss is the truncated tail, and expm1
        # keeps it exact where 1 - exp2(lt) would cancel to roundoff
        target_error = 2.0 * math.sqrt(max(0.0, -math.expm1(lt * math.log(2.0))))
    else:
        l_f = log2sumexp(overlap_terms) - 0.5 * lt
        f_sq = min(1.0, float(np.exp2(2.0 * l_f)))
        target_error = 2.0 * math.sqrt(max(0.0, 1.0 - f_sq))

    tail = log2sub(0.0, lt) if lt < 0.0 else NEG_INF

    family = BlockShiftFamily(
        spectrum=spec,
        budget_c=budget_c,
        d1=d1,
        K=K,
        m=m,
        d_prime=d_prime,
        log2_tau_prime=lt,
        x_runs=tuple(x_runs),
        tail_log2_mass=tail,
        target_error=target_error,
    )
    if K * d_prime <= WEIGHTS_CAP:
        return family.materialize(), target_error
    return family, target_error
