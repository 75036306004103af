"""Evaluation of dilution protocols against power-state targets.

run_protocol feeds a maximally entangled pair through a standard-form
protocol and scores every outcome against the target profile. Diagonal
families run on weight vectors; dense families on full matrices; block
families too large to materialize run symbolically on sorted-position
run-length data. The certificate checker re-derives the communication
lower bound from recorded quantities, flagging each inequality separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..errors import CapExceededError, DegenerateSpectrumError, ValidationError
from ..logdomain import NEG_INF, log2_int, log2sub, log2sumexp
from ..qmath import (
    DensityMatrix,
    PureBipartiteState,
    SchmidtProfile,
    epsilon_rank,
    operator_norm,
    trace_distance,
)
from ..sigsub import sig_dim
from ..spectrum import (
    BaseSpectrum,
    ClassSpectrum,
    SortedSpectrumView,
    spectrum_stats,
    tensor_power_spectrum,
)
from ..tolerances import DENSE_DIM_CAP, EQUALITY_TOL, RANK_REL_TOL, WEIGHTS_CAP
from .protocols import BlockShiftFamily
from .standard import StandardFormProtocol

# below this probability an outcome cannot be scored meaningfully
PROB_FLOOR = 1e-15

# spectra must satisfy n > CERT_N_COEFF * beta^2 before the certificate
# may demand that the high-eigenvalue projector capture mass > 1/4
CERT_N_COEFF = 2500.0


@dataclass(frozen=True, eq=False)
class OutcomeState:
    """One protocol outcome: probability, output, and reduced operators.

    error is the distance between the kept pair state and the target;
    product_error the distance between the full output and target x gamma.
    Exactly one of (state, weights, x_runs) is populated depending on the
    evaluation path; multiplicity counts symmetry-equivalent outcomes a
    symbolic run does not enumerate.
    """

    k: int
    prob: float
    log2_prob: float
    error: float
    product_error: float
    good: bool
    multiplicity: int = 1
    state: PureBipartiteState | None = None
    Y: DensityMatrix | None = None
    X: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    weights: np.ndarray | None = None
    x_runs: tuple | None = None
    x_tail_log2_mass: float | None = None
    x_rank: int | None = None

    def x_operator_norm(self) -> float:
        return float(np.exp2(self.x_operator_log2_norm()))

    def x_operator_log2_norm(self) -> float:
        """log2 of the largest eigenvalue; stays finite where the plain
        norm underflows (weights below 2^-1074 at large n)."""
        if self.x_runs is not None:
            return max(lx for _, lx, _ in self.x_runs)
        if self.weights is not None:
            top = float(self.weights.max())
            return math.log2(top) if top > 0 else NEG_INF
        if self.X is not None:
            nrm = operator_norm(self.X)
            return math.log2(nrm) if nrm > 0 else NEG_INF
        raise ValidationError("outcome carries no reduced operator")


@dataclass(frozen=True)
class ProtocolRunReport:
    """Communication and fidelity accounting for one protocol run."""

    d: int
    c: int
    s: float
    epsilon: float
    per_outcome: tuple
    n: int | None = None
    eps_good: float = 0.0
    success: bool = True
    repetitions: int = 1
    failure_bound: float | None = None
    ebits_consumed: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.c != int(self.c):
            raise ValidationError("message bits must be a nonnegative integer")
        if self.success:
            if not (0.0 <= self.s < math.inf):
                raise ValidationError("success probability exponent out of range")
            if not (0.0 <= self.epsilon <= 2.0 + EQUALITY_TOL):
                raise ValidationError("error must lie in [0, 2]")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be positive")

    @property
    def log2_d(self) -> float:
        return log2_int(self.d)

    def to_json(self) -> str:
        def _num(x):
            return x if x is not None and math.isfinite(x) else None

        doc = {
            "n": self.n,
            "d": int(self.d),
            "c": self.c,
            "s": _num(self.s),
            "epsilon": _num(self.epsilon),
            "success": self.success,
            "repetitions": self.repetitions,
            "ebits_consumed": _num(self.ebits_consumed),
            "per_outcome": [
                {
                    "k": o.k,
                    "prob": o.prob,
                    "log2_prob": _num(o.log2_prob),
                    "error": _num(o.error),
                    "good": o.good,
                    "multiplicity": o.multiplicity,
                }
                for o in self.per_outcome
            ],
        }
        if self.failure_bound is not None:
            doc["failure_bound"] = self.failure_bound
        return json.dumps(doc, indent=1)


def _target_length(target):
    if isinstance(target, ClassSpectrum):
        if target.exact_mults is None:
            raise ValidationError("target spectrum lacks exact multiplicities")
        return sum(target.exact_mults)
    if isinstance(target, SchmidtProfile):
        return target.dim
    return np.asarray(target, dtype=float).reshape(-1).size


def _target_prefix(target, need: int) -> tuple[np.ndarray, float]:
    """First `need` sorted target probabilities, zero-padded, plus the mass
    of the dropped tail.  The tail is an exact 0.0 whenever the target fits
    inside `need` entries, so a bitwise-perfect match still scores error 0."""
    out = np.zeros(need)
    if isinstance(target, ClassSpectrum):
        pos = 0
        tail_terms = []
        for cnt, e in zip(target.exact_mults, target.log2_eigs):
            take = int(min(cnt, need - pos))
            if take > 0:
                out[pos : pos + take] = float(np.exp2(e))
                pos += take
            rest = cnt - take
            if rest > 0:
                tail_terms.append(log2_int(rest) + e)
        tail = float(np.exp2(log2sumexp(tail_terms))) if tail_terms else 0.0
        return out, tail
    if isinstance(target, SchmidtProfile):
        vec = target.probs
    else:
        vec = SchmidtProfile(np.asarray(target, dtype=float).reshape(-1)).probs
    take = min(need, vec.size)
    out[:take] = vec[:take]
    tail = float(vec[take:].sum()) if vec.size > take else 0.0
    return out, tail


def _default_eps_good(errors) -> float:
    finite = [e for e in errors if math.isfinite(e)]
    if not finite:
        return 0.0
    lo = min(finite)
    return max(2.0 * lo, lo + 1e-6)


def _aggregate(d, c, outcomes, eps_good, n):
    good_probs = [o.prob * o.multiplicity for o in outcomes if o.good]
    total_good = float(sum(good_probs))
    if total_good <= 0.0:
        s = math.inf
        epsilon = math.inf
        success = False
    else:
        s = max(0.0, -math.log2(min(1.0, total_good)))
        if s < 1e-12:  # roundoff dust from summing the outcome probabilities
            s = 0.0
        epsilon = max(o.error for o in outcomes if o.good)
        success = True
    return ProtocolRunReport(
        d=d,
        c=c,
        s=s,
        epsilon=epsilon,
        per_outcome=tuple(outcomes),
        n=n,
        eps_good=eps_good,
        success=success,
        ebits_consumed=float(log2_int(d)),
    )


def _run_weights(proto: StandardFormProtocol, d: int, target, n, eps_good):
    tprof, t_tail = _target_prefix(target, d)
    sqrt_t = np.sqrt(tprof)
    raw = []
    for k, op in enumerate(proto.alice_ops):
        p = float(op.weights.sum()) / d
        v = np.zeros(d)
        if p > PROB_FLOOR:
            v[op.perm] = op.weights / (d * p)
        # overlap deficit in Hellinger form: exact zero for a perfect match,
        # where 1 - (sum sqrt(v q))^2 would lose everything to cancellation
        diff = np.sqrt(v) - sqrt_t
        hell = min(1.0, 0.5 * (float(diff @ diff) + t_tail))
        err = 2.0 * math.sqrt(max(0.0, hell * (2.0 - hell)))
        raw.append((k, p, v, err))
    if eps_good is None:
        eps_good = _default_eps_good([r[3] for r in raw])
    outcomes = []
    for k, p, v, err in raw:
        good = p > PROB_FLOOR and err <= eps_good
        outcomes.append(
            OutcomeState(
                k=k,
                prob=p,
                log2_prob=math.log2(p) if p > 0 else NEG_INF,
                error=err,
                product_error=err,
                good=good,
                weights=v,
                x_rank=int(np.count_nonzero(v > RANK_REL_TOL * max(v.max(), 1e-300))),
            )
        )
    total = sum(o.prob for o in outcomes)
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"outcome probabilities sum to {total}")
    return _aggregate(d, proto.message_bits, outcomes, eps_good, n)


def _run_dense(proto: StandardFormProtocol, d: int, target, n, eps_good):
    tlen = _target_length(target)
    simple = proto.reg_dims_a == (d,) and proto.reg_dims_b == (d,)
    if tlen > d and not simple:
        raise ValidationError("target rank exceeds the protocol dimension")
    if tlen > DENSE_DIM_CAP:
        raise CapExceededError("target too large for the dense path")
    dd = max(d, int(tlen)) if simple else d
    if dd * dd > DENSE_DIM_CAP:
        raise CapExceededError(f"dense dimension {dd * dd} exceeds {DENSE_DIM_CAP}")
    tprof, _ = _target_prefix(target, dd)  # dd >= target length, no tail
    phi = np.zeros((dd, dd), dtype=complex)
    np.fill_diagonal(phi, np.sqrt(tprof))
    phi_vec = phi.reshape(-1)

    diagonal = proto.is_diagonal()
    if simple:
        chi0 = np.zeros((dd, dd), dtype=complex)
        chi0[:d, :d] = np.eye(d) / math.sqrt(d)
        dims = [dd, dd]
        na = 1
    else:
        chi0 = np.eye(d, dtype=complex) / math.sqrt(d)
        for vec in proto.anc_states_a:
            chi0 = np.kron(chi0, np.asarray(vec).reshape(-1, 1))
        for vec in proto.anc_states_b:
            chi0 = np.kron(chi0, np.asarray(vec).reshape(1, -1))
        dims = list(proto.reg_dims_a) + list(proto.reg_dims_b)
        na = len(proto.reg_dims_a)

    fa = chi0.shape[0]
    fb = chi0.shape[1]
    d_main = dims[0] * dims[na]
    d_junk = (fa // dims[0]) * (fb // dims[na])
    reorder = [0, na] + [i for i in range(len(dims)) if i not in (0, na)]
    a_axes = list(range(na))
    b_axes = list(range(na, len(dims)))

    raw = []
    for k in range(proto.num_outcomes):
        if diagonal:
            m_k = proto.alice_ops[k].matrix()
            u_k = proto.alice_ops[k].partner_permutation_matrix()
        else:
            m_k = proto.alice_ops[k]
            u_k = np.asarray(proto.bob_corrections[k])
        if simple and dd > d:
            big_m = np.zeros((dd, dd), dtype=complex)
            big_m[:d, :d] = m_k
            big_u = np.zeros((dd, dd), dtype=complex)
            big_u[:d, :d] = u_k
            m_k, u_k = big_m, big_u
        res = m_k @ chi0 @ u_k.T
        p = float(np.vdot(res, res).real)
        raw.append((k, p, res))

    scored = []
    for k, p, res in raw:
        if p <= PROB_FLOOR:
            scored.append((k, p, None, math.inf, math.inf, None, None, None, None))
            continue
        amp = res / math.sqrt(p)
        tens = amp.reshape(dims)
        pair = tens.transpose(reorder).reshape(d_main, d_junk)
        x_op = np.tensordot(tens, tens.conj(), axes=(b_axes, b_axes)).reshape(fa, fa)
        if len(proto.reg_dims_a) == 1:
            # no extra register on this side: the reduced output equals the
            # normalized measurement operator square
            if diagonal:
                m_k = proto.alice_ops[k].matrix()
            else:
                m_k = proto.alice_ops[k]
            if simple and dd > d:
                big = np.zeros((dd, dd), dtype=complex)
                big[:d, :d] = m_k
                m_k = big
            mm = m_k @ m_k.conj().T
            if np.abs(x_op - mm / np.trace(mm).real).max() > 1e-9:
                raise ValidationError("reduced output disagrees with the operator square")
        gamma_raw = pair.T @ phi_vec.conj()
        overlap = float(np.linalg.norm(gamma_raw))
        if d_junk == 1:
            if overlap < 1e-12:
                err = 2.0
            else:
                # phase-align before differencing so a bitwise match gives 0,
                # where 1 - overlap^2 loses everything to cancellation
                z = complex(gamma_raw.reshape(-1)[0])
                aligned = pair[:, 0] * (z.conjugate() / overlap)
                diffv = aligned - phi_vec
                hell = min(1.0, 0.5 * float(np.vdot(diffv, diffv).real))
                err = 2.0 * math.sqrt(max(0.0, hell * (2.0 - hell)))
            prod_err = err
            y = DensityMatrix(pair @ pair.conj().T)
            gamma_mat = np.array([[1.0 + 0.0j]])
        else:
            y = DensityMatrix(pair @ pair.conj().T)
            err = trace_distance(y, DensityMatrix(np.outer(phi_vec, phi_vec.conj())))
            if overlap < 1e-12:
                prod_err = 2.0
                gamma_mat = None
            else:
                prod_err = 2.0 * math.sqrt(max(0.0, 1.0 - min(1.0, overlap * overlap)))
                g = (gamma_raw / overlap).reshape(fa // dims[0], fb // dims[na])
                gamma_mat = g @ g.conj().T
        scored.append((k, p, amp, err, prod_err, y, x_op, gamma_mat, pair))

    if eps_good is None:
        eps_good = _default_eps_good([r[3] for r in scored])
    outcomes = []
    for k, p, amp, err, prod_err, y, x_op, gamma_mat, pair in scored:
        if amp is None:
            outcomes.append(
                OutcomeState(
                    k=k, prob=p, log2_prob=NEG_INF, error=err,
                    product_error=prod_err, good=False,
                )
            )
            continue
        rho_x = DensityMatrix(x_op)
        outcomes.append(
            OutcomeState(
                k=k,
                prob=p,
                log2_prob=math.log2(p),
                error=err,
                product_error=prod_err,
                good=(gamma_mat is not None) and err <= eps_good,
                state=PureBipartiteState(d_main, d_junk, pair.reshape(-1)),
                Y=y,
                X=x_op,
                Gamma=gamma_mat,
                x_rank=epsilon_rank(rho_x, RANK_REL_TOL),
            )
        )
    total = sum(o.prob for o in outcomes)
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"outcome probabilities sum to {total}")
    return _aggregate(d, proto.message_bits, outcomes, eps_good, n)


def _run_symbolic(family: BlockShiftFamily, d: int, target, n, eps_good):
    if d != family.d_prime:
        raise ValidationError("input dimension must match the family dimension")
    if isinstance(target, ClassSpectrum):
        if target is not family.spectrum and not np.array_equal(
            target.log2_eigs, family.spectrum.log2_eigs
        ):
            raise ValidationError("symbolic run must target the family's spectrum")
    err = family.target_error
    if eps_good is None:
        eps_good = _default_eps_good([err])
    c = family.budget_c
    prob = float(np.exp2(-float(c)))
    outcome = OutcomeState(
        k=0,
        prob=prob,
        log2_prob=-float(c),
        error=err,
        product_error=err,
        good=err <= eps_good,
        multiplicity=int(family.K),
        x_runs=family.x_runs,
        x_tail_log2_mass=family.tail_log2_mass,
    )
    good_total = 1.0 if outcome.good else 0.0
    if good_total > 0.0:
        s = 0.0
        epsilon = err
        success = True
    else:
        s = math.inf
        epsilon = math.inf
        success = False
    return ProtocolRunReport(
        d=d,
        c=c,
        s=s,
        epsilon=epsilon,
        per_outcome=(outcome,),
        n=n if n is not None else family.spectrum.n,
        eps_good=eps_good,
        success=success,
        ebits_consumed=float(log2_int(d)),
    )


def run_protocol(proto, d: int, target, *, n=None, eps_good=None):
    """Run a protocol on the d-dim maximally entangled pair.

    Returns (outcomes, report). target is the ideal output profile: a
    SchmidtProfile, a raw probability vector, or a ClassSpectrum for
    power states. eps_good overrides the goodness threshold; by default
    a gap just above the best outcome's error separates good from junk.
    """
    if isinstance(proto, BlockShiftFamily):
        report = _run_symbolic(proto, d, target, n, eps_good)
        return report.per_outcome, report
    if not isinstance(proto, StandardFormProtocol):
        raise ValidationError("unsupported protocol object")
    if proto.dim_a != d or proto.dim_b != d:
        raise ValidationError("protocol dimensions do not match d")
    if proto.is_diagonal():
        if d > WEIGHTS_CAP:
            raise CapExceededError(f"dimension {d} exceeds the weights cap")
        report = _run_weights(proto, d, target, n, eps_good)
    else:
        report = _run_dense(proto, d, target, n, eps_good)
    return report.per_outcome, report


def run_protocol_dense(proto: StandardFormProtocol, d: int, target, *, n=None, eps_good=None):
    """Force the dense path; cross-check oracle for the diagonal path."""
    if proto.dim_a != d or proto.dim_b != d:
        raise ValidationError("protocol dimensions do not match d")
    report = _run_dense(proto, d, target, n, eps_good)
    return report.per_outcome, report


@dataclass(frozen=True)
class ConcentrationEntry:
    class_index: int
    log2_multiplicity: float
    prob: float


@dataclass(frozen=True)
class ConcentrationResult:
    """Ensemble of maximally entangled blocks extractable without messages."""

    n: int
    entries: tuple
    expected_yield: float
    entropy_rate: float

    @property
    def deficit(self) -> float:
        """Bits of entanglement lost relative to n times the entropy rate."""
        return self.n * self.entropy_rate - self.expected_yield


def concentrate(p, n: int, *, spectrum: ClassSpectrum | None = None) -> ConcentrationResult:
    """Measure the type class of the n-fold power and keep the uniform block.

    Class c with multiplicity m_c arrives with its spectral mass and
    yields log2(m_c) ebits; no classical communication is involved.
    """
    base = p if isinstance(p, BaseSpectrum) else BaseSpectrum(p)
    spec = spectrum if spectrum is not None else tensor_power_spectrum(base.probs, n)
    if spec.exact_mults is None:
        raise ValidationError("concentration needs exact multiplicities")
    stats = spectrum_stats(base)
    entries = []
    ey = 0.0
    for idx, (cnt, lm) in enumerate(zip(spec.exact_mults, spec.log2_masses)):
        prob = float(np.exp2(lm))
        bits = log2_int(cnt)
        entries.append(ConcentrationEntry(idx, bits, prob))
        ey += prob * bits
    return ConcentrationResult(
        n=n, entries=tuple(entries), expected_yield=ey, entropy_rate=stats.entropy
    )


def lift_success_probability(report: ProtocolRunReport, eps_fail: float) -> ProtocolRunReport:
    """Repeat until some trial succeeds; trade repetitions for certainty.

    R = ceil(2^s ln(1/eps_fail)) repetitions push the failure probability
    below eps_fail at the cost of ceil(log2 R) extra message bits and R
    times the entanglement.
    """
    if not 0.0 < eps_fail < 1.0:
        raise ValidationError("failure target must lie in (0, 1)")
    if not report.success or not math.isfinite(report.s):
        raise ValidationError("cannot lift a run with no good outcomes")
    r = max(1, math.ceil(2.0**report.s * math.log(1.0 / eps_fail)))
    failure = (1.0 - 2.0**-report.s) ** r
    return ProtocolRunReport(
        d=report.d,
        c=report.c + (r - 1).bit_length(),
        s=-math.log2(1.0 - eps_fail),
        epsilon=report.epsilon,
        per_outcome=report.per_outcome,
        n=report.n,
        eps_good=report.eps_good,
        success=True,
        repetitions=report.repetitions * r,
        failure_bound=failure,
        ebits_consumed=report.ebits_consumed * r,
    )


@dataclass(frozen=True)
class TheoremChainCertificate:
    """Every intermediate quantity of the communication bound, with verdicts.

    consistent() aggregates only the steps that are theorems for the
    measured quantities; reference-instance facts (the 0.95/0.04/0.01
    parameter choice) are recorded alongside but judged separately.
    """

    n: int
    c: int
    s: float
    log2_d: float
    error: float
    product_error: float
    log2_prob: float
    entropy: float
    alpha: float
    beta: float
    n_threshold: float
    n_past_threshold: bool
    n1: int
    log2_n1: float
    bound_n1_ok: bool
    trp1_rho: float
    trp1_quarter_ok: bool
    trp1_delta_rho_ok: bool
    s2: int
    trp2_gamma: float
    trpi_rho: float
    margin_quarter_ok: bool
    x_norm: float
    xnorm_pd_ok: bool
    xnorm_cc_ok: bool
    prob_qualifies: bool
    trpi_x: float
    trpi_x_bound: float
    trpi_x_bound_ok: bool
    witness_lower: float
    d_reduced: float
    witness_ok: bool
    dp_ok: bool
    linear_envelope_ok: bool
    sqrt_envelope_ok: bool
    implied_c_plus_s: float
    implied_ok: bool
    log2_capture_const: float
    reference_margin: float
    reference_implied_lower: float
    reference_bound_ok: bool
    eps_within_reference: bool
    delta_rho: float
    delta_gamma: float
    eps0: float

    @property
    def consistent(self) -> bool:
        core = (
            self.prob_qualifies
            and self.bound_n1_ok
            and self.xnorm_pd_ok
            and self.xnorm_cc_ok
            and self.trpi_x_bound_ok
            and self.witness_ok
            and self.dp_ok
            and self.implied_ok
        )
        if self.n_past_threshold:
            core = core and self.trp1_quarter_ok and self.margin_quarter_ok
            if self.eps_within_reference:
                core = core and self.reference_bound_ok
        return core

    def to_json(self) -> str:
        def _num(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None
            return x

        doc = {k: _num(v) for k, v in self.__dict__.items()}
        doc["consistent"] = self.consistent
        return json.dumps(doc, indent=1)


def _x_prefix_mass(outcome: OutcomeState, n1: int) -> float:
    if outcome.x_runs is not None:
        pos = 0
        acc = []
        for cnt, lx, _ in outcome.x_runs:
            take = min(cnt, n1 - pos)
            if take <= 0:
                break
            acc.append(log2_int(take) + lx)
            pos += take
        return float(np.exp2(log2sumexp(acc)))
    v = outcome.weights
    take = min(n1, v.size)
    return float(v[:take].sum())


def _x_power_distance(outcome: OutcomeState, target_prefix, tail_mass: float) -> float:
    if outcome.x_runs is not None:
        acc = []
        for cnt, lx, ll in outcome.x_runs:
            hi, lo = (lx, ll) if lx >= ll else (ll, lx)
            if hi == NEG_INF:
                continue
            acc.append(log2_int(cnt) + log2sub(hi, lo))
        if outcome.x_tail_log2_mass is not None:
            acc.append(outcome.x_tail_log2_mass)
        return float(np.exp2(log2sumexp(acc)))
    v = outcome.weights
    return float(np.abs(v - target_prefix[: v.size]).sum()) + tail_mass


def verify_theorem_chain(
    outcome: OutcomeState,
    p,
    n: int,
    report: ProtocolRunReport,
    *,
    delta_rho: float = 0.95,
    delta_gamma: float = 0.04,
    eps0: float = 0.01,
    spectrum: ClassSpectrum | None = None,
) -> TheoremChainCertificate:
    """Re-derive the message lower bound from one good outcome's numbers.

    Each inequality in the chain is evaluated on its own; consistent()
    ands together exactly the ones that must hold for any valid run.
    """
    if not outcome.good:
        raise ValidationError("certificate requires an outcome within the error threshold")
    stats = spectrum_stats(p if isinstance(p, BaseSpectrum) else BaseSpectrum(p))
    if stats.degenerate:
        raise DegenerateSpectrumError("flat spectrum: no deviation scale to certify against")
    spec = spectrum if spectrum is not None else tensor_power_spectrum(
        p.probs if isinstance(p, BaseSpectrum) else p, n
    )
    view = SortedSpectrumView(spec)
    ne = n * stats.entropy
    sqrt_term = stats.alpha * math.sqrt(n)

    n1 = view.count_eigs_at_least(-ne)
    log2_n1 = log2_int(n1)
    bound_n1_ok = log2_n1 <= ne + 1e-9
    trp1_rho = float(np.exp2(view.log2_mass_of_prefix(n1)))
    n_threshold = CERT_N_COEFF * stats.beta * stats.beta
    n_past = n > n_threshold

    gamma = outcome.Gamma if outcome.Gamma is not None else np.array([[1.0]])
    gamma_dm = DensityMatrix(gamma)
    sig = sig_dim(gamma_dm, delta_gamma)
    s2 = int(sig.exact_dim)
    trp2_gamma = float(sig.achieved_mass)

    trpi_rho = trp1_rho * trp2_gamma

    c = report.c
    s = report.s
    log2_d = report.log2_d
    log2_xnorm = outcome.x_operator_log2_norm()
    x_norm = float(np.exp2(log2_xnorm))  # may underflow; bounds use the log
    xnorm_pd_ok = log2_xnorm <= -outcome.log2_prob - log2_d + 1e-9
    xnorm_cc_ok = log2_xnorm <= c + s - log2_d + 1e-6
    prob_qualifies = outcome.log2_prob >= -(c + s) - 1e-6

    if outcome.X is not None:
        fa = outcome.X.shape[0]
        d_ap = gamma.shape[0]
        d_a0 = fa // d_ap
        x4 = outcome.X.reshape(d_a0, d_ap, d_a0, d_ap)
        w2, v2 = np.linalg.eigh(gamma)
        order = np.argsort(w2)[::-1]
        p2 = v2[:, order[:s2]]
        p2m = p2 @ p2.conj().T
        take = int(min(n1, d_a0))
        trpi_x = float(np.einsum("aiaj,ij->", x4[:take, :, :take, :], p2m.conj()).real)
        tlen = int(min(view.total_dim, d_a0))
        tprefix = np.zeros(d_a0)
        pos = 0
        for cnt, e in view.runs(0, tlen):
            cnt = int(cnt)
            tprefix[pos : pos + cnt] = float(np.exp2(e))
            pos += cnt
        tail = max(0.0, 1.0 - float(np.exp2(view.log2_mass_of_prefix(tlen))))
        rho_gamma = np.kron(np.diag(tprefix), gamma)
        d_reduced = float(np.abs(np.linalg.eigvalsh(outcome.X - rho_gamma)).sum()) + tail
    else:
        trpi_x = _x_prefix_mass(outcome, n1) * trp2_gamma
        if outcome.weights is not None:
            d = outcome.weights.size
            cover = int(min(d, view.total_dim))
            tprefix = np.zeros(d)
            pos = 0
            for cnt, e in view.runs(0, cover):
                cnt = int(cnt)
                tprefix[pos : pos + cnt] = float(np.exp2(e))
                pos += cnt
            tail = max(0.0, 1.0 - float(np.exp2(view.log2_mass_of_prefix(cover))))
        else:
            tprefix = None
            tail = 0.0
        d_reduced = _x_power_distance(outcome, tprefix, tail)

    log2_bound = log2_n1 + math.log2(max(s2, 1)) + log2_xnorm
    trpi_x_bound = float(np.exp2(min(log2_bound, 1024.0)))
    trpi_x_bound_ok = (
        trpi_x <= 0.0 or math.log2(trpi_x) <= log2_bound + 1e-9
    )

    witness_lower = 2.0 * (trpi_rho - trpi_x)
    witness_ok = witness_lower <= d_reduced + 1e-9
    dp_ok = d_reduced <= outcome.product_error + 1e-9

    err = outcome.error
    linear_envelope_ok = outcome.product_error < 2.0 * err + 1e-12
    sqrt_envelope_ok = outcome.product_error <= 2.0 * math.sqrt(
        max(0.0, err - err * err / 4.0)
    ) + 1e-9

    margin = trpi_rho - d_reduced / 2.0
    if margin > 0.0:
        implied = math.log2(margin) + log2_d - log2_n1 - math.log2(max(s2, 1))
    else:
        implied = NEG_INF
    implied_ok = (not math.isfinite(implied)) or (c + s >= implied - 1e-6)

    log2_capture = log2_d - sqrt_term - log2_n1 - math.log2(max(s2, 1))
    # same bound again but with the margin pinned to the reference parameters
    ref_margin = delta_gamma / 4.0 - eps0
    if ref_margin > 0.0:
        ref_implied = sqrt_term + math.log2(ref_margin) - log2_capture
    else:
        ref_implied = NEG_INF
    ref_bound_ok = (not math.isfinite(ref_implied)) or (c + s >= ref_implied - 1e-6)

    return TheoremChainCertificate(
        n=n,
        c=c,
        s=s,
        log2_d=log2_d,
        error=err,
        product_error=outcome.product_error,
        log2_prob=outcome.log2_prob,
        entropy=stats.entropy,
        alpha=stats.alpha,
        beta=stats.beta,
        n_threshold=n_threshold,
        n_past_threshold=n_past,
        n1=int(n1),
        log2_n1=log2_n1,
        bound_n1_ok=bound_n1_ok,
        trp1_rho=trp1_rho,
        trp1_quarter_ok=trp1_rho > 0.25,
        trp1_delta_rho_ok=trp1_rho >= delta_rho,
        s2=s2,
        trp2_gamma=trp2_gamma,
        trpi_rho=trpi_rho,
        margin_quarter_ok=trpi_rho >= delta_gamma / 4.0 - 1e-12,
        x_norm=x_norm,
        xnorm_pd_ok=xnorm_pd_ok,
        xnorm_cc_ok=xnorm_cc_ok,
        prob_qualifies=prob_qualifies,
        trpi_x=trpi_x,
        trpi_x_bound=trpi_x_bound,
        trpi_x_bound_ok=trpi_x_bound_ok,
        witness_lower=witness_lower,
        d_reduced=d_reduced,
        witness_ok=witness_ok,
        dp_ok=dp_ok,
        linear_envelope_ok=linear_envelope_ok,
        sqrt_envelope_ok=sqrt_envelope_ok,
        implied_c_plus_s=implied,
        implied_ok=implied_ok,
        log2_capture_const=log2_capture,
        reference_margin=ref_margin,
        reference_implied_lower=ref_implied,
        reference_bound_ok=ref_bound_ok,
        eps_within_reference=err <= eps0,
        delta_rho=delta_rho,
        delta_gamma=delta_gamma,
        eps0=eps0,
    )
