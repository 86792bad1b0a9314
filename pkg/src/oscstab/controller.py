"""Time-varying oscillatory feedback laws.

The control has a time-invariant part ``v0`` driving descent of the Lyapunov
candidate where its gradient lies in the input span, plus, for every bracket
pair ``I = (i, j)``, an oscillatory part that excites the bracket direction:

    u_k(x, t) = v0_k(x) + gamma * sum_I v_k^I(x) * phi_k^I(t)

The pair components split a scalar profile ``vtilde^I`` as
``v_i = sqrt(|vtilde|)`` and ``v_j = sqrt(|vtilde|) * sign(vtilde)`` so their
product reproduces ``vtilde`` exactly; the oscillators are cosine on the
``i`` channel and sine on the ``j`` channel at a pair-specific integer
multiple of the base frequency, with distinct multipliers so that different
pairs do not cross-couple over a period.

Laws are either synthesized pointwise by solving
``F(x) * (v0, vtilde) = -grad V(x)^T`` against the bracket matrix ``F``, or
supplied in closed form by the caller; both modes share the same evaluation
path so they can cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import dualnum, linsolve
from .vecfield import VectorFieldSystem, _bracket_columns, input_matrix, lie_bracket

__all__ = [
    "OscillatorAssignment", "FeedbackLaw", "SynthesisError",
    "assign_frequencies", "oscillator", "split_component",
    "synthesize_components", "synthesized_law", "user_law", "feedback_eval",
    "law_with_period", "pair_bracket_field", "drift_field",
]

Pair = Tuple[int, int]


class SynthesisError(RuntimeError):
    """Feedback synthesis failed at a point (ill-conditioned bracket matrix)."""

    def __init__(self, msg: str, condition: float):
        super().__init__(msg)
        self.condition = condition


def assign_frequencies(pairs: Sequence[Pair],
                       override: Optional[Sequence[int]] = None) -> Tuple[int, ...]:
    """Integer frequency multipliers for the pair set, in pair order.

    Defaults to 1, 2, ..., |S|.  An override is accepted as long as the
    multipliers are positive integers and pairwise distinct (resonant
    assignments would couple different bracket pairs).
    """
    if len(pairs) == 0:
        raise ValueError("pair set must be nonempty")
    if override is None:
        return tuple(range(1, len(pairs) + 1))
    kappas = tuple(int(k) for k in override)
    if len(kappas) != len(pairs):
        raise ValueError("need one frequency multiplier per pair")
    if any(k < 1 for k in kappas):
        raise ValueError("frequency multipliers must be >= 1")
    if len(set(kappas)) != len(kappas):
        raise ValueError(f"duplicate frequency multipliers: {kappas}")
    return kappas


@dataclass(frozen=True)
class OscillatorAssignment:
    """Pair set with frequency multipliers and the common period."""

    pairs: Tuple[Pair, ...]
    kappas: Tuple[int, ...]
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("period eps must be positive")
        # route through the validator so invariants hold however constructed
        object.__setattr__(self, "kappas",
                           assign_frequencies(self.pairs, self.kappas))

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.eps

    def amplitude(self, q: int) -> float:
        return 2.0 * math.sqrt(self.kappas[q] * math.pi / self.eps)

    def index_of(self, pair: Pair) -> int:
        try:
            return self.pairs.index(tuple(pair))
        except ValueError:
            raise KeyError(f"pair {pair} not in assignment") from None


def oscillator(assignment: OscillatorAssignment, pair: Pair, role: str,
               t: float) -> float:
    """Oscillator sample for one pair: cosine channel ("first") or sine
    channel ("second"), amplitude ``2 sqrt(kappa pi / eps)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    q = assignment.index_of(pair)
    th = assignment.kappas[q] * assignment.omega * t
    amp = assignment.amplitude(q)
    if role == "first":
        return amp * math.cos(th)
    if role == "second":
        return amp * math.sin(th)
    raise ValueError(f"role must be 'first' or 'second', got {role!r}")


def split_component(vt):
    """Split a scalar profile into the two pair channels.

    Returns ``(sqrt(|vt|), sqrt(|vt|) * sign(vt))`` with ``sign(0) = 0`` so
    the control stays continuous through sign switches; the product of the
    two values reproduces ``vt`` up to rounding.
    """
    if vt == 0.0:
        return 0.0, 0.0
    r = math.sqrt(abs(vt))
    return r, math.copysign(r, vt)


# --- pointwise synthesis from a Lyapunov gradient ---------------------------

_MAX_CONDITION = 1e12
_RESIDUAL_TOL = 1e-10


def synthesize_components(sys: VectorFieldSystem, lyap, x):
    """Solve the bracket matrix against ``-grad V`` at one point.

    Returns ``(v0, vtilde)``: the first ``m`` entries of the solution and the
    per-pair profiles in pair order.  The solve is refused when the condition
    estimate exceeds 1e12, and the residual is checked against
    ``1e-10 * max(1, ||grad V||)``.
    """
    x = np.asarray(x, dtype=float)
    mat = _bracket_columns(sys, x)
    cond = linsolve.condition_1norm(mat)
    if not cond < _MAX_CONDITION:
        raise SynthesisError(
            f"bracket matrix too ill-conditioned at x={x.tolist()} "
            f"(condition {cond:.3e})", cond)
    g = np.asarray(lyap.grad(x), dtype=float)
    sol = linsolve.solve(mat, -g)
    res = float(np.linalg.norm(mat @ sol + g))
    if res > _RESIDUAL_TOL * max(1.0, float(np.linalg.norm(g))):
        raise SynthesisError(
            f"synthesis residual {res:.3e} exceeds tolerance at x={x.tolist()}",
            cond)
    return sol[:sys.m], sol[sys.m:]


def _dual_synthesis(sys: VectorFieldSystem, lyap, x):
    """Profiles and their Jacobian via dual evaluation through the solve."""
    xd = dualnum.seed_state(np.asarray(x, dtype=float))
    mat = _bracket_columns(sys, xd)
    g = lyap.grad(xd)
    sol = linsolve.solve(mat, np.array([-e for e in g], dtype=object))
    vt = sol[sys.m:]
    vals = np.array([dualnum.value(e) for e in vt])
    jac = np.vstack([
        e.grad if isinstance(e, dualnum.Dual) else np.zeros(sys.n) for e in vt])
    return vals, jac


@dataclass(frozen=True)
class FeedbackLaw:
    """Immutable bundle of control components for one system.

    ``vtilde`` holds one scalar profile per bracket pair in pair order;
    ``vtilde_grads`` optionally carries analytic gradients (otherwise
    gradients fall back to dual evaluation of the profile closures).
    ``vtilde_all``/``vtilde_jacobian`` are batched evaluators used by the
    certificate and prediction code to avoid repeated synthesis solves.
    ``fast_params`` advertises a compiled integration kernel to the
    integrator; it never changes semantics.  Evaluation is pure and
    reentrant, so laws are safe to share across sweep workers.
    """

    system: VectorFieldSystem
    gamma: float
    assignment: OscillatorAssignment
    v0: Callable[[np.ndarray], np.ndarray]
    vtilde: Tuple[Callable[[np.ndarray], float], ...]
    mode: str
    vtilde_grads: Optional[Tuple[Callable[[np.ndarray], np.ndarray], ...]] = None
    vtilde_all: Optional[Callable[[np.ndarray], np.ndarray]] = None
    vtilde_jacobian: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None
    fast_params: Optional[Mapping] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.assignment.pairs != self.system.pairs:
            raise ValueError("assignment pairs must match the system pair set")
        if len(self.vtilde) != len(self.system.pairs):
            raise ValueError("need one profile per bracket pair")
        if self.mode not in ("synthesized", "user"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def eps(self) -> float:
        return self.assignment.eps

    def vtilde_values(self, x) -> np.ndarray:
        if self.vtilde_all is not None:
            return np.asarray(self.vtilde_all(x), dtype=float)
        return np.array([f(x) for f in self.vtilde], dtype=float)

    def vtilde_values_and_grads(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """Profiles and gradient rows at ``x``, shape (|S|,) and (|S|, n)."""
        if self.vtilde_jacobian is not None:
            vals, jac = self.vtilde_jacobian(x)
            return np.asarray(vals, dtype=float), np.asarray(jac, dtype=float)
        vals = self.vtilde_values(x)
        if self.vtilde_grads is not None:
            jac = np.vstack([g(x) for g in self.vtilde_grads])
        else:
            jac = np.vstack([dualnum.gradient(f, x)[1] for f in self.vtilde])
        return vals, jac


def synthesized_law(sys: VectorFieldSystem, lyap, gamma: float, eps: float,
                    kappas: Optional[Sequence[int]] = None) -> FeedbackLaw:
    """Law whose components solve the bracket matrix against ``-grad V``."""
    assignment = OscillatorAssignment(sys.pairs,
                                      assign_frequencies(sys.pairs, kappas), eps)
    return FeedbackLaw(
        system=sys, gamma=float(gamma), assignment=assignment,
        v0=lambda x: synthesize_components(sys, lyap, x)[0],
        vtilde=tuple(
            (lambda x, q=q: float(synthesize_components(sys, lyap, x)[1][q]))
            for q in range(len(sys.pairs))),
        mode="synthesized",
        vtilde_all=lambda x: synthesize_components(sys, lyap, x)[1],
        vtilde_jacobian=lambda x: _dual_synthesis(sys, lyap, x),
    )


def user_law(sys: VectorFieldSystem, gamma: float, eps: float,
             v0: Callable[[np.ndarray], np.ndarray],
             vtilde: Sequence[Callable[[np.ndarray], float]],
             vtilde_grads: Optional[Sequence[Callable]] = None,
             vtilde_all: Optional[Callable] = None,
             kappas: Optional[Sequence[int]] = None,
             fast_params: Optional[Mapping] = None) -> FeedbackLaw:
    """Law with caller-supplied closed-form components.

    The components must satisfy the same split identities as synthesized
    ones; nothing else is assumed.
    """
    assignment = OscillatorAssignment(sys.pairs,
                                      assign_frequencies(sys.pairs, kappas), eps)
    return FeedbackLaw(
        system=sys, gamma=float(gamma), assignment=assignment, v0=v0,
        vtilde=tuple(vtilde), mode="user",
        vtilde_grads=tuple(vtilde_grads) if vtilde_grads is not None else None,
        vtilde_all=vtilde_all, fast_params=fast_params)


def law_with_period(law: FeedbackLaw, eps: float) -> FeedbackLaw:
    """Same components and frequency multipliers, new oscillation period."""
    return replace(law, assignment=replace(law.assignment, eps=float(eps)))


def feedback_eval(law: FeedbackLaw, x, t: float) -> np.ndarray:
    """Control vector ``u(x, t)``; the time origin is the simulation start."""
    x = np.asarray(x, dtype=float)
    u = np.array(law.v0(x), dtype=float, copy=True)
    if u.shape != (law.system.m,):
        raise ValueError("v0 must return one value per input")
    if law.gamma == 0.0:
        return u
    a = law.assignment
    vts = law.vtilde_values(x)
    for q, (i, j) in enumerate(a.pairs):
        vt = vts[q]
        if not np.isfinite(vt):
            raise ArithmeticError(f"profile for pair {a.pairs[q]} "
                                  f"is not finite at x={x.tolist()}")
        vi, vj = split_component(vt)
        th = a.kappas[q] * a.omega * t
        amp = a.amplitude(q)
        u[i - 1] += law.gamma * vi * amp * math.cos(th)
        u[j - 1] += law.gamma * vj * amp * math.sin(th)
    return u


# --- closed-loop field algebra ----------------------------------------------

def drift_field(law: FeedbackLaw, x) -> np.ndarray:
    """Averaged drift ``g_0(x) = sum_k v0_k(x) f_k(x)``."""
    x = np.asarray(x, dtype=float)
    return input_matrix(law.system, x) @ np.asarray(law.v0(x), dtype=float)


def pair_bracket_field(law: FeedbackLaw, q: int, x,
                       vt: Optional[float] = None,
                       vt_grad: Optional[np.ndarray] = None) -> np.ndarray:
    """Bracket of the two oscillatory fields of pair ``q`` (0-based).

    For ``g_i = v_i f_i`` and ``g_j = v_j f_j`` with the split components,

        [g_i, g_j] = vtilde [f_i, f_j]
                     + (grad vtilde . f_i) f_j / 2
                     - (grad vtilde . f_j) f_i / 2,

    using that ``v_i grad v_j`` and ``v_j grad v_i`` both reduce to
    ``grad vtilde / 2`` away from sign switches.  At a switch point
    (``vtilde = 0``) every term carries a vanishing split factor and the
    bracket is taken as zero; the affected terms of downstream certificates
    vanish there by the same convention.
    """
    sys = law.system
    x = np.asarray(x, dtype=float)
    if vt is None:
        vals, jac = law.vtilde_values_and_grads(x)
        vt, vt_grad = float(vals[q]), jac[q]
    if vt == 0.0:
        return np.zeros(sys.n)
    if not np.isfinite(vt) or not np.all(np.isfinite(vt_grad)):
        raise ArithmeticError(
            f"profile or gradient for pair {sys.pairs[q]} not finite "
            f"at x={x.tolist()}")
    i, j = sys.pairs[q]
    fi = sys.field(i, x)
    fj = sys.field(j, x)
    br = lie_bracket(sys, i, j, x)
    return vt * br + 0.5 * ((vt_grad @ fi) * fj - (vt_grad @ fj) * fi)
