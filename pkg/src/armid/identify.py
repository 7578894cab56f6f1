"""Parameter estimation from stacked regressor data.

Three estimators share the measurement model ``T = W alpha + w0``:

* :func:`ols_identify` - unconstrained least squares restricted to the
  identifiable subspace, unidentifiable directions filled from a prior.
* :func:`consistent_identify` - the same residual plus a regularizer, subject
  to per-link pseudo-inertia positive definiteness and nonnegative friction
  and rotor terms. The problem is convex; it is solved to global optimality
  by a path-following log-det barrier method with Newton inner iterations.
* :func:`payload_identify` - re-identification of the last link with a
  grasped object, estimating the parameter difference under a positive
  definite pseudo-inertia constraint on both the difference and the
  composite link.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dynamics import RegressorStack
from .model import (
    FeasibilityReport,
    INERTIAL_PARAMS_PER_LINK,
    LinkInertialParams,
    PARAMS_PER_LINK,
    inertia_about_com,
    is_physically_feasible,
    pseudo_inertia,
)

DEFAULT_SVD_THRESHOLD = 1e-8


class IdentifyError(Exception):
    """Base error for identification failures."""


class InfeasiblePriorError(IdentifyError):
    """The barrier starting point is not strictly feasible."""


class BarrierError(IdentifyError):
    """Newton iteration on the barrier subproblem failed."""

    def __init__(self, message: str, trace: "BarrierTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SubspaceReport:
    """Rank-revealing split of parameter space for a given regressor."""

    rank: int
    identifiable_basis: np.ndarray
    unidentifiable_basis: np.ndarray
    singular_values: np.ndarray
    threshold: float

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class BarrierTrace:
    """Path-following record: one entry per barrier stage."""

    mu_path: tuple[float, ...]
    objective_path: tuple[float, ...]
    newton_iterations: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "mu_path": list(self.mu_path),
            "objective_path": list(self.objective_path),
            "newton_iterations": list(self.newton_iterations),
        }


@dataclass(frozen=True)
class IdentificationResult:
    alpha_hat: np.ndarray
    residual: float
    link_feasibility: tuple[FeasibilityReport, ...]
    subspace: SubspaceReport
    method: str
    trace: BarrierTrace | None = None

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha_hat.tolist(),
            "residual": self.residual,
            "link_feasibility": [r.as_dict() for r in self.link_feasibility],
            "subspace": self.subspace.as_dict(),
            "trace": self.trace.as_dict() if self.trace else None,
        }


@dataclass(frozen=True)
class PayloadResult:
    params: LinkInertialParams
    pseudo_inertia_min_eig: float
    composite_min_eig: float
    residual: float
    boundary_warning: bool
    object_frame_note: str
    trace: BarrierTrace

    def as_dict(self) -> dict:
        return {
            "mass": self.params.mass,
            "first_moment": self.params.first_moment.tolist(),
            "rotational_inertia": self.params.rotational_inertia.tolist(),
            "pseudo_inertia_min_eig": self.pseudo_inertia_min_eig,
            "composite_min_eig": self.composite_min_eig,
            "residual": self.residual,
            "boundary_warning": self.boundary_warning,
            "object_frame_note": self.object_frame_note,
            "trace": self.trace.as_dict(),
        }


def identifiable_subspace(W: np.ndarray, threshold: float = DEFAULT_SVD_THRESHOLD) -> SubspaceReport:
    """Split parameter directions by whether they influence the data.

    Directions whose singular value exceeds ``threshold * sigma_max`` span the
    identifiable subspace; the orthogonal complement is unidentifiable for
    this data matrix.
    """
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise IdentifyError("empty regressor matrix")
    _, s, vt = np.linalg.svd(W, full_matrices=True)
    d = W.shape[1]
    sigma_max = s[0] if s.size else 0.0
    rank = int(np.sum(s > threshold * sigma_max)) if sigma_max > 0 else 0
    singular = np.zeros(d)
    singular[: s.size] = s
    return SubspaceReport(
        rank=rank,
        identifiable_basis=vt[:rank].T.copy(),
        unidentifiable_basis=vt[rank:].T.copy(),
        singular_values=singular,
        threshold=threshold,
    )


def _link_feasibility(stack: RegressorStack, alpha_free: np.ndarray):
    full = stack.embed(alpha_free)
    reports = []
    for i in range(stack.num_links):
        p = LinkInertialParams.from_vector(
            full[i * PARAMS_PER_LINK : (i + 1) * PARAMS_PER_LINK]
        )
        reports.append(is_physically_feasible(p, tol=0.0))
    return tuple(reports)


def ols_identify(
    stack: RegressorStack,
    prior: np.ndarray | None = None,
    threshold: float = DEFAULT_SVD_THRESHOLD,
) -> IdentificationResult:
    """Minimum-norm least squares on the identifiable subspace.

    Unidentifiable directions are filled from the prior (zeros by default),
    so the solution is deterministic even for rank-deficient stacks.
    """
    A = stack.W
    b = stack.T - stack.w0
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise IdentifyError("empty stack")
    sub = identifiable_subspace(A, threshold)
    if A.shape[0] < sub.rank:
        raise IdentifyError("fewer rows than identifiable directions")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    keep = s > threshold * s[0] if s[0] > 0 else np.zeros(s.shape, dtype=bool)
    coeff = np.zeros_like(s)
    coeff[keep] = (u.T @ b)[keep] / s[keep]
    alpha = vt.T @ coeff
    prior_free = _prior_free(stack, prior)
    if sub.unidentifiable_basis.shape[1]:
        bun = sub.unidentifiable_basis
        alpha = alpha + bun @ (bun.T @ prior_free)
    full = stack.embed(alpha)
    feas = _link_feasibility(stack, alpha) if stack.free_mask is not None else ()
    return IdentificationResult(
        alpha_hat=full,
        residual=stack.residual_norm_sq(alpha),
        link_feasibility=feas,
        subspace=sub,
        method="ols",
    )


def _prior_free(stack: RegressorStack, prior: np.ndarray | None) -> np.ndarray:
    d = stack.W.shape[1]
    if prior is None:
        return np.zeros(d)
    prior = np.asarray(prior, dtype=float)
    if stack.free_mask is not None and prior.size == stack.free_mask.size:
        return prior[stack.free_mask]
    if prior.size == d:
        return prior.copy()
    raise IdentifyError(f"prior has {prior.size} entries, expected {d} or full 13N")


# --- log-det barrier machinery ---------------------------------------------------


@dataclass
class _LmiTerm:
    constant: np.ndarray
    indices: np.ndarray
    bases: np.ndarray  # (k, 4, 4) aligned with indices

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.constant + np.einsum("k,kij->ij", x[self.indices], self.bases)


def _pseudo_inertia_bases() -> np.ndarray:
    """d(pseudo-inertia)/d(param) for the 10 inertial parameters."""
    bases = np.zeros((INERTIAL_PARAMS_PER_LINK, 4, 4))
    bases[0, 3, 3] = 1.0  # mass
    for j in range(3):  # first moment
        bases[1 + j, j, 3] = 1.0
        bases[1 + j, 3, j] = 1.0
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    for k, (r, c) in enumerate(pairs):
        E = np.zeros((3, 3))
        E[r, c] = 1.0
        E[c, r] = 1.0
        bases[4 + k, :3, :3] = 0.5 * np.trace(E) * np.eye(3) - E
    return bases


_PI_BASES = _pseudo_inertia_bases()


def _pseudo_inertia_from_10(v: np.ndarray) -> np.ndarray:
    return np.einsum("k,kij->ij", v, _PI_BASES)


def _is_pd(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
        return True
    except np.linalg.LinAlgError:
        return False


def _barrier_value(x, lmis, log_indices, mu, f_quad):
    val = f_quad(x)
    for term in lmis:
        J = term.value(x)
        sign, logdet = np.linalg.slogdet(J)
        if sign <= 0:
            return np.inf
        val -= mu * logdet
    if log_indices.size:
        if np.any(x[log_indices] <= 0):
            return np.inf
        val -= mu * float(np.sum(np.log(x[log_indices])))
    return val


def _strictly_feasible(x, lmis, log_indices) -> bool:
    if log_indices.size and np.any(x[log_indices] <= 0):
        return False
    return all(_is_pd(term.value(x)) for term in lmis)


def _barrier_minimize(
    quad_hess: np.ndarray,
    quad_grad,
    f_quad,
    lmis: Sequence[_LmiTerm],
    log_indices: np.ndarray,
    x0: np.ndarray,
    mu_initial: float | None = None,
    mu_shrink: float = 0.2,
    mu_final: float = 1e-10,
    newton_max_iter: int = 60,
) -> tuple[np.ndarray, BarrierTrace]:
    """Path-following minimization of a convex quadratic under LMI and
    positivity constraints.

    ``quad_hess`` is the constant Hessian of the quadratic objective,
    ``quad_grad(x)`` its gradient, and ``f_quad(x)`` its value. Each barrier
    stage runs damped Newton until the Newton decrement is negligible, then
    shrinks mu geometrically.
    """
    x = x0.copy()
    if not _strictly_feasible(x, lmis, log_indices):
        raise InfeasiblePriorError("barrier start point is not strictly interior")

    n_terms = max(1, len(lmis) * 4 + log_indices.size)
    mu = mu_initial if mu_initial is not None else max(1e-6, (abs(f_quad(x)) + 1.0) / n_terms)
    mu_values, objective_values, newton_counts = [], [], []

    while True:
        iterations = 0
        for _ in range(newton_max_iter):
            grad = quad_grad(x).copy()
            hess = quad_hess.copy()
            for term in lmis:
                J = term.value(x)
                try:
                    J_inv = np.linalg.inv(J)
                except np.linalg.LinAlgError as exc:
                    raise BarrierError("singular pseudo-inertia inside barrier") from exc
                M = np.einsum("ij,kjl->kil", J_inv, term.bases)
                grad[term.indices] -= mu * np.trace(M, axis1=1, axis2=2)
                block = mu * np.einsum("kij,lji->kl", M, M)
                hess[np.ix_(term.indices, term.indices)] += block
            if log_indices.size:
                xi = x[log_indices]
                grad[log_indices] -= mu / xi
                hess[log_indices, log_indices] += mu / xi**2

            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            decrement = float(-grad @ step)
            if decrement <= 0 or 0.5 * decrement < 1e-11 * (1.0 + abs(f_quad(x))):
                break

            phi0 = _barrier_value(x, lmis, log_indices, mu, f_quad)
            t = 1.0
            accepted = False
            for _ in range(60):
                cand = x + t * step
                if _strictly_feasible(cand, lmis, log_indices):
                    phi = _barrier_value(cand, lmis, log_indices, mu, f_quad)
                    if phi <= phi0 - 1e-4 * t * decrement:
                        x = cand
                        accepted = True
                        break
                t *= 0.5
            iterations += 1
            if not accepted:
                break

        mu_values.append(mu)
        objective_values.append(f_quad(x))
        newton_counts.append(iterations)
        if mu <= mu_final:
            break
        mu = max(mu * mu_shrink, mu_final) if mu * mu_shrink > mu_final else mu_final

    trace = BarrierTrace(
        mu_path=tuple(mu_values),
        objective_path=tuple(objective_values),
        newton_iterations=tuple(newton_counts),
    )
    return x, trace


# Minimal ridge keeping barrier subproblems bounded when the caller asks for
# zero regularization on a rank-deficient stack.
_REGULARIZATION_FLOOR = 1e-14


def consistent_identify(
    stack: RegressorStack,
    prior: np.ndarray,
    reg_weight: float | None = None,
    threshold: float = DEFAULT_SVD_THRESHOLD,
    mu_final: float = 1e-10,
) -> IdentificationResult:
    """Physically consistent estimation: least squares under realizability.

    Minimizes ``||W alpha + w0 - T||^2 + reg * ||P_un (alpha - prior)||^2``
    subject to every link's pseudo-inertia being positive definite and all
    friction and rotor terms nonnegative. The regularizer acts only on the
    unidentifiable subspace so identifiable directions stay unbiased; its
    weight defaults to ``1e-3 * sigma_max^2``.

    The prior doubles as the barrier's strictly feasible starting point and
    must satisfy the constraints strictly.
    """
    if stack.free_mask is None:
        raise IdentifyError("consistent_identify needs a stack with link structure")
    A = stack.W
    b = stack.T - stack.w0
    d = A.shape[1]
    if d == 0:
        raise IdentifyError("no free parameters to identify")
    sub = identifiable_subspace(A, threshold)
    sigma_max = sub.singular_values[0]
    if reg_weight is None:
        reg_weight = 1e-3 * sigma_max**2
    if reg_weight < 0:
        raise IdentifyError("reg_weight must be >= 0")
    reg_eff = max(reg_weight, _REGULARIZATION_FLOOR * max(sigma_max**2, 1.0))

    prior_free = _prior_free(stack, prior)
    bun = sub.unidentifiable_basis
    proj_un = bun @ bun.T if bun.shape[1] else np.zeros((d, d))

    AtA = A.T @ A
    Atb = A.T @ b

    def f_quad(x):
        r = A @ x - b
        du = proj_un @ (x - prior_free)
        return float(r @ r) + reg_eff * float(du @ du)

    def quad_grad(x):
        return 2.0 * (AtA @ x - Atb) + 2.0 * reg_eff * (proj_un @ (x - prior_free))

    quad_hess = 2.0 * (AtA + reg_eff * proj_un)

    lmis, log_indices = _build_link_constraints(stack)
    x0 = prior_free.copy()
    if not _strictly_feasible(x0, lmis, log_indices):
        raise InfeasiblePriorError(
            "prior is not strictly feasible (pseudo-inertia PD and frictions > 0 required)"
        )
    x, trace = _barrier_minimize(
        quad_hess, quad_grad, f_quad, lmis, log_indices, x0, mu_final=mu_final
    )

    return IdentificationResult(
        alpha_hat=stack.embed(x),
        residual=stack.residual_norm_sq(x),
        link_feasibility=_link_feasibility(stack, x),
        subspace=sub,
        method="consistent",
        trace=trace,
    )


def _build_link_constraints(stack: RegressorStack):
    """Per-link LMIs and positivity indices in free-parameter coordinates."""
    mask = stack.free_mask
    fixed = stack.fixed_values
    free_index_of = np.cumsum(mask) - 1  # full index -> free index (valid where mask)
    lmis = []
    log_indices = []
    for link in range(stack.num_links):
        base = link * PARAMS_PER_LINK
        inertial = np.arange(base, base + INERTIAL_PARAMS_PER_LINK)
        free_here = mask[inertial]
        if free_here.any():
            fixed_part = np.where(free_here, 0.0, fixed[inertial])
            constant = _pseudo_inertia_from_10(fixed_part)
            idx = free_index_of[inertial[free_here]]
            bases = _PI_BASES[free_here]
            lmis.append(_LmiTerm(constant=constant, indices=idx, bases=bases))
        for slot in (10, 11, 12):
            k = base + slot
            if mask[k]:
                log_indices.append(free_index_of[k])
    return lmis, np.asarray(log_indices, dtype=int)


_OBJECT_FRAME_NOTE = (
    "parameters are expressed in the last link frame; re-express in an object "
    "frame by applying a rigid transform to (m, h, I)"
)


def default_payload_start(scale: float = 1e-3) -> np.ndarray:
    """Small strictly feasible body used as the barrier start for payloads."""
    body = np.zeros(INERTIAL_PARAMS_PER_LINK)
    body[0] = scale
    body[4] = body[7] = body[9] = 0.4 * scale * 0.05**2
    return body


def payload_identify(
    stack_with_object: RegressorStack,
    base_params: np.ndarray,
    last_link_index: int | None = None,
    reg_weight: float | None = None,
    threshold: float = DEFAULT_SVD_THRESHOLD,
    mu_final: float = 1e-10,
) -> PayloadResult:
    """Estimate grasped-object parameters as a last-link difference.

    The stack must have been built with every parameter fixed to
    ``base_params`` except the last link's 10 inertial entries. The decision
    variable is the difference ``p`` between the composite and base link;
    both ``J(p)`` and the composite ``J(base + p)`` are constrained positive
    definite, since the difference must be a real body and so must the
    loaded link.
    """
    stack = stack_with_object
    if stack.free_mask is None:
        raise IdentifyError("payload_identify needs a stack with link structure")
    n = stack.num_links
    last = n - 1 if last_link_index is None else last_link_index
    expected = np.zeros(n * PARAMS_PER_LINK, dtype=bool)
    expected[last * PARAMS_PER_LINK : last * PARAMS_PER_LINK + INERTIAL_PARAMS_PER_LINK] = True
    if not np.array_equal(stack.free_mask, expected):
        raise IdentifyError(
            "stack must leave exactly the last link's 10 inertial parameters free"
        )
    base = np.asarray(base_params, dtype=float)
    if base.shape != (n * PARAMS_PER_LINK,):
        raise IdentifyError(f"base_params must have {n * PARAMS_PER_LINK} entries")
    base10 = base[last * PARAMS_PER_LINK : last * PARAMS_PER_LINK + INERTIAL_PARAMS_PER_LINK]

    A = stack.W
    b = stack.T - stack.w0 - A @ base10
    sub = identifiable_subspace(A, threshold)
    sigma_max = sub.singular_values[0]
    if reg_weight is None:
        reg_weight = 1e-3 * sigma_max**2
    reg_eff = max(reg_weight, _REGULARIZATION_FLOOR * max(sigma_max**2, 1.0))
    bun = sub.unidentifiable_basis
    proj_un = bun @ bun.T if bun.shape[1] else np.zeros((A.shape[1], A.shape[1]))

    p0 = default_payload_start()
    target = p0.copy()

    AtA = A.T @ A
    Atb = A.T @ b

    def f_quad(x):
        r = A @ x - b
        du = proj_un @ (x - target)
        return float(r @ r) + reg_eff * float(du @ du)

    def quad_grad(x):
        return 2.0 * (AtA @ x - Atb) + 2.0 * reg_eff * (proj_un @ (x - target))

    quad_hess = 2.0 * (AtA + reg_eff * proj_un)

    indices = np.arange(INERTIAL_PARAMS_PER_LINK)
    lmi_difference = _LmiTerm(
        constant=np.zeros((4, 4)), indices=indices, bases=_PI_BASES
    )
    lmi_composite = _LmiTerm(
        constant=_pseudo_inertia_from_10(base10), indices=indices, bases=_PI_BASES
    )
    lmis = [lmi_difference, lmi_composite]
    log_indices = np.asarray([], dtype=int)

    # Shrink the generic start until both LMIs hold strictly.
    for _ in range(40):
        if _strictly_feasible(p0, lmis, log_indices):
            break
        p0 *= 0.5
    else:
        raise InfeasiblePriorError("could not find a strictly feasible payload start")

    p, trace = _barrier_minimize(
        quad_hess, quad_grad, f_quad, lmis, log_indices, p0, mu_final=mu_final
    )

    diff = np.zeros(PARAMS_PER_LINK)
    diff[:INERTIAL_PARAMS_PER_LINK] = p
    params = LinkInertialParams.from_vector(diff)
    min_eig = float(np.linalg.eigvalsh(pseudo_inertia(params))[0])
    composite = LinkInertialParams.from_vector(
        np.concatenate([base10 + p, np.zeros(3)])
    )
    composite_eig = float(np.linalg.eigvalsh(pseudo_inertia(composite))[0])
    scale = 1.0 + float(np.abs(pseudo_inertia(params)).max())
    warning = min_eig < 1e-8 * scale
    return PayloadResult(
        params=params,
        pseudo_inertia_min_eig=min_eig,
        composite_min_eig=composite_eig,
        residual=stack.residual_norm_sq(base10 + p),
        boundary_warning=warning,
        object_frame_note=_OBJECT_FRAME_NOTE,
        trace=trace,
    )


def error_metrics(
    estimate: LinkInertialParams, truth: LinkInertialParams, char_length: float
) -> tuple[float, float, float]:
    """Percentage errors for mass, center of mass, and CoM-frame inertia.

    CoM error is normalized by a characteristic length; inertia error is the
    relative Frobenius distance between the CoM-frame inertia tensors.
    """
    if char_length == 0:
        raise IdentifyError("char_length must be nonzero")
    if truth.mass <= 0:
        raise IdentifyError("truth mass must be > 0")
    mass_pct = 100.0 * abs(estimate.mass - truth.mass) / truth.mass
    com_est = estimate.first_moment / estimate.mass
    com_true = truth.first_moment / truth.mass
    com_pct = 100.0 * float(np.linalg.norm(com_est - com_true)) / char_length
    inertia_est = inertia_about_com(estimate)
    inertia_true = inertia_about_com(truth)
    inertia_pct = 100.0 * float(
        np.linalg.norm(inertia_est - inertia_true) / np.linalg.norm(inertia_true)
    )
    return mass_pct, com_pct, inertia_pct


def nearest_base_params(
    available: Mapping[float, np.ndarray], configuration: float
) -> tuple[float, np.ndarray]:
    """Pick the base parameter set whose configuration label is closest.

    Stands in for matching the gripper opening used during robot
    identification to the opening observed while holding an object.
    """
    if not available:
        raise IdentifyError("no base parameter sets available")
    label = min(available, key=lambda k: (abs(k - configuration), k))
    return label, np.asarray(available[label], dtype=float)
