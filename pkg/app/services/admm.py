"""
Fused-centroid engine: ADMM with an accelerated inner loop for

    min_U (a/2) ||Y - U||_F^2 + lam * sum_e r_e ||(A_E U)_e||

The split variable B = A_E U is eliminated in closed form, so the inner problem in U
is smooth and solved by FISTA. The engine serves the MTLRRC U-step (a = lambda1,
Y = W - O) and the RRC U-step (a = 1, Y = X - O).
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from app.core.config import settings
from app.core.exceptions import InvalidArgumentError
from app.models.graph import TaskGraph
from app.services.penalty import ball_projection, group_soft_threshold
from app.services.taskgraph import apply_incidence, apply_incidence_transpose, lipschitz_step


class CentroidSolution(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    iterations: int
    converged: bool


class FusedCentroidEngine:
    """
    Solver for the fused-centroid subproblem on a fixed task graph.

    Multiplier rows of ``S`` follow the graph's edge order. The augmented Lagrangian
    uses ``s^T (A_E U - B)``, so the dual update is ``S <- prox(S + nu A_E U, lam r)``.
    """

    def __init__(
        self,
        graph: TaskGraph,
        nu: Optional[float] = None,
        fista_tol: Optional[float] = None,
        max_fista: Optional[int] = None,
        restart: Optional[bool] = None,
    ):
        self.logger = logging.getLogger("mtlrrc.FusedCentroidEngine")
        self.graph = graph
        self.nu = settings.DEFAULT_NU if nu is None else float(nu)
        self.fista_tol = settings.FISTA_TOL if fista_tol is None else fista_tol
        self.max_fista = settings.FISTA_MAX_ITER if max_fista is None else max_fista
        self.restart = settings.FISTA_RESTART if restart is None else restart
        if self.nu <= 0:
            raise InvalidArgumentError("nu must be positive")

    def zero_duals(self, p: int) -> np.ndarray:
        return np.zeros((self.graph.n_edges, p))

    def dual_prox(self, S: np.ndarray, U: np.ndarray, lam: float) -> np.ndarray:
        """Edge-wise ``ball_projection(S + nu A_E U, lam r_e)``."""
        if self.graph.n_edges == 0:
            return np.zeros((0, np.asarray(U).shape[1]))
        return ball_projection(S + self.nu * apply_incidence(U, self.graph), lam * self.graph.weight_array)

    def gradient(self, U: np.ndarray, Y: np.ndarray, S: np.ndarray, a: float, lam: float) -> np.ndarray:
        """Gradient of the smoothed objective: ``a (U - Y) + A_E^T F``."""
        grad = a * (U - Y)
        if self.graph.n_edges:
            grad = grad + apply_incidence_transpose(self.dual_prox(S, U, lam), self.graph)
        return grad

    def smoothed_objective(self, U: np.ndarray, Y: np.ndarray, S: np.ndarray, a: float, lam: float) -> float:
        """
        ``(a/2)||Y - U||^2 + sum_e min_b {lam r ||b|| + s^T (dU - b) + (nu/2)||dU - b||^2}``,
        with the inner minimum in closed form.
        """
        value = 0.5 * a * float(np.sum((Y - U) ** 2))
        if self.graph.n_edges == 0:
            return value
        nu = self.nu
        diffs = apply_incidence(U, self.graph)
        for e, weight in enumerate(self.graph.weights):
            s = S[e]
            radius = lam * weight
            b = group_soft_threshold(diffs[e] + s / nu, radius / nu)
            gap = diffs[e] - b
            value += radius * float(np.linalg.norm(b)) + float(s @ gap) + 0.5 * nu * float(gap @ gap)
        return value

    def _shortcut(self, Y: np.ndarray, a: float, lam: float) -> Optional[np.ndarray]:
        if lam == 0 or self.graph.n_edges == 0:
            return Y.copy()
        if a == 0:
            # any constant matrix minimises the fusion term; take the mean row
            return np.tile(Y.mean(axis=0), (Y.shape[0], 1))
        return None

    def fista(
        self, Y: np.ndarray, S: np.ndarray, U0: np.ndarray, a: float, lam: float
    ) -> tuple[np.ndarray, int]:
        """
        Accelerated gradient descent on the smoothed objective with ``S`` held fixed.

        Args:
            Y: target matrix (T x p)
            S: current multipliers (|E| x p)
            U0: warm start
            a: curvature of the quadratic term
            lam: fusion weight

        Returns:
            Tuple of the minimiser and the number of inner iterations
        """
        shortcut = self._shortcut(Y, a, lam)
        if shortcut is not None:
            return shortcut, 0

        step = lipschitz_step(self.graph, a, self.nu)
        H = np.array(U0, dtype=float, copy=True)
        C = H.copy()
        alpha = 1.0
        for iteration in range(1, self.max_fista + 1):
            grad = self.gradient(C, Y, S, a, lam)
            H_next = C - step * grad
            alpha_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * alpha**2))
            if self.restart and float(np.sum(grad * (H_next - H))) > 0:
                # momentum points uphill
                alpha_next = 1.0
                C = H_next
            else:
                C = H_next + ((alpha - 1.0) / alpha_next) * (H_next - H)
            change = float(np.max(np.abs(H_next - H)))
            H, alpha = H_next, alpha_next
            if change <= self.fista_tol:
                return H, iteration
        self.logger.debug(f"FISTA reached {self.max_fista} iterations")
        return H, self.max_fista

    def solve(
        self,
        Y: np.ndarray,
        a: float,
        lam: float,
        U0: Optional[np.ndarray] = None,
        S0: Optional[np.ndarray] = None,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
    ) -> CentroidSolution:
        """
        Run the ADMM to convergence for a fixed target ``Y``.

        Convergence requires the relative sup-norm change of U and the primal residual
        ``||S_new - S||_inf / nu`` to fall below ``tol``.
        """
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[0] != self.graph.n_tasks:
            raise InvalidArgumentError(f"target must have {self.graph.n_tasks} rows")
        if a < 0 or lam < 0:
            raise InvalidArgumentError("a and lam must be non-negative")
        tol = settings.RRC_TOL if tol is None else tol
        max_iter = settings.FISTA_MAX_ITER if max_iter is None else max_iter
        p = Y.shape[1]

        shortcut = self._shortcut(Y, a, lam)
        if shortcut is not None:
            return CentroidSolution(shortcut, self.zero_duals(p), 0, True)

        U = Y.copy() if U0 is None else np.array(U0, dtype=float, copy=True)
        S = self.zero_duals(p) if S0 is None else np.array(S0, dtype=float, copy=True)
        for iteration in range(1, max_iter + 1):
            U_next, _ = self.fista(Y, S, U, a, lam)
            S_next = self.dual_prox(S, U_next, lam)
            u_change = float(np.max(np.abs(U_next - U))) / (1.0 + float(np.max(np.abs(U))))
            primal = float(np.max(np.abs(S_next - S))) / self.nu
            U, S = U_next, S_next
            if u_change <= tol and primal <= tol * (1.0 + float(np.max(np.abs(S)))):
                return CentroidSolution(U, S, iteration, True)

        self.logger.warning(f"Fused-centroid ADMM did not converge in {max_iter} iterations")
        return CentroidSolution(U, S, max_iter, False)
