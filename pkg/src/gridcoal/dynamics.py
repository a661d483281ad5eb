"""Coalition-state Markov chain built from merge/split best replies.

States are the canonical partitions of the provider set (in RGS order).
Off-diagonal transition probabilities multiply, over the players acting in a
move, the probability of acting (sigma) times the best-reply probability
(rho if the player's Shapley payoff does not decrease, epsilon otherwise),
times (1 - sigma) for each bystander.  Diagonals are the residual outflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .partitions import Move, Partition, enumerate_partitions, neighbors

_ROW_TOL = 1e-12
_EDGE_TOL = 1e-15


class ChainConsistencyError(RuntimeError):
    """Total outflow of some state exceeds 1 (invalid sigma/neighborhood combo)."""


class StationaryConvergenceError(RuntimeError):
    def __init__(self, residual, iterations):
        self.residual = residual
        super().__init__(
            f"stationary solve did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


@dataclass(frozen=True)
class DynamicsParams:
    """Merge/split chain parameters: act probability, compliance, noise."""

    sigma: float = 0.5
    rho: float = 0.99
    epsilon: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.sigma <= 1.0):
            raise ValueError(f"sigma must be in (0, 1], got {self.sigma}")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if not (0.0 <= self.epsilon < self.rho):
            raise ValueError(
                f"epsilon must satisfy 0 <= epsilon < rho, got {self.epsilon}"
            )


class StateSpace:
    """Canonical partition enumeration plus cached single-move neighborhoods."""

    def __init__(self, n_players: int):
        self.n_players = n_players
        self.states = enumerate_partitions(n_players)
        self.index = {p: k for k, p in enumerate(self.states)}
        self.moves = [neighbors(p) for p in self.states]

    def __len__(self):
        return len(self.states)


def best_reply_prob(actor, move: Move, payoffs_before, payoffs_after,
                    params: DynamicsParams) -> float:
    """Best-reply probability of one acting player: rho if its payoff does
    not decrease under the move, epsilon otherwise."""
    if actor not in move.actors:
        raise ValueError(f"player {actor} is not involved in this move")
    if payoffs_after[actor] >= payoffs_before[actor]:
        return params.rho
    return params.epsilon


def transition_prob(move: Move, params: DynamicsParams, payoff_fn) -> float:
    """Probability of one merge/split move being performed.

    ``payoff_fn(partition)`` returns the per-player Shapley payoffs of that
    partition.  The product runs over the move's actors; every bystander
    contributes a (1 - sigma) factor.
    """
    before = payoff_fn(move.source)
    after = payoff_fn(move.target)
    n = move.source.n
    prob = (1.0 - params.sigma) ** (n - len(move.actors))
    for actor in move.actors:
        prob *= params.sigma * best_reply_prob(actor, move, before, after, params)
    return prob


def build_transition_matrix(space: StateSpace, params: DynamicsParams,
                            payoff_fn) -> np.ndarray:
    """Dense row-stochastic transition matrix over the partition state space."""
    b = len(space)
    T = np.zeros((b, b))
    for k, moves in enumerate(space.moves):
        out = 0.0
        for move in moves:
            kp = space.index[move.target]
            eta = transition_prob(move, params, payoff_fn)
            T[k, kp] += eta
            out += eta
        if out > 1.0 + _ROW_TOL:
            raise ChainConsistencyError(
                f"state {k} ({space.states[k]}): total outflow {out} exceeds 1"
            )
        T[k, k] = max(0.0, 1.0 - out)
    return T


def is_merge_split_stable(partition: Partition, payoff_fn) -> bool:
    """True when no single merge or split makes all its actors weakly better
    off with at least one strict improvement."""
    before = payoff_fn(partition)
    for move in neighbors(partition):
        after = payoff_fn(move.target)
        if all(after[i] >= before[i] for i in move.actors) and any(
            after[i] > before[i] for i in move.actors
        ):
            return False
    return True


def _is_irreducible(T: np.ndarray) -> bool:
    n_comp, _ = connected_components(
        csr_matrix(T > _EDGE_TOL), directed=True, connection="strong"
    )
    return n_comp == 1


def stationary_distribution(T: np.ndarray, max_iter=1_000_000,
                            residual_tol=1e-10) -> np.ndarray:
    """Stationary vector p with p^T T = p^T and sum(p) = 1.

    Irreducible chains: direct linear solve (one balance equation replaced
    by the normalization row).  Reducible chains have many stationary
    vectors; the one reached from the uniform initial distribution is
    returned, computed by lazy power iteration (the (T + I)/2 chain has the
    same stationary vectors and the same absorption probabilities, but
    never oscillates).
    """
    T = np.asarray(T, dtype=float)
    b = T.shape[0]
    if b == 1:
        return np.array([1.0])
    if _is_irreducible(T):
        A = T.T - np.eye(b)
        A[-1, :] = 1.0
        rhs = np.zeros(b)
        rhs[-1] = 1.0
        p = np.linalg.solve(A, rhs)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
    else:
        p = np.full(b, 1.0 / b)
        lazy = 0.5 * (T + np.eye(b))
        for it in range(max_iter):
            nxt = p @ lazy
            if np.max(np.abs(nxt - p)) <= residual_tol * 1e-3:
                p = nxt
                break
            p = nxt
        p = np.clip(p, 0.0, None)
        p /= p.sum()
    residual = np.max(np.abs(p @ T - p))
    if residual > residual_tol:
        raise StationaryConvergenceError(residual, max_iter)
    return p


def absorbing_states(T: np.ndarray) -> set:
    """State ids whose diagonal entry is 1 (up to 1e-12)."""
    d = np.diag(np.asarray(T, dtype=float))
    return {int(k) for k in np.flatnonzero(d >= 1.0 - _ROW_TOL)}


def ergodic_sets(T: np.ndarray) -> list:
    """Minimal closed state sets: terminal strongly connected components of
    the positive-transition digraph."""
    T = np.asarray(T, dtype=float)
    n_comp, labels = connected_components(
        csr_matrix(T > _EDGE_TOL), directed=True, connection="strong"
    )
    terminal = [True] * n_comp
    rows, cols = np.nonzero(T > _EDGE_TOL)
    for i, j in zip(rows, cols):
        if labels[i] != labels[j]:
            terminal[labels[i]] = False
    out = []
    for c in range(n_comp):
        if terminal[c]:
            out.append({int(k) for k in np.flatnonzero(labels == c)})
    return sorted(out, key=min)
