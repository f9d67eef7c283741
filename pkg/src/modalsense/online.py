"""Streaming model updates: incremental SVD and the operator/covariance pair.

Two engines are provided. The general engine maintains a truncated SVD of
the accumulated leading-snapshot matrix plus all trailing snapshots, so its
memory grows with the stream. The long-term engine maintains the full
one-step operator and the inverse data covariance with an optional
forgetting factor; its memory is O(N^2) regardless of stream length, but it
requires a full-row-rank initialization.

Update functions return a new state. A state must not be updated from two
threads at once, and model extraction must not race an update on the same
state; distinct states are fully independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dmd import DmdModel, RankPolicy, SnapshotPair, assemble_model, fit_dmd
from .matrixio import load_container, save_container

__all__ = [
    "GeneralOnlineState",
    "LongTermOnlineState",
    "init_general",
    "update_general",
    "general_model",
    "init_longterm",
    "update_longterm",
    "longterm_model",
    "batch_baseline",
    "save_state",
    "load_state",
]


@dataclass(frozen=True)
class GeneralOnlineState:
    """Truncated SVD of the accumulated X matrix plus retained Y snapshots."""

    svd_u: np.ndarray
    svd_sigma: np.ndarray
    svd_w: np.ndarray
    y_all: np.ndarray
    dt: float
    rank_tol: float
    max_rank: int | None = None

    @property
    def rank(self) -> int:
        return self.svd_sigma.size

    @property
    def n_points(self) -> int:
        return self.svd_u.shape[0]

    @property
    def n_columns(self) -> int:
        return self.svd_w.shape[0]


def init_general(pair: SnapshotPair, rank_tol: float = 1e-10,
                 max_rank: int | None = None) -> GeneralOnlineState:
    """Start a general online state from an initial snapshot pair."""
    if not np.any(pair.X):
        raise ValueError("cannot initialize from all-zero data")
    policy = RankPolicy(fixed=max_rank, rel_tol=rank_tol)
    U, sigma, W = np.linalg.svd(pair.X, full_matrices=False)
    r = policy.select(sigma)
    return GeneralOnlineState(
        svd_u=U[:, :r],
        svd_sigma=sigma[:r],
        svd_w=W[:r, :].T.copy(),
        y_all=pair.Y.copy(),
        dt=pair.dt,
        rank_tol=rank_tol,
        max_rank=max_rank,
    )


def update_general(st: GeneralOnlineState, X_new, Y_new) -> GeneralOnlineState:
    """Fold a batch of new snapshot pairs into the SVD factors.

    New data is split into its projection onto the current left basis and an
    orthogonal remainder (QR), a small core matrix is re-decomposed, and the
    factors are rotated and re-truncated at the state's rank tolerance. The
    trailing snapshots are appended to the retained set.
    """
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    Y_new = np.atleast_2d(np.asarray(Y_new, dtype=float))
    if X_new.shape != Y_new.shape:
        raise ValueError("X_new and Y_new must have equal shapes")
    if X_new.shape[0] != st.n_points:
        raise ValueError(
            f"expected {st.n_points} rows, got {X_new.shape[0]}"
        )
    if X_new.shape[1] < 1:
        raise ValueError("update needs at least one column")

    U, sigma, W = st.svd_u, st.svd_sigma, st.svd_w
    r, tau = sigma.size, X_new.shape[1]
    t_acc = st.n_columns

    proj = U.T @ X_new                      # projection onto the current basis
    resid = X_new - U @ proj                # component orthogonal to it
    J, _ = np.linalg.qr(resid)
    P = J.T @ resid                         # J has min(N, tau) columns
    p = J.shape[1]
    core = np.zeros((r + p, r + tau))
    core[:r, :r] = np.diag(sigma)
    core[:r, r:] = proj
    core[r:, r:] = P
    Uc, sc, Wct = np.linalg.svd(core, full_matrices=False)

    keep = RankPolicy(fixed=st.max_rank, rel_tol=st.rank_tol).select(sc)
    U2 = np.hstack([U, J]) @ Uc[:, :keep]
    w_big = np.zeros((t_acc + tau, r + tau))
    w_big[:t_acc, :r] = W
    w_big[t_acc:, r:] = np.eye(tau)
    W2 = w_big @ Wct.T[:, :keep]

    return GeneralOnlineState(
        svd_u=U2,
        svd_sigma=sc[:keep],
        svd_w=W2,
        y_all=np.hstack([st.y_all, Y_new]),
        dt=st.dt,
        rank_tol=st.rank_tol,
        max_rank=st.max_rank,
    )


def general_model(st: GeneralOnlineState) -> DmdModel:
    """Extract the current model from the updated factors.

    Amplitudes are anchored at the most recent retained snapshot, so
    ``reconstruct(model, 0)`` estimates the present field and positive
    indices predict forward.
    """
    ywsi = (st.y_all @ st.svd_w) / st.svd_sigma
    a_hat = st.svd_u.T @ ywsi
    lam, V = np.linalg.eig(a_hat)
    modes = ywsi @ V
    y_norm = np.linalg.norm(st.y_all)
    span_res = 0.0
    if y_norm > 0:
        span_res = float(
            np.linalg.norm(st.y_all - st.svd_u @ (st.svd_u.T @ st.y_all)) / y_norm
        )
    return assemble_model(
        modes, lam, st.y_all[:, -1], st.dt, st.rank,
        svd_u=st.svd_u, svd_sigma=st.svd_sigma, svd_w=st.svd_w,
        span_residual=span_res,
    )


@dataclass(frozen=True)
class LongTermOnlineState:
    """Full one-step operator with the inverse data covariance and forgetting."""

    a_op: np.ndarray
    s_mat: np.ndarray
    gamma: float
    dt: float
    last_snapshot: np.ndarray

    @property
    def n_points(self) -> int:
        return self.a_op.shape[0]


def init_longterm(pair: SnapshotPair, gamma: float = 1.0) -> LongTermOnlineState:
    """Initialize from a full-row-rank snapshot pair.

    Requires at least N columns with the smallest singular value of X above
    1e-10 of the largest; until that many snapshots have been collected the
    inverse covariance does not exist and the estimate would be erroneous.
    """
    if not (0 < gamma <= 1):
        raise ValueError("gamma must lie in (0, 1]")
    n, t = pair.X.shape
    if t < n:
        raise ValueError(
            f"full-row-rank initialization needs at least N={n} snapshot pairs, got {t}; "
            "collect more data before initializing"
        )
    sv = np.linalg.svd(pair.X, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ValueError(
            "initialization data is rank-deficient; the inverse data covariance "
            "requires X with full row rank"
        )
    s_mat = np.linalg.inv(pair.X @ pair.X.T)
    s_mat = 0.5 * (s_mat + s_mat.T)
    a_op = (pair.Y @ pair.X.T) @ s_mat
    return LongTermOnlineState(
        a_op=a_op,
        s_mat=s_mat,
        gamma=gamma,
        dt=pair.dt,
        last_snapshot=pair.Y[:, -1].copy(),
    )


def update_longterm(st: LongTermOnlineState, X_new, Y_new) -> LongTermOnlineState:
    """Rank-tau recursive update of the operator and inverse covariance.

    The gain ``(gamma I + X_new^T S X_new)^-1`` folds the forgetting factor
    into the innovation so the gamma-weighted recursions for the operator
    numerator and the covariance are honored exactly; with gamma = 1 the
    update reproduces the plain batch estimate on all data seen.
    """
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    Y_new = np.atleast_2d(np.asarray(Y_new, dtype=float))
    if X_new.shape != Y_new.shape:
        raise ValueError("X_new and Y_new must have equal shapes")
    if X_new.shape[0] != st.n_points:
        raise ValueError(f"expected {st.n_points} rows, got {X_new.shape[0]}")
    tau = X_new.shape[1]
    if tau < 1:
        raise ValueError("update needs at least one column")

    S = st.s_mat
    SX = S @ X_new
    gain_inv = st.gamma * np.eye(tau) + X_new.T @ SX
    if np.linalg.cond(gain_inv) > 1e12:
        raise ValueError("update gain is ill-conditioned; reduce the batch size "
                         "or raise gamma")
    gain = np.linalg.inv(gain_inv)
    gain = 0.5 * (gain + gain.T)

    a_op = st.a_op + (Y_new - st.a_op @ X_new) @ gain @ SX.T
    s_mat = (S - SX @ gain @ SX.T) / st.gamma
    s_mat = 0.5 * (s_mat + s_mat.T)
    return LongTermOnlineState(
        a_op=a_op,
        s_mat=s_mat,
        gamma=st.gamma,
        dt=st.dt,
        last_snapshot=Y_new[:, -1].copy(),
    )


def longterm_model(st: LongTermOnlineState) -> DmdModel:
    """Eigendecomposition of the full operator; eigenvectors are the modes.

    Amplitudes are anchored at the most recent snapshot seen by the state.
    No SVD factors are attached since the operator is never projected.
    """
    lam, V = np.linalg.eig(st.a_op)
    return assemble_model(V, lam, st.last_snapshot, st.dt, st.n_points)


def batch_baseline(X_acc, Y_acc, dt: float = 1.0,
                   policy: RankPolicy = RankPolicy()) -> DmdModel:
    """Refit from scratch on all accumulated data; the oracle for online runs."""
    return fit_dmd(SnapshotPair(np.asarray(X_acc), np.asarray(Y_acc), dt), policy)


def save_state(path, st) -> None:
    """Checkpoint an online state (either variant) to a container file."""
    if isinstance(st, GeneralOnlineState):
        meta = {
            "kind": "general_state",
            "dt": st.dt,
            "rank_tol": st.rank_tol,
            "max_rank": st.max_rank,
        }
        arrays = {
            "svd_u": st.svd_u,
            "svd_sigma": st.svd_sigma,
            "svd_w": st.svd_w,
            "y_all": st.y_all,
        }
    elif isinstance(st, LongTermOnlineState):
        meta = {"kind": "longterm_state", "dt": st.dt, "gamma": st.gamma}
        arrays = {
            "a_op": st.a_op,
            "s_mat": st.s_mat,
            "last_snapshot": st.last_snapshot,
        }
    else:
        raise TypeError(f"not an online state: {type(st)!r}")
    save_container(path, meta, arrays)


def load_state(path):
    """Load a checkpointed online state, restoring its variant."""
    meta, arrays = load_container(path)
    kind = meta.get("kind")
    if kind == "general_state":
        return GeneralOnlineState(
            svd_u=arrays["svd_u"],
            svd_sigma=arrays["svd_sigma"].ravel(),
            svd_w=arrays["svd_w"],
            y_all=arrays["y_all"],
            dt=float(meta["dt"]),
            rank_tol=float(meta["rank_tol"]),
            max_rank=meta.get("max_rank"),
        )
    if kind == "longterm_state":
        return LongTermOnlineState(
            a_op=arrays["a_op"],
            s_mat=arrays["s_mat"],
            gamma=float(meta["gamma"]),
            dt=float(meta["dt"]),
            last_snapshot=arrays["last_snapshot"].ravel(),
        )
    raise ValueError(f"{path}: not an online-state checkpoint")
