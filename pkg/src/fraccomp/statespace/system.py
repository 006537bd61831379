"""
Linear Gaussian state space form of the DOFC model.

    alpha_{t+1} = T alpha_t + R eta_t,        eta_t ~ N(0, I)
    y_t         = c + Z alpha_t + eps_t,      eps_t ~ N(0, diag(h))

Each fractional component is an ARMA(3, 3) block in companion form with
``max(p, q + 1) = 4`` states; each short-memory component is an AR(k) block
with ``k`` states.  The first state of every block is the component itself.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..exceptions import InvalidArgumentError
from ..model import validate
from .approx import arma_table

__all__ = ["StateSpaceSystem", "build_system", "arma_block", "ar_block"]


@dataclass
class StateSpaceSystem:
    """Time-invariant system matrices plus layout metadata.

    Attributes
    ----------
    transition : (m, m) ndarray
    state_noise_loading : (m, w) ndarray
    observation : (p, m) ndarray
    obs_intercept : (p,) ndarray
    obs_noise_var : (p,) ndarray
        Diagonal of the measurement noise covariance.
    initial_mean, initial_cov : ndarray
        Moments of ``alpha_1``.
    blocks : list of dict
        One entry per component with keys ``kind`` (``"fractional"`` or
        ``"ar"``), ``index`` and ``states`` (a slice).
    """

    transition: np.ndarray
    state_noise_loading: np.ndarray
    observation: np.ndarray
    obs_intercept: np.ndarray
    obs_noise_var: np.ndarray
    initial_mean: np.ndarray
    initial_cov: np.ndarray
    blocks: list

    @property
    def m(self):
        return self.transition.shape[0]

    @property
    def p(self):
        return self.observation.shape[0]

    @property
    def obs_noise_cov(self):
        return np.diag(self.obs_noise_var)

    @property
    def state_noise_cov(self):
        r = self.state_noise_loading
        return r @ r.T

    @property
    def component_states(self):
        """Index of the first state of every block (the component value)."""
        return np.array([b["states"].start for b in self.blocks], dtype=int)

    def stationary_cov(self, block):
        """Unconditional covariance of one block from a Lyapunov solve."""
        sl = self.blocks[block]["states"]
        t = self.transition[sl, sl]
        r = self.state_noise_loading[sl]
        return scipy.linalg.solve_discrete_lyapunov(t, r @ r.T)


def arma_block(ar, ma):
    """Companion form ``(T, R)`` of ``(1 - ar(L)) x = (1 + ma(L)) e``."""
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    r = max(ar.size, ma.size + 1)
    t = np.zeros((r, r))
    t[: ar.size, 0] = ar
    t[:-1, 1:] = np.eye(r - 1)
    rvec = np.zeros(r)
    rvec[0] = 1.0
    rvec[1 : ma.size + 1] = ma
    return t, rvec


def ar_block(phi):
    return arma_block(phi, np.zeros(0))


def build_system(spec, params, n, table=None):
    """
    Assemble the approximating state space system.

    Parameters
    ----------
    spec : DofcSpec
    params : DofcParams
    n : int
        Sample length used for the ARMA approximation of fractional blocks.
    table : ArmaTable, optional
        Precomputed approximation table for length ``n``.

    Returns
    -------
    StateSpaceSystem
        Fractional blocks start at zero (type-II, zero pre-sample), i.e.
        ``alpha_1`` has covariance ``R R'`` on those blocks; AR blocks start
        from their stationary distribution.
    """
    problems = validate(spec, params)
    if problems:
        raise InvalidArgumentError("invalid parameters: " + "; ".join(problems))
    if spec.s:
        table = table if table is not None else arma_table(int(n))
    t_blocks, r_blocks, p1_blocks, blocks = [], [], [], []
    loadings = []
    pos = 0
    d_cols = params.d[spec.component_orders] if spec.s else np.zeros(0)
    for col in range(spec.s):
        ar, ma = table.coefficients(d_cols[col])
        t, r = arma_block(ar, ma)
        t_blocks.append(t)
        r_blocks.append(r)
        p1_blocks.append(np.outer(r, r))
        blocks.append({"kind": "fractional", "index": col, "states": slice(pos, pos + r.size)})
        loadings.append(params.lam[:, col])
        pos += r.size
    for col in range(spec.s0):
        t, r = ar_block(params.phi[col])
        t_blocks.append(t)
        r_blocks.append(r)
        p1_blocks.append(scipy.linalg.solve_discrete_lyapunov(t, np.outer(r, r)))
        blocks.append({"kind": "ar", "index": col, "states": slice(pos, pos + r.size)})
        loadings.append(params.gamma[:, col])
        pos += r.size
    m = pos
    transition = scipy.linalg.block_diag(*t_blocks) if m else np.zeros((0, 0))
    noise = np.zeros((m, len(blocks)))
    z = np.zeros((spec.p, m))
    for j, (blk, r, load) in enumerate(zip(blocks, r_blocks, loadings)):
        noise[blk["states"], j] = r
        z[:, blk["states"].start] = load
    p1 = scipy.linalg.block_diag(*p1_blocks) if m else np.zeros((0, 0))
    return StateSpaceSystem(
        transition=transition,
        state_noise_loading=noise,
        observation=z,
        obs_intercept=np.array(params.c, dtype=float),
        obs_noise_var=np.array(params.h, dtype=float),
        initial_mean=np.zeros(m),
        initial_cov=p1,
        blocks=blocks,
    )
