"""Contrastive losses over similarity matrices, their weight tables and gradients.

The loss family is parameterized by an outer transform phi, an inner
transform psi, a diagonal weight epsilon, a margin multiplier nu, a
temperature tau, a normalizer rule, and a ridge penalty rho on the
encoder product. Identity transforms give the linear loss; log/exp with
epsilon=1 gives the CLIP loss; log/exp with epsilon=0 gives InfoNCE.

Weight tables (alpha, alpha-bar, beta) express any loss in this family as
a weighted contrast between observed pairs and cross pairs; the gradient
assembles the same alpha tables into a per-entry weight matrix instead,
which gives an independent route to the same derivative.
"""

from dataclasses import dataclass, replace

import numpy as np

from .linalg import as_matrix
from .errors import InvalidInput, NonFinite

PHI_NAMES = ("identity", "log", "log1p")
PSI_NAMES = ("identity", "exp")
CN_RULES = ("n(n-1)", "n")


@dataclass(frozen=True)
class LossSpec:
    """Full description of one member of the contrastive loss family.

    Attributes:
      phi: outer transform, one of identity / log / log1p (the log family
        is scaled by tau).
      psi: inner transform, identity or exp(. / tau).
      epsilon: weight of the diagonal (observed-pair) term inside the
        aggregate, in [0, 1].
      nu: multiplier on the observed-pair similarity subtracted inside
        psi, at least 1.
      tau: temperature, positive.
      cn: normalizer rule, "n(n-1)" or "n".
      rho: ridge penalty on the encoder product, positive.
    """

    phi: str = "identity"
    psi: str = "identity"
    epsilon: float = 1.0
    nu: float = 1.0
    tau: float = 1.0
    cn: str = "n(n-1)"
    rho: float = 1.0

    def __post_init__(self):
        if self.phi not in PHI_NAMES:
            raise InvalidInput(f"phi must be one of {PHI_NAMES}, got {self.phi!r}")
        if self.psi not in PSI_NAMES:
            raise InvalidInput(f"psi must be one of {PSI_NAMES}, got {self.psi!r}")
        if self.cn not in CN_RULES:
            raise InvalidInput(f"cn must be one of {CN_RULES}, got {self.cn!r}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise InvalidInput(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not self.nu >= 1.0:
            raise InvalidInput(f"nu must be at least 1, got {self.nu}")
        if not self.tau > 0.0:
            raise InvalidInput(f"tau must be positive, got {self.tau}")
        if not self.rho > 0.0:
            raise InvalidInput(f"rho must be positive, got {self.rho}")

    @classmethod
    def linear(cls, rho: float = 1.0) -> "LossSpec":
        """Identity transforms, normalizer n(n-1)."""
        return cls(phi="identity", psi="identity", epsilon=1.0, nu=1.0,
                   tau=1.0, cn="n(n-1)", rho=rho)

    @classmethod
    def clip(cls, tau: float, rho: float = 1.0, nu: float = 1.0) -> "LossSpec":
        """Symmetric log-softmax with the observed pair kept in the aggregate."""
        return cls(phi="log", psi="exp", epsilon=1.0, nu=nu, tau=tau, cn="n", rho=rho)

    @classmethod
    def infonce(cls, tau: float, rho: float = 1.0, nu: float = 1.0,
                smoothed: bool = False) -> "LossSpec":
        """Log-softmax over cross pairs only (epsilon = 0).

        smoothed=True replaces log with log1p, which stays finite at zero
        aggregate and is the variant used for gradient-based pretraining.
        """
        return cls(phi="log1p" if smoothed else "log", psi="exp", epsilon=0.0,
                   nu=nu, tau=tau, cn="n", rho=rho)

    def to_json(self) -> dict:
        return {
            "phi": self.phi, "psi": self.psi, "epsilon": self.epsilon,
            "nu": self.nu, "tau": self.tau, "cn": self.cn, "rho": self.rho,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LossSpec":
        if not isinstance(obj, dict):
            raise InvalidInput("loss spec must be a JSON object")
        unknown = set(obj) - {"phi", "psi", "epsilon", "nu", "tau", "cn", "rho"}
        if unknown:
            raise InvalidInput(f"unknown loss spec fields: {sorted(unknown)}")
        merged = cls().to_json() | obj
        return cls(
            phi=merged["phi"], psi=merged["psi"],
            epsilon=float(merged["epsilon"]), nu=float(merged["nu"]),
            tau=float(merged["tau"]), cn=merged["cn"], rho=float(merged["rho"]),
        )

    def with_updates(self, **kw) -> "LossSpec":
        return replace(self, **kw)


def c_n_value(rule: str, n: int) -> float:
    """Numeric normalizer for a batch of n pairs."""
    if n < 2:
        raise InvalidInput(f"contrastive losses need at least 2 samples, got {n}")
    if rule == "n":
        return float(n)
    if rule == "n(n-1)":
        return float(n) * float(n - 1)
    raise InvalidInput(f"cn must be one of {CN_RULES}, got {rule!r}")


def schedule_tau(r: int, n_unpaired: int, gamma: float = 1.0, scale: float = 1.0) -> float:
    """Temperature scale / (1 + gamma) * sqrt(r / log n) for an unpaired pool."""
    if r < 1:
        raise InvalidInput(f"rank must be at least 1, got {r}")
    if n_unpaired < 2:
        raise InvalidInput(f"pool size must be at least 2, got {n_unpaired}")
    if gamma < 0:
        raise InvalidInput(f"gamma must be nonnegative, got {gamma}")
    return float(scale / (1.0 + gamma) * np.sqrt(r / np.log(n_unpaired)))


@dataclass(frozen=True)
class EncoderPair:
    """Linear encoders g1 (r x d1) and g2 (r x d2) for the two modalities."""

    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        g1 = as_matrix(self.g1, "g1")
        g2 = as_matrix(self.g2, "g2")
        if g1.shape[0] != g2.shape[0]:
            raise InvalidInput(
                f"encoders must share the output dimension, got {g1.shape} and {g2.shape}"
            )
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)

    @property
    def r(self) -> int:
        return self.g1.shape[0]

    @property
    def product(self) -> np.ndarray:
        return self.g1.T @ self.g2


def similarity_matrix(enc: EncoderPair, x, xt) -> np.ndarray:
    """Pairwise inner products of encoded samples, rows indexing x."""
    x = as_matrix(x, "x")
    xt = as_matrix(xt, "xt")
    return (x @ enc.g1.T) @ (enc.g2 @ xt.T)


def _data_arrays(data):
    if hasattr(data, "x") and hasattr(data, "xt"):
        return as_matrix(data.x, "x"), as_matrix(data.xt, "xt")
    if isinstance(data, (tuple, list)) and len(data) == 2:
        return as_matrix(data[0], "x"), as_matrix(data[1], "xt")
    raise InvalidInput("data must expose x and xt arrays")


def _shifted_args(sims: np.ndarray, nu: float):
    """Row-anchored and column-anchored shifted similarity tables.

    Row table entry (i, j) is s_ij - nu * s_ii, column table entry (i, j)
    is s_ji - nu * s_ii.
    """
    diag = np.diag(sims)
    return sims - nu * diag[:, None], sims.T - nu * diag[:, None]


def _diag_weights(n: int, epsilon: float) -> np.ndarray:
    w = np.ones((n, n))
    np.fill_diagonal(w, epsilon)
    return w


def _alpha_one(spec: LossSpec, args: np.ndarray) -> np.ndarray:
    """One alpha table: epsilon-weighted phi'(aggregate) * psi'(entry) per row."""
    n = args.shape[0]
    w = _diag_weights(n, spec.epsilon)
    if spec.psi == "exp":
        a = args / spec.tau
        if spec.phi in ("log", "log1p"):
            logw = np.full((n, n), 0.0)
            diag_logw = np.log(spec.epsilon) if spec.epsilon > 0 else -np.inf
            np.fill_diagonal(logw, diag_logw)
            z = a + logw
            m = np.max(z, axis=1, keepdims=True)
            lse = m + np.log(np.sum(np.exp(z - m), axis=1, keepdims=True))
            if spec.phi == "log1p":
                lse = np.logaddexp(0.0, lse)
            return np.exp(z - lse)
        return w * np.exp(a) / spec.tau
    # psi identity: psi' = 1 and the aggregate is a plain weighted sum
    if spec.phi == "identity":
        return w.copy()
    t = np.sum(w * args, axis=1, keepdims=True)
    if spec.phi == "log":
        if np.any(t <= 0):
            raise NonFinite("log of a nonpositive aggregate")
        return w * (spec.tau / t)
    if np.any(1.0 + t <= 0):
        raise NonFinite("log1p of an aggregate at or below -1")
    return w * (spec.tau / (1.0 + t))


def _alpha_tables(spec: LossSpec, sims: np.ndarray):
    """Row-anchored and column-anchored alpha tables at the given similarities."""
    sims = as_matrix(sims, "sims")
    if sims.shape[0] != sims.shape[1]:
        raise InvalidInput(f"paired similarities must be square, got {sims.shape}")
    if sims.shape[0] < 2:
        raise InvalidInput("need at least 2 samples")
    row_args, col_args = _shifted_args(sims, spec.nu)
    return _alpha_one(spec, row_args), _alpha_one(spec, col_args)


def _phi_totals(spec: LossSpec, args: np.ndarray) -> np.ndarray:
    """phi of the epsilon-weighted psi aggregate, one value per row."""
    n = args.shape[0]
    w = _diag_weights(n, spec.epsilon)
    if spec.psi == "exp":
        a = args / spec.tau
        if spec.phi in ("log", "log1p"):
            logw = np.full((n, n), 0.0)
            diag_logw = np.log(spec.epsilon) if spec.epsilon > 0 else -np.inf
            np.fill_diagonal(logw, diag_logw)
            z = a + logw
            m = np.max(z, axis=1)
            lse = m + np.log(np.sum(np.exp(z - m[:, None]), axis=1))
            if spec.phi == "log1p":
                lse = np.logaddexp(0.0, lse)
            return spec.tau * lse
        with np.errstate(over="ignore"):
            return np.sum(w * np.exp(a), axis=1)
    t = np.sum(w * args, axis=1)
    if spec.phi == "identity":
        return t
    with np.errstate(invalid="ignore", divide="ignore"):
        if spec.phi == "log":
            return spec.tau * np.log(t)
        return spec.tau * np.log1p(t)


def loss_value(spec: LossSpec, enc: EncoderPair, data) -> float:
    """Value of the contrastive loss plus the ridge penalty.

    May return inf or nan when an identity-phi aggregate overflows or a
    log leaves its domain; iterative solvers treat such steps as
    rejected rather than fatal.
    """
    x, xt = _data_arrays(data)
    sims = similarity_matrix(enc, x, xt)
    if sims.shape[0] != sims.shape[1]:
        raise InvalidInput("paired loss needs equally many samples per modality")
    n = sims.shape[0]
    cn = c_n_value(spec.cn, n)
    row_args, col_args = _shifted_args(sims, spec.nu)
    contrast = (np.sum(_phi_totals(spec, row_args)) + np.sum(_phi_totals(spec, col_args)))
    ridge = 0.5 * spec.rho * float(np.sum(enc.product ** 2))
    return float(contrast / (2.0 * cn) + ridge)


@dataclass(frozen=True)
class ContrastiveWeights:
    """Weight tables that express a loss as a pair-versus-cross contrast.

    In paired mode beta_diag holds the per-sample weight on the observed
    pair and beta_off the (zero-diagonal) weights on cross pairs, and the
    raw alpha tables are kept for diagnostics. In unpaired mode beta_off
    holds the full symmetrized softmax table (diagonal included),
    beta_diag is zero, and edges carries the pair set whose empirical
    cross-covariance enters with weight nu.
    """

    beta_diag: np.ndarray
    beta_off: np.ndarray
    mode: str
    alpha: np.ndarray | None = None
    alpha_bar: np.ndarray | None = None
    edges: np.ndarray | None = None
    nu: float | None = None


def _softmax(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    e = np.exp(a - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def compute_weights(spec: LossSpec, sims) -> ContrastiveWeights:
    """Beta weight tables of the loss at the given similarity matrix."""
    sims = as_matrix(sims, "sims")
    alpha, alpha_bar = _alpha_tables(spec, sims)
    row_tot = np.sum(alpha, axis=1)
    bar_tot = np.sum(alpha_bar, axis=1)
    diag_a = np.diag(alpha)
    diag_b = np.diag(alpha_bar)
    beta_diag = spec.nu * (row_tot + bar_tot) / 2.0 - (diag_a + diag_b) / 2.0
    beta_off = (alpha + alpha_bar.T) / 2.0
    np.fill_diagonal(beta_off, 0.0)
    return ContrastiveWeights(
        beta_diag=beta_diag, beta_off=beta_off, mode="paired",
        alpha=alpha, alpha_bar=alpha_bar,
    )


def unpaired_weights(sims, tau: float, nu: float, edges) -> ContrastiveWeights:
    """Symmetrized full-support softmax table plus a pair set for unpaired data.

    The table averages the row softmax and the column softmax of
    sims / tau over all entries (no diagonal anchoring: nothing marks any
    entry as an observed pair).
    """
    sims = as_matrix(sims, "sims")
    if not tau > 0:
        raise InvalidInput(f"tau must be positive, got {tau}")
    if not nu >= 1.0:
        raise InvalidInput(f"nu must be at least 1, got {nu}")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] == 0:
        raise InvalidInput("unpaired weights need a nonempty pair set")
    if (np.any(edges[:, 0] < 0) or np.any(edges[:, 0] >= sims.shape[0])
            or np.any(edges[:, 1] < 0) or np.any(edges[:, 1] >= sims.shape[1])):
        raise InvalidInput("pair indices out of range")
    a = sims / tau
    beta = (_softmax(a, axis=1) + _softmax(a, axis=0)) / 2.0
    return ContrastiveWeights(
        beta_diag=np.zeros(sims.shape[0]), beta_off=beta, mode="unpaired",
        edges=edges, nu=float(nu),
    )


def contrastive_cross_covariance(weights: ContrastiveWeights, x, xt, c_n) -> np.ndarray:
    """Weighted contrast of pair outer products against cross outer products.

    c_n is a normalizer rule ("n(n-1)" or "n") or an explicit positive
    number. Paired mode contrasts the diagonal against off-diagonal
    cross terms; unpaired mode contrasts the stored pair set (weight nu)
    against the full softmax table.
    """
    x = as_matrix(x, "x")
    xt = as_matrix(xt, "xt")
    n = x.shape[0]
    if isinstance(c_n, str):
        cn = c_n_value(c_n, n)
    else:
        cn = float(c_n)
        if not cn > 0:
            raise InvalidInput(f"normalizer must be positive, got {c_n}")
    if weights.mode == "paired":
        if weights.beta_off.shape != (n, xt.shape[0]):
            raise InvalidInput("weight table does not match the data shape")
        mixed = weights.beta_diag[:, None] * xt - weights.beta_off @ xt
        return (x.T @ mixed) / cn
    if weights.mode == "unpaired":
        if weights.edges is None or weights.nu is None:
            raise InvalidInput("unpaired weights must carry a pair set and nu")
        if weights.beta_off.shape != (n, xt.shape[0]):
            raise InvalidInput("weight table does not match the data shape")
        pair_term = x[weights.edges[:, 0]].T @ xt[weights.edges[:, 1]]
        return (weights.nu * pair_term - x.T @ (weights.beta_off @ xt)) / cn
    raise InvalidInput(f"unknown weights mode {weights.mode!r}")


def loss_gradient(spec: LossSpec, enc: EncoderPair, data):
    """Gradients of loss_value with respect to g1 and g2.

    Assembled from the alpha tables as a per-entry weight matrix on the
    similarity derivatives (an independent route from the beta tables of
    compute_weights; the two agree analytically).
    """
    x, xt = _data_arrays(data)
    sims = similarity_matrix(enc, x, xt)
    if sims.shape[0] != sims.shape[1]:
        raise InvalidInput("paired loss needs equally many samples per modality")
    n = sims.shape[0]
    cn = c_n_value(spec.cn, n)
    alpha, alpha_bar = _alpha_tables(spec, sims)
    w = (alpha + alpha_bar.T) / (2.0 * cn)
    row_tot = np.sum(alpha, axis=1)
    bar_tot = np.sum(alpha_bar, axis=1)
    diag_w = (np.diag(alpha) + np.diag(alpha_bar)
              - spec.nu * (row_tot + bar_tot)) / (2.0 * cn)
    np.fill_diagonal(w, diag_w)
    p = x.T @ (w @ xt)
    grad_g1 = enc.g2 @ p.T + spec.rho * (enc.g2 @ enc.g2.T) @ enc.g1
    grad_g2 = enc.g1 @ p + spec.rho * (enc.g1 @ enc.g1.T) @ enc.g2
    return grad_g1, grad_g2
