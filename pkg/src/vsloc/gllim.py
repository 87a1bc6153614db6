"""Gaussian locally-linear mapping (GLLiM).

The joint model is

    p(u, y) = sum_k pi_k N(u; c_k, Gamma_k) N(y; A_k u + b_k, Sigma_k)

with low-dimensional parameters ``u`` (L) and high-dimensional features ``y``
(D). It is fitted by EM in the low-to-high direction and inverted in closed
form to predict ``u`` from ``y``. Noise covariances ``Sigma_k`` are diagonal
(or isotropic); D-sized matrices are never formed.

Internally both ``u`` and ``y`` are z-scored; all public outputs are in the
original units.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
MODEL_MAGIC = b"VSLG"
MODEL_VERSION = 1


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 200
    tol: float = 1e-6          # relative log-likelihood gain
    covariance: str = "diagonal"
    n_pcs: int = 20            # PCA dimension of y used for k-means initialisation
    var_floor: float = 1e-8    # relative to the (unit) standardised variance


@dataclass
class TrainingSet:
    y: np.ndarray       # (N, D)
    u: np.ndarray       # (N, L)
    names: tuple = ()

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim == 1:
            self.u = self.u[:, None]
        if len(self.y) != len(self.u):
            raise ValueError(f"{len(self.y)} feature rows but {len(self.u)} parameter rows")
        if not (np.isfinite(self.y).all() and np.isfinite(self.u).all()):
            raise ValueError("training data contains non-finite values")

    def __len__(self):
        return len(self.y)


@dataclass
class GllimModel:
    """Fitted mixture; parameters are stored in standardised coordinates."""

    pi: np.ndarray      # (K,)
    c: np.ndarray       # (K, L)
    gamma: np.ndarray   # (K, L, L)
    A: np.ndarray       # (K, D, L)
    b: np.ndarray       # (K, D)
    sigma: np.ndarray   # (K, D) diagonal noise variances
    y_mean: np.ndarray
    y_scale: np.ndarray
    u_mean: np.ndarray
    u_scale: np.ndarray
    covariance: str = "diagonal"
    names: tuple = ()
    log_likelihood_trace: list = field(default_factory=list)
    reinitializations: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.pi)

    @property
    def D(self):
        return self.A.shape[1]

    @property
    def L(self):
        return self.A.shape[2]

    # -- coordinate changes -------------------------------------------------

    def _std_y(self, y):
        return (y - self.y_mean) / self.y_scale

    def _std_u(self, u):
        return (u - self.u_mean) / self.u_scale

    def _log_jacobian(self):
        return -float(np.sum(np.log(self.y_scale)) + np.sum(np.log(self.u_scale)))

    def original_parameters(self):
        """Mixture parameters expressed in the original units of ``u`` and ``y``."""
        su, sy = self.u_scale, self.y_scale
        A = sy[None, :, None] * self.A / su[None, None, :]
        b = self.y_mean + sy * (self.b - np.einsum("kdl,l->kd", self.A, self.u_mean / su))
        return {
            "pi": self.pi.copy(),
            "c": self.u_mean + su * self.c,
            "gamma": self.gamma * su[None, :, None] * su[None, None, :],
            "A": A,
            "b": b,
            "sigma": self.sigma * sy ** 2,
        }

    # -- inverse model --------------------------------------------------------

    def _inverse_terms(self):
        cache = getattr(self, "_inverse_cache", None)
        if cache is not None:
            return cache
        K, L = self.K, self.L
        a_star = np.empty((K, L, self.D))
        b_star = np.empty((K, L))
        g_star = np.empty((K, L, L))
        logdet_y = np.empty(K)
        for k in range(K):
            s_inv = 1.0 / self.sigma[k]
            g_inv = np.linalg.inv(self.gamma[k])
            at_s = self.A[k].T * s_inv                     # (L, D)
            prec = g_inv + at_s @ self.A[k]
            g_star[k] = np.linalg.inv(prec)
            a_star[k] = g_star[k] @ at_s
            b_star[k] = g_star[k] @ (g_inv @ self.c[k] - at_s @ self.b[k])
            logdet_y[k] = (np.sum(np.log(self.sigma[k])) + np.linalg.slogdet(self.gamma[k])[1]
                           + np.linalg.slogdet(prec)[1])
        cache = (a_star, b_star, g_star, logdet_y)
        object.__setattr__(self, "_inverse_cache", cache)
        return cache

    def _log_evidence(self, ys):
        """log pi_k + log N(y; A_k c_k + b_k, Sigma_k + A_k Gamma_k A_k^T), (N, K)."""
        _, _, g_star, logdet_y = self._inverse_terms()
        out = np.empty((len(ys), self.K))
        for k in range(self.K):
            s_inv = 1.0 / self.sigma[k]
            e = ys - (self.A[k] @ self.c[k] + self.b[k])
            proj = (e * s_inv) @ self.A[k]                 # (N, L)
            quad = np.einsum("nd,nd,d->n", e, e, s_inv) - np.einsum(
                "nl,lm,nm->n", proj, g_star[k], proj)
            out[:, k] = np.log(self.pi[k]) - 0.5 * (self.D * LOG_2PI + logdet_y[k] + quad)
        return out


def _floor_covariance(cov, floor):
    w, v = np.linalg.eigh(cov)
    w = np.maximum(w, floor)
    return (v * w) @ v.T


def _log_gauss_u(u, c, gamma):
    """log N(u; c_k, Gamma_k) for all rows and components, (N, K)."""
    K, L = c.shape
    out = np.empty((len(u), K))
    for k in range(K):
        chol = np.linalg.cholesky(gamma[k])
        z = np.linalg.solve(chol, (u - c[k]).T)
        out[:, k] = -0.5 * (L * LOG_2PI + np.sum(z * z, axis=0)) - np.sum(np.log(np.diag(chol)))
    return out


def _log_joint(y, u, pi, c, gamma, A, b, sigma):
    lj = _log_gauss_u(u, c, gamma) + np.log(pi)[None, :]
    D = y.shape[1]
    for k in range(len(pi)):
        resid = y - u @ A[k].T - b[k]
        lj[:, k] += -0.5 * (D * LOG_2PI + np.sum(np.log(sigma[k]))
                            + np.sum(resid * resid / sigma[k], axis=1))
    return lj


def _m_step(y, u, resp, covariance, floor):
    N, L = u.shape
    K = resp.shape[1]
    D = y.shape[1]
    mass = resp.sum(axis=0)
    pi = mass / N
    c = (resp.T @ u) / mass[:, None]
    gamma = np.empty((K, L, L))
    A = np.empty((K, D, L))
    b = np.empty((K, D))
    sigma = np.empty((K, D))
    u1 = np.hstack([u, np.ones((N, 1))])
    for k in range(K):
        w = resp[:, k]
        du = u - c[k]
        gamma[k] = _floor_covariance((du * w[:, None]).T @ du / mass[k], floor)
        wu = u1 * w[:, None]
        s_uu = u1.T @ wu
        s_uu[np.diag_indices(L + 1)] += 1e-12 * np.trace(s_uu)
        B = np.linalg.solve(s_uu, wu.T @ y).T           # (D, L + 1)
        A[k], b[k] = B[:, :L], B[:, L]
        resid = y - u1 @ B.T
        var = (w @ (resid * resid)) / mass[k]
        if covariance == "isotropic":
            var = np.full(D, var.mean())
        sigma[k] = np.maximum(var, floor)
    return pi, c, gamma, A, b, sigma


def _initial_responsibilities(y, u, K, n_pcs, seed):
    n_pcs = max(1, min(n_pcs, y.shape[1], len(y) - 1))
    centred = y - y.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    scores = centred @ vt[:n_pcs].T
    scores /= np.where(scores.std(axis=0) > 0, scores.std(axis=0), 1.0)
    joint = np.hstack([u, scores])
    rng = np.random.default_rng(seed)
    _, labels = kmeans2(joint, K, minit="++", seed=rng, missing="warn")
    resp = np.zeros((len(y), K))
    resp[np.arange(len(y)), labels] = 1.0
    return resp


def _reseed_component(k, u, resp, n_points):
    """Hard-assign the points nearest to the worst-explained point to component k."""
    covered = resp.sum(axis=1)
    anchor = int(np.argmin(covered + resp.max(axis=1)))
    dist = np.sum((u - u[anchor]) ** 2, axis=1)
    nearest = np.argsort(dist, kind="stable")[:n_points]
    resp = resp.copy()
    resp[nearest] *= 0.5
    resp[nearest, k] += 0.5
    return resp


def fit(data, K=25, config=EmConfig(), seed=0):
    """Fit a GLLiM model by EM; the log-likelihood trace is kept on the model."""
    if not isinstance(data, TrainingSet):
        data = TrainingSet(*data)
    if config.covariance not in ("diagonal", "isotropic"):
        raise ValueError(f"unknown covariance constraint {config.covariance!r}")
    N, L = data.u.shape
    if N < K * (L + 1):
        raise ValueError(f"need at least K*(L+1) = {K * (L + 1)} samples, got {N}")
    y_mean, u_mean = data.y.mean(axis=0), data.u.mean(axis=0)
    y_scale, u_scale = data.y.std(axis=0), data.u.std(axis=0)
    y_scale = np.where(y_scale > 0, y_scale, 1.0)
    u_scale = np.where(u_scale > 0, u_scale, 1.0)
    y = (data.y - y_mean) / y_scale
    u = (data.u - u_mean) / u_scale
    floor = config.var_floor
    jac = -float(np.sum(np.log(y_scale)) + np.sum(np.log(u_scale))) * N

    resp = _initial_responsibilities(y, u, K, config.n_pcs, seed)
    params = None
    trace, reinit = [], []
    weight_floor = 1.0 / (10 * N)
    for it in range(config.max_iter + 1):
        reseeded = False
        for _ in range(K):
            mass = resp.sum(axis=0) / N
            weak = np.flatnonzero(mass < weight_floor)
            if len(weak) == 0:
                break
            k = int(weak[0])
            log.info("EM iteration %d: reinitialising component %d (weight %.3g)",
                     it, k, mass[k])
            reinit.append((it, k))
            reseeded = True
            resp = _reseed_component(k, u, resp, max(L + 2, N // K))
        params = _m_step(y, u, resp, config.covariance, floor)
        lj = _log_joint(y, u, *params)
        ll = float(np.sum(logsumexp(lj, axis=1))) + jac
        trace.append(ll)
        resp = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        if (not reseeded and len(trace) > 1
                and trace[-1] - trace[-2] <= config.tol * abs(trace[-2])):
            break
    pi, c, gamma, A, b, sigma = params
    return GllimModel(pi, c, gamma, A, b, sigma, y_mean, y_scale, u_mean, u_scale,
                      covariance=config.covariance, names=tuple(data.names),
                      log_likelihood_trace=trace, reinitializations=reinit)


def _check_dim(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"{what} has dimension {x.shape[-1]}, model expects {n}")
    return x


def inverse_predict(model, y):
    """Posterior mean of ``u`` given ``y`` and the posterior component weights.

    Accepts one vector (D,) or a batch (N, D).
    """
    y = _check_dim(y, model.D, "feature vector")
    single = y.ndim == 1
    ys = model._std_y(np.atleast_2d(y))
    a_star, b_star, _, _ = model._inverse_terms()
    lw = model._log_evidence(ys)
    w = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    means = np.einsum("kld,nd->nkl", a_star, ys) + b_star[None]
    u_std = np.einsum("nk,nkl->nl", w, means)
    u_hat = model.u_mean + model.u_scale * u_std
    return (u_hat[0], w[0]) if single else (u_hat, w)


def forward_predict(model, u):
    """Conditional mean of ``y`` given ``u``; also returns p(k | u)."""
    u = _check_dim(u, model.L, "parameter vector")
    single = u.ndim == 1
    us = model._std_u(np.atleast_2d(u))
    lp = _log_gauss_u(us, model.c, model.gamma) + np.log(model.pi)
    p = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
    ys = np.einsum("nk,nkd->nd", p, np.einsum("kdl,nl->nkd", model.A, us) + model.b[None])
    y_hat = model.y_mean + model.y_scale * ys
    return (y_hat[0], p[0]) if single else (y_hat, p)


def log_likelihood(model, data):
    """Total log-density of the data under the joint model, original units."""
    if not isinstance(data, TrainingSet):
        data = TrainingSet(*data)
    _check_dim(data.y, model.D, "features")
    _check_dim(data.u, model.L, "parameters")
    lj = _log_joint(model._std_y(data.y), model._std_u(data.u), model.pi, model.c,
                    model.gamma, model.A, model.b, model.sigma)
    return float(np.sum(logsumexp(lj, axis=1))) + len(data) * model._log_jacobian()


def responsibilities(model, data):
    if not isinstance(data, TrainingSet):
        data = TrainingSet(*data)
    lj = _log_joint(model._std_y(data.y), model._std_u(data.u), model.pi, model.c,
                    model.gamma, model.A, model.b, model.sigma)
    return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))


# -- persistence -------------------------------------------------------------

_BLOB_FIELDS = ("pi", "c", "gamma", "A", "b", "sigma")


def save_model(model, path):
    """Single file: magic, u32 header length, JSON header, float64 LE parameter blob.

    The blob holds pi, c, gamma, A, b, sigma in that order, each C-contiguous.
    """
    header = {
        "format": "vsloc-gllim", "version": MODEL_VERSION,
        "K": model.K, "D": model.D, "L": model.L,
        "covariance": model.covariance, "names": list(model.names),
        "y_mean": model.y_mean.tolist(), "y_scale": model.y_scale.tolist(),
        "u_mean": model.u_mean.tolist(), "u_scale": model.u_scale.tolist(),
        "log_likelihood_trace": list(model.log_likelihood_trace),
        "reinitializations": [list(r) for r in model.reinitializations],
    }
    head = json.dumps(header, sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(getattr(model, f), dtype="<f8").tobytes()
                    for f in _BLOB_FIELDS)
    Path(path).write_bytes(MODEL_MAGIC + struct.pack("<I", len(head)) + head + blob)


def load_model(path):
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a GLLiM model file")
    (n_head,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8:8 + n_head])
    if header.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {header.get('version')}")
    K, D, L = header["K"], header["D"], header["L"]
    shapes = {"pi": (K,), "c": (K, L), "gamma": (K, L, L), "A": (K, D, L),
              "b": (K, D), "sigma": (K, D)}
    blob = np.frombuffer(raw[8 + n_head:], dtype="<f8")
    need = sum(int(np.prod(s)) for s in shapes.values())
    if blob.size != need:
        raise ValueError(f"{path}: parameter blob has {blob.size} values, expected {need}")
    arrays, pos = {}, 0
    for name in _BLOB_FIELDS:
        n = int(np.prod(shapes[name]))
        arrays[name] = blob[pos:pos + n].reshape(shapes[name]).astype(float)
        pos += n
    return GllimModel(**arrays,
                      y_mean=np.array(header["y_mean"]), y_scale=np.array(header["y_scale"]),
                      u_mean=np.array(header["u_mean"]), u_scale=np.array(header["u_scale"]),
                      covariance=header["covariance"], names=tuple(header["names"]),
                      log_likelihood_trace=list(header["log_likelihood_trace"]),
                      reinitializations=[tuple(r) for r in header["reinitializations"]])
