"""Fully connected Q-function (D_in -> 512 -> 128 -> 2) in plain numpy.

Weights are stored as (out, in) matrices; ReLU follows the two hidden
layers and the output layer is linear. Everything is float64.

Checkpoint byte layout (all little-endian)::

    magic        4s   b"GRLQ"
    version      u16
    F, L, D_in   3 x u32
    H1, H2, A    3 x u32   hidden widths and action count
    group        u32
    step         u64       trainer optimizer steps
    schema       32s       SHA-256 of the attribute names
    adam_t       u64
    lr,b1,b2,eps 4 x f64
    params       f64[]     W1, b1, W2, b2, W3, b3 (row-major)
    adam m       f64[]     same order
    adam v       f64[]     same order
    crc32        u32       over every preceding byte
"""

from __future__ import annotations

import copy
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ValidationError

HIDDEN = (512, 128)
N_ACTIONS = 2

MAGIC = b"GRLQ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sH3I3IIQ32sQ4d")


class QNetwork:
    """Three affine layers with ReLU between them.

    Parameters live in one flat float64 buffer ``theta``; ``params`` holds
    the per-layer views ``[W1, b1, W2, b2, W3, b3]``.
    """

    def __init__(self, params: list[np.ndarray]):
        if len(params) != 6:
            raise ValueError("expected [W1, b1, W2, b2, W3, b3]")
        shapes = [np.shape(p) for p in params]
        self.theta = np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in params])
        self.params = _views(self.theta, shapes)

    @property
    def d_in(self) -> int:
        return self.params[0].shape[1]

    @property
    def hidden(self) -> tuple[int, int]:
        return self.params[0].shape[0], self.params[2].shape[0]

    @property
    def n_actions(self) -> int:
        return self.params[4].shape[0]

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [p.shape for p in self.params]

    def copy(self) -> "QNetwork":
        return QNetwork(self.params)

    def zeros_like(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.params]

    def flat(self) -> np.ndarray:
        return self.theta.copy()

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.theta).all())

    def __call__(self, x):
        return forward(self, x)


def _views(flat: np.ndarray, shapes) -> list[np.ndarray]:
    out, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        out.append(flat[pos:pos + size].reshape(s))
        pos += size
    return out


def init_network(d_in: int, seed: int | np.random.Generator, hidden=HIDDEN, n_actions: int = N_ACTIONS) -> QNetwork:
    """Glorot-uniform weights, zero biases."""
    if d_in < 1:
        raise ValueError("input dimension must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [d_in, *hidden, n_actions]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        params.append(np.zeros(fan_out))
    return QNetwork(params)


def _check_input(net: QNetwork, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.d_in:
        raise ValidationError(f"state dimension {x.shape[-1]} does not match network input {net.d_in}")
    return x


def forward(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Q-values for one state (shape (2,)) or a batch (shape (n, 2))."""
    x = _check_input(net, x)
    W1, b1, W2, b2, W3, b3 = net.params
    h = np.maximum(x @ W1.T + b1, 0.0)
    h = np.maximum(h @ W2.T + b2, 0.0)
    return h @ W3.T + b3


def td_loss_and_gradients(net: QNetwork, states: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error on the taken actions and its exact gradient.

    Only ``Q(s_j, a_j)`` enters the loss, so the untaken action's output
    receives zero gradient.
    """
    x = _check_input(net, np.atleast_2d(states))
    actions = np.asarray(actions, dtype=np.intp).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    n = x.shape[0]
    if n == 0 or actions.shape[0] != n or targets.shape[0] != n:
        raise ValueError("batch must be non-empty with one action and target per state")

    W1, b1, W2, b2, W3, b3 = net.params
    z1 = x @ W1.T + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2.T + b2
    h2 = np.maximum(z2, 0.0)
    q = h2 @ W3.T + b3

    rows = np.arange(n)
    err = targets - q[rows, actions]
    loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[rows, actions] = -2.0 * err / n
    gW3 = dq.T @ h2
    gb3 = dq.sum(axis=0)
    dz2 = (dq @ W3) * (z2 > 0)
    gW2 = dz2.T @ h1
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ W2) * (z1 > 0)
    gW1 = dz1.T @ x
    gb1 = dz1.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2, gW3, gb3]


@dataclass
class AdamState:
    m: np.ndarray  # flat, same layout as QNetwork.theta
    v: np.ndarray
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    def __post_init__(self):
        self.m = _flatten(self.m)
        self.v = _flatten(self.v)

    @classmethod
    def for_network(cls, net: QNetwork, lr: float = 1e-4, beta1: float = 0.9,
                    beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        n = net.theta.size
        return cls(m=np.zeros(n), v=np.zeros(n), lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def copy(self) -> "AdamState":
        return copy.deepcopy(self)


def _flatten(arrays) -> np.ndarray:
    if isinstance(arrays, np.ndarray):
        return np.array(arrays, dtype=np.float64).ravel()
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def adam_step(net: QNetwork, grads: list[np.ndarray], opt: AdamState) -> None:
    """One bias-corrected Adam update, applied in place to ``net`` and ``opt``."""
    if [np.shape(g) for g in grads] != net.shapes:
        raise ValueError("gradient shapes do not match network")
    g = np.concatenate([np.ravel(x) for x in grads])
    opt.t += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1 ** opt.t
    c2 = 1.0 - b2 ** opt.t
    m, v = opt.m, opt.v
    m *= b1
    m += (1.0 - b1) * g
    g *= g
    g *= 1.0 - b2
    v *= b2
    v += g
    # g is reused as scratch for the step size
    np.divide(v, c2, out=g)
    np.sqrt(g, out=g)
    g += opt.eps
    np.divide(m, g, out=g)
    g *= opt.lr / c1
    net.theta -= g


def sync_target(policy: QNetwork) -> QNetwork:
    return policy.copy()


@dataclass
class CheckpointMeta:
    n_features: int
    n_attributes: int
    group: int = 0
    step: int = 0
    schema_digest: bytes = field(default=b"\x00" * 32)


def save_checkpoint(net: QNetwork, opt: AdamState, meta: CheckpointMeta) -> bytes:
    h1, h2 = net.hidden
    if len(meta.schema_digest) != 32:
        raise ValueError("schema digest must be 32 bytes")
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION,
        meta.n_features, meta.n_attributes, net.d_in,
        h1, h2, net.n_actions,
        meta.group, meta.step, meta.schema_digest,
        opt.t, opt.lr, opt.beta1, opt.beta2, opt.eps,
    )
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (net.theta, opt.m, opt.v))
    payload = header + body
    return payload + struct.pack("<I", zlib.crc32(payload))


def load_checkpoint(data: bytes, expected_d_in: int | None = None) -> tuple[QNetwork, AdamState, CheckpointMeta]:
    if len(data) < _HEADER.size + 4:
        raise CheckpointError(f"checkpoint truncated: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic bytes {data[:4]!r}")
    (_, version, F, L, d_in, h1, h2, n_act, group, step, digest,
     adam_t, lr, b1, b2, eps) = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    shapes = [(h1, d_in), (h1,), (h2, h1), (h2,), (n_act, h2), (n_act,)]
    n_values = 3 * sum(int(np.prod(s)) for s in shapes)
    expected_len = _HEADER.size + 8 * n_values + 4
    if len(data) != expected_len:
        raise CheckpointError(f"checkpoint truncated or padded: {len(data)} bytes, expected {expected_len}")
    (crc,) = struct.unpack_from("<I", data, expected_len - 4)
    if crc != zlib.crc32(data[: expected_len - 4]):
        raise CheckpointError("checkpoint checksum mismatch")
    if expected_d_in is not None and d_in != expected_d_in:
        raise CheckpointError(f"checkpoint input dimension {d_in} does not match configured {expected_d_in}")

    flat = np.frombuffer(data, dtype="<f8", count=n_values, offset=_HEADER.size).astype(np.float64)
    n = n_values // 3
    net = QNetwork(_views(flat[:n].copy(), shapes))
    opt = AdamState(m=flat[n:2 * n].copy(), v=flat[2 * n:].copy(), lr=lr, beta1=b1, beta2=b2, eps=eps, t=adam_t)
    meta = CheckpointMeta(n_features=F, n_attributes=L, group=group, step=step, schema_digest=digest)
    return net, opt, meta
