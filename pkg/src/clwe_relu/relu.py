"""One-hidden-layer ReLU networks and the exact triangle-wave construction."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Rows per block when evaluating; bounds the (rows x width) scratch array.
_EVAL_BLOCK = 8192


@dataclass(frozen=True, eq=False)
class OneHiddenLayerNet:
    """``f(x) = sum_j a[j] * max(<W[j], x> + b[j], 0)``.

    ``W`` has shape ``(k, d)``. Arrays are copied and made read-only on
    construction so a net can be shared freely.
    """

    a: np.ndarray
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        W = np.array(self.W, dtype=np.float64)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        if W.ndim != 2 or W.shape[0] != a.size or b.size != a.size:
            raise ValueError("inconsistent shapes: need a (k,), W (k, d), b (k,)")
        if W.shape[1] < 1:
            raise ValueError("input dimension must be >= 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(W))):
            raise ValueError("network coefficients must be finite")
        for arr in (a, b, W):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "W", np.ascontiguousarray(W))

    @property
    def k(self) -> int:
        return self.a.size

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def __call__(self, x):
        return evaluate(self, x)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "W": self.W.tolist(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "OneHiddenLayerNet":
        net = cls(a=rec["a"], W=rec["W"], b=rec["b"])
        if net.k != rec["k"] or net.d != rec["d"]:
            raise ValueError("record k/d disagree with array shapes")
        return net

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OneHiddenLayerNet":
        return cls.from_dict(json.loads(text))


def evaluate(net: OneHiddenLayerNet, x) -> np.ndarray | float:
    """Evaluate ``net`` on one input (shape ``(d,)``) or a batch (``(m, d)``).

    For ``d == 1`` a flat array of scalars is also accepted as a batch.
    Unit contributions are accumulated in index order with numpy's
    pairwise summation.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = False
    if net.d == 1 and arr.ndim <= 1:
        single = arr.ndim == 0
        arr = arr.reshape(-1, 1)
    elif arr.ndim == 1:
        single = True
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != net.d:
        raise ValueError(f"expected inputs of dimension {net.d}, got shape {np.shape(x)}")
    out = np.empty(arr.shape[0])
    for lo in range(0, arr.shape[0], _EVAL_BLOCK):
        blk = arr[lo : lo + _EVAL_BLOCK]
        pre = blk @ net.W.T
        pre += net.b
        np.maximum(pre, 0.0, out=pre)
        pre *= net.a
        out[lo : lo + _EVAL_BLOCK] = pre.sum(axis=1)
    return float(out[0]) if single else out


def build_nn_1d(R: int) -> OneHiddenLayerNet:
    """Scalar net with ``4R + 2`` units equal to ``phi(x) * 1{|x| <= R}``.

    Units: ``(x+R)_+``, ``-(x-R)_+`` and, for ``k = 1..2R``, the pair
    ``+2 (x+R+1/4-k)_+`` and ``-2 (x+R+3/4-k)_+``. Every bias is a
    quarter-integer and therefore exact in binary floating point.
    """
    if isinstance(R, bool) or int(R) != R or R < 1:
        raise ValueError("R must be a positive integer")
    R = int(R)
    a = [1.0, -1.0]
    b = [float(R), float(-R)]
    for k in range(1, 2 * R + 1):
        a += [2.0, -2.0]
        b += [R + 0.25 - k, R + 0.75 - k]
    W = np.ones((len(a), 1))
    return OneHiddenLayerNet(a=np.array(a), W=W, b=np.array(b))


def lift(net1d: OneHiddenLayerNet, gamma: float, w) -> OneHiddenLayerNet:
    """The d-input net ``x -> net1d(gamma * <w, x>)``."""
    if net1d.d != 1:
        raise ValueError("lift expects a scalar-input net")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ValueError("direction must have dimension >= 1")
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    W = (gamma * net1d.W[:, :1]) * w[None, :]
    return OneHiddenLayerNet(a=net1d.a, W=W, b=net1d.b)


def eval_exact_dyadic(net1d: OneHiddenLayerNet, t, frac_bits: int) -> np.ndarray:
    """Rounding-free evaluation of an integer-coefficient scalar net.

    Requires unit weights, integer outer coefficients and quarter-integer
    biases (as produced by :func:`build_nn_1d`), and inputs that are
    multiples of ``2**-frac_bits``. Every unit term is then an integer
    after scaling by ``2**frac_bits`` and the sum is accumulated in int64.
    """
    if net1d.d != 1 or not np.all(net1d.W == 1.0):
        raise ValueError("exact evaluation needs a scalar net with unit weights")
    if not np.all(net1d.a == np.rint(net1d.a)):
        raise ValueError("outer coefficients must be integers")
    if frac_bits < 2 or not np.all(net1d.b * 4 == np.rint(net1d.b * 4)):
        raise ValueError("biases must be multiples of 1/4 and frac_bits >= 2")
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    scale = 2.0**frac_bits
    ti = t * scale
    if not np.all(ti == np.rint(ti)):
        raise ValueError("inputs are not on the requested dyadic grid")
    span = (np.max(np.abs(t), initial=0.0) + np.max(np.abs(net1d.b))) * scale
    if span >= 2.0**53 or span * np.sum(np.abs(net1d.a)) >= 2.0**62:
        raise ValueError("frac_bits too large for exact int64 accumulation")
    t_int = ti.astype(np.int64)
    acc = np.zeros(t.size, dtype=np.int64)
    for aj, bj in zip(net1d.a.astype(np.int64), (net1d.b * scale).astype(np.int64)):
        acc += aj * np.maximum(t_int + bj, 0)
    return acc.astype(np.float64) / scale


def exact_frac_bits(R: int, t_max: float) -> int:
    """Largest dyadic resolution for which :func:`eval_exact_dyadic` is exact
    on ``build_nn_1d(R)`` with inputs bounded by ``t_max``."""
    span = t_max + R + 1.0
    total = 2.0 + 4.0 * 2 * R
    bits = min(52 - int(np.ceil(np.log2(span))), 61 - int(np.ceil(np.log2(span * total))))
    return bits


def width(net: OneHiddenLayerNet) -> int:
    return net.k
