"""Q-function approximator: LSTM layer, two relu dense layers, 3-way softmax.

One network serves all three outcome heads (home / away / neither share
weights). Windows are consumed chronologically from a zero initial state;
windows are independent of each other. Gradients are hand-derived for
exactly this architecture (see kernels/_core.py); `grad_check` compares
them against central finite differences.

forward/backward are pure given immutable params. Batch members are
evaluated in a fixed order (trace length descending, stable), so results
are bit-reproducible for a fixed seed; any future parallel reduction must
keep this order-fixed summation contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import (
    CorruptCheckpointError,
    NumericalError,
    ShapeMismatchError,
    VersionMismatchError,
)
from .events import ActionVocabulary, DEFAULT_VOCABULARY, FeatureScaler

PARAM_NAMES = ("w_gates", "b_gates", "w_d1", "b_d1", "w_d2", "b_d2", "w_out", "b_out")


@dataclass(frozen=True)
class NetworkConfig:
    input_width: int
    lstm_hidden: int = 1000
    dense_widths: Tuple[int, int] = (1000, 1000)
    output: int = 3
    max_trace: int = 10

    def __post_init__(self):
        if self.input_width < 1 or self.lstm_hidden < 1 or min(self.dense_widths) < 1:
            raise ValueError("all layer widths must be >= 1")
        if self.output != 3:
            raise ValueError("output layer is fixed at 3 heads")
        if self.max_trace < 1:
            raise ValueError("max_trace must be >= 1")

    def param_shapes(self):
        i, h = self.input_width, self.lstm_hidden
        d1, d2 = self.dense_widths
        return {
            "w_gates": (i + h, 4 * h),
            "b_gates": (4 * h,),
            "w_d1": (h, d1),
            "b_d1": (d1,),
            "w_d2": (d1, d2),
            "b_d2": (d2,),
            "w_out": (d2, 3),
            "b_out": (3,),
        }


class QOutput(NamedTuple):
    q_home: float
    q_away: float
    q_neither: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


@dataclass
class NetworkParams:
    """All weights plus the scaler and vocabulary they were trained with."""

    config: NetworkConfig
    w_gates: np.ndarray  # [I+H, 4H], gate blocks: input, forget, candidate, output
    b_gates: np.ndarray
    w_d1: np.ndarray
    b_d1: np.ndarray
    w_d2: np.ndarray
    b_d2: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    scaler: FeatureScaler
    vocabulary: ActionVocabulary

    def arrays(self) -> Tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    def per_gate_weights(self) -> np.ndarray:
        """[4, H, I+H] view-equivalent of the gate weight matrices."""
        h = self.config.lstm_hidden
        fan = self.config.input_width + h
        return self.w_gates.reshape(fan, 4, h).transpose(1, 2, 0)

    def n_parameters(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            config=self.config,
            scaler=self.scaler,
            vocabulary=self.vocabulary,
            **{name: getattr(self, name).copy() for name in PARAM_NAMES},
        )


def init_params(
    config: NetworkConfig,
    seed: int,
    scaler: Optional[FeatureScaler] = None,
    vocabulary: ActionVocabulary = DEFAULT_VOCABULARY,
) -> NetworkParams:
    """Fan-in-scaled uniform weights, zero biases, forget-gate bias 1.

    Deterministic for a fixed seed: weight matrices are drawn in the fixed
    order w_gates, w_d1, w_d2, w_out.
    """
    rng = np.random.default_rng(seed)
    shapes = config.param_shapes()

    def uniform(shape):
        bound = 1.0 / np.sqrt(shape[0])
        return rng.uniform(-bound, bound, size=shape)

    w_gates = uniform(shapes["w_gates"])
    w_d1 = uniform(shapes["w_d1"])
    w_d2 = uniform(shapes["w_d2"])
    w_out = uniform(shapes["w_out"])
    b_gates = np.zeros(shapes["b_gates"])
    b_gates[config.lstm_hidden:2 * config.lstm_hidden] = 1.0
    return NetworkParams(
        config=config,
        w_gates=w_gates,
        b_gates=b_gates,
        w_d1=w_d1,
        b_d1=np.zeros(shapes["b_d1"]),
        w_d2=w_d2,
        b_d2=np.zeros(shapes["b_d2"]),
        w_out=w_out,
        b_out=np.zeros(shapes["b_out"]),
        scaler=scaler if scaler is not None else FeatureScaler.identity(),
        vocabulary=vocabulary,
    )


def _check_width(params: NetworkParams, width: int) -> None:
    if width != params.config.input_width:
        raise ValueError(
            f"window step width {width} != network input width "
            f"{params.config.input_width}"
        )


def sort_by_trace(tl: np.ndarray) -> np.ndarray:
    """Stable descending order, the fixed batch evaluation order."""
    return np.argsort(-tl, kind="stable")


def forward_batch(params: NetworkParams, x: np.ndarray, tl: np.ndarray):
    """Forward on a pre-sorted time-major batch; returns (probs, cache).

    x: [T, B, input_width]; tl sorted descending (see sort_by_trace).
    """
    _check_width(params, x.shape[2])
    out = kernels.lstm_forward_cached(*params.arrays(), x, tl)
    return out[0], out


def forward_batch_probs(params: NetworkParams, x: np.ndarray, tl: np.ndarray) -> np.ndarray:
    _check_width(params, x.shape[2])
    return kernels.lstm_forward_probs(*params.arrays(), x, tl)


def backward_batch(params: NetworkParams, tl: np.ndarray, dprobs: np.ndarray, cache):
    return kernels.lstm_backward(*params.arrays(), tl, dprobs, *cache)


def _window_to_batch(window: np.ndarray):
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 1:
        raise ValueError("window must be a [tl, width] array with tl >= 1")
    x = np.ascontiguousarray(window[:, None, :])
    tl = np.array([window.shape[0]], dtype=np.int64)
    return x, tl


def forward(params: NetworkParams, window: np.ndarray):
    """Q estimate for one window of encoded steps. Returns (QOutput, cache)."""
    x, tl = _window_to_batch(window)
    probs, cache = forward_batch(params, x, tl)
    return QOutput(*probs[0]), cache


def backward(params: NetworkParams, window: np.ndarray, dprobs: np.ndarray, cache=None):
    """Gradients of all parameters for an upstream gradient on the 3 outputs."""
    x, tl = _window_to_batch(window)
    if cache is None:
        _, cache = forward_batch(params, x, tl)
    grads = backward_batch(params, tl, np.asarray(dprobs, dtype=np.float64).reshape(1, 3), cache)
    return dict(zip(PARAM_NAMES, grads))


def assemble_windows(steps: np.ndarray, ends: np.ndarray, tl: np.ndarray):
    """Gather per-step windows out of a flat step matrix, kernel-ready.

    steps: [N, W] flat encoded steps; window b covers rows
    ends[b]-tl[b]+1 .. ends[b]. Returns (x [T,B,W] time-major sorted by
    trace length descending, tl_sorted, order) where order restores the
    caller's batch order: probs_result[order] corresponds to input b.
    """
    order = sort_by_trace(tl)
    tl_sorted = tl[order]
    ends_sorted = ends[order]
    t_max = int(tl_sorted[0])
    starts = ends_sorted - tl_sorted + 1
    idx = starts[None, :] + np.arange(t_max)[:, None]
    idx = np.where(np.arange(t_max)[:, None] < tl_sorted[None, :], idx, 0)
    x = np.ascontiguousarray(steps[idx])
    return x, tl_sorted, order


# ---------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    max_rel_err: float
    tolerance: float
    per_trace: dict
    passed: bool

    def __str__(self):
        lines = [
            f"gradient check: max relative error {self.max_rel_err:.3e} "
            f"(tolerance {self.tolerance:.1e}) -> {'PASS' if self.passed else 'FAIL'}"
        ]
        for tl, err in sorted(self.per_trace.items()):
            lines.append(f"  trace length {tl:2d}: max rel err {err:.3e}")
        return "\n".join(lines)


def grad_check(
    config: NetworkConfig,
    seed: int = 0,
    tolerance: float = 1e-4,
    trace_lengths: Sequence[int] = (1, 10),
    epsilon: float = 1e-5,
) -> GradCheckReport:
    """Analytic BPTT gradients vs central finite differences.

    Checks d(u . probs)/d(theta) for a fixed random direction u on random
    windows. Relative error per parameter is |a - fd| / max(|a|, |fd|, 1e-6).
    """
    rng = np.random.default_rng(seed)
    per_trace = {}
    for tl_value in trace_lengths:
        params = init_params(config, seed=int(rng.integers(2 ** 31)))
        # break bias symmetry so no gradient is structurally zero
        for name in PARAM_NAMES:
            arr = getattr(params, name)
            arr += rng.normal(0.0, 0.05, size=arr.shape)
        window = rng.normal(0.0, 1.0, size=(tl_value, config.input_width))
        u = rng.normal(0.0, 1.0, size=3)

        _, cache = forward(params, window)
        grads = backward(params, window, u, cache)

        worst = 0.0
        x, tl = _window_to_batch(window)
        for name in PARAM_NAMES:
            arr = getattr(params, name)
            analytic = grads[name]
            flat = arr.reshape(-1)
            fd = np.empty_like(flat)
            for j in range(flat.size):
                keep = flat[j]
                flat[j] = keep + epsilon
                hi = float(forward_batch_probs(params, x, tl)[0] @ u)
                flat[j] = keep - epsilon
                lo = float(forward_batch_probs(params, x, tl)[0] @ u)
                flat[j] = keep
                fd[j] = (hi - lo) / (2.0 * epsilon)
            a = analytic.reshape(-1)
            rel = np.abs(a - fd) / np.maximum(np.maximum(np.abs(a), np.abs(fd)), 1e-6)
            worst = max(worst, float(rel.max()))
        per_trace[int(tl_value)] = worst
    max_err = max(per_trace.values())
    return GradCheckReport(
        max_rel_err=max_err,
        tolerance=tolerance,
        per_trace=per_trace,
        passed=bool(max_err < tolerance),
    )


# ---------------------------------------------------------------------------
# checkpoint serialization

CKPT_MAGIC = b"GIMCKPT"
CKPT_VERSION = 1


def save_checkpoint(params: NetworkParams, path) -> None:
    """Self-describing checkpoint; load(save(p)) reproduces p bitwise.

    Weights are stored as little-endian float64 (the in-memory master
    precision) so the round trip is exact.
    """
    cfg = params.config
    header = {
        "config": {
            "input_width": cfg.input_width,
            "lstm_hidden": cfg.lstm_hidden,
            "dense_widths": list(cfg.dense_widths),
            "output": cfg.output,
            "max_trace": cfg.max_trace,
        },
        "vocabulary": list(params.vocabulary.names),
        "scaler": {"mean": params.scaler.mean.tolist(), "std": params.scaler.std.tolist()},
        "arrays": [
            {"name": n, "dtype": "<f8", "shape": list(getattr(params, n).shape)}
            for n in PARAM_NAMES
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(bytes([CKPT_VERSION]))
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        for name in PARAM_NAMES:
            arr = np.ascontiguousarray(getattr(params, name), dtype="<f8")
            fh.write(arr.tobytes())


def load_checkpoint(path, vocabulary: Optional[ActionVocabulary] = None) -> NetworkParams:
    """Load a checkpoint; optionally cross-check an expected vocabulary.

    Raises CorruptCheckpointError / VersionMismatchError /
    ShapeMismatchError as distinct failures.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(CKPT_MAGIC):
        raise CorruptCheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = len(CKPT_MAGIC)
    if pos >= len(data):
        raise CorruptCheckpointError(f"{path}: truncated before version byte")
    version = data[pos]
    if version != CKPT_VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {CKPT_VERSION}")
    pos += 1
    if pos + 4 > len(data):
        raise CorruptCheckpointError(f"{path}: truncated header length")
    (hlen,) = np.frombuffer(data[pos:pos + 4], dtype=np.uint32)
    pos += 4
    if pos + int(hlen) > len(data):
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos:pos + int(hlen)].decode("utf-8"))
        cfg = NetworkConfig(
            input_width=header["config"]["input_width"],
            lstm_hidden=header["config"]["lstm_hidden"],
            dense_widths=tuple(header["config"]["dense_widths"]),
            output=header["config"]["output"],
            max_trace=header["config"]["max_trace"],
        )
    except (KeyError, ValueError, UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CorruptCheckpointError(f"{path}: corrupt header ({err})") from None
    pos += int(hlen)

    expected = cfg.param_shapes()
    arrays = {}
    for meta in header["arrays"]:
        shape = tuple(meta["shape"])
        if shape != expected[meta["name"]]:
            raise ShapeMismatchError(
                f"{path}: stored {meta['name']} has shape {shape}, "
                f"config implies {expected[meta['name']]}"
            )
        nbytes = 8 * int(np.prod(shape)) if shape else 8
        if pos + nbytes > len(data):
            raise CorruptCheckpointError(f"{path}: truncated weights for {meta['name']!r}")
        arrays[meta["name"]] = (
            np.frombuffer(data[pos:pos + nbytes], dtype="<f8").reshape(shape).copy()
        )
        pos += nbytes

    ckpt_vocab = ActionVocabulary(header["vocabulary"])
    if vocabulary is not None and vocabulary != ckpt_vocab:
        raise ShapeMismatchError(
            f"{path}: checkpoint vocabulary ({len(ckpt_vocab)} actions) does not "
            f"match the provided vocabulary ({len(vocabulary)} actions)"
        )
    scaler = FeatureScaler(
        mean=np.asarray(header["scaler"]["mean"], dtype=np.float64),
        std=np.asarray(header["scaler"]["std"], dtype=np.float64),
    )
    missing = [n for n in PARAM_NAMES if n not in arrays]
    if missing:
        raise CorruptCheckpointError(f"{path}: missing arrays {missing}")
    if not all(np.all(np.isfinite(arrays[n])) for n in PARAM_NAMES):
        raise NumericalError(f"{path}: checkpoint contains non-finite weights")
    return NetworkParams(config=cfg, scaler=scaler, vocabulary=ckpt_vocab, **arrays)
