"""Convolutional autoencoder with an ellipse-consistency penalty.

The encoder is a stack of strided 1-D convolutions with ReLU; the decoder
mirrors it with transposed convolutions (zero-insertion upsampling followed
by a stride-1 correlation).  Training minimises, per window,

    ||v - v_hat||^2 + lambda_r * ||Z(v_hat, c) beta* + 1||^2

where ``Z(v_hat, c)`` pairs the reconstructed voltage with the measured
current and ``beta*`` is the conic fitted on the training windows.
Gradients are derived by hand; there is no autodiff dependency.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import checkpoint
from .ellipse import EllipseParams, design_matrix, fit_beta
from .errors import DivergenceError, NumericalError, ShapeError

KERNEL_SIZE = 5
HIDDEN_CHANNELS = 32
STRIDES = (2, 2)


# ---------------------------------------------------------------------------
# layer primitives (batched: x has shape (N, C, L))


def _same_pad(length: int, kernel: int, stride: int) -> tuple:
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel - length, 0)
    return out, total // 2, total - total // 2


def _mix(M, x):
    """Channel mixing ``M @ x`` for M (A, B) and x (N, B, L)."""
    if M.shape[1] == 1:
        return M[None] * x
    return M @ x


def _correlate(x, W, stride):
    """Strided "same" cross-correlation. Returns (pre-activation, cache)."""
    N, Cin, L = x.shape
    K, Cin_w, Cout = W.shape
    if Cin_w != Cin:
        raise ShapeError(f"filter expects {Cin_w} input channels, got {Cin}")
    if L < K:
        raise ShapeError(f"input length {L} shorter than kernel {K}")
    out, left, right = _same_pad(L, K, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right)))
    span = stride * (out - 1) + 1
    if Cin == 1:
        # single input channel: one (N*out, K) @ (K, Cout) product is cheapest
        cols = sliding_window_view(xp[:, 0], K, axis=1)[:, :span:stride].reshape(N * out, K)
        y = (cols @ W[:, 0, :]).reshape(N, out, Cout).transpose(0, 2, 1)
        return y, (cols, W, left, L, stride, out)
    Wt = W.transpose(0, 2, 1)  # K, Cout, Cin
    y = _mix(Wt[0], xp[:, :, 0:span:stride])
    for k in range(1, K):
        y += _mix(Wt[k], xp[:, :, k : k + span : stride])
    return y, (xp, W, left, L, stride, out)


def _correlate_backward(gy, cache):
    xp, W, left, L, stride, out = cache
    K = W.shape[0]
    span = stride * (out - 1) + 1
    if xp.ndim == 2:  # column cache from the single-channel path
        N, Cout = gy.shape[0], gy.shape[1]
        G = gy.transpose(0, 2, 1).reshape(N * out, Cout)
        dW = (xp.T @ G)[:, None, :]
        dcols = (G @ W[:, 0, :].T).reshape(N, out, K)
        dxp = np.zeros((N, 1, (out - 1) * stride + K))
        for k in range(K):
            dxp[:, 0, k : k + span : stride] += dcols[:, :, k]
        return dxp[:, :, left : left + L], dW
    dxp = np.zeros(xp.shape)
    dW = np.empty(W.shape)
    for k in range(K):
        xk = xp[:, :, k : k + span : stride]
        dW[k] = np.einsum("nil,nol->io", xk, gy)
        dxp[:, :, k : k + span : stride] += _mix(W[k], gy)
    return dxp[:, :, left : left + L], dW


def _transposed(f, W, stride, out_len):
    """Zero-insertion upsampling by ``stride`` to ``out_len`` samples followed by
    a stride-1 "same" correlation, computed without materialising the zeros."""
    N, Cin, L = f.shape
    K, Cin_w, Cout = W.shape
    if Cin_w != Cin:
        raise ShapeError(f"filter expects {Cin_w} input channels, got {Cin}")
    if (L - 1) * stride >= out_len:
        raise ShapeError(f"cannot upsample length {L} by {stride} into {out_len} samples")
    if out_len < K:
        raise ShapeError(f"output length {out_len} shorter than kernel {K}")
    if Cin == 1:
        y, cache = _correlate(_upsample(f, stride, out_len), W, 1)
        return y, (cache, stride, L)
    _, pad, _ = _same_pad(out_len, K, 1)
    off = K - 1
    size = max(out_len + 2 * off, stride * (L - 1) + pad + off + 1)
    span = stride * (L - 1) + 1
    Wt = W.transpose(0, 2, 1)
    yp = np.zeros((N, Cout, size))
    for k in range(K):
        s0 = pad - k + off
        yp[:, :, s0 : s0 + span : stride] += _mix(Wt[k], f)
    return yp[:, :, off : off + out_len], (f, W, stride, out_len, pad, off, size)


def _transposed_backward(gy, cache):
    if len(cache) == 3:
        inner, stride, L = cache
        du, dW = _correlate_backward(gy, inner)
        return du[:, :, : L * stride : stride], dW
    f, W, stride, out_len, pad, off, size = cache
    N, Cin, L = f.shape
    K = W.shape[0]
    span = stride * (L - 1) + 1
    gp = np.zeros((N, gy.shape[1], size))
    gp[:, :, off : off + out_len] = gy
    df = np.zeros(f.shape)
    dW = np.empty(W.shape)
    for k in range(K):
        s0 = pad - k + off
        gk = gp[:, :, s0 : s0 + span : stride]
        dW[k] = np.einsum("nil,nol->io", f, gk)
        df += _mix(W[k], gk)
    return df, dW


def _upsample(f, stride, out_len):
    N, C, L = f.shape
    if (L - 1) * stride >= out_len:
        raise ShapeError(f"cannot upsample length {L} by {stride} into {out_len} samples")
    u = np.zeros((N, C, out_len))
    u[:, :, : L * stride : stride] = f
    return u


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, None, :], 1
    if x.ndim == 2:
        return x[None], 2
    if x.ndim == 3:
        return x, 3
    raise ShapeError(f"expected 1-3 dimensions, got {x.ndim}")


def _restore(y, rank):
    if rank == 1:
        return y[0, 0] if y.shape[1] == 1 else y[0]
    if rank == 2:
        return y[0]
    return y


def conv_forward(g, W, B, stride: int, activation: str = "relu"):
    """``max(0, g (*) W + B)`` with "same" zero padding and the given stride.

    ``g`` may be (L,), (C, L) or (N, C, L); ``W`` is (kernel, C_in, C_out).
    Output length is ``ceil(L / stride)``.
    """
    x, rank = _as_batch(g)
    W = np.asarray(W, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (W.shape[2],):
        raise ShapeError(f"bias shape {B.shape} does not match {W.shape[2]} output channels")
    z, _ = _correlate(x, W, stride)
    return _restore(_activate(z + B[None, :, None], activation), rank)


def deconv_forward(f, W, B, stride: int, out_len: int | None = None, activation: str = "relu"):
    """Transposed convolution: zero-insertion upsampling then "same" correlation."""
    x, rank = _as_batch(f)
    W = np.asarray(W, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (W.shape[2],):
        raise ShapeError(f"bias shape {B.shape} does not match {W.shape[2]} output channels")
    out_len = x.shape[2] * stride if out_len is None else out_len
    z, _ = _transposed(x, W, stride, out_len)
    return _restore(_activate(z + B[None, :, None], activation), rank)


# ---------------------------------------------------------------------------
# model


@dataclass
class ConvLayer:
    W: np.ndarray  # (kernel, C_in, C_out)
    B: np.ndarray  # (C_out,)
    stride: int
    activation: str = "relu"
    transposed: bool = False

    @property
    def kernel(self) -> int:
        return self.W.shape[0]


@dataclass
class CaeModel:
    encoder: list
    decoder: list
    T: int
    seed: int | None = None

    @property
    def layers(self) -> list:
        return [*self.encoder, *self.decoder]

    def parameters(self) -> list:
        out = []
        for layer in self.layers:
            out.extend([layer.W, layer.B])
        return out

    def set_parameters(self, params) -> None:
        it = iter(params)
        for layer in self.layers:
            layer.W = next(it)
            layer.B = next(it)

    def lengths(self) -> list:
        """Sequence length entering each encoder layer (then the bottleneck)."""
        out = [self.T]
        for layer in self.encoder:
            out.append(-(-out[-1] // layer.stride))
        return out

    @property
    def bottleneck(self) -> int:
        return self.lengths()[-1]

    def architecture(self) -> dict:
        return {
            "T": self.T,
            "encoder": [
                {"kernel": l.kernel, "in": l.W.shape[1], "out": l.W.shape[2], "stride": l.stride, "activation": l.activation}
                for l in self.encoder
            ],
            "decoder": [
                {"kernel": l.kernel, "in": l.W.shape[1], "out": l.W.shape[2], "stride": l.stride, "activation": l.activation}
                for l in self.decoder
            ],
        }

    def checksum(self) -> str:
        h = hashlib.sha256()
        for p in self.parameters():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return h.hexdigest()

    def copy(self) -> "CaeModel":
        clone = lambda l: ConvLayer(l.W.copy(), l.B.copy(), l.stride, l.activation, l.transposed)  # noqa: E731
        return CaeModel([clone(l) for l in self.encoder], [clone(l) for l in self.decoder], self.T, self.seed)


def init_model(
    T: int,
    seed: int = 0,
    channels=(1, HIDDEN_CHANNELS, 1),
    kernel: int = KERNEL_SIZE,
    strides=STRIDES,
) -> CaeModel:
    """Symmetric encoder/decoder with He-uniform (fan-in) weights and zero biases."""
    if T < kernel:
        raise ShapeError(f"T={T} shorter than the kernel")
    rng = np.random.default_rng(seed)

    def layer(cin, cout, stride, activation, transposed):
        bound = math.sqrt(6.0 / (kernel * cin))
        W = rng.uniform(-bound, bound, size=(kernel, cin, cout))
        return ConvLayer(W, np.zeros(cout), stride, activation, transposed)

    pairs = list(zip(channels[:-1], channels[1:]))
    encoder = [layer(ci, co, s, "relu", False) for (ci, co), s in zip(pairs, strides)]
    rev = [(co, ci) for ci, co in reversed(pairs)]
    rev_strides = list(reversed(strides))
    decoder = [
        layer(ci, co, s, "identity" if i == len(rev) - 1 else "relu", True)
        for i, ((ci, co), s) in enumerate(zip(rev, rev_strides))
    ]
    return CaeModel(encoder, decoder, T, seed)


def _forward_cached(model: CaeModel, V: np.ndarray):
    """Batched forward; V is (N, T). Returns (V_hat, caches)."""
    if V.ndim != 2 or V.shape[1] != model.T:
        raise ShapeError(f"expected windows of length {model.T}, got shape {V.shape}")
    lengths = model.lengths()
    x = V[:, None, :]
    caches = []
    for layer in model.encoder:
        z, cache = _correlate(x, layer.W, layer.stride)
        z = z + layer.B[None, :, None]
        caches.append((cache, z, None))
        x = _activate(z, layer.activation)
    for h, layer in enumerate(model.decoder):
        target = lengths[len(model.decoder) - 1 - h]
        z, cache = _transposed(x, layer.W, layer.stride, target)
        z = z + layer.B[None, :, None]
        caches.append((cache, z, x.shape[2]))
        x = _activate(z, layer.activation)
    return x[:, 0, :], caches


def forward(model: CaeModel, v) -> np.ndarray:
    """Reconstruct one window (T,) or a batch (N, T)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        return _forward_cached(model, v[None])[0][0]
    return _forward_cached(model, v)[0]


# ---------------------------------------------------------------------------
# loss and gradients


def _as_beta(beta) -> np.ndarray:
    return beta.beta if isinstance(beta, EllipseParams) else np.asarray(beta, dtype=np.float64)


def _window_terms(V, V_hat, C, beta):
    a, b, cc, d, e = beta
    recon = np.sum((V - V_hat) ** 2, axis=1)
    r = a * V_hat * V_hat + b * V_hat * C + cc * C * C + d * V_hat + e * C + 1.0
    reg = np.sum(r * r, axis=1)
    return recon, reg, r


def loss(model: CaeModel, v, c, beta_star, lambda_r: float) -> tuple:
    """Return ``(total, recon, reg)``; for a batch each is the mean over windows."""
    V = np.atleast_2d(np.asarray(v, dtype=np.float64))
    C = np.atleast_2d(np.asarray(c, dtype=np.float64))
    if V.shape != C.shape:
        raise ShapeError(f"voltage {V.shape} and current {C.shape} differ")
    V_hat = _forward_cached(model, V)[0]
    recon, reg, _ = _window_terms(V, V_hat, C, _as_beta(beta_star))
    total = recon + lambda_r * reg
    return float(total.mean()), float(recon.mean()), float(reg.mean())


def gradients(model: CaeModel, V, C, beta_star, lambda_r: float) -> tuple:
    """Exact gradients of the batch-mean loss.

    Returns ``(grads, (total, recon, reg))`` where ``grads`` is parallel to
    ``model.parameters()``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    if V.shape != C.shape or V.shape[0] == 0:
        raise ShapeError(f"need a non-empty batch with matching shapes, got {V.shape} and {C.shape}")
    beta = _as_beta(beta_star)
    N = V.shape[0]
    V_hat, caches = _forward_cached(model, V)
    recon, reg, r = _window_terms(V, V_hat, C, beta)
    # d/dv_hat of each conic row is 2 a v_hat + b c + d
    g = (-2.0 * (V - V_hat) + lambda_r * 2.0 * r * (2.0 * beta[0] * V_hat + beta[1] * C + beta[3])) / N
    gx = g[:, None, :]

    grads = []
    layers = model.layers
    for idx in range(len(layers) - 1, -1, -1):
        layer = layers[idx]
        cache, z, _ = caches[idx]
        gz = gx * (z > 0) if layer.activation == "relu" else gx
        gB = gz.sum(axis=(0, 2))
        if layer.transposed:
            gin, gW = _transposed_backward(gz, cache)
        else:
            gin, gW = _correlate_backward(gz, cache)
        if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gB))):
            raise NumericalError(f"non-finite gradient in layer {idx} ({'decoder' if layer.transposed else 'encoder'})")
        grads.append(gB)
        grads.append(gW)
        gx = gin
    grads.reverse()  # now [W0, B0, W1, B1, ...]
    total = recon + lambda_r * reg
    return grads, (float(total.mean()), float(recon.mean()), float(reg.mean()))


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> tuple:
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    """Training profile.

    The first ``pretrain`` epochs fit the reconstruction alone, with the
    step size following a half-cosine from ``pretrain_lr`` to
    ``lr_final``.  The penalty then switches on (optionally ramped over
    ``warmup`` epochs) with fresh Adam moments and a constant step ``lr``
    until ``k_max`` epochs in total.  Early stopping only watches the
    penalty phase.
    """

    lambda_r: float = 200.0
    lr: float = 1e-4
    pretrain: int = 1000  # epochs without the penalty before it switches on
    pretrain_lr: float = 1e-2
    lr_final: float = 1e-6  # step size at the end of the pretrain cosine
    warmup: int = 0  # epochs over which the penalty weight ramps up from zero
    batch: int = 12
    k_max: int = 1500
    patience: int = 200
    min_delta: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.lambda_r < 0:
            raise ValueError("lambda_r must be >= 0")
        if not (self.lr > 0 and self.pretrain_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.batch < 1 or self.k_max < 1:
            raise ValueError("batch and k_max must be >= 1")
        if self.warmup < 0 or self.pretrain < 0:
            raise ValueError("pretrain and warmup must be >= 0")
        if not 0 < self.lr_final <= self.pretrain_lr:
            raise ValueError("lr_final must lie in (0, pretrain_lr]")

    def penalty_weight(self, epoch: int) -> float:
        """Penalty weight for 1-based ``epoch``."""
        k = epoch - self.pretrain
        if k <= 0:
            return 0.0
        if self.warmup <= 0 or k > self.warmup:
            return self.lambda_r
        return self.lambda_r * (k - 1) / self.warmup

    def phase_start(self, epoch: int) -> int:
        """First epoch of the phase containing ``epoch``."""
        if 0 < self.pretrain < epoch:
            return self.pretrain + 1
        return 1

    def settle_epochs(self) -> int:
        """Epochs before early stopping may trigger."""
        return self.pretrain + self.warmup

    def learning_rate(self, epoch: int) -> float:
        """Step size for 1-based ``epoch``."""
        if epoch > self.pretrain:
            return self.lr
        end = min(self.pretrain, self.k_max)
        if end <= 1:
            return self.pretrain_lr
        frac = (epoch - 1) / (end - 1)
        return self.lr_final + (self.pretrain_lr - self.lr_final) * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainReport:
    loss_curve: list  # per epoch (total, recon, reg), minibatch means
    initial_loss: tuple
    final_loss: tuple
    train_errors: np.ndarray
    epochs_run: int
    checksum: str
    beta_star: EllipseParams = field(repr=False, default=None)

    @property
    def epsilon_bar(self) -> float:
        return float(np.mean(self.train_errors))

    @property
    def max_train_error(self) -> float:
        return float(np.max(self.train_errors))

    def to_dict(self) -> dict:
        return {
            "loss_curve": [list(x) for x in self.loss_curve],
            "initial_loss": list(self.initial_loss),
            "final_loss": list(self.final_loss),
            "epsilon_bar": self.epsilon_bar,
            "max_train_error": self.max_train_error,
            "train_errors": [float(x) for x in self.train_errors],
            "epochs_run": self.epochs_run,
            "checksum": self.checksum,
            "beta_star": [float(x) for x in self.beta_star.beta] if self.beta_star is not None else None,
        }


def reconstruction_errors(model: CaeModel, V) -> np.ndarray:
    """Per-window squared reconstruction error ``||v - v_hat||^2``."""
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    out = np.empty(V.shape[0])
    for s in range(0, V.shape[0], 256):
        chunk = V[s : s + 256]
        out[s : s + 256] = np.sum((chunk - _forward_cached(model, chunk)[0]) ** 2, axis=1)
    return out


def pooled_beta(V, C) -> EllipseParams:
    V = np.asarray(V, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    return fit_beta(design_matrix(V.ravel(), C.ravel()))


def centre_biases(model: CaeModel, V) -> CaeModel:
    """Set each ReLU layer's bias so its channels' median pre-activation is zero on ``V``.

    With a single-channel bottleneck, zero biases leave the ReLU fully cut
    for roughly half of all weight draws and training never starts.
    Layers are processed in order so later layers see the centred outputs
    of earlier ones.  Returns a new model; the input is not modified.
    """
    model = model.copy()
    x = np.atleast_2d(np.asarray(V, dtype=np.float64))[:, None, :]
    lengths = model.lengths()
    for i, layer in enumerate(model.layers):
        if layer.transposed:
            h = i - len(model.encoder)
            z, _ = _transposed(x, layer.W, layer.stride, lengths[len(model.decoder) - 1 - h])
        else:
            z, _ = _correlate(x, layer.W, layer.stride)
        if layer.activation == "relu":
            layer.B[:] = -np.median(z.transpose(1, 0, 2).reshape(z.shape[1], -1), axis=1)
        x = _activate(z + layer.B[None, :, None], layer.activation)
    return model


def train(V, C, config: TrainConfig = None, beta_star=None, model: CaeModel | None = None, callback=None) -> tuple:
    """Fit a CAE on normal windows ``V``/``C`` of shape (N, T).

    ``beta_star`` defaults to the conic fitted on all training windows
    pooled together.  Returns ``(model, calibration, report)`` where the
    calibration dict carries ``epsilon_bar``, ``max_train_error`` and
    ``beta_star`` for threshold setting.
    """
    config = config or TrainConfig()
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    if V.shape != C.shape or V.shape[0] < 1:
        raise ShapeError("need at least one training window with matching voltage/current")
    N, T = V.shape
    beta = beta_star if beta_star is not None else pooled_beta(V, C)
    if not isinstance(beta, EllipseParams):
        beta = EllipseParams(beta)
    if model is None:
        model = centre_biases(init_model(T, config.seed), V[: config.batch])
    else:
        model = model.copy()
    rng = np.random.default_rng(config.seed)

    initial = loss(model, V, C, beta, config.lambda_r)
    params = model.parameters()
    state = AdamState.zeros_like(params)
    curve = []
    best, stale = math.inf, 0
    epoch = 0
    for epoch in range(1, config.k_max + 1):
        order = rng.permutation(N)
        if epoch > 1 and config.phase_start(epoch) == epoch:
            state = AdamState.zeros_like(params)
            best, stale = math.inf, 0
        lr = config.learning_rate(epoch)
        lam = config.penalty_weight(epoch)
        sums = np.zeros(3)
        for s in range(0, N, config.batch):
            idx = order[s : s + config.batch]
            grads, terms = gradients(model, V[idx], C[idx], beta, lam)
            params, state = adam_step(params, grads, state, lr)
            model.set_parameters(params)
            sums += np.array(terms) * len(idx)
        _, recon, reg = sums / N
        # the curve always reports the full-weight objective
        epoch_loss = (float(recon + config.lambda_r * reg), float(recon), float(reg))
        if not math.isfinite(epoch_loss[0]):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}")
        curve.append(epoch_loss)
        if callback is not None:
            callback(epoch, epoch_loss)
        if epoch <= config.settle_epochs():
            continue
        if epoch_loss[0] < best - config.min_delta:
            best, stale = epoch_loss[0], 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    final = loss(model, V, C, beta, config.lambda_r)
    errors = reconstruction_errors(model, V)
    report = TrainReport(curve, initial, final, errors, epoch, model.checksum(), beta)
    calib = {"epsilon_bar": report.epsilon_bar, "max_train_error": report.max_train_error, "beta_star": beta}
    return model, calib, report


# ---------------------------------------------------------------------------
# persistence


def save_model(model: CaeModel, path, meta: dict | None = None, kind: str = "picae"):
    header = {"kind": kind, "architecture": model.architecture(), "T": model.T, "seed": model.seed}
    header.update(meta or {})
    return checkpoint.write_envelope(path, header, model.parameters())


def load_model(path) -> tuple:
    header, arrays = checkpoint.read_envelope(path)
    arch = header["architecture"]
    layers = []
    it = iter(arrays)
    for spec in arch["encoder"]:
        layers.append(ConvLayer(next(it), next(it), spec["stride"], spec["activation"], False))
    n_enc = len(arch["encoder"])
    for spec in arch["decoder"]:
        layers.append(ConvLayer(next(it), next(it), spec["stride"], spec["activation"], True))
    model = CaeModel(layers[:n_enc], layers[n_enc:], header["T"], header.get("seed"))
    return model, header


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
