"""The trainable pick linker: stacked bidirectional GRUs + sigmoid head.

Architecture: two bidirectional GRU layers of ``hidden`` units per
direction (forward/backward outputs concatenated), then a per-time-step
dense unit squashed by a sigmoid into a link probability for each row of
the window against its root pick.

Everything is plain numpy.  Gates per direction are stored as fused blocks
in order (update z, reset r, candidate c):

    z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
    c_t = tanh(x_t W_c + (r_t * h_{t-1}) U_c + b_c)
    h_t = z_t * h_{t-1} + (1 - z_t) * c_t

(the reset gate scales the previous state before the candidate transform).
Training is full backpropagation through time with Adam on binary
cross-entropy; padded rows carry target 0 and contribute to the loss.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .synth import GroundTruth
from .window import SubSequence

CHECKPOINT_FORMAT = "pickassoc-linker"
CHECKPOINT_VERSION = 1


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


class LinkerModel:
    """Parameter container with explicit shapes.

    ``params`` maps names like ``"l0.f.w"`` (layer 0, forward direction,
    input weights) to arrays: w is (D, 3H), u is (H, 3H), b is (3H,);
    ``out.w`` is (2H, 1) and ``out.b`` is (1,).
    """

    def __init__(self, hidden: int, params: dict, n_input: int = 5, n_layers: int = 2):
        self.hidden = hidden
        self.n_input = n_input
        self.n_layers = n_layers
        self.params = params
        self._check_shapes()

    def _check_shapes(self):
        h = self.hidden
        for layer in range(self.n_layers):
            d = self.n_input if layer == 0 else 2 * h
            for direction in ("f", "b"):
                key = f"l{layer}.{direction}"
                if self.params[f"{key}.w"].shape != (d, 3 * h):
                    raise ValueError(f"layer {key}: w must be {(d, 3 * h)}, "
                                     f"got {self.params[f'{key}.w'].shape}")
                if self.params[f"{key}.u"].shape != (h, 3 * h):
                    raise ValueError(f"layer {key}: u must be {(h, 3 * h)}")
                if self.params[f"{key}.b"].shape != (3 * h,):
                    raise ValueError(f"layer {key}: b must be {(3 * h,)}")
        if self.params["out.w"].shape != (2 * h, 1):
            raise ValueError(f"layer out: w must be {(2 * h, 1)}")
        if self.params["out.b"].shape != (1,):
            raise ValueError("layer out: b must be (1,)")

    @classmethod
    def init(cls, hidden: int, n_input: int = 5, n_layers: int = 2,
             seed: int = 0) -> "LinkerModel":
        """Fan-in-scaled uniform weights, zero biases, from a recorded seed."""
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}

        def uniform(shape):
            bound = 1.0 / np.sqrt(shape[0])
            return rng.uniform(-bound, bound, size=shape)

        for layer in range(n_layers):
            d = n_input if layer == 0 else 2 * hidden
            for direction in ("f", "b"):
                key = f"l{layer}.{direction}"
                params[f"{key}.w"] = uniform((d, 3 * hidden))
                params[f"{key}.u"] = uniform((hidden, 3 * hidden))
                params[f"{key}.b"] = np.zeros(3 * hidden)
        params["out.w"] = uniform((2 * hidden, 1))
        params["out.b"] = np.zeros(1)
        return cls(hidden, params, n_input=n_input, n_layers=n_layers)

    def copy(self) -> "LinkerModel":
        return LinkerModel(self.hidden, {k: v.copy() for k, v in self.params.items()},
                           n_input=self.n_input, n_layers=self.n_layers)

    def save(self, path, extra: Optional[dict] = None) -> None:
        meta = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
                "hidden": self.hidden, "n_input": self.n_input,
                "n_layers": self.n_layers, "extra": extra or {}}
        arrays = {f"p:{k}": v for k, v in self.params.items()}
        np.savez(path, meta=np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "LinkerModel":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
            params = {k[2:]: z[k] for k in z.files if k.startswith("p:")}
        return cls(meta["hidden"], params, n_input=meta["n_input"],
                   n_layers=meta["n_layers"])


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _direction_forward(x, w, u, b, reverse, need_cache=False):
    """One GRU direction over (B, T, D) input; returns (B, T, H) states."""
    B, T, D = x.shape
    H = u.shape[0]
    xp = (x.reshape(B * T, D) @ w).reshape(B, T, 3 * H) + b
    u_zr = u[:, : 2 * H]
    u_c = u[:, 2 * H:]
    hs = np.zeros((B, T, H))
    cache = {"z": np.zeros((B, T, H)), "r": np.zeros((B, T, H)),
             "c": np.zeros((B, T, H))} if need_cache else None
    h = np.zeros((B, H))
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        a_zr = xp[:, t, : 2 * H] + h @ u_zr
        z = _sigmoid(a_zr[:, :H])
        r = _sigmoid(a_zr[:, H:])
        c = np.tanh(xp[:, t, 2 * H:] + (r * h) @ u_c)
        h = z * h + (1.0 - z) * c
        hs[:, t] = h
        if need_cache:
            cache["z"][:, t] = z
            cache["r"][:, t] = r
            cache["c"][:, t] = c
    return hs, cache


def _direction_backward(x, w, u, hs, cache, dh_out, reverse):
    """BPTT through one GRU direction.

    dh_out is the gradient w.r.t. every output state; returns gradients for
    the input and the direction's three parameter tensors.
    """
    B, T, D = x.shape
    H = u.shape[0]
    u_z = u[:, :H]
    u_r = u[:, H: 2 * H]
    u_c = u[:, 2 * H:]
    order = range(T) if reverse else range(T - 1, -1, -1)  # reversed processing
    zeros = np.zeros((B, H))
    dxp = np.zeros((B, T, 3 * H))
    du = np.zeros_like(u)
    dh = np.zeros((B, H))
    for t in order:
        if reverse:
            h_prev = hs[:, t + 1] if t + 1 < T else zeros
        else:
            h_prev = hs[:, t - 1] if t > 0 else zeros
        z = cache["z"][:, t]
        r = cache["r"][:, t]
        c = cache["c"][:, t]
        g = dh_out[:, t] + dh
        dz = g * (h_prev - c)
        da_z = dz * z * (1.0 - z)
        dc = g * (1.0 - z)
        da_c = dc * (1.0 - c * c)
        drh = da_c @ u_c.T
        dr = drh * h_prev
        da_r = dr * r * (1.0 - r)
        dh = g * z + drh * r + da_z @ u_z.T + da_r @ u_r.T
        dxp[:, t, :H] = da_z
        dxp[:, t, H: 2 * H] = da_r
        dxp[:, t, 2 * H:] = da_c
        du[:, :H] += h_prev.T @ da_z
        du[:, H: 2 * H] += h_prev.T @ da_r
        du[:, 2 * H:] += (r * h_prev).T @ da_c
    dw = x.reshape(B * T, D).T @ dxp.reshape(B * T, 3 * H)
    db = dxp.sum(axis=(0, 1))
    dx = (dxp.reshape(B * T, 3 * H) @ w.T).reshape(B, T, D)
    return dx, dw, du, db


def _forward(model: LinkerModel, x, need_cache=False):
    """Full pass; returns (probs, cache) with cache None unless requested."""
    if x.shape[-1] != model.n_input:
        raise ValueError(f"layer l0: expected input width {model.n_input}, "
                         f"got {x.shape[-1]}")
    layers = []
    inp = x
    for layer in range(model.n_layers):
        pf = model.params
        key_f, key_b = f"l{layer}.f", f"l{layer}.b"
        hf, cf = _direction_forward(inp, pf[f"{key_f}.w"], pf[f"{key_f}.u"],
                                    pf[f"{key_f}.b"], reverse=False,
                                    need_cache=need_cache)
        hb, cb = _direction_forward(inp, pf[f"{key_b}.w"], pf[f"{key_b}.u"],
                                    pf[f"{key_b}.b"], reverse=True,
                                    need_cache=need_cache)
        out = np.concatenate([hf, hb], axis=2)
        layers.append({"input": inp, "hf": hf, "hb": hb, "cf": cf, "cb": cb})
        inp = out
    B, T, _ = inp.shape
    logits = (inp.reshape(B * T, -1) @ model.params["out.w"]).reshape(B, T) \
        + model.params["out.b"][0]
    probs = _sigmoid(logits)
    if not need_cache:
        return probs, None
    return probs, {"layers": layers, "top": inp, "logits": logits}


def gru_forward(model: LinkerModel, features: np.ndarray) -> np.ndarray:
    """Link probabilities for one window (n_p, 5) or a batch (B, n_p, 5)."""
    features = np.asarray(features, dtype=float)
    single = features.ndim == 2
    x = features[None] if single else features
    probs, _ = _forward(model, x)
    return probs[0] if single else probs


def bce_loss(labels, probs, eps: float = 1e-7) -> float:
    """Mean binary cross-entropy with probabilities clipped to [eps, 1-eps]."""
    y = np.asarray(labels, dtype=float).reshape(-1)
    p = np.asarray(probs, dtype=float).reshape(-1)
    if y.shape != p.shape:
        raise ValueError(f"labels/probs length mismatch: {y.shape} vs {p.shape}")
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def loss_and_grads(model: LinkerModel, x, y):
    """BCE loss over a batch and its gradients for every parameter tensor."""
    probs, cache = _forward(model, x, need_cache=True)
    loss = bce_loss(y, probs)
    B, T = probs.shape
    dlogits = (probs - np.asarray(y, dtype=float)) / (B * T)

    grads: dict[str, np.ndarray] = {}
    top = cache["top"]
    grads["out.w"] = top.reshape(B * T, -1).T @ dlogits.reshape(B * T, 1)
    grads["out.b"] = np.asarray([dlogits.sum()])
    d_out = (dlogits.reshape(B * T, 1) @ model.params["out.w"].T).reshape(B, T, -1)

    for layer in range(model.n_layers - 1, -1, -1):
        lc = cache["layers"][layer]
        H = model.hidden
        key_f, key_b = f"l{layer}.f", f"l{layer}.b"
        dx_f, dw_f, du_f, db_f = _direction_backward(
            lc["input"], model.params[f"{key_f}.w"], model.params[f"{key_f}.u"],
            lc["hf"], lc["cf"], d_out[:, :, :H], reverse=False)
        dx_b, dw_b, du_b, db_b = _direction_backward(
            lc["input"], model.params[f"{key_b}.w"], model.params[f"{key_b}.u"],
            lc["hb"], lc["cb"], d_out[:, :, H:], reverse=True)
        grads[f"{key_f}.w"] = dw_f
        grads[f"{key_f}.u"] = du_f
        grads[f"{key_f}.b"] = db_f
        grads[f"{key_b}.w"] = dw_b
        grads[f"{key_b}.u"] = du_b
        grads[f"{key_b}.b"] = db_b
        d_out = dx_f + dx_b
    return loss, grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    """Desk-scale defaults; the full-scale recipe (H=200, n_p=500, batch 96)
    remains expressible through the same fields."""

    batch_size: int = 96
    learning_rate: float = 2e-3
    lr_decay: float = 1.0  # per-epoch multiplier on the learning rate
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 12
    hidden: int = 32
    n_p: int = 50
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        for b in (self.beta1, self.beta2):
            if not 0.0 <= b < 1.0:
                raise ValueError("Adam betas must lie in [0, 1)")


class Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correct1 = 1.0 - self.b1 ** self.t
        correct2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            m_hat = self.m[k] / correct1
            v_hat = self.v[k] / correct2
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float          # real (non-pad) rows only
    val_accuracy_unmasked: float


@dataclass
class TrainResult:
    model: LinkerModel
    history: list[EpochStats]
    best_epoch: int
    diverged: bool = False


def _eval_split(model, x, y, n_real, batch_size):
    losses = []
    correct_m = total_m = correct_u = total_u = 0
    for lo in range(0, len(x), batch_size):
        xb = x[lo: lo + batch_size]
        yb = y[lo: lo + batch_size]
        probs, _ = _forward(model, xb)
        losses.append(bce_loss(yb, probs) * len(xb))
        pred = probs >= 0.5
        hit = pred == (yb > 0.5)
        correct_u += int(hit.sum())
        total_u += hit.size
        for i, n in enumerate(n_real[lo: lo + batch_size]):
            correct_m += int(hit[i, :n].sum())
            total_m += int(n)
    loss = float(np.sum(losses) / max(len(x), 1))
    acc_m = correct_m / max(total_m, 1)
    acc_u = correct_u / max(total_u, 1)
    return loss, acc_m, acc_u


def train(dataset, cfg: TrainConfig, log_path=None,
          checkpoint_path=None) -> TrainResult:
    """Adam + BPTT over a dataset produced by ``synth.generate_dataset``.

    Uses the dataset's 75/25 split markers; the best-validation-loss
    parameters are kept (and written to ``checkpoint_path`` when given).
    A non-finite loss aborts training and returns the last finite best
    checkpoint with ``diverged=True``.
    """
    from .synth import Dataset, load_dataset
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    if dataset.features.shape[1] != cfg.n_p:
        raise ValueError(f"dataset windows have n_p={dataset.features.shape[1]}, "
                         f"config expects {cfg.n_p}")
    keep = ~dataset.empty
    is_val = dataset.is_val & keep
    is_train = ~dataset.is_val & keep
    x_train = dataset.features[is_train].astype(float)
    y_train = dataset.labels[is_train].astype(float)
    x_val = dataset.features[is_val].astype(float)
    y_val = dataset.labels[is_val].astype(float)
    n_real_val = dataset.n_real[is_val]
    if len(x_train) == 0:
        raise ValueError("dataset has no non-empty training samples")

    model = LinkerModel.init(cfg.hidden, seed=cfg.seed)
    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    shuffle_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([cfg.seed, 7_311])))

    history: list[EpochStats] = []
    best = model.copy()
    best_loss = np.inf
    best_epoch = 0
    diverged = False
    log_fh = open(log_path, "w", buffering=1) if log_path is not None else None
    if log_fh:
        log_fh.write("epoch,train_loss,val_loss,val_accuracy,val_accuracy_unmasked\n")
    for epoch in range(1, cfg.epochs + 1):
        opt.lr = cfg.learning_rate * cfg.lr_decay ** (epoch - 1)
        perm = shuffle_rng.permutation(len(x_train))
        total = 0.0
        for lo in range(0, len(perm), cfg.batch_size):
            sel = perm[lo: lo + cfg.batch_size]
            loss, grads = loss_and_grads(model, x_train[sel], y_train[sel])
            if not np.isfinite(loss):
                diverged = True
                break
            opt.step(model.params, grads)
            total += loss * len(sel)
        if diverged:
            break
        train_loss = total / len(perm)
        if len(x_val):
            val_loss, acc_m, acc_u = _eval_split(model, x_val, y_val, n_real_val,
                                                 cfg.batch_size)
        else:  # degenerate datasets (e.g. one sample): select on train loss
            val_loss, acc_m, acc_u = train_loss, float("nan"), float("nan")
        stats = EpochStats(epoch, train_loss, val_loss, acc_m, acc_u)
        history.append(stats)
        if log_fh:
            log_fh.write(f"{epoch},{train_loss:.6f},{val_loss:.6f},"
                         f"{acc_m:.6f},{acc_u:.6f}\n")
        if epoch % cfg.checkpoint_every == 0 and val_loss < best_loss:
            best_loss = val_loss
            best = model.copy()
            best_epoch = epoch
            if checkpoint_path is not None:
                best.save(checkpoint_path, extra={"config": asdict(cfg),
                                                  "epoch": epoch,
                                                  "val_loss": val_loss})
    if log_fh:
        log_fh.close()
    return TrainResult(model=best, history=history, best_epoch=best_epoch,
                       diverged=diverged)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass
class Prediction:
    """Per-row link probabilities and thresholded labels (pads forced to 0)."""

    probs: np.ndarray
    labels: np.ndarray

    def linked_rows(self) -> np.ndarray:
        return np.nonzero(self.labels)[0]


def predict(model: LinkerModel, subseq: SubSequence,
            threshold: float = 0.5) -> Prediction:
    probs = gru_forward(model, subseq.features)
    labels = (probs >= threshold).astype(np.uint8)
    labels[subseq.n_real:] = 0
    return Prediction(probs=probs, labels=labels)


def predict_batch(model: LinkerModel, features: np.ndarray, n_real: np.ndarray,
                  threshold: float = 0.5) -> list[Prediction]:
    probs = gru_forward(model, np.asarray(features, dtype=float))
    out = []
    for i in range(len(probs)):
        labels = (probs[i] >= threshold).astype(np.uint8)
        labels[int(n_real[i]):] = 0
        out.append(Prediction(probs=probs[i], labels=labels))
    return out


def oracle_link(truth: Union[GroundTruth, np.ndarray],
                subseq: SubSequence, n_picks: Optional[int] = None) -> Prediction:
    """Ground-truth labels for a window: the root's event members get 1.

    ``truth`` may be a GroundTruth or a precomputed pick->event-id array
    (-1 for false picks).  Mirrors the training label rule, so it isolates
    the aggregation and evaluation stages from model quality.
    """
    if isinstance(truth, GroundTruth):
        size = n_picks if n_picks is not None else int(subseq.member_indices.max()) + 1
        ids = truth.pick_event_ids(size)
    else:
        ids = np.asarray(truth)
    n_p = len(subseq.features)
    labels = np.zeros(n_p, dtype=np.uint8)
    root_event = ids[subseq.root_index]
    if root_event >= 0:
        member_events = ids[subseq.member_indices]
        labels[: subseq.n_real] = (member_events == root_event).astype(np.uint8)
    else:
        labels[0] = 1
    return Prediction(probs=labels.astype(float), labels=labels)
