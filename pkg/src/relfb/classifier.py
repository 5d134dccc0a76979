"""Joint model (front-end + relevance + CNN backend) and its training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import frontend as fe
from . import ndcore as nd
from .augment import AugmentPlan, center_crop_start, crop_time, masked_fill, mix_batch, sample_crop_starts, sample_specaug_mask
from .ndcore import ContractError, Tensor
from .relevance import RelevanceNet, SplitScheme

log = logging.getLogger(__name__)

FRONTEND_KINDS = ("cosgauss", "mel", "sinc")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    channels: tuple[int, ...] = (16, 32)
    dense: int = 32
    n_classes: int = 6

    def __post_init__(self):
        if len(self.channels) < 1:
            raise ContractError("backend needs at least one conv block")
        if self.n_classes < 2:
            raise ContractError("need at least two classes")


def pooled_height(cfg: BackendConfig, H: int) -> int:
    for _ in cfg.channels:
        H = (H - 2) // 2
    return H


def count_backend_params(cfg: BackendConfig, F: int, in_channels: int = 3) -> int:
    total, c_in = 0, in_channels
    for c in cfg.channels:
        total += c * c_in * 9 + c
        c_in = c
    c_in *= pooled_height(cfg, F)
    if cfg.dense:
        total += c_in * cfg.dense + cfg.dense
        c_in = cfg.dense
    return total + c_in * cfg.n_classes + cfg.n_classes


class Backend:
    """conv3x3(valid) -> ReLU -> maxpool2x2 per block, average over time, dense.

    Pooling runs over time only; the surviving frequency rows are
    flattened into the dense layer so band position stays visible.
    """

    def __init__(self, cfg: BackendConfig, F: int, in_channels: int = 3, rng=None):
        rng = np.random.default_rng(rng)
        self.cfg, self.F = cfg, F
        self.params: dict[str, Tensor] = {}
        if pooled_height(cfg, F) < 1:
            raise ContractError(f"{F} bands too few for {len(cfg.channels)} conv/pool blocks")
        c_in = in_channels
        for i, c in enumerate(cfg.channels):
            self._add(f"backend.conv{i}.w", rng.normal(0, np.sqrt(2.0 / (9 * c_in)), (c, c_in, 3, 3)))
            self._add(f"backend.conv{i}.b", np.zeros(c))
            c_in = c
        c_in *= pooled_height(cfg, F)
        if cfg.dense:
            self._add("backend.dense.w", rng.normal(0, np.sqrt(2.0 / c_in), (c_in, cfg.dense)))
            self._add("backend.dense.b", np.zeros(cfg.dense))
            c_in = cfg.dense
        self._add("backend.out.w", rng.normal(0, np.sqrt(1.0 / c_in), (c_in, cfg.n_classes)))
        self._add("backend.out.b", np.zeros(cfg.n_classes))

    def _add(self, name, value):
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def n_params(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def check_input(self, H: int, W: int) -> None:
        if H != self.F:
            raise ContractError(f"backend built for {self.F} bands, got {H}")
        for c in self.cfg.channels:
            H, W = (H - 2) // 2, (W - 2) // 2
            if H < 1 or W < 1:
                raise ContractError(
                    f"representation too small for {len(self.cfg.channels)} conv/pool blocks")

    def forward(self, x: Tensor) -> Tensor:
        self.check_input(*x.shape[-2:])
        p = self.params
        for i in range(len(self.cfg.channels)):
            x = nd.conv2d_valid(x, p[f"backend.conv{i}.w"])
            x = nd.maxpool2d(nd.relu(nd.add_bias(x, p[f"backend.conv{i}.b"], axis=1)), 2)
        B, C, H = x.shape[:3]
        x = nd.reshape(nd.mean(x, axis=3), (B, C * H))
        if self.cfg.dense:
            x = nd.relu(nd.add_bias(nd.matmul(x, p["backend.dense.w"]), p["backend.dense.b"]))
        return nd.add_bias(nd.matmul(x, p["backend.out.w"]), p["backend.out.b"])


def backend_forward(stack, backend: Backend) -> np.ndarray:
    """Logits for a (B, 3, F, T) or single (3, F, T) stack."""
    x = np.asarray(stack, dtype=np.float64)
    single = x.ndim == 3
    out = backend.forward(Tensor(x[None] if single else x)).data
    return out[0] if single else out


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "cosgauss"
    F: int = 80
    k: int = 129
    S: int = 400
    hop: int = 160
    sample_rate: int = 16000
    f_min: float = 30.0
    eps: float = fe.LOG_EPS
    learn_sinc: bool = False
    heads: int = 2
    split: str = "equal"
    context_c: int = 10
    hidden: int = 50
    arch: str = "fc"
    skip_add: bool = True
    delta_window: int = 2
    backend: BackendConfig = BackendConfig()

    def __post_init__(self):
        if self.kind not in FRONTEND_KINDS:
            raise ContractError(f"unknown front-end kind {self.kind!r}")
        if self.k > self.S and self.kind != "mel":
            raise ContractError(f"kernel length {self.k} exceeds window {self.S}")
        if self.heads:
            SplitScheme.parse(self.split, self.F, self.heads)
        self.frame  # validates S and hop

    @property
    def frame(self) -> fe.FrameConfig:
        return fe.FrameConfig(self.S, self.hop, self.sample_rate)


@dataclass
class AugDraw:
    """Random choices for one augmented batch."""

    masks: np.ndarray | None  # (B, F, T) bool
    starts: list[list[int]]
    crop_T: int
    partner: np.ndarray | None
    lam: float


class JointModel:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.frontend: dict[str, Tensor] = {}
        if cfg.kind == "cosgauss":
            mu = fe.init_mu_mel(cfg.F, cfg.sample_rate, cfg.f_min)
            self.frontend["frontend.mu"] = Tensor(mu, requires_grad=True, name="frontend.mu")
        elif cfg.kind == "sinc":
            lo, hi = fe.init_sinc_cutoffs(cfg.F, cfg.sample_rate, cfg.f_min)
            self.frontend["frontend.f_low"] = Tensor(lo, requires_grad=True, name="frontend.f_low")
            self.frontend["frontend.f_high"] = Tensor(hi, requires_grad=True, name="frontend.f_high")
        self.scheme = SplitScheme.parse(cfg.split, cfg.F, cfg.heads) if cfg.heads else None
        self.relevance = None
        if self.scheme is not None:
            self.relevance = RelevanceNet(self.scheme, cfg.context_c, cfg.hidden, cfg.arch, cfg.skip_add, rng)
        self.backend = Backend(cfg.backend, cfg.F, 3, rng)

    # -- parameters ---------------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        out = dict(self.frontend)
        if self.relevance is not None:
            out.update({f"relevance.{n}": t for n, t in self.relevance.parameters().items()})
        out.update(self.backend.params)
        return out

    def frontend_names(self) -> set[str]:
        names = set(self.frontend) if (self.cfg.kind == "cosgauss" or self.cfg.learn_sinc) else set()
        return names | {n for n in self.parameters() if n.startswith("relevance.")}

    def trainable(self, frozen_frontend: bool = False) -> dict[str, Tensor]:
        params = self.parameters()
        skip = set(self.frontend) if self.cfg.kind == "sinc" and not self.cfg.learn_sinc else set()
        if frozen_frontend:
            skip |= self.frontend_names()
        return {n: t for n, t in params.items() if n not in skip}

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        if missing:
            raise ContractError(f"parameter file lacks {sorted(missing)}")
        for n, t in params.items():
            if state[n].shape != t.shape:
                raise ContractError(f"parameter {n!r} has shape {state[n].shape}, model expects {t.shape}")
            t.data = np.array(state[n], dtype=np.float64)

    def clamp(self) -> None:
        if "frontend.mu" in self.frontend:
            mu = self.frontend["frontend.mu"]
            mu.data = np.clip(mu.data, fe.MU_MIN, fe.MU_MAX)
        if "frontend.f_low" in self.frontend:
            lo, hi = self.frontend["frontend.f_low"], self.frontend["frontend.f_high"]
            lo.data = np.clip(lo.data, 0.0, 0.5 - 1e-4)
            hi.data = np.clip(hi.data, lo.data + 1e-4, 0.5)

    def band_centers(self) -> np.ndarray:
        """Normalised centre frequency of each band, in model band order."""
        if self.cfg.kind == "cosgauss":
            return self.frontend["frontend.mu"].data.copy()
        if self.cfg.kind == "sinc":
            return 0.5 * (self.frontend["frontend.f_low"].data + self.frontend["frontend.f_high"].data)
        return fe.mel_centers_hz(self.cfg.F, self.cfg.sample_rate) / self.cfg.sample_rate

    # -- forward ------------------------------------------------------------

    def prepare(self, waveform) -> np.ndarray:
        """Per-clip input: (T, S) frames, or static log-mel (F, T) for the mel kind."""
        if self.cfg.kind == "mel":
            return fe.mel_spectrogram(waveform, self.cfg.frame, self.cfg.F, self.cfg.eps).values
        return np.ascontiguousarray(fe.frame_signal(waveform, self.cfg.frame).T)

    def n_frames(self, prepared: np.ndarray) -> int:
        return prepared.shape[-1] if self.cfg.kind == "mel" else prepared.shape[-2]

    def representation(self, inputs: Tensor) -> tuple[Tensor, list[Tensor]]:
        """Ordered (and relevance-weighted) (B, F, T) representation plus masks."""
        cfg = self.cfg
        if cfg.kind == "mel":
            x = inputs
        else:
            if cfg.kind == "cosgauss":
                bank = fe.cosgauss_kernels(self.frontend["frontend.mu"], cfg.k)
            else:
                bank = fe.sinc_kernels(self.frontend["frontend.f_low"], self.frontend["frontend.f_high"], cfg.k)
            x = fe.filterbank_energies(inputs, bank, cfg.eps)
            x = nd.take(x, fe.band_order(self.band_centers()), axis=1)
        masks: list[Tensor] = []
        if self.relevance is not None:
            x, masks = self.relevance.forward(x)
        return x, masks

    def crop_length(self, T: int, plan: AugmentPlan) -> int:
        return min(T, plan.crop_length(T))

    def features(self, inputs: Tensor, plan: AugmentPlan, draw: AugDraw | None = None) -> Tensor:
        x, _ = self.representation(inputs)
        stack = fe.delta_stack(x, self.cfg.delta_window)  # (B, 3, F, T)
        T = stack.shape[-1]
        crop_T = self.crop_length(T, plan)
        if draw is None:
            s = center_crop_start(T, crop_T)
            return nd.minmax_scale(crop_time(stack, [s], crop_T))
        if draw.masks is not None:
            stack = masked_fill(stack, draw.masks[:, None])
        crops = [crop_time(nd.take(stack, [b], axis=0), st, crop_T, self.scheme)
                 for b, st in enumerate(draw.starts)]
        stack = crops[0] if len(crops) == 1 else nd.concat(crops, axis=0)
        if draw.partner is not None:
            stack = mix_batch(stack, draw.partner, draw.lam)
        return nd.minmax_scale(stack)

    def logits(self, inputs, plan: AugmentPlan, draw: AugDraw | None = None) -> Tensor:
        inputs = inputs if isinstance(inputs, Tensor) else Tensor(inputs)
        return self.backend.forward(self.features(inputs, plan, draw))

    def sample_draw(self, B: int, T: int, plan: AugmentPlan, rng: np.random.Generator,
                    specaug: bool = True, mix: bool = True) -> AugDraw:
        crop_T = self.crop_length(T, plan)
        groups = self.scheme.n_heads if self.scheme is not None else 1
        masks = None
        if specaug and (plan.n_freq_masks or plan.n_time_masks):
            masks = np.stack([sample_specaug_mask(self.cfg.F, T, plan, rng, self.scheme) for _ in range(B)])
        starts = [sample_crop_starts(T, crop_T, groups, plan.aligned, rng) for _ in range(B)]
        partner, lam = None, 1.0
        if mix and plan.mixup_alpha > 0 and B > 1:
            partner = rng.permutation(B)
            lam = float(rng.beta(plan.mixup_alpha, plan.mixup_alpha))
        return AugDraw(masks, starts, crop_T, partner, lam)

    def predict(self, inputs: list[np.ndarray], plan: AugmentPlan, batch_size: int = 32) -> np.ndarray:
        preds = []
        for s in range(0, len(inputs), batch_size):
            logits = self.logits(np.stack(inputs[s : s + batch_size]), plan)
            preds.append(logits.data.argmax(axis=1))
        return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


# -- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainRun:
    epochs: int = 60
    batch_size: int = 16
    seed: int = 0
    momentum: float = 0.9
    lr_max: float = 0.1
    lr_min: float = 1e-5
    t0_epochs: float = 10.0
    t_mult: float = 2.0
    mu_lr_scale: float = 1e-4
    frozen_frontend: bool = False
    augment: bool = True
    plan: AugmentPlan = AugmentPlan()
    noise_snr_db: float | None = None


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    loss: float
    train_acc: float
    val_acc: float | None


@dataclass
class TrainResult:
    state: dict[str, np.ndarray]
    metrics: list[EpochMetrics]
    mu_trajectory: list[np.ndarray] = field(default_factory=list)


def one_hot(labels, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(labels, dtype=np.intp)]


def train_joint(model: JointModel, train_inputs: list[np.ndarray], train_labels,
                run: TrainRun, val_inputs=None, val_labels=None, waveforms=None) -> TrainResult:
    """Train every trainable parameter jointly with SGD + warm-restart cosine LR.

    ``train_inputs`` are :meth:`JointModel.prepare` outputs.  When
    ``run.noise_snr_db`` is set, ``waveforms`` must be given and inputs are
    re-prepared from noisy copies each epoch.
    """
    labels = np.asarray(train_labels, dtype=np.intp)
    n, K = len(train_inputs), model.cfg.backend.n_classes
    if n == 0:
        raise ContractError("empty training set")
    if labels.min() < 0 or labels.max() >= K:
        raise ContractError("labels out of range")
    rng = np.random.default_rng(run.seed)
    steps = math.ceil(n / run.batch_size)
    sched = nd.CosineWarmRestarts(run.lr_max, run.lr_min, max(1, int(round(run.t0_epochs * steps))), run.t_mult)
    opt = nd.SGDMomentum(run.momentum)
    params = model.trainable(run.frozen_frontend)
    lr_scale = {name: run.mu_lr_scale for name in model.frontend}
    T = model.n_frames(train_inputs[0])
    trajectory = [model.band_centers()] if model.cfg.kind != "mel" else []
    metrics, t = [], 0
    for epoch in range(1, run.epochs + 1):
        inputs = train_inputs
        if run.noise_snr_db is not None:
            from .augment import add_noise
            inputs = [model.prepare(add_noise(w, run.noise_snr_db, rng)) for w in waveforms]
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for s in range(0, n, run.batch_size):
            idx = order[s : s + run.batch_size]
            batch = np.stack([inputs[i] for i in idx])
            target = one_hot(labels[idx], K)
            draw = None
            if run.augment:
                draw = model.sample_draw(len(idx), T, run.plan, rng)
                if draw.partner is not None:
                    target = draw.lam * target + (1 - draw.lam) * target[draw.partner]
            for p in params.values():
                p.grad = None
            with nd.Tape() as tape:
                logits = model.logits(batch, run.plan, draw)
                loss = nd.softmax_cross_entropy(logits, target)
                if not np.isfinite(loss.data):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {t}")
                tape.backward(loss)
            lr = sched(t)
            grads = {name: p.grad for name, p in params.items() if p.grad is not None}
            opt.step(params, grads, lr, lr_scale)
            model.clamp()
            t += 1
            loss_sum += float(loss.data) * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        val_acc = None
        if val_inputs is not None and len(val_inputs):
            val_acc = evaluate(model, val_inputs, val_labels, run.plan).overall
        m = EpochMetrics(epoch, lr, loss_sum / n, correct / n, val_acc)
        log.info("epoch %d lr %.3g loss %.4f train %.3f val %s", epoch, lr, m.loss, m.train_acc, val_acc)
        metrics.append(m)
        if model.cfg.kind != "mel":
            trajectory.append(model.band_centers())
    return TrainResult(model.state(), metrics, trajectory)


@dataclass
class EvalResult:
    overall: float
    macro: float
    per_class: np.ndarray
    counts: np.ndarray
    predictions: np.ndarray


def accuracy_report(predictions, labels, n_classes: int) -> EvalResult:
    pred = np.asarray(predictions, dtype=np.intp)
    lab = np.asarray(labels, dtype=np.intp)
    if lab.size == 0:
        raise ContractError("cannot evaluate an empty dataset")
    counts = np.bincount(lab, minlength=n_classes)
    hits = np.bincount(lab[pred == lab], minlength=n_classes)
    per_class = np.divide(hits, counts, out=np.full(n_classes, np.nan), where=counts > 0)
    return EvalResult(float((pred == lab).mean()), float(np.nanmean(per_class)), per_class, counts, pred)


def evaluate(model: JointModel, inputs: list[np.ndarray], labels, plan: AugmentPlan | None = None) -> EvalResult:
    """Unaugmented (centre-cropped) accuracy, overall and per class."""
    if len(inputs) == 0:
        raise ContractError("cannot evaluate an empty dataset")
    plan = plan or AugmentPlan()
    return accuracy_report(model.predict(list(inputs), plan), labels, model.cfg.backend.n_classes)


def with_classes(cfg: ModelConfig, n_classes: int) -> ModelConfig:
    return replace(cfg, backend=replace(cfg.backend, n_classes=n_classes))
