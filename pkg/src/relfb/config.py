"""Flat ``key=value`` run configuration.

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected;
every key has a default (see :data:`KEYS`).
"""

from __future__ import annotations

from pathlib import Path

from .augment import AugmentPlan
from .classifier import BackendConfig, ModelConfig, TrainRun
from .ndcore import ConfigError


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "off") else float(text)


# key -> (parser, default text, description)
KEYS: dict[str, tuple] = {
    "seed": (int, "0", "seed for initialisation, shuffling and augmentation"),
    "data.manifest": (str, "", "manifest CSV (path,label,fold)"),
    "data.test_fold": (int, "1", "fold held out for evaluation"),
    "frontend.kind": (str, "cosgauss", "cosgauss | mel | sinc"),
    "frontend.F": (int, "80", "number of filters / mel bands"),
    "frontend.k": (int, "129", "kernel length in samples (odd)"),
    "frontend.f_min": (float, "30", "lowest initial centre frequency, Hz"),
    "frontend.eps": (float, "1e-10", "log floor"),
    "frontend.learn_sinc": (_bool, "false", "train sinc cutoffs"),
    "frontend.frozen": (_bool, "false", "exclude centre frequencies and heads from training"),
    "frame.S": (int, "400", "window length in samples"),
    "frame.hop": (int, "160", "hop length in samples"),
    "frame.sample_rate": (int, "16000", "expected sample rate of the data, Hz"),
    "relevance.heads": (int, "2", "number of relevance heads (0 disables)"),
    "relevance.split": (str, "equal", "equal | 40-40 style sizes | even-odd | per-band"),
    "relevance.context_c": (int, "10", "context half-width in frames"),
    "relevance.hidden": (int, "50", "hidden units per fc head"),
    "relevance.skip_add": (_bool, "true", "add the unweighted segment back"),
    "relevance.arch": (str, "fc", "fc | conv"),
    "augment.enabled": (_bool, "true", "spectrogram augmentation during training"),
    "augment.aligned": (_bool, "true", "share mask/crop positions across heads"),
    "augment.n_freq_masks": (int, "2", "SpecAug frequency masks"),
    "augment.max_freq_width": (int, "8", "maximum frequency mask width, bands"),
    "augment.n_time_masks": (int, "2", "SpecAug time masks"),
    "augment.max_time_width": (int, "20", "maximum time mask width, frames"),
    "augment.crop_fraction": (float, "0.9", "random time crop length as a fraction of T"),
    "augment.mixup_alpha": (float, "0.2", "Beta(alpha, alpha) for mixup; 0 disables"),
    "augment.noise_snr_db": (_opt_float, "none", "waveform noise SNR in dB, or none"),
    "optimizer.momentum": (float, "0.9", "SGD momentum"),
    "optimizer.batch_size": (int, "16", "clips per step"),
    "optimizer.epochs": (int, "60", "training epochs"),
    "optimizer.mu_lr_scale": (float, "1e-4", "learning-rate multiplier for filter parameters"),
    "schedule.lr_max": (float, "0.1", "peak learning rate"),
    "schedule.lr_min": (float, "1e-5", "floor learning rate"),
    "schedule.t0_epochs": (float, "10", "first cosine cycle length, epochs"),
    "schedule.t_mult": (float, "2", "cycle growth factor"),
    "backend.channels": (_ints, "8,16", "conv block widths"),
    "backend.dense": (int, "32", "dense layer width (0 disables)"),
}

# The gradient-check configuration from the acceptance suite.
TINY_OVERRIDES = {
    "frontend.F": "8",
    "frontend.k": "65",
    "frame.S": "256",
    "frame.hop": "128",
    "relevance.heads": "2",
    "relevance.context_c": "2",
    "relevance.hidden": "5",
    "augment.max_freq_width": "2",
    "augment.max_time_width": "3",
    "backend.channels": "4",
    "backend.dense": "8",
}


class RunConfig:
    """Validated configuration values keyed by dotted name."""

    def __init__(self, overrides: dict[str, str] | None = None):
        self.text = {k: v[1] for k, v in KEYS.items()}
        self.values = {}
        for k, v in (overrides or {}).items():
            if k not in KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            self.text[k] = str(v).strip()
        for k, (parse, _, _) in KEYS.items():
            try:
                self.values[k] = parse(self.text[k])
            except ValueError as e:
                raise ConfigError(f"{k}: {e}") from None

    def __getitem__(self, key: str):
        return self.values[key]

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        return RunConfig({**self.text, **overrides})

    def model_config(self, n_classes: int) -> ModelConfig:
        v = self.values
        try:
            return ModelConfig(
                kind=v["frontend.kind"], F=v["frontend.F"], k=v["frontend.k"], S=v["frame.S"],
                hop=v["frame.hop"], sample_rate=v["frame.sample_rate"], f_min=v["frontend.f_min"],
                eps=v["frontend.eps"], learn_sinc=v["frontend.learn_sinc"], heads=v["relevance.heads"],
                split=v["relevance.split"], context_c=v["relevance.context_c"], hidden=v["relevance.hidden"],
                arch=v["relevance.arch"], skip_add=v["relevance.skip_add"],
                backend=BackendConfig(v["backend.channels"], v["backend.dense"], n_classes),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def plan(self) -> AugmentPlan:
        v = self.values
        return AugmentPlan(
            seed=v["seed"], n_freq_masks=v["augment.n_freq_masks"], max_freq_width=v["augment.max_freq_width"],
            n_time_masks=v["augment.n_time_masks"], max_time_width=v["augment.max_time_width"],
            crop_fraction=v["augment.crop_fraction"], mixup_alpha=v["augment.mixup_alpha"],
            aligned=v["augment.aligned"],
        )

    def train_run(self) -> TrainRun:
        v = self.values
        return TrainRun(
            epochs=v["optimizer.epochs"], batch_size=v["optimizer.batch_size"], seed=v["seed"],
            momentum=v["optimizer.momentum"], lr_max=v["schedule.lr_max"], lr_min=v["schedule.lr_min"],
            t0_epochs=v["schedule.t0_epochs"], t_mult=v["schedule.t_mult"],
            mu_lr_scale=v["optimizer.mu_lr_scale"], frozen_frontend=v["frontend.frozen"],
            augment=v["augment.enabled"], plan=self.plan(), noise_snr_db=v["augment.noise_snr_db"],
        )

    def dumps(self) -> str:
        lines = []
        for k, (_, _, doc) in KEYS.items():
            lines.append(f"# {doc}")
            lines.append(f"{k}={self.text[k]}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def load_config(path) -> RunConfig:
    """Read a config file; a relative ``data.manifest`` resolves against the file's folder."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    overrides = parse_config_text(text, str(path))
    manifest = overrides.get("data.manifest")
    if manifest and not Path(manifest).is_absolute():
        overrides["data.manifest"] = str((path.parent / manifest).resolve())
    return RunConfig(overrides)


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(cfg.dumps())


def tiny_config(base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    return base.with_overrides(TINY_OVERRIDES)


__all__ = ["KEYS", "RunConfig", "load_config", "save_config", "parse_config_text", "tiny_config"]
