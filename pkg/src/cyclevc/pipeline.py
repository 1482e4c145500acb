"""End-to-end plumbing around the trainers: speaker statistics, the
utterance conversion chain, parallel-data preparation, synthetic
two-speaker corpora, objective evaluation, and the on-disk layout for
models and loss histories.

Conversion follows the fixed stage order: split the 49-dim mel-cepstrum,
augment the lower 25 with deltas, z-score with the source speaker's stats,
map through the generator, de-z-score with the target speaker's stats,
reduce to statics (MLPG or plain slice), post-filter, merge with the
untouched higher-order columns, transform F0, copy aperiodicity.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .align import dtw_align, paired_frames
from .baselines import ParallelTrainSet
from .errors import DimensionMismatchError, FormatError, InsufficientDataError
from .features import (
    AUGMENTED_DIM,
    DEFAULT_WINDOWS,
    DeltaWindowSet,
    FeatureKind,
    FeatureSequence,
    LOW_DIM,
    LogF0Stats,
    NormStats,
    compute_deltas,
    denormalize,
    fit_logf0_stats,
    fit_norm_stats,
    merge_mcep,
    normalize,
    split_mcep,
    transform_f0,
)
from .mlpg import GaussianTrajectory, mlpg_generate, postfilter
from .net import Mlp, load_mlp, save_mlp
from .seeding import derive_rng

_MCD_CONST = 10.0 / np.log(10.0)


# ---------------------------------------------------------------------------
# Speaker statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeakerStats:
    """Normalization stats for the 75-dim augmented features plus log-F0."""

    norm: NormStats
    logf0: LogF0Stats


def augment_lower(
    mcep: FeatureSequence, windows: DeltaWindowSet = DEFAULT_WINDOWS
) -> FeatureSequence:
    """49-dim mel-cepstrum -> 75-dim lower-order static+delta features."""
    lower, _ = split_mcep(mcep)
    return compute_deltas(lower, windows)


def compute_speaker_stats(
    mcep_seqs: Iterable[FeatureSequence],
    f0_seqs: Iterable[FeatureSequence],
    windows: DeltaWindowSet = DEFAULT_WINDOWS,
) -> SpeakerStats:
    """Pool all of one speaker's utterances and fit their statistics."""
    augmented = [augment_lower(seq, windows).data for seq in mcep_seqs]
    if not augmented:
        raise InsufficientDataError("no mel-cepstrum files given")
    pooled = FeatureSequence(np.concatenate(augmented, axis=0))
    f0_data = [seq.data for seq in f0_seqs]
    if not f0_data:
        raise InsufficientDataError("no F0 files given")
    pooled_f0 = FeatureSequence(np.concatenate(f0_data, axis=0), FeatureKind.F0)
    return SpeakerStats(norm=fit_norm_stats(pooled), logf0=fit_logf0_stats(pooled_f0))


_STATS_MAGIC = "VCSTATS1"


def save_speaker_stats(path, stats: SpeakerStats) -> None:
    lines = [
        _STATS_MAGIC,
        "norm_mean " + " ".join(repr(float(v)) for v in stats.norm.mean),
        "norm_std " + " ".join(repr(float(v)) for v in stats.norm.std),
        f"logf0_mean {stats.logf0.mean!r}",
        f"logf0_std {stats.logf0.std!r}",
        f"logf0_voiced_count {stats.logf0.voiced_count}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_speaker_stats(path) -> SpeakerStats:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _STATS_MAGIC:
        raise FormatError(f"{path}: not a {_STATS_MAGIC} file")
    fields = {}
    for line in lines[1:]:
        if line.strip():
            key, _, value = line.partition(" ")
            fields[key] = value
    try:
        return SpeakerStats(
            norm=NormStats(
                mean=np.array([float(v) for v in fields["norm_mean"].split()]),
                std=np.array([float(v) for v in fields["norm_std"].split()]),
            ),
            logf0=LogF0Stats(
                mean=float(fields["logf0_mean"]),
                std=float(fields["logf0_std"]),
                voiced_count=int(fields["logf0_voiced_count"]),
            ),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed stats file") from exc


# ---------------------------------------------------------------------------
# Parallel data preparation
# ---------------------------------------------------------------------------

def prepare_parallel_frames(
    src_mceps: Sequence[FeatureSequence],
    tgt_mceps: Sequence[FeatureSequence],
    src_stats: SpeakerStats,
    tgt_stats: SpeakerStats,
    windows: DeltaWindowSet = DEFAULT_WINDOWS,
) -> ParallelTrainSet:
    """DTW-align utterance pairs and pool the warped, normalized frames.

    Deltas are computed on each utterance's natural timing first; the
    alignment itself runs on the 25-dim statics and the resulting path
    then pairs the full augmented frames.
    """
    if len(src_mceps) != len(tgt_mceps):
        raise DimensionMismatchError(
            f"parallel lists differ in length: {len(src_mceps)} vs {len(tgt_mceps)}"
        )
    if not src_mceps:
        raise InsufficientDataError("no parallel utterances given")
    xs, ys = [], []
    for src, tgt in zip(src_mceps, tgt_mceps):
        src_aug = normalize(augment_lower(src, windows), src_stats.norm)
        tgt_aug = normalize(augment_lower(tgt, windows), tgt_stats.norm)
        src_statics = FeatureSequence(src_aug.data[:, :LOW_DIM])
        tgt_statics = FeatureSequence(tgt_aug.data[:, :LOW_DIM])
        path = dtw_align(src_statics, tgt_statics)
        warped_src, warped_tgt = paired_frames(src_aug, tgt_aug, path)
        xs.append(warped_src.data)
        ys.append(warped_tgt.data)
    return ParallelTrainSet(
        x=FeatureSequence(np.concatenate(xs, axis=0), FeatureKind.AUGMENTED75),
        y=FeatureSequence(np.concatenate(ys, axis=0), FeatureKind.AUGMENTED75),
    )


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConversionResult:
    mcep: FeatureSequence
    f0: FeatureSequence
    aperiodicity: FeatureSequence
    mcd_db: float
    frames: int
    seconds: float


def convert_utterance(
    generator: Callable[[np.ndarray], np.ndarray],
    src_stats: SpeakerStats,
    tgt_stats: SpeakerStats,
    mcep: FeatureSequence,
    f0: FeatureSequence,
    aperiodicity: FeatureSequence,
    use_mlpg: bool = True,
    postfilter_beta: float = 0.0,
    windows: DeltaWindowSet = DEFAULT_WINDOWS,
    trace: Callable[[str], None] | None = None,
) -> ConversionResult:
    """Run one utterance through the conversion chain.

    generator maps a B x 75 normalized batch to a B x 75 normalized batch.
    Higher-order mel-cepstrum columns and the aperiodicity stream are
    copied through bit-exactly.
    """
    stage = trace if trace is not None else (lambda _label: None)
    started = time.monotonic()

    stage("split-mcep")
    lower, higher = split_mcep(mcep)
    stage("compute-deltas")
    aug = compute_deltas(lower, windows)
    stage("normalize-source")
    z = normalize(aug, src_stats.norm)
    stage("generator")
    mapped = generator(z.data)
    if mapped.shape != z.data.shape:
        raise DimensionMismatchError(
            f"generator returned shape {mapped.shape}, expected {z.data.shape}"
        )
    stage("denormalize-target")
    out = denormalize(FeatureSequence(mapped, FeatureKind.AUGMENTED75), tgt_stats.norm)
    if use_mlpg:
        stage("mlpg")
        traj = GaussianTrajectory(
            means=out.data, variances=tgt_stats.norm.std**2, windows=windows
        )
        statics = mlpg_generate(traj)
    else:
        stage("slice-statics")
        statics = FeatureSequence(out.data[:, :LOW_DIM], FeatureKind.MCEP_LOW25)
    stage("postfilter")
    statics = postfilter(statics, postfilter_beta)
    stage("merge-mcep")
    merged = merge_mcep(statics, higher)
    stage("transform-f0")
    out_f0 = transform_f0(f0, src_stats.logf0, tgt_stats.logf0)
    stage("copy-aperiodicity")
    out_ap = FeatureSequence(aperiodicity.data, aperiodicity.kind)

    mcd = mel_cepstral_distortion(lower, statics)
    return ConversionResult(
        mcep=merged,
        f0=out_f0,
        aperiodicity=out_ap,
        mcd_db=mcd,
        frames=mcep.frames,
        seconds=time.monotonic() - started,
    )


def mel_cepstral_distortion(
    reference: FeatureSequence, converted: FeatureSequence
) -> float:
    """Frame-averaged mel-cepstral distortion in dB, coefficient 0 excluded.

    49-dim inputs are reduced to their lower 25 first. If the frame counts
    differ, the sequences are DTW-aligned and the distortion is averaged
    over the path.
    """

    def to_lower(seq: FeatureSequence) -> FeatureSequence:
        if seq.kind is FeatureKind.MCEP49:
            return split_mcep(seq)[0]
        return seq

    ref = to_lower(reference)
    conv = to_lower(converted)
    if ref.dim != conv.dim:
        raise DimensionMismatchError(f"dims differ: {ref.dim} vs {conv.dim}")
    if ref.frames < 1 or conv.frames < 1:
        raise InsufficientDataError("cannot evaluate empty sequences")
    if ref.frames != conv.frames:
        path = dtw_align(ref, conv)
        ref, conv = paired_frames(ref, conv, path)
    diff = ref.data[:, 1:] - conv.data[:, 1:]
    per_frame = _MCD_CONST * np.sqrt(2.0 * np.sum(diff**2, axis=1))
    return float(per_frame.mean())


# ---------------------------------------------------------------------------
# Synthetic two-speaker corpora
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture over the 25-dim static space."""

    weights: np.ndarray
    means: np.ndarray   # K x 25
    stds: np.ndarray    # K x 25

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        k = weights.shape[0]
        if k < 1:
            raise ValueError("mixture needs at least one component")
        if means.shape != (k, LOW_DIM) or stds.shape != (k, LOW_DIM):
            raise DimensionMismatchError(
                f"means/stds must be {k} x {LOW_DIM}, got {means.shape}/{stds.shape}"
            )
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-6:
            raise ValueError("weights must be nonnegative and sum to 1")
        if (stds <= 0).any():
            raise ValueError("component stds must be positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def overall_mean(self) -> np.ndarray:
        return self.weights @ self.means


@dataclass(frozen=True)
class SpeakerSpec:
    name: str
    frames: int
    mixture: MixtureSpec
    logf0_mean: float
    logf0_std: float
    voiced_fraction: float = 0.85
    high_band_std: float = 0.05

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.logf0_std <= 0:
            raise ValueError("logf0_std must be > 0")
        if not 0.0 <= self.voiced_fraction <= 1.0:
            raise ValueError("voiced_fraction must lie in [0, 1]")
        if self.high_band_std < 0:
            raise ValueError("high_band_std must be >= 0")


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    speakers: tuple[SpeakerSpec, ...]
    aperiodicity_dim: int = 5

    @staticmethod
    def from_json(path) -> "SyntheticSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON") from exc
        try:
            speakers = tuple(
                SpeakerSpec(
                    name=spk["name"],
                    frames=int(spk["frames"]),
                    mixture=MixtureSpec(
                        weights=spk["mixture"]["weights"],
                        means=spk["mixture"]["means"],
                        stds=spk["mixture"]["stds"],
                    ),
                    logf0_mean=float(spk["logf0_mean"]),
                    logf0_std=float(spk["logf0_std"]),
                    voiced_fraction=float(spk.get("voiced_fraction", 0.85)),
                    high_band_std=float(spk.get("high_band_std", 0.05)),
                )
                for spk in doc["speakers"]
            )
            return SyntheticSpec(
                seed=int(doc["seed"]),
                speakers=speakers,
                aperiodicity_dim=int(doc.get("aperiodicity_dim", 5)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: malformed synthetic spec: {exc}") from exc


def generate_speaker(
    spec: SpeakerSpec, aperiodicity_dim: int, rng: np.random.Generator
) -> dict[str, FeatureSequence]:
    """Draw one pseudo-speaker's mcep/f0/aperiodicity streams."""
    t = spec.frames
    comp = rng.choice(spec.mixture.weights.shape[0], size=t, p=spec.mixture.weights)
    statics = spec.mixture.means[comp] + spec.mixture.stds[comp] * rng.standard_normal(
        (t, LOW_DIM)
    )
    higher = spec.high_band_std * rng.standard_normal((t, 49 - LOW_DIM))
    mcep = FeatureSequence(
        np.concatenate([statics, higher], axis=1), FeatureKind.MCEP49
    )
    voiced = rng.random(t) < spec.voiced_fraction
    logf0 = spec.logf0_mean + spec.logf0_std * rng.standard_normal(t)
    f0 = np.where(voiced, np.exp(logf0), 0.0).reshape(-1, 1)
    ap = rng.random((t, aperiodicity_dim))
    return {
        "mcep": mcep,
        "f0": FeatureSequence(f0, FeatureKind.F0),
        "ap": FeatureSequence(ap, FeatureKind.APERIODICITY),
    }


def generate_dataset(spec: SyntheticSpec) -> dict[str, dict[str, FeatureSequence]]:
    """Deterministically generate every speaker in the spec.

    Each speaker gets its own RNG stream derived from the root seed, so
    adding a speaker never perturbs the others.
    """
    out = {}
    for spk in spec.speakers:
        rng = derive_rng(spec.seed, f"synth.{spk.name}")
        out[spk.name] = generate_speaker(spk, spec.aperiodicity_dim, rng)
    return out


# ---------------------------------------------------------------------------
# Model bundle + loss history persistence
# ---------------------------------------------------------------------------

_MANIFEST_MAGIC = "VCMODEL1"
_MANIFEST_NAME = "manifest.txt"

#: Network roles persisted per training method.
BUNDLE_ROLES = {
    "cyclegan": ("G", "F", "D_X", "D_Y"),
    "gan-parallel": ("G", "D"),
    "mse-parallel": ("G",),
}


def save_model_bundle(model_dir, method: str, networks: dict[str, Mlp]) -> None:
    """Write one model file per network plus a manifest naming the roles."""
    roles = BUNDLE_ROLES.get(method)
    if roles is None:
        raise ValueError(f"unknown method {method!r}")
    if set(networks) != set(roles):
        raise ValueError(f"method {method} needs networks {roles}, got {tuple(networks)}")
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    lines = [_MANIFEST_MAGIC, f"method {method}"]
    for role in roles:
        filename = f"{role.lower()}.mlp"
        save_mlp(model_dir / filename, networks[role])
        lines.append(f"network {role} {filename}")
    (model_dir / _MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model_bundle(model_dir) -> tuple[str, dict[str, Mlp]]:
    model_dir = Path(model_dir)
    manifest = model_dir / _MANIFEST_NAME
    if not manifest.exists():
        raise FormatError(f"{manifest}: missing model manifest")
    lines = manifest.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _MANIFEST_MAGIC:
        raise FormatError(f"{manifest}: not a {_MANIFEST_MAGIC} manifest")
    method = None
    networks: dict[str, Mlp] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] == "method" and len(parts) == 2:
            method = parts[1]
        elif parts[0] == "network" and len(parts) == 3:
            networks[parts[1]] = load_mlp(model_dir / parts[2])
        else:
            raise FormatError(f"{manifest}: unparsable line {line!r}")
    if method is None or set(networks) != set(BUNDLE_ROLES.get(method, ())):
        raise FormatError(f"{manifest}: incomplete manifest for method {method!r}")
    return method, networks


def write_loss_csv(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    """Loss history CSV: epoch column plus full-precision loss columns."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["epoch", *header]) + "\n")
        for epoch, row in enumerate(rows, 1):
            fh.write(",".join([str(epoch), *(repr(float(v)) for v in row)]) + "\n")
