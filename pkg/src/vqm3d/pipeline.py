"""Experiment grid: degrade -> render -> score, plus validation against DMOS.

A configuration is a flat ``key = value`` text file (``#`` starts a
comment). Relative paths are resolved against the config file's directory.
See README.md for the full list of keys.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from vqm3d import baseline, video_io
from vqm3d.core import CameraParams, Frame, VqmConstants
from vqm3d.dibr import render_sequence
from vqm3d.distortion import (
    LOSS_POLICIES,
    BlurSpec,
    CompressSpec,
    compress_proxy,
    gaussian_blur,
    gilbert_elliot_loss,
    make_channel_for_rate,
)
from vqm3d.validation import REPORT_COLUMNS, SubjectiveRecord, ValidationDataError, load_dmos_csv, validate
from vqm3d.vqm3 import DEFAULT_THRESHOLD, INTERSECTION_MODES, score_sequence

log = logging.getLogger(__name__)

CHANNELS = ("color", "depth")
METRIC_NAMES = ("3vqm", "psnr", "wpsnr", "ssim")
MANIFEST_COLUMNS = ("job_id", "sequence", "channel", "distortion", "level", "spec", "seed", "lost_frames", "path")
RENDER_COLUMNS = ("job_id", "sequence", "channel", "distortion", "level", "spec", "path")
SCORE_COLUMNS = ("job_id", "sequence", "channel", "distortion", "level", "spec", "metric", "value")
FRAME_SCORE_COLUMNS = ("job_id", "metric", "frame", "value")


class ConfigError(ValueError):
    """Invalid configuration or distortion spec string."""


class DegenerateResult(RuntimeError):
    """A statistic is undefined for the supplied data (e.g. constant scores)."""


# ---------------------------------------------------------------------------
# distortion spec strings

@dataclass(frozen=True)
class Step:
    kind: str
    params: Tuple
    text: str


def parse_step(text: str) -> Step:
    text = text.strip()
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "blur" and len(parts) == 3:
            spec = BlurSpec(int(parts[1]), float(parts[2]))
            return Step("blur", (spec,), text)
        if kind == "qp" and len(parts) == 2:
            return Step("qp", (CompressSpec(int(parts[1])),), text)
        if kind == "loss":
            rate, burst, seed, policy = None, 1.0, None, None
            for tok in parts[1:]:
                if tok.startswith("burst"):
                    burst = float(tok[5:])
                elif tok.startswith("seed"):
                    seed = int(tok[4:])
                elif tok in LOSS_POLICIES:
                    policy = tok
                elif rate is None:
                    rate = float(tok)
                else:
                    raise ValueError(f"unexpected token {tok!r}")
            if rate is None:
                raise ValueError("missing loss rate")
            make_channel_for_rate(rate, burst)
            return Step("loss", (rate, burst, seed, policy), text)
    except ValueError as exc:
        raise ConfigError(f"bad distortion spec {text!r}: {exc}") from None
    raise ConfigError(f"bad distortion spec {text!r}; expected blur:K:SIGMA, qp:N or loss:RATE[:burstB][:seedS]")


def parse_distortion(text: str) -> List[Step]:
    """``qp:40+loss:0.05:burst5`` -> compress, then transmit."""
    steps = [parse_step(t) for t in text.split("+") if t.strip()]
    if not steps:
        raise ConfigError(f"empty distortion spec {text!r}")
    return steps


def describe(steps: Sequence[Step]) -> Tuple[str, str]:
    """(distortion kind, level) labels for CSV rows."""
    kinds = "+".join(s.kind for s in steps)
    level = "+".join(s.text.split(":", 1)[1] for s in steps)
    return kinds, level


def job_seed(base_seed: int, job_index: int) -> int:
    """Independent per-job seed from the config seed (counter-based split)."""
    return int(np.random.SeedSequence([base_seed, job_index]).generate_state(1, np.uint64)[0])


def apply_steps(seq: Sequence, steps: Sequence[Step], seed: int,
                loss_policy: str = "zero") -> Tuple[List, int]:
    """Apply a distortion chain; returns the sequence and the number of lost frames."""
    out = list(seq)
    lost = 0
    for i, step in enumerate(steps):
        if step.kind == "blur":
            out = [gaussian_blur(f, step.params[0]) for f in out]
        elif step.kind == "qp":
            out = [compress_proxy(f, step.params[0]) for f in out]
        else:
            rate, burst, explicit_seed, policy = step.params
            s = explicit_seed if explicit_seed is not None else job_seed(seed, i)
            out, mask = gilbert_elliot_loss(out, make_channel_for_rate(rate, burst, s), policy or loss_policy)
            lost += int(mask.sum())
    return out, lost


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SequenceInput:
    name: str
    reference: Path
    depth: Path
    virtual: Optional[Path] = None


@dataclass(frozen=True)
class ExperimentConfig:
    sequences: Tuple[SequenceInput, ...]
    width: int
    height: int
    pixel_format: str = "gray"
    camera: CameraParams = CameraParams()
    distortions: Tuple[str, ...] = ()
    channels: Tuple[str, ...] = CHANNELS
    metrics: Tuple[str, ...] = ("3vqm", "psnr")
    output_dir: Path = Path("results")
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    intersection_mode: str = "masked"
    loss_policy: str = "zero"
    color_mode: str = "luma"
    intensity_scale: float = 255.0
    view_weights: Tuple[float, float] = (0.5, 0.5)
    workers: int = 1
    constants: VqmConstants = VqmConstants()

    def check_inputs(self) -> None:
        missing = []
        for s in self.sequences:
            for p in (s.reference, s.depth, s.virtual):
                if p is not None and not p.exists():
                    missing.append(str(p))
        if missing:
            raise ConfigError("input file(s) not found: " + ", ".join(missing))

    @property
    def rendered_format(self) -> str:
        return "rgb" if self.pixel_format == "rgb" else "gray"


def _split_list(value: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def read_keyvalue(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_KNOWN_KEYS = {
    "sequence", "sequences", "reference", "depth", "virtual", "width", "height", "format",
    "focal_length", "baseline", "side", "alpha", "z_near", "z_far",
    "distortions", "channels", "metrics", "output_dir", "seed", "threshold",
    "intersection_mode", "loss_policy", "color_mode", "intensity_scale", "view_weights", "workers",
    "K", "a", "b", "c",
}


def config_from_mapping(kv: Dict[str, str], base_dir: Path = Path(".")) -> ExperimentConfig:
    kv = dict(kv)

    def take(key, conv=str, default=None, required=False):
        if key not in kv:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return conv(kv[key])
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {kv[key]!r}") from None

    def path(v):
        p = Path(v)
        return p if p.is_absolute() else base_dir / p

    names = _split_list(kv["sequences"]) if "sequences" in kv else (take("sequence", default="seq"),)
    seqs = []
    for name in names:
        prefix = "" if "sequences" not in kv else f"{name}."
        ref = take(prefix + "reference", required=True)
        dep = take(prefix + "depth", required=True)
        virt = take(prefix + "virtual")
        seqs.append(SequenceInput(name, path(ref), path(dep), path(virt) if virt else None))
    unknown = [k for k in kv if k not in _KNOWN_KEYS
               and not any(k == f"{n}.{f}" for n in names for f in ("reference", "depth", "virtual"))]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    try:
        cam = CameraParams(
            focal_length=take("focal_length", float, CameraParams.focal_length),
            baseline=take("baseline", float, CameraParams.baseline),
            side=take("side", int, 1),
            alpha=take("alpha", float, CameraParams.alpha),
            z_near=take("z_near", float, CameraParams.z_near),
            z_far=take("z_far", float, CameraParams.z_far),
        )
        consts = VqmConstants(take("K", float, 5.0), take("a", int, 8), take("b", int, 8), take("c", int, 6))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    distortions = _split_list(kv.get("distortions", ""))
    for d in distortions:
        parse_distortion(d)
    channels = _split_list(kv.get("channels", ",".join(CHANNELS)))
    metrics = _split_list(kv.get("metrics", "3vqm,psnr"))
    bad = [c for c in channels if c not in CHANNELS] + [m for m in metrics if m not in METRIC_NAMES]
    if bad:
        raise ConfigError(f"unknown channel/metric name(s): {', '.join(bad)}")
    if not metrics:
        raise ConfigError("metric list is empty")
    fmt = take("format", default="gray")
    if fmt not in video_io.PIXEL_FORMATS:
        raise ConfigError(f"format must be one of {video_io.PIXEL_FORMATS}")
    mode = take("intersection_mode", default="masked")
    if mode not in INTERSECTION_MODES:
        raise ConfigError(f"intersection_mode must be one of {INTERSECTION_MODES}")
    policy = take("loss_policy", default="zero")
    if policy not in LOSS_POLICIES:
        raise ConfigError(f"loss_policy must be one of {LOSS_POLICIES}")
    color_mode = take("color_mode", default="luma")
    if color_mode not in ("luma", "rgb"):
        raise ConfigError("color_mode must be luma or rgb")
    weights = tuple(float(w) for w in _split_list(kv.get("view_weights", "0.5,0.5")))
    if len(weights) != 2 or min(weights) < 0 or sum(weights) <= 0:
        raise ConfigError("view_weights must be two non-negative numbers with a positive sum")

    return ExperimentConfig(
        sequences=tuple(seqs),
        width=take("width", int, required=True),
        height=take("height", int, required=True),
        pixel_format=fmt,
        camera=cam,
        distortions=distortions,
        channels=channels,
        metrics=metrics,
        output_dir=path(take("output_dir", default="results")),
        seed=take("seed", int, 0),
        threshold=take("threshold", float, DEFAULT_THRESHOLD),
        intersection_mode=mode,
        loss_policy=policy,
        color_mode=color_mode,
        intensity_scale=take("intensity_scale", float, 255.0),
        view_weights=weights,
        workers=max(1, take("workers", int, 1)),
        constants=consts,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return config_from_mapping(read_keyvalue(path), path.parent)


# ---------------------------------------------------------------------------
# jobs

@dataclass(frozen=True)
class Job:
    index: int
    sequence: SequenceInput
    channel: str
    spec: str

    @property
    def steps(self) -> List[Step]:
        return parse_distortion(self.spec)

    @property
    def job_id(self) -> str:
        return f"{self.sequence.name}/{self.channel}/{self.spec}"

    @property
    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9.+-]+", "_", self.spec)

    def labels(self) -> Dict[str, str]:
        kind, level = describe(self.steps)
        return {"job_id": self.job_id, "sequence": self.sequence.name, "channel": self.channel,
                "distortion": kind, "level": level, "spec": self.spec}


def clean_labels(seq: SequenceInput) -> Dict[str, str]:
    return {"job_id": f"{seq.name}/clean", "sequence": seq.name, "channel": "none",
            "distortion": "none", "level": "", "spec": "none"}


def build_jobs(cfg: ExperimentConfig) -> List[Job]:
    jobs = []
    for seq in cfg.sequences:
        for channel in cfg.channels:
            for spec in cfg.distortions:
                jobs.append(Job(len(jobs), seq, channel, spec))
    return jobs


def _descriptor(cfg: ExperimentConfig, p: Path, fmt: str) -> video_io.SequenceDescriptor:
    return video_io.SequenceDescriptor.probe(p, cfg.width, cfg.height, fmt)


def load_inputs(cfg: ExperimentConfig, seq: SequenceInput):
    ref = video_io.load_video(_descriptor(cfg, seq.reference, cfg.pixel_format))
    dep = video_io.load_depth(_descriptor(cfg, seq.depth, "gray"))
    if len(ref) != len(dep):
        raise video_io.DescriptorError(
            f"{seq.name}: reference has {len(ref)} frames but depth has {len(dep)}")
    return ref, dep


def _map(cfg: ExperimentConfig, fn, items: Iterable):
    items = list(items)
    if cfg.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def degraded_path(cfg: ExperimentConfig, job: Job) -> Path:
    return cfg.output_dir / "degraded" / job.sequence.name / job.channel / f"{job.slug}.yuv"


def rendered_path(cfg: ExperimentConfig, seq_name: str, channel: str, slug: str) -> Path:
    return cfg.output_dir / "rendered" / seq_name / channel / f"{slug}.yuv"


def cmd_degrade(cfg: ExperimentConfig) -> Path:
    """Write every degraded sequence and ``degrade_manifest.csv``."""
    cfg.check_inputs()
    jobs = build_jobs(cfg)
    inputs = {s.name: load_inputs(cfg, s) for s in cfg.sequences}

    def run(job: Job):
        ref, dep = inputs[job.sequence.name]
        seed = job_seed(cfg.seed, job.index)
        src = ref if job.channel == "color" else dep
        out, lost = apply_steps(src, job.steps, seed, cfg.loss_policy)
        p = degraded_path(cfg, job)
        if job.channel == "color":
            video_io.write_video(out, p, cfg.pixel_format)
        else:
            video_io.write_depth(out, p)
        log.info("degraded %s -> %s (%d lost)", job.job_id, p, lost)
        return {**job.labels(), "seed": seed, "lost_frames": lost, "path": str(p.relative_to(cfg.output_dir))}

    rows = _map(cfg, run, jobs)
    manifest = cfg.output_dir / "degrade_manifest.csv"
    video_io.write_csv(rows, manifest, MANIFEST_COLUMNS)
    return manifest


def _read_manifest(cfg: ExperimentConfig, name: str) -> List[Dict]:
    p = cfg.output_dir / name
    if not p.exists():
        raise FileNotFoundError(f"{p} not found; run the previous pipeline stage first")
    return video_io.read_csv(p, convert=False)


def _luma_only(frames: Sequence[Frame]) -> List[Frame]:
    return [Frame(f.data) if f.chroma is not None else f for f in frames]


def cmd_render(cfg: ExperimentConfig) -> Path:
    """Synthesize the virtual view for the clean inputs and for every degraded job."""
    cfg.check_inputs()
    rows = _read_manifest(cfg, "degrade_manifest.csv")
    by_name = {s.name: s for s in cfg.sequences}
    out_rows = []
    clean_cache = {}
    for seq in cfg.sequences:
        ref, dep = load_inputs(cfg, seq)
        clean_cache[seq.name] = (_luma_only(ref), dep)
        p = rendered_path(cfg, seq.name, "clean", "clean")
        video_io.write_video(render_sequence(clean_cache[seq.name][0], dep, cfg.camera), p, cfg.rendered_format)
        out_rows.append({**clean_labels(seq), "path": str(p.relative_to(cfg.output_dir))})

    def run(row):
        if row["sequence"] not in by_name:
            raise ConfigError(f"manifest sequence {row['sequence']!r} is not in the config")
        ref, dep = clean_cache[row["sequence"]]
        src = cfg.output_dir / row["path"]
        if row["channel"] == "color":
            ref = _luma_only(video_io.load_video(_descriptor(cfg, src, cfg.pixel_format)))
        else:
            dep = video_io.load_depth(_descriptor(cfg, src, "gray"))
        slug = Path(row["path"]).stem
        p = rendered_path(cfg, row["sequence"], row["channel"], slug)
        video_io.write_video(render_sequence(ref, dep, cfg.camera), p, cfg.rendered_format)
        return {k: row[k] for k in RENDER_COLUMNS if k != "path"} | {"path": str(p.relative_to(cfg.output_dir))}

    out_rows += _map(cfg, run, rows)
    manifest = cfg.output_dir / "render_manifest.csv"
    video_io.write_csv(out_rows, manifest, RENDER_COLUMNS)
    return manifest


def score_job(cfg: ExperimentConfig, ideal_view, rendered, received_depth, ref_clean, ref_received):
    """All configured metrics for one job; returns {metric: ScoreSeries}."""
    out = {}
    for m in cfg.metrics:
        if m == "3vqm":
            out[m] = score_sequence(ideal_view, rendered, received_depth, cfg.camera, cfg.constants,
                                    cfg.threshold, cfg.intersection_mode, cfg.intensity_scale)
        elif m == "psnr":
            out[m] = baseline.sequence_metric(ideal_view, rendered,
                                              lambda a, b: baseline.psnr(a, b, cfg.color_mode), "psnr")
        elif m == "ssim":
            out[m] = baseline.sequence_metric(ideal_view, rendered,
                                              lambda a, b: baseline.ssim(a, b, color_mode=cfg.color_mode), "ssim")
        elif m == "wpsnr":
            w_ref, w_virt = cfg.view_weights
            out[m] = baseline.sequence_metric(
                list(zip(ref_clean, ideal_view)), list(zip(ref_received, rendered)),
                lambda a, b: baseline.weighted_psnr([
                    (baseline.psnr(a[0], b[0], cfg.color_mode), w_ref),
                    (baseline.psnr(a[1], b[1], cfg.color_mode), w_virt)]),
                "wpsnr")
    return out


def cmd_score(cfg: ExperimentConfig) -> Path:
    """Score every rendered job against the distortion-free virtual view.

    Writes ``scores.csv`` (one row per job and metric, value = sequence
    mean) and ``scores_frames.csv`` (per-frame values).
    """
    cfg.check_inputs()
    rows = _read_manifest(cfg, "render_manifest.csv")
    seqs = {s.name: s for s in cfg.sequences}
    fmt = cfg.rendered_format
    cache = {}
    for name, seq in seqs.items():
        ref, dep = load_inputs(cfg, seq)
        ref = _luma_only(ref)
        if seq.virtual is not None:
            ideal = _luma_only(video_io.load_video(_descriptor(cfg, seq.virtual, cfg.pixel_format)))
        else:
            ideal = video_io.load_video(_descriptor(cfg, cfg.output_dir / "rendered" / name / "clean" / "clean.yuv", fmt))
        cache[name] = (ref, dep, ideal)

    deg_rows = {}
    if any(r["channel"] != "none" for r in rows):
        deg_rows = {r["job_id"]: r for r in _read_manifest(cfg, "degrade_manifest.csv")}

    def run(row):
        ref, dep, ideal = cache[row["sequence"]]
        rendered = video_io.load_video(_descriptor(cfg, cfg.output_dir / row["path"], fmt))
        ref_rx, dep_rx = ref, dep
        if row["channel"] != "none":
            src = cfg.output_dir / deg_rows[row["job_id"]]["path"]
            if row["channel"] == "color":
                ref_rx = _luma_only(video_io.load_video(_descriptor(cfg, src, cfg.pixel_format)))
            else:
                dep_rx = video_io.load_depth(_descriptor(cfg, src, "gray"))
        return row, score_job(cfg, ideal, rendered, dep_rx, ref, ref_rx)

    summary, frames = [], []
    for row, series in _map(cfg, run, rows):
        labels = {k: row[k] for k in SCORE_COLUMNS if k not in ("metric", "value")}
        for metric, s in series.items():
            summary.append({**labels, "metric": metric, "value": s.aggregate})
            frames.extend({"job_id": row["job_id"], "metric": metric, "frame": i, "value": v}
                          for i, v in enumerate(s.per_frame))
    out = cfg.output_dir / "scores.csv"
    video_io.write_csv(summary, out, SCORE_COLUMNS)
    video_io.write_csv(frames, cfg.output_dir / "scores_frames.csv", FRAME_SCORE_COLUMNS)
    return out


def cmd_run(cfg: ExperimentConfig) -> Path:
    cmd_degrade(cfg)
    cmd_render(cfg)
    return cmd_score(cfg)


# ---------------------------------------------------------------------------
# validation and reporting

def load_objective_scores(path) -> Dict[str, Dict[str, float]]:
    """Scores keyed by sequence id.

    Accepts the long format written by :func:`cmd_score` (keyed by
    ``job_id``) or a wide table with a ``sequence_id`` column and one
    column per metric.
    """
    rows = video_io.read_csv(path, convert=False)
    out: Dict[str, Dict[str, float]] = {}
    if not rows:
        return out
    cols = set(rows[0])
    try:
        if {"job_id", "metric", "value"} <= cols:
            for r in rows:
                out.setdefault(r["job_id"], {})[r["metric"]] = float(r["value"])
        elif "sequence_id" in cols:
            for r in rows:
                out[r["sequence_id"]] = {k: float(v) for k, v in r.items() if k != "sequence_id" and v != ""}
        else:
            raise ValidationDataError(f"{path}: need job_id/metric/value or sequence_id columns")
    except ValueError as exc:
        if isinstance(exc, ValidationDataError):
            raise
        raise ValidationDataError(f"{path}: non-numeric score ({exc})") from None
    return out


def cmd_validate(dmos_csv, scores_csv=None, out_csv=None, metrics: Optional[Sequence[str]] = None,
                 use_logistic_mapping: bool = False):
    """One ValidationReport row per metric, in Table-1 column order.

    Raises :class:`DegenerateResult` after writing the report when any
    correlation is undefined.
    """
    records = load_dmos_csv(dmos_csv)
    if scores_csv is not None:
        scores = load_objective_scores(scores_csv)
        missing = [r.sequence_id for r in records if r.sequence_id not in scores]
        if missing:
            raise ValidationDataError(f"no objective scores for sequence id(s): {', '.join(missing)}")
        records = [SubjectiveRecord(r.sequence_id, r.dmos, {**r.objective_scores, **scores[r.sequence_id]})
                   for r in records]
    if metrics is None:
        seen: List[str] = []
        for r in records:
            seen.extend(m for m in r.objective_scores if m not in seen)
        metrics = seen
    if not metrics:
        raise ValidationDataError("no objective metric columns to validate")
    reports = [validate(records, m, use_logistic_mapping) for m in metrics]
    if out_csv is not None:
        video_io.write_csv([r.as_row() for r in reports], out_csv, REPORT_COLUMNS)
    bad = [r.metric for r in reports if r.degenerate]
    if bad:
        raise DegenerateResult(f"undefined correlation for: {', '.join(bad)} ({'; '.join(r.note for r in reports if r.degenerate)})")
    return reports


def cmd_report(scores_csv, metric: str, out_csv=None) -> List[Dict]:
    """Pivot ``scores.csv`` into one row per (channel, distortion, level), one column per sequence."""
    rows = [r for r in video_io.read_csv(scores_csv, convert=False) if r["metric"] == metric]
    if not rows:
        raise ValidationDataError(f"no rows for metric {metric!r} in {scores_csv}")
    sequences = list(dict.fromkeys(r["sequence"] for r in rows))
    table: Dict[Tuple[str, str, str], Dict] = {}
    for r in rows:
        key = (r["channel"], r["distortion"], r["level"])
        entry = table.setdefault(key, {"channel": key[0], "distortion": key[1], "level": key[2],
                                       **{s: "" for s in sequences}})
        entry[r["sequence"]] = float(r["value"])
    out = list(table.values())
    if out_csv is not None:
        video_io.write_csv(out, out_csv, ["channel", "distortion", "level", *sequences])
    return out
