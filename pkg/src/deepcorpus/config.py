"""Pipeline configuration: a single JSON file, validated field by field."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .linker import POLICIES
from .noise import NoiseParams
from .sampler import MODES, OBJECTIVES

PATH_FIELDS = ("kb", "vocab", "mono", "train", "test", "references", "hypotheses", "baseline", "truth", "out_dir")


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass
class PipelineConfig:
    seed: int
    src_lang: str
    tgt_lang: str
    paths: dict[str, Path]
    noise: NoiseParams
    mode: str = "multitask"
    objective: str = "DEEP"
    epochs: int = 1
    policy: str = "exact"
    bin_edges: tuple[int, ...] = (0, 1, 4, 16, 64)
    workers: int = 1
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = Path(".")

    def path(self, name: str) -> Path:
        return self.paths[name]

    def display(self, path: str | os.PathLike) -> str:
        """``path`` relative to the config file, so artifacts do not embed the checkout location."""
        return Path(os.path.relpath(path, self.base_dir)).as_posix()

    @property
    def out_dir(self) -> Path:
        return self.paths.get("out_dir", Path("out"))


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(config: dict, required_paths: Iterable[str] = (), base_dir: str | os.PathLike = ".") -> list[str]:
    """Return one diagnostic per violated constraint; empty means runnable."""
    diags: list[str] = []
    if not isinstance(config, dict):
        return ["config: must be a JSON object"]
    seed = config.get("seed")
    if seed is None:
        diags.append("seed: required (no implicit default)")
    elif not _is_int(seed) or seed < 0:
        diags.append("seed: must be a non-negative integer")

    langs = config.get("languages", {})
    for k in ("src", "tgt"):
        if not isinstance(langs.get(k), str) or not langs.get(k):
            diags.append(f"languages.{k}: must be a non-empty language code")

    noise = config.get("noise", {})
    mr = noise.get("mask_ratio", 0.35)
    if not _is_num(mr) or not 0 < mr <= 1:
        diags.append("noise.mask_ratio: mask_ratio must be in (0,1]")
    lam = noise.get("lam", 3.5)
    if not _is_num(lam) or lam <= 0:
        diags.append("noise.lam: lambda must be > 0")
    pp = noise.get("permute_prob", 1.0)
    if not _is_num(pp) or not 0 <= pp <= 1:
        diags.append("noise.permute_prob: must be in [0,1]")
    sl = noise.get("span_length")
    if sl is not None and (not _is_int(sl) or sl < 1):
        diags.append("noise.span_length: must be a positive integer or null")
    if noise.get("budget_unit", "words") not in ("words", "subwords"):
        diags.append("noise.budget_unit: must be 'words' or 'subwords'")

    sampler = config.get("sampler", {})
    if sampler.get("mode", "multitask") not in MODES:
        diags.append(f"sampler.mode: must be one of {list(MODES)}")
    if str(sampler.get("objective", "DEEP")).upper() not in OBJECTIVES:
        diags.append(f"sampler.objective: must be one of {list(OBJECTIVES)}")
    ep = sampler.get("epochs", 1)
    if not _is_int(ep) or ep < 1:
        diags.append("sampler.epochs: must be a positive integer")

    if config.get("linker", {}).get("policy", "exact") not in POLICIES:
        diags.append(f"linker.policy: must be one of {list(POLICIES)}")

    edges = config.get("eval", {}).get("bin_edges", [0, 1, 4, 16, 64])
    if (
        not isinstance(edges, list)
        or len(edges) < 2
        or not all(_is_int(e) for e in edges)
        or edges[:2] != [0, 1]
        or any(b <= a for a, b in zip(edges, edges[1:]))
    ):
        diags.append("eval.bin_edges: must be strictly increasing integers starting 0, 1")

    w = config.get("workers", 1)
    if not _is_int(w) or w < 1:
        diags.append("workers: must be a positive integer")

    paths = config.get("paths", {})
    if not isinstance(paths, dict):
        diags.append("paths: must be an object")
        paths = {}
    for name in paths:
        if name not in PATH_FIELDS:
            diags.append(f"paths.{name}: unknown path field")
    for name in required_paths:
        p = paths.get(name)
        if not p:
            diags.append(f"paths.{name}: required but missing")
        elif name != "out_dir" and not (Path(base_dir) / p).exists():
            diags.append(f"paths.{name}: file not found: {p}")
    return diags


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> tuple[dict, Path]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError([f"config: file not found: {path}"]) from None
    except json.JSONDecodeError as e:
        raise ConfigError([f"config: invalid JSON ({e.msg} at line {e.lineno})"]) from None
    for dotted, value in (overrides or {}).items():
        node = raw
        *parents, leaf = dotted.split(".")
        for k in parents:
            node = node.setdefault(k, {})
        node[leaf] = value
    return raw, path.parent


def resolve(raw: dict, base_dir: Path, required_paths: Iterable[str] = ()) -> PipelineConfig:
    diags = validate(raw, required_paths, base_dir)
    if diags:
        raise ConfigError(diags)
    noise = raw.get("noise", {})
    sampler = raw.get("sampler", {})
    return PipelineConfig(
        seed=raw["seed"],
        src_lang=raw["languages"]["src"],
        tgt_lang=raw["languages"]["tgt"],
        paths={k: base_dir / v for k, v in raw.get("paths", {}).items() if v},
        noise=NoiseParams(
            lam=float(noise.get("lam", 3.5)),
            mask_ratio=float(noise.get("mask_ratio", 0.35)),
            permute_prob=float(noise.get("permute_prob", 1.0)),
            seed=raw["seed"],
            span_length=noise.get("span_length"),
            budget_unit=noise.get("budget_unit", "words"),
        ),
        mode=sampler.get("mode", "multitask"),
        objective=str(sampler.get("objective", "DEEP")).upper(),
        epochs=sampler.get("epochs", 1),
        policy=raw.get("linker", {}).get("policy", "exact"),
        bin_edges=tuple(raw.get("eval", {}).get("bin_edges", (0, 1, 4, 16, 64))),
        workers=raw.get("workers", 1),
        raw=raw,
        base_dir=base_dir,
    )
