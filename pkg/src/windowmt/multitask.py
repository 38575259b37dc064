"""Parameter-sharing registry and the alternating multi-task trainer.

Every translational task targets one pivot language and therefore shares
the pivot's decoder group (LSTM + output projection + target embedding);
a language's monolingual autoencoder shares its encoder group (LSTM +
source embedding) with that language's translational task.  Tasks take
turns: a fixed number of updates each, round-robin, single-threaded.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (BundleError, LstmCellParams, Seq2SeqConfig, Seq2SeqParams,
                    read_tensor_dir, train_step, write_tensor_dir)
from .text import CharVocab, ParallelCorpus

TRANSLATIONAL = "translational"
AUTOENCODER = "autoencoder"


@dataclass
class TaskSpec:
    kind: str
    src: str
    tgt: str
    corpus: ParallelCorpus | None = None

    def __post_init__(self):
        if self.kind not in (TRANSLATIONAL, AUTOENCODER):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == AUTOENCODER and self.src != self.tgt:
            raise ValueError("autoencoder tasks must map a language to itself")

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.src}->{self.tgt}"


def build_tasks(languages, pivot: str, corpora: dict | None = None) -> list[TaskSpec]:
    """One translational task L->pivot per non-pivot L, plus one autoencoder per L.

    ``corpora`` optionally maps (src, tgt) to a ParallelCorpus.
    """
    languages = list(languages)
    if pivot not in languages:
        raise ValueError(f"pivot {pivot!r} not among languages {languages}")
    tasks = [TaskSpec(TRANSLATIONAL, lang, pivot) for lang in languages if lang != pivot]
    tasks += [TaskSpec(AUTOENCODER, lang, lang) for lang in languages]
    if corpora:
        for t in tasks:
            t.corpus = corpora.get((t.src, t.tgt))
    return tasks


@dataclass
class DecoderGroup:
    lstm: LstmCellParams
    proj_w: np.ndarray
    proj_b: np.ndarray


class ParamRegistry:
    """One storage per (role, language); task views alias, never copy."""

    def __init__(self, config: Seq2SeqConfig, seed: int = 0, dtype=np.float32,
                 scale: float = 0.08):
        self.config = config
        self.seed = seed
        self.dtype = dtype
        self.scale = scale
        self._enc: dict[str, LstmCellParams] = {}
        self._dec: dict[str, DecoderGroup] = {}
        self._emb: dict[tuple[str, str], np.ndarray] = {}

    def _rng(self, tag: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(tag.encode("utf-8"))])

    def init_language(self, lang: str) -> None:
        cfg = self.config
        if lang not in self._enc:
            rng = self._rng(f"enc:{lang}")
            self._enc[lang] = LstmCellParams.init(cfg.embed_dim, cfg.hidden_dim, rng,
                                                  self.scale, dtype=self.dtype)
        if lang not in self._dec:
            rng = self._rng(f"dec:{lang}")
            self._dec[lang] = DecoderGroup(
                LstmCellParams.init(cfg.embed_dim, cfg.hidden_dim, rng, self.scale,
                                    dtype=self.dtype),
                rng.uniform(-self.scale, self.scale,
                            size=(cfg.hidden_dim, cfg.vocab_size)).astype(self.dtype),
                np.zeros(cfg.vocab_size, dtype=self.dtype),
            )
        for side in ("src", "tgt"):
            key = (side, lang)
            if key not in self._emb:
                rng = self._rng(f"emb:{side}:{lang}")
                self._emb[key] = rng.uniform(
                    -self.scale, self.scale,
                    size=(cfg.vocab_size, cfg.embed_dim)).astype(self.dtype)

    def languages(self) -> list[str]:
        return sorted(self._enc)

    def encoder(self, lang: str) -> LstmCellParams:
        if lang not in self._enc:
            raise KeyError(f"encoder group for language {lang!r} is not initialized")
        return self._enc[lang]

    def decoder(self, lang: str) -> DecoderGroup:
        if lang not in self._dec:
            raise KeyError(f"decoder group for language {lang!r} is not initialized")
        return self._dec[lang]

    def embedding(self, side: str, lang: str) -> np.ndarray:
        if (side, lang) not in self._emb:
            raise KeyError(f"embedding group ({side!r}, {lang!r}) is not initialized")
        return self._emb[(side, lang)]

    def tensors(self) -> dict:
        out = {}
        for lang, enc in self._enc.items():
            out[f"enc.{lang}.W"] = enc.W
            out[f"enc.{lang}.b"] = enc.b
        for lang, dec in self._dec.items():
            out[f"dec.{lang}.W"] = dec.lstm.W
            out[f"dec.{lang}.b"] = dec.lstm.b
            out[f"dec.{lang}.proj.W"] = dec.proj_w
            out[f"dec.{lang}.proj.b"] = dec.proj_b
        for (side, lang), emb in self._emb.items():
            out[f"emb.{side}.{lang}"] = emb
        return out


def assemble_model(registry: ParamRegistry, task: TaskSpec) -> Seq2SeqParams:
    """A Seq2SeqParams view over shared registry storage (aliases, not copies)."""
    dec = registry.decoder(task.tgt)
    return Seq2SeqParams(
        embed_src=registry.embedding("src", task.src),
        embed_tgt=registry.embedding("tgt", task.tgt),
        encoder=registry.encoder(task.src),
        decoder=dec.lstm,
        proj_w=dec.proj_w,
        proj_b=dec.proj_b,
    )


@dataclass
class Schedule:
    tasks: list[TaskSpec]
    updates_per_turn: int
    total_updates: int

    def __post_init__(self):
        if self.updates_per_turn < 1:
            raise ValueError("updates_per_turn must be at least 1")
        if self.total_updates < 1:
            raise ValueError("total_updates must be at least 1")
        if not self.tasks:
            raise ValueError("schedule needs at least one task")

    def turns(self) -> list[tuple[int, int]]:
        """Round-robin expansion as (task index, updates in turn)."""
        out = []
        done = 0
        turn = 0
        while done < self.total_updates:
            n = min(self.updates_per_turn, self.total_updates - done)
            out.append((turn % len(self.tasks), n))
            done += n
            turn += 1
        return out


@dataclass
class TrainReport:
    schedule: list[tuple[str, int]] = field(default_factory=list)
    losses: dict = field(default_factory=dict)

    def final_losses(self) -> dict:
        return {k: v[-1] for k, v in self.losses.items() if v}


def alternating_train(registry: ParamRegistry, tasks, vocab: CharVocab,
                      updates_per_turn: int, total_updates: int, lr: float = 0.5,
                      seed: int = 0, batch_size: int | None = None,
                      clip: float = 5.0, momentum: float = 0.9,
                      on_turn=None) -> TrainReport:
    """Round-robin training: each turn runs updates_per_turn steps on one task.

    Batch sampling is deterministic in ``seed``.  Momentum velocity buffers
    are kept per task, so a turn only ever touches the parameter groups its
    own task references.  ``on_turn(turn_index, task)`` fires after each turn.
    """
    tasks = list(tasks)
    sched = Schedule(tasks, updates_per_turn, total_updates)
    for task in tasks:
        if task.corpus is None or len(task.corpus) == 0:
            raise ValueError(f"task {task.label} has no corpus")
        registry.init_language(task.src)
        registry.init_language(task.tgt)
    batch_size = batch_size or registry.config.batch_size
    encoded = [
        [(vocab.encode(s), vocab.encode(t)) for s, t in task.corpus.pairs]
        for task in tasks
    ]
    rng = np.random.default_rng(seed)
    report = TrainReport(losses={t.label: [] for t in tasks})
    velocities = [dict() for _ in tasks]
    for turn_index, (ti, n) in enumerate(sched.turns()):
        task = tasks[ti]
        params = assemble_model(registry, task)
        pairs = encoded[ti]
        for _ in range(n):
            idx = rng.integers(0, len(pairs), size=batch_size)
            batch = [pairs[j] for j in idx]
            loss, _ = train_step(params, registry.config, batch, lr, clip,
                                 momentum=momentum, velocity=velocities[ti])
            report.losses[task.label].append(loss)
        report.schedule.append((task.label, n))
        if on_turn is not None:
            on_turn(turn_index, task)
    return report


# --- task manifest and registry serialization ------------------------------

def save_task_manifest(tasks, corpus_paths, path) -> None:
    """Lines of kind<TAB>src<TAB>tgt<TAB>corpus-path."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for task, corpus_path in zip(tasks, corpus_paths):
            fh.write(f"{task.kind}\t{task.src}\t{task.tgt}\t{corpus_path}\n")


def load_task_manifest(path) -> list[tuple[str, str, str, str]]:
    path = Path(path)
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"malformed manifest line: {line!r}")
        rows.append(tuple(fields))
    return rows


def save_registry(registry: ParamRegistry, vocab: CharVocab, path,
                  extra_meta: dict | None = None) -> None:
    meta = {"kind": "registry", "config": registry.config.to_dict(),
            "languages": registry.languages(), "seed": registry.seed}
    if extra_meta:
        meta.update(extra_meta)
    write_tensor_dir(path, registry.tensors(), meta)
    vocab.save(Path(path) / "vocab.txt")


def load_registry(path):
    tensors, meta = read_tensor_dir(path)
    if meta.get("kind") != "registry":
        raise BundleError(f"expected a registry bundle, found kind {meta.get('kind')!r}")
    config = Seq2SeqConfig.from_dict(meta["config"])
    registry = ParamRegistry(config, seed=meta.get("seed", 0))
    for lang in meta["languages"]:
        registry._enc[lang] = LstmCellParams(tensors[f"enc.{lang}.W"],
                                             tensors[f"enc.{lang}.b"])
        registry._dec[lang] = DecoderGroup(
            LstmCellParams(tensors[f"dec.{lang}.W"], tensors[f"dec.{lang}.b"]),
            tensors[f"dec.{lang}.proj.W"], tensors[f"dec.{lang}.proj.b"])
        registry._emb[("src", lang)] = tensors[f"emb.src.{lang}"]
        registry._emb[("tgt", lang)] = tensors[f"emb.tgt.{lang}"]
    vocab = CharVocab.load(Path(path) / "vocab.txt")
    return registry, config, vocab
