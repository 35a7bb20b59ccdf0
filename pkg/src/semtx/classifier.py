"""Classification oracles producing per-class probability distributions.

Two kinds are supported: a deterministic built-in template-matching model
(softmax over negative scaled per-pixel MSE against one template per
class) and a client for external classifier processes speaking a
newline-delimited stdio protocol:

    startup handshake:  READY <C>
    request:            CLASSIFY <absolute-path> <D>
    success:            OK <p1> <p2> ... <pC>
    failure:            ERR <message>

Images travel by file path, written by the caller as P5/P6.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, OracleError
from .imaging import Image, load_raster, save_raster

_SUM_TOLERANCE = 1e-6


@dataclass
class ClassDistribution:
    """Probability vector over C classes plus the 1-based target index."""

    probs: np.ndarray
    target_index: int
    renormalized: bool = False  # set when an external reply needed cleanup

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or len(p) < 1:
            raise DomainError("probs must be a non-empty vector")
        if (p < 0).any() or (p > 1).any():
            raise DomainError("probabilities must lie in [0, 1]")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        if not 1 <= self.target_index <= len(p):
            raise DomainError(
                f"target index {self.target_index} out of range 1..{len(p)}"
            )
        self.probs = p

    @property
    def num_classes(self) -> int:
        return len(self.probs)

    @property
    def target_probability(self) -> float:
        return float(self.probs[self.target_index - 1])


@dataclass
class PrototypeModel:
    """Deterministic stand-in classifier: one template image per class.

    Scores are softmax(-sharpness * mean squared error) against each
    template, so class evidence can be planted in chosen image regions by
    making templates differ only there.
    """

    templates: list[Image]
    sharpness: float

    def __post_init__(self):
        if not self.templates:
            raise DomainError("need at least one class template")
        shape = self.templates[0].samples.shape
        if any(t.samples.shape != shape for t in self.templates):
            raise DomainError("all templates must share dimensions")
        if self.sharpness <= 0:
            raise DomainError(f"sharpness must be positive, got {self.sharpness}")

    @property
    def num_classes(self) -> int:
        return len(self.templates)

    def classify(self, img: Image, target_class: int) -> ClassDistribution:
        ref = self.templates[0]
        if img.samples.shape != ref.samples.shape:
            raise DomainError(
                f"image {img.width}x{img.height}x{img.channels} does not match "
                f"model input {ref.width}x{ref.height}x{ref.channels}"
            )
        x = img.samples.astype(np.float64)
        mses = np.array(
            [np.mean((x - t.samples.astype(np.float64)) ** 2) for t in self.templates]
        )
        logits = -self.sharpness * mses
        logits -= logits.max()
        weights = np.exp(logits)
        return ClassDistribution(weights / weights.sum(), target_class)


def load_prototype_model(path: str | Path) -> PrototypeModel:
    """Load a model file: JSON with "sharpness" and template raster paths."""
    path = Path(path)
    spec = json.loads(path.read_text())
    templates = [load_raster(path.parent / p) for p in spec["templates"]]
    return PrototypeModel(templates=templates, sharpness=float(spec["sharpness"]))


def save_prototype_model(model: PrototypeModel, path: str | Path) -> None:
    path = Path(path)
    names = []
    for i, t in enumerate(model.templates):
        name = f"template_{i + 1}.{'pgm' if t.channels == 1 else 'ppm'}"
        save_raster(t, path.parent / name)
        names.append(name)
    path.write_text(
        json.dumps({"sharpness": model.sharpness, "templates": names}, indent=2) + "\n"
    )


class ExternalOracle:
    """Client for a classifier process speaking the stdio line protocol.

    Requests are serialized behind a lock; callers that need parallelism run
    multiple processes.
    """

    def __init__(
        self,
        command: str | Sequence[str],
        timeout: float = 30.0,
        startup_timeout: float | None = None,
    ):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._tmpdir = tempfile.TemporaryDirectory(prefix="semtx-oracle-")
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise OracleError(f"failed to start oracle {argv!r}: {e}") from e
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        line = self._read_line(startup_timeout or timeout)
        parts = line.split()
        if len(parts) != 2 or parts[0] != "READY" or not parts[1].isdigit():
            raise OracleError(f"bad handshake line {line!r}")
        self.num_classes = int(parts[1])

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def _read_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise OracleError(f"oracle timed out after {timeout} s") from None
        if line is None:
            raise OracleError("oracle closed its output stream")
        return line

    def classify(self, img: Image, target_class: int) -> ClassDistribution:
        if not 1 <= target_class <= self.num_classes:
            raise DomainError(
                f"target class {target_class} out of range 1..{self.num_classes}"
            )
        with self._lock:
            if self._proc.poll() is not None:
                raise OracleError("oracle process has exited")
            suffix = "pgm" if img.channels == 1 else "ppm"
            img_path = Path(self._tmpdir.name) / f"request.{suffix}"
            save_raster(img, img_path)
            assert self._proc.stdin is not None
            try:
                self._proc.stdin.write(f"CLASSIFY {img_path.resolve()} {target_class}\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise OracleError(f"oracle pipe broke: {e}") from e
            line = self._read_line(self.timeout)
        return self._parse_reply(line, target_class)

    def _parse_reply(self, line: str, target_class: int) -> ClassDistribution:
        parts = line.split()
        if not parts:
            raise OracleError("empty reply line")
        if parts[0] == "ERR":
            raise OracleError(f"oracle error: {line[4:] or 'unspecified'}")
        if parts[0] != "OK":
            raise OracleError(f"malformed reply line {line!r}")
        if len(parts) - 1 != self.num_classes:
            raise OracleError(
                f"reply carries {len(parts) - 1} probabilities, expected {self.num_classes}"
            )
        try:
            probs = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError as e:
            raise OracleError(f"malformed probability in {line!r}") from e
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise OracleError(f"invalid probabilities in {line!r}")
        total = float(probs.sum())
        renormalized = False
        if total == 0.0 or abs(total - 1.0) > _SUM_TOLERANCE:
            raise OracleError(f"probabilities sum to {total}, outside tolerance")
        if total != 1.0:
            probs = probs / total
            renormalized = True
        probs = np.clip(probs, 0.0, 1.0)
        return ClassDistribution(probs, target_class, renormalized=renormalized)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()
        self._tmpdir.cleanup()

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def classify(model, img: Image, target_class: int) -> ClassDistribution:
    """Dispatch to any oracle exposing ``classify(img, target_class)``."""
    return model.classify(img, target_class)
