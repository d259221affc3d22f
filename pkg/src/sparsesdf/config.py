"""Run configuration files (TOML or JSON).

A run configuration has a master ``seed``, a ``threads`` count and one table
per stage::

    seed = 7
    threads = 1

    [panel]          # source = "synthetic" (uses [planted]) or "csv" (uses path)
    [planted]        # PlantedKernelSpec fields except seed
    [sweep]          # SweepConfig fields except seed and threads
    [verify]         # VerifySettings fields except seed, plus optional fault

The master seed feeds every stage.  Only the seed and thread count may be
overridden from the environment (``SPARSESDF_SEED``, ``SPARSESDF_THREADS``);
command-line flags take precedence over both.
"""

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .backtest import SweepConfig
from .errors import ValidationError
from .panel import PlantedKernelSpec, load_panel, synth_panel
from .theory import VerifySettings

ENV_SEED = "SPARSESDF_SEED"
ENV_THREADS = "SPARSESDF_THREADS"
SECTIONS = ("panel", "planted", "sweep", "verify")
PANEL_KEYS = ("source", "path", "T_total", "N", "D", "start_month", "max_missing")


@dataclass
class PanelSource:
    source: str = "synthetic"
    path: str | None = None
    T_total: int = 180
    N: int = 100
    D: int = 3
    start_month: int = 200001
    max_missing: float = 0.30

    def validate(self):
        if self.source not in ("synthetic", "csv"):
            raise ValidationError(f"panel.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ValidationError("panel.path is required when panel.source = 'csv'")


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    panel: PanelSource = field(default_factory=PanelSource)
    planted: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    base_dir: str = "."

    def planted_spec(self):
        return _build(PlantedKernelSpec, self.planted, "planted", seed=self.seed)

    def sweep_config(self):
        return _build(SweepConfig, self.sweep, "sweep", seed=self.seed, threads=self.threads)

    def verify_settings(self):
        opts = {k: v for k, v in self.verify.items() if k != "fault"}
        return _build(VerifySettings, opts, "verify", seed=self.seed)

    @property
    def fault(self):
        return self.verify.get("fault")

    def load_panel(self):
        """The panel described by ``[panel]`` (simulated or read from CSV)."""
        p = self.panel
        p.validate()
        if p.source == "csv":
            return load_panel(self.panel_path(), D=p.D, max_missing=p.max_missing)
        panel, _ = synth_panel(self.planted_spec(), p.T_total, p.N, p.D, p.start_month)
        return panel

    def panel_path(self):
        path = self.panel.path
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def snapshot(self):
        """Resolved configuration, loadable by :func:`load_config` on its own."""
        panel = asdict(self.panel)
        if self.panel.source == "csv":
            panel["path"] = os.path.abspath(self.panel_path())
        return _jsonable({"seed": self.seed, "threads": self.threads, "panel": panel,
                          "planted": self.planted, "sweep": self.sweep, "verify": self.verify})


def _jsonable(obj):
    return json.loads(json.dumps(obj))


def _build(cls, opts, section, **fixed):
    names = {f.name for f in fields(cls)}
    clash = sorted(set(opts) & set(fixed))
    if clash:
        raise ValidationError(f"[{section}] may not set {clash}; use the top-level value")
    unknown = sorted(set(opts) - names)
    if unknown:
        raise ValidationError(f"[{section}] has unknown keys {unknown}")
    args = dict(opts)
    args.update({k: v for k, v in fixed.items() if k in names})
    for k, v in args.items():
        if isinstance(v, list):
            args[k] = tuple(v)
    try:
        obj = cls(**args)
    except TypeError as exc:
        raise ValidationError(f"[{section}] {exc}") from exc
    if hasattr(obj, "validate"):
        obj.validate()
    return obj


def _env_int(name, environ):
    text = environ.get(name)
    if text is None or text == "":
        return None
    try:
        value = int(text)
    except ValueError:
        raise ValidationError(f"environment variable {name}={text!r} is not an integer") from None
    return value


def parse_config(data, base_dir=".", environ=None, seed=None, threads=None):
    """Build a :class:`RunConfig` from a parsed mapping.

    Precedence for ``seed`` and ``threads``: explicit argument, environment,
    file, default.  A run manifest (``{"manifest_version": ..., "config": ...}``)
    is accepted in place of a config and replays its snapshot.
    """
    if not isinstance(data, dict):
        raise ValidationError("config must be a table/object")
    if "manifest_version" in data:
        data = data.get("config") or {}
    data = copy.deepcopy(data)
    environ = os.environ if environ is None else environ
    unknown = sorted(set(data) - set(SECTIONS) - {"seed", "threads"})
    if unknown:
        raise ValidationError(f"unknown config keys {unknown}")
    for sec in SECTIONS:
        if not isinstance(data.get(sec, {}), dict):
            raise ValidationError(f"[{sec}] must be a table")
    panel_opts = data.get("panel", {})
    bad = sorted(set(panel_opts) - set(PANEL_KEYS))
    if bad:
        raise ValidationError(f"[panel] has unknown keys {bad}")
    cfg = RunConfig(
        seed=int(data.get("seed", 0)),
        threads=int(data.get("threads", os.cpu_count() or 1)),
        panel=PanelSource(**panel_opts),
        planted=data.get("planted", {}),
        sweep=data.get("sweep", {}),
        verify=data.get("verify", {}),
        base_dir=base_dir,
    )
    env_seed, env_threads = _env_int(ENV_SEED, environ), _env_int(ENV_THREADS, environ)
    if env_seed is not None:
        cfg.seed = env_seed
    if env_threads is not None:
        cfg.threads = env_threads
    if seed is not None:
        cfg.seed = int(seed)
    if threads is not None:
        cfg.threads = int(threads)
    if not 0 <= cfg.seed < 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    if cfg.threads < 1:
        raise ValidationError("threads must be >= 1")
    cfg.panel.validate()
    return cfg


def read_config_file(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        if path.endswith(".json"):
            return json.loads(raw.decode("utf-8")), raw
        return tomllib.loads(raw.decode("utf-8")), raw
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc


def load_config(path, environ=None, seed=None, threads=None):
    """Read a TOML (default) or JSON (``.json``) run configuration."""
    data, _ = read_config_file(path)
    return parse_config(data, os.path.dirname(os.path.abspath(path)), environ, seed, threads)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


__all__ = ["PanelSource", "RunConfig", "file_sha256", "load_config",
           "parse_config", "read_config_file"]
