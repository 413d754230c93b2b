"""On-disk state for the command-line tools: config, registry, device stores.

Layout under the state directory (all paths configurable)::

    config.txt              key = value settings
    ta/registry.json        master keys, CRS and one append-only entry per device
    public/setup.bin        framed public setup bundle
    sensors/<id>.json       sensor non-volatile memory (helper data, cert, counter)
    nodes/<id>/             camera store, boot image and boot ROM
    server/                 replay.cache, verdicts.log, inbox/ of received reports
    caretaker/<id>.json     key-exchange records (hold k_E); replay.cache beside them
    storage/                upload area of the storage server

Randomness is drawn from ``random.Random(f"{seed}:{purpose}")`` when a seed
is configured, otherwise from the OS.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Any

import numpy as np

from . import niwi
from .certibs import Certificate, Enrollment, MasterKeys
from .codes import CODES, CodeParams
from .fuzzy import dump_helper, load_helper
from .groups import DEFAULT_GROUP, PAPER_WIDTHS, ElementWidths, decode_g1, decode_g2, encode_g1, encode_g2
from .node.boot import BootImage, BootRom, BootSigner
from .puf import PROFILES, PufModel, make_profile
from .replay import ReplayCache
from .roles import SetupBundle

CONFIG_NAME = "config.txt"
SENSOR = "sensor"
CAMERA = "camera"
KINDS = (SENSOR, CAMERA)

_IDENT_RE = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")
_PATH_KEYS = ("registry", "sensors_dir", "nodes_dir", "server_dir", "caretaker_dir", "storage_dir",
              "setup_bundle")


class StateError(Exception):
    """Missing or inconsistent harness state (a usage problem)."""


def check_identity(ident: str) -> bytes:
    if not _IDENT_RE.match(ident):
        raise StateError(f"identity {ident!r} must be 1-64 characters of [A-Za-z0-9_.-]")
    return ident.encode()


@dataclass
class HarnessConfig:
    group_widths: ElementWidths = PAPER_WIDTHS
    code: str = "bch"
    sensor_profile: str = "sram32"
    camera_profile: str = "ro"
    seed: int | None = None
    crs_mode: str = niwi.HIDING
    helper_key: str = ""  # hex; integrity key for helper-data files
    replay_capacity: int = 100_000
    max_age: float | None = None
    footage_len: int = 8
    area_threshold: float = 0.01
    pixel_threshold: int = 25
    registry: str = "ta/registry.json"
    sensors_dir: str = "sensors"
    nodes_dir: str = "nodes"
    server_dir: str = "server"
    caretaker_dir: str = "caretaker"
    storage_dir: str = "storage"
    setup_bundle: str = "public/setup.bin"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        w = self.group_widths
        if min(w.g1, w.g2, w.gt, w.zp) <= 0:
            raise ValueError("group widths must be positive")
        if self.code not in CODES:
            raise ValueError(f"unknown code {self.code!r}; choose from {sorted(CODES)}")
        for prof in (self.sensor_profile, self.camera_profile):
            if prof not in PROFILES:
                raise ValueError(f"unknown PUF profile {prof!r}")
        if self.crs_mode not in (niwi.HIDING, niwi.BINDING):
            raise ValueError(f"crs_mode must be {niwi.HIDING} or {niwi.BINDING}")
        paths = [os.path.normpath(getattr(self, k)) for k in _PATH_KEYS]
        if len(set(paths)) != len(paths):
            raise ValueError("state paths must be distinct")
        if self.replay_capacity <= 0 or self.footage_len <= 0:
            raise ValueError("replay_capacity and footage_len must be positive")

    @property
    def code_params(self) -> CodeParams:
        return CODES[self.code]

    @property
    def helper_key_bytes(self) -> bytes:
        if not self.helper_key:
            raise StateError("no helper-data key configured; run 'ta setup' first")
        return bytes.fromhex(self.helper_key)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> HarnessConfig:
        known = {f.name: f for f in dataclasses.fields(cls)}
        values: dict[str, Any] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or key not in known:
                raise ValueError(f"config line {lineno}: cannot parse {raw!r}")
            values[key] = _convert(key, value)
        return cls(**values)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> HarnessConfig:
        return cls.from_text(Path(path).read_text())


def _convert(key: str, value: str) -> Any:
    if key == "group_widths":
        return ElementWidths.parse(value)
    if key in ("seed",):
        return int(value) if value else None
    if key in ("replay_capacity", "footage_len", "pixel_threshold"):
        return int(value)
    if key == "area_threshold":
        return float(value)
    if key == "max_age":
        return float(value) if value else None
    return value


# --- hex helpers for JSON ---------------------------------------------------

def _g1(hexstr: str):
    return decode_g1(bytes.fromhex(hexstr))


def _g2(hexstr: str):
    return decode_g2(bytes.fromhex(hexstr))


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise StateError(f"{path} does not exist") from None


def _save_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


# --- registry -------------------------------------------------------------

@dataclass
class RegistryEntry:
    identity: bytes
    kind: str
    pk: Any
    cert: Certificate
    helpers: list[str]  # hex of integrity-tagged helper files (W and challenge)
    device_seed: int

    def to_json(self) -> dict:
        return {"identity": self.identity.decode(), "kind": self.kind, "pk": encode_g2(self.pk).hex(),
                "cert": encode_g1(self.cert.sig).hex(), "helpers": self.helpers,
                "device_seed": self.device_seed}

    @classmethod
    def from_json(cls, d: dict) -> RegistryEntry:
        pk = _g2(d["pk"])
        return cls(d["identity"].encode(), d["kind"], pk, Certificate(pk, _g1(d["cert"])),
                   list(d["helpers"]), int(d["device_seed"]))


@dataclass
class Registry:
    """TA records: the only file holding msk."""

    master: MasterKeys
    crs: niwi.Crs
    extract_key: niwi.ExtractKey | None = None
    entries: list[RegistryEntry] = field(default_factory=list)

    @property
    def bundle(self) -> SetupBundle:
        return SetupBundle(DEFAULT_GROUP, self.master.mpk, self.crs)

    def find(self, identity: bytes) -> RegistryEntry | None:
        return next((e for e in self.entries if e.identity == identity), None)

    def append(self, entry: RegistryEntry) -> None:
        if self.find(entry.identity) is not None:
            raise ValueError(f"identity {entry.identity.decode()!r} already enrolled")
        self.entries.append(entry)

    def to_json(self) -> dict:
        xk = self.extract_key
        return {
            "group": DEFAULT_GROUP.descriptor().decode(),
            "msk": f"{self.master.msk:x}",
            "mpk": encode_g2(self.master.mpk).hex(),
            "crs": self.crs.to_bytes().hex(),
            "extract_key": None if xk is None else {"alpha": f"{xk.alpha:x}", "beta": f"{xk.beta:x}"},
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_json(cls, d: dict) -> Registry:
        xk = d.get("extract_key")
        return cls(MasterKeys(int(d["msk"], 16), _g2(d["mpk"])),
                   niwi.Crs.from_bytes(bytes.fromhex(d["crs"])),
                   None if xk is None else niwi.ExtractKey(int(xk["alpha"], 16), int(xk["beta"], 16)),
                   [RegistryEntry.from_json(e) for e in d["entries"]])


# --- sensor device memory ---------------------------------------------------

@dataclass
class SensorState:
    enrollment: Enrollment
    device_seed: int
    counter: int = 0
    power_ups: int = 0

    def to_json(self, storage_key: bytes) -> dict:
        e = self.enrollment
        return {"identity": e.identity.decode(), "pk": encode_g2(e.pk).hex(),
                "cert": encode_g1(e.cert.sig).hex(), "helper": dump_helper(e.helper, storage_key).hex(),
                "device_seed": self.device_seed, "counter": self.counter, "power_ups": self.power_ups}

    @classmethod
    def from_json(cls, d: dict, storage_key: bytes) -> SensorState:
        pk = _g2(d["pk"])
        enrollment = Enrollment(d["identity"].encode(), pk, Certificate(pk, _g1(d["cert"])),
                                load_helper(bytes.fromhex(d["helper"]), storage_key))
        return cls(enrollment, int(d["device_seed"]), int(d["counter"]), int(d["power_ups"]))


# --- the state directory ------------------------------------------------------

class State:
    """Resolves paths and seeds for one state directory."""

    def __init__(self, root: str | Path, seed: int | None = None, now: float | None = None) -> None:
        self.root = Path(root)
        self.now = now
        cfg_path = self.root / CONFIG_NAME
        self.config = HarnessConfig.load(cfg_path) if cfg_path.exists() else HarnessConfig()
        if seed is not None:
            self.config.seed = seed

    def clock(self) -> float:
        return time.time() if self.now is None else self.now

    # paths
    def path(self, key: str) -> Path:
        return self.root / getattr(self.config, key)

    @property
    def config_path(self) -> Path:
        return self.root / CONFIG_NAME

    def sensor_path(self, ident: str) -> Path:
        return self.path("sensors_dir") / f"{ident}.json"

    def node_dir(self, ident: str) -> Path:
        return self.path("nodes_dir") / ident

    def record_path(self, ident: str) -> Path:
        return self.path("caretaker_dir") / f"{ident}.json"

    # randomness
    def rng(self, purpose: str) -> Random | None:
        seed = self.config.seed
        return None if seed is None else Random(f"{seed}:{purpose}")

    def np_rng(self, purpose: str) -> np.random.Generator | None:
        r = self.rng(purpose)
        return None if r is None else np.random.default_rng(r.getrandbits(64))

    def device_seed(self, ident: str) -> int:
        """Simulated silicon of a device: fixed by the seed and identity."""
        r = self.rng(f"device:{ident}")
        return r.getrandbits(32) if r is not None else int.from_bytes(os.urandom(4), "big")

    def next_counter(self, name: str) -> int:
        """Persistent per-purpose counter so repeated runs draw fresh randomness."""
        path = self.root / "counters.json"
        data = json.loads(path.read_text()) if path.exists() else {}
        data[name] = data.get(name, 0) + 1
        _save_json(path, data)
        return data[name]

    # registry
    def load_registry(self) -> Registry:
        path = self.path("registry")
        if not path.exists():
            raise StateError(f"no registry at {path}; run 'ta setup' first")
        return Registry.from_json(_load_json(path))

    def save_registry(self, registry: Registry) -> None:
        _save_json(self.path("registry"), registry.to_json())

    def load_bundle(self) -> SetupBundle:
        from .roles import MSG_SETUP_BUNDLE, parse_frame

        path = self.path("setup_bundle")
        if not path.exists():
            raise StateError(f"no setup bundle at {path}; run 'ta setup' first")
        kind, payload = parse_frame(path.read_bytes())
        if kind != MSG_SETUP_BUNDLE:
            raise StateError(f"{path} is not a setup bundle")
        return SetupBundle.from_bytes(payload)

    # devices
    def puf(self, kind: str, device_seed: int, ident: str) -> PufModel:
        profile = self.config.sensor_profile if kind == SENSOR else self.config.camera_profile
        return make_profile(profile, device_seed, ident)

    def load_sensor(self, ident: str) -> SensorState:
        return SensorState.from_json(_load_json(self.sensor_path(ident)), self.config.helper_key_bytes)

    def save_sensor(self, state: SensorState) -> None:
        _save_json(self.sensor_path(state.enrollment.identity.decode()),
                   state.to_json(self.config.helper_key_bytes))

    def load_rom(self, ident: str) -> BootRom:
        d = _load_json(self.node_dir(ident) / "rom.json")
        return BootRom(_g2(d["root_pk"]), bytes.fromhex(d["aes_key"]), bytes.fromhex(d["hmac_key"]),
                       tuple(d["partition_order"]))

    def save_rom(self, ident: str, rom: BootRom) -> None:
        _save_json(self.node_dir(ident) / "rom.json",
                   {"root_pk": encode_g2(rom.root_pk).hex(), "aes_key": rom.aes_key.hex(),
                    "hmac_key": rom.hmac_key.hex(), "partition_order": list(rom.partition_order)})

    def load_boot_image(self, ident: str) -> BootImage:
        path = self.node_dir(ident) / "boot.img"
        try:
            return BootImage.from_bytes(path.read_bytes())
        except FileNotFoundError:
            raise StateError(f"{path} does not exist") from None

    def load_replay(self, key: str, name: str = "replay.cache") -> ReplayCache:
        path = self.path(key) / name
        if path.exists():
            return ReplayCache.from_json(_load_json(path), clock=self.clock)
        return ReplayCache(self.config.replay_capacity, self.config.max_age, clock=self.clock)

    def save_replay(self, key: str, cache: ReplayCache, name: str = "replay.cache") -> None:
        _save_json(self.path(key) / name, cache.to_json())


def new_helper_key(state: State) -> str:
    r = state.rng("helper-key")
    return (r.randbytes(32) if r is not None else os.urandom(32)).hex()


def signer_for(state: State, ident: str) -> BootSigner:
    """Vendor image-signing key for one camera (simulation only)."""
    return BootSigner.generate(state.rng(f"vendor:{ident}"))

