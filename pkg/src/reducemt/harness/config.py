"""Run configuration: TOML file, environment overrides, command-line overrides."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..selection import SELECTION_MODES

ROLES = ("sut", "od", "inpaint", "pos")
ENDPOINT_KINDS = ("simulator", "builtin", "jsonl", "http")
ENV_URL = {role: f"REDUCEMT_{role.upper()}_URL" for role in ROLES}
ALL_MRS = ("MR1", "MR2", "MR3")


@dataclass(frozen=True)
class EndpointConfig:
    kind: str
    command: tuple[str, ...] = ()
    url: str = ""
    timeout: float = 30.0
    retries: int = 2
    max_in_flight: int = 4

    def validate(self, role: str) -> None:
        if self.kind not in ENDPOINT_KINDS:
            raise ConfigError(f"adapters.{role}.kind must be one of {ENDPOINT_KINDS}, got {self.kind!r}")
        if self.kind == "simulator" and role not in ("sut", "od"):
            raise ConfigError(f"adapters.{role}: the simulator only plays sut and od")
        if self.kind == "builtin" and role not in ("inpaint", "pos"):
            raise ConfigError(f"adapters.{role}: there is no builtin {role}")
        if self.kind == "jsonl" and not self.command:
            raise ConfigError(f"adapters.{role}: jsonl transport needs a command")
        if self.kind == "http" and not self.url:
            raise ConfigError(f"adapters.{role}: http transport needs a url")
        if self.timeout <= 0 or self.retries < 0 or self.max_in_flight < 1:
            raise ConfigError(f"adapters.{role}: timeout > 0, retries >= 0 and max_in_flight >= 1 required")


DEFAULT_ENDPOINTS = {
    "sut": EndpointConfig("simulator"),
    "od": EndpointConfig("simulator"),
    "inpaint": EndpointConfig("builtin"),
    "pos": EndpointConfig("builtin"),
}


@dataclass(frozen=True)
class RunConfig:
    images: Path
    output: Path
    sut: EndpointConfig = DEFAULT_ENDPOINTS["sut"]
    od: EndpointConfig = DEFAULT_ENDPOINTS["od"]
    inpaint: EndpointConfig = DEFAULT_ENDPOINTS["inpaint"]
    pos: EndpointConfig = DEFAULT_ENDPOINTS["pos"]
    vectors: Path | None = None
    hypernyms: Path | None = None
    literal_matching: bool = False
    t_down: float = 0.2
    t_up: float = 0.9
    cosine: float = 0.55
    od_score: float = 0.3
    mrs: tuple[str, ...] = ALL_MRS
    k: int = 3
    concurrency: int = 4
    seed: int = 0
    selection_mode: str = "full"
    verbose: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", Path(self.images))
        object.__setattr__(self, "output", Path(self.output))
        object.__setattr__(self, "mrs", tuple(self.mrs))
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.t_down < self.t_up <= 1.0:
            raise ConfigError(f"thresholds need 0 <= t_down < t_up <= 1 (got {self.t_down}, {self.t_up})")
        if not 0.0 < self.cosine <= 1.01:
            raise ConfigError(f"cosine threshold {self.cosine} outside (0, 1.01]")
        if not 0.0 <= self.od_score <= 1.0:
            raise ConfigError(f"od_score {self.od_score} outside [0, 1]")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be at least 1, got {self.concurrency}")
        if not self.mrs or any(mr not in ALL_MRS for mr in self.mrs):
            raise ConfigError(f"mrs must be a nonempty subset of {ALL_MRS}, got {list(self.mrs)}")
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigError(f"selection_mode must be one of {SELECTION_MODES}")
        for role in ROLES:
            self.endpoint(role).validate(role)

    def endpoint(self, role: str) -> EndpointConfig:
        return getattr(self, role)

    @property
    def simulator(self) -> bool:
        return self.sut.kind == "simulator" or self.od.kind == "simulator"

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        for key in ("images", "output", "vectors", "hypernyms"):
            data[key] = None if data[key] is None else str(data[key])
        for role in ROLES:
            data[role]["command"] = list(data[role]["command"])
        data["mrs"] = list(self.mrs)
        return data

    def hash(self) -> str:
        """Digest of every setting that can influence results.

        The output path and worker count are left out: neither changes what a run produces.
        """
        data = self.to_json()
        data.pop("output")
        data.pop("concurrency")
        data["images"] = str(Path(data["images"]).resolve())
        blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, **kwargs: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def _endpoint(data: Mapping[str, Any], role: str) -> EndpointConfig:
    base = DEFAULT_ENDPOINTS[role]
    command = data.get("command", base.command)
    if isinstance(command, str):
        command = command.split()
    try:
        return EndpointConfig(
            kind=str(data.get("kind", base.kind)),
            command=tuple(str(c) for c in command),
            url=str(data.get("url", base.url)),
            timeout=float(data.get("timeout", base.timeout)),
            retries=int(data.get("retries", base.retries)),
            max_in_flight=int(data.get("max_in_flight", base.max_in_flight)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"adapters.{role}: {exc}") from exc


def config_from_mapping(data: Mapping[str, Any], base_dir: Path | None = None,
                        env: Mapping[str, str] | None = None) -> RunConfig:
    base_dir = base_dir or Path.cwd()
    env = os.environ if env is None else env

    def path(value: Any) -> Path | None:
        if value in (None, ""):
            return None
        p = Path(str(value)).expanduser()
        return p if p.is_absolute() else base_dir / p

    known = {"images", "output", "seed", "mrs", "k", "concurrency", "selection_mode", "verbose",
             "thresholds", "matcher", "adapters"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    if "images" not in data:
        raise ConfigError("configuration needs an 'images' directory")
    thresholds = dict(data.get("thresholds", {}))
    matcher = dict(data.get("matcher", {}))
    adapters = dict(data.get("adapters", {}))
    bad_roles = sorted(set(adapters) - set(ROLES))
    if bad_roles:
        raise ConfigError(f"unknown adapter roles: {', '.join(bad_roles)}")
    endpoints = {}
    for role in ROLES:
        ep = _endpoint(dict(adapters.get(role, {})), role)
        url = env.get(ENV_URL[role])
        if url:
            ep = replace(ep, kind="http", url=url)
        endpoints[role] = ep
    try:
        return RunConfig(
            images=path(data["images"]),  # type: ignore[arg-type]
            output=path(data.get("output", "reducemt-run")),  # type: ignore[arg-type]
            vectors=path(matcher.get("vectors")),
            hypernyms=path(matcher.get("hypernyms")),
            literal_matching=bool(matcher.get("literal", False)),
            t_down=float(thresholds.get("t_down", 0.2)),
            t_up=float(thresholds.get("t_up", 0.9)),
            cosine=float(thresholds.get("cosine", 0.55)),
            od_score=float(thresholds.get("od_score", 0.3)),
            mrs=tuple(str(m).upper() for m in data.get("mrs", ALL_MRS)),
            k=int(data.get("k", 3)),
            concurrency=int(data.get("concurrency", 4)),
            seed=int(data.get("seed", 0)),
            selection_mode=str(data.get("selection_mode", "full")),
            verbose=bool(data.get("verbose", False)),
            **endpoints,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, env: Mapping[str, str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data, path.parent.resolve(), env)
