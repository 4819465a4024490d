"""One declarative run configuration: every module's knobs in a YAML file.

Unknown keys are rejected wholesale (all offenders listed at once) and the
resolved configuration hashes to a short digest that every output artifact
carries, so artifacts with equal hashes came from identical configs.
"""

import dataclasses
import hashlib
import json
import yaml
from dataclasses import dataclass, field, asdict

from .sim.generate import SamplerConfig
from .networks import AudioEncoderConfig, GeneratorConfig, DiscriminatorConfig
from .training import TrainConfig

SECTIONS = {
    "sampler": SamplerConfig,
    "encoder": AudioEncoderConfig,
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "training": TrainConfig,
}


@dataclass
class RunConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    encoder: AudioEncoderConfig = field(default_factory=AudioEncoderConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    split_fractions: tuple = (0.8, 0.1, 0.1)
    split_seed: int = 0

    def to_dict(self):
        return asdict(self)


def _build_section(cls, data, path, problems):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    local = []
    for key, value in data.items():
        if key not in fields:
            local.append(f"{path}.{key}: unknown key")
            continue
        default = fields[key].default
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    if local:
        problems.extend(local)
        return None
    try:
        return cls(**kwargs)
    except ValueError as exc:
        problems.append(f"{path}: {exc}")
        return None


def load_run_config(path=None, overrides=None):
    """Parse and validate a YAML config; None means all defaults.

    ``overrides`` maps dotted keys (e.g. "training.max_steps") onto values
    and is applied before validation.
    """
    doc = {}
    if path is not None:
        with open(path) as f:
            doc = yaml.safe_load(f) or {}
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config must be a mapping")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if key:
            doc.setdefault(section, {})[key] = value
        else:
            doc[section] = value

    problems = []
    kwargs = {}
    for name, value in doc.items():
        if name in SECTIONS:
            if not isinstance(value, dict):
                problems.append(f"{name}: expected a mapping")
                continue
            section = _build_section(SECTIONS[name], value, name, problems)
            if section is not None:
                kwargs[name] = section
        elif name == "split_fractions":
            kwargs[name] = tuple(value)
        elif name == "split_seed":
            kwargs[name] = int(value)
        else:
            problems.append(f"{name}: unknown section")
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    return RunConfig(**kwargs)


def config_hash(cfg):
    """Stable short digest of the fully resolved configuration."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
