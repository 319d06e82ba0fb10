"""Sectioned ``key = value`` configuration for the CLI.

Sections: ``[phantom] [pmm] [gan] [dcgan] [forest] [experiment]``. Unknown
sections or keys are rejected. Peak templates are written as
``center:width:height`` triples separated by ``;``, in sample-index units.
"""

from __future__ import annotations

import configparser
from dataclasses import replace

from .adversarial import TrainConfig
from .evaluate import GENERATORS, ExperimentConfig, ForestSettings, PmmSettings
from .spectra import (DEFAULT_TEST_COUNTS, DEFAULT_TRAIN_COUNTS, GRADES, Peak, PhantomConfig,
                      default_peaks)

DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


def _int(v):
    return int(v)


def _opt_int(none_words):
    def parse(v):
        return None if v.strip().lower() in none_words else int(v)
    return parse


def _bool(v):
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _peaks(v):
    peaks = []
    for chunk in v.split(";"):
        if chunk.strip():
            c, w, a = (float(x) for x in chunk.split(":"))
            peaks.append(Peak(c, w, a))
    return tuple(peaks)


def _names(v):
    return tuple(x.strip().lower() for x in v.split(",") if x.strip())


_TRAIN_KEYS = {"epochs": _int, "batch_size": _opt_int(("full", "none")), "lr": float,
               "beta1": float, "beta2": float, "snapshot_every": _int}

SCHEMA = {
    "phantom": {"dim": _int, "jitter": float, "noise_std": float, "seed": _int,
                **{f"train_{g.token}": _int for g in GRADES},
                **{f"test_{g.token}": _int for g in GRADES},
                **{f"peaks_{g.token}": _peaks for g in GRADES}},
    "pmm": {"k": _int, "c": _int, "width": float},
    "gan": {**_TRAIN_KEYS, "hidden": _int},
    "dcgan": dict(_TRAIN_KEYS),
    "forest": {"n_trees": _int, "max_depth": _opt_int(("none", "unlimited")),
               "n_features_per_split": _opt_int(("auto", "none"))},
    "experiment": {"seed": _int, "generators": _names, "samples_factor": _int,
                   "plots": _bool, "workers": _int, "train": str, "test": str},
}


def parse_text(text: str, source="<config>") -> dict:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        out = values.setdefault(section, {})
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                out[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key}: {exc}") from None
    return values


def read_values(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return parse_text(fh.read(), source=str(path))


def _train_config(base: TrainConfig, section: dict) -> TrainConfig:
    kw = {k: v for k, v in section.items() if k in _TRAIN_KEYS}
    return replace(base, **kw)


def build_config(values: dict, seed: int | None = None) -> ExperimentConfig:
    """Merge parsed values over the defaults; ``seed`` overrides every config seed."""
    exp = values.get("experiment", {})
    master = seed if seed is not None else exp.get("seed", DEFAULT_SEED)

    ph = values.get("phantom", {})
    dim = ph.get("dim", 64)
    peaks = default_peaks(dim)
    for g in GRADES:
        if f"peaks_{g.token}" in ph:
            peaks[g] = ph[f"peaks_{g.token}"]
    try:
        phantom = PhantomConfig(
            dim=dim, peaks=peaks,
            jitter=ph.get("jitter", 0.1), noise_std=ph.get("noise_std", 0.05),
            train_counts={g: ph.get(f"train_{g.token}", DEFAULT_TRAIN_COUNTS[g]) for g in GRADES},
            test_counts={g: ph.get(f"test_{g.token}", DEFAULT_TEST_COUNTS[g]) for g in GRADES},
            seed=master if seed is not None else ph.get("seed", master))

        p = values.get("pmm", {})
        pmm = PmmSettings(K=p.get("k", 3), c=p.get("c", 10), width=p.get("width", 2.0))
        defaults = ExperimentConfig()
        gan_cfg = _train_config(defaults.gan, values.get("gan", {}))
        dcgan_cfg = _train_config(defaults.dcgan, values.get("dcgan", {}))
        f = values.get("forest", {})
        forest = ForestSettings(f.get("n_trees", 100), f.get("max_depth", 4),
                                f.get("n_features_per_split"))
        return ExperimentConfig(
            phantom=phantom, train_path=exp.get("train"), test_path=exp.get("test"),
            generators=exp.get("generators", GENERATORS), pmm=pmm, gan=gan_cfg,
            gan_hidden=values.get("gan", {}).get("hidden", defaults.gan_hidden),
            dcgan=dcgan_cfg, forest=forest, samples_factor=exp.get("samples_factor", 4),
            seed=master, plots=exp.get("plots", True), workers=exp.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, seed: int | None = None) -> ExperimentConfig:
    return build_config(read_values(path), seed)
