"""Layered run configuration for the command-line front end.

Settings merge across four layers, later ones winning:

    built-in defaults  <  INI config file  <  UWBSIM_* environment  <  flags

The file uses flat INI sections named after the package modules they
configure ([experiments], [signal_model], [sequential], [tdoa], [cli]).
Unknown sections or keys are rejected with an error naming the offender, as
are values that fail to parse; silent typo-tolerance in experiment configs
costs days of wrong results.

Environment overrides use UWBSIM_<SECTION>_<KEY>=value (case-insensitive on
the section/key part), e.g. UWBSIM_EXPERIMENTS_SEED=7.  Variables that do
not start with a known section name are left alone: other parts of the
toolkit read their own UWBSIM_* switches (such as UWBSIM_BACKEND).
"""

from __future__ import annotations

import configparser
import os

from .errors import ConfigError
from .experiments import ExperimentSpec

__all__ = [
    "SCHEMA",
    "load_config_file",
    "env_overrides",
    "merge_layers",
    "build_spec",
    "cli_options",
    "parse_anchors",
    "parse_bounds",
]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_tristate(text: str):
    """true/false, or 'auto' meaning: let the experiment kind decide."""
    low = text.strip().lower()
    if low == "auto":
        return None
    return _parse_bool(text)


def _parse_str_list(text: str) -> tuple:
    items = tuple(part.strip() for part in text.split(",") if part.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _parse_float_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(",") if part.strip())


def parse_anchors(value: str) -> tuple:
    """Anchor coordinates from 'x,y[,z];x,y[,z];...' or from a file.

    A value that does not parse inline is treated as a path to a text file
    holding the same syntax (semicolons and/or one anchor per line).
    """
    text = value.strip()
    try:
        return _parse_anchor_text(text)
    except ValueError:
        if os.path.exists(text):
            with open(text, "r", encoding="utf-8") as fh:
                return _parse_anchor_text(fh.read())
        raise ValueError(
            f"anchors must be 'x,y[,z];...' or an existing file, got {value!r}"
        ) from None


def _parse_anchor_text(text: str) -> tuple:
    groups = [g for chunk in text.splitlines() for g in chunk.split(";") if g.strip()]
    if not groups:
        raise ValueError("no anchors given")
    anchors = []
    for g in groups:
        coords = tuple(float(c) for c in g.split(",") if c.strip())
        if len(coords) not in (2, 3):
            raise ValueError(f"anchor needs 2 or 3 coordinates, got {g.strip()!r}")
        anchors.append(coords)
    dims = {len(a) for a in anchors}
    if len(dims) != 1:
        raise ValueError("anchors mix 2-D and 3-D coordinates")
    return tuple(anchors)


def parse_bounds(value: str) -> tuple:
    """Service-region bounds from 'lo,hi;lo,hi[;lo,hi]'."""
    pairs = []
    for g in value.split(";"):
        if not g.strip():
            continue
        parts = tuple(float(c) for c in g.split(",") if c.strip())
        if len(parts) != 2:
            raise ValueError(f"bound needs 'low,high', got {g.strip()!r}")
        pairs.append(parts)
    if not pairs:
        raise ValueError("no bounds given")
    return tuple(pairs)


# section -> key -> (parser, ExperimentSpec field or None for cli-only keys)
SCHEMA = {
    "experiments": {
        "algorithms": (_parse_str_list, "algorithms"),
        "rr": (_parse_float_list, "rr_grid"),
        "snr_db": (float, "snr_db"),
        "trials": (int, "trials"),
        "seed": (int, "seed"),
        "tags": (int, "tags"),
        "resolution": (int, "resolution"),
        "drift_scale": (float, "drift_scale"),
        "interleave": (_parse_tristate, "interleave"),
    },
    "signal_model": {
        "n": (int, "n"),
        "dt": (float, "dt"),
        "pulse_sigma": (float, "pulse_sigma"),
        "channel": (str.strip, "channel"),
    },
    "sequential": {
        "f_p": (float, "f_p"),
        "f_s": (float, "f_s"),
        "samples": (int, "seq_samples"),
    },
    "tdoa": {
        "anchors": (parse_anchors, "anchors"),
        "bounds": (parse_bounds, "bounds"),
    },
    "cli": {
        "out": (str.strip, None),
        "threads": (int, None),
    },
}


def _parse_value(section: str, key: str, raw: str):
    if section not in SCHEMA:
        raise ConfigError(
            f"unknown section [{section}] (known: {', '.join(sorted(SCHEMA))})"
        )
    keys = SCHEMA[section]
    if key not in keys:
        raise ConfigError(
            f"unknown key '{key}' in section [{section}] "
            f"(known: {', '.join(sorted(keys))})"
        )
    parser = keys[key][0]
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from None


def load_config_file(path) -> dict:
    """Parse and validate one INI file into {section: {key: parsed value}}."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    out: dict = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            out.setdefault(section, {})[key] = _parse_value(section, key, raw)
    return out


def env_overrides(environ=None) -> dict:
    """Collect UWBSIM_<SECTION>_<KEY> overrides from the environment.

    Variables whose name does not start with a schema section are ignored
    (they belong to other toolkit switches); a matching section with an
    unknown key is an error, exactly like in a file.
    """
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, raw in environ.items():
        if not name.startswith("UWBSIM_"):
            continue
        rest = name[len("UWBSIM_"):].lower()
        for section in SCHEMA:
            prefix = section + "_"
            if rest.startswith(prefix):
                key = rest[len(prefix):]
                out.setdefault(section, {})[key] = _parse_value(section, key, raw)
                break
    return out


def merge_layers(*layers: dict) -> dict:
    """Merge {section: {key: value}} dicts; later layers win per key."""
    merged: dict = {}
    for layer in layers:
        for section, keys in layer.items():
            merged.setdefault(section, {}).update(keys)
    return merged


def build_spec(kind: str, merged: dict) -> ExperimentSpec:
    """Turn merged config layers into an ExperimentSpec for `kind`."""
    kwargs = {}
    for section, keys in merged.items():
        for key, value in keys.items():
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            field = SCHEMA[section][key][1]
            if field is not None:
                kwargs[field] = value
    try:
        return ExperimentSpec(kind=kind, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cli_options(merged: dict) -> dict:
    """The [cli] section with defaults filled in."""
    out = dict(merged.get("cli", {}))
    out.setdefault("out", None)
    out.setdefault("threads", 1)
    if out["threads"] < 0:
        raise ConfigError("cli.threads must be >= 0 (0 = all cores)")
    return out
