"""Load run profiles and config files into a :class:`SimConfig`."""

import json
import os

from pcof.definitions import PROFILES_DIR
from pcof.errors import ConfigError
from pcof.sim_harness import SCHEMES, SimConfig

# Keys accepted in profiles and config files, with their defaults.
DEFAULT_ARGS = {
    "antennas": 2,
    "snr_db_start": 0.0,
    "snr_db_end": 50.0,
    "snr_db_step": 5.0,
    "trials": 1000,
    "seed": 0,
    "schemes": ",".join(SCHEMES),
    "prime": 7,
    "out": "pcof_rates.csv",
    "workers": 0,
    "alternate_roles": True,
    "random_seed_vector": False,
    "enumeration": "schnorr_euchner",
    "max_retries": 10,
}


def _load_json_args(path):
    try:
        with open(path) as fp:
            args_dict = json.load(fp)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc.strerror)) from exc
    except ValueError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(args_dict, dict):
        raise ConfigError("%s must hold a JSON object" % path)
    unknown = sorted(set(args_dict) - set(DEFAULT_ARGS))
    if unknown:
        raise ConfigError("%s has unknown keys: %s" % (path, ", ".join(unknown)))
    return args_dict


def _fill_unset(args, args_dict):
    for key, val in args_dict.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    return args


def get_profile_args(args):
    """Fill args left unset with those of ``args.profile``.

    :rtype: argparse.Namespace
    """
    profile_args_path = \
        os.path.join(PROFILES_DIR, args.profile, args.profile + "_args.json")
    if not os.path.exists(profile_args_path):
        raise ConfigError("unknown profile %r" % (args.profile,))
    return _fill_unset(args, _load_json_args(profile_args_path))


def get_config_args(args):
    """Fill args left unset with those of the JSON file ``args.config``.

    :rtype: argparse.Namespace
    """
    return _fill_unset(args, _load_json_args(args.config))


def snr_grid(start, end, step):
    """Inclusive SNR grid in dB.

    :rtype: tuple[float]
    """
    if not step > 0:
        raise ConfigError("SNR step must be positive, got %r" % (step,))
    if end < start:
        raise ConfigError("SNR end %r is below start %r" % (end, start))
    count = int((end - start) / step + 1e-9) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


def _parse_schemes(schemes):
    if isinstance(schemes, str):
        schemes = [s.strip() for s in schemes.split(",")]
    return tuple(s for s in schemes if s)


def _as_int(key, val):
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError("%s must be an integer, got %r" % (key, val))
    return int(val)


def _as_bool(key, val):
    if not isinstance(val, bool):
        raise ConfigError("%s must be true or false, got %r" % (key, val))
    return val


def _resolve_workers(val):
    # 0 means one worker per CPU.
    workers = _as_int("workers", val)
    return (os.cpu_count() or 1) if workers == 0 else workers


def build_config(args):
    """Merge flags, config file, profile and defaults, in that priority.

    :param argparse.Namespace args: parsed command line; unset options are ``None``
    :rtype: SimConfig
    :raises ConfigError: on invalid settings
    """
    if getattr(args, "config", None):
        args = get_config_args(args)
    if getattr(args, "profile", None):
        args = get_profile_args(args)
    args = _fill_unset(args, DEFAULT_ARGS)

    try:
        start, end, step = (float(args.snr_db_start), float(args.snr_db_end),
                            float(args.snr_db_step))
    except (TypeError, ValueError) as exc:
        raise ConfigError("SNR settings must be numbers") from exc
    grid = snr_grid(start, end, step)

    config = SimConfig(
        M=_as_int("antennas", args.antennas),
        snr_grid_db=grid,
        trials=_as_int("trials", args.trials),
        seed=_as_int("seed", args.seed),
        schemes=_parse_schemes(args.schemes),
        prime=_as_int("prime", args.prime),
        output_path=str(args.out),
        workers=_resolve_workers(args.workers),
        alternate_roles=_as_bool("alternate_roles", args.alternate_roles),
        random_seed_vector=_as_bool("random_seed_vector", args.random_seed_vector),
        enumeration=str(args.enumeration),
        max_retries=_as_int("max_retries", args.max_retries),
    )
    return config.validate()
