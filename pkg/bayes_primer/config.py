"""Run configuration for command-line invocations."""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
import logging
import os
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .const import (
    ERROR_ITERATIONS,
    GENERATED_SEED_BITS,
    MAX_SEED,
    OUTPUT_FORMATS,
    SEED_ENV_VAR,
)
from .errors import SettingsError, UsageError

_LOGGER = logging.getLogger(__name__)

CONF_COMMAND = "command"
CONF_SEED = "seed"
CONF_FORMAT = "format"
CONF_OUTPUT = "output"
CONF_THREADS = "threads"
CONF_VERBOSE = "verbose"
CONF_ITERS = "iters"
CONF_BURN_IN = "burn_in"
CONF_INPUTS = "inputs"

_SEED = vol.All(vol.Coerce(int), vol.Range(min=0, max=MAX_SEED))

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_COMMAND): vol.All(str, vol.Length(min=1)),
        vol.Optional(CONF_SEED, default=None): vol.Any(None, _SEED),
        vol.Optional(CONF_FORMAT, default=None): vol.Any(None, vol.In(OUTPUT_FORMATS)),
        vol.Optional(CONF_OUTPUT, default=None): vol.Any(None, vol.Coerce(Path)),
        vol.Optional(CONF_THREADS, default=1): vol.All(int, vol.Range(min=1)),
        vol.Optional(CONF_VERBOSE, default=0): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_ITERS, default=None): vol.Any(None, vol.All(int, vol.Range(min=1))),
        vol.Optional(CONF_BURN_IN, default=None): vol.Any(None, vol.All(int, vol.Range(min=0))),
        vol.Optional(CONF_INPUTS, default=list): [vol.Coerce(Path)],
    },
    extra=vol.REMOVE_EXTRA,
)


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one command-line run; the seed is always resolved."""

    command: str
    seed: int
    seed_generated: bool = False
    output_format: str | None = None
    output: Path | None = None
    threads: int = 1
    verbose: int = 0
    iters: int | None = None
    burn_in: int | None = None
    inputs: tuple[Path, ...] = ()


def generate_seed() -> int:
    """Fresh 63-bit seed from OS entropy."""
    return int(np.random.SeedSequence().entropy) & ((1 << GENERATED_SEED_BITS) - 1)


def resolve_seed(
    cli_seed: int | None, environ: Mapping[str, str] | None = None
) -> tuple[int, bool]:
    """Pick the run seed: --seed, then BAYES_PRIMER_SEED, then a generated one.

    Returns:
        (seed, generated)

    Raises:
        UsageError: If the environment variable is not a valid seed
    """
    if cli_seed is not None:
        return cli_seed, False
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV_VAR)
    if raw not in (None, ""):
        try:
            return _SEED(raw.strip()), False
        except vol.Invalid as err:
            raise UsageError(f"{SEED_ENV_VAR}={raw!r} is not a valid seed: {err}") from err
    seed = generate_seed()
    _LOGGER.info("No seed given; generated %d", seed)
    return seed, True


def build_run_config(
    settings: Mapping[str, Any], environ: Mapping[str, str] | None = None
) -> RunConfig:
    """Validate parsed command-line settings into a RunConfig.

    Raises:
        UsageError: If a setting has the wrong type or range
        SettingsError: If iteration counts are inconsistent
    """
    try:
        checked = RUN_CONFIG_SCHEMA(dict(settings))
    except vol.Invalid as err:
        raise UsageError(f"invalid option: {err}") from err
    iters, burn_in = checked[CONF_ITERS], checked[CONF_BURN_IN]
    if iters is not None and burn_in is not None and burn_in >= iters:
        raise SettingsError(f"{ERROR_ITERATIONS} (iters={iters}, burn_in={burn_in})")
    seed, generated = resolve_seed(checked[CONF_SEED], environ)
    return RunConfig(
        command=checked[CONF_COMMAND],
        seed=seed,
        seed_generated=generated,
        output_format=checked[CONF_FORMAT],
        output=checked[CONF_OUTPUT],
        threads=checked[CONF_THREADS],
        verbose=checked[CONF_VERBOSE],
        iters=iters,
        burn_in=burn_in,
        inputs=tuple(checked[CONF_INPUTS]),
    )
