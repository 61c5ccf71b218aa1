"""CSV ingestion and CSV/JSON result emission."""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from functools import singledispatch
import json
import logging
import math
from pathlib import Path
import sys
from typing import Any, Final

import numpy as np
import pandas as pd
import voluptuous as vol

from .const import (
    FORMAT_CSV,
    FORMAT_JSON,
    KEY_SUMMARY,
    KEY_T_OBSERVED,
    KEY_T_REPLICATES,
    KEY_TAIL_PROB,
    SEED_KEY,
)
from .conjugate import CredibleInterval
from .discrete import DiscreteTable, GridSummary, table_from_frame, table_to_frame
from .distributions import Distribution
from .errors import DataError, IngestError
from .evaluation import PpcResult, SensitivityRow
from .mcmc import ChainReport, DrawMatrix, LaplaceResult, summarize
from .models import GroupCounts, GroupMeans, RegressionData

_LOGGER = logging.getLogger(__name__)


def _whole_number(value: float) -> int:
    if not float(value).is_integer():
        raise vol.Invalid("expected a whole number")
    return int(value)


def _finite(value: float) -> float:
    if not math.isfinite(value):
        raise vol.Invalid("expected a finite number")
    return value


def _text(value: str) -> str:
    if not value:
        raise vol.Invalid("expected a non-empty value")
    return value


NUMBER: Final = vol.All(vol.Coerce(float), _finite)
COUNT: Final = vol.All(vol.Coerce(float), _finite, _whole_number, vol.Range(min=0))
LABEL: Final = vol.All(str, _text)

COUNTS_SCHEMA: Final = {"group": LABEL, "y": COUNT, "n": COUNT}
MEANS_SCHEMA: Final = {"group": LABEL, "ybar": NUMBER, "n": COUNT}


@dataclass(frozen=True, eq=False)
class TypedColumns:
    """Validated CSV columns; row_numbers are 1-based data rows (header excluded)."""

    source: str
    columns: dict[str, tuple[Any, ...]]
    row_numbers: tuple[int, ...]

    def __getitem__(self, name: str) -> tuple[Any, ...]:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.row_numbers)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)


def _read_frame(path: str | Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as err:
        raise IngestError(f"{path}: file is empty") from err
    except pd.errors.ParserError as err:
        raise IngestError(f"{path}: malformed CSV: {err}") from err
    except OSError as err:
        raise IngestError(f"cannot read {path}: {err.strerror or err}") from err
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def csv_header(path: str | Path) -> tuple[str, ...]:
    """Column names of a CSV file."""
    return tuple(_read_frame(path).columns)


def ingest_csv(path: str | Path, schema: Mapping[str, Any]) -> TypedColumns:
    """Read a CSV file and type-check the columns named in schema.

    Args:
        path: CSV file with a header row
        schema: Column name -> voluptuous validator for each cell

    Returns:
        TypedColumns holding the validated schema columns in schema order

    Raises:
        IngestError: On an empty file, a missing column, a header without data
            rows, or a cell that fails its validator (cited as row, column)
    """
    frame = _read_frame(path)
    missing = [name for name in schema if name not in frame.columns]
    if missing:
        raise IngestError(f"{path}: missing column {', '.join(missing)}")
    if frame.empty:
        raise IngestError(f"{path}: no data rows")

    columns: dict[str, tuple[Any, ...]] = {}
    for name, validator in schema.items():
        check = vol.Schema(validator)
        values = []
        for row, cell in enumerate(frame[name], start=1):
            try:
                values.append(check(cell.strip()))
            except vol.Invalid as err:
                raise IngestError(
                    f"{path}: row {row}, column {name}: cannot read {cell!r} ({err.msg})"
                ) from err
        columns[name] = tuple(values)
    _LOGGER.debug("Read %d rows of %s from %s", len(frame), ", ".join(schema), path)
    return TypedColumns(str(path), columns, tuple(range(1, len(frame) + 1)))


def read_group_counts(path: str | Path) -> GroupCounts:
    """group,y,n file -> GroupCounts."""
    table = ingest_csv(path, COUNTS_SCHEMA)
    return GroupCounts(table["y"], table["n"], table["group"])


def read_group_means(path: str | Path, sigma: float) -> GroupMeans:
    """group,ybar,n file -> GroupMeans with known sampling sd."""
    table = ingest_csv(path, MEANS_SCHEMA)
    return GroupMeans(table["ybar"], table["n"], sigma, table["group"])


def read_observations(path: str | Path, column: str = "y") -> np.ndarray:
    """One numeric column as an array."""
    return ingest_csv(path, {column: NUMBER}).array(column)


def read_regression(
    path: str | Path, response: str, covariates: Sequence[str] | None = None
) -> RegressionData:
    """Response plus covariate columns; an intercept column is prepended.

    With covariates unset every column other than the response is used.
    Coefficients are named beta_1 (intercept), beta_2, ... in column order.
    """
    if covariates is None:
        covariates = [name for name in csv_header(path) if name != response]
    if response in covariates:
        raise IngestError(f"{path}: response {response} is also listed as a covariate")
    table = ingest_csv(path, {response: NUMBER, **{name: NUMBER for name in covariates}})
    y = table.array(response)
    x = np.column_stack([np.ones(y.size), *(table.array(name) for name in covariates)])
    _LOGGER.debug("Regressing %s on intercept + %s", response, ", ".join(covariates) or "nothing")
    return RegressionData(x, y)


def read_table(path: str | Path) -> DiscreteTable:
    """Discrete prior written as point_1[,point_2],prob."""
    header = csv_header(path)
    schema = {name: NUMBER for name in header if name in ("point_1", "point_2", "prob")}
    table = ingest_csv(path, schema or {"point_1": NUMBER, "prob": NUMBER})
    return table_from_frame(pd.DataFrame({name: table.array(name) for name in table.columns}))


def load_model_data(path: str | Path) -> dict[str, Any]:
    """Data for a model script from JSON (an object) or CSV (one array per column).

    Blank CSV cells at the end of a column shorten that array, so columns of
    different lengths can share one file.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as err:
            raise IngestError(f"cannot read {path}: {err.strerror or err}") from err
        except json.JSONDecodeError as err:
            raise IngestError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err
        if not isinstance(data, dict):
            raise IngestError(f"{path}: model data must be a JSON object")
        return data

    frame = _read_frame(path)
    data: dict[str, Any] = {}
    for name in frame.columns:
        cells = [cell.strip() for cell in frame[name]]
        while cells and not cells[-1]:
            cells.pop()
        values = []
        for row, cell in enumerate(cells, start=1):
            try:
                values.append(NUMBER(cell))
            except vol.Invalid as err:
                raise IngestError(
                    f"{path}: row {row}, column {name}: cannot read {cell!r} ({err.msg})"
                ) from err
        data[name] = values
    return data


# Emission


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


@singledispatch
def to_payload(result: Any) -> Any:
    """JSON view of a result."""
    raise DataError(f"cannot serialise a {type(result).__name__}")


@to_payload.register
def _(result: dict) -> Any:
    return result


@to_payload.register
def _(result: list) -> Any:
    return [to_payload(item) for item in result]


@to_payload.register
def _(result: pd.DataFrame) -> Any:
    return result.to_dict(orient="list")


@to_payload.register
def _(result: DrawMatrix) -> Any:
    return {
        "columns": list(result.columns),
        "burn_in": result.burn_in,
        "draws": result.values,
    }


@to_payload.register
def _(result: ChainReport) -> Any:
    payload: dict[str, Any] = {
        "n_draws": result.draws.n_draws,
        "burn_in": result.draws.burn_in,
        "acceptance_rate": result.acceptance_rate,
    }
    if result.node_acceptance:
        payload["node_acceptance"] = result.node_acceptance
    if result.scale is not None:
        payload["scale"] = result.scale
    payload["ess"] = result.ess
    payload["summary"] = {
        name: asdict(column) for name, column in summarize(result.draws).items()
    }
    if result.tuning:
        payload["tuning"] = result.tuning
    payload["warnings"] = list(result.warnings)
    return payload


@to_payload.register
def _(result: Distribution) -> Any:
    return {"family": str(result.family), **result.parameters, "mean": result.mean, "sd": result.sd}


@to_payload.register
def _(result: CredibleInterval) -> Any:
    return {
        "lower": result.lower,
        "upper": result.upper,
        "level": result.level,
        "method": str(result.method),
    }


@to_payload.register
def _(result: DiscreteTable) -> Any:
    return {"labels": result.labels, "points": result.points, "probs": result.probs}


@to_payload.register
def _(result: GridSummary) -> Any:
    return asdict(result)


@to_payload.register
def _(result: PpcResult) -> Any:
    return {
        KEY_T_OBSERVED: result.t_observed,
        KEY_T_REPLICATES: result.t_replicates,
        KEY_TAIL_PROB: result.tail_prob,
    }


@to_payload.register
def _(result: SensitivityRow) -> Any:
    return result.as_dict()


@to_payload.register
def _(result: LaplaceResult) -> Any:
    return {
        "mode": result.mode,
        "sd": result.sd,
        "covariance": result.covariance,
        "log_evidence": result.log_evidence,
    }


@singledispatch
def to_frame(result: Any) -> pd.DataFrame:
    """Tidy CSV view of a result; flat payloads become one row."""
    payload = _clean(to_payload(result))
    if isinstance(payload, list):
        return pd.DataFrame([_flatten(item) for item in payload])
    return pd.DataFrame([_flatten(payload)])


def _flatten(payload: Mapping[str, Any]) -> dict[str, Any]:
    row: dict[str, Any] = {}
    for key, value in payload.items():
        if isinstance(value, Mapping):
            for inner, item in _flatten(value).items():
                row[f"{key}_{inner}"] = item
        elif key == KEY_SUMMARY and isinstance(value, list) and len(value) == 2:
            row[f"{key}_lower"], row[f"{key}_upper"] = value
        elif isinstance(value, list):
            row[key] = json.dumps(value)
        else:
            row[key] = value
    return row


@to_frame.register
def _(result: pd.DataFrame) -> pd.DataFrame:
    return result


@to_frame.register
def _(result: DrawMatrix) -> pd.DataFrame:
    return result.to_frame()


@to_frame.register
def _(result: ChainReport) -> pd.DataFrame:
    return result.draws.to_frame()


@to_frame.register
def _(result: DiscreteTable) -> pd.DataFrame:
    return table_to_frame(result)


@to_frame.register
def _(result: PpcResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "replicate": np.arange(1, result.t_replicates.size + 1),
            "t_replicate": result.t_replicates,
            KEY_T_OBSERVED: result.t_observed,
            KEY_TAIL_PROB: result.tail_prob,
        }
    )


def default_format(result: Any) -> str:
    """Draws and tables default to CSV, everything else to JSON."""
    if isinstance(result, (DrawMatrix, ChainReport, DiscreteTable, pd.DataFrame)):
        return FORMAT_CSV
    return FORMAT_JSON


def render(result: Any, fmt: str | None = None, seed: int | None = None) -> str:
    """Serialise a result to text, embedding the seed when given."""
    fmt = fmt or default_format(result)
    if fmt == FORMAT_CSV:
        frame = to_frame(result).copy()
        if seed is not None:
            frame[SEED_KEY] = seed
        return frame.to_csv(index=False, lineterminator="\n")
    if fmt != FORMAT_JSON:
        raise DataError(f"unknown output format {fmt}")
    payload = to_payload(result)
    if seed is not None:
        payload = {**payload, SEED_KEY: seed} if isinstance(payload, dict) else {
            "rows": payload,
            SEED_KEY: seed,
        }
    return json.dumps(_clean(payload), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def emit(
    result: Any,
    fmt: str | None = None,
    path: str | Path | None = None,
    seed: int | None = None,
) -> str:
    """Write a result as CSV or JSON to path, or to standard output.

    Returns:
        The text written

    Raises:
        DataError: If the result type is not serialisable or the path cannot be
            written
    """
    text = render(result, fmt, seed)
    if path is None:
        sys.stdout.write(text)
        return text
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as err:
        raise DataError(f"cannot write {path}: {err.strerror or err}") from err
    _LOGGER.info("Wrote %s", path)
    return text
