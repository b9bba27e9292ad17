"""
CSV ingestion and export for multiway datasets
"""
import io
import logging
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np
import pandas as pd

from mwdml.data.dataset import ColumnMapping, MultiwayDataset, validate
from mwdml.errors import EmptyInputError, ParseError, SchemaError

logger = logging.getLogger(__name__)

CsvSource = Union[str, Path, bytes, BinaryIO]

_NAN_TOKENS = {"nan", "+nan", "-nan"}


def _read_frame(csv_source: CsvSource) -> pd.DataFrame:
    if isinstance(csv_source, bytes):
        csv_source = io.BytesIO(csv_source)
    try:
        frame = pd.read_csv(
            csv_source,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as e:
        raise EmptyInputError("CSV is empty") from e
    if frame.empty:
        raise EmptyInputError("CSV has a header but no rows")
    return frame


def _parse_float(text: str) -> float:
    # float() is correctly rounded, so exported values reload bit-exactly
    if "_" in text:
        return np.nan
    try:
        return float(text)
    except ValueError:
        return np.nan


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    values = raw.map(_parse_float).astype(float)
    bad = values.isna() & ~raw.str.lower().isin(_NAN_TOKENS)
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1
        raise ParseError(f"non-numeric value {raw.iloc[position]!r}", row=position + 2, column=column)
    return values.to_numpy(dtype=float)


def load_dataset(csv_source: CsvSource, schema: ColumnMapping) -> MultiwayDataset:
    """
    Read a multiway dataset from CSV.

    Cluster labels may be arbitrary strings; each index column is re-encoded
    to dense integers 1..C_i in order of first appearance and the
    label map is kept on the dataset.

    Args:
        csv_source: Path, raw bytes or binary stream holding the CSV
        schema: Column mapping

    Returns:
        Validated MultiwayDataset
    """
    frame = _read_frame(csv_source)
    columns = list(frame.columns)

    x_cols = schema.resolve_x(columns)
    required = list(schema.index_cols) + [schema.y_col, schema.d_col, schema.z_col] + x_cols
    for column in required:
        if column not in frame.columns:
            raise SchemaError(f"missing column {column!r}", column=column)

    codes = []
    labels = []
    for column in schema.index_cols:
        raw = frame[column].str.strip()
        if (raw == "").any():
            position = int(np.flatnonzero((raw == "").to_numpy())[0])
            raise ParseError("empty cluster label", row=position + 2, column=column)
        dim_codes, uniques = pd.factorize(raw, sort=False)
        codes.append(dim_codes + 1)
        labels.append(tuple(str(u) for u in uniques))

    dataset = MultiwayDataset(
        cluster_index=np.column_stack(codes),
        cluster_counts=tuple(len(lab) for lab in labels),
        y=_numeric(frame, schema.y_col),
        d=_numeric(frame, schema.d_col),
        z=_numeric(frame, schema.z_col),
        X=np.column_stack([_numeric(frame, c) for c in x_cols]),
        labels=tuple(labels),
        schema=ColumnMapping(
            index_cols=tuple(schema.index_cols),
            y_col=schema.y_col,
            d_col=schema.d_col,
            z_col=schema.z_col,
            x_cols=tuple(x_cols),
        ),
    )
    report = validate(dataset)
    logger.info(
        f"Loaded {report.n_obs:,} observations: C={list(report.cluster_counts)}, "
        f"C_min={report.min_clusters}, N_bar={report.max_occupancy}, "
        f"empty cells={report.n_empty_cells:,}, p={report.n_covariates}"
    )
    return dataset


def export_dataset(dataset: MultiwayDataset, dest=None, schema: Optional[ColumnMapping] = None) -> str:
    """
    Write a dataset back to CSV with its original cluster labels.

    Floats are written with 17 significant digits so a reload is bit-exact.

    Args:
        dataset: Dataset to export
        dest: Optional path or text stream; when None only the text is returned
        schema: Column names; defaults to the dataset's own schema

    Returns:
        The CSV text
    """
    schema = schema or dataset.schema or ColumnMapping.default(dataset.n_dims, dataset.n_covariates)
    x_cols = list(schema.x_cols) if schema.x_cols else [f"x{k + 1}" for k in range(dataset.n_covariates)]

    columns = {}
    for dim, column in enumerate(schema.index_cols):
        lookup = np.array(dataset.labels[dim], dtype=object)
        columns[column] = lookup[dataset.codes[:, dim]]
    columns[schema.y_col] = dataset.y
    columns[schema.d_col] = dataset.d
    columns[schema.z_col] = dataset.z
    for k, column in enumerate(x_cols):
        columns[column] = dataset.X[:, k]

    text = pd.DataFrame(columns).to_csv(index=False, float_format="%.17g", lineterminator="\n")
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            path = Path(dest)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
    return text
