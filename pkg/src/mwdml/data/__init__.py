from mwdml.data.dataset import (  # noqa: F401
    ColumnMapping,
    MultiwayDataset,
    Observation,
    ValidationReport,
    validate,
)
from mwdml.data.io import export_dataset, load_dataset  # noqa: F401
