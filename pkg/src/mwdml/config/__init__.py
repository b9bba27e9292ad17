from mwdml.config.schema import (  # noqa: F401
    CVSettings,
    DGPParams,
    DGPWeights,
    DMLConfig,
    DataSection,
    EstimateConfig,
    GridRow,
    PenaltyConfig,
    SimulationConfig,
    load_yaml,
    parse_model,
)
