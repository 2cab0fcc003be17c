from .ensemble_nodes import *
from .selection_nodes import *
from .analysis_nodes import *

NODE_CLASS_MAPPINGS = {
    "MFAlloc_BuildEnsemble": BuildEnsemble,
    "MFAlloc_LoadEnsemble": LoadEnsemble,
    "MFAlloc_SaveEnsemble": SaveEnsemble,
    "MFAlloc_SubsetSelection": SubsetSelection,
    "MFAlloc_FitBifidelity": FitBifidelity,
    "MFAlloc_ReconstructionSweep": ReconstructionSweep,
    "MFAlloc_SubsetOracle": SubsetOracle,
    "MFAlloc_RecoveryDiagnostics": RecoveryDiagnosticsNode,
}

NODE_DISPLAY_NAME_MAPPINGS = {
    "MFAlloc_BuildEnsemble": "Build Ensemble",
    "MFAlloc_LoadEnsemble": "Load Ensemble",
    "MFAlloc_SaveEnsemble": "Save Ensemble",
    "MFAlloc_SubsetSelection": "Subset Selection",
    "MFAlloc_FitBifidelity": "Fit Bifidelity Model",
    "MFAlloc_ReconstructionSweep": "Reconstruction Error Sweep",
    "MFAlloc_SubsetOracle": "Subset Oracle (exhaustive)",
    "MFAlloc_RecoveryDiagnostics": "Recovery Diagnostics",
}
