"""foamwright: OpenFOAM case configuration from documents.

Builds a knowledge base from tutorial trees, extracts case specifications
from user documents through a role-split LLM gateway, generates complete
cases, and runs an execute-classify-correct loop until the case completes
ten solver steps. All LLM and solver dependencies sit behind pluggable,
scriptable boundaries, so the entire pipeline runs offline.
"""

__version__ = "0.1.0"
