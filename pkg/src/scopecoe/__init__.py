"""Chain-of-evidence discrimination, Non-CoE perturbation, noise-ratio
mixing, and CoE-guided retrieval for multi-hop QA."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CoEVerdict,
    FeatureJudgment,
    KnowledgeSnippet,
    MixedContext,
    Provenance,
    QASample,
    QuestionFeatures,
    Relation,
    SampleSource,
    TrialRecord,
    TrialReport,
    validate_features,
)
